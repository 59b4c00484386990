//! Network construction.
//!
//! Two strategies share one candidate-fitting path:
//!
//! * **layered**: exhaustive pairs per layer, keep the `F` lowest-criterion
//!   neurons, stop when the best criterion changes by less than `Delta`
//!   between consecutive layers and return the best neuron of the previous
//!   layer;
//! * **incremental**: draw random pairs from the pool of features and
//!   accepted neurons, accept a new neuron only if its criterion beats both
//!   parents, stop after `fail_budget` consecutive rejections.
//!
//! The criterion of every candidate is the sum of squared residuals over
//! all rows (training and validation).

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FitError, GrowthError};
use crate::fitting::{
    exterior_criterion, fit_affine, fit_least_squares, fit_projection, DesignPair, FitParams,
    FitTrace,
};
use crate::model::{eval_transfer, InputRef, Neuron, PolyNetwork, Weights4, DEFAULT_THRESHOLD};
use crate::rng::{derive_seed, seeded};
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Layered,
    Incremental,
}

/// How candidate weights are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fitter {
    /// Projection rule with validation stopping.
    Projection,
    /// Damped least squares on the training rows (conventional GMDH).
    LeastSquares,
}

/// Which inputs layer `r >= 2` candidates may combine in layered growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerInputs {
    /// Pairs of previous-layer survivors only.
    Survivors,
    /// Survivor pairs plus every survivor paired with every raw feature.
    SurvivorsAndFeatures,
}

/// What the network is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSource {
    /// 0/1 class labels.
    Label,
    /// The continuous `target` column.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Seeded random split, stratified by label when labels exist.
    Stratified,
    /// Deterministic alternation: every k-th row goes to validation.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthParams {
    pub strategy: Strategy,
    /// Survivors per layer; `None` means [`default_f`] of the feature count.
    /// Unused by the incremental strategy.
    pub f: Option<usize>,
    /// Layer stopping threshold on the change of the best criterion.
    pub delta_stop: f64,
    pub fail_budget: usize,
    pub max_layers: usize,
    pub seed: u64,
    pub fitter: Fitter,
    pub layer_inputs: LayerInputs,
    pub target: TargetSource,
    pub split_mode: SplitMode,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            strategy: Strategy::Layered,
            f: None,
            delta_stop: 1e-4,
            fail_budget: 7,
            max_layers: 10,
            seed: 0,
            fitter: Fitter::Projection,
            layer_inputs: LayerInputs::Survivors,
            target: TargetSource::Label,
            split_mode: SplitMode::Stratified,
        }
    }
}

impl GrowthParams {
    pub fn validate(&self) -> Result<(), GrowthError> {
        if self.f == Some(0) {
            return Err(GrowthError::BadParams("F must be at least 1".into()));
        }
        if !(self.delta_stop > 0.0) {
            return Err(GrowthError::BadParams(format!(
                "Delta must be positive, got {}",
                self.delta_stop
            )));
        }
        if self.fail_budget == 0 {
            return Err(GrowthError::BadParams("fail budget must be at least 1".into()));
        }
        if self.max_layers == 0 {
            return Err(GrowthError::BadParams("max layers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Selection width `round(0.4 * C(m, 2))`, at least 1.
pub fn default_f(m: usize) -> Result<usize, GrowthError> {
    if m < 2 {
        return Err(GrowthError::TooSmall { needed: 2, got: m });
    }
    let pairs = (m * (m - 1) / 2) as f64;
    Ok(((0.4 * pairs).round() as usize).max(1))
}

/// All unordered pairs `(pool[i], pool[j])`, `i < j`, in lexicographic order.
pub fn generate_layer_candidates(pool: &[InputRef]) -> Result<Vec<[InputRef; 2]>, GrowthError> {
    if pool.len() < 2 {
        return Err(GrowthError::TooSmall {
            needed: 2,
            got: pool.len(),
        });
    }
    let mut out = Vec::with_capacity(pool.len() * (pool.len() - 1) / 2);
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            out.push([pool[i], pool[j]]);
        }
    }
    Ok(out)
}

/// A fitted candidate neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub inputs: [InputRef; 2],
    pub weights: Weights4,
    pub criterion: f64,
    pub creation_index: usize,
    /// Outputs on every row, in table order.
    pub outputs: Vec<f64>,
    pub trace: Option<FitTrace>,
}

/// The `f` lowest-criterion candidates in ascending order; ties go to the
/// smaller creation index.
pub fn select_best(mut candidates: Vec<Candidate>, f: usize) -> Result<Vec<Candidate>, GrowthError> {
    if candidates.is_empty() {
        return Err(GrowthError::TooSmall { needed: 1, got: 0 });
    }
    candidates.sort_by(|a, b| {
        a.criterion
            .total_cmp(&b.criterion)
            .then(a.creation_index.cmp(&b.creation_index))
    });
    candidates.truncate(f);
    Ok(candidates)
}

/// Row partition into training (A) and validation (B).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Splits `n` rows with validation share `ratio`. Both parts are non-empty.
pub fn split_rows(
    n: usize,
    labels: Option<&[u8]>,
    ratio: f64,
    mode: SplitMode,
    seed: u64,
) -> Result<Split, GrowthError> {
    if n < 2 {
        return Err(GrowthError::TooSmall { needed: 2, got: n });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(GrowthError::BadParams(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut is_val = vec![false; n];
    match mode {
        SplitMode::Interleaved => {
            // Bresenham-style spacing hits the ratio exactly over the table.
            let mut acc = 0.0;
            for v in is_val.iter_mut() {
                acc += ratio;
                if acc >= 1.0 - 1e-12 {
                    *v = true;
                    acc -= 1.0;
                }
            }
        }
        SplitMode::Stratified => {
            let mut rng = seeded(seed);
            let groups: Vec<Vec<usize>> = match labels {
                Some(l) => (0..2u8)
                    .map(|c| (0..n).filter(|&r| l[r] == c).collect())
                    .collect(),
                None => vec![(0..n).collect()],
            };
            // Largest-remainder allocation so the total is round(ratio * n);
            // ties go to the smaller class.
            let target = (ratio * n as f64).round() as usize;
            let exact: Vec<f64> = groups.iter().map(|g| ratio * g.len() as f64).collect();
            let mut ks: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
            let mut order: Vec<usize> = (0..groups.len()).collect();
            order.sort_by(|&a, &b| {
                let fa = exact[a] - exact[a].floor();
                let fb = exact[b] - exact[b].floor();
                fb.total_cmp(&fa).then(groups[a].len().cmp(&groups[b].len())).then(a.cmp(&b))
            });
            let mut left = target.saturating_sub(ks.iter().sum());
            for &c in &order {
                if left == 0 {
                    break;
                }
                if ks[c] < groups[c].len() {
                    ks[c] += 1;
                    left -= 1;
                }
            }
            for (mut g, k) in groups.into_iter().zip(ks) {
                g.shuffle(&mut rng);
                for &r in &g[..k] {
                    is_val[r] = true;
                }
            }
        }
    }
    let n_val = is_val.iter().filter(|&&v| v).count();
    // keep both partitions non-empty on tiny tables
    if n_val == 0 {
        is_val[n - 1] = true;
    } else if n_val == n {
        is_val[0] = false;
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| is_val[r]);
    Ok(Split { train, val })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthStop {
    /// Layered: the Delta rule fired.
    DeltaRule,
    /// Layered: `max_layers` reached.
    LayerCap,
    /// Layered: no candidate pairs left for the next layer.
    NoCandidates,
    /// Incremental: `fail_budget` consecutive rejections.
    FailBudget,
    /// Incremental: global attempt cap reached.
    AttemptCap,
}

/// Summary of one candidate fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub creation_index: usize,
    pub layer: u32,
    pub criterion: f64,
    pub trace: Option<FitTrace>,
}

/// One incremental attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub parents: [String; 2],
    /// Pool positions of the parents: features first, then accepted neurons
    /// in acceptance order.
    pub parent_slots: [usize; 2],
    pub parent_criteria: [f64; 2],
    pub criterion: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthTrace {
    pub strategy: Strategy,
    /// Best criterion per layer (layered).
    pub layer_min_criteria: Vec<f64>,
    /// Layer at which growth stopped (layered), `r*`.
    pub final_layer: usize,
    /// Layer whose best neuron became the output (layered).
    pub output_layer: usize,
    /// Attempt log (incremental).
    pub attempts: Vec<Attempt>,
    /// Criterion of each raw feature's affine fit (incremental pool seeds).
    pub feature_criteria: Vec<f64>,
    pub stop: GrowthStop,
    /// Every candidate fit, in creation order.
    pub fits: Vec<FitRecord>,
    /// Creation index of each neuron of the returned network.
    pub network_creation_indices: Vec<usize>,
}

impl GrowthTrace {
    fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            layer_min_criteria: Vec::new(),
            final_layer: 0,
            output_layer: 0,
            attempts: Vec::new(),
            feature_criteria: Vec::new(),
            stop: GrowthStop::LayerCap,
            fits: Vec::new(),
            network_creation_indices: Vec::new(),
        }
    }
}

/// Column data, fitting target and partition shared by all candidate fits.
struct Workspace<'a> {
    columns: &'a [Vec<f64>],
    y: Vec<f64>,
    split: Split,
    fit: FitParams,
    fitter: Fitter,
}

impl<'a> Workspace<'a> {
    fn new(data: &'a FeatureTable, g: &GrowthParams, f: &FitParams) -> Result<Self, GrowthError> {
        g.validate()?;
        f.validate()?;
        let n = data.n_rows();
        if n == 0 {
            return Err(GrowthError::EmptyData);
        }
        if data.n_features() < 2 {
            return Err(GrowthError::TooSmall {
                needed: 2,
                got: data.n_features(),
            });
        }
        let y: Vec<f64> = match g.target {
            TargetSource::Label => data
                .labels()
                .ok_or(GrowthError::NoTarget)?
                .iter()
                .map(|&l| f64::from(l))
                .collect(),
            TargetSource::Regression => data.targets().ok_or(GrowthError::NoTarget)?.to_vec(),
        };
        let split = split_rows(n, data.labels(), f.split_ratio, g.split_mode, g.seed)?;
        Ok(Self {
            columns: data.columns(),
            y,
            split,
            fit: *f,
            fitter: g.fitter,
        })
    }

    fn fit(
        &self,
        inputs: [InputRef; 2],
        v1: &[f64],
        v2: &[f64],
        creation_index: usize,
    ) -> Result<Candidate, FitError> {
        let pick = |rows: &[usize]| -> (Vec<[f64; 2]>, Vec<f64>) {
            rows.iter().map(|&r| ([v1[r], v2[r]], self.y[r])).unzip()
        };
        let (ua, ya) = pick(&self.split.train);
        let (weights, trace) = match self.fitter {
            Fitter::LeastSquares => (fit_least_squares(&ua, &ya)?, None),
            Fitter::Projection => {
                let (ub, yb) = pick(&self.split.val);
                let design = DesignPair::new(ua, ya, ub, yb)?;
                let p = FitParams {
                    seed: derive_seed(self.fit.seed, creation_index as u64),
                    ..self.fit
                };
                let (w, t) = fit_projection(&design, &p)?;
                (w, Some(t))
            }
        };
        let outputs: Vec<f64> = v1
            .iter()
            .zip(v2)
            .map(|(&a, &b)| eval_transfer(a, b, &weights))
            .collect();
        let criterion = exterior_criterion(&outputs, &self.y)?;
        Ok(Candidate {
            inputs,
            weights,
            criterion,
            creation_index,
            outputs,
            trace,
        })
    }

    fn column<'b>(&'b self, r: InputRef, neuron_outputs: &'b [Vec<f64>]) -> &'b [f64] {
        match r {
            InputRef::Feature(i) => &self.columns[i],
            InputRef::Neuron(j) => &neuron_outputs[j],
        }
    }

    /// Criterion of the damped affine fit `y ~ a + b*x` on the training rows.
    fn feature_criterion(&self, i: usize) -> Result<f64, FitError> {
        let x = &self.columns[i];
        let xa: Vec<f64> = self.split.train.iter().map(|&r| x[r]).collect();
        let ya: Vec<f64> = self.split.train.iter().map(|&r| self.y[r]).collect();
        let (a, b) = fit_affine(&xa, &ya)?;
        let pred: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        exterior_criterion(&pred, &self.y)
    }
}

fn record(c: &Candidate, layer: u32) -> FitRecord {
    FitRecord {
        creation_index: c.creation_index,
        layer,
        criterion: c.criterion,
        trace: c.trace.clone(),
    }
}

fn finish(
    data: &FeatureTable,
    neurons: Vec<Neuron>,
    creation: &[usize],
    output: usize,
    trace: &mut GrowthTrace,
) -> Result<PolyNetwork, GrowthError> {
    let full = PolyNetwork::new(data.names().to_vec(), None, neurons, output, DEFAULT_THRESHOLD)?;
    let (net, kept) = full.pruned_with_map();
    trace.network_creation_indices = kept.iter().map(|&k| creation[k]).collect();
    Ok(net)
}

/// Dispatches on `g.strategy`.
pub fn grow(data: &FeatureTable, g: &GrowthParams, f: &FitParams) -> Result<(PolyNetwork, GrowthTrace), GrowthError> {
    match g.strategy {
        Strategy::Layered => grow_layered(data, g, f),
        Strategy::Incremental => grow_incremental(data, g, f),
    }
}

/// Classic layer-by-layer growth with Delta stopping.
pub fn grow_layered(
    data: &FeatureTable,
    g: &GrowthParams,
    f: &FitParams,
) -> Result<(PolyNetwork, GrowthTrace), GrowthError> {
    let ws = Workspace::new(data, g, f)?;
    let m = data.n_features();
    let width = match g.f {
        Some(w) => w,
        None => default_f(m)?,
    };
    let mut trace = GrowthTrace::new(Strategy::Layered);

    // survivors of every layer, in layer order; candidates reference them
    let mut neurons: Vec<Neuron> = Vec::new();
    let mut outputs: Vec<Vec<f64>> = Vec::new();
    let mut creation: Vec<usize> = Vec::new();
    // index range in `neurons` of each layer's survivors
    let mut layers: Vec<std::ops::Range<usize>> = Vec::new();
    let mut next_index = 0usize;

    let features: Vec<InputRef> = (0..m).map(InputRef::Feature).collect();
    for r in 1..=g.max_layers {
        let pairs = if r == 1 {
            generate_layer_candidates(&features)?
        } else {
            let prev: Vec<InputRef> = layers[r - 2].clone().map(InputRef::Neuron).collect();
            let mut pairs = if prev.len() >= 2 {
                generate_layer_candidates(&prev)?
            } else {
                Vec::new()
            };
            if g.layer_inputs == LayerInputs::SurvivorsAndFeatures {
                for &s in &prev {
                    for &x in &features {
                        pairs.push([s, x]);
                    }
                }
            }
            pairs
        };
        if pairs.is_empty() {
            trace.stop = GrowthStop::NoCandidates;
            trace.final_layer = r;
            break;
        }

        let base = next_index;
        next_index += pairs.len();
        let candidates: Vec<Candidate> = pairs
            .par_iter()
            .enumerate()
            .map(|(k, &inputs)| {
                let v1 = ws.column(inputs[0], &outputs);
                let v2 = ws.column(inputs[1], &outputs);
                ws.fit(inputs, v1, v2, base + k)
            })
            .collect::<Result<_, _>>()?;
        trace.fits.extend(candidates.iter().map(|c| record(c, r as u32)));

        let best = select_best(candidates, width)?;
        trace.layer_min_criteria.push(best[0].criterion);
        let start = neurons.len();
        for c in best {
            neurons.push(Neuron::new(c.inputs, c.weights, r as u32));
            outputs.push(c.outputs);
            creation.push(c.creation_index);
        }
        layers.push(start..neurons.len());
        trace.final_layer = r;

        if r >= 2 {
            let cur = trace.layer_min_criteria[r - 1];
            let prev = trace.layer_min_criteria[r - 2];
            if (cur - prev).abs() < g.delta_stop {
                trace.stop = GrowthStop::DeltaRule;
                break;
            }
        }
        if r == g.max_layers {
            trace.stop = GrowthStop::LayerCap;
        }
    }

    let output_layer = match trace.stop {
        GrowthStop::DeltaRule => trace.final_layer - 1,
        _ => {
            // the completed layer with the smallest best criterion
            let crs = &trace.layer_min_criteria;
            (0..crs.len())
                .min_by(|&a, &b| crs[a].total_cmp(&crs[b]).then(a.cmp(&b)))
                .map(|i| i + 1)
                .expect("layer 1 always completes")
        }
    };
    trace.output_layer = output_layer;
    let output = layers[output_layer - 1].start;
    let net = finish(data, neurons, &creation, output, &mut trace)?;
    Ok((net, trace))
}

struct PoolMember {
    r: InputRef,
    criterion: f64,
    layer: u32,
}

/// Random-pair growth with the accept-if-better-than-both-parents rule.
pub fn grow_incremental(
    data: &FeatureTable,
    g: &GrowthParams,
    f: &FitParams,
) -> Result<(PolyNetwork, GrowthTrace), GrowthError> {
    let ws = Workspace::new(data, g, f)?;
    let m = data.n_features();
    let mut trace = GrowthTrace::new(Strategy::Incremental);
    let name = |r: InputRef| match r {
        InputRef::Feature(i) => data.names()[i].clone(),
        InputRef::Neuron(j) => format!("n{j}"),
    };

    let mut pool: Vec<PoolMember> = Vec::with_capacity(m);
    for i in 0..m {
        let criterion = ws.feature_criterion(i)?;
        trace.feature_criteria.push(criterion);
        pool.push(PoolMember {
            r: InputRef::Feature(i),
            criterion,
            layer: 0,
        });
    }

    let mut neurons: Vec<Neuron> = Vec::new();
    let mut outputs: Vec<Vec<f64>> = Vec::new();
    let mut creation: Vec<usize> = Vec::new();
    let mut rng = seeded(g.seed);
    let cap = 10 * g.fail_budget * m;
    let mut failures = 0;
    let mut attempt = 0;
    trace.stop = GrowthStop::AttemptCap;
    while attempt < cap {
        let pick = sample(&mut rng, pool.len(), 2);
        let (a, b) = (&pool[pick.index(0)], &pool[pick.index(1)]);
        let inputs = [a.r, b.r];
        let cand = ws.fit(
            inputs,
            ws.column(a.r, &outputs),
            ws.column(b.r, &outputs),
            attempt,
        )?;
        let layer = a.layer.max(b.layer) + 1;
        trace.fits.push(record(&cand, layer));
        let accepted = cand.criterion < a.criterion.min(b.criterion);
        trace.attempts.push(Attempt {
            parents: [name(a.r), name(b.r)],
            parent_slots: [pick.index(0), pick.index(1)],
            parent_criteria: [a.criterion, b.criterion],
            criterion: cand.criterion,
            accepted,
        });
        attempt += 1;
        if accepted {
            failures = 0;
            let id = neurons.len();
            neurons.push(Neuron::new(inputs, cand.weights, layer));
            outputs.push(cand.outputs);
            creation.push(cand.creation_index);
            pool.push(PoolMember {
                r: InputRef::Neuron(id),
                criterion: cand.criterion,
                layer,
            });
        } else {
            failures += 1;
            if failures >= g.fail_budget {
                trace.stop = GrowthStop::FailBudget;
                break;
            }
        }
    }

    if neurons.is_empty() {
        return Err(GrowthError::NoNeuronAccepted { attempts: attempt });
    }
    let output = pool
        .iter()
        .filter_map(|p| match p.r {
            InputRef::Neuron(j) => Some((j, p.criterion)),
            InputRef::Feature(_) => None,
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
        .expect("at least one neuron");
    let net = finish(data, neurons, &creation, output, &mut trace)?;
    Ok((net, trace))
}

/// Replays an incremental attempt log against the acceptance rule. Parent
/// criteria are rebuilt from the feature criteria and the accepted attempts,
/// every decision is re-derived, and the run must end with exactly
/// `fail_budget` consecutive rejections.
pub fn replay_incremental(trace: &GrowthTrace, fail_budget: usize) -> Result<(), String> {
    let mut pool: Vec<f64> = trace.feature_criteria.clone();
    let mut streak = 0;
    for (k, a) in trace.attempts.iter().enumerate() {
        if streak >= fail_budget {
            return Err(format!("attempt {k} follows {streak} consecutive rejections"));
        }
        for (slot, &recorded) in a.parent_slots.iter().zip(&a.parent_criteria) {
            let expected = *pool
                .get(*slot)
                .ok_or_else(|| format!("attempt {k} draws unknown pool slot {slot}"))?;
            if expected.to_bits() != recorded.to_bits() {
                return Err(format!(
                    "attempt {k}: slot {slot} recorded criterion {recorded}, pool has {expected}"
                ));
            }
        }
        if a.parent_slots[0] == a.parent_slots[1] {
            return Err(format!("attempt {k} pairs slot {} with itself", a.parent_slots[0]));
        }
        let rule = a.criterion < a.parent_criteria[0].min(a.parent_criteria[1]);
        if rule != a.accepted {
            return Err(format!(
                "attempt {k}: criterion {} vs parents {:?} but accepted = {}",
                a.criterion, a.parent_criteria, a.accepted
            ));
        }
        if a.accepted {
            pool.push(a.criterion);
            streak = 0;
        } else {
            streak += 1;
        }
    }
    if trace.stop != GrowthStop::FailBudget || streak != fail_budget {
        return Err(format!(
            "run ended by {:?} after {streak} trailing rejections",
            trace.stop
        ));
    }
    Ok(())
}
