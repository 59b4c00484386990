//! Experiment suites: projection learning curves, estimator robustness under
//! non-Gaussian noise, and recovery of planted networks.

use serde::Serialize;

use crate::error::{BenchError, FitError};
use crate::fitting::{
    fit_least_squares, fit_projection, initial_weights, DesignPair, FitParams, FitTrace,
    ProjectionSteps,
};
use crate::growth::{
    grow, split_rows, GrowthParams, GrowthStop, GrowthTrace, LayerInputs, SplitMode, Strategy,
    TargetSource,
};
use crate::metrics::{confusion, performance, run_seeds, summarize, Interval, RunStats};
use crate::model::{eval_transfer, InputRef, Neuron, PolyNetwork, Weights4, DEFAULT_THRESHOLD};
use crate::pnmodel::render_model;
use crate::rng::derive_seed;
use crate::synth::{alzheimer_model, gen_dataset, sleep_model, LabelRule, Noise, SynthSpec};

/// Weights of the planted single neuron (the first printed polynomial of the
/// three-neuron chain).
pub const PLANTED_WEIGHTS: [f64; 4] = [0.696, 0.391, 0.248, -0.231];

/// Learning rates of the published learning curves.
pub const CURVE_CHIS: [f64; 4] = [1.25, 1.5, 1.75, 2.0];

/// One planted neuron over two standard-normal inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeuronTask {
    pub n: usize,
    pub noise: Noise,
    /// Validation share of the rows.
    pub split_ratio: f64,
}

impl Default for NeuronTask {
    fn default() -> Self {
        Self {
            n: 500,
            noise: Noise::Gaussian { sigma: 0.1 },
            split_ratio: 0.5,
        }
    }
}

pub fn planted_neuron() -> PolyNetwork {
    PolyNetwork::new(
        vec!["x1".into(), "x2".into()],
        None,
        vec![Neuron::new(
            [InputRef::Feature(0), InputRef::Feature(1)],
            Weights4::new(PLANTED_WEIGHTS).expect("finite"),
            1,
        )],
        0,
        DEFAULT_THRESHOLD,
    )
    .expect("valid single neuron")
}

/// Draws the task's rows and splits them into training and validation.
pub fn neuron_task(task: &NeuronTask, seed: u64) -> Result<DesignPair, BenchError> {
    let data = gen_dataset(&SynthSpec {
        generator: planted_neuron(),
        m_total: 2,
        n_rows: task.n,
        noise: task.noise,
        label_rule: LabelRule::Median,
        seed,
    })?;
    let t = &data.table;
    let split = split_rows(t.n_rows(), None, task.split_ratio, SplitMode::Stratified, seed)?;
    let y = t.targets().expect("synth tables carry targets");
    let pick = |rows: &[usize]| -> (Vec<[f64; 2]>, Vec<f64>) {
        rows.iter().map(|&r| ([t.column(0)[r], t.column(1)[r]], y[r])).unzip()
    };
    let (ua, ya) = pick(&split.train);
    let (ub, yb) = pick(&split.val);
    Ok(DesignPair::new(ua, ya, ub, yb)?)
}

fn seeds(base: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|k| derive_seed(base, k)).collect()
}

fn check_runs(runs: usize) -> Result<(), BenchError> {
    if runs == 0 {
        return Err(BenchError::BadOptions("runs must be at least 1".into()));
    }
    Ok(())
}

fn val_mse(d: &DesignPair, w: &Weights4) -> f64 {
    let sse: f64 = d
        .val_inputs
        .iter()
        .zip(&d.val_targets)
        .map(|(v, y)| (eval_transfer(v[0], v[1], w) - y).powi(2))
        .sum();
    sse / d.val_targets.len() as f64
}

fn train_sse(d: &DesignPair, w: &[f64; 4]) -> f64 {
    let w = Weights4::new(*w).expect("finite iterate");
    d.train_inputs
        .iter()
        .zip(&d.train_targets)
        .map(|(v, y)| (eval_transfer(v[0], v[1], &w) - y).powi(2))
        .sum()
}

fn median_usize(v: &[usize]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
    }
}

// ---------------------------------------------------------------------------
// convergence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceOptions {
    pub runs: usize,
    pub seed: u64,
    /// Length of the fixed-horizon curves (steps after the start).
    pub horizon: usize,
    pub task: NeuronTask,
    /// Stopping parameters of the early-stopped fits; `chi` is overridden.
    pub fit: FitParams,
    pub chis: Vec<f64>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            runs: 30,
            seed: 0,
            horizon: 25,
            task: NeuronTask::default(),
            fit: FitParams::default(),
            chis: CURVE_CHIS.to_vec(),
        }
    }
}

/// One run at one learning rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRun {
    pub seed: u64,
    /// Training residual sum of squares at steps `0..=horizon`, no stopping.
    pub train_rse: Vec<f64>,
    /// The early-stopped fit with the same start.
    pub fit: FitTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiCurve {
    pub chi: f64,
    /// Mean of `train_rse` over runs, per step.
    pub mean_train_rse: Vec<f64>,
    pub median_stop_step: f64,
    pub runs: Vec<ConvergenceRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub options: ConvergenceOptions,
    pub curves: Vec<ChiCurve>,
}

/// Learning curves per learning rate. Within a run every rate starts from the
/// same initial weights on the same data.
pub fn convergence(opts: &ConvergenceOptions) -> Result<ConvergenceReport, BenchError> {
    check_runs(opts.runs)?;
    if opts.chis.is_empty() {
        return Err(BenchError::BadOptions("at least one learning rate is required".into()));
    }
    let seeds = seeds(opts.seed, opts.runs);
    let per_seed: Vec<Vec<ConvergenceRun>> = run_seeds(
        |seed| -> Result<Vec<ConvergenceRun>, BenchError> {
            let data = neuron_task(&opts.task, seed)?;
            let start = initial_weights(seed);
            opts.chis
                .iter()
                .map(|&chi| {
                    let p = FitParams { chi, seed, ..opts.fit };
                    p.validate()?;
                    let mut steps = ProjectionSteps::new(&data.train_inputs, &data.train_targets, chi, start)?;
                    let mut train_rse = vec![train_sse(&data, &start.to_array())];
                    for k in 1..=opts.horizon {
                        let w = steps.next().ok_or(FitError::Diverged { step: k })?;
                        if w.iter().any(|x| !x.is_finite()) {
                            return Err(FitError::Diverged { step: k }.into());
                        }
                        train_rse.push(train_sse(&data, &w));
                    }
                    let (_, fit) = crate::fitting::fit_projection_from(&data, &p, start)?;
                    Ok(ConvergenceRun { seed, train_rse, fit })
                })
                .collect()
        },
        &seeds,
    )?;

    let curves = opts
        .chis
        .iter()
        .enumerate()
        .map(|(c, &chi)| {
            let runs: Vec<ConvergenceRun> = per_seed.iter().map(|r| r[c].clone()).collect();
            let mean_train_rse = (0..=opts.horizon)
                .map(|k| {
                    let mut v: Vec<f64> = runs.iter().map(|r| r.train_rse[k]).collect();
                    v.sort_by(f64::total_cmp);
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            let stops: Vec<usize> = runs.iter().map(|r| r.fit.steps_taken).collect();
            ChiCurve {
                chi,
                mean_train_rse,
                median_stop_step: median_usize(&stops),
                runs,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        options: opts.clone(),
        curves,
    })
}

// ---------------------------------------------------------------------------
// robustness

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessOptions {
    pub runs: usize,
    pub seed: u64,
    pub n: usize,
    /// Standard deviation shared by every noise family.
    pub noise_sd: f64,
    /// Degrees of freedom of the Student-t family.
    pub nu: f64,
    pub split_ratio: f64,
    /// Projection parameters; `split_ratio` and `seed` are overridden.
    pub fit: FitParams,
    pub convention: Interval,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            runs: 30,
            seed: 0,
            n: 500,
            noise_sd: 0.1,
            nu: 3.0,
            split_ratio: 0.5,
            fit: FitParams {
                delta: 1e-6,
                max_steps: 500,
                ..FitParams::default()
            },
            convention: Interval::Spread,
        }
    }
}

impl RobustnessOptions {
    /// Gaussian, Laplace and Student-t noise with the configured standard
    /// deviation.
    pub fn families(&self) -> [Noise; 3] {
        let sd = self.noise_sd;
        [
            Noise::Gaussian { sigma: sd },
            Noise::Laplace {
                b: sd / std::f64::consts::SQRT_2,
            },
            Noise::StudentT {
                nu: self.nu,
                scale: sd / (self.nu / (self.nu - 2.0)).sqrt(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub noise: &'static str,
    pub fitter: &'static str,
    /// Validation mean squared error.
    pub val_mse: RunStats,
    /// Largest absolute deviation from the planted weights.
    pub weight_error: RunStats,
    pub val_mse_runs: Vec<f64>,
    pub weight_error_runs: Vec<f64>,
    /// Projection traces, one per run (empty for least squares).
    pub traces: Vec<FitTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub options: RobustnessOptions,
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessReport {
    pub fn row(&self, noise: &str, fitter: &str) -> Option<&RobustnessRow> {
        self.rows.iter().find(|r| r.noise == noise && r.fitter == fitter)
    }
}

/// Projection against least squares on the planted neuron, per noise family.
/// Both estimators see the same rows in every run.
pub fn robustness(opts: &RobustnessOptions) -> Result<RobustnessReport, BenchError> {
    check_runs(opts.runs)?;
    if !(opts.nu > 2.0) {
        return Err(BenchError::BadOptions(format!(
            "Student-t needs nu > 2 for a finite standard deviation, got {}",
            opts.nu
        )));
    }
    let planted = Weights4::new(PLANTED_WEIGHTS).expect("finite");
    let seeds = seeds(opts.seed, opts.runs);
    let mut rows = Vec::new();
    for noise in opts.families() {
        let task = NeuronTask {
            n: opts.n,
            noise,
            split_ratio: opts.split_ratio,
        };
        type RunOut = (f64, f64, FitTrace, f64, f64);
        let results: Vec<RunOut> = run_seeds(
            |seed| -> Result<RunOut, BenchError> {
                let data = neuron_task(&task, seed)?;
                let p = FitParams {
                    split_ratio: opts.split_ratio,
                    seed,
                    ..opts.fit
                };
                let (wp, trace) = fit_projection(&data, &p)?;
                let wl = fit_least_squares(&data.train_inputs, &data.train_targets)?;
                Ok((
                    val_mse(&data, &wp),
                    wp.max_abs_diff(&planted),
                    trace,
                    val_mse(&data, &wl),
                    wl.max_abs_diff(&planted),
                ))
            },
            &seeds,
        )?;
        let proj_mse: Vec<f64> = results.iter().map(|r| r.0).collect();
        let proj_err: Vec<f64> = results.iter().map(|r| r.1).collect();
        let ls_mse: Vec<f64> = results.iter().map(|r| r.3).collect();
        let ls_err: Vec<f64> = results.iter().map(|r| r.4).collect();
        rows.push(RobustnessRow {
            noise: noise.family(),
            fitter: "projection",
            val_mse: summarize(&proj_mse, opts.convention)?,
            weight_error: summarize(&proj_err, opts.convention)?,
            val_mse_runs: proj_mse,
            weight_error_runs: proj_err,
            traces: results.into_iter().map(|r| r.2).collect(),
        });
        rows.push(RobustnessRow {
            noise: noise.family(),
            fitter: "ls",
            val_mse: summarize(&ls_mse, opts.convention)?,
            weight_error: summarize(&ls_err, opts.convention)?,
            val_mse_runs: ls_mse,
            weight_error_runs: ls_err,
            traces: Vec::new(),
        });
    }
    Ok(RobustnessReport {
        options: opts.clone(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// recovery

/// A planted network, the data drawn from it and the growth settings used to
/// recover it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryScenario {
    pub name: &'static str,
    #[serde(skip)]
    pub generator: PolyNetwork,
    pub m_total: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: Noise,
    pub growth: GrowthParams,
    pub fit: FitParams,
}

/// The three-neuron chain over 76 features (4 informative), grown layer by
/// layer with one survivor per layer.
pub fn layered_scenario() -> RecoveryScenario {
    RecoveryScenario {
        name: "layered",
        generator: alzheimer_model(),
        m_total: 76,
        n_train: 1000,
        n_test: 1000,
        noise: Noise::Gaussian { sigma: 0.05 },
        growth: GrowthParams {
            strategy: Strategy::Layered,
            f: Some(1),
            delta_stop: 0.5,
            layer_inputs: LayerInputs::SurvivorsAndFeatures,
            target: TargetSource::Regression,
            ..GrowthParams::default()
        },
        fit: FitParams {
            delta: 1e-6,
            ..FitParams::default()
        },
    }
}

/// The seven-neuron network over 36 features (8 informative), grown by
/// random pairs with a budget of 7 consecutive failures.
pub fn incremental_scenario() -> RecoveryScenario {
    RecoveryScenario {
        name: "incremental",
        generator: sleep_model(),
        m_total: 36,
        n_train: 1000,
        n_test: 1000,
        noise: Noise::Gaussian { sigma: 0.01 },
        growth: GrowthParams {
            strategy: Strategy::Incremental,
            fail_budget: 7,
            target: TargetSource::Regression,
            ..GrowthParams::default()
        },
        fit: FitParams {
            delta: 1e-6,
            ..FitParams::default()
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRun {
    pub seed: u64,
    /// Held-out accuracy with the network thresholded at the label threshold.
    pub performance: f64,
    pub used_features: Vec<String>,
    /// Whether every used feature is wired into the generator.
    pub informative_only: bool,
    pub neurons: usize,
    pub stop: GrowthStop,
    pub model: String,
    #[serde(skip)]
    pub trace: GrowthTrace,
}

/// Trains on `n_train` rows labelled at the median clean output and scores on
/// `n_test` fresh rows labelled at that same threshold.
pub fn recovery_run(sc: &RecoveryScenario, seed: u64) -> Result<RecoveryRun, BenchError> {
    let spec = SynthSpec {
        generator: sc.generator.clone(),
        m_total: sc.m_total,
        n_rows: sc.n_train,
        noise: sc.noise,
        label_rule: LabelRule::Median,
        seed: derive_seed(seed, 0),
    };
    let train = gen_dataset(&spec)?;
    let test = gen_dataset(&SynthSpec {
        n_rows: sc.n_test,
        label_rule: LabelRule::Threshold {
            value: train.threshold,
        },
        seed: derive_seed(seed, 1),
        ..spec
    })?;
    let g = GrowthParams { seed, ..sc.growth };
    let f = FitParams { seed, ..sc.fit };
    let (net, trace) = grow(&train.table, &g, &f)?;
    let net = net.with_threshold(train.threshold)?;

    let labels = test.table.labels().expect("synth tables carry labels");
    let preds = (0..test.table.n_rows())
        .map(|r| net.classify(&test.table.row(r)))
        .collect::<Result<Vec<u8>, _>>()?;
    let perf = performance(&confusion(labels, &preds)?)?;

    let informative = sc.generator.used_features();
    let used = net.used_features();
    Ok(RecoveryRun {
        seed,
        performance: perf,
        used_features: used.iter().map(|&i| net.feature_names()[i].clone()).collect(),
        informative_only: used.iter().all(|i| informative.contains(i)),
        neurons: net.neurons().len(),
        stop: trace.stop,
        model: render_model(&net),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub scenario: RecoveryScenario,
    pub performance: RunStats,
    pub runs: Vec<RecoveryRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryOptions {
    pub runs: usize,
    pub seed: u64,
    pub convention: Interval,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            runs: 30,
            seed: 0,
            convention: Interval::Spread,
        }
    }
}

pub fn recovery(sc: &RecoveryScenario, opts: &RecoveryOptions) -> Result<RecoverySummary, BenchError> {
    check_runs(opts.runs)?;
    let runs = run_seeds(|s| recovery_run(sc, s), &seeds(opts.seed, opts.runs))?;
    let perf: Vec<f64> = runs.iter().map(|r| r.performance).collect();
    Ok(RecoverySummary {
        scenario: sc.clone(),
        performance: summarize(&perf, opts.convention)?,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_splits_rows() {
        let d = neuron_task(&NeuronTask::default(), 4).unwrap();
        assert_eq!(d.train_inputs.len() + d.val_inputs.len(), 500);
        assert_eq!(d.val_inputs.len(), 250);
        assert_eq!(d, neuron_task(&NeuronTask::default(), 4).unwrap());
    }

    #[test]
    fn noiseless_task_is_fit_exactly() {
        let task = NeuronTask {
            noise: Noise::Gaussian { sigma: 0.0 },
            ..NeuronTask::default()
        };
        let d = neuron_task(&task, 9).unwrap();
        let w = fit_least_squares(&d.train_inputs, &d.train_targets).unwrap();
        assert!(w.max_abs_diff(&Weights4::new(PLANTED_WEIGHTS).unwrap()) < 1e-6);
    }

    #[test]
    fn families_share_one_standard_deviation() {
        let o = RobustnessOptions::default();
        for n in o.families() {
            assert!((n.std_dev().unwrap() - 0.1).abs() < 1e-15, "{n:?}");
        }
    }

    #[test]
    fn convergence_report_shape() {
        let opts = ConvergenceOptions {
            runs: 3,
            horizon: 6,
            ..ConvergenceOptions::default()
        };
        let r = convergence(&opts).unwrap();
        assert_eq!(r.curves.len(), 4);
        for c in &r.curves {
            assert_eq!(c.runs.len(), 3);
            assert_eq!(c.mean_train_rse.len(), 7);
            assert!(c.runs.iter().all(|run| run.fit.steps_taken <= opts.fit.max_steps));
        }
        // same start for every rate
        assert_eq!(r.curves[0].runs[1].train_rse[0], r.curves[3].runs[1].train_rse[0]);
    }

    #[test]
    fn robustness_report_shape() {
        let r = robustness(&RobustnessOptions {
            runs: 2,
            ..RobustnessOptions::default()
        })
        .unwrap();
        let keys: Vec<(&str, &str)> = r.rows.iter().map(|x| (x.noise, x.fitter)).collect();
        assert_eq!(
            keys,
            vec![
                ("gaussian", "projection"),
                ("gaussian", "ls"),
                ("laplace", "projection"),
                ("laplace", "ls"),
                ("student-t", "projection"),
                ("student-t", "ls"),
            ]
        );
        assert!(r.rows.iter().all(|x| x.val_mse.runs == 2));
    }

    #[test]
    fn zero_runs_rejected() {
        let o = ConvergenceOptions {
            runs: 0,
            ..ConvergenceOptions::default()
        };
        assert!(matches!(convergence(&o), Err(BenchError::BadOptions(_))));
    }
}
