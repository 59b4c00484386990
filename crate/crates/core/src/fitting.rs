//! Weight estimation for a single supporting neuron.
//!
//! [`fit_projection`] is the distribution-free batch projection rule with
//! validation-driven stopping; [`fit_least_squares`] is the damped
//! normal-equation solution used as the conventional baseline and as an
//! oracle in tests.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::FitError;
use crate::model::{eval_transfer, Weights4};
use crate::rng::seeded;

/// Tikhonov damping added to the diagonal of the normal equations.
pub const LS_DAMPING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitParams {
    /// Learning rate, in (0, 2].
    pub chi: f64,
    /// Stop once the validation error improves by less than this.
    pub delta: f64,
    /// Validation share n_B / n.
    pub split_ratio: f64,
    pub max_steps: usize,
    /// Seed for the N(0, 1) initial weights.
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            chi: 1.9,
            delta: 0.015,
            split_ratio: 0.5,
            max_steps: 200,
            seed: 0,
        }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.chi > 0.0 && self.chi <= 2.0) {
            return Err(FitError::BadParams(format!("chi must be in (0, 2], got {}", self.chi)));
        }
        if !(self.delta > 0.0) {
            return Err(FitError::BadParams(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(FitError::BadParams(format!(
                "split ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.max_steps == 0 {
            return Err(FitError::BadParams("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training (A) and validation (B) inputs of one neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPair {
    pub train_inputs: Vec<[f64; 2]>,
    pub train_targets: Vec<f64>,
    pub val_inputs: Vec<[f64; 2]>,
    pub val_targets: Vec<f64>,
}

impl DesignPair {
    pub fn new(
        train_inputs: Vec<[f64; 2]>,
        train_targets: Vec<f64>,
        val_inputs: Vec<[f64; 2]>,
        val_targets: Vec<f64>,
    ) -> Result<Self, FitError> {
        let d = Self {
            train_inputs,
            train_targets,
            val_inputs,
            val_targets,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.train_inputs.is_empty() || self.val_inputs.is_empty() {
            return Err(FitError::BadDesign("both partitions need at least one row".into()));
        }
        if self.train_inputs.len() != self.train_targets.len()
            || self.val_inputs.len() != self.val_targets.len()
        {
            return Err(FitError::BadDesign("inputs and targets differ in length".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    DeltaRule,
    StepCap,
}

/// Per-step record of one projection fit.
///
/// `val_errors[k]` and `train_rse[k]` belong to the k-th accepted weight
/// vector, starting from the initial draw. A final update that did not
/// lower the validation error is discarded (`last_step_reverted`), so
/// `val_errors` is strictly decreasing and has `steps_taken + 1` entries,
/// one fewer when the last step was reverted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTrace {
    pub val_errors: Vec<f64>,
    pub train_rse: Vec<f64>,
    pub steps_taken: usize,
    pub stop_reason: StopReason,
    pub last_step_reverted: bool,
}

impl FitTrace {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.val_errors.windows(2).all(|p| p[1] < p[0])
    }
}

/// The feature map underlying the transfer polynomial.
#[inline]
pub fn expand_row(v1: f64, v2: f64) -> [f64; 4] {
    [1.0, v1, v2, v1 * v2]
}

fn mse(inputs: &[[f64; 2]], targets: &[f64], w: &Weights4) -> f64 {
    sse(inputs, targets, w) / inputs.len() as f64
}

fn sse(inputs: &[[f64; 2]], targets: &[f64], w: &Weights4) -> f64 {
    inputs
        .iter()
        .zip(targets)
        .map(|(v, y)| {
            let e = eval_transfer(v[0], v[1], w) - y;
            e * e
        })
        .sum()
}

/// Squared Frobenius norm of the row-expanded design.
fn design_norm_sq(inputs: &[[f64; 2]]) -> f64 {
    inputs
        .iter()
        .map(|v| expand_row(v[0], v[1]).iter().map(|p| p * p).sum::<f64>())
        .sum()
}

/// Draws initial weights i.i.d. N(0, 1).
pub fn initial_weights(seed: u64) -> Weights4 {
    let mut rng = seeded(seed);
    let mut w = [0.0; 4];
    for v in &mut w {
        *v = StandardNormal.sample(&mut rng);
    }
    Weights4::new(w).expect("normal draws are finite")
}

/// Iterator over successive projection updates on a fixed training design,
/// without any stopping rule. Yields `w^1, w^2, ...`.
#[derive(Debug, Clone)]
pub struct ProjectionSteps<'a> {
    inputs: &'a [[f64; 2]],
    targets: &'a [f64],
    step: f64,
    w: [f64; 4],
}

impl<'a> ProjectionSteps<'a> {
    pub fn new(
        inputs: &'a [[f64; 2]],
        targets: &'a [f64],
        chi: f64,
        start: Weights4,
    ) -> Result<Self, FitError> {
        if inputs.is_empty() {
            return Err(FitError::Empty);
        }
        if inputs.len() != targets.len() {
            return Err(FitError::LengthMismatch {
                predictions: inputs.len(),
                targets: targets.len(),
            });
        }
        let norm_sq = design_norm_sq(inputs);
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return Err(FitError::DegenerateDesign(norm_sq.sqrt()));
        }
        Ok(Self {
            inputs,
            targets,
            step: chi / norm_sq,
            w: start.to_array(),
        })
    }

    pub fn current(&self) -> [f64; 4] {
        self.w
    }
}

impl Iterator for ProjectionSteps<'_> {
    type Item = [f64; 4];

    fn next(&mut self) -> Option<[f64; 4]> {
        // w <- w - chi / ||Phi||_F^2 * Phi^T (Phi w - y)
        let cur = Weights4::new(self.w).ok()?;
        let mut grad = [0.0; 4];
        for (v, y) in self.inputs.iter().zip(self.targets) {
            let eta = eval_transfer(v[0], v[1], &cur) - y;
            let phi = expand_row(v[0], v[1]);
            for k in 0..4 {
                grad[k] += phi[k] * eta;
            }
        }
        for k in 0..4 {
            self.w[k] -= self.step * grad[k];
        }
        Some(self.w)
    }
}

/// Fits one neuron with the projection rule from N(0, 1) initial weights.
pub fn fit_projection(data: &DesignPair, p: &FitParams) -> Result<(Weights4, FitTrace), FitError> {
    fit_projection_from(data, p, initial_weights(p.seed))
}

/// As [`fit_projection`], starting from the given weights.
pub fn fit_projection_from(
    data: &DesignPair,
    p: &FitParams,
    start: Weights4,
) -> Result<(Weights4, FitTrace), FitError> {
    p.validate()?;
    data.validate()?;
    let mut steps = ProjectionSteps::new(&data.train_inputs, &data.train_targets, p.chi, start)?;

    let mut w = start;
    let mut e_prev = mse(&data.val_inputs, &data.val_targets, &w);
    let mut trace = FitTrace {
        val_errors: vec![e_prev],
        train_rse: vec![sse(&data.train_inputs, &data.train_targets, &w)],
        steps_taken: 0,
        stop_reason: StopReason::StepCap,
        last_step_reverted: false,
    };

    for k in 1..=p.max_steps {
        let raw = steps.next().ok_or(FitError::Diverged { step: k })?;
        let next = Weights4::new(raw).map_err(|_| FitError::Diverged { step: k })?;
        let e = mse(&data.val_inputs, &data.val_targets, &next);
        if !e.is_finite() {
            return Err(FitError::Diverged { step: k });
        }
        trace.steps_taken = k;
        let improved = e < e_prev;
        if improved {
            w = next;
            trace.val_errors.push(e);
            trace.train_rse.push(sse(&data.train_inputs, &data.train_targets, &w));
        }
        if e_prev - e < p.delta {
            trace.stop_reason = StopReason::DeltaRule;
            trace.last_step_reverted = !improved;
            break;
        }
        e_prev = e;
    }
    Ok((w, trace))
}

/// Solves a small symmetric positive-definite system by Cholesky.
fn solve_spd<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for j in 0..N {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..N {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..N {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..N).rev() {
        for k in i + 1..N {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

/// Least squares over the expanded design. The normal equations are solved
/// with Tikhonov damping `eps = LS_DAMPING`, then refined twice with the same
/// damped operator (iterated Tikhonov), which removes the damping bias on
/// well-posed designs while rank-deficient ones stay well-posed.
pub fn fit_least_squares(inputs: &[[f64; 2]], targets: &[f64]) -> Result<Weights4, FitError> {
    if inputs.is_empty() {
        return Err(FitError::Empty);
    }
    if inputs.len() != targets.len() {
        return Err(FitError::LengthMismatch {
            predictions: inputs.len(),
            targets: targets.len(),
        });
    }
    let mut ata = [[0.0; 4]; 4];
    let mut aty = [0.0; 4];
    for (v, y) in inputs.iter().zip(targets) {
        let phi = expand_row(v[0], v[1]);
        for i in 0..4 {
            aty[i] += phi[i] * y;
            for j in 0..4 {
                ata[i][j] += phi[i] * phi[j];
            }
        }
    }
    let mut damped = ata;
    for (i, row) in damped.iter_mut().enumerate() {
        row[i] += LS_DAMPING;
    }
    let solve = |b| solve_spd(damped, b).ok_or(FitError::DegenerateDesign(f64::NAN));
    let mut w = solve(aty)?;
    for _ in 0..2 {
        let mut r = aty;
        for i in 0..4 {
            for j in 0..4 {
                r[i] -= ata[i][j] * w[j];
            }
        }
        let dw = solve(r)?;
        for i in 0..4 {
            w[i] += dw[i];
        }
    }
    Weights4::new(w).map_err(|_| FitError::Diverged { step: 0 })
}

/// Damped least-squares affine fit `y ~ a + b*x`, returned as `(a, b)`.
pub fn fit_affine(x: &[f64], y: &[f64]) -> Result<(f64, f64), FitError> {
    if x.is_empty() {
        return Err(FitError::Empty);
    }
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch {
            predictions: x.len(),
            targets: y.len(),
        });
    }
    let mut ata = [[0.0; 2]; 2];
    let mut aty = [0.0; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        ata[0][0] += 1.0;
        ata[0][1] += xi;
        ata[1][1] += xi * xi;
        aty[0] += yi;
        aty[1] += xi * yi;
    }
    ata[1][0] = ata[0][1];
    ata[0][0] += LS_DAMPING;
    ata[1][1] += LS_DAMPING;
    let [a, b] = solve_spd(ata, aty).ok_or(FitError::DegenerateDesign(f64::NAN))?;
    Ok((a, b))
}

/// Sum of squared residuals over all rows.
pub fn exterior_criterion(predictions: &[f64], targets: &[f64]) -> Result<f64, FitError> {
    if predictions.len() != targets.len() {
        return Err(FitError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(FitError::Empty);
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum())
}
