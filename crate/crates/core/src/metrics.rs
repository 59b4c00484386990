//! Binary confusion counts, sensitivity/specificity/performance, and
//! repeated-run summaries.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::MetricError;

/// Counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    /// The same predictions scored with class 0 as positive.
    pub fn swapped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

pub fn confusion(labels: &[u8], preds: &[u8]) -> Result<Confusion, MetricError> {
    if labels.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            labels: labels.len(),
            preds: preds.len(),
        });
    }
    if labels.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut c = Confusion::default();
    for (i, (&l, &p)) in labels.iter().zip(preds).enumerate() {
        for v in [l, p] {
            if v > 1 {
                return Err(MetricError::NonBinary { index: i, value: v });
            }
        }
        match (l, p) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (0, 1) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64, metric: &'static str) -> Result<f64, MetricError> {
    if den == 0 {
        Err(MetricError::Undefined { metric })
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// TP / (TP + FN)
pub fn sensitivity(c: &Confusion) -> Result<f64, MetricError> {
    ratio(c.tp, c.positives(), "sensitivity")
}

/// TN / (TN + FP)
pub fn specificity(c: &Confusion) -> Result<f64, MetricError> {
    ratio(c.tn, c.negatives(), "specificity")
}

/// (TP + TN) / total
pub fn performance(c: &Confusion) -> Result<f64, MetricError> {
    ratio(c.tp + c.tn, c.total(), "performance")
}

/// Decision threshold for a continuous score that maximizes training
/// accuracy: the midpoint between adjacent distinct sorted scores (or just
/// below / above the extremes) with the fewest errors; ties go to the lowest.
pub fn calibrate_threshold(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            labels: labels.len(),
            preds: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Threshold below everything: every row predicted 1.
    let mut errors = labels.iter().filter(|&&l| l == 0).count();
    let mut best = (errors, scores[order[0]] - 1.0);
    let mut k = 0;
    while k < order.len() {
        // move the whole run of equal scores below the threshold
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                errors += 1;
            } else {
                errors -= 1;
            }
            k += 1;
        }
        let t = if k < order.len() {
            s + (scores[order[k]] - s) / 2.0
        } else {
            s + 1.0
        };
        if errors < best.0 {
            best = (errors, t);
        }
    }
    Ok(best.1)
}

/// How the half-width of a run summary is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interval {
    /// 1.96 x sample standard deviation of the runs.
    #[default]
    Spread,
    /// 1.96 x sample standard deviation / sqrt(runs).
    StdError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub mean: f64,
    pub half_width: f64,
    pub runs: usize,
    pub convention: Interval,
}

/// Mean and 95% half-width of `values`. Values are summed in sorted order
/// so the result does not depend on their order.
pub fn summarize(values: &[f64], convention: Interval) -> Result<RunStats, MetricError> {
    if values.is_empty() {
        return Err(MetricError::NoRuns);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half_width = match convention {
        Interval::Spread => 1.96 * sd,
        Interval::StdError => 1.96 * sd / (n as f64).sqrt(),
    };
    Ok(RunStats {
        mean,
        half_width,
        runs: n,
        convention,
    })
}

/// Runs `run` once per seed in parallel, returning results in seed-list
/// order. The first failing seed, in that order, is reported.
pub fn run_seeds<T, F, E>(run: F, seeds: &[u64]) -> Result<Vec<T>, MetricError>
where
    T: Send,
    F: Fn(u64) -> Result<T, E> + Sync,
    E: std::fmt::Display + Send,
{
    if seeds.is_empty() {
        return Err(MetricError::NoRuns);
    }
    let results: Vec<Result<T, E>> = seeds.par_iter().map(|&s| run(s)).collect();
    seeds
        .iter()
        .zip(results)
        .map(|(&seed, r)| {
            r.map_err(|e| MetricError::RunFailed {
                seed,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Runs `run` once per seed and summarizes the values.
pub fn repeated_runs<F, E>(run: F, seeds: &[u64], convention: Interval) -> Result<(RunStats, Vec<f64>), MetricError>
where
    F: Fn(u64) -> Result<f64, E> + Sync,
    E: std::fmt::Display + Send,
{
    let values = run_seeds(run, seeds)?;
    Ok((summarize(&values, convention)?, values))
}
