use std::path::PathBuf;

use clap::ValueEnum;
use polynet::bench::{
    convergence, incremental_scenario, layered_scenario, recovery, robustness, ConvergenceOptions,
    RecoveryOptions, RobustnessOptions,
};
use serde::Serialize;

use crate::io::write_json;
use crate::usage;

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    /// Projection learning curves for several learning rates.
    Convergence,
    /// Projection vs least squares under three noise families.
    Robustness,
    /// Accuracy of networks grown on planted-model data.
    Recovery,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Layered,
    Incremental,
    Both,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recovery scenarios to run.
    #[arg(long, value_enum, default_value = "both")]
    scenario: Scenario,
    /// Steps recorded per learning curve.
    #[arg(long, default_value_t = 25)]
    horizon: usize,
    /// Bench JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Output<T: Serialize> {
    suite: &'static str,
    report: T,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    match a.suite {
        Suite::Convergence => {
            let r = convergence(&ConvergenceOptions {
                runs: a.runs,
                seed: a.seed,
                horizon: a.horizon,
                ..ConvergenceOptions::default()
            })?;
            println!("chi    median k*   mean RSE at step 5");
            for c in &r.curves {
                let at5 = c.mean_train_rse.get(5).copied().unwrap_or(f64::NAN);
                println!("{:<6} {:<11} {:.6}", c.chi, c.median_stop_step, at5);
            }
            write_json(&a.out, &Output { suite: "convergence", report: r })
        }
        Suite::Robustness => {
            let r = robustness(&RobustnessOptions {
                runs: a.runs,
                seed: a.seed,
                ..RobustnessOptions::default()
            })?;
            println!("noise       fitter       val MSE (mean +- 95%)      max |w - w*|");
            for row in &r.rows {
                println!(
                    "{:<11} {:<12} {:.6} +- {:.6}   {:.4} +- {:.4}",
                    row.noise,
                    row.fitter,
                    row.val_mse.mean,
                    row.val_mse.half_width,
                    row.weight_error.mean,
                    row.weight_error.half_width
                );
            }
            write_json(&a.out, &Output { suite: "robustness", report: r })
        }
        Suite::Recovery => {
            let scenarios = match a.scenario {
                Scenario::Layered => vec![layered_scenario()],
                Scenario::Incremental => vec![incremental_scenario()],
                Scenario::Both => vec![layered_scenario(), incremental_scenario()],
            };
            let opts = RecoveryOptions {
                runs: a.runs,
                seed: a.seed,
                ..RecoveryOptions::default()
            };
            let mut out = Vec::new();
            for sc in &scenarios {
                let s = recovery(sc, &opts)?;
                println!(
                    "{:<12} performance {:.4} +- {:.4} over {} runs",
                    sc.name, s.performance.mean, s.performance.half_width, s.performance.runs
                );
                out.push(s);
            }
            write_json(&a.out, &Output { suite: "recovery", report: out })
        }
    }
}
