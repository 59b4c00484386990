use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use polynet::synth::{alzheimer_model, gen_dataset, sleep_model, LabelRule, Noise, SynthSpec};
use polynet::{parse_model, render_model};
use serde::Serialize;

use crate::io::{sibling, write_json, write_table};
use crate::usage;

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Laplace,
    #[value(name = "student-t")]
    StudentT,
}

#[derive(clap::Args)]
pub struct Args {
    /// `alzheimer` (3-neuron chain, 76 features), `sleep` (7 neurons, 36
    /// features) or a PNMODEL file.
    #[arg(long, default_value = "alzheimer")]
    generator: String,
    /// Total feature columns; extra columns are distractors.
    #[arg(long = "m-total")]
    m_total: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    /// Gaussian sigma, Laplace b, or Student-t scale.
    #[arg(long, default_value_t = 0.05)]
    scale: f64,
    /// Student-t degrees of freedom.
    #[arg(long, default_value_t = 3.0)]
    nu: f64,
    /// `median` or a numeric threshold on the clean output.
    #[arg(long = "label-rule", default_value = "median")]
    label_rule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table CSV to write; the generation settings go to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    generator: &'a str,
    m_total: usize,
    n_rows: usize,
    noise: Noise,
    label_rule: &'a str,
    threshold: f64,
    positives: usize,
    seed: u64,
    model: String,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let generator = match a.generator.as_str() {
        "alzheimer" => alzheimer_model(),
        "sleep" => sleep_model(),
        path => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("--generator {path}: {e}")))?;
            parse_model(&text).with_context(|| format!("parsing {path}"))?
        }
    };
    let noise = match a.noise {
        NoiseArg::Gaussian => Noise::Gaussian { sigma: a.scale },
        NoiseArg::Laplace => Noise::Laplace { b: a.scale },
        NoiseArg::StudentT => Noise::StudentT {
            nu: a.nu,
            scale: a.scale,
        },
    };
    let label_rule = match a.label_rule.as_str() {
        "median" => LabelRule::Median,
        v => LabelRule::Threshold {
            value: v
                .parse()
                .map_err(|_| usage(format!("--label-rule must be `median` or a number, got {v:?}")))?,
        },
    };
    let spec = SynthSpec {
        m_total: a.m_total.unwrap_or(generator.m()),
        n_rows: a.rows,
        noise,
        label_rule,
        seed: a.seed,
        generator,
    };
    let data = gen_dataset(&spec).map_err(|e| usage(e.to_string()))?;
    write_table(&a.out, &data.table)?;
    let positives = data
        .table
        .labels()
        .map_or(0, |l| l.iter().filter(|&&v| v == 1).count());
    write_json(
        &sibling(&a.out, "json"),
        &Sidecar {
            generator: &a.generator,
            m_total: spec.m_total,
            n_rows: spec.n_rows,
            noise,
            label_rule: &a.label_rule,
            threshold: data.threshold,
            positives,
            seed: a.seed,
            model: render_model(&spec.generator),
        },
    )?;
    println!(
        "{} rows x {} features, {} positive -> {}",
        spec.n_rows,
        spec.m_total,
        positives,
        a.out.display()
    );
    Ok(())
}
