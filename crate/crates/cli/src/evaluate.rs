use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use polynet::metrics::{confusion, performance, sensitivity, specificity, Confusion};
use polynet::{parse_model, MetricError};
use serde::Serialize;

use crate::io::{read_table, write_json};
use crate::usage;

#[derive(clap::Args)]
pub struct Args {
    /// PNMODEL file.
    model: PathBuf,
    /// Feature CSV with a `label` column and the model's feature columns.
    input: PathBuf,
    /// Metrics JSON to write; the report is printed either way.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Overrides the model's decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    rows: usize,
    threshold: f64,
    confusion: Confusion,
    sensitivity: Option<f64>,
    specificity: Option<f64>,
    performance: Option<f64>,
    /// Metrics that are undefined on this table, with the reason.
    errors: BTreeMap<&'static str, String>,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    if let Some(t) = a.threshold {
        if !t.is_finite() {
            return Err(usage("--threshold must be finite"));
        }
    }
    let text = fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let mut net = parse_model(&text).with_context(|| format!("parsing {}", a.model.display()))?;
    if let Some(t) = a.threshold {
        net = net.with_threshold(t)?;
    }
    let table = read_table(&a.input)?;
    if table.n_features() != net.m() {
        bail!(
            "model expects {} feature columns, {} has {}",
            net.m(),
            a.input.display(),
            table.n_features()
        );
    }
    let cols = net
        .feature_names()
        .iter()
        .map(|n| {
            table
                .column_index(n)
                .with_context(|| format!("{} has no column {n:?}", a.input.display()))
        })
        .collect::<anyhow::Result<Vec<usize>>>()?;
    let labels = table
        .labels()
        .with_context(|| format!("{} has no `label` column", a.input.display()))?;

    let mut x = vec![0.0; cols.len()];
    let mut preds = Vec::with_capacity(table.n_rows());
    for r in 0..table.n_rows() {
        for (slot, &c) in x.iter_mut().zip(&cols) {
            *slot = table.column(c)[r];
        }
        preds.push(net.classify(&x)?);
    }
    let c = confusion(labels, &preds)?;

    let mut errors = BTreeMap::new();
    let mut keep = |name: &'static str, v: Result<f64, MetricError>| match v {
        Ok(v) => Some(v),
        Err(e) => {
            eprintln!("warning: {e}");
            errors.insert(name, e.to_string());
            None
        }
    };
    let report = Report {
        rows: table.n_rows(),
        threshold: net.threshold(),
        confusion: c,
        sensitivity: keep("sensitivity", sensitivity(&c)),
        specificity: keep("specificity", specificity(&c)),
        performance: keep("performance", performance(&c)),
        errors,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}
