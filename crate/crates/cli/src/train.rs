use std::path::PathBuf;

use clap::ValueEnum;
use polynet::features::{normalize_apply, normalize_fit};
use polynet::fitting::FitParams;
use polynet::growth::{
    grow, Fitter, GrowthParams, GrowthTrace, LayerInputs, SplitMode, Strategy, TargetSource,
};
use polynet::metrics::calibrate_threshold;
use polynet::model::DEFAULT_THRESHOLD;
use polynet::render_model;
use serde::Serialize;

use crate::io::{read_table, sibling, write_bytes, write_json};
use crate::usage;

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Layered,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitterArg {
    Projection,
    Ls,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitModeArg {
    Stratified,
    Interleaved,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerInputsArg {
    Survivors,
    #[value(name = "survivors+features")]
    SurvivorsFeatures,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Label,
    Regression,
}

#[derive(clap::Args)]
pub struct Args {
    /// Feature CSV with a binary `label` column.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "layered")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "projection")]
    fitter: FitterArg,
    /// Survivors per layer (layered); default round(0.4 * m(m-1)/2).
    #[arg(long = "F")]
    f: Option<usize>,
    /// Layer stopping threshold on the change of the best criterion.
    #[arg(long = "Delta", default_value_t = 1e-4)]
    big_delta: f64,
    /// Projection learning rate.
    #[arg(long, default_value_t = 1.9)]
    chi: f64,
    /// Per-neuron stopping threshold on the validation error decrease.
    #[arg(long, default_value_t = 0.015)]
    delta: f64,
    /// Validation share of the rows.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long = "split-mode", value_enum, default_value = "stratified")]
    split_mode: SplitModeArg,
    #[arg(long = "max-steps", default_value_t = 200)]
    max_steps: usize,
    #[arg(long = "fail-budget", default_value_t = 7)]
    fail_budget: usize,
    #[arg(long = "max-layers", default_value_t = 10)]
    max_layers: usize,
    /// What layers after the first may combine (layered).
    #[arg(long = "layer-inputs", value_enum, default_value = "survivors")]
    layer_inputs: LayerInputsArg,
    /// Fit the 0/1 labels or the continuous `target` column.
    #[arg(long, value_enum, default_value = "label")]
    target: TargetArg,
    /// Decision threshold stored in the model. Defaults to 0.5 for label
    /// targets and to the accuracy-maximizing cut on the training rows for
    /// regression targets.
    #[arg(long)]
    threshold: Option<f64>,
    /// Standardize features and store the statistics in the model.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Trace JSON; defaults to `<out>.trace.json`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct TraceFile<'a> {
    growth: &'a GrowthParams,
    fit: &'a FitParams,
    normalized: bool,
    threshold: f64,
    threshold_source: &'static str,
    trace: &'a GrowthTrace,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let g = GrowthParams {
        strategy: match a.algo {
            Algo::Layered => Strategy::Layered,
            Algo::Incremental => Strategy::Incremental,
        },
        f: a.f,
        delta_stop: a.big_delta,
        fail_budget: a.fail_budget,
        max_layers: a.max_layers,
        seed: a.seed,
        fitter: match a.fitter {
            FitterArg::Projection => Fitter::Projection,
            FitterArg::Ls => Fitter::LeastSquares,
        },
        layer_inputs: match a.layer_inputs {
            LayerInputsArg::Survivors => LayerInputs::Survivors,
            LayerInputsArg::SurvivorsFeatures => LayerInputs::SurvivorsAndFeatures,
        },
        target: match a.target {
            TargetArg::Label => TargetSource::Label,
            TargetArg::Regression => TargetSource::Regression,
        },
        split_mode: match a.split_mode {
            SplitModeArg::Stratified => SplitMode::Stratified,
            SplitModeArg::Interleaved => SplitMode::Interleaved,
        },
    };
    let f = FitParams {
        chi: a.chi,
        delta: a.delta,
        split_ratio: a.split,
        max_steps: a.max_steps,
        seed: a.seed,
    };
    g.validate().map_err(|e| usage(e.to_string()))?;
    f.validate().map_err(|e| usage(e.to_string()))?;
    if let Some(t) = a.threshold {
        if !t.is_finite() {
            return Err(usage("--threshold must be finite"));
        }
    }

    let raw = read_table(&a.input)?;
    let labels = raw
        .labels()
        .ok_or_else(|| anyhow::anyhow!("{} has no `label` column", a.input.display()))?
        .to_vec();
    let (table, stats) = if a.normalize {
        let stats = normalize_fit(&raw)?;
        (normalize_apply(&raw, &stats)?, Some(stats))
    } else {
        (raw, None)
    };

    let (net, trace) = grow(&table, &g, &f)?;
    let (threshold, source) = match (a.threshold, g.target) {
        (Some(t), _) => (t, "flag"),
        (None, TargetSource::Label) => (DEFAULT_THRESHOLD, "default"),
        (None, TargetSource::Regression) => {
            let scores = (0..table.n_rows())
                .map(|r| net.eval(&table.row(r)))
                .collect::<Result<Vec<_>, _>>()?;
            (calibrate_threshold(&scores, &labels)?, "calibrated")
        }
    };
    let net = net
        .with_threshold(threshold)?
        .with_norm(stats.map(|s| s.to_feature_norms()))?;

    write_bytes(&a.out, render_model(&net).as_bytes())?;
    let trace_path = a.trace.unwrap_or_else(|| sibling(&a.out, "trace.json"));
    write_json(
        &trace_path,
        &TraceFile {
            growth: &g,
            fit: &f,
            normalized: a.normalize,
            threshold,
            threshold_source: source,
            trace: &trace,
        },
    )?;

    let used: Vec<&str> = net
        .used_features()
        .into_iter()
        .map(|i| net.feature_names()[i].as_str())
        .collect();
    println!(
        "{} neurons, depth {}, inputs [{}] -> {}",
        net.neurons().len(),
        net.depth(),
        used.join(", "),
        a.out.display()
    );
    Ok(())
}
