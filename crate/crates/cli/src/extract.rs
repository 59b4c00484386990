use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use polynet::features::{
    extract_band_features, preset, validate_bands, BandSpec, ExtractOptions, PowerMode, SegmentSpec,
    SumChannel, Taper,
};
use polynet::table::read_channels_csv;

use crate::io::write_table;
use crate::usage;

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Absolute band powers only.
    Abs,
    /// Absolute then relative band powers.
    #[value(name = "abs+rel")]
    AbsRel,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaperArg {
    Rect,
    Hann,
}

#[derive(clap::Args)]
pub struct Args {
    /// Raw samples: one named column per channel, one row per sample.
    input: PathBuf,
    /// Sampling rate in Hz.
    #[arg(long)]
    rate: f64,
    /// Window length in seconds.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    /// Step between window starts in seconds.
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    /// `preset:alz4`, `preset:neo6`, a JSON list of {name, lo, hi}, or a
    /// path to such a file.
    #[arg(long, default_value = "preset:alz4")]
    bands: String,
    #[arg(long, value_enum, default_value = "abs")]
    mode: Mode,
    /// Extra channels formed as sample-wise sums, e.g. `C3+C4` or
    /// `C3+C4=Sum`.
    #[arg(long = "sum-channels", value_delimiter = ',')]
    sum_channels: Vec<String>,
    #[arg(long, value_enum, default_value = "rect")]
    taper: TaperArg,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn parse_bands(s: &str) -> anyhow::Result<Vec<BandSpec>> {
    let bands: Vec<BandSpec> = if let Some(name) = s.strip_prefix("preset:") {
        preset(name).ok_or_else(|| usage(format!("unknown band preset {name:?} (known: alz4, neo6)")))?
    } else if s.trim_start().starts_with('[') {
        serde_json::from_str(s).map_err(|e| usage(format!("--bands: {e}")))?
    } else {
        let text = fs::read_to_string(s).map_err(|e| usage(format!("--bands {s}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("--bands {s}: {e}")))?
    };
    validate_bands(&bands).map_err(|e| usage(format!("--bands: {e}")))?;
    Ok(bands)
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let bands = parse_bands(&a.bands)?;
    let segment = SegmentSpec::new(a.window, a.step, a.rate).map_err(|e| usage(e.to_string()))?;
    let sum_channels = a
        .sum_channels
        .iter()
        .map(|s| SumChannel::parse(s).ok_or_else(|| usage(format!("bad --sum-channels entry {s:?}"))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let opts = ExtractOptions {
        bands,
        segment,
        mode: match a.mode {
            Mode::Abs => PowerMode::Absolute,
            Mode::AbsRel => PowerMode::AbsoluteRelative,
        },
        sum_channels,
        taper: match a.taper {
            TaperArg::Rect => Taper::Rect,
            TaperArg::Hann => Taper::Hann,
        },
    };

    let f = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let channels =
        read_channels_csv(BufReader::new(f)).with_context(|| format!("reading {}", a.input.display()))?;
    let ex = extract_band_features(&channels, &opts)?;
    for fl in &ex.flagged {
        eprintln!("warning: segment {} dropped ({}: {})", fl.segment, fl.channel, fl.reason);
    }
    write_table(&a.out, &ex.table)?;
    println!(
        "{} segments x {} features -> {}",
        ex.table.n_rows(),
        ex.table.n_features(),
        a.out.display()
    );
    Ok(())
}
