//! Spectral band-power features from multichannel time series.
//!
//! Each channel is cut into fixed windows, a one-sided periodogram is taken
//! per window and summed over frequency bands. Columns are named
//! `<AbsPow|RelPow><Band><Channel>` and ordered mode-major, then band-major,
//! then channel, so 19 channels x 4 bands in absolute mode gives
//! delta C1..C19, theta C1..C19, and so on.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FeatureError, TableError};
use crate::model::FeatureNorm;
use crate::table::FeatureTable;

/// Half-open frequency band `[lo, hi)` in Hz. A band whose upper edge is
/// exactly the Nyquist frequency also includes the Nyquist bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }
}

/// Checks each band and that the set is sorted and non-overlapping.
pub fn validate_bands(bands: &[BandSpec]) -> Result<(), FeatureError> {
    if bands.is_empty() {
        return Err(FeatureError::BadBand {
            name: String::new(),
            reason: "empty band set".into(),
        });
    }
    let mut names = HashSet::new();
    for (i, b) in bands.iter().enumerate() {
        let bad = |reason: &str| FeatureError::BadBand {
            name: b.name.clone(),
            reason: reason.into(),
        };
        if b.name.is_empty() || b.name.contains(',') || !names.insert(b.name.as_str()) {
            return Err(bad("names must be unique, non-empty and comma-free"));
        }
        if !(b.lo.is_finite() && b.hi.is_finite() && 0.0 <= b.lo && b.lo < b.hi) {
            return Err(bad("need 0 <= lo < hi"));
        }
        if i > 0 && b.lo < bands[i - 1].hi {
            return Err(bad("bands must be sorted and non-overlapping"));
        }
    }
    Ok(())
}

/// Four bands for the 19-channel recipe: delta, theta, alpha, beta.
pub fn preset_alz4() -> Vec<BandSpec> {
    vec![
        BandSpec::new("Delta", 0.0, 4.0),
        BandSpec::new("Theta", 4.0, 8.0),
        BandSpec::new("Alpha", 8.0, 14.0),
        BandSpec::new("Beta", 14.0, 20.0),
    ]
}

/// Six bands for the two-channel neonatal recipe.
pub fn preset_neo6() -> Vec<BandSpec> {
    vec![
        BandSpec::new("Subdelta", 0.0, 1.5),
        BandSpec::new("Delta", 1.5, 3.5),
        BandSpec::new("Theta", 3.5, 7.5),
        BandSpec::new("Alpha", 7.5, 13.5),
        BandSpec::new("Beta1", 13.5, 19.5),
        BandSpec::new("Beta2", 19.5, 25.0),
    ]
}

pub fn preset(name: &str) -> Option<Vec<BandSpec>> {
    match name {
        "alz4" => Some(preset_alz4()),
        "neo6" => Some(preset_neo6()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentSpec {
    pub window_s: f64,
    pub step_s: f64,
    pub sample_rate_hz: f64,
}

impl SegmentSpec {
    pub fn new(window_s: f64, step_s: f64, sample_rate_hz: f64) -> Result<Self, FeatureError> {
        let s = Self {
            window_s,
            step_s,
            sample_rate_hz,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let finite = self.window_s.is_finite() && self.step_s.is_finite() && self.sample_rate_hz.is_finite();
        if !finite || self.window_s <= 0.0 || self.sample_rate_hz <= 0.0 {
            return Err(FeatureError::BadSegment("window and rate must be positive".into()));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.window_s) {
            return Err(FeatureError::BadSegment("need 0 < step <= window".into()));
        }
        if self.window_samples() < 2 {
            return Err(FeatureError::BadSegment("window must span at least 2 samples".into()));
        }
        if self.step_samples() == 0 {
            return Err(FeatureError::BadSegment("step must span at least 1 sample".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * self.sample_rate_hz).round() as usize
    }

    pub fn step_samples(&self) -> usize {
        (self.step_s * self.sample_rate_hz).round() as usize
    }

    /// `floor((len - window) / step) + 1`, or 0 when the signal is too short.
    pub fn count(&self, len: usize) -> usize {
        let w = self.window_samples();
        if len < w {
            0
        } else {
            (len - w) / self.step_samples() + 1
        }
    }
}

/// Windows starting at multiples of the step.
pub fn segment<'a>(signal: &'a [f64], spec: &SegmentSpec) -> Result<Vec<&'a [f64]>, FeatureError> {
    spec.validate()?;
    let w = spec.window_samples();
    if signal.len() < w {
        return Err(FeatureError::SignalTooShort {
            len: signal.len(),
            window: w,
        });
    }
    let step = spec.step_samples();
    Ok((0..spec.count(signal.len()))
        .map(|k| &signal[k * step..k * step + w])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    #[default]
    Rect,
    Hann,
}

/// One-sided periodogram: `|X_k|^2 / N`, doubled for bins strictly between
/// DC and Nyquist so the bins sum to the window energy.
#[derive(Debug, Clone)]
pub struct Periodogram {
    pub power: Vec<f64>,
    pub bin_hz: f64,
    pub nyquist: f64,
}

impl Periodogram {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn band(&self, band: &BandSpec) -> Result<f64, FeatureError> {
        if band.hi > self.nyquist + 1e-9 {
            return Err(FeatureError::AboveNyquist {
                name: band.name.clone(),
                hi: band.hi,
                nyquist: self.nyquist,
            });
        }
        let closes_at_nyquist = (band.hi - self.nyquist).abs() <= 1e-9;
        Ok(self
            .power
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * self.bin_hz;
                (band.lo <= f && f < band.hi) || (closes_at_nyquist && (f - self.nyquist).abs() <= 1e-9)
            })
            .map(|(_, p)| p)
            .sum())
    }
}

pub struct SpectrumPlan {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    rate: f64,
}

impl SpectrumPlan {
    pub fn new(len: usize, rate: f64, taper: Taper) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let taper = match taper {
            Taper::Rect => vec![1.0; len],
            Taper::Hann => (0..len)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / len as f64;
                    x.sin().powi(2)
                })
                .collect(),
        };
        Self { fft, taper, rate }
    }

    pub fn periodogram(&self, window: &[f64]) -> Result<Periodogram, FeatureError> {
        let n = window.len();
        if n == 0 {
            return Err(FeatureError::EmptyWindow);
        }
        assert_eq!(n, self.taper.len(), "window length differs from plan");
        let mut buf: Vec<Complex<f64>> = window
            .iter()
            .zip(&self.taper)
            .map(|(x, t)| Complex::new(x * t, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let half = n / 2;
        let power = (0..=half)
            .map(|k| {
                let p = buf[k].norm_sqr() / n as f64;
                let is_nyquist = n % 2 == 0 && k == half;
                if k == 0 || is_nyquist {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        Ok(Periodogram {
            power,
            bin_hz: self.rate / n as f64,
            nyquist: self.rate / 2.0,
        })
    }
}

/// Absolute band power of one window (rectangular taper).
pub fn band_power(window: &[f64], rate: f64, band: &BandSpec) -> Result<f64, FeatureError> {
    if window.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    SpectrumPlan::new(window.len(), rate, Taper::Rect)
        .periodogram(window)?
        .band(band)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    Absolute,
    AbsoluteRelative,
}

/// A time-domain sum of two channels, named by `alias` in feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumChannel {
    pub left: String,
    pub right: String,
    pub alias: String,
}

impl SumChannel {
    /// Parses `A+B` (alias empty, so `AbsPowThetaC3+C4` is written
    /// `AbsPowTheta`) or `A+B=Alias`.
    pub fn parse(s: &str) -> Option<Self> {
        let (pair, alias) = match s.split_once('=') {
            Some((p, a)) => (p, a.trim().to_string()),
            None => (s, String::new()),
        };
        let (l, r) = pair.split_once('+')?;
        let (l, r) = (l.trim(), r.trim());
        if l.is_empty() || r.is_empty() {
            return None;
        }
        Some(Self {
            left: l.to_string(),
            right: r.to_string(),
            alias,
        })
    }
}

/// Column names in extraction order.
pub fn band_feature_names(bands: &[BandSpec], channels: &[String], mode: PowerMode) -> Vec<String> {
    let prefixes: &[&str] = match mode {
        PowerMode::Absolute => &["AbsPow"],
        PowerMode::AbsoluteRelative => &["AbsPow", "RelPow"],
    };
    let mut names = Vec::with_capacity(prefixes.len() * bands.len() * channels.len());
    for p in prefixes {
        for b in bands {
            for c in channels {
                names.push(format!("{p}{}{c}", b.name));
            }
        }
    }
    names
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub bands: Vec<BandSpec>,
    pub segment: SegmentSpec,
    pub mode: PowerMode,
    pub sum_channels: Vec<SumChannel>,
    pub taper: Taper,
}

/// Segment whose relative powers are undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedSegment {
    pub segment: usize,
    pub channel: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// One row per valid segment.
    pub table: FeatureTable,
    /// Source segment index of each row.
    pub segments: Vec<usize>,
    pub flagged: Vec<FlaggedSegment>,
}

/// Band-power feature table from named, equal-length channels.
pub fn extract_band_features(
    channels: &[(String, Vec<f64>)],
    opts: &ExtractOptions,
) -> Result<Extraction, FeatureError> {
    validate_bands(&opts.bands)?;
    opts.segment.validate()?;
    let nyquist = opts.segment.sample_rate_hz / 2.0;
    if let Some(b) = opts.bands.iter().find(|b| b.hi > nyquist + 1e-9) {
        return Err(FeatureError::AboveNyquist {
            name: b.name.clone(),
            hi: b.hi,
            nyquist,
        });
    }
    let len = channels.first().map(|c| c.1.len()).unwrap_or(0);
    if channels.iter().any(|c| c.1.len() != len) {
        return Err(FeatureError::RaggedChannels);
    }

    let mut signals: Vec<(String, Vec<f64>)> = channels.to_vec();
    for s in &opts.sum_channels {
        let find = |name: &str| {
            channels
                .iter()
                .find(|c| c.0 == name)
                .map(|c| &c.1)
                .ok_or_else(|| FeatureError::UnknownChannel(name.to_string()))
        };
        let (l, r) = (find(&s.left)?, find(&s.right)?);
        signals.push((s.alias.clone(), l.iter().zip(r).map(|(a, b)| a + b).collect()));
    }
    let labels: Vec<String> = signals.iter().map(|s| s.0.clone()).collect();
    let names = band_feature_names(&opts.bands, &labels, opts.mode);
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(FeatureError::DuplicateColumn(n.clone()));
        }
    }

    let n_seg = opts.segment.count(len);
    if n_seg == 0 {
        return Err(FeatureError::SignalTooShort {
            len,
            window: opts.segment.window_samples(),
        });
    }
    let w = opts.segment.window_samples();
    let step = opts.segment.step_samples();
    let plan = SpectrumPlan::new(w, opts.segment.sample_rate_hz, opts.taper);
    let nb = opts.bands.len();
    let nc = signals.len();

    // per segment: abs[band][channel], or the channel whose total is zero
    let per_segment: Vec<Result<Vec<f64>, FlaggedSegment>> = (0..n_seg)
        .into_par_iter()
        .map(|k| {
            let mut abs = vec![0.0; nb * nc];
            let mut totals = vec![0.0; nc];
            for (c, (label, sig)) in signals.iter().enumerate() {
                let pg = plan.periodogram(&sig[k * step..k * step + w]).expect("non-empty window");
                for (b, band) in opts.bands.iter().enumerate() {
                    let p = pg.band(band).expect("bands checked against Nyquist");
                    abs[b * nc + c] = p;
                    totals[c] += p;
                }
                if opts.mode == PowerMode::AbsoluteRelative && !(totals[c] > 0.0) {
                    return Err(FlaggedSegment {
                        segment: k,
                        channel: label.clone(),
                        reason: "zero power over the band set; relative power undefined".into(),
                    });
                }
            }
            let mut row = abs.clone();
            if opts.mode == PowerMode::AbsoluteRelative {
                for b in 0..nb {
                    for c in 0..nc {
                        row.push(abs[b * nc + c] / totals[c]);
                    }
                }
            }
            Ok(row)
        })
        .collect();

    let mut columns = vec![Vec::with_capacity(n_seg); names.len()];
    let mut segments = Vec::new();
    let mut flagged = Vec::new();
    for (k, r) in per_segment.into_iter().enumerate() {
        match r {
            Ok(row) => {
                for (col, v) in columns.iter_mut().zip(row) {
                    col.push(v);
                }
                segments.push(k);
            }
            Err(f) => flagged.push(f),
        }
    }
    let table = FeatureTable::new(names, columns, None, None).map_err(|e| match e {
        TableError::DuplicateColumn(c) => FeatureError::DuplicateColumn(c),
        other => FeatureError::ColumnMismatch(other.to_string()),
    })?;
    Ok(Extraction {
        table,
        segments,
        flagged,
    })
}

/// Per-feature mean and sample standard deviation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn to_feature_norms(&self) -> Vec<FeatureNorm> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(&mean, &std)| FeatureNorm { mean, std })
            .collect()
    }
}

pub fn normalize_fit(table: &FeatureTable) -> Result<NormStats, FeatureError> {
    let n = table.n_rows();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let mut mean = Vec::with_capacity(table.n_features());
    let mut std = Vec::with_capacity(table.n_features());
    for (name, col) in table.names().iter().zip(table.columns()) {
        let mu = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        // relative test so constant columns with round-off still count as constant
        if !(sd > 1e-12 * mu.abs().max(f64::MIN_POSITIVE)) || !sd.is_finite() {
            return Err(FeatureError::ZeroVariance(name.clone()));
        }
        mean.push(mu);
        std.push(sd);
    }
    Ok(NormStats {
        names: table.names().to_vec(),
        mean,
        std,
    })
}

pub fn normalize_apply(table: &FeatureTable, stats: &NormStats) -> Result<FeatureTable, FeatureError> {
    if table.names() != stats.names.as_slice() {
        return Err(FeatureError::ColumnMismatch(format!(
            "table has {} columns, stats were fitted on {}",
            table.n_features(),
            stats.names.len()
        )));
    }
    let columns = table
        .columns()
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(c, (m, s))| c.iter().map(|v| (v - m) / s).collect())
        .collect();
    FeatureTable::new(
        table.names().to_vec(),
        columns,
        table.labels().map(<[u8]>::to_vec),
        table.targets().map(<[f64]>::to_vec),
    )
    .map_err(|e| FeatureError::ColumnMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, rate: f64, secs: f64, amp: f64) -> Vec<f64> {
        let n = (secs * rate).round() as usize;
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
    }

    /// Direct O(N^2) DFT, independent of the FFT path.
    fn dft_onesided(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                let p = (re * re + im * im) / n as f64;
                if k == 0 || (n % 2 == 0 && k == n / 2) {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect()
    }

    #[test]
    fn segment_counts() {
        let spec = SegmentSpec::new(0.5, 0.25, 128.0).unwrap();
        let sig = vec![0.0; 8 * 128];
        assert_eq!(segment(&sig, &spec).unwrap().len(), 31);
        let one = vec![0.0; 64];
        assert_eq!(segment(&one, &spec).unwrap().len(), 1);
        let neo = SegmentSpec::new(10.0, 10.0, 100.0).unwrap();
        assert_eq!(segment(&vec![0.0; 12000], &neo).unwrap().len(), 12);
        assert!(matches!(segment(&[0.0; 10], &spec), Err(FeatureError::SignalTooShort { .. })));
    }

    #[test]
    fn segments_start_at_step_multiples() {
        let spec = SegmentSpec::new(0.5, 0.25, 8.0).unwrap();
        let sig: Vec<f64> = (0..16).map(f64::from).collect();
        let w = segment(&sig, &spec).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[1][0], 2.0);
        assert_eq!(w[6], &[12.0, 13.0, 14.0, 15.0]);
    }

    #[test]
    fn bad_segment_specs() {
        assert!(SegmentSpec::new(0.5, 0.75, 100.0).is_err());
        assert!(SegmentSpec::new(0.5, 0.0, 100.0).is_err());
        assert!(SegmentSpec::new(0.01, 0.01, 100.0).is_err());
        assert!(SegmentSpec::new(-1.0, 0.5, 100.0).is_err());
    }

    #[test]
    fn periodogram_matches_direct_dft() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3 + (i as f64 * 0.4).cos()).collect();
        let pg = SpectrumPlan::new(50, 100.0, Taper::Rect).periodogram(&x).unwrap();
        let oracle = dft_onesided(&x);
        for (a, b) in pg.power.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn pure_tone_lands_in_alpha() {
        let x = tone(10.0, 100.0, 10.0, 1.0);
        let alpha = BandSpec::new("Alpha", 7.5, 13.5);
        let pg = SpectrumPlan::new(x.len(), 100.0, Taper::Rect).periodogram(&x).unwrap();
        let p = band_power(&x, 100.0, &alpha).unwrap();
        assert!(p >= 0.95 * pg.total());
        // oracle: energy of a unit sine over 1000 samples is 500
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((pg.total() - energy).abs() < 1e-9 * energy);
        assert!((energy - 500.0).abs() < 1e-6);
    }

    #[test]
    fn zero_and_dc_windows() {
        let bands = preset_neo6();
        for b in &bands {
            assert_eq!(band_power(&[0.0; 100], 100.0, b).unwrap(), 0.0);
        }
        let dc = vec![2.0; 100];
        let sub = band_power(&dc, 100.0, &bands[0]).unwrap();
        assert!((sub - 400.0).abs() < 1e-9);
        for b in &bands[1..] {
            assert!(band_power(&dc, 100.0, b).unwrap() < 1e-20);
        }
    }

    #[test]
    fn band_above_nyquist_is_rejected() {
        let b = BandSpec::new("Beta", 14.0, 20.0);
        assert!(matches!(band_power(&[1.0; 32], 32.0, &b), Err(FeatureError::AboveNyquist { .. })));
        assert!(matches!(band_power(&[], 32.0, &b), Err(FeatureError::EmptyWindow)));
    }

    fn neo_channels(secs: f64) -> Vec<(String, Vec<f64>)> {
        let c3: Vec<f64> = tone(2.0, 100.0, secs, 1.0)
            .iter()
            .zip(tone(11.0, 100.0, secs, 0.5))
            .map(|(a, b)| a + b)
            .collect();
        let c4: Vec<f64> = tone(5.0, 100.0, secs, 0.8)
            .iter()
            .zip(tone(0.5, 100.0, secs, 1.2))
            .map(|(a, b)| a + b)
            .collect();
        vec![("C3".into(), c3), ("C4".into(), c4)]
    }

    fn neo_opts() -> ExtractOptions {
        ExtractOptions {
            bands: preset_neo6(),
            segment: SegmentSpec::new(10.0, 10.0, 100.0).unwrap(),
            mode: PowerMode::AbsoluteRelative,
            sum_channels: vec![SumChannel::parse("C3+C4").unwrap()],
            taper: Taper::Rect,
        }
    }

    #[test]
    fn neonatal_layout_has_36_named_columns() {
        let ex = extract_band_features(&neo_channels(30.0), &neo_opts()).unwrap();
        assert_eq!(ex.table.n_features(), 36);
        assert_eq!(ex.table.n_rows(), 3);
        for name in [
            "AbsPowSubdeltaC3",
            "AbsPowSubdeltaC4",
            "RelPowThetaC4",
            "RelPowTheta",
            "AbsPowThetaC4",
            "RelPowAlphaC4",
            "AbsPowAlpha",
            "RelPowBeta2C3",
        ] {
            assert!(ex.table.column_index(name).is_some(), "{name}");
        }
        // relative powers per channel sum to one
        for label in ["C3", "C4", ""] {
            for r in 0..ex.table.n_rows() {
                let s: f64 = preset_neo6()
                    .iter()
                    .map(|b| ex.table.column(ex.table.column_index(&format!("RelPow{}{label}", b.name)).unwrap())[r])
                    .sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sum_channel_equals_summing_first() {
        let chans = neo_channels(20.0);
        let ex = extract_band_features(&chans, &neo_opts()).unwrap();
        let summed: Vec<f64> = chans[0].1.iter().zip(&chans[1].1).map(|(a, b)| a + b).collect();
        let single = ExtractOptions {
            sum_channels: vec![],
            ..neo_opts()
        };
        let ex2 = extract_band_features(&[("S".into(), summed)], &single).unwrap();
        for b in preset_neo6() {
            for p in ["AbsPow", "RelPow"] {
                let a = ex.table.column(ex.table.column_index(&format!("{p}{}", b.name)).unwrap());
                let s = ex2.table.column(ex2.table.column_index(&format!("{p}{}S", b.name)).unwrap());
                assert_eq!(a, s);
            }
        }
    }

    #[test]
    fn alzheimer_layout_is_band_major() {
        let chans: Vec<(String, Vec<f64>)> = (1..=19)
            .map(|i| (format!("C{i}"), tone(i as f64, 128.0, 8.0, 1.0)))
            .collect();
        let opts = ExtractOptions {
            bands: preset_alz4(),
            segment: SegmentSpec::new(0.5, 0.25, 128.0).unwrap(),
            mode: PowerMode::Absolute,
            sum_channels: vec![],
            taper: Taper::Rect,
        };
        let ex = extract_band_features(&chans, &opts).unwrap();
        assert_eq!(ex.table.n_features(), 76);
        assert_eq!(ex.table.n_rows(), 31);
        // 1-based x11 is delta C11; x69, x73, x76 are beta C12, C16, C19
        assert_eq!(ex.table.names()[10], "AbsPowDeltaC11");
        assert_eq!(ex.table.names()[68], "AbsPowBetaC12");
        assert_eq!(ex.table.names()[72], "AbsPowBetaC16");
        assert_eq!(ex.table.names()[75], "AbsPowBetaC19");
    }

    #[test]
    fn zero_power_segment_is_flagged() {
        let mut chans = neo_channels(30.0);
        for v in &mut chans[1].1[1000..2000] {
            *v = 0.0;
        }
        let opts = ExtractOptions {
            sum_channels: vec![],
            ..neo_opts()
        };
        let ex = extract_band_features(&chans, &opts).unwrap();
        assert_eq!(ex.segments, vec![0, 2]);
        assert_eq!(ex.flagged.len(), 1);
        assert_eq!(ex.flagged[0].segment, 1);
        assert_eq!(ex.flagged[0].channel, "C4");
    }

    #[test]
    fn extraction_errors() {
        let chans = neo_channels(20.0);
        let opts = ExtractOptions {
            sum_channels: vec![SumChannel::parse("C3+Cz").unwrap()],
            ..neo_opts()
        };
        assert!(matches!(extract_band_features(&chans, &opts), Err(FeatureError::UnknownChannel(_))));
        let mut ragged = chans.clone();
        ragged[1].1.pop();
        assert!(matches!(extract_band_features(&ragged, &neo_opts()), Err(FeatureError::RaggedChannels)));
        let two_sums = ExtractOptions {
            sum_channels: vec![SumChannel::parse("C3+C4").unwrap(), SumChannel::parse("C4+C3").unwrap()],
            ..neo_opts()
        };
        assert!(matches!(extract_band_features(&chans, &two_sums), Err(FeatureError::DuplicateColumn(_))));
        let overlap = vec![BandSpec::new("A", 0.0, 5.0), BandSpec::new("B", 4.0, 8.0)];
        assert!(validate_bands(&overlap).is_err());
    }

    #[test]
    fn sum_channel_parsing() {
        assert_eq!(
            SumChannel::parse("C3+C4"),
            Some(SumChannel { left: "C3".into(), right: "C4".into(), alias: String::new() })
        );
        assert_eq!(SumChannel::parse("C3+C4=Sum").unwrap().alias, "Sum");
        assert_eq!(SumChannel::parse("C3"), None);
        assert_eq!(SumChannel::parse("+C4"), None);
    }

    #[test]
    fn normalization_closed_form() {
        let t = FeatureTable::new(vec!["a".into()], vec![vec![1.0, 2.0, 3.0]], None, None).unwrap();
        let s = normalize_fit(&t).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (2.0, 1.0));
        let z = normalize_apply(&t, &s).unwrap();
        assert_eq!(z.column(0), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn normalization_errors() {
        let flat = FeatureTable::new(vec!["a".into()], vec![vec![4.0; 5]], None, None).unwrap();
        assert!(matches!(normalize_fit(&flat), Err(FeatureError::ZeroVariance(_))));
        let one = FeatureTable::new(vec!["a".into()], vec![vec![4.0]], None, None).unwrap();
        assert!(matches!(normalize_fit(&one), Err(FeatureError::TooFewRows(1))));
        let t = FeatureTable::new(vec!["a".into()], vec![vec![1.0, 2.0]], None, None).unwrap();
        let other = FeatureTable::new(vec!["b".into()], vec![vec![1.0, 2.0]], None, None).unwrap();
        let s = normalize_fit(&t).unwrap();
        assert!(matches!(normalize_apply(&other, &s), Err(FeatureError::ColumnMismatch(_))));
    }

    proptest! {
        #[test]
        fn segmentation_count_formula(len in 2usize..3000, win in 2usize..200, step_frac in 0.01f64..1.0) {
            let rate = 100.0;
            let step = ((win as f64 * step_frac).round() as usize).max(1);
            let spec = SegmentSpec::new(win as f64 / rate, step as f64 / rate, rate).unwrap();
            prop_assume!(spec.window_samples() == win && spec.step_samples() == step);
            match segment(&vec![0.0; len], &spec) {
                Ok(w) => {
                    prop_assert_eq!(w.len(), (len - win) / step + 1);
                    prop_assert!(w.iter().all(|s| s.len() == win));
                }
                Err(_) => prop_assert!(len < win),
            }
        }

        #[test]
        fn power_is_conserved(x in proptest::collection::vec(-10f64..10.0, 2..300)) {
            let rate = 100.0;
            let pg = SpectrumPlan::new(x.len(), rate, Taper::Rect).periodogram(&x).unwrap();
            let bands = vec![BandSpec::new("lo", 0.0, 13.0), BandSpec::new("mid", 13.0, 31.0), BandSpec::new("hi", 31.0, 50.0)];
            let sum: f64 = bands.iter().map(|b| pg.band(b).unwrap()).sum();
            let total = pg.total();
            prop_assert!((sum - total).abs() <= 1e-9 * total.max(1e-300));
            let energy: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((total - energy).abs() <= 1e-9 * energy.max(1e-300));
        }

        #[test]
        fn out_of_band_tone_leaves_band_power(f_out in 31.0f64..45.0, phase in 0.0f64..6.28) {
            // 10 s windows: every integer frequency sits on a bin
            let rate = 100.0;
            let f_out = f_out.round();
            let base = tone(10.0, rate, 10.0, 1.0);
            let extra: Vec<f64> = base.iter().enumerate()
                .map(|(i, v)| v + 0.7 * (2.0 * PI * f_out * i as f64 / rate + phase).sin())
                .collect();
            let alpha = BandSpec::new("Alpha", 7.5, 13.5);
            let a = band_power(&base, rate, &alpha).unwrap();
            let b = band_power(&extra, rate, &alpha).unwrap();
            prop_assert!((a - b).abs() <= 1e-2 * a);
        }

        #[test]
        fn relative_powers_sum_to_one(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = crate::rng::seeded(seed);
            let x: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
            let opts = ExtractOptions { sum_channels: vec![], ..neo_opts() };
            let ex = extract_band_features(&[("C3".into(), x)], &opts).unwrap();
            let s: f64 = preset_neo6().iter()
                .map(|b| ex.table.column(ex.table.column_index(&format!("RelPow{}C3", b.name)).unwrap())[0])
                .sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }
    }
}
