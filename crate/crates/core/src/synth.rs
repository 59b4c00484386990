//! Synthetic feature tables generated by a planted polynomial network.
//!
//! Row `r` draws its features and noise from its own generator stream
//! (`derive_seed(seed, r)`), so rows are reproducible independently of how
//! many are generated or in what order.

use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::Serialize;

use crate::error::SynthError;
use crate::features::{band_feature_names, preset_alz4, preset_neo6, PowerMode};
use crate::model::{InputRef, Neuron, PolyNetwork, Weights4, DEFAULT_THRESHOLD};
use crate::rng::{derive_seed, seeded, Rng};
use crate::table::FeatureTable;

/// Additive noise on the regression target. A zero scale means no noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Noise {
    Gaussian { sigma: f64 },
    Laplace { b: f64 },
    StudentT { nu: f64, scale: f64 },
}

impl Noise {
    fn scale(&self) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => sigma,
            Noise::Laplace { b } => b,
            Noise::StudentT { scale, .. } => scale,
        }
    }

    /// Theoretical standard deviation, when finite.
    pub fn std_dev(&self) -> Option<f64> {
        match *self {
            Noise::Gaussian { sigma } => Some(sigma),
            Noise::Laplace { b } => Some(std::f64::consts::SQRT_2 * b),
            Noise::StudentT { nu, scale } if nu > 2.0 => Some(scale * (nu / (nu - 2.0)).sqrt()),
            Noise::StudentT { .. } => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Noise::Gaussian { .. } => "gaussian",
            Noise::Laplace { .. } => "laplace",
            Noise::StudentT { .. } => "student-t",
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let s = self.scale();
        if !(s.is_finite() && s >= 0.0) {
            return Err(SynthError::BadSpec(format!("noise scale must be >= 0, got {s}")));
        }
        if let Noise::StudentT { nu, .. } = *self {
            if !(nu.is_finite() && nu > 0.0) {
                return Err(SynthError::BadSpec(format!("degrees of freedom must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if self.scale() == 0.0 {
            return 0.0;
        }
        match *self {
            Noise::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            Noise::Laplace { b } => {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = Uniform::new(-0.5, 0.5).expect("valid range").sample(rng);
                -b * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
            Noise::StudentT { nu, scale } => {
                scale * StudentT::new(nu).expect("validated").sample(rng)
            }
        }
    }
}

/// Class labels are 1 where the clean generator output reaches a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LabelRule {
    Threshold { value: f64 },
    /// Threshold at the median clean output of the generated rows.
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub generator: PolyNetwork,
    /// Total columns; those past `generator.m()` are pure distractors.
    pub m_total: usize,
    pub n_rows: usize,
    pub noise: Noise,
    pub label_rule: LabelRule,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// Features, noisy `target` and `label`.
    pub table: FeatureTable,
    pub clean: Vec<f64>,
    /// The label threshold actually applied.
    pub threshold: f64,
}

/// Generates a labelled table from the planted network.
pub fn gen_dataset(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    let g = &spec.generator;
    if spec.m_total < g.m() {
        return Err(SynthError::BadSpec(format!(
            "m_total {} is smaller than the generator's {} features",
            spec.m_total,
            g.m()
        )));
    }
    if g.norm().is_some() {
        return Err(SynthError::BadSpec("generator must not carry normalization".into()));
    }
    if spec.n_rows == 0 {
        return Err(SynthError::BadSpec("n_rows must be at least 1".into()));
    }
    spec.noise.validate()?;

    let mut columns = vec![Vec::with_capacity(spec.n_rows); spec.m_total];
    let mut clean = Vec::with_capacity(spec.n_rows);
    let mut targets = Vec::with_capacity(spec.n_rows);
    let mut row = vec![0.0; spec.m_total];
    for r in 0..spec.n_rows {
        let mut rng = seeded(derive_seed(spec.seed, r as u64));
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let y = g.eval(&row[..g.m()])?;
        clean.push(y);
        targets.push(y + spec.noise.sample(&mut rng));
        for (c, &v) in columns.iter_mut().zip(&row) {
            c.push(v);
        }
    }

    let threshold = match spec.label_rule {
        LabelRule::Threshold { value } if value.is_finite() => value,
        LabelRule::Threshold { value } => {
            return Err(SynthError::BadSpec(format!("threshold must be finite, got {value}")))
        }
        LabelRule::Median => median(&clean),
    };
    let labels = clean.iter().map(|&y| u8::from(y >= threshold)).collect();

    let mut names = g.feature_names().to_vec();
    names.extend((g.m()..spec.m_total).map(|i| format!("d{}", i + 1)));
    let table = FeatureTable::new(names, columns, Some(labels), Some(targets))
        .map_err(|e| SynthError::BadSpec(e.to_string()))?;
    Ok(SynthData {
        table,
        clean,
        threshold,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn channel_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Column names of the 19-channel, 4-band absolute layout (76 features).
pub fn alzheimer_feature_names() -> Vec<String> {
    band_feature_names(&preset_alz4(), &channel_names("C", 19), PowerMode::Absolute)
}

/// Column names of the C3/C4/C3+C4, 6-band absolute+relative layout
/// (36 features). The summed channel has an empty suffix.
pub fn sleep_feature_names() -> Vec<String> {
    let chans = vec!["C3".to_string(), "C4".to_string(), String::new()];
    band_feature_names(&preset_neo6(), &chans, PowerMode::AbsoluteRelative)
}

fn w(a: [f64; 4]) -> Weights4 {
    Weights4::new(a).expect("fixture weights are finite")
}

/// The two published networks: the three-neuron chain over 76 band powers
/// and the seven-neuron network over 36 neonatal features.
pub fn reference_models() -> Vec<PolyNetwork> {
    vec![alzheimer_model(), sleep_model()]
}

/// `y1 = P(x11, x69)`, `y2 = P(y1, x73)`, `y3 = P(y2, x76)` (1-based feature
/// numbers).
pub fn alzheimer_model() -> PolyNetwork {
    let f = InputRef::Feature;
    let n = InputRef::Neuron;
    PolyNetwork::new(
        alzheimer_feature_names(),
        None,
        vec![
            Neuron::new([f(10), f(68)], w([0.696, 0.391, 0.248, -0.231]), 1),
            Neuron::new([n(0), f(72)], w([0.386, 0.564, 0.542, -0.485]), 2),
            Neuron::new([n(1), f(75)], w([0.191, 0.776, 0.238, -0.204]), 3),
        ],
        2,
        DEFAULT_THRESHOLD,
    )
    .expect("fixture is valid")
}

pub fn sleep_model() -> PolyNetwork {
    let names = sleep_feature_names();
    let f = |name: &str| {
        InputRef::Feature(names.iter().position(|n| n == name).expect("fixture feature exists"))
    };
    let n = InputRef::Neuron;
    let neurons = vec![
        Neuron::new([f("AbsPowThetaC4"), f("RelPowThetaC4")], w([0.947, -0.087, 0.073, 0.070]), 1),
        Neuron::new([f("AbsPowSubdeltaC3"), f("RelPowBeta2C3")], w([0.933, -0.131, -0.066, -0.065]), 1),
        Neuron::new([f("AbsPowSubdeltaC4"), f("RelPowTheta")], w([0.932, -0.204, -0.008, 0.003]), 1),
        Neuron::new([f("AbsPowAlpha"), f("RelPowAlphaC4")], w([0.929, -0.193, 0.034, 0.036]), 1),
        Neuron::new([n(0), n(1)], w([0.189, -0.595, 0.666, 0.764]), 2),
        Neuron::new([n(2), n(3)], w([0.250, -0.003, -0.540, 1.331]), 2),
        Neuron::new([n(4), n(5)], w([0.282, -0.104, 0.045, 0.783]), 3),
    ];
    PolyNetwork::new(names.clone(), None, neurons, 6, DEFAULT_THRESHOLD).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: Noise, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            generator: alzheimer_model(),
            m_total: 76,
            n_rows: n,
            noise,
            label_rule: LabelRule::Median,
            seed,
        }
    }

    #[test]
    fn alzheimer_fixture_shape() {
        let net = alzheimer_model();
        assert_eq!(net.neurons().len(), 3);
        assert_eq!(net.depth(), 3);
        assert_eq!(net.used_features().into_iter().collect::<Vec<_>>(), vec![10, 68, 72, 75]);
    }

    #[test]
    fn sleep_fixture_shape() {
        let net = sleep_model();
        assert_eq!(net.m(), 36);
        assert_eq!(net.neurons().len(), 7);
        let per_layer: Vec<usize> = (1..=3)
            .map(|l| net.neurons().iter().filter(|n| n.layer == l).count())
            .collect();
        assert_eq!(per_layer, vec![4, 2, 1]);
        assert_eq!(net.used_features().len(), 8);
        assert_eq!(net.neurons()[net.output()].weights.to_array(), [0.282, -0.104, 0.045, 0.783]);
        let used: Vec<&str> = net.used_features().iter().map(|&i| net.feature_names()[i].as_str()).collect();
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
            assert!(used.contains(&name), "{name}");
        }
    }

    #[test]
    fn zero_noise_target_is_clean() {
        let d = gen_dataset(&spec(Noise::Gaussian { sigma: 0.0 }, 50, 1)).unwrap();
        assert_eq!(d.table.targets().unwrap(), d.clean.as_slice());
    }

    #[test]
    fn median_labels_are_balanced() {
        let d = gen_dataset(&spec(Noise::Gaussian { sigma: 0.1 }, 1000, 5)).unwrap();
        assert_eq!(d.table.n_features(), 76);
        let pos = d.table.labels().unwrap().iter().filter(|&&l| l == 1).count() as f64 / 1000.0;
        assert!((0.2..=0.8).contains(&pos), "{pos}");
        for (l, y) in d.table.labels().unwrap().iter().zip(&d.clean) {
            assert_eq!(*l == 1, *y >= d.threshold);
        }
    }

    #[test]
    fn equal_seeds_give_identical_tables() {
        let s = spec(Noise::StudentT { nu: 3.0, scale: 0.1 }, 64, 9);
        let a = gen_dataset(&s).unwrap();
        let b = gen_dataset(&s).unwrap();
        let bits = |d: &SynthData| -> Vec<u64> {
            d.table.columns().iter().flatten().chain(d.table.targets().unwrap()).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = gen_dataset(&SynthSpec { seed: 10, ..s }).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rows_do_not_depend_on_table_size() {
        let a = gen_dataset(&spec(Noise::Laplace { b: 0.2 }, 10, 4)).unwrap();
        let b = gen_dataset(&spec(Noise::Laplace { b: 0.2 }, 30, 4)).unwrap();
        assert_eq!(a.table.row(7), b.table.row(7));
        assert_eq!(a.clean[..10], b.clean[..10]);
    }

    #[test]
    fn distractors_do_not_move_clean_outputs() {
        let d = gen_dataset(&spec(Noise::Gaussian { sigma: 0.1 }, 200, 2)).unwrap();
        // reverse every column the generator does not read
        let used = alzheimer_model().used_features();
        let net = alzheimer_model();
        for r in 0..200 {
            let mut row = d.table.row(r);
            let free: Vec<usize> = (0..76).filter(|i| !used.contains(i)).collect();
            let vals: Vec<f64> = free.iter().rev().map(|&i| row[i]).collect();
            for (&i, v) in free.iter().zip(vals) {
                row[i] = v;
            }
            assert_eq!(net.eval(&row).unwrap(), d.clean[r]);
        }
    }

    #[test]
    fn noise_scales_match_theory() {
        for noise in [
            Noise::Gaussian { sigma: 0.3 },
            Noise::Laplace { b: 0.3 },
            Noise::StudentT { nu: 3.0, scale: 0.3 },
        ] {
            let mut rng = seeded(77);
            let xs: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
            let want = noise.std_dev().unwrap();
            assert!((sd - want).abs() <= 0.1 * want, "{} sd {sd} want {want}", noise.family());
        }
    }

    #[test]
    fn spec_errors() {
        assert!(gen_dataset(&SynthSpec { m_total: 10, ..spec(Noise::Gaussian { sigma: 0.1 }, 5, 0) }).is_err());
        assert!(gen_dataset(&spec(Noise::Gaussian { sigma: -1.0 }, 5, 0)).is_err());
        assert!(gen_dataset(&spec(Noise::Gaussian { sigma: 0.1 }, 0, 0)).is_err());
        assert!(gen_dataset(&spec(Noise::StudentT { nu: 0.0, scale: 0.1 }, 5, 0)).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
