use std::f64::consts::PI;

use polynet::features::{
    extract_band_features, normalize_apply, normalize_fit, preset_alz4, ExtractOptions, PowerMode, SegmentSpec, Taper,
};
use polynet::fitting::FitParams;
use polynet::growth::{grow, GrowthParams};
use polynet::metrics::{confusion, performance};
use polynet::synth::{alzheimer_model, gen_dataset, sleep_model, LabelRule, Noise, SynthSpec};
use polynet::{parse_model, render_model, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: f64 = 64.0;

/// Two channels dominated by a tone at `hz`, with a weaker tone at `other`.
fn recording(hz: f64, other: f64, secs: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ["C3", "C4"]
        .iter()
        .map(|name| {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            let sig = (0..secs * RATE as usize)
                .map(|i| {
                    let t = i as f64 / RATE;
                    2.0 * (2.0 * PI * hz * t + phase).sin()
                        + 0.5 * (2.0 * PI * other * t).sin()
                        + rng.random_range(-0.5..0.5)
                })
                .collect();
            (name.to_string(), sig)
        })
        .collect()
}

/// Extracted rows of both classes, stacked, with labels attached.
fn labelled(seed: u64) -> FeatureTable {
    let opts = ExtractOptions {
        bands: preset_alz4(),
        segment: SegmentSpec::new(1.0, 0.5, RATE).unwrap(),
        mode: PowerMode::AbsoluteRelative,
        sum_channels: vec![],
        taper: Taper::Hann,
    };
    let neg = extract_band_features(&recording(10.0, 6.0, 30, seed), &opts).unwrap().table;
    let pos = extract_band_features(&recording(6.0, 10.0, 30, seed + 1), &opts).unwrap().table;
    assert_eq!(neg.n_features(), 16);
    let columns = (0..neg.n_features())
        .map(|j| [neg.column(j), pos.column(j)].concat())
        .collect();
    let labels = [vec![0; neg.n_rows()], vec![1; pos.n_rows()]].concat();
    FeatureTable::new(neg.names().to_vec(), columns, Some(labels), None).unwrap()
}

fn score(net: &polynet::PolyNetwork, t: &FeatureTable) -> f64 {
    let preds: Vec<u8> = (0..t.n_rows()).map(|r| net.classify(&t.row(r)).unwrap()).collect();
    performance(&confusion(t.labels().unwrap(), &preds).unwrap()).unwrap()
}

#[test]
fn tones_extract_train_evaluate() {
    let train = labelled(1);
    let stats = normalize_fit(&train).unwrap();
    let (net, _) = grow(
        &normalize_apply(&train, &stats).unwrap(),
        &GrowthParams::default(),
        &FitParams::default(),
    )
    .unwrap();
    let net = net.with_norm(Some(stats.to_feature_norms())).unwrap();
    // The written model carries its normalization and applies to raw features.
    let net = parse_model(&render_model(&net)).unwrap();
    let p = score(&net, &labelled(7));
    assert!(p >= 0.95, "performance {p}");
}

#[test]
fn planted_models_score_perfectly_on_their_own_data() {
    for (gen, m_total) in [(alzheimer_model(), 76), (sleep_model(), 36)] {
        let d = gen_dataset(&SynthSpec {
            generator: gen.clone(),
            m_total,
            n_rows: 500,
            noise: Noise::Gaussian { sigma: 0.0 },
            label_rule: LabelRule::Median,
            seed: 3,
        })
        .unwrap();
        let net = gen.with_threshold(d.threshold).unwrap();
        assert_eq!(score(&net, &d.table), 1.0);
    }
}
