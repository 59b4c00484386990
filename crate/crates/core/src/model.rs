//! Polynomial network representation and forward evaluation.
//!
//! A network is a DAG of two-input supporting neurons, each computing the
//! bilinear polynomial `w0 + w1*v1 + w2*v2 + w3*v1*v2`. Neurons are stored in
//! topological order so a single forward pass evaluates the whole graph.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::ModelError;

/// The four coefficients of a supporting neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights4([f64; 4]);

impl Weights4 {
    pub fn new(w: [f64; 4]) -> Result<Self, ModelError> {
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteWeight { index: i });
        }
        Ok(Self(w))
    }

    pub const ZERO: Weights4 = Weights4([0.0; 4]);

    /// Pass-through of the first input.
    pub const IDENTITY: Weights4 = Weights4([0.0, 1.0, 0.0, 0.0]);

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn to_array(self) -> [f64; 4] {
        self.0
    }

    pub fn max_abs_diff(&self, other: &Weights4) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<[f64; 4]> for Weights4 {
    type Error = ModelError;

    fn try_from(w: [f64; 4]) -> Result<Self, Self::Error> {
        Weights4::new(w)
    }
}

/// Evaluates the supporting-neuron polynomial.
///
/// Terms are summed left to right, `((w0 + w1*v1) + w2*v2) + w3*(v1*v2)`, so
/// results are reproducible to the last bit.
#[inline]
pub fn eval_transfer(v1: f64, v2: f64, w: &Weights4) -> f64 {
    let [w0, w1, w2, w3] = w.0;
    w0 + w1 * v1 + w2 * v2 + w3 * (v1 * v2)
}

/// Where a neuron input is wired: a raw feature or an earlier neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputRef {
    Feature(usize),
    Neuron(usize),
}

impl fmt::Display for InputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputRef::Feature(i) => write!(f, "f{i}"),
            InputRef::Neuron(i) => write!(f, "n{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub inputs: [InputRef; 2],
    pub weights: Weights4,
    /// Features sit at layer 0, so every neuron has layer >= 1.
    pub layer: u32,
}

impl Neuron {
    pub fn new(inputs: [InputRef; 2], weights: Weights4, layer: u32) -> Self {
        Self {
            inputs,
            weights,
            layer,
        }
    }
}

/// Per-feature affine normalization `(x - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub mean: f64,
    pub std: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A polynomial network over `m` input features with one designated output
/// neuron. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyNetwork {
    feature_names: Vec<String>,
    norm: Option<Vec<FeatureNorm>>,
    neurons: Vec<Neuron>,
    output: usize,
    threshold: f64,
}

impl PolyNetwork {
    /// Builds a network, checking wiring, layering and normalization
    /// invariants.
    pub fn new(
        feature_names: Vec<String>,
        norm: Option<Vec<FeatureNorm>>,
        neurons: Vec<Neuron>,
        output: usize,
        threshold: f64,
    ) -> Result<Self, ModelError> {
        let m = feature_names.len();
        if m == 0 {
            return Err(ModelError::NoFeatures);
        }
        for name in &feature_names {
            validate_feature_name(name)?;
        }
        if let Some(stats) = &norm {
            if stats.len() != m {
                return Err(ModelError::NormLength {
                    expected: m,
                    got: stats.len(),
                });
            }
            for (i, s) in stats.iter().enumerate() {
                if !(s.mean.is_finite() && s.std.is_finite() && s.std > 0.0) {
                    return Err(ModelError::BadNorm { feature: i });
                }
            }
        }
        if !threshold.is_finite() {
            return Err(ModelError::BadThreshold);
        }
        if neurons.is_empty() {
            return Err(ModelError::NoOutput);
        }
        if output >= neurons.len() {
            return Err(ModelError::OutputOutOfRange {
                output,
                neurons: neurons.len(),
            });
        }
        for (id, n) in neurons.iter().enumerate() {
            if n.inputs[0] == n.inputs[1] {
                return Err(ModelError::DuplicateInputs { neuron: id });
            }
            let mut max_in = 0;
            for r in n.inputs {
                let layer = match r {
                    InputRef::Feature(i) if i < m => 0,
                    InputRef::Feature(i) => {
                        return Err(ModelError::FeatureOutOfRange {
                            neuron: id,
                            feature: i,
                            m,
                        })
                    }
                    InputRef::Neuron(j) if j < id => neurons[j].layer,
                    InputRef::Neuron(j) => {
                        return Err(ModelError::NotTopological {
                            neuron: id,
                            input: j,
                        })
                    }
                };
                max_in = max_in.max(layer);
            }
            if n.layer <= max_in {
                return Err(ModelError::BadLayer {
                    neuron: id,
                    layer: n.layer,
                    min: max_in + 1,
                });
            }
        }
        Ok(Self {
            feature_names,
            norm,
            neurons,
            output,
            threshold,
        })
    }

    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn norm(&self) -> Option<&[FeatureNorm]> {
        self.norm.as_deref()
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn depth(&self) -> u32 {
        self.neurons[self.output].layer
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, ModelError> {
        if !threshold.is_finite() {
            return Err(ModelError::BadThreshold);
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn with_norm(self, norm: Option<Vec<FeatureNorm>>) -> Result<Self, ModelError> {
        PolyNetwork::new(
            self.feature_names,
            norm,
            self.neurons,
            self.output,
            self.threshold,
        )
    }

    /// Evaluates every neuron for one raw feature vector and returns all
    /// neuron outputs in topological order.
    pub fn eval_neurons(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let x = self.prepare_input(x)?;
        let mut out = Vec::with_capacity(self.neurons.len());
        for n in &self.neurons {
            let v1 = resolve(n.inputs[0], &x, &out);
            let v2 = resolve(n.inputs[1], &x, &out);
            out.push(eval_transfer(v1, v2, &n.weights));
        }
        Ok(out)
    }

    /// Output of the designated neuron for a raw feature vector.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        // Only the prefix up to the output neuron can influence it.
        let x = self.prepare_input(x)?;
        let mut out = Vec::with_capacity(self.output + 1);
        for n in &self.neurons[..=self.output] {
            let v1 = resolve(n.inputs[0], &x, &out);
            let v2 = resolve(n.inputs[1], &x, &out);
            out.push(eval_transfer(v1, v2, &n.weights));
        }
        Ok(out[self.output])
    }

    /// 1 when the output reaches the threshold, else 0.
    pub fn classify(&self, x: &[f64]) -> Result<u8, ModelError> {
        Ok(u8::from(self.eval(x)? >= self.threshold))
    }

    fn prepare_input<'a>(&self, x: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>, ModelError> {
        if x.len() != self.m() {
            return Err(ModelError::InputShape(format!(
                "expected {} features, got {}",
                self.m(),
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InputShape(format!(
                "feature {i} is not finite"
            )));
        }
        Ok(match &self.norm {
            None => std::borrow::Cow::Borrowed(x),
            Some(stats) => std::borrow::Cow::Owned(
                x.iter()
                    .zip(stats)
                    .map(|(v, s)| (v - s.mean) / s.std)
                    .collect(),
            ),
        })
    }

    /// Indices of the features reachable from the output neuron.
    pub fn used_features(&self) -> BTreeSet<usize> {
        let live = self.live_neurons();
        let mut used = BTreeSet::new();
        for (id, n) in self.neurons.iter().enumerate() {
            if !live[id] {
                continue;
            }
            for r in n.inputs {
                if let InputRef::Feature(i) = r {
                    used.insert(i);
                }
            }
        }
        used
    }

    fn live_neurons(&self) -> Vec<bool> {
        let mut live = vec![false; self.neurons.len()];
        live[self.output] = true;
        for id in (0..=self.output).rev() {
            if !live[id] {
                continue;
            }
            for r in self.neurons[id].inputs {
                if let InputRef::Neuron(j) = r {
                    live[j] = true;
                }
            }
        }
        live
    }

    /// Drops every neuron that does not feed the output, renumbering the
    /// survivors while keeping their relative order.
    pub fn pruned(&self) -> PolyNetwork {
        self.pruned_with_map().0
    }

    /// As [`pruned`](Self::pruned), also returning the original index of
    /// every kept neuron.
    pub fn pruned_with_map(&self) -> (PolyNetwork, Vec<usize>) {
        let live = self.live_neurons();
        let mut remap = vec![usize::MAX; self.neurons.len()];
        let mut kept = Vec::new();
        let mut neurons = Vec::new();
        for (id, n) in self.neurons.iter().enumerate() {
            if !live[id] {
                continue;
            }
            kept.push(id);
            remap[id] = neurons.len();
            let inputs = n.inputs.map(|r| match r {
                InputRef::Neuron(j) => InputRef::Neuron(remap[j]),
                f => f,
            });
            neurons.push(Neuron::new(inputs, n.weights, n.layer));
        }
        let net = PolyNetwork {
            feature_names: self.feature_names.clone(),
            norm: self.norm.clone(),
            output: remap[self.output],
            neurons,
            threshold: self.threshold,
        };
        (net, kept)
    }
}

#[inline]
fn resolve(r: InputRef, x: &[f64], neurons: &[f64]) -> f64 {
    match r {
        InputRef::Feature(i) => x[i],
        InputRef::Neuron(j) => neurons[j],
    }
}

/// Feature names are written comma-separated on one line of the model file.
pub(crate) fn validate_feature_name(name: &str) -> Result<(), ModelError> {
    let ok = !name.is_empty()
        && !name.contains(',')
        && !name.contains('#')
        && !name.chars().any(char::is_control)
        && name.trim() == name;
    if ok {
        Ok(())
    } else {
        Err(ModelError::BadFeatureName(name.to_string()))
    }
}

/// Default names `x1..xm`, 1-based like the usual feature numbering.
pub fn default_feature_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(a: [f64; 4]) -> Weights4 {
        Weights4::new(a).unwrap()
    }

    #[test]
    fn transfer_examples() {
        assert_eq!(eval_transfer(0.0, 0.0, &w([0.696, 0.391, 0.248, -0.231])), 0.696);
        assert_eq!(eval_transfer(3.5, -2.0, &w([0.0, 1.0, 0.0, 0.0])), 3.5);
        assert_eq!(eval_transfer(1.0, 1.0, &w([1.0, 2.0, 3.0, 4.0])), 10.0);
    }

    #[test]
    fn weights_reject_non_finite() {
        assert!(Weights4::new([0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Weights4::new([f64::INFINITY, 0.0, 0.0, 0.0]).is_err());
    }

    fn alz_chain() -> PolyNetwork {
        let f = InputRef::Feature;
        let n = InputRef::Neuron;
        PolyNetwork::new(
            default_feature_names(76),
            None,
            vec![
                Neuron::new([f(10), f(68)], w([0.696, 0.391, 0.248, -0.231]), 1),
                Neuron::new([n(0), f(72)], w([0.386, 0.564, 0.542, -0.485]), 2),
                Neuron::new([n(1), f(75)], w([0.191, 0.776, 0.238, -0.204]), 3),
            ],
            2,
            DEFAULT_THRESHOLD,
        )
        .unwrap()
    }

    #[test]
    fn chain_at_zero_inputs() {
        let net = alz_chain();
        // others are irrelevant
        let mut x = vec![7.0; 76];
        for i in [10, 68, 72, 75] {
            x[i] = 0.0;
        }
        let y = net.eval(&x).unwrap();
        // hand composition: 0.696 -> 0.386 + 0.564*0.696 -> 0.191 + 0.776*that
        let y1: f64 = 0.696;
        let y2 = 0.386 + 0.564 * y1;
        let y3 = 0.191 + 0.776 * y2;
        assert!((y2 - 0.778544).abs() < 1e-12);
        assert!((y - y3).abs() < 1e-15);
        assert!((y - 0.795150).abs() < 1e-6);
        assert_eq!(net.classify(&x).unwrap(), 1);
    }

    #[test]
    fn single_identity_neuron_passes_first_input() {
        let net = PolyNetwork::new(
            default_feature_names(2),
            None,
            vec![Neuron::new(
                [InputRef::Feature(0), InputRef::Feature(1)],
                Weights4::IDENTITY,
                1,
            )],
            0,
            0.5,
        )
        .unwrap();
        assert_eq!(net.eval(&[-4.25, 9.0]).unwrap(), -4.25);
    }

    #[test]
    fn nan_and_length_are_shape_errors() {
        let net = alz_chain();
        let mut x = vec![0.0; 76];
        x[3] = f64::NAN;
        assert!(matches!(net.eval(&x), Err(ModelError::InputShape(_))));
        assert!(matches!(net.eval(&[0.0; 5]), Err(ModelError::InputShape(_))));
        assert!(net.classify(&x).is_err());
    }

    #[test]
    fn classify_threshold_boundary() {
        let net = PolyNetwork::new(
            default_feature_names(2),
            None,
            vec![Neuron::new(
                [InputRef::Feature(0), InputRef::Feature(1)],
                Weights4::IDENTITY,
                1,
            )],
            0,
            0.5,
        )
        .unwrap();
        assert_eq!(net.classify(&[0.5, 0.0]).unwrap(), 1);
        assert_eq!(net.classify(&[-0.3, 0.0]).unwrap(), 0);
        assert_eq!(net.classify(&[0.7951, 0.0]).unwrap(), 1);
    }

    #[test]
    fn construction_rejects_bad_wiring() {
        let f = InputRef::Feature;
        let n = InputRef::Neuron;
        let names = default_feature_names(3);
        let mk = |neurons, out| PolyNetwork::new(names.clone(), None, neurons, out, 0.5);
        assert!(matches!(mk(vec![], 0), Err(ModelError::NoOutput)));
        assert!(matches!(
            mk(vec![Neuron::new([f(0), f(0)], Weights4::ZERO, 1)], 0),
            Err(ModelError::DuplicateInputs { .. })
        ));
        assert!(matches!(
            mk(vec![Neuron::new([f(0), f(3)], Weights4::ZERO, 1)], 0),
            Err(ModelError::FeatureOutOfRange { .. })
        ));
        assert!(matches!(
            mk(vec![Neuron::new([f(0), n(0)], Weights4::ZERO, 1)], 0),
            Err(ModelError::NotTopological { .. })
        ));
        assert!(matches!(
            mk(
                vec![
                    Neuron::new([f(0), f(1)], Weights4::ZERO, 1),
                    Neuron::new([n(0), f(2)], Weights4::ZERO, 1)
                ],
                1
            ),
            Err(ModelError::BadLayer { .. })
        ));
        assert!(matches!(
            mk(vec![Neuron::new([f(0), f(1)], Weights4::ZERO, 1)], 1),
            Err(ModelError::OutputOutOfRange { .. })
        ));
        assert!(PolyNetwork::new(
            names.clone(),
            Some(vec![FeatureNorm { mean: 0.0, std: 0.0 }; 3]),
            vec![Neuron::new([f(0), f(1)], Weights4::ZERO, 1)],
            0,
            0.5
        )
        .is_err());
    }

    #[test]
    fn pruning_drops_dead_neurons() {
        let f = InputRef::Feature;
        let n = InputRef::Neuron;
        let net = PolyNetwork::new(
            default_feature_names(4),
            None,
            vec![
                Neuron::new([f(0), f(1)], w([0.1, 0.2, 0.3, 0.4]), 1),
                Neuron::new([f(2), f(3)], w([1.0, 1.0, 1.0, 1.0]), 1),
                Neuron::new([n(0), f(3)], w([0.5, 0.6, 0.7, 0.8]), 2),
            ],
            2,
            0.5,
        )
        .unwrap();
        let p = net.pruned();
        assert_eq!(p.neurons().len(), 2);
        assert_eq!(p.output(), 1);
        assert_eq!(p.neurons()[1].inputs, [n(0), f(3)]);
        assert_eq!(p.used_features().into_iter().collect::<Vec<_>>(), vec![0, 1, 3]);
        let x = [0.3, -1.2, 5.0, 0.7];
        assert_eq!(net.eval(&x).unwrap(), p.eval(&x).unwrap());
    }

    #[test]
    fn topological_orders_agree() {
        // two independent layer-1 neurons may be listed in either order
        let f = InputRef::Feature;
        let n = InputRef::Neuron;
        let a = Neuron::new([f(0), f(1)], w([0.1, -0.7, 0.3, 0.25]), 1);
        let b = Neuron::new([f(2), f(1)], w([-0.4, 0.9, 1.1, -0.5]), 1);
        let names = default_feature_names(3);
        let net1 = PolyNetwork::new(
            names.clone(),
            None,
            vec![a.clone(), b.clone(), Neuron::new([n(0), n(1)], w([0.2, 0.3, 0.4, 0.5]), 2)],
            2,
            0.5,
        )
        .unwrap();
        let net2 = PolyNetwork::new(
            names,
            None,
            vec![b, a, Neuron::new([n(1), n(0)], w([0.2, 0.3, 0.4, 0.5]), 2)],
            2,
            0.5,
        )
        .unwrap();
        for x in [[0.1, 0.2, 0.3], [-3.0, 1.5, 2.25], [1e3, -1e-3, 7.0]] {
            assert_eq!(net1.eval(&x).unwrap().to_bits(), net2.eval(&x).unwrap().to_bits());
        }
    }

    proptest! {
        #[test]
        fn swap_symmetry(v1 in -1e3f64..1e3, v2 in -1e3f64..1e3,
                         w0 in -10f64..10.0, a in -10f64..10.0, b in -10f64..10.0, c in -10f64..10.0) {
            let lhs = eval_transfer(v1, v2, &w([w0, a, b, c]));
            let rhs = eval_transfer(v2, v1, &w([w0, b, a, c]));
            let scale = 1.0 + w0.abs() + (a * v1).abs() + (b * v2).abs() + (c * v1 * v2).abs();
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * scale);
        }

        #[test]
        fn identity_weights_pass_through(v1 in -1e6f64..1e6, v2 in -1e6f64..1e6) {
            prop_assert_eq!(eval_transfer(v1, v2, &Weights4::IDENTITY), v1);
        }

        #[test]
        fn norm_stats_equal_pre_normalized_input(
            x in proptest::collection::vec(-5f64..5.0, 4),
            means in proptest::collection::vec(-2f64..2.0, 4),
            stds in proptest::collection::vec(0.1f64..3.0, 4),
        ) {
            let f = InputRef::Feature;
            let n = InputRef::Neuron;
            let neurons = vec![
                Neuron::new([f(0), f(2)], w([0.3, -0.2, 0.5, 0.1]), 1),
                Neuron::new([n(0), f(3)], w([0.1, 0.9, -0.4, 0.2]), 2),
            ];
            let norm: Vec<_> = means.iter().zip(&stds).map(|(&mean, &std)| FeatureNorm { mean, std }).collect();
            let with = PolyNetwork::new(default_feature_names(4), Some(norm), neurons.clone(), 1, 0.5).unwrap();
            let without = PolyNetwork::new(default_feature_names(4), None, neurons, 1, 0.5).unwrap();
            let z: Vec<f64> = x.iter().zip(means.iter().zip(&stds)).map(|(v, (m, s))| (v - m) / s).collect();
            prop_assert_eq!(with.eval(&x).unwrap(), without.eval(&z).unwrap());
        }
    }
}
