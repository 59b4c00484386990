//! `PNMODEL v1`: a line-oriented text form of a [`PolyNetwork`].
//!
//! ```text
//! PNMODEL v1
//! m 4
//! names a,b,c,d
//! norm 0 1.5 0.25
//! threshold 0.5
//! neuron 0 layer 1 in f0 f1 w 0.696 0.391 0.248 -0.231
//! neuron 1 layer 2 in n0 f2 w 0.386 0.564 0.542 -0.485
//! output n1
//! ```
//!
//! `#` starts a comment. Reals use the shortest decimal form that parses
//! back to the same `f64`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{ParseError, ParseErrorKind};
use crate::model::{
    default_feature_names, FeatureNorm, InputRef, Neuron, PolyNetwork, Weights4,
    DEFAULT_THRESHOLD,
};

pub const HEADER: &str = "PNMODEL v1";

/// Renders a network. Names and threshold are always written; `norm` lines
/// only when the network carries normalization.
pub fn render_model(net: &PolyNetwork) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "m {}", net.m()).unwrap();
    writeln!(s, "names {}", net.feature_names().join(",")).unwrap();
    if let Some(norm) = net.norm() {
        for (i, n) in norm.iter().enumerate() {
            writeln!(s, "norm {i} {:?} {:?}", n.mean, n.std).unwrap();
        }
    }
    writeln!(s, "threshold {:?}", net.threshold()).unwrap();
    for (id, n) in net.neurons().iter().enumerate() {
        let [w0, w1, w2, w3] = n.weights.to_array();
        writeln!(
            s,
            "neuron {id} layer {} in {} {} w {w0:?} {w1:?} {w2:?} {w3:?}",
            n.layer, n.inputs[0], n.inputs[1]
        )
        .unwrap();
    }
    writeln!(s, "output n{}", net.output()).unwrap();
    s
}

/// Human-readable polynomial listing, one line per neuron, e.g.
/// `y3 = P(y2, AbsPowAlpha; [0.191 0.776 0.238 -0.204])`.
pub fn render_polynomials(net: &PolyNetwork) -> String {
    let name = |r: InputRef| match r {
        InputRef::Feature(i) => net.feature_names()[i].clone(),
        InputRef::Neuron(j) => format!("y{}", j + 1),
    };
    let mut s = String::new();
    for (id, n) in net.neurons().iter().enumerate() {
        let [w0, w1, w2, w3] = n.weights.to_array();
        let marker = if id == net.output() { "  (output)" } else { "" };
        writeln!(
            s,
            "y{} = P({}, {}; [{w0} {w1} {w2} {w3}]){marker}",
            id + 1,
            name(n.inputs[0]),
            name(n.inputs[1])
        )
        .unwrap();
    }
    s
}

struct PendingNeuron {
    line: usize,
    id: usize,
    layer: u32,
    inputs: [RawRef; 2],
    weights: [f64; 4],
}

#[derive(Clone, Copy)]
enum RawRef {
    Feature(usize),
    Neuron(usize),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn malformed(line: usize, msg: impl Into<String>) -> ParseError {
    err(line, ParseErrorKind::Malformed(msg.into()))
}

fn parse_real(line: usize, tok: &str) -> Result<f64, ParseError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| malformed(line, format!("expected a real, got `{tok}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(malformed(line, format!("non-finite value `{tok}`")))
    }
}

fn parse_uint<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| malformed(line, format!("expected a non-negative integer, got `{tok}`")))
}

fn parse_ref(line: usize, tok: &str) -> Result<RawRef, ParseError> {
    if let Some(rest) = tok.strip_prefix('f') {
        Ok(RawRef::Feature(parse_uint(line, rest)?))
    } else if let Some(rest) = tok.strip_prefix('n') {
        Ok(RawRef::Neuron(parse_uint(line, rest)?))
    } else {
        Err(malformed(line, format!("expected `f<idx>` or `n<id>`, got `{tok}`")))
    }
}

fn expect_arity(line: usize, toks: &[&str], n: usize) -> Result<(), ParseError> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(malformed(
            line,
            format!("`{}` takes {} fields, got {}", toks[0], n - 1, toks.len() - 1),
        ))
    }
}

pub fn parse_model(text: &str) -> Result<PolyNetwork, ParseError> {
    let mut saw_header = false;
    let mut m: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut norm: HashMap<usize, FeatureNorm> = HashMap::new();
    let mut threshold: Option<f64> = None;
    let mut pending: Vec<PendingNeuron> = Vec::new();
    let mut output: Option<(usize, usize)> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_header {
            if content == HEADER {
                saw_header = true;
                continue;
            }
            return Err(err(line, ParseErrorKind::MissingHeader));
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let key = toks[0];
        let need_m = |m: Option<usize>| m.ok_or_else(|| err(line, ParseErrorKind::MissingM(key.to_string())));
        match key {
            "m" => {
                expect_arity(line, &toks, 2)?;
                if m.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateKey("m".into())));
                }
                let v: usize = parse_uint(line, toks[1])?;
                if v == 0 {
                    return Err(malformed(line, "m must be positive"));
                }
                m = Some(v);
            }
            "names" => {
                let m = need_m(m)?;
                if names.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateKey("names".into())));
                }
                let rest = content["names".len()..].trim();
                let list: Vec<String> = rest.split(',').map(|s| s.trim().to_string()).collect();
                if list.len() != m {
                    return Err(malformed(line, format!("expected {m} names, got {}", list.len())));
                }
                names = Some(list);
            }
            "norm" => {
                let m = need_m(m)?;
                expect_arity(line, &toks, 4)?;
                let i: usize = parse_uint(line, toks[1])?;
                if i >= m {
                    return Err(malformed(line, format!("norm index {i} out of range (m = {m})")));
                }
                let n = FeatureNorm {
                    mean: parse_real(line, toks[2])?,
                    std: parse_real(line, toks[3])?,
                };
                if norm.insert(i, n).is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateKey(format!("norm {i}"))));
                }
            }
            "threshold" => {
                expect_arity(line, &toks, 2)?;
                if threshold.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateKey("threshold".into())));
                }
                threshold = Some(parse_real(line, toks[1])?);
            }
            "neuron" => {
                need_m(m)?;
                expect_arity(line, &toks, 12)?;
                if toks[2] != "layer" || toks[4] != "in" || toks[7] != "w" {
                    return Err(malformed(
                        line,
                        "expected `neuron <id> layer <int> in <ref> <ref> w <w0> <w1> <w2> <w3>`",
                    ));
                }
                let id: usize = parse_uint(line, toks[1])?;
                if pending.iter().any(|p| p.id == id) {
                    return Err(err(line, ParseErrorKind::DuplicateNeuronId(id)));
                }
                let layer: u32 = parse_uint(line, toks[3])?;
                let inputs = [parse_ref(line, toks[5])?, parse_ref(line, toks[6])?];
                let mut weights = [0.0; 4];
                for (k, tok) in toks[8..].iter().enumerate() {
                    weights[k] = parse_real(line, tok)?;
                }
                pending.push(PendingNeuron {
                    line,
                    id,
                    layer,
                    inputs,
                    weights,
                });
            }
            "output" => {
                expect_arity(line, &toks, 2)?;
                if output.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateKey("output".into())));
                }
                match parse_ref(line, toks[1])? {
                    RawRef::Neuron(id) => output = Some((line, id)),
                    RawRef::Feature(_) => {
                        return Err(malformed(line, "output must reference a neuron"))
                    }
                }
            }
            other => return Err(err(line, ParseErrorKind::UnknownKey(other.to_string()))),
        }
    }

    if !saw_header {
        return Err(err(last_line.max(1), ParseErrorKind::MissingHeader));
    }
    let m = m.ok_or_else(|| malformed(last_line, "missing `m`"))?;

    // ids are labels; position in the file is the topological index
    let position: HashMap<usize, usize> = pending.iter().enumerate().map(|(pos, p)| (p.id, pos)).collect();
    let mut neurons = Vec::with_capacity(pending.len());
    for (pos, p) in pending.iter().enumerate() {
        let mut inputs = [InputRef::Feature(0); 2];
        for (k, r) in p.inputs.iter().enumerate() {
            inputs[k] = match *r {
                RawRef::Feature(i) if i < m => InputRef::Feature(i),
                RawRef::Feature(i) => {
                    return Err(err(p.line, ParseErrorKind::DanglingReference(format!("f{i}"))))
                }
                RawRef::Neuron(id) => match position.get(&id) {
                    Some(&q) if q < pos => InputRef::Neuron(q),
                    Some(_) => {
                        return Err(err(
                            p.line,
                            ParseErrorKind::CyclicReference {
                                neuron: p.id,
                                input: id,
                            },
                        ))
                    }
                    None => {
                        return Err(err(p.line, ParseErrorKind::DanglingReference(format!("n{id}"))))
                    }
                },
            };
        }
        let weights = Weights4::new(p.weights).map_err(|e| err(p.line, ParseErrorKind::Invalid(e)))?;
        neurons.push(Neuron::new(inputs, weights, p.layer));
    }

    let (out_line, out_id) = match output {
        Some(o) => o,
        None => return Err(err(last_line, ParseErrorKind::NoOutput)),
    };
    if neurons.is_empty() {
        return Err(err(out_line, ParseErrorKind::NoOutput));
    }
    let out = *position
        .get(&out_id)
        .ok_or_else(|| err(out_line, ParseErrorKind::DanglingReference(format!("n{out_id}"))))?;

    let norm = if norm.is_empty() {
        None
    } else if norm.len() != m {
        return Err(malformed(
            last_line,
            format!("norm given for {} of {m} features", norm.len()),
        ));
    } else {
        Some((0..m).map(|i| norm[&i]).collect())
    };

    let names = names.unwrap_or_else(|| default_feature_names(m));
    PolyNetwork::new(names, norm, neurons, out, threshold.unwrap_or(DEFAULT_THRESHOLD)).map_err(|e| {
        // locate the offending neuron line when there is one
        use crate::error::ModelError::*;
        let line = match &e {
            DuplicateInputs { neuron }
            | FeatureOutOfRange { neuron, .. }
            | NotTopological { neuron, .. }
            | BadLayer { neuron, .. } => pending[*neuron].line,
            _ => last_line,
        };
        err(line, ParseErrorKind::Invalid(e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::reference_models;

    #[test]
    fn reference_models_round_trip() {
        for net in reference_models() {
            let text = render_model(&net);
            let back = parse_model(&text).unwrap();
            assert_eq!(back, net);
            assert_eq!(render_model(&back), text);
        }
    }

    #[test]
    fn alzheimer_model_renders_three_neuron_lines() {
        let net = &reference_models()[0];
        let text = render_model(net);
        assert_eq!(text.lines().filter(|l| l.starts_with("neuron ")).count(), 3);
        assert!(text.starts_with("PNMODEL v1\n"));
        assert!(text.contains("neuron 0 layer 1 in f10 f68 w 0.696 0.391 0.248 -0.231\n"));
    }

    #[test]
    fn comments_ids_and_defaults() {
        let text = "\
# a comment
PNMODEL v1
m 3   # three features
neuron 7 layer 1 in f0 f1 w 1 2 3 4
neuron 3 layer 2 in n7 f2 w 0.5 0 0 0
output n3
";
        let net = parse_model(text).unwrap();
        assert_eq!(net.threshold(), 0.5);
        assert_eq!(net.feature_names(), &["x1", "x2", "x3"]);
        assert_eq!(net.neurons()[1].inputs[0], InputRef::Neuron(0));
        assert_eq!(net.output(), 1);
    }

    fn kind(text: &str) -> (usize, ParseErrorKind) {
        let e = parse_model(text).unwrap_err();
        (e.line, e.kind)
    }

    #[test]
    fn empty_neuron_list_has_no_output() {
        let (_, k) = kind("PNMODEL v1\nm 2\n");
        assert_eq!(k, ParseErrorKind::NoOutput);
        let (_, k) = kind("PNMODEL v1\nm 2\noutput n0\n");
        assert_eq!(k, ParseErrorKind::NoOutput);
    }

    #[test]
    fn later_reference_is_cyclic() {
        let text = "PNMODEL v1\nm 2\nneuron 0 layer 2 in n1 f0 w 0 0 0 0\nneuron 1 layer 1 in f0 f1 w 0 0 0 0\noutput n0\n";
        let (line, k) = kind(text);
        assert_eq!(line, 3);
        assert_eq!(k, ParseErrorKind::CyclicReference { neuron: 0, input: 1 });
        let selfref = "PNMODEL v1\nm 2\nneuron 0 layer 1 in n0 f0 w 0 0 0 0\noutput n0\n";
        assert!(matches!(kind(selfref).1, ParseErrorKind::CyclicReference { .. }));
    }

    #[test]
    fn distinct_errors_with_line_numbers() {
        let (line, k) = kind("PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 n9 w 0 0 0 0\noutput n0\n");
        assert_eq!((line, k), (3, ParseErrorKind::DanglingReference("n9".into())));
        let (line, k) = kind("PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 f5 w 0 0 0 0\noutput n0\n");
        assert_eq!((line, k), (3, ParseErrorKind::DanglingReference("f5".into())));
        let (line, k) = kind(
            "PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 f1 w 0 0 0 0\nneuron 0 layer 1 in f0 f1 w 0 0 0 0\noutput n0\n",
        );
        assert_eq!((line, k), (4, ParseErrorKind::DuplicateNeuronId(0)));
        let (line, k) = kind("PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 f1 w 0 0 0\noutput n0\n");
        assert_eq!(line, 3);
        assert!(matches!(k, ParseErrorKind::Malformed(_)));
        let (line, k) = kind("PNMODEL v1\nm 2\nbias 3\n");
        assert_eq!((line, k), (3, ParseErrorKind::UnknownKey("bias".into())));
        let (line, k) = kind("PNMODEL v2\n");
        assert_eq!((line, k), (1, ParseErrorKind::MissingHeader));
        let (_, k) = kind("PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 f1 w 0 nan 0 0\noutput n0\n");
        assert!(matches!(k, ParseErrorKind::Malformed(_)));
        let (_, k) = kind("PNMODEL v1\nm 2\nneuron 0 layer 1 in f0 f0 w 0 0 0 0\noutput n0\n");
        assert!(matches!(k, ParseErrorKind::Invalid(_)));
        let (_, k) = kind("PNMODEL v1\nneuron 0 layer 1 in f0 f1 w 0 0 0 0\n");
        assert!(matches!(k, ParseErrorKind::MissingM(_)));
    }

    #[test]
    fn extreme_reals_round_trip_bitwise() {
        let f = InputRef::Feature;
        let w = Weights4::new([1e-300, -2.5e300, 0.1 + 0.2, f64::MIN_POSITIVE]).unwrap();
        let net = PolyNetwork::new(
            vec!["a b".into(), "c".into()],
            Some(vec![
                FeatureNorm { mean: -0.0, std: 1.0 / 3.0 },
                FeatureNorm { mean: 1e20, std: 5e-324 },
            ]),
            vec![Neuron::new([f(1), f(0)], w, 1)],
            0,
            std::f64::consts::PI,
        )
        .unwrap();
        let back = parse_model(&render_model(&net)).unwrap();
        assert_eq!(back, net);
        let bits = |n: &PolyNetwork| n.neurons()[0].weights.to_array().map(f64::to_bits);
        assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn polynomial_listing_names_inputs() {
        let net = &reference_models()[1];
        let text = render_polynomials(net);
        assert!(text.contains("P(AbsPowThetaC4, RelPowThetaC4; [0.947 -0.087 0.073 0.07])"));
        assert_eq!(text.lines().count(), 7);
    }
}
