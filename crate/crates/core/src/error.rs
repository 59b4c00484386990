use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("network has no input features")]
    NoFeatures,
    #[error("invalid feature name {0:?}")]
    BadFeatureName(String),
    #[error("normalization has {got} entries, expected {expected}")]
    NormLength { expected: usize, got: usize },
    #[error("normalization for feature {feature} needs finite mean and positive std")]
    BadNorm { feature: usize },
    #[error("threshold must be finite")]
    BadThreshold,
    #[error("no output")]
    NoOutput,
    #[error("output n{output} out of range ({neurons} neurons)")]
    OutputOutOfRange { output: usize, neurons: usize },
    #[error("neuron {neuron} has two identical inputs")]
    DuplicateInputs { neuron: usize },
    #[error("neuron {neuron} reads feature {feature} but m = {m}")]
    FeatureOutOfRange {
        neuron: usize,
        feature: usize,
        m: usize,
    },
    #[error("neuron {neuron} reads neuron {input}, which is not earlier in the list")]
    NotTopological { neuron: usize, input: usize },
    #[error("neuron {neuron} has layer {layer}, must be at least {min}")]
    BadLayer { neuron: usize, layer: u32, min: u32 },
    #[error("input shape: {0}")]
    InputShape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("missing `PNMODEL v1` header")]
    MissingHeader,
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("`m` must be declared before `{0}`")]
    MissingM(String),
    #[error("duplicate neuron id n{0}")]
    DuplicateNeuronId(usize),
    #[error("dangling reference {0}")]
    DanglingReference(String),
    #[error("cyclic reference: n{neuron} reads n{input}, which is not defined before it")]
    CyclicReference { neuron: usize, input: usize },
    #[error("no output")]
    NoOutput,
    #[error("invalid network: {0}")]
    Invalid(ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit parameters: {0}")]
    BadParams(String),
    #[error("invalid design: {0}")]
    BadDesign(String),
    #[error("degenerate design: training matrix norm is {0}")]
    DegenerateDesign(f64),
    #[error("weights diverged to a non-finite value at step {step}")]
    Diverged { step: usize },
    #[error("length mismatch: {predictions} predictions vs {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("empty input")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrowthError {
    #[error("invalid growth parameters: {0}")]
    BadParams(String),
    #[error("need at least {needed} candidates/inputs, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("empty data")]
    EmptyData,
    #[error("data has no target column to fit")]
    NoTarget,
    #[error("no neuron accepted after {attempts} attempts")]
    NoNeuronAccepted { attempts: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("invalid band {name:?}: {reason}")]
    BadBand { name: String, reason: String },
    #[error("invalid segmentation: {0}")]
    BadSegment(String),
    #[error("signal has {len} samples, shorter than one {window}-sample window")]
    SignalTooShort { len: usize, window: usize },
    #[error("band {name:?} upper edge {hi} Hz exceeds Nyquist {nyquist} Hz")]
    AboveNyquist { name: String, hi: f64, nyquist: f64 },
    #[error("empty window")]
    EmptyWindow,
    #[error("channels differ in length")]
    RaggedChannels,
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("need at least 2 rows to fit normalization, got {0}")]
    TooFewRows(usize),
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: {labels} labels vs {preds} predictions")]
    LengthMismatch { labels: usize, preds: usize },
    #[error("empty input")]
    Empty,
    #[error("non-binary value {value} at index {index}")]
    NonBinary { index: usize, value: u8 },
    #[error("{metric} is undefined: zero denominator")]
    Undefined { metric: &'static str },
    #[error("need at least one run")]
    NoRuns,
    #[error("run with seed {seed} failed: {message}")]
    RunFailed { seed: u64, message: String },
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: label must be 0 or 1, got {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("column {0:?} appears twice")]
    DuplicateColumn(String),
    #[error("table shape: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid bench options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
