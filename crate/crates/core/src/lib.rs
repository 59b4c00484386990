//! Self-organizing polynomial networks (GMDH family) trained with a
//! distribution-free projection rule, with the band-power feature pipeline
//! and evaluation tools around them.

pub mod bench;
pub mod error;
pub mod features;
pub mod fitting;
pub mod growth;
pub mod metrics;
pub mod model;
pub mod pnmodel;
mod rng;
pub mod synth;
pub mod table;

pub use error::{BenchError, FeatureError, FitError, GrowthError, MetricError, ModelError, ParseError, SynthError, TableError};
pub use model::{eval_transfer, FeatureNorm, InputRef, Neuron, PolyNetwork, Weights4};
pub use pnmodel::{parse_model, render_model};
pub use rng::derive_seed;
pub use table::FeatureTable;
