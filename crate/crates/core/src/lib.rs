//! Attentive Perceptron: a Perceptron that stops evaluating an example's
//! features as soon as its partial margin makes a model update unlikely.
//!
//! The stopping rule compares the running partial margin against a
//! constant threshold derived from a Gaussian approximation of the full
//! margin and a permitted decision-error rate `delta`. Examples that cross
//! it are filtered: no further features are read and the model is not
//! updated.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, with `*32` variants for
//! single precision.

pub mod bench;
pub mod data;
pub mod error;
pub mod perceptron;
pub mod scalar;
pub mod sequential;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use sequential::{evaluation_order, partial_margin_scan, scan_terms, StoppingThreshold};
pub use stats::{inverse_normal_cdf, normal_cdf, MarginMoments};
pub use types::{full_margin, margin_term, EvalOrder, Feature, Label, ScanOutcome};

pub type LabeledExample = types::LabeledExample<f64>;
pub type LinearModel = types::LinearModel<f64>;
pub type FilterConfig = types::FilterConfig<f64>;
pub type Dataset = data::Dataset<f64>;
pub type TrainState = perceptron::TrainState<f64>;
pub type Moments = stats::MarginMoments<f64>;
pub type Threshold = sequential::StoppingThreshold<f64>;

pub type LabeledExample32 = types::LabeledExample<f32>;
pub type LinearModel32 = types::LinearModel<f32>;
pub type FilterConfig32 = types::FilterConfig<f32>;
pub type Dataset32 = data::Dataset<f32>;
pub type TrainState32 = perceptron::TrainState<f32>;
