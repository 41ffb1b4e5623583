//! Multilingual corpus cleaning by anomaly detection over per-document
//! quality features.
//!
//! The numeric core ([`stats`], [`anomaly`]) is generic over the float type;
//! the aliases below fix it to `f64`.

pub mod anomaly;
mod charclass;
pub mod corpus_io;
pub mod error;
pub mod features;
pub mod lang_id;
pub mod lexicons;
pub mod ngram_lm;
pub mod scalar;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use anomaly::{Algorithm, DetectorConfig, Label};
pub use corpus_io::{Document, OnError};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureConfig, FeatureVector, Resources, FEATURE_COUNT, FEATURE_NAMES};
pub use lang_id::LidModel;
pub use lexicons::Lexicons;
pub use ngram_lm::LanguageModel;
pub use scalar::Scalar;

pub type Accumulator = stats::MomentAccumulator<f64>;
pub type Stats = stats::StandardizationStats<f64>;
pub type FeatureMatrix = anomaly::Matrix<f64>;
pub type Detector = anomaly::DetectorModel<f64>;
pub type Verdict = anomaly::AnomalyVerdict<f64>;
