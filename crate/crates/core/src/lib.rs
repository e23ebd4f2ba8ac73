//! Prosody analysis, comparison, manipulation and resynthesis for paired
//! human and synthetic speech.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod compare;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod features;
pub mod learner;
pub mod manipulate;
pub mod pipeline;
pub mod real;
pub mod signals;
pub mod synth;
pub mod testing;

pub use audio_io::{read_wav, write_wav, CANONICAL_RATE};
pub use compare::compare_features;
pub use corpus::{generate_fixture_corpus, load_annotations, load_manifest, FixtureSpec};
pub use error::{Error, Result};
pub use features::extract_features;
pub use learner::{brute_force_optimum, train_model};
pub use manipulate::manipulate_features;
pub use real::Real;
pub use synth::{synthesize, SynthConfig};

pub type AudioBuffer = audio_io::AudioBuffer<f64>;
pub type AudioBuffer32 = audio_io::AudioBuffer<f32>;
pub type AnalysisConfig = features::AnalysisConfig<f64>;
pub type AnalysisConfig32 = features::AnalysisConfig<f32>;
pub type Features = features::ProsodicFeatures<f64>;
pub type Features32 = features::ProsodicFeatures<f32>;
pub type ComparisonReport = compare::ComparisonReport<f64>;
pub type ComparisonReport32 = compare::ComparisonReport<f32>;
pub type ManipulationParams = manipulate::ManipulationParams<f64>;
pub type ManipulationParams32 = manipulate::ManipulationParams<f32>;
pub type Correction = learner::Correction<f64>;
pub type LossWeights = learner::LossWeights<f64>;
pub type TrainingConfig = learner::TrainingConfig<f64>;
pub type TrainedModel = learner::TrainedModel<f64>;
