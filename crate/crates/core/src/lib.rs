//! Multi-modal video classification at desk scale: three text models
//! (unigram, keyword histogram, title CNN), Mixture-of-Experts fusion over
//! visual/audio/text features, score ensembling, and the four multi-label
//! ranking metrics.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod histogram;
pub mod metrics;
pub mod moe;
pub mod nn;
pub mod seed;
pub mod text;
pub mod textcnn;
pub mod unigram;

pub use data::{Dataset, LabelVocabulary, PredictionList, VideoRecord};
pub use ensemble::ScoreMatrix;
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use nn::Tensor;
pub use seed::derive_seed;
