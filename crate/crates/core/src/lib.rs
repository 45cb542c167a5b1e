//! Energy-based detection of machine-generated text from sentence embeddings.
//!
//! Each embedding is mapped to a drumhead source frequency (the ratio of
//! zeros of the Bessel function `J0` selected by its number of distinct
//! coordinates) and then to a Doppler-shifted observer frequency that acts
//! as the energy of the `(embedding, label)` pair. A ReLU network trained
//! with binary cross-entropy produces the label; Integrated Gradients picks
//! the features whose removal is used to probe rephrasing robustness.
//!
//! Label `0` is machine (ChatGPT) generated text, label `1` is human text.

pub mod attribution;
pub mod bessel;
pub mod cli;
pub mod dataio;
pub mod detector;
pub mod energy;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod metrics;
pub mod network;

pub use attribution::{AttributionResult, AttributionTarget, PerturbationSet};
pub use bessel::BesselZeroTable;
pub use dataio::{DatasetSplit, EmbeddingRecord, QueryRecord};
pub use detector::{ClassificationVerdict, TrainingConfig, TrainingLog};
pub use energy::{EnergyReport, Label, MediumSpeed};
pub use error::{Error, Result};
pub use exec::Execution;
pub use metrics::MetricsSummary;
pub use network::{Gradients, ModelParameters, OptimizerState};
