//! # motorid
//!
//! Identification of fixed-speed motors from their turn-on current
//! transients.
//!
//! The pipeline runs in five stages:
//!
//! - [`signal`]: waveform ingestion and mains-period geometry.
//! - [`transient`]: turn-on detection and preprocessing (steady-state
//!   normalization, first-period omission, polarity canonicalization,
//!   instantaneous power).
//! - [`features`]: the 173-value feature catalog computed per event.
//! - [`ml`]: min-max scaling, class-weighted one-vs-one SVMs, metrics.
//! - [`experiments`]: greedy forward feature selection under stratified
//!   k-fold and leave-one-motor-per-class-out cross-validation.
//!
//! [`synth`] generates synthetic motor corpora with known ground truth and
//! carries brute-force oracles used by the test suites.

pub mod error;
pub mod experiments;
pub mod features;
pub mod ml;
pub mod signal;
pub mod synth;
pub mod transient;

pub use error::{Error, Result};
pub use features::{extract_all, FeatureVector, FEATURE_COUNT};
pub use signal::Waveform;
pub use transient::{DetectionConfig, MechType, TurnOnEvent};

use sha2::{Digest, Sha256};

/// Short hex digest of a canonical configuration text, embedded in every
/// report so artifacts can be traced back to the settings that made them.
pub fn config_digest(canonical: &str) -> String {
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
