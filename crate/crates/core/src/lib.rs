//! Quickest change detection for streaming data.
//!
//! - [`models`]: parametric densities, log-likelihood ratios, KL divergence,
//!   constrained maximum likelihood, seeded sampling.
//! - [`detectors`]: CUSUM, generalized (GLR) CUSUM, non-iid CUSUM in two
//!   conditioning variants, and the Deviation-CUSUM.
//! - [`summary`] and [`spectral`]: summary statistics for the Deviation-CUSUM
//!   and the periodogram behind the spectral one.
//! - [`simulate`]: change-point sequences and trial-structured spike data.
//! - [`eval`]: Monte Carlo run length, delay and threshold calibration.

#![forbid(unsafe_code)]

pub mod detectors;
pub mod error;
pub mod eval;
pub mod models;
pub mod simulate;
pub mod spectral;
pub mod summary;

pub use detectors::{DetectorConfig, DetectorState, GlrConfig, OnlineDetector, StoppingReport};
pub use error::{Error, Result};
pub use models::{Family, ParameterSet, ParametricModel};
pub use simulate::{ChangeSpec, Response, SpikeTrialSet, TrialExperiment};
pub use spectral::{Band, SpectrumEstimate};
pub use summary::{Baseline, StatKind, SummaryStatistic};
