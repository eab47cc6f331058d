//! Experiment configuration: a flat JSON document whose keys mirror the
//! long command-line flags. Flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use qcd::detectors::DEFAULT_GLR_WINDOW;
use qcd::models::{Family, ParameterSet, ParametricModel};
use qcd::simulate::{Response, TrialExperiment};
use qcd::spectral::Band;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Cusum,
    Gcusum,
    Noniid,
    Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StatName {
    Mean,
    Variance,
    Entropy,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FamilyName {
    Bernoulli,
    Poisson,
    GaussianMean,
    Ar1,
}

impl From<FamilyName> for Family {
    fn from(f: FamilyName) -> Self {
        match f {
            FamilyName::Bernoulli => Family::Bernoulli,
            FamilyName::Poisson => Family::Poisson,
            FamilyName::GaussianMean => Family::GaussianMean,
            FamilyName::Ar1 => Family::Ar1Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Immediate,
    Delayed,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NoniidVariant {
    /// Condition on the full past.
    Full,
    /// Restart conditioning at each candidate change point.
    Reset,
}

/// Every setting is optional; unset values fall back to the documented
/// defaults when resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Detector to run.
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,
    /// Observation family for likelihood-based detectors [default: bernoulli].
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Pre-change parameter.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Post-change parameter.
    #[arg(long)]
    pub theta1: Option<f64>,
    /// Known variance for Gaussian and AR(1) models [default: 1].
    #[arg(long)]
    pub variance: Option<f64>,
    /// Pre-change parameter interval LO,HI for gcusum.
    #[arg(long, value_delimiter = ',')]
    pub theta0_set: Option<Vec<f64>>,
    /// Post-change parameter interval LO,HI for gcusum.
    #[arg(long, value_delimiter = ',')]
    pub theta1_set: Option<Vec<f64>>,
    /// Candidate window for gcusum and reset non-iid CUSUM [default: 200].
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_enum)]
    pub noniid_variant: Option<NoniidVariant>,

    #[arg(long, conflicts_with = "target_arl")]
    pub threshold: Option<f64>,
    /// Calibrate the threshold to this average run length.
    #[arg(long)]
    pub target_arl: Option<f64>,

    /// Trials used to learn the baseline [default: 5].
    #[arg(long)]
    pub baseline_trials: Option<usize>,
    /// Samples between Deviation-CUSUM evaluations.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Summary statistic for the deviation detector [default: mean].
    #[arg(long, value_enum)]
    pub stat: Option<StatName>,
    /// Deviation slack; defaults to three standard errors of the baseline.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Samples per statistic window [default: trial length for spectral, else 1].
    #[arg(long)]
    pub window_length: Option<usize>,
    /// Frequency band LO,HI in radians per sample [default: 0,pi].
    #[arg(long, value_delimiter = ',')]
    pub band: Option<Vec<f64>>,

    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub trials: Option<usize>,
    /// Bins per trial.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Bin width in seconds.
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(long)]
    pub baseline_rate: Option<f64>,
    #[arg(long)]
    pub post_rate: Option<f64>,
    /// First trial (1-based) with post-change behaviour.
    #[arg(long)]
    pub change_trial: Option<usize>,
    #[arg(long)]
    pub cue_bin: Option<usize>,
    #[arg(long, value_enum)]
    pub response: Option<ResponseKind>,
    #[arg(long)]
    pub offset_bins: Option<usize>,
    #[arg(long)]
    pub period_bins: Option<usize>,

    /// Monte Carlo runs [default: 500].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Censoring length for run-length estimates.
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Comma-separated thresholds for `evaluate`.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Change point (1-based) of simulated streams in `evaluate` [default: 500].
    #[arg(long)]
    pub change_point: Option<usize>,
    /// Length of simulated streams in `evaluate` [default: 2000].
    #[arg(long)]
    pub length: Option<usize>,
}

pub const DEFAULT_BASELINE_TRIALS: usize = 5;
pub const DEFAULT_RUNS: usize = 500;
pub const DEFAULT_MAX_LENGTH: usize = 10_000;
pub const DEFAULT_STREAM_LENGTH: usize = 2000;
pub const DEFAULT_CHANGE_POINT: usize = 500;
pub const DEFAULT_PERIOD_BINS: usize = 4;
pub const LAMBDA_FLOOR: f64 = 1e-3;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `flags` replaced. A threshold flag
    /// also clears a configured target ARL and vice versa.
    pub fn overlay(self, flags: &ExperimentConfig) -> Self {
        let mut base = serde_json::to_value(&self).expect("config serializes");
        let top = serde_json::to_value(flags).expect("config serializes");
        let (base_map, top_map) = (base.as_object_mut().unwrap(), top.as_object().unwrap());
        for (k, v) in top_map {
            if !v.is_null() {
                base_map.insert(k.clone(), v.clone());
            }
        }
        let mut merged: Self = serde_json::from_value(base).expect("merged config deserializes");
        if flags.threshold.is_some() {
            merged.target_arl = None;
        }
        if flags.target_arl.is_some() {
            merged.threshold = None;
        }
        merged
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn runs(&self) -> usize {
        self.runs.unwrap_or(DEFAULT_RUNS)
    }

    pub fn detector_kind(&self) -> Result<DetectorKind, CliError> {
        self.detector.ok_or_else(|| config_err("no detector given (--detector)"))
    }

    pub fn family(&self) -> Family {
        self.family.map(Family::from).unwrap_or(Family::Bernoulli)
    }

    pub fn model(&self, theta: f64) -> Result<ParametricModel, CliError> {
        ParametricModel::new(self.family(), theta, self.variance.unwrap_or(1.0)).map_err(config_err)
    }

    pub fn baseline_trials(&self) -> usize {
        self.baseline_trials.unwrap_or(DEFAULT_BASELINE_TRIALS)
    }

    pub fn glr_window(&self) -> usize {
        self.window.unwrap_or(DEFAULT_GLR_WINDOW)
    }

    pub fn band(&self) -> Result<Band, CliError> {
        match self.band.as_deref() {
            None => Ok(Band::full()),
            Some(&[lo, hi]) => Band::new(lo, hi).map_err(config_err),
            Some(other) => Err(config_err(format!("band needs two values; got {}", other.len()))),
        }
    }

    pub fn parameter_set(values: Option<&[f64]>, name: &str) -> Result<Option<ParameterSet>, CliError> {
        match values {
            None => Ok(None),
            Some(&[lo, hi]) => ParameterSet::new(lo, hi).map(Some).map_err(config_err),
            Some(other) => Err(config_err(format!("{name} needs two values; got {}", other.len()))),
        }
    }

    /// Simulator settings with unset fields taken from the default scenario.
    pub fn trial_experiment(&self) -> Result<TrialExperiment, CliError> {
        let d = TrialExperiment::default();
        let bins = self.bins.unwrap_or(d.bins);
        let mut e = TrialExperiment {
            trials: self.trials.unwrap_or(d.trials),
            bins,
            bin_width: self.bin_width.unwrap_or(d.bin_width),
            baseline_rate: self.baseline_rate.unwrap_or(d.baseline_rate),
            post_rate: self.post_rate.unwrap_or(d.post_rate),
            change_trial: self.change_trial.unwrap_or(d.change_trial),
            cue_bin: self.cue_bin.unwrap_or(bins / 2),
            response: Response::Immediate,
        };
        e.response = match self.response.unwrap_or(ResponseKind::Immediate) {
            ResponseKind::Immediate => Response::Immediate,
            ResponseKind::Delayed => match self.offset_bins {
                Some(offset_bins) => Response::Delayed { offset_bins },
                None => e.default_delay(),
            },
            ResponseKind::Periodic => Response::Periodic {
                period_bins: self.period_bins.unwrap_or(DEFAULT_PERIOD_BINS),
            },
        };
        if e.cue_bin >= e.bins {
            return Err(config_err(format!("cue_bin {} must be < bins {}", e.cue_bin, e.bins)));
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let file: ExperimentConfig =
            serde_json::from_str(r#"{"detector": "cusum", "seed": 3, "target_arl": 100, "band": [1, 2]}"#)
                .unwrap();
        let flags = ExperimentConfig {
            seed: Some(9),
            threshold: Some(4.0),
            ..Default::default()
        };
        let m = file.overlay(&flags);
        assert_eq!(m.detector, Some(DetectorKind::Cusum));
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.threshold, Some(4.0));
        assert_eq!(m.target_arl, None);
        assert_eq!(m.band, Some(vec![1.0, 2.0]));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"detecter": "cusum"}"#).is_err());
    }

    #[test]
    fn trial_experiment_defaults() {
        let e = ExperimentConfig::default().trial_experiment().unwrap();
        assert_eq!(e, TrialExperiment::default());
        let c = ExperimentConfig {
            response: Some(ResponseKind::Periodic),
            bins: Some(40),
            ..Default::default()
        };
        let e = c.trial_experiment().unwrap();
        assert_eq!(e.cue_bin, 20);
        assert_eq!(e.response, Response::Periodic { period_bins: 4 });
    }

    #[test]
    fn malformed_intervals_rejected() {
        let c = ExperimentConfig {
            band: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(matches!(c.band(), Err(CliError::Config(_))));
        assert!(ExperimentConfig::parameter_set(Some(&[0.5, 0.1]), "theta0_set").is_err());
    }
}
