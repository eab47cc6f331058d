//! The four subcommands as library functions. Each takes a fully merged
//! [`ExperimentConfig`]; file handling is kept at the edges so the same
//! code paths serve the binary and the tests.

use std::path::Path;

use log::{debug, info, warn};
use serde::Serialize;

use qcd::detectors::{DetectorConfig, GlrConfig, StoppingReport};
use qcd::eval::{
    calibrate_threshold, tradeoff_table, CalibrationOptions, CalibrationResult, TradeoffRow,
};
use qcd::models::{sample_with, stream_rng, ParameterSet, ParametricModel};
use qcd::simulate::{gen_trial_experiment, ChangeSpec, SpikeTrialSet, TrialExperiment};
use qcd::summary::{learn_baseline, Baseline, StatKind};

use crate::config::{
    DetectorKind, ExperimentConfig, NoniidVariant, StatName, DEFAULT_CHANGE_POINT, DEFAULT_MAX_LENGTH,
    DEFAULT_STREAM_LENGTH, LAMBDA_FLOOR,
};
use crate::data::{open_output, sidecar_path, write_rows, write_sidecar, write_spikes, Sidecar};
use crate::CliError;

/// Stream reserved for synthetic baseline training data, kept apart from
/// the per-run streams of the Monte Carlo harness.
const TRAINING_STREAM: u64 = u64::MAX;

pub fn simulate(cfg: &ExperimentConfig) -> Result<SpikeTrialSet, CliError> {
    let experiment = cfg.trial_experiment()?;
    let set = gen_trial_experiment(&experiment, cfg.seed())?;
    let out = open_output(cfg.out.as_deref())?;
    write_spikes(&set, out)?;
    if let Some(path) = cfg.out.as_deref() {
        let side = Sidecar {
            meta: set.meta,
            seed: Some(cfg.seed()),
            experiment: Some(experiment),
        };
        write_sidecar(&sidecar_path(path), &side)?;
        let total: usize = set.rows().flatten().map(|&s| s as usize).sum();
        info!(
            "wrote {} trials x {} bins ({total} spikes) to {}",
            set.trials(),
            set.bins(),
            path.display()
        );
    }
    Ok(set)
}

/// Where an alarm fell in trial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Alarm {
    /// 1-based index into the concatenated samples.
    pub sample: usize,
    /// 1-based trial.
    pub trial: usize,
    /// 0-based bin within the trial.
    pub bin: usize,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub detector: DetectorConfig,
    pub threshold: f64,
    pub calibration: Option<CalibrationResult>,
    /// Learned baseline of the deviation detector.
    pub baseline: Option<Baseline>,
    pub report: StoppingReport,
    pub alarm: Option<Alarm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRow {
    pub index: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub stopped: bool,
}

impl Detection {
    pub fn rows(&self) -> Vec<PathRow> {
        self.report
            .statistic_path
            .iter()
            .enumerate()
            .map(|(i, &statistic)| PathRow {
                index: self.detector.sample_index(i + 1),
                statistic,
                threshold: self.threshold,
                stopped: self.report.stopping_time == Some(i + 1),
            })
            .collect()
    }
}

fn theta1_default(cfg: &ExperimentConfig) -> f64 {
    cfg.theta1
        .or(cfg.post_rate)
        .unwrap_or(TrialExperiment::default().post_rate)
}

fn theta0_default(cfg: &ExperimentConfig) -> f64 {
    cfg.theta0
        .or(cfg.baseline_rate)
        .unwrap_or(TrialExperiment::default().baseline_rate)
}

fn stat_kind(cfg: &ExperimentConfig, f0: ParametricModel) -> Result<StatKind, CliError> {
    Ok(match cfg.stat.unwrap_or(StatName::Mean) {
        StatName::Mean => StatKind::Mean,
        StatName::Variance => StatKind::Variance { center: None },
        StatName::Entropy => StatKind::Entropy { f0: Some(f0) },
        StatName::Spectral => StatKind::SpectralMass { band: cfg.band()? },
    })
}

/// Builds the detector. `training` holds baseline samples, `f0` the
/// pre-change model and `bins` the trial length.
pub fn build_detector(
    cfg: &ExperimentConfig,
    training: &[f64],
    f0: ParametricModel,
    bins: usize,
) -> Result<(DetectorConfig, Option<Baseline>), CliError> {
    let f1 = || cfg.model(theta1_default(cfg));
    let detector = match cfg.detector_kind()? {
        DetectorKind::Cusum => DetectorConfig::Cusum { f0, f1: f1()? },
        DetectorKind::Noniid => match cfg.noniid_variant.unwrap_or(NoniidVariant::Full) {
            NoniidVariant::Full => DetectorConfig::NoniidFull { f0, f1: f1()? },
            NoniidVariant::Reset => DetectorConfig::NoniidReset {
                f0,
                f1: f1()?,
                window: cfg.glr_window(),
            },
        },
        DetectorKind::Gcusum => {
            let family = cfg.family();
            let s0 = match ExperimentConfig::parameter_set(cfg.theta0_set.as_deref(), "theta0_set")? {
                Some(s) => s,
                None => ParameterSet::singleton(f0.theta())?,
            };
            let s1 = match ExperimentConfig::parameter_set(cfg.theta1_set.as_deref(), "theta1_set")? {
                Some(s) => s,
                None => ParameterSet::new(theta1_default(cfg), ParameterSet::full(family).upper())?,
            };
            let glr = GlrConfig::with_variance(family, s0, s1, cfg.glr_window(), cfg.variance.unwrap_or(1.0))?;
            DetectorConfig::Gcusum(glr)
        }
        DetectorKind::Deviation => {
            let kind = stat_kind(cfg, f0)?;
            let spectral = matches!(kind, StatKind::SpectralMass { .. });
            let window_length = cfg.window_length.unwrap_or(if spectral { bins } else { 1 });
            let stride = cfg.stride.unwrap_or(if spectral { window_length } else { 1 });
            let baseline = learn_baseline(&kind, training, window_length, stride)?;
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => {
                    let l = baseline.heuristic_lambda(LAMBDA_FLOOR);
                    info!("lambda not given; using 3 standard errors of the baseline: {l}");
                    l
                }
            };
            info!(
                "baseline {} over {} windows: mu0 = {} (se {})",
                kind.name(),
                baseline.windows,
                baseline.mu0,
                baseline.std_error
            );
            let stat = baseline.clone().into_statistic(lambda)?;
            return Ok((DetectorConfig::Deviation { stat, stride }, Some(baseline)));
        }
    };
    Ok((detector, None))
}

fn calibration_options(cfg: &ExperimentConfig) -> CalibrationOptions {
    CalibrationOptions {
        max_length: cfg.max_length,
        ..CalibrationOptions::default()
    }
}

fn calibrate(
    cfg: &ExperimentConfig,
    detector: &DetectorConfig,
    pre: &ParametricModel,
    target: f64,
) -> Result<CalibrationResult, CliError> {
    let r = calibrate_threshold(detector, pre, target, cfg.runs(), cfg.seed(), &calibration_options(cfg))?;
    if !r.target_met {
        warn!(
            "target ARL {target} not reached within the threshold bracket; best estimate {} at A = {}",
            r.estimated_arl, r.threshold
        );
    }
    if r.is_lower_bound() {
        warn!("{} of {} runs censored; ARL {} is a lower bound", r.censored_runs, r.runs, r.estimated_arl);
    }
    Ok(r)
}

fn resolve_threshold(
    cfg: &ExperimentConfig,
    detector: &DetectorConfig,
    pre: &ParametricModel,
) -> Result<(f64, Option<CalibrationResult>), CliError> {
    match (cfg.threshold, cfg.target_arl) {
        (Some(a), None) => Ok((a, None)),
        (None, Some(target)) => {
            let r = calibrate(cfg, detector, pre, target)?;
            info!("calibrated threshold {} (ARL {})", r.threshold, r.estimated_arl);
            Ok((r.threshold, Some(r)))
        }
        (None, None) => Err(CliError::Config("one of --threshold or --target-arl is required".into())),
        (Some(_), Some(_)) => Err(CliError::Config(
            "--threshold and --target-arl are mutually exclusive".into(),
        )),
    }
}

/// Learns the baseline from the first trials, concatenates all trials and
/// runs the configured detector over them.
pub fn detect_set(set: &SpikeTrialSet, cfg: &ExperimentConfig) -> Result<Detection, CliError> {
    let baseline_trials = cfg.baseline_trials();
    if baseline_trials == 0 || baseline_trials >= set.trials() {
        return Err(CliError::Config(format!(
            "baseline_trials must lie in 1..{}; got {baseline_trials}",
            set.trials()
        )));
    }
    let training = set.concat_first(baseline_trials);
    let rate = training.iter().sum::<f64>() / training.len() as f64;
    debug!("baseline firing rate {rate} over {} bins", training.len());
    let f0 = cfg.model(cfg.theta0.unwrap_or(rate))?;
    let (detector, baseline) = build_detector(cfg, &training, f0, set.bins())?;
    let (threshold, calibration) = resolve_threshold(cfg, &detector, &f0)?;

    let report = detector.run(&set.concat_trials(), threshold)?;
    let alarm = report.stopping_time.map(|step| {
        let sample = detector.sample_index(step);
        Alarm {
            sample,
            trial: (sample - 1) / set.bins() + 1,
            bin: (sample - 1) % set.bins(),
        }
    });
    Ok(Detection {
        detector,
        threshold,
        calibration,
        baseline,
        report,
        alarm,
    })
}

pub fn detect(set: &SpikeTrialSet, cfg: &ExperimentConfig) -> Result<Detection, CliError> {
    let detection = detect_set(set, cfg)?;
    write_rows(&detection.rows(), open_output(cfg.out.as_deref())?)?;
    match detection.alarm {
        Some(a) => info!(
            "change detected at sample {} (trial {}, bin {}); statistic {} > {}",
            a.sample,
            a.trial,
            a.bin,
            detection.report.max_statistic(),
            detection.threshold
        ),
        None => info!(
            "no change detected; max statistic {} <= {}",
            detection.report.max_statistic(),
            detection.threshold
        ),
    }
    Ok(detection)
}

/// Pre-change model and, for the deviation detector, synthetic training
/// data of `baseline_trials x bins` samples drawn from it.
fn monte_carlo_detector(cfg: &ExperimentConfig) -> Result<(DetectorConfig, ParametricModel), CliError> {
    let pre = cfg.model(theta0_default(cfg))?;
    let experiment = cfg.trial_experiment()?;
    let training = match cfg.detector_kind()? {
        DetectorKind::Deviation => {
            let n = cfg.baseline_trials() * experiment.bins;
            sample_with(&pre, n, &mut stream_rng(cfg.seed(), TRAINING_STREAM))
        }
        _ => Vec::new(),
    };
    let (detector, _) = build_detector(cfg, &training, pre, experiment.bins)?;
    Ok((detector, pre))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub target_arl: f64,
    pub threshold: f64,
    pub estimated_arl: f64,
    pub arl_std_error: f64,
    pub runs: usize,
    pub censored_runs: usize,
    pub lower_bound: bool,
    pub target_met: bool,
}

pub fn calibration(cfg: &ExperimentConfig) -> Result<CalibrationRow, CliError> {
    let target = cfg
        .target_arl
        .ok_or_else(|| CliError::Config("calibrate needs --target-arl".into()))?;
    let (detector, pre) = monte_carlo_detector(cfg)?;
    let r = calibrate(cfg, &detector, &pre, target)?;
    let row = CalibrationRow {
        target_arl: target,
        threshold: r.threshold,
        estimated_arl: r.estimated_arl,
        arl_std_error: r.arl_std_error,
        runs: r.runs,
        censored_runs: r.censored_runs,
        lower_bound: r.is_lower_bound(),
        target_met: r.target_met,
    };
    write_rows(&[row], open_output(cfg.out.as_deref())?)?;
    Ok(row)
}

pub fn change_spec(cfg: &ExperimentConfig) -> Result<ChangeSpec, CliError> {
    let pre = cfg.model(theta0_default(cfg))?;
    let post = cfg.model(theta1_default(cfg))?;
    let length = cfg.length.unwrap_or(DEFAULT_STREAM_LENGTH);
    let gamma = cfg.change_point.unwrap_or(DEFAULT_CHANGE_POINT);
    Ok(ChangeSpec::new(pre, post, Some(gamma), length)?)
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<Vec<TradeoffRow>, CliError> {
    let thresholds = match cfg.thresholds.as_deref() {
        Some(t) if !t.is_empty() => t,
        _ => return Err(CliError::Config("evaluate needs a non-empty --thresholds list".into())),
    };
    let (detector, _) = monte_carlo_detector(cfg)?;
    let spec = change_spec(cfg)?;
    let max_length = cfg.max_length.unwrap_or(DEFAULT_MAX_LENGTH);
    let rows = tradeoff_table(&detector, &spec, thresholds, cfg.runs(), max_length, cfg.seed())?;
    write_rows(&rows, open_output(cfg.out.as_deref())?)?;
    Ok(rows)
}

pub fn load_input(cfg: &ExperimentConfig) -> Result<SpikeTrialSet, CliError> {
    let path: &Path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("detect needs a data file".into()))?;
    crate::data::load_spikes(path)
}
