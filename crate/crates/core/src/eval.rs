//! Monte Carlo calibration: run length to false alarm, detection delay,
//! threshold search and delay/false-alarm trade-off tables.
//!
//! Run `i` of an experiment with seed `s` draws its data from
//! `stream_rng(s, i)`, so results do not depend on how rayon schedules the
//! runs, and two detectors evaluated with the same seed see the same data
//! run by run (common random numbers).

use rayon::prelude::*;
use serde::Serialize;

use crate::detectors::DetectorConfig;
use crate::error::{invalid, Result};
use crate::models::{stream_rng, ParametricModel};
use crate::simulate::ChangeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    /// Mean samples to alarm under the pre-change model.
    pub estimated_arl: f64,
    pub arl_std_error: f64,
    pub runs: usize,
    /// Runs that reached `max_length` without an alarm; they count as
    /// `max_length`, so `estimated_arl` is then a lower bound.
    pub censored_runs: usize,
    /// False when a calibration target could not be met inside the bracket.
    pub target_met: bool,
}

impl CalibrationResult {
    pub fn is_lower_bound(&self) -> bool {
        self.censored_runs > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayResult {
    pub threshold: f64,
    /// Mean of `tau - gamma` over runs that alarmed at or after the change;
    /// NaN when there are none.
    pub mean_delay: f64,
    pub delay_std_error: f64,
    pub median_delay: f64,
    /// Runs that alarmed before the change point (false alarms), excluded.
    pub missed: usize,
    /// Runs that never alarmed within the stream length.
    pub censored: usize,
    pub runs: usize,
}

impl DelayResult {
    pub fn detected(&self) -> usize {
        self.runs - self.missed - self.censored
    }
}

/// Runs the detector on one stream, generating samples lazily. Returns the
/// 1-based sample index of the alarm.
fn first_alarm(
    config: &DetectorConfig,
    threshold: f64,
    max_length: usize,
    mut model_at: impl FnMut(usize) -> ParametricModel,
    seed: u64,
    run: u64,
) -> Result<Option<usize>> {
    let mut rng = stream_rng(seed, run);
    let mut detector = config.online(threshold)?;
    let mut prev = 0.0;
    for t in 1..=max_length {
        prev = model_at(t).draw(&mut rng, prev);
        detector.observe(prev)?;
        if detector.stopped() {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn estimate_arl(
    config: &DetectorConfig,
    pre_model: &ParametricModel,
    threshold: f64,
    runs: usize,
    max_length: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    if runs == 0 || max_length == 0 {
        return Err(invalid("runs and max_length must be >= 1"));
    }
    let alarms = (0..runs as u64)
        .into_par_iter()
        .map(|run| first_alarm(config, threshold, max_length, |_| *pre_model, seed, run))
        .collect::<Result<Vec<_>>>()?;
    let censored_runs = alarms.iter().filter(|a| a.is_none()).count();
    let lengths: Vec<f64> = alarms
        .iter()
        .map(|a| a.unwrap_or(max_length) as f64)
        .collect();
    let (estimated_arl, arl_std_error) = mean_and_se(&lengths);
    Ok(CalibrationResult {
        threshold,
        estimated_arl,
        arl_std_error,
        runs,
        censored_runs,
        target_met: true,
    })
}

pub fn estimate_delay(
    config: &DetectorConfig,
    spec: &ChangeSpec,
    threshold: f64,
    runs: usize,
    seed: u64,
) -> Result<DelayResult> {
    if runs == 0 {
        return Err(invalid("runs must be >= 1"));
    }
    let alarms = (0..runs as u64)
        .into_par_iter()
        .map(|run| first_alarm(config, threshold, spec.length, |t| *spec.model_at(t), seed, run))
        .collect::<Result<Vec<_>>>()?;
    let gamma = spec.change_point.unwrap_or(usize::MAX);
    let mut delays = Vec::new();
    let (mut missed, mut censored) = (0, 0);
    for alarm in alarms {
        match alarm {
            Some(tau) if tau >= gamma => delays.push((tau - gamma) as f64),
            Some(_) => missed += 1,
            None => censored += 1,
        }
    }
    let (mean_delay, delay_std_error) = mean_and_se(&delays);
    Ok(DelayResult {
        threshold,
        mean_delay,
        delay_std_error,
        median_delay: median(&delays),
        missed,
        censored,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub bracket: (f64, f64),
    pub max_iterations: usize,
    /// Stop once the best threshold's ARL is within this relative error of
    /// the target.
    pub relative_tolerance: f64,
    /// Stream cap per run; `None` means ten times the target.
    pub max_length: Option<usize>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            bracket: (0.1, 50.0),
            max_iterations: 12,
            relative_tolerance: 0.2,
            max_length: None,
        }
    }
}

/// Bisection for the smallest threshold whose estimated ARL reaches
/// `target_arl`. Every probe reuses `seed`, so the estimated ARL is
/// monotone in the threshold and the search is consistent.
pub fn calibrate_threshold(
    config: &DetectorConfig,
    pre_model: &ParametricModel,
    target_arl: f64,
    runs: usize,
    seed: u64,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if !target_arl.is_finite() || target_arl < 1.0 {
        return Err(invalid(format!("target ARL must be finite and >= 1; got {target_arl}")));
    }
    let (mut lo, mut hi) = options.bracket;
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    let max_length = options
        .max_length
        .unwrap_or_else(|| (10.0 * target_arl).ceil() as usize)
        .max(1);
    let probe = |a: f64| estimate_arl(config, pre_model, a, runs, max_length, seed);
    let close = |r: &CalibrationResult| r.estimated_arl <= target_arl * (1.0 + options.relative_tolerance);

    let at_lo = probe(lo)?;
    if at_lo.estimated_arl >= target_arl {
        return Ok(at_lo);
    }
    let mut best = probe(hi)?;
    if best.estimated_arl < target_arl {
        best.target_met = false;
        return Ok(best);
    }
    for _ in 0..options.max_iterations {
        if close(&best) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = probe(mid)?;
        if r.estimated_arl >= target_arl {
            hi = mid;
            best = r;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub threshold: f64,
    pub estimated_arl: f64,
    pub arl_std_error: f64,
    pub censored_runs: usize,
    pub mean_delay: f64,
    pub delay_std_error: f64,
    pub median_delay: f64,
    pub missed: usize,
    pub undetected: usize,
    pub runs: usize,
}

/// One row per threshold: ARL under `spec.pre` and delay under `spec`.
pub fn tradeoff_table(
    config: &DetectorConfig,
    spec: &ChangeSpec,
    thresholds: &[f64],
    runs: usize,
    max_length: usize,
    seed: u64,
) -> Result<Vec<TradeoffRow>> {
    if thresholds.is_empty() {
        return Err(invalid("at least one threshold is required"));
    }
    thresholds
        .iter()
        .map(|&a| {
            let arl = estimate_arl(config, &spec.pre, a, runs, max_length, seed)?;
            let delay = estimate_delay(config, spec, a, runs, seed)?;
            Ok(TradeoffRow {
                threshold: a,
                estimated_arl: arl.estimated_arl,
                arl_std_error: arl.arl_std_error,
                censored_runs: arl.censored_runs,
                mean_delay: delay.mean_delay,
                delay_std_error: delay.delay_std_error,
                median_delay: delay.median_delay,
                missed: delay.missed,
                undetected: delay.censored,
                runs,
            })
        })
        .collect()
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; NaN if either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorConfig;

    fn bern(p: f64) -> ParametricModel {
        ParametricModel::bernoulli(p).unwrap()
    }

    fn cusum() -> DetectorConfig {
        DetectorConfig::Cusum {
            f0: bern(0.05),
            f1: bern(0.25),
        }
    }

    #[test]
    fn zero_threshold_alarms_at_first_positive_increment() {
        let r = estimate_arl(&cusum(), &bern(0.05), 0.0, 50, 10_000, 1).unwrap();
        assert!(r.estimated_arl >= 1.0);
        assert!(r.estimated_arl < 60.0, "{}", r.estimated_arl);
        assert_eq!(r.censored_runs, 0);
    }

    #[test]
    fn identical_models_never_alarm() {
        let cfg = DetectorConfig::Cusum {
            f0: bern(0.3),
            f1: bern(0.3),
        };
        let r = estimate_arl(&cfg, &bern(0.3), 1.0, 20, 500, 1).unwrap();
        assert_eq!(r.censored_runs, 20);
        assert!(r.is_lower_bound());
        assert_eq!(r.estimated_arl, 500.0);
    }

    #[test]
    fn arl_is_reproducible() {
        let a = estimate_arl(&cusum(), &bern(0.05), 2.0, 64, 5000, 77).unwrap();
        let b = estimate_arl(&cusum(), &bern(0.05), 2.0, 64, 5000, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arl_increases_with_threshold() {
        let arls: Vec<f64> = [2.0, 4.0, 6.0]
            .iter()
            .map(|&a| estimate_arl(&cusum(), &bern(0.05), a, 500, 100_000, 5).unwrap().estimated_arl)
            .collect();
        assert!(arls[0] < arls[1] && arls[1] < arls[2], "{arls:?}");
    }

    #[test]
    fn immediate_large_shift_has_small_delay() {
        let spec = ChangeSpec::new(bern(0.01), bern(0.9), Some(1), 500).unwrap();
        let cfg = DetectorConfig::Cusum {
            f0: bern(0.01),
            f1: bern(0.9),
        };
        let r = estimate_delay(&cfg, &spec, 2.0, 200, 3).unwrap();
        assert!(r.mean_delay < 10.0, "{}", r.mean_delay);
        assert_eq!(r.missed, 0);
    }

    #[test]
    fn unreachable_threshold_is_all_censored() {
        let spec = ChangeSpec::new(bern(0.05), bern(0.25), Some(50), 200).unwrap();
        let r = estimate_delay(&cusum(), &spec, 1e9, 30, 3).unwrap();
        assert_eq!(r.censored, 30);
        assert_eq!(r.detected(), 0);
        assert!(r.mean_delay.is_nan());
    }

    #[test]
    fn calibration_edges() {
        let opts = CalibrationOptions::default();
        let r = calibrate_threshold(&cusum(), &bern(0.05), 1.0, 50, 1, &opts).unwrap();
        assert_eq!(r.threshold, 0.1);
        assert!(calibrate_threshold(&cusum(), &bern(0.05), 0.5, 50, 1, &opts).is_err());

        let flat = DetectorConfig::Cusum {
            f0: bern(0.05),
            f1: bern(0.05),
        };
        let r = calibrate_threshold(&flat, &bern(0.05), 100.0, 10, 1, &opts).unwrap();
        // zero LLR: the statistic never leaves 0, every probe is fully censored
        assert!(r.target_met);
        assert_eq!(r.threshold, 0.1);

        let opts = CalibrationOptions {
            bracket: (0.1, 0.5),
            ..CalibrationOptions::default()
        };
        let r = calibrate_threshold(&cusum(), &bern(0.05), 5000.0, 50, 1, &opts).unwrap();
        assert!(!r.target_met);
    }

    #[test]
    fn tradeoff_single_row_matches_estimators() {
        let spec = ChangeSpec::new(bern(0.05), bern(0.25), Some(100), 1000).unwrap();
        let rows = tradeoff_table(&cusum(), &spec, &[3.0], 100, 20_000, 9).unwrap();
        assert_eq!(rows.len(), 1);
        let arl = estimate_arl(&cusum(), &bern(0.05), 3.0, 100, 20_000, 9).unwrap();
        let delay = estimate_delay(&cusum(), &spec, 3.0, 100, 9).unwrap();
        assert_eq!(rows[0].estimated_arl, arl.estimated_arl);
        assert_eq!(rows[0].mean_delay, delay.mean_delay);
        assert!(tradeoff_table(&cusum(), &spec, &[], 10, 100, 9).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
