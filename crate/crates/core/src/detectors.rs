//! Streaming change detectors.
//!
//! Each detector family has a pure step function over [`DetectorState`] and
//! an offline `*_run` wrapper that folds the step over a slice and returns a
//! [`StoppingReport`]. The [`OnlineDetector`] implementations are the same
//! recursions packaged for sample-at-a-time use by the Monte Carlo harness.
//!
//! | detector | statistic |
//! |---|---|
//! | CUSUM | `W_n = (W_{n-1} + log f1(X_n)/f0(X_n))^+` |
//! | generalized CUSUM | `G_n = max_k G_n(k)` with constrained MLEs, windowed |
//! | non-iid CUSUM, full history | CUSUM recursion on conditional LLRs |
//! | non-iid CUSUM, reset | one accumulator per candidate change point |
//! | Deviation-CUSUM | `W_n = (W_{n-1} + h - mu0 - lambda)^+` |
//!
//! Alarms require the strict inequality `statistic > threshold`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::models::{log_likelihood_ratio, Family, ParameterSet, ParametricModel};
use crate::summary::SummaryStatistic;

/// Default number of candidate change points kept by window-limited detectors.
pub const DEFAULT_GLR_WINDOW: usize = 200;

/// Running statistic, time index and stopping record of a detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorState {
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub stopped: bool,
    pub stopping_time: Option<usize>,
}

impl DetectorState {
    /// Fresh state with `statistic = 0` at `n = 0`. The threshold may be
    /// zero or `+inf` but not negative or NaN.
    pub fn new(threshold: f64) -> Result<Self> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(invalid(format!("threshold must be >= 0; got {threshold}")));
        }
        Ok(Self {
            statistic: 0.0,
            n: 0,
            threshold,
            stopped: false,
            stopping_time: None,
        })
    }

    /// Moves to `n + 1` with the given statistic and applies the stopping rule.
    fn advance(self, statistic: f64) -> Self {
        if self.stopped {
            return self;
        }
        let n = self.n + 1;
        let crossed = statistic > self.threshold;
        Self {
            statistic,
            n,
            threshold: self.threshold,
            stopped: crossed,
            stopping_time: crossed.then_some(n),
        }
    }
}

/// Output of an offline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingReport {
    pub stopping_time: Option<usize>,
    /// One entry per consumed step; ends at the stopping time when there is one.
    pub statistic_path: Vec<f64>,
    pub threshold: f64,
    pub detected: bool,
}

impl StoppingReport {
    fn from_path(state: &DetectorState, statistic_path: Vec<f64>) -> Self {
        Self {
            stopping_time: state.stopping_time,
            statistic_path,
            threshold: state.threshold,
            detected: state.stopping_time.is_some(),
        }
    }

    pub fn max_statistic(&self) -> f64 {
        self.statistic_path
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(x))
    }
}

/// One CUSUM update. Stepping a stopped state returns it unchanged.
pub fn cusum_step(state: DetectorState, llr: f64) -> Result<DetectorState> {
    if state.stopped {
        return Ok(state);
    }
    let llr = finite(llr)?;
    Ok(state.advance((state.statistic + llr).max(0.0)))
}

pub fn cusum_run(
    f0: &ParametricModel,
    f1: &ParametricModel,
    observations: &[f64],
    threshold: f64,
) -> Result<StoppingReport> {
    let mut detector = CusumDetector::new(*f0, *f1, threshold)?;
    run_offline(&mut detector, observations)
}

/// Brute-force `W_n = max_{1<=k<=n+1} sum_{i=k}^{n} llr_i` for every prefix.
///
/// Quadratic in the input length; kept as an independent check of the
/// recursive form. Returns `W_1..W_n` (`W_0 = 0` is implicit).
pub fn cusum_maxform(
    f0: &ParametricModel,
    f1: &ParametricModel,
    observations: &[f64],
) -> Result<Vec<f64>> {
    let llrs = observations
        .iter()
        .map(|&x| log_likelihood_ratio(f0, f1, x, &[]))
        .collect::<Result<Vec<_>>>()?;
    Ok((1..=llrs.len())
        .map(|n| {
            // k = n + 1 contributes the empty sum 0
            let mut best = 0.0f64;
            let mut tail = 0.0;
            for k in (1..=n).rev() {
                tail += llrs[k - 1];
                best = best.max(tail);
            }
            best
        })
        .collect())
}

/// Configuration of the generalized (GLR) CUSUM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlrConfig {
    pub family: Family,
    pub theta0_set: ParameterSet,
    pub theta1_set: ParameterSet,
    /// Maximum number of candidate change points, counted back from `n`.
    pub window: usize,
    /// Known variance for [`Family::GaussianMean`]; ignored otherwise.
    pub variance: f64,
}

impl GlrConfig {
    pub fn new(
        family: Family,
        theta0_set: ParameterSet,
        theta1_set: ParameterSet,
        window: usize,
    ) -> Result<Self> {
        Self::with_variance(family, theta0_set, theta1_set, window, 1.0)
    }

    pub fn with_variance(
        family: Family,
        theta0_set: ParameterSet,
        theta1_set: ParameterSet,
        window: usize,
        variance: f64,
    ) -> Result<Self> {
        if !family.is_iid() {
            return Err(Error::UnsupportedFamily {
                family,
                operation: "generalized CUSUM",
            });
        }
        theta0_set.validate_for(family)?;
        theta1_set.validate_for(family)?;
        if !theta0_set.is_disjoint(&theta1_set) {
            return Err(invalid("pre- and post-change parameter sets must be disjoint"));
        }
        if window < 2 {
            return Err(invalid(format!("GLR window must be >= 2; got {window}")));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid(format!("variance must be finite and > 0; got {variance}")));
        }
        Ok(Self {
            family,
            theta0_set,
            theta1_set,
            window,
            variance,
        })
    }

    fn model(&self, theta: f64) -> ParametricModel {
        ParametricModel::new(self.family, theta, self.variance)
            .expect("parameter sets were validated against the family")
    }

    /// `max_{theta in set} sum log f_theta(x_i)` from sufficient statistics.
    fn max_log_likelihood(&self, s: &Sufficient, set: &ParameterSet) -> f64 {
        if s.count == 0.0 {
            return 0.0;
        }
        let theta = self.model(set.project(s.sum / s.count)).theta();
        match self.family {
            Family::Bernoulli => s.sum * theta.ln() + (s.count - s.sum) * (1.0 - theta).ln(),
            Family::Poisson => s.sum * theta.ln() - s.count * theta - s.log_factorials,
            Family::GaussianMean => {
                let v = self.variance;
                let rss = s.sum_sq - 2.0 * theta * s.sum + s.count * theta * theta;
                -0.5 * s.count * (2.0 * std::f64::consts::PI * v).ln() - rss / (2.0 * v)
            }
            Family::Ar1Gaussian => unreachable!("rejected by GlrConfig"),
        }
    }
}

/// Sufficient statistics of a segment for the iid exponential families.
#[derive(Debug, Clone, Copy, Default)]
struct Sufficient {
    count: f64,
    sum: f64,
    sum_sq: f64,
    log_factorials: f64,
}

impl Sufficient {
    fn of(x: f64) -> Self {
        Self {
            count: 1.0,
            sum: x,
            sum_sq: x * x,
            log_factorials: statrs::function::factorial::ln_factorial(x as u64),
        }
    }

    fn add(&mut self, o: &Sufficient) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.log_factorials += o.log_factorials;
    }

    fn minus(&self, o: &Sufficient) -> Sufficient {
        Sufficient {
            count: self.count - o.count,
            sum: self.sum - o.sum,
            sum_sq: self.sum_sq - o.sum_sq,
            log_factorials: self.log_factorials - o.log_factorials,
        }
    }
}

/// `G_n` for the whole observation slice.
pub fn gcusum_statistic(config: &GlrConfig, observations: &[f64]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut detector = GcusumDetector::new(*config, f64::INFINITY)?;
    let mut g = 0.0;
    for &x in observations {
        g = detector.push(x)?;
    }
    Ok(g)
}

pub fn gcusum_run(config: &GlrConfig, observations: &[f64], threshold: f64) -> Result<StoppingReport> {
    let mut detector = GcusumDetector::new(*config, threshold)?;
    run_offline(&mut detector, observations)
}

/// One non-iid CUSUM update with the conditional LLR given the full history.
///
/// Conditioning on `X_1..X_{i-1}` does not depend on the candidate change
/// point, so the max over `k` collapses to the scalar `(.)^+` recursion.
pub fn noniid_cusum_step_fullhistory(
    state: DetectorState,
    f0: &ParametricModel,
    f1: &ParametricModel,
    x: f64,
    history: &[f64],
) -> Result<DetectorState> {
    if state.stopped {
        return Ok(state);
    }
    cusum_step(state, log_likelihood_ratio(f0, f1, x, history)?)
}

pub fn noniid_cusum_run_fullhistory(
    f0: &ParametricModel,
    f1: &ParametricModel,
    observations: &[f64],
    threshold: f64,
) -> Result<StoppingReport> {
    let mut detector = NoniidFullDetector::new(*f0, *f1, threshold)?;
    run_offline(&mut detector, observations)
}

/// Non-iid CUSUM where the post-change conditioning restarts at each
/// candidate change point `k`; the last `window` candidates are tracked.
pub fn noniid_cusum_run_reset(
    f0: &ParametricModel,
    f1: &ParametricModel,
    observations: &[f64],
    threshold: f64,
    window: usize,
) -> Result<StoppingReport> {
    let mut detector = NoniidResetDetector::new(*f0, *f1, threshold, window)?;
    run_offline(&mut detector, observations)
}

/// One Deviation-CUSUM update.
pub fn deviation_cusum_step(
    state: DetectorState,
    h_value: f64,
    mu0: f64,
    lambda: f64,
) -> Result<DetectorState> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(invalid(format!("lambda must be > 0; got {lambda}")));
    }
    if state.stopped {
        return Ok(state);
    }
    let h_value = finite(h_value)?;
    Ok(state.advance((state.statistic + h_value - mu0 - lambda).max(0.0)))
}

/// Slides a `stat.window_length()` window over the observations in steps of
/// `stride`, folding [`deviation_cusum_step`] over the summary values. Time
/// indices in the report count windows, not samples.
pub fn deviation_cusum_run(
    stat: &SummaryStatistic,
    observations: &[f64],
    threshold: f64,
    stride: usize,
) -> Result<StoppingReport> {
    if observations.len() < stat.window_length() {
        return Err(Error::InsufficientData {
            needed: stat.window_length(),
            available: observations.len(),
        });
    }
    let mut detector = DeviationDetector::new(stat.clone(), threshold, stride)?;
    run_offline(&mut detector, observations)
}

/// Sample-at-a-time interface shared by all detectors.
pub trait OnlineDetector {
    /// Feeds one observation. Returns the new statistic when this sample
    /// completed an update, `None` otherwise (windowed detectors between
    /// evaluation points, or any detector that has already stopped).
    fn observe(&mut self, x: f64) -> Result<Option<f64>>;

    fn state(&self) -> &DetectorState;

    fn stopped(&self) -> bool {
        self.state().stopped
    }
}

fn run_offline<D: OnlineDetector + ?Sized>(detector: &mut D, observations: &[f64]) -> Result<StoppingReport> {
    let mut path = Vec::new();
    for &x in observations {
        if let Some(stat) = detector.observe(x)? {
            path.push(stat);
        }
        if detector.stopped() {
            break;
        }
    }
    Ok(StoppingReport::from_path(detector.state(), path))
}

#[derive(Debug, Clone)]
pub struct CusumDetector {
    f0: ParametricModel,
    f1: ParametricModel,
    state: DetectorState,
}

impl CusumDetector {
    pub fn new(f0: ParametricModel, f1: ParametricModel, threshold: f64) -> Result<Self> {
        if f0.family() != f1.family() {
            return Err(Error::FamilyMismatch {
                left: f0.family(),
                right: f1.family(),
            });
        }
        Ok(Self {
            f0,
            f1,
            state: DetectorState::new(threshold)?,
        })
    }
}

impl OnlineDetector for CusumDetector {
    fn observe(&mut self, x: f64) -> Result<Option<f64>> {
        if self.state.stopped {
            return Ok(None);
        }
        let llr = log_likelihood_ratio(&self.f0, &self.f1, x, &[])?;
        self.state = cusum_step(self.state, llr)?;
        Ok(Some(self.state.statistic))
    }

    fn state(&self) -> &DetectorState {
        &self.state
    }
}

/// Window-limited generalized CUSUM.
#[derive(Debug, Clone)]
pub struct GcusumDetector {
    config: GlrConfig,
    recent: VecDeque<Sufficient>,
    total: Sufficient,
    state: DetectorState,
}

impl GcusumDetector {
    pub fn new(config: GlrConfig, threshold: f64) -> Result<Self> {
        Ok(Self {
            recent: VecDeque::with_capacity(config.window),
            config,
            total: Sufficient::default(),
            state: DetectorState::new(threshold)?,
        })
    }

    /// Consumes `x` and returns `G_n`, even after the detector has stopped.
    fn push(&mut self, x: f64) -> Result<f64> {
        self.config.family.check_support(x)?;
        let s = Sufficient::of(x);
        self.total.add(&s);
        if self.recent.len() == self.config.window {
            self.recent.pop_front();
        }
        self.recent.push_back(s);

        let null = self.config.max_log_likelihood(&self.total, &self.config.theta0_set);
        let mut post = Sufficient::default();
        let mut best = f64::NEG_INFINITY;
        // candidates k = n, n-1, ..., n - window + 1
        for s in self.recent.iter().rev() {
            post.add(s);
            let pre = self.total.minus(&post);
            let g = self.config.max_log_likelihood(&pre, &self.config.theta0_set)
                + self.config.max_log_likelihood(&post, &self.config.theta1_set)
                - null;
            best = best.max(g);
        }
        Ok(best)
    }
}

impl OnlineDetector for GcusumDetector {
    fn observe(&mut self, x: f64) -> Result<Option<f64>> {
        if self.state.stopped {
            return Ok(None);
        }
        let g = finite(self.push(x)?)?;
        self.state = self.state.advance(g);
        Ok(Some(g))
    }

    fn state(&self) -> &DetectorState {
        &self.state
    }
}

#[derive(Debug, Clone)]
pub struct NoniidFullDetector {
    f0: ParametricModel,
    f1: ParametricModel,
    history: Vec<f64>,
    state: DetectorState,
}

impl NoniidFullDetector {
    pub fn new(f0: ParametricModel, f1: ParametricModel, threshold: f64) -> Result<Self> {
        if f0.family() != f1.family() {
            return Err(Error::FamilyMismatch {
                left: f0.family(),
                right: f1.family(),
            });
        }
        Ok(Self {
            f0,
            f1,
            history: Vec::new(),
            state: DetectorState::new(threshold)?,
        })
    }
}

impl OnlineDetector for NoniidFullDetector {
    fn observe(&mut self, x: f64) -> Result<Option<f64>> {
        if self.state.stopped {
            return Ok(None);
        }
        self.state = noniid_cusum_step_fullhistory(self.state, &self.f0, &self.f1, x, &self.history)?;
        self.history.push(x);
        Ok(Some(self.state.statistic))
    }

    fn state(&self) -> &DetectorState {
        &self.state
    }
}

#[derive(Debug, Clone)]
pub struct NoniidResetDetector {
    f0: ParametricModel,
    f1: ParametricModel,
    window: usize,
    history: Vec<f64>,
    /// (0-based start index k - 1, running log-likelihood ratio sum)
    candidates: VecDeque<(usize, f64)>,
    state: DetectorState,
}

impl NoniidResetDetector {
    pub fn new(f0: ParametricModel, f1: ParametricModel, threshold: f64, window: usize) -> Result<Self> {
        if f0.family() != f1.family() {
            return Err(Error::FamilyMismatch {
                left: f0.family(),
                right: f1.family(),
            });
        }
        if window < 2 {
            return Err(invalid(format!("window must be >= 2; got {window}")));
        }
        Ok(Self {
            f0,
            f1,
            window,
            history: Vec::new(),
            candidates: VecDeque::with_capacity(window),
            state: DetectorState::new(threshold)?,
        })
    }
}

impl OnlineDetector for NoniidResetDetector {
    fn observe(&mut self, x: f64) -> Result<Option<f64>> {
        if self.state.stopped {
            return Ok(None);
        }
        let i = self.history.len();
        if self.candidates.len() == self.window {
            self.candidates.pop_front();
        }
        self.candidates.push_back((i, 0.0));
        let mut best = 0.0f64;
        for (start, sum) in self.candidates.iter_mut() {
            let inc = log_likelihood_ratio(&self.f0, &self.f1, x, &self.history[*start..i])?;
            *sum += finite(inc)?;
            best = best.max(*sum);
        }
        self.history.push(x);
        self.state = self.state.advance(best);
        Ok(Some(best))
    }

    fn state(&self) -> &DetectorState {
        &self.state
    }
}

/// Deviation-CUSUM over a sliding window; evaluates `h` once every
/// `stride` samples after the first full window.
#[derive(Debug, Clone)]
pub struct DeviationDetector {
    stat: SummaryStatistic,
    stride: usize,
    buffer: VecDeque<f64>,
    seen: usize,
    state: DetectorState,
}

impl DeviationDetector {
    pub fn new(stat: SummaryStatistic, threshold: f64, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("stride must be >= 1"));
        }
        Ok(Self {
            buffer: VecDeque::with_capacity(stat.window_length()),
            stat,
            stride,
            seen: 0,
            state: DetectorState::new(threshold)?,
        })
    }

    /// 1-based sample index at which window position `j` (1-based) ends.
    pub fn window_end(&self, j: usize) -> usize {
        window_end(self.stat.window_length(), self.stride, j)
    }
}

/// 1-based sample index at which window position `j` (1-based) ends.
pub fn window_end(window_length: usize, stride: usize, j: usize) -> usize {
    window_length + (j - 1) * stride
}

impl OnlineDetector for DeviationDetector {
    fn observe(&mut self, x: f64) -> Result<Option<f64>> {
        if self.state.stopped {
            return Ok(None);
        }
        let w = self.stat.window_length();
        if self.buffer.len() == w {
            self.buffer.pop_front();
        }
        self.buffer.push_back(x);
        self.seen += 1;
        if self.seen < w || !(self.seen - w).is_multiple_of(self.stride) {
            return Ok(None);
        }
        let h = self.stat.evaluate(self.buffer.make_contiguous())?;
        self.state = deviation_cusum_step(self.state, h, self.stat.mu0(), self.stat.lambda())?;
        Ok(Some(self.state.statistic))
    }

    fn state(&self) -> &DetectorState {
        &self.state
    }
}

/// A fully specified detector, buildable for any threshold.
#[derive(Debug, Clone)]
pub enum DetectorConfig {
    Cusum {
        f0: ParametricModel,
        f1: ParametricModel,
    },
    Gcusum(GlrConfig),
    NoniidFull {
        f0: ParametricModel,
        f1: ParametricModel,
    },
    NoniidReset {
        f0: ParametricModel,
        f1: ParametricModel,
        window: usize,
    },
    Deviation {
        stat: SummaryStatistic,
        stride: usize,
    },
}

impl DetectorConfig {
    pub fn online(&self, threshold: f64) -> Result<Box<dyn OnlineDetector + Send>> {
        Ok(match self {
            DetectorConfig::Cusum { f0, f1 } => Box::new(CusumDetector::new(*f0, *f1, threshold)?),
            DetectorConfig::Gcusum(cfg) => Box::new(GcusumDetector::new(*cfg, threshold)?),
            DetectorConfig::NoniidFull { f0, f1 } => {
                Box::new(NoniidFullDetector::new(*f0, *f1, threshold)?)
            }
            DetectorConfig::NoniidReset { f0, f1, window } => {
                Box::new(NoniidResetDetector::new(*f0, *f1, threshold, *window)?)
            }
            DetectorConfig::Deviation { stat, stride } => {
                Box::new(DeviationDetector::new(stat.clone(), threshold, *stride)?)
            }
        })
    }

    /// Offline run over a slice.
    pub fn run(&self, observations: &[f64], threshold: f64) -> Result<StoppingReport> {
        match self {
            DetectorConfig::Deviation { stat, stride } => {
                deviation_cusum_run(stat, observations, threshold, *stride)
            }
            _ => run_offline(self.online(threshold)?.as_mut(), observations),
        }
    }

    /// Maps a report time index to a 1-based sample index.
    pub fn sample_index(&self, step: usize) -> usize {
        match self {
            DetectorConfig::Deviation { stat, stride } => window_end(stat.window_length(), *stride, step),
            _ => step,
        }
    }
}
