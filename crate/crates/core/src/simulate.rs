//! Synthetic data: single change-point sequences and trial-structured
//! binned spike experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::{stream_rng, ParametricModel};

/// A single change from `pre` to `post` at the 1-based index `change_point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeSpec {
    pub pre: ParametricModel,
    pub post: ParametricModel,
    /// First post-change index; `None` means the change never happens.
    pub change_point: Option<usize>,
    pub length: usize,
}

impl ChangeSpec {
    pub fn new(
        pre: ParametricModel,
        post: ParametricModel,
        change_point: Option<usize>,
        length: usize,
    ) -> Result<Self> {
        if pre.family() != post.family() {
            return Err(invalid("pre- and post-change models must share a family"));
        }
        if let Some(g) = change_point {
            if g == 0 || g > length + 1 {
                return Err(invalid(format!(
                    "change point must lie in 1..={}; got {g}",
                    length + 1
                )));
            }
        }
        Ok(Self {
            pre,
            post,
            change_point,
            length,
        })
    }

    /// Model in force at the 1-based time `t`.
    pub fn model_at(&self, t: usize) -> &ParametricModel {
        match self.change_point {
            Some(g) if t >= g => &self.post,
            _ => &self.pre,
        }
    }
}

pub fn gen_iid_change(spec: &ChangeSpec, seed: u64) -> Vec<f64> {
    gen_iid_change_with(spec, &mut stream_rng(seed, 0))
}

/// Same as [`gen_iid_change`] with a caller-supplied generator. AR(1) paths
/// continue across the change point.
pub fn gen_iid_change_with<R: Rng + ?Sized>(spec: &ChangeSpec, rng: &mut R) -> Vec<f64> {
    let mut prev = 0.0;
    (1..=spec.length)
        .map(|t| {
            prev = spec.model_at(t).draw(rng, prev);
            prev
        })
        .collect()
}

/// Post-change firing pattern after the cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    /// Elevated firing from the cue bin onwards.
    Immediate,
    /// Elevated firing from `cue_bin + offset_bins` onwards.
    Delayed { offset_bins: usize },
    /// Every `period_bins`-th bin after the cue fires at the post rate; the
    /// remaining post-cue bins fire at a rate chosen so the expected spike
    /// count of the trial matches the baseline.
    Periodic { period_bins: usize },
}

/// Per-trial metadata carried alongside the spike matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    /// Bin width in seconds.
    pub bin_width: f64,
    /// 1-based index of the first trial with post-change behaviour.
    pub change_trial: usize,
    pub cue_bin: usize,
    pub response: Response,
}

/// A trials x bins binary matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrialSet {
    trials: usize,
    bins: usize,
    spikes: Vec<u8>,
    pub meta: TrialMeta,
}

impl SpikeTrialSet {
    pub fn new(trials: usize, bins: usize, spikes: Vec<u8>, meta: TrialMeta) -> Result<Self> {
        if trials == 0 || bins == 0 {
            return Err(invalid("spike set needs at least one trial and one bin"));
        }
        if spikes.len() != trials * bins {
            return Err(invalid(format!(
                "expected {} spike entries, got {}",
                trials * bins,
                spikes.len()
            )));
        }
        if spikes.iter().any(|&s| s > 1) {
            return Err(invalid("spike entries must be 0 or 1"));
        }
        if meta.change_trial == 0 || meta.change_trial > trials + 1 {
            return Err(invalid(format!(
                "change_trial must lie in 1..={}; got {}",
                trials + 1,
                meta.change_trial
            )));
        }
        if meta.cue_bin >= bins {
            return Err(invalid(format!("cue_bin {} must be < bins {bins}", meta.cue_bin)));
        }
        Ok(Self {
            trials,
            bins,
            spikes,
            meta,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Row of the 0-based trial `i`.
    pub fn trial(&self, i: usize) -> &[u8] {
        &self.spikes[i * self.bins..(i + 1) * self.bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.spikes.chunks(self.bins)
    }

    /// Row-major flattening, first trial first.
    pub fn concat_trials(&self) -> Vec<f64> {
        self.spikes.iter().map(|&s| f64::from(s)).collect()
    }

    /// Flattening of the first `n` trials.
    pub fn concat_first(&self, n: usize) -> Vec<f64> {
        self.spikes[..n.min(self.trials) * self.bins]
            .iter()
            .map(|&s| f64::from(s))
            .collect()
    }
}

/// Parameters of a synthetic trial experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialExperiment {
    pub trials: usize,
    pub bins: usize,
    pub bin_width: f64,
    pub baseline_rate: f64,
    pub post_rate: f64,
    pub change_trial: usize,
    pub cue_bin: usize,
    pub response: Response,
}

impl Default for TrialExperiment {
    /// 45 trials, change from trial 16 on, 100 bins of 10 ms, cue at mid-trial.
    fn default() -> Self {
        Self {
            trials: 45,
            bins: 100,
            bin_width: 0.01,
            baseline_rate: 0.05,
            post_rate: 0.25,
            change_trial: 16,
            cue_bin: 50,
            response: Response::Immediate,
        }
    }
}

impl TrialExperiment {
    /// Delayed response starting halfway through the post-cue window.
    pub fn default_delay(&self) -> Response {
        Response::Delayed {
            offset_bins: (self.bins - self.cue_bin.min(self.bins)) / 2,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, r) in [("baseline_rate", self.baseline_rate), ("post_rate", self.post_rate)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1); got {r}")));
            }
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(invalid(format!("bin_width must be > 0; got {}", self.bin_width)));
        }
        match self.response {
            Response::Delayed { offset_bins } if self.cue_bin + offset_bins >= self.bins => Err(invalid(
                format!("delayed response starts at bin {} beyond the trial", self.cue_bin + offset_bins),
            )),
            Response::Periodic { period_bins } if period_bins < 2 => {
                Err(invalid(format!("period must be >= 2 bins; got {period_bins}")))
            }
            _ => Ok(()),
        }
    }

    /// Firing probability of every bin in a post-change trial.
    fn post_profile(&self) -> Result<Vec<f64>> {
        let (cue, bins, base, post) = (self.cue_bin, self.bins, self.baseline_rate, self.post_rate);
        let mut profile = vec![base; bins];
        match self.response {
            Response::Immediate => profile[cue..].fill(post),
            Response::Delayed { offset_bins } => profile[cue + offset_bins..].fill(post),
            Response::Periodic { period_bins } => {
                let window = bins - cue;
                let on = window.div_ceil(period_bins);
                let off = window - on;
                let excess = post * on as f64 - base * window as f64;
                let off_rate = if off == 0 { 0.0 } else { -excess / off as f64 };
                if off_rate < 0.0 && excess > 1.0 {
                    return Err(invalid(format!(
                        "periodic response cannot match the baseline rate: {on} bins at {post} \
                         exceed the baseline count {} by {excess:.3} spikes",
                        base * window as f64
                    )));
                }
                if off == 0 && excess.abs() > 1.0 {
                    return Err(invalid("periodic response leaves no bins to rebalance the rate"));
                }
                let off_rate = off_rate.clamp(0.0, 1.0);
                for (i, p) in profile[cue..].iter_mut().enumerate() {
                    *p = if i % period_bins == 0 { post } else { off_rate };
                }
            }
        }
        Ok(profile)
    }
}

pub fn gen_trial_experiment(config: &TrialExperiment, seed: u64) -> Result<SpikeTrialSet> {
    config.validate()?;
    let meta = TrialMeta {
        bin_width: config.bin_width,
        change_trial: config.change_trial,
        cue_bin: config.cue_bin,
        response: config.response,
    };
    // validates change_trial and cue_bin before any sampling
    SpikeTrialSet::new(config.trials, config.bins, vec![0; config.trials * config.bins], meta)?;

    let baseline = vec![config.baseline_rate; config.bins];
    let post = config.post_profile()?;
    let mut rng = stream_rng(seed, 0);
    let mut spikes = Vec::with_capacity(config.trials * config.bins);
    for t in 1..=config.trials {
        let profile = if t >= config.change_trial { &post } else { &baseline };
        spikes.extend(profile.iter().map(|&p| u8::from(rng.random::<f64>() < p)));
    }
    SpikeTrialSet::new(config.trials, config.bins, spikes, meta)
}

/// Expected spike count of one trial under the given profile kind.
pub fn expected_trial_count(config: &TrialExperiment, post_change: bool) -> Result<f64> {
    config.validate()?;
    if post_change {
        Ok(config.post_profile()?.iter().sum())
    } else {
        Ok(config.baseline_rate * config.bins as f64)
    }
}
