//! Summary statistics `h` for the Deviation-CUSUM and baseline learning.
//!
//! A statistic looks at a window of the most recent `window_length`
//! observations (`X_{n-d}, ..., X_n`) and returns one real number whose
//! pre-change mean is `mu0`. Detection is one-sided: the detector reacts to
//! an increase of `E[h]` by more than `lambda`. Negate `h` upstream to watch
//! for decreases.

use crate::error::{invalid, Error, Result};
use crate::models::ParametricModel;
use crate::spectral::{periodogram, spectral_mass, Band, MIN_WINDOW};

#[derive(Debug, Clone, PartialEq)]
pub enum StatKind {
    /// `h = X_n`.
    Mean,
    /// `h = (X_n - center)^2`. `None` means zero-mean data when evaluating,
    /// and "learn the centre from the training data" in [`learn_baseline`].
    Variance { center: Option<f64> },
    /// `h = -log f0(X_n)`.
    Entropy { f0: Option<ParametricModel> },
    /// Periodogram mass of the window inside `band`.
    SpectralMass { band: Band },
}

impl StatKind {
    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Mean => "mean",
            StatKind::Variance { .. } => "variance",
            StatKind::Entropy { .. } => "entropy",
            StatKind::SpectralMass { .. } => "spectral",
        }
    }

    fn min_window(&self) -> usize {
        match self {
            StatKind::SpectralMass { .. } => MIN_WINDOW,
            _ => 1,
        }
    }

    /// `h` of a window whose length has already been checked.
    fn apply(&self, window: &[f64]) -> Result<f64> {
        let last = *window.last().ok_or(Error::EmptySample)?;
        match self {
            StatKind::Mean => Ok(last),
            StatKind::Variance { center } => {
                let z = last - center.unwrap_or(0.0);
                Ok(z * z)
            }
            StatKind::Entropy { f0 } => {
                let f0 = f0.ok_or_else(|| invalid("entropy statistic needs a pre-change model"))?;
                Ok(-f0.log_density(last, &window[..window.len() - 1])?)
            }
            StatKind::SpectralMass { band } => Ok(spectral_mass(&periodogram(window)?, band)),
        }
    }
}

/// A summary statistic together with its baseline mean and slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStatistic {
    kind: StatKind,
    window_length: usize,
    mu0: f64,
    lambda: f64,
}

impl SummaryStatistic {
    pub fn new(kind: StatKind, window_length: usize, mu0: f64, lambda: f64) -> Result<Self> {
        check_window(&kind, window_length)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!("lambda must be finite and > 0; got {lambda}")));
        }
        if !mu0.is_finite() {
            return Err(invalid(format!("mu0 must be finite; got {mu0}")));
        }
        Ok(Self {
            kind,
            window_length,
            mu0,
            lambda,
        })
    }

    pub fn kind(&self) -> &StatKind {
        &self.kind
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn evaluate(&self, window: &[f64]) -> Result<f64> {
        if window.len() != self.window_length {
            return Err(Error::WindowLength {
                expected: self.window_length,
                actual: window.len(),
            });
        }
        self.kind.apply(window)
    }
}

fn check_window(kind: &StatKind, window_length: usize) -> Result<()> {
    let min = kind.min_window();
    if window_length < min {
        return Err(invalid(format!(
            "{} statistic needs window_length >= {min}; got {window_length}",
            kind.name()
        )));
    }
    Ok(())
}

/// Baseline learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    /// The statistic with any learned quantity (variance centre) filled in.
    pub kind: StatKind,
    pub window_length: usize,
    pub mu0: f64,
    /// Standard error of `mu0`, treating window values as independent.
    pub std_error: f64,
    pub windows: usize,
}

impl Baseline {
    /// Slack heuristic for when no shift prior exists: three standard errors
    /// of `mu0`. Falls back to `floor` when the training data is degenerate.
    pub fn heuristic_lambda(&self, floor: f64) -> f64 {
        let l = 3.0 * self.std_error;
        if l.is_finite() && l > floor {
            l
        } else {
            floor
        }
    }

    pub fn into_statistic(self, lambda: f64) -> Result<SummaryStatistic> {
        SummaryStatistic::new(self.kind, self.window_length, self.mu0, lambda)
    }
}

/// Mean of `h` over all stride-spaced windows of `training`.
///
/// For `Variance { center: None }` the centre is first set to the training
/// sample mean, so `h = (X_n - mean)^2`.
pub fn learn_baseline(
    kind: &StatKind,
    training: &[f64],
    window_length: usize,
    stride: usize,
) -> Result<Baseline> {
    check_window(kind, window_length)?;
    if stride == 0 {
        return Err(invalid("stride must be >= 1"));
    }
    if training.len() < window_length {
        return Err(Error::InsufficientData {
            needed: window_length,
            available: training.len(),
        });
    }
    let kind = match kind {
        StatKind::Variance { center: None } => StatKind::Variance {
            center: Some(training.iter().sum::<f64>() / training.len() as f64),
        },
        other => other.clone(),
    };
    let values = (window_length..=training.len())
        .step_by(stride)
        .map(|end| kind.apply(&training[end - window_length..end]))
        .collect::<Result<Vec<_>>>()?;
    let m = values.len() as f64;
    let mu0 = values.iter().sum::<f64>() / m;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mu0).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        f64::NAN
    };
    Ok(Baseline {
        kind,
        window_length,
        mu0,
        std_error,
        windows: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn evaluate_examples() {
        let mean = SummaryStatistic::new(StatKind::Mean, 3, 0.0, 0.1).unwrap();
        assert_eq!(mean.evaluate(&[5.0, 1.0, 0.7]).unwrap(), 0.7);
        let var = SummaryStatistic::new(StatKind::Variance { center: None }, 2, 0.0, 0.1).unwrap();
        assert_eq!(var.evaluate(&[9.0, -2.0]).unwrap(), 4.0);
        let f0 = ParametricModel::bernoulli(0.5).unwrap();
        let ent = SummaryStatistic::new(StatKind::Entropy { f0: Some(f0) }, 1, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(ent.evaluate(&[1.0]).unwrap(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn evaluate_errors() {
        let mean = SummaryStatistic::new(StatKind::Mean, 3, 0.0, 0.1).unwrap();
        assert_eq!(
            mean.evaluate(&[1.0]),
            Err(Error::WindowLength { expected: 3, actual: 1 })
        );
        let ent = SummaryStatistic::new(StatKind::Entropy { f0: None }, 1, 0.0, 0.1).unwrap();
        assert!(matches!(ent.evaluate(&[1.0]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn construction_invariants() {
        assert!(SummaryStatistic::new(StatKind::Mean, 0, 0.0, 0.1).is_err());
        assert!(SummaryStatistic::new(StatKind::Mean, 1, 0.0, 0.0).is_err());
        let spec = StatKind::SpectralMass { band: Band::full() };
        assert!(SummaryStatistic::new(spec.clone(), 3, 0.0, 0.1).is_err());
        assert!(SummaryStatistic::new(spec, 4, 0.0, 0.1).is_ok());
    }

    #[test]
    fn spectral_statistic_uses_band() {
        let window: Vec<f64> = (0..8).map(|n| (PI * n as f64 / 2.0).cos()).collect();
        let near = StatKind::SpectralMass { band: Band::around(PI / 2.0, 0.1).unwrap() };
        let far = StatKind::SpectralMass { band: Band::new(0.0, 1.0).unwrap() };
        let a = SummaryStatistic::new(near, 8, 0.0, 0.1).unwrap().evaluate(&window).unwrap();
        let b = SummaryStatistic::new(far, 8, 0.0, 0.1).unwrap().evaluate(&window).unwrap();
        assert_abs_diff_eq!(a, 4.0, epsilon = 1e-12);
        assert!(b < 1e-12);
    }

    #[test]
    fn baseline_examples() {
        let b = learn_baseline(&StatKind::Mean, &[0.0; 40], 1, 1).unwrap();
        assert_eq!(b.mu0, 0.0);
        assert_eq!(b.windows, 40);

        let c = 1.7;
        let zero_mean = learn_baseline(&StatKind::Variance { center: Some(0.0) }, &[c; 30], 1, 1).unwrap();
        assert_abs_diff_eq!(zero_mean.mu0, c * c, epsilon = 1e-12);
        let centred = learn_baseline(&StatKind::Variance { center: None }, &[c; 30], 1, 1).unwrap();
        assert_abs_diff_eq!(centred.mu0, 0.0, epsilon = 1e-12);
        match centred.kind {
            StatKind::Variance { center: Some(m) } => assert_abs_diff_eq!(m, c, epsilon = 1e-12),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn baseline_windows_follow_stride() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        // windows of 4 ending at samples 4, 7, 10
        let b = learn_baseline(&StatKind::Mean, &xs, 4, 3).unwrap();
        assert_eq!(b.windows, 3);
        assert_abs_diff_eq!(b.mu0, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn baseline_needs_one_window() {
        assert!(matches!(
            learn_baseline(&StatKind::Mean, &[1.0, 2.0], 3, 1),
            Err(Error::InsufficientData { needed: 3, available: 2 })
        ));
        assert!(learn_baseline(&StatKind::Mean, &[1.0], 1, 0).is_err());
    }

    #[test]
    fn heuristic_lambda_floors_degenerate_training() {
        let b = learn_baseline(&StatKind::Mean, &[0.0; 10], 1, 1).unwrap();
        assert_eq!(b.heuristic_lambda(0.01), 0.01);
        let b = learn_baseline(&StatKind::Mean, &[0.0, 1.0, 0.0, 1.0], 1, 1).unwrap();
        assert_abs_diff_eq!(b.heuristic_lambda(0.01), 3.0 * (1.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-12);
    }
}
