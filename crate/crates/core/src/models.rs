//! Parametric observation models.
//!
//! Every detector in the crate is written against [`ParametricModel`], a
//! one-dimensional density family with a scalar parameter `theta`
//! (success probability, rate, mean, or AR(1) coefficient) and, for the two
//! Gaussian families, a known variance.
//!
//! The conditional density interface `log_density(x, history)` covers both
//! the iid families (history ignored) and the AR(1) Gaussian model, whose
//! conditional mean is `coef * history.last()` (zero for an empty history).

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};

/// Bernoulli probabilities are clamped to `[BERNOULLI_EPS, 1 - BERNOULLI_EPS]`.
pub const BERNOULLI_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Poisson,
    GaussianMean,
    #[serde(rename = "ar1", alias = "ar1_gaussian")]
    Ar1Gaussian,
}

impl Family {
    /// True for the families whose observations are independent given theta.
    pub fn is_iid(self) -> bool {
        !matches!(self, Family::Ar1Gaussian)
    }

    pub(crate) fn check_support(self, x: f64) -> Result<()> {
        let ok = match self {
            Family::Bernoulli => x == 0.0 || x == 1.0,
            Family::Poisson => x.is_finite() && x >= 0.0 && x.fract() == 0.0,
            Family::GaussianMean | Family::Ar1Gaussian => x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self,
                value: x,
            })
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Bernoulli => "Bernoulli",
            Family::Poisson => "Poisson",
            Family::GaussianMean => "GaussianMean",
            Family::Ar1Gaussian => "AR1Gaussian",
        };
        f.write_str(name)
    }
}

/// A validated member of one of the supported families.
///
/// Fields are private so the invariants hold for every value: Bernoulli `p`
/// is clamped, Poisson rates and variances are positive, and the AR(1)
/// coefficient is strictly inside (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParametricModel {
    family: Family,
    theta: f64,
    variance: f64,
}

impl ParametricModel {
    /// Builds a model from its family, scalar parameter and variance. The
    /// variance is only meaningful for the Gaussian families and is stored as
    /// 1.0 otherwise.
    pub fn new(family: Family, theta: f64, variance: f64) -> Result<Self> {
        match family {
            Family::Bernoulli => Self::bernoulli(theta),
            Family::Poisson => Self::poisson(theta),
            Family::GaussianMean => Self::gaussian_mean(theta, variance),
            Family::Ar1Gaussian => Self::ar1_gaussian(theta, variance),
        }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("Bernoulli p must lie in [0, 1]; got {p}")));
        }
        Ok(Self {
            family: Family::Bernoulli,
            theta: p.clamp(BERNOULLI_EPS, 1.0 - BERNOULLI_EPS),
            variance: 1.0,
        })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid(format!("Poisson rate must be finite and > 0; got {rate}")));
        }
        Ok(Self {
            family: Family::Poisson,
            theta: rate,
            variance: 1.0,
        })
    }

    pub fn gaussian_mean(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(invalid(format!("Gaussian mean must be finite; got {mean}")));
        }
        check_variance(variance)?;
        Ok(Self {
            family: Family::GaussianMean,
            theta: mean,
            variance,
        })
    }

    pub fn ar1_gaussian(coef: f64, variance: f64) -> Result<Self> {
        if !(coef.is_finite() && coef.abs() < 1.0) {
            return Err(invalid(format!("AR(1) coefficient must satisfy |a| < 1; got {coef}")));
        }
        check_variance(variance)?;
        Ok(Self {
            family: Family::Ar1Gaussian,
            theta: coef,
            variance,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The scalar parameter: p, rate, mean, or AR(1) coefficient.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Same family and variance, different scalar parameter.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.family, theta, self.variance)
    }

    /// `log f(x | history; theta)`.
    pub fn log_density(&self, x: f64, history: &[f64]) -> Result<f64> {
        self.family.check_support(x)?;
        Ok(match self.family {
            Family::Bernoulli => {
                if x == 1.0 {
                    self.theta.ln()
                } else {
                    (1.0 - self.theta).ln()
                }
            }
            Family::Poisson => x * self.theta.ln() - self.theta - ln_factorial(x as u64),
            Family::GaussianMean => gaussian_log_pdf(x, self.theta, self.variance),
            Family::Ar1Gaussian => {
                let mean = self.theta * history.last().copied().unwrap_or(0.0);
                gaussian_log_pdf(x, mean, self.variance)
            }
        })
    }

    /// Draws one observation. `prev` is the previous value of the path and
    /// is only used by the AR(1) model.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, prev: f64) -> f64 {
        match self.family {
            Family::Bernoulli => {
                let coin = Bernoulli::new(self.theta).expect("clamped probability");
                if coin.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => Poisson::new(self.theta)
                .expect("validated rate")
                .sample(rng),
            Family::GaussianMean => Normal::new(self.theta, self.variance.sqrt())
                .expect("validated variance")
                .sample(rng),
            Family::Ar1Gaussian => {
                let noise: f64 = Normal::new(0.0, self.variance.sqrt())
                    .expect("validated variance")
                    .sample(rng);
                self.theta * prev + noise
            }
        }
    }
}

fn check_variance(variance: f64) -> Result<()> {
    if variance.is_finite() && variance > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("variance must be finite and > 0; got {variance}")))
    }
}

fn gaussian_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - z * z / (2.0 * variance)
}

/// A closed interval of the scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    lower: f64,
    upper: f64,
}

impl ParameterSet {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(invalid(format!(
                "parameter interval needs lower <= upper; got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn singleton(value: f64) -> Result<Self> {
        Self::new(value, value)
    }

    /// The whole admissible parameter range of a family.
    pub fn full(family: Family) -> Self {
        let (lower, upper) = match family {
            Family::Bernoulli => (0.0, 1.0),
            Family::Poisson => (f64::MIN_POSITIVE, f64::MAX),
            Family::GaussianMean => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Ar1Gaussian => (-1.0 + f64::EPSILON, 1.0 - f64::EPSILON),
        };
        Self { lower, upper }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }

    pub fn project(&self, theta: f64) -> f64 {
        theta.clamp(self.lower, self.upper)
    }

    pub fn is_disjoint(&self, other: &ParameterSet) -> bool {
        self.upper < other.lower || other.upper < self.lower
    }

    /// Checks that the interval lies inside the family's parameter range.
    pub fn validate_for(&self, family: Family) -> Result<()> {
        let ok = match family {
            Family::Bernoulli => self.lower >= 0.0 && self.upper <= 1.0,
            Family::Poisson => self.lower > 0.0 && self.upper.is_finite(),
            Family::GaussianMean => true,
            Family::Ar1Gaussian => self.lower > -1.0 && self.upper < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "interval [{}, {}] is outside the {family} parameter range",
                self.lower, self.upper
            )))
        }
    }
}

/// `log f1(x | history) - log f0(x | history)`.
pub fn log_likelihood_ratio(
    f0: &ParametricModel,
    f1: &ParametricModel,
    x: f64,
    history: &[f64],
) -> Result<f64> {
    same_family(f0, f1)?;
    Ok(f1.log_density(x, history)? - f0.log_density(x, history)?)
}

/// Closed-form `D(f || g)` for the iid families.
pub fn kl_divergence(f: &ParametricModel, g: &ParametricModel) -> Result<f64> {
    same_family(f, g)?;
    let d = match f.family {
        Family::Bernoulli => {
            let (p, q) = (f.theta, g.theta);
            p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
        }
        Family::Poisson => {
            let (a, b) = (f.theta, g.theta);
            a * (a / b).ln() - a + b
        }
        Family::GaussianMean => {
            let dm = f.theta - g.theta;
            0.5 * ((g.variance / f.variance).ln() + (f.variance + dm * dm) / g.variance - 1.0)
        }
        Family::Ar1Gaussian => {
            return Err(Error::UnsupportedFamily {
                family: f.family,
                operation: "kl_divergence",
            })
        }
    };
    // Rounding can leave tiny negative values for nearly equal parameters.
    Ok(d.max(0.0))
}

/// Constrained maximum-likelihood estimate of the scalar parameter.
///
/// For the one-dimensional exponential families handled here the
/// log-likelihood is unimodal in theta, so the constrained maximiser is the
/// sample mean projected onto the interval.
pub fn mle(family: Family, samples: &[f64], constraint: &ParameterSet) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !family.is_iid() {
        return Err(Error::UnsupportedFamily {
            family,
            operation: "mle",
        });
    }
    constraint.validate_for(family)?;
    for &x in samples {
        family.check_support(x)?;
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(constraint.project(mean))
}

/// The generator behind every random draw: ChaCha8 keyed by `seed`, with
/// `stream` selecting an independent substream (one per Monte Carlo run).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` draws from `model`; AR(1) paths start from 0.
pub fn sample(model: &ParametricModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    sample_with(model, n, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(model: &ParametricModel, n: usize, rng: &mut R) -> Vec<f64> {
    let mut prev = 0.0;
    (0..n)
        .map(|_| {
            prev = model.draw(rng, prev);
            prev
        })
        .collect()
}

fn same_family(a: &ParametricModel, b: &ParametricModel) -> Result<()> {
    if a.family == b.family {
        Ok(())
    } else {
        Err(Error::FamilyMismatch {
            left: a.family,
            right: b.family,
        })
    }
}
