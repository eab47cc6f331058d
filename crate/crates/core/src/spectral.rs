//! Windowed spectrum estimates for the spectral summary statistic.
//!
//! The estimator is the mean-removed raw periodogram of the window. Power is
//! normalised as `|DFT_j|^2 / d` and folded onto the one-sided grid
//! `nu_j = 2*pi*j/d`, `j = 0..=d/2`, doubling every bin that has a mirror
//! image. With this convention the one-sided power sums to
//! `sum (x_i - mean)^2`, i.e. `d` times the (1/d-normalised) variance.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest window accepted by [`periodogram`].
pub const MIN_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub window_length: usize,
}

impl SpectrumEstimate {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// A closed frequency interval inside `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    lo: f64,
    hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        // allow a hair of slack so `k * pi / m` style endpoints round-trip
        let slack = 1e-12;
        if !(lo.is_finite() && hi.is_finite()) || lo < -slack || hi > PI + slack {
            return Err(invalid(format!("band [{lo}, {hi}] must lie inside [0, pi]")));
        }
        if lo > hi {
            return Err(invalid(format!("band [{lo}, {hi}] is empty")));
        }
        Ok(Self {
            lo: lo.max(0.0),
            hi: hi.min(PI),
        })
    }

    pub fn full() -> Self {
        Self { lo: 0.0, hi: PI }
    }

    /// Band of `half_width` radians either side of `centre`, clipped to `[0, pi]`.
    pub fn around(centre: f64, half_width: f64) -> Result<Self> {
        Self::new((centre - half_width).max(0.0), (centre + half_width).min(PI))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, nu: f64) -> bool {
        self.lo <= nu && nu <= self.hi
    }
}

impl Default for Band {
    fn default() -> Self {
        Self::full()
    }
}

pub fn periodogram(window: &[f64]) -> Result<SpectrumEstimate> {
    let d = window.len();
    if d < MIN_WINDOW {
        return Err(Error::InsufficientData {
            needed: MIN_WINDOW,
            available: d,
        });
    }
    if let Some(&bad) = window.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let mean = window.iter().sum::<f64>() / d as f64;
    let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(d).process(&mut buf);

    let half = d / 2;
    let scale = d as f64;
    let (frequencies, power) = (0..=half)
        .map(|j| {
            let mirrored = j != 0 && 2 * j != d;
            let p = buf[j].norm_sqr() / scale;
            (2.0 * PI * j as f64 / scale, if mirrored { 2.0 * p } else { p })
        })
        .unzip();
    Ok(SpectrumEstimate {
        frequencies,
        power,
        window_length: d,
    })
}

/// Sum of power over grid frequencies inside `band`, endpoints included.
pub fn spectral_mass(estimate: &SpectrumEstimate, band: &Band) -> f64 {
    estimate
        .frequencies
        .iter()
        .zip(&estimate.power)
        .filter(|(nu, _)| band.contains(**nu))
        .map(|(_, p)| p)
        .sum()
}
