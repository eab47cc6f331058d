//! Brute-force reference computations shared by the integration and
//! acceptance tests. Nothing here calls the detector implementations.

#![allow(dead_code)]

use std::f64::consts::PI;

pub fn gaussian_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (2.0 * PI * variance).ln() - (x - mean).powi(2) / (2.0 * variance)
}

/// `ln x!` by direct summation.
pub fn ln_factorial(x: u64) -> f64 {
    (2..=x).map(|i| (i as f64).ln()).sum()
}

#[derive(Debug, Clone, Copy)]
pub enum IidDensity {
    Bernoulli(f64),
    Poisson(f64),
    Gaussian(f64, f64),
}

impl IidDensity {
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            IidDensity::Bernoulli(p) => {
                if x == 1.0 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            IidDensity::Poisson(l) => x * l.ln() - l - ln_factorial(x as u64),
            IidDensity::Gaussian(m, v) => gaussian_log_pdf(x, m, v),
        }
    }
}

/// `W_n = max_{1<=k<=n+1} sum_{i=k}^n llr_i`, evaluated independently for
/// every `n` by accumulating each candidate segment backwards from `n`.
pub fn maxform_path(llrs: &[f64]) -> Vec<f64> {
    (1..=llrs.len())
        .map(|n| {
            let mut best = 0.0f64; // k = n + 1, empty sum
            let mut sum = 0.0;
            for k in (1..=n).rev() {
                sum += llrs[k - 1];
                best = best.max(sum);
            }
            best
        })
        .collect()
}

/// Windowed max-form without the `k = n + 1` candidate:
/// `max_{max(1, n-w+1) <= k <= n} sum_{i=k}^n llr_i`.
pub fn windowed_maxform_no_floor(llrs: &[f64], window: usize) -> Vec<f64> {
    (1..=llrs.len())
        .map(|n| {
            let first = if n > window { n - window + 1 } else { 1 };
            (first..=n)
                .map(|k| llrs[k - 1..n].iter().sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Conditioning on the full past: `W_n = max_k sum_{i=k}^n [l1 - l0]` with
/// `l(X_i | X_1..X_{i-1}) = N(a X_{i-1}, v)` and `X_0 = 0`.
pub fn ar1_fullhistory_path(xs: &[f64], a0: f64, a1: f64, v: f64) -> Vec<f64> {
    let llr = |i: usize| {
        let prev = if i == 0 { 0.0 } else { xs[i - 1] };
        gaussian_log_pdf(xs[i], a1 * prev, v) - gaussian_log_pdf(xs[i], a0 * prev, v)
    };
    let incs: Vec<f64> = (0..xs.len()).map(llr).collect();
    maxform_path(&incs)
}

/// Conditioning restarted at each candidate `k`: the first post-change term
/// has conditional mean 0.
pub fn ar1_reset_path(xs: &[f64], a0: f64, a1: f64, v: f64) -> Vec<f64> {
    (1..=xs.len())
        .map(|n| {
            (1..=n + 1)
                .map(|k| {
                    (k..=n)
                        .map(|i| {
                            let prev = if i == k { 0.0 } else { xs[i - 2] };
                            let x = xs[i - 1];
                            gaussian_log_pdf(x, a1 * prev, v) - gaussian_log_pdf(x, a0 * prev, v)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Direct O(d^2) DFT power `|X_j|^2` of the mean-removed window, two-sided.
pub fn direct_dft_power(window: &[f64]) -> Vec<f64> {
    let d = window.len();
    let mean = window.iter().sum::<f64>() / d as f64;
    (0..d)
        .map(|j| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, x) in window.iter().enumerate() {
                let ang = -2.0 * PI * (j * n) as f64 / d as f64;
                re += (x - mean) * ang.cos();
                im += (x - mean) * ang.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// `d` times the 1/d-normalised variance, i.e. `sum (x - mean)^2`.
pub fn centred_sum_of_squares(window: &[f64]) -> f64 {
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    window.iter().map(|x| (x - mean).powi(2)).sum()
}

/// Grid over `[lo, hi]` with the given step, endpoints included.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if *g.last().unwrap() < hi {
        g.push(hi);
    }
    g
}

/// Bernoulli GLR `G_n` by grid search over both parameters, all `k <= n`.
pub fn bernoulli_glr_grid(xs: &[f64], theta0: (f64, f64), theta1: (f64, f64), step: f64) -> f64 {
    let loglik = |seg: &[f64], p: f64| -> f64 { seg.iter().map(|&x| IidDensity::Bernoulli(p).log_pdf(x)).sum() };
    let best = |seg: &[f64], set: (f64, f64)| -> f64 {
        if seg.is_empty() {
            return 0.0;
        }
        grid(set.0, set.1, step)
            .into_iter()
            .map(|p| loglik(seg, p))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let n = xs.len();
    let null = best(xs, theta0);
    (1..=n)
        .map(|k| best(&xs[..k - 1], theta0) + best(&xs[k - 1..], theta1) - null)
        .fold(f64::NEG_INFINITY, f64::max)
}
