//! Lagged covariance operators and kernel long-run covariance estimates.
//!
//! Kernels follow the convention `K(0) = 1`, so the lag-0 covariance always
//! enters the long-run estimate with full weight.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::hilbert::{FunctionalSample, OperatorMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `1{|x| <= a}`.
    FlatTop,
    /// Triangle `max(0, 1 - |x|/a)`.
    Bartlett,
    Parzen,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flattop" | "flat-top" => Ok(Self::FlatTop),
            "bartlett" | "bartlett-triangle" => Ok(Self::Bartlett),
            "parzen" => Ok(Self::Parzen),
            other => Err(Error::Parameter(format!("unknown kernel '{other}'"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FlatTop => "flattop",
            Self::Bartlett => "bartlett",
            Self::Parzen => "parzen",
        })
    }
}

/// A symmetric lag window with support `[-a, a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub support: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            kind: KernelKind::FlatTop,
            support: 1.0,
        }
    }
}

impl KernelSpec {
    pub fn new(kind: KernelKind, support: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::Parameter(format!(
                "kernel support must be positive, got {support}"
            )));
        }
        Ok(Self { kind, support })
    }

    pub fn flat_top() -> Self {
        Self::default()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = x.abs() / self.support;
        if u > 1.0 {
            return 0.0;
        }
        match self.kind {
            KernelKind::FlatTop => 1.0,
            KernelKind::Bartlett => 1.0 - u,
            KernelKind::Parzen => {
                if u <= 0.5 {
                    1.0 - 6.0 * u * u + 6.0 * u * u * u
                } else {
                    2.0 * (1.0 - u).powi(3)
                }
            }
        }
    }

    /// `int K(x) dx` over the real line.
    pub fn integral(&self) -> f64 {
        let a = self.support;
        match self.kind {
            KernelKind::FlatTop => 2.0 * a,
            KernelKind::Bartlett => a,
            KernelKind::Parzen => 0.75 * a,
        }
    }

    /// Largest lag `r >= 0` with `|r/h| <= a`.
    pub fn max_lag(&self, h: usize) -> usize {
        let inside = |r: usize| r as f64 / h as f64 / self.support <= 1.0;
        let mut r = (self.support * h as f64).floor() as usize;
        while inside(r + 1) {
            r += 1;
        }
        while r > 0 && !inside(r) {
            r -= 1;
        }
        r
    }

    /// `sum_{r=-n}^{n} K(r/h)`.
    pub fn weight_sum(&self, n: usize, h: usize) -> f64 {
        let top = self.max_lag(h).min(n);
        1.0 + 2.0
            * (1..=top)
                .map(|r| self.eval(r as f64 / h as f64))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    Fixed(usize),
    /// `h = floor(n^exponent)`.
    PowerLaw(f64),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        Self::PowerLaw(0.2)
    }
}

impl BandwidthRule {
    /// Bandwidth for a sample of size `n`, clamped to `1 <= h < n`.
    pub fn bandwidth(&self, n: usize) -> Result<usize> {
        if n < 2 {
            return Err(Error::SampleSize {
                required: 2,
                got: n,
            });
        }
        let raw = match *self {
            Self::Fixed(h) => h,
            Self::PowerLaw(e) => {
                if !(e > 0.0 && e < 1.0) {
                    return Err(Error::Parameter(format!(
                        "bandwidth exponent must lie in (0, 1), got {e}"
                    )));
                }
                // the epsilon keeps exact powers such as 32^(1/5) from flooring down
                ((n as f64).powf(e) + 1e-9).floor() as usize
            }
        };
        Ok(raw.clamp(1, n - 1))
    }
}

/// Subtracts the sample mean curve from every observation.
pub fn demean(sample: &FunctionalSample) -> FunctionalSample {
    let mean = sample.mean();
    let mut coeffs = sample.coeffs().clone();
    for mut row in coeffs.row_iter_mut() {
        row -= mean.transpose();
    }
    FunctionalSample::new(coeffs, sample.basis()).expect("demeaning preserves shape")
}

fn lag_product(centered: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = centered.nrows();
    let m = n - r;
    centered.rows(0, m).tr_mul(&centered.rows(r, m)) / n as f64
}

/// Empirical lag-`r` covariance operator
/// `(1/n) sum_i (eta_i - mean) (x) (eta_{i+r} - mean)`; negative lags give the
/// transpose.
pub fn lag_cov(sample: &FunctionalSample, r: isize) -> Result<OperatorMatrix> {
    let n = sample.n();
    if r.unsigned_abs() >= n {
        return Err(Error::Lag { lag: r, n });
    }
    let centered = demean(sample).into_coeffs();
    let c = lag_product(&centered, r.unsigned_abs());
    OperatorMatrix::new(if r < 0 { c.transpose() } else { c })
}

/// Bartlett-type long-run covariance `sum_r K(r/h) C_r`, symmetrized.
pub fn long_run_cov(
    sample: &FunctionalSample,
    kernel: &KernelSpec,
    bandwidth: &BandwidthRule,
) -> Result<OperatorMatrix> {
    let h = bandwidth.bandwidth(sample.n())?;
    long_run_cov_with_bandwidth(sample, kernel, h)
}

pub fn long_run_cov_with_bandwidth(
    sample: &FunctionalSample,
    kernel: &KernelSpec,
    h: usize,
) -> Result<OperatorMatrix> {
    sample.require(2)?;
    if h == 0 {
        return Err(Error::Parameter("bandwidth must be at least 1".into()));
    }
    let n = sample.n();
    let centered = demean(sample).into_coeffs();
    let mut acc = lag_product(&centered, 0);
    for r in 1..n.min(kernel.max_lag(h) + 1) {
        let w = kernel.eval(r as f64 / h as f64);
        if w == 0.0 {
            continue;
        }
        let c = lag_product(&centered, r);
        acc += (&c + c.transpose()) * w;
    }
    Ok(OperatorMatrix::new(acc)?.symmetrize())
}
