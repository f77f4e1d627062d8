//! Projected CUSUM statistics.
//!
//! For a sample `eta_1, ..., eta_n` the centered functional partial sums are
//! `S_k = sum_{i<=k} (eta_i - mean) / sqrt(n)`. The statistic projects them on
//! the leading `d` eigenvectors of a covariance estimate, whitens with the
//! absolute eigenvalues and takes the maximum Euclidean norm over
//! `1 <= k < n`. The change-aligned variant replaces the first eigenvector by
//! a blend of itself and the largest partial sum.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::covariance::{lag_cov, long_run_cov, BandwidthRule, KernelSpec};
use crate::hilbert::{FunctionalSample, OperatorMatrix};
use crate::spectral::{check_spectrum, eig_sym, truncated_invsqrt, EigenSystem};
use crate::{Error, Result};

/// Covariance operator whose eigenvectors define the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Lag-0 covariance (standard principal components).
    #[default]
    Cov0,
    /// Kernel long-run covariance (generalized principal components).
    Bartlett,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cov0" => Ok(Self::Cov0),
            "bartlett" => Ok(Self::Bartlett),
            other => Err(Error::Parameter(format!("unknown estimator '{other}'"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cov0 => "cov0",
            Self::Bartlett => "bartlett",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumConfig {
    pub d: usize,
    /// Alignment exponent, `0 < gamma < 1/2`.
    pub gamma: f64,
    pub aligned: bool,
    pub estimator: Estimator,
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthRule,
}

pub const DEFAULT_GAMMA: f64 = 0.4;

impl Default for CusumConfig {
    fn default() -> Self {
        Self {
            d: 1,
            gamma: DEFAULT_GAMMA,
            aligned: false,
            estimator: Estimator::Cov0,
            kernel: KernelSpec::default(),
            bandwidth: BandwidthRule::default(),
        }
    }
}

impl CusumConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            ..Self::default()
        }
    }

    pub fn aligned(mut self, aligned: bool) -> Self {
        self.aligned = aligned;
        self
    }

    pub fn estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.d == 0 || self.d > p {
            return Err(Error::Dimension {
                expected: p,
                got: self.d,
            });
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::Parameter(format!(
                "gamma must lie in (0, 1/2), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Value of the statistic. `Infinite` is the flagged state used when one of
/// the leading eigenvalue estimates is numerically zero; it is written as the
/// string `inf` in reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Finite(f64),
    Infinite,
}

impl Statistic {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Finite(v) => v,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    pub fn exceeds(&self, threshold: f64) -> bool {
        match *self {
            Self::Finite(v) => v > threshold,
            Self::Infinite => true,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Statistic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Finite(v) => s.serialize_f64(v),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Statistic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(Self::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid statistic '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CusumResult {
    pub statistic: Statistic,
    /// Scores for `k = 1, ..., n-1` (empty for the infinite sentinel).
    pub trace: Vec<f64>,
    /// Maximizing index, 1-based, smallest on ties.
    pub k_hat: usize,
    pub d: usize,
    pub aligned: bool,
    pub estimator: Estimator,
    pub critical_value: Option<f64>,
    pub alpha: Option<f64>,
    pub reject: Option<bool>,
}

/// JSON report layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumReport {
    pub statistic: Statistic,
    pub k_hat: usize,
    pub d: usize,
    pub aligned: bool,
    pub estimator: Estimator,
    pub critical_value: Option<f64>,
    pub alpha: Option<f64>,
    pub reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<f64>>,
}

impl CusumResult {
    pub fn report(&self, include_trace: bool) -> CusumReport {
        CusumReport {
            statistic: self.statistic,
            k_hat: self.k_hat,
            d: self.d,
            aligned: self.aligned,
            estimator: self.estimator,
            critical_value: self.critical_value,
            alpha: self.alpha,
            reject: self.reject,
            trace: include_trace.then(|| self.trace.clone()),
        }
    }
}

/// Centered partial sums; row `k-1` holds `S_k` for `k = 1, ..., n`.
pub fn partial_sums(sample: &FunctionalSample) -> Result<DMatrix<f64>> {
    sample.require(2)?;
    let n = sample.n();
    let mean = sample.mean().transpose();
    let norm = (n as f64).sqrt();
    let mut out = DMatrix::zeros(n, sample.p());
    let mut acc = nalgebra::RowDVector::zeros(sample.p());
    for i in 0..n {
        acc += sample.coeffs().row(i) - &mean;
        out.set_row(i, &(&acc / norm));
    }
    Ok(out)
}

/// Index of the largest partial sum (by norm) and `u = S_k / sqrt(n)`.
fn argmax_rows(partial: &DMatrix<f64>) -> (usize, DVector<f64>) {
    let n = partial.nrows();
    let mut best = 0;
    let mut best_norm = f64::NEG_INFINITY;
    for k in 0..n - 1 {
        let norm = partial.row(k).norm();
        if norm > best_norm {
            best = k;
            best_norm = norm;
        }
    }
    (best + 1, partial.row(best).transpose() / (n as f64).sqrt())
}

/// `(k_hat, u_hat)` with `||S_{k_hat}||` maximal over `1 <= k < n`.
pub fn argmax_partial_sum(sample: &FunctionalSample) -> Result<(usize, DVector<f64>)> {
    Ok(argmax_rows(&partial_sums(sample)?))
}

/// The covariance estimate selected by `config.estimator`.
pub fn estimate_operator(
    sample: &FunctionalSample,
    config: &CusumConfig,
) -> Result<OperatorMatrix> {
    match config.estimator {
        Estimator::Cov0 => lag_cov(sample, 0),
        Estimator::Bartlett => long_run_cov(sample, &config.kernel, &config.bandwidth),
    }
}

/// `v1' = (v1 / n^gamma + s u) / ||v1 / n^gamma + s u||` with
/// `s = sign <v1, u>` and `sign(0) = +1`.
pub fn align_first_component(
    v1: &DVector<f64>,
    u_hat: &DVector<f64>,
    gamma: f64,
    n: usize,
) -> Result<DVector<f64>> {
    if v1.len() != u_hat.len() {
        return Err(Error::Dimension {
            expected: v1.len(),
            got: u_hat.len(),
        });
    }
    if (v1.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Parameter(format!(
            "first component must have unit norm, got {}",
            v1.norm()
        )));
    }
    if u_hat.iter().all(|v| *v == 0.0) {
        return Ok(v1.clone());
    }
    let sign = if v1.dot(u_hat) >= 0.0 { 1.0 } else { -1.0 };
    let blend = v1 / (n as f64).powf(gamma) + u_hat * sign;
    let norm = blend.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateAlignment);
    }
    Ok(blend / norm)
}

/// Scores `|diag(scales) * P^T S_k|` for `k = 1, ..., n-1`, where the columns
/// of `directions` are the projection directions.
fn projected_scores(partial: &DMatrix<f64>, directions: &DMatrix<f64>, scales: &[f64]) -> Vec<f64> {
    let n = partial.nrows();
    let projected = partial.rows(0, n - 1) * directions;
    projected
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(scales)
                .map(|(x, s)| (x * s).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn finite_result(trace: Vec<f64>, d: usize, aligned: bool, estimator: Estimator) -> CusumResult {
    let mut k_hat = 0;
    for (k, v) in trace.iter().enumerate() {
        if *v > trace[k_hat] {
            k_hat = k;
        }
    }
    CusumResult {
        statistic: Statistic::Finite(trace[k_hat]),
        trace,
        k_hat: k_hat + 1,
        d,
        aligned,
        estimator,
        critical_value: None,
        alpha: None,
        reject: None,
    }
}

fn infinite_result(
    partial: &DMatrix<f64>,
    d: usize,
    aligned: bool,
    estimator: Estimator,
) -> CusumResult {
    let (k_hat, _) = argmax_rows(partial);
    CusumResult {
        statistic: Statistic::Infinite,
        trace: Vec::new(),
        k_hat,
        d,
        aligned,
        estimator,
        critical_value: None,
        alpha: None,
        reject: Some(true),
    }
}

/// Statistic from precomputed partial sums and eigenelements. Shared by the
/// public entry points and the simulation harness.
pub(crate) fn statistic_from_parts(
    partial: &DMatrix<f64>,
    eigen: &EigenSystem,
    d: usize,
    alignment: Option<f64>,
    estimator: Estimator,
) -> Result<CusumResult> {
    let n = partial.nrows();
    let aligned = alignment.is_some();
    if check_spectrum(eigen, d, eigen.degeneracy_threshold()).is_err() {
        return Ok(infinite_result(partial, d, aligned, estimator));
    }
    let mut directions = eigen.vectors.columns(0, d).into_owned();
    if let Some(gamma) = alignment {
        let (_, u_hat) = argmax_rows(partial);
        let v1 = directions.column(0).into_owned();
        directions.set_column(0, &align_first_component(&v1, &u_hat, gamma, n)?);
    }
    let scales: Vec<f64> = eigen
        .values
        .iter()
        .take(d)
        .map(|l| 1.0 / l.abs().sqrt())
        .collect();
    let trace = projected_scores(partial, &directions, &scales);
    Ok(finite_result(trace, d, aligned, estimator))
}

fn prepare(sample: &FunctionalSample, config: &CusumConfig) -> Result<(DMatrix<f64>, EigenSystem)> {
    sample.require(2)?;
    config.validate(sample.p())?;
    let partial = partial_sums(sample)?;
    let eigen = eig_sym(&estimate_operator(sample, config)?)?;
    Ok((partial, eigen))
}

/// Projected CUSUM statistic `max_k |Sigma^{-1/2} S_k(eta_hat)|`.
///
/// Dispatches to [`cusum_stat_aligned`] when `config.aligned` is set.
pub fn cusum_stat(sample: &FunctionalSample, config: &CusumConfig) -> Result<CusumResult> {
    if config.aligned {
        return cusum_stat_aligned(sample, config);
    }
    let (partial, eigen) = prepare(sample, config)?;
    statistic_from_parts(&partial, &eigen, config.d, None, config.estimator)
}

/// Same statistic computed in operator form, `max_k ||C^(d) S_k||` with the
/// truncated inverse square root `C^(d)`. Agrees with [`cusum_stat`] up to
/// rounding because projection onto an orthonormal system preserves norms.
pub fn cusum_stat_operator_form(
    sample: &FunctionalSample,
    config: &CusumConfig,
) -> Result<CusumResult> {
    let (partial, eigen) = prepare(sample, config)?;
    let root = match truncated_invsqrt(&eigen, config.d, eigen.degeneracy_threshold()) {
        Ok(root) => root,
        Err(Error::DegenerateSpectrum { .. }) => {
            return Ok(infinite_result(&partial, config.d, false, config.estimator))
        }
        Err(e) => return Err(e),
    };
    let n = partial.nrows();
    let whitened = partial.rows(0, n - 1) * root.entries();
    let trace = whitened.row_iter().map(|r| r.norm()).collect();
    Ok(finite_result(trace, config.d, false, config.estimator))
}

/// Statistic with the first eigenvector replaced by the change-aligned
/// component; the eigenvalues and the remaining eigenvectors are unchanged.
pub fn cusum_stat_aligned(sample: &FunctionalSample, config: &CusumConfig) -> Result<CusumResult> {
    let (partial, eigen) = prepare(sample, config)?;
    statistic_from_parts(
        &partial,
        &eigen,
        config.d,
        Some(config.gamma),
        config.estimator,
    )
}

/// Attaches a critical value and the test decision.
pub fn decide(result: CusumResult, alpha: f64, critical_value: f64) -> Result<CusumResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let reject = result.statistic.exceeds(critical_value);
    Ok(CusumResult {
        critical_value: Some(critical_value),
        alpha: Some(alpha),
        reject: Some(reject),
        ..result
    })
}
