//! Rejection-rate studies and principal component tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{lag_cov, long_run_cov, BandwidthRule, KernelSpec};
use crate::cusum::{
    align_first_component, argmax_partial_sum, partial_sums, statistic_from_parts, CusumConfig,
    Estimator, Statistic, DEFAULT_GAMMA,
};
use crate::datagen::{scenario_with_noise, Noise, ScenarioId};
use crate::hilbert::{uniform_grid, FunctionalSample};
use crate::spectral::eig_sym;
use crate::{Error, Result};

/// The four statistics compared in the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Lag-0 principal components.
    Standard,
    /// Lag-0 components with the aligned first component.
    Aligned,
    /// Long-run (generalized) principal components.
    Generalized,
    AlignedGeneralized,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Self::Standard,
        Self::Aligned,
        Self::Generalized,
        Self::AlignedGeneralized,
    ];

    pub fn estimator(&self) -> Estimator {
        match self {
            Self::Standard | Self::Aligned => Estimator::Cov0,
            Self::Generalized | Self::AlignedGeneralized => Estimator::Bartlett,
        }
    }

    pub fn is_aligned(&self) -> bool {
        matches!(self, Self::Aligned | Self::AlignedGeneralized)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Aligned => "aligned",
            Self::Generalized => "generalized",
            Self::AlignedGeneralized => "aligned_generalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioId,
    pub n: usize,
    pub reps: usize,
    /// Replication `r` uses seed `seed + r`.
    pub seed: u64,
    pub d: usize,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthRule,
    pub noise: Noise,
    pub critical_value: f64,
}

impl StudyConfig {
    pub fn new(scenario: ScenarioId, n: usize, reps: usize, critical_value: f64) -> Self {
        Self {
            scenario,
            n,
            reps,
            seed: 1,
            d: 1,
            gamma: DEFAULT_GAMMA,
            kernel: KernelSpec::default(),
            bandwidth: BandwidthRule::default(),
            noise: Noise::Brownian,
            critical_value,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// All four statistics for one sample, in [`Variant::ALL`] order.
pub fn variant_statistics(
    sample: &FunctionalSample,
    d: usize,
    gamma: f64,
    kernel: &KernelSpec,
    bandwidth: &BandwidthRule,
) -> Result<[Statistic; 4]> {
    let cfg = CusumConfig {
        d,
        gamma,
        aligned: false,
        estimator: Estimator::Cov0,
        kernel: *kernel,
        bandwidth: *bandwidth,
    };
    cfg.validate(sample.p())?;
    let partial = partial_sums(sample)?;
    let cov0 = eig_sym(&lag_cov(sample, 0)?)?;
    let lrv = eig_sym(&long_run_cov(sample, kernel, bandwidth)?)?;
    let mut out = [Statistic::Infinite; 4];
    for (slot, v) in out.iter_mut().zip(Variant::ALL) {
        let eigen = match v.estimator() {
            Estimator::Cov0 => &cov0,
            Estimator::Bartlett => &lrv,
        };
        let alignment = v.is_aligned().then_some(gamma);
        *slot = statistic_from_parts(&partial, eigen, d, alignment, v.estimator())?.statistic;
    }
    Ok(out)
}

/// Statistics of every replication, in replication order.
pub fn simulate_statistics(config: &StudyConfig) -> Result<Vec<[Statistic; 4]>> {
    if config.reps < 100 {
        return Err(Error::Parameter(format!(
            "at least 100 replications are required, got {}",
            config.reps
        )));
    }
    (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let sample = scenario_with_noise(
                config.scenario,
                config.n,
                config.seed + r as u64,
                config.noise,
            )?;
            variant_statistics(
                &sample,
                config.d,
                config.gamma,
                &config.kernel,
                &config.bandwidth,
            )
        })
        .collect()
}

/// One line of the rejection table: rates in percent per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub standard: f64,
    pub aligned: f64,
    pub generalized: f64,
    pub aligned_generalized: f64,
    pub critical_value: f64,
}

impl RejectionRow {
    pub fn rate(&self, v: Variant) -> f64 {
        match v {
            Variant::Standard => self.standard,
            Variant::Aligned => self.aligned,
            Variant::Generalized => self.generalized,
            Variant::AlignedGeneralized => self.aligned_generalized,
        }
    }
}

pub fn rejection_rates(config: &StudyConfig) -> Result<RejectionRow> {
    let stats = simulate_statistics(config)?;
    let mut counts = [0usize; 4];
    for s in &stats {
        for (c, v) in counts.iter_mut().zip(s) {
            if v.exceeds(config.critical_value) {
                *c += 1;
            }
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / config.reps as f64;
    Ok(RejectionRow {
        scenario: config.scenario.to_string(),
        n: config.n,
        reps: config.reps,
        standard: pct(counts[0]),
        aligned: pct(counts[1]),
        generalized: pct(counts[2]),
        aligned_generalized: pct(counts[3]),
        critical_value: config.critical_value,
    })
}

pub fn write_rejections<W: Write>(rows: &[RejectionRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// How component curves are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentLayout {
    /// Evaluations on a uniform grid with this many points.
    Grid(usize),
    Coefficients,
}

impl Default for ComponentLayout {
    fn default() -> Self {
        Self::Grid(101)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentLabel {
    Index(usize),
    Aligned,
    Delta,
}

impl fmt::Display for ComponentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Index(j) => write!(f, "{j}"),
            Self::Aligned => f.write_str("aligned"),
            Self::Delta => f.write_str("delta"),
        }
    }
}

impl FromStr for ComponentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Self::Aligned),
            "delta" => Ok(Self::Delta),
            other => other
                .parse()
                .map(Self::Index)
                .map_err(|_| Error::Parameter(format!("invalid component label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRow {
    pub label: ComponentLabel,
    /// Eigenvalue estimate; the aligned component keeps `lambda_1`.
    pub eigenvalue: Option<f64>,
    pub coeffs: DVector<f64>,
}

/// Leading empirical components, the aligned first component and, when
/// known, the change direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    pub rows: Vec<ComponentRow>,
}

impl ComponentTable {
    pub fn get(&self, label: ComponentLabel) -> Option<&ComponentRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write<W: Write>(&self, layout: ComponentLayout, out: W) -> Result<()> {
        let Some(first) = self.rows.first() else {
            return Err(Error::Parameter("empty component table".into()));
        };
        let p = first.coeffs.len();
        let basis = crate::hilbert::BasisDescriptor::fourier(p)?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        let mut header = vec!["j".to_string(), "lambda".to_string()];
        let grid = match layout {
            ComponentLayout::Grid(m) => {
                let grid = uniform_grid(m.max(2));
                header.extend(grid.iter().map(|t| format!("t={t}")));
                Some(grid)
            }
            ComponentLayout::Coefficients => {
                header.extend((1..=p).map(|j| format!("c{j}")));
                None
            }
        };
        writer.write_record(&header)?;
        for row in &self.rows {
            let values = match &grid {
                Some(g) => basis.reconstruct(&row.coeffs, g)?,
                None => row.coeffs.iter().copied().collect(),
            };
            let mut record = vec![
                row.label.to_string(),
                row.eigenvalue.map_or(String::new(), |v| v.to_string()),
            ];
            record.extend(values.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Builds the component table from the estimator selected by `config`.
pub fn component_table(
    sample: &FunctionalSample,
    count: usize,
    config: &CusumConfig,
    delta: Option<&DVector<f64>>,
) -> Result<ComponentTable> {
    config.validate(sample.p())?;
    if count == 0 || count > sample.p() {
        return Err(Error::Dimension {
            expected: sample.p(),
            got: count,
        });
    }
    let eigen = eig_sym(&crate::cusum::estimate_operator(sample, config)?)?;
    let mut rows: Vec<ComponentRow> = (0..count)
        .map(|j| ComponentRow {
            label: ComponentLabel::Index(j + 1),
            eigenvalue: Some(eigen.values[j]),
            coeffs: eigen.vector(j).into_owned(),
        })
        .collect();
    let (_, u_hat) = argmax_partial_sum(sample)?;
    let v1 = eigen.vector(0).into_owned();
    rows.push(ComponentRow {
        label: ComponentLabel::Aligned,
        eigenvalue: Some(eigen.values[0]),
        coeffs: align_first_component(&v1, &u_hat, config.gamma, sample.n())?,
    });
    if let Some(delta) = delta {
        if delta.len() != sample.p() {
            return Err(Error::Dimension {
                expected: sample.p(),
                got: delta.len(),
            });
        }
        rows.push(ComponentRow {
            label: ComponentLabel::Delta,
            eigenvalue: None,
            coeffs: delta.clone(),
        });
    }
    Ok(ComponentTable { rows })
}
