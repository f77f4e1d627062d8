//! Quantiles of `sup_x (sum_{r<=d} B_r(x)^2)^{1/2}` for independent Brownian
//! bridges `B_1, ..., B_d`.
//!
//! Bridges are simulated on a uniform grid as cumulative Gaussian sums minus
//! the linear correction `x W(1)`. Taking the maximum over grid points biases
//! the supremum downward by roughly `0.5826 / sqrt(grid_size)`; the default
//! configuration adds this continuity correction to every simulated supremum.
//! For `d = 1` the distribution is Kolmogorov's and [`kolmogorov_quantile`]
//! gives an independent series value.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `-zeta(1/2) / sqrt(2 pi)`, the discrete-monitoring shift for the maximum
/// of a Gaussian random walk.
pub const CONTINUITY_SHIFT: f64 = 0.582_597_157_939_010_7;

pub const CACHE_ENV: &str = "FCPD_CACHE_DIR";
const CACHE_FILE: &str = "critval-cache-v1.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CritvalConfig {
    pub d: usize,
    /// Number of increments per bridge.
    pub grid_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub continuity_correction: bool,
}

impl Default for CritvalConfig {
    fn default() -> Self {
        Self {
            d: 1,
            grid_size: 2048,
            replications: 200_000,
            seed: 1,
            continuity_correction: true,
        }
    }
}

impl CritvalConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Parameter("dimension d must be at least 1".into()));
        }
        if self.grid_size < 256 {
            return Err(Error::Parameter(format!(
                "grid_size must be at least 256, got {}",
                self.grid_size
            )));
        }
        if self.replications < 10_000 {
            return Err(Error::Parameter(format!(
                "replications must be at least 10000, got {}",
                self.replications
            )));
        }
        Ok(())
    }
}

/// Sorted sample of simulated suprema.
#[derive(Debug, Clone, PartialEq)]
pub struct SupDistribution {
    values: Vec<f64>,
}

impl SupDistribution {
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Empirical quantile at probability `q` with linear interpolation
    /// between order statistics.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) || self.values.is_empty() {
            return Err(Error::Parameter(format!("quantile level {q} out of range")));
        }
        let pos = q * (self.values.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(self.values.len() - 1);
        let frac = pos - lo as f64;
        Ok(self.values[lo] + frac * (self.values[hi] - self.values[lo]))
    }

    /// Upper-tail critical value, the `1 - alpha` quantile.
    pub fn upper(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        self.quantile(1.0 - alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// One Brownian bridge on `grid_size + 1` equispaced points of `[0, 1]`.
pub fn bridge_path(rng: &mut ChaCha8Rng, grid_size: usize) -> Vec<f64> {
    let step = (1.0 / grid_size as f64).sqrt();
    let mut path = Vec::with_capacity(grid_size + 1);
    let mut w = 0.0;
    path.push(0.0);
    for _ in 0..grid_size {
        let z: f64 = StandardNormal.sample(rng);
        w += step * z;
        path.push(w);
    }
    let end = w;
    for (k, v) in path.iter_mut().enumerate() {
        *v -= k as f64 / grid_size as f64 * end;
    }
    path
}

fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn simulate_one(config: &CritvalConfig, rep: usize, squares: &mut [f64]) -> f64 {
    let mut rng = replication_rng(config.seed, rep);
    squares.fill(0.0);
    for _ in 0..config.d {
        for (acc, b) in squares
            .iter_mut()
            .zip(bridge_path(&mut rng, config.grid_size))
        {
            *acc += b * b;
        }
    }
    let sup = squares.iter().cloned().fold(0.0, f64::max).sqrt();
    if config.continuity_correction {
        sup + CONTINUITY_SHIFT / (config.grid_size as f64).sqrt()
    } else {
        sup
    }
}

/// Simulated distribution of the supremum. Replication `r` draws from the
/// ChaCha stream `r` of `seed`, so the result does not depend on scheduling.
pub fn simulate_sup_bridge(config: &CritvalConfig) -> Result<SupDistribution> {
    config.validate()?;
    let values: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map_init(
            || vec![0.0; config.grid_size + 1],
            |squares, rep| simulate_one(config, rep, squares),
        )
        .collect();
    Ok(SupDistribution::from_unsorted(values))
}

/// `P(sup |B| <= x)` for a standard Brownian bridge.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let sum: f64 = (1..=50)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        return ((2.0 * std::f64::consts::PI).sqrt() / x * sum).min(1.0);
    }
    let tail: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    1.0 - 2.0 * tail
}

/// Upper-tail quantile of the Kolmogorov distribution by bisection.
pub fn kolmogorov_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (1e-3, 10.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte Carlo critical value without caching.
pub fn critical_value(d: usize, alpha: f64, config: &CritvalConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let config = CritvalConfig { d, ..*config };
    simulate_sup_bridge(&config)?.upper(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    config: CritvalConfig,
    alpha_bits: u64,
}

/// Memoizes simulated distributions in memory and quantiles on disk.
///
/// The disk table is `critval-cache-v1.csv` inside the cache directory; it
/// is rewritten atomically whenever a new quantile is computed.
#[derive(Debug, Default)]
pub struct CritvalCache {
    dir: Option<PathBuf>,
    quantiles: Mutex<HashMap<Key, f64>>,
    distributions: Mutex<HashMap<CritvalConfig, Arc<SupDistribution>>>,
}

impl CritvalCache {
    /// In-memory cache only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache backed by a table in `dir`; an existing table is loaded.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let quantiles = load_table(&dir.join(CACHE_FILE))?;
        Ok(Self {
            dir: Some(dir),
            quantiles: Mutex::new(quantiles),
            distributions: Mutex::default(),
        })
    }

    /// Uses `FCPD_CACHE_DIR` when set, otherwise memory only.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(PathBuf::from(dir)),
            _ => Ok(Self::in_memory()),
        }
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(CACHE_FILE))
    }

    pub fn distribution(&self, config: &CritvalConfig) -> Result<Arc<SupDistribution>> {
        if let Some(dist) = self.distributions.lock().unwrap().get(config) {
            return Ok(dist.clone());
        }
        let dist = Arc::new(simulate_sup_bridge(config)?);
        self.distributions
            .lock()
            .unwrap()
            .insert(*config, dist.clone());
        Ok(dist)
    }

    pub fn critical_value(&self, d: usize, alpha: f64, config: &CritvalConfig) -> Result<f64> {
        check_alpha(alpha)?;
        let config = CritvalConfig { d, ..*config };
        config.validate()?;
        let key = Key {
            config,
            alpha_bits: alpha.to_bits(),
        };
        if let Some(v) = self.quantiles.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let value = self.distribution(&config)?.upper(alpha)?;
        let snapshot = {
            let mut q = self.quantiles.lock().unwrap();
            q.insert(key, value);
            q.clone()
        };
        if let Some(path) = self.path() {
            store_table(&path, &snapshot)?;
        }
        Ok(value)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    d: usize,
    grid: usize,
    reps: usize,
    seed: u64,
    corrected: bool,
    alpha: f64,
    value: f64,
}

fn load_table(path: &Path) -> Result<HashMap<Key, f64>> {
    let mut out = HashMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut reader = csv::Reader::from_path(path)?;
    for row in reader.deserialize() {
        let row: CacheRow = row?;
        let config = CritvalConfig {
            d: row.d,
            grid_size: row.grid,
            replications: row.reps,
            seed: row.seed,
            continuity_correction: row.corrected,
        };
        out.insert(
            Key {
                config,
                alpha_bits: row.alpha.to_bits(),
            },
            row.value,
        );
    }
    Ok(out)
}

fn store_table(path: &Path, table: &HashMap<Key, f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut rows: Vec<CacheRow> = table
        .iter()
        .map(|(k, v)| CacheRow {
            d: k.config.d,
            grid: k.config.grid_size,
            reps: k.config.replications,
            seed: k.config.seed,
            corrected: k.config.continuity_correction,
            alpha: f64::from_bits(k.alpha_bits),
            value: *v,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.d, a.grid, a.reps, a.seed, a.corrected)
            .cmp(&(b.d, b.grid, b.reps, b.seed, b.corrected))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut writer = csv::Writer::from_path(&tmp)?;
        for row in &rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        writer
            .into_inner()
            .map_err(|e| e.into_error())?
            .sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const TABLE_ALPHAS: [f64; 3] = [0.10, 0.05, 0.01];

/// One row of the critical-value table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub d: usize,
    pub alpha: f64,
    pub value: f64,
}

/// Critical values for `alpha` in {0.10, 0.05, 0.01} and `d = 1, ..., max_d`.
pub fn critval_table(
    max_d: usize,
    config: &CritvalConfig,
    cache: &CritvalCache,
) -> Result<Vec<TableEntry>> {
    let mut out = Vec::new();
    for d in 1..=max_d {
        for alpha in TABLE_ALPHAS {
            out.push(TableEntry {
                d,
                alpha,
                value: cache.critical_value(d, alpha, config)?,
            });
        }
    }
    Ok(out)
}

/// Writes a table as CSV with header `d,alpha,value`.
pub fn write_table<W: Write>(entries: &[TableEntry], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for e in entries {
        writer.serialize(e)?;
    }
    writer.flush()?;
    Ok(())
}
