//! Deterministic limit quantities for trend alternatives.
//!
//! For a trend `g` on `[0, 1]`:
//!
//! * `G(g) = int g^2 - (int g)^2`,
//! * the bridge drift `cal_G(x) = int_0^x g - x int_0^1 g`,
//! * `beta_{n,i} = g(i/n) - int g`,
//! * `s_n = G(g) sum_{|r| <= n} K(r/h)` and `kappa = G(g) int K`.
//!
//! Integrals use the composite trapezoid rule on a uniform grid refined at
//! the trend's breakpoints, with one-sided limits at every node so that jumps
//! are integrated exactly.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::covariance::KernelSpec;
use crate::datagen::{TrendComponent, TrendShape, TrendSpec};
use crate::hilbert::{tensor, OperatorMatrix};
use crate::{Error, Result};

pub const DEFAULT_INTEGRATION_GRID: usize = 10_001;
const NUDGE: f64 = 1e-12;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A piecewise Lipschitz function on `[0, 1]` with known breakpoints.
#[derive(Clone)]
pub struct TrendFunctionHandle {
    f: Evaluator,
    breakpoints: Vec<f64>,
    grid_size: usize,
}

impl fmt::Debug for TrendFunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrendFunctionHandle")
            .field("breakpoints", &self.breakpoints)
            .field("grid_size", &self.grid_size)
            .finish_non_exhaustive()
    }
}

impl TrendFunctionHandle {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, breakpoints: &[f64]) -> Self {
        let mut breakpoints: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| *b > 0.0 && *b < 1.0)
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self {
            f: Arc::new(f),
            breakpoints,
            grid_size: DEFAULT_INTEGRATION_GRID,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(move |_| c, &[])
    }

    pub fn from_shape(shape: TrendShape, scale: f64) -> Self {
        Self::from_fn(
            move |x| scale * shape.eval(x),
            &[shape.theta1, shape.theta2],
        )
    }

    /// `scale_l * g_l` of one trend component.
    pub fn from_component(component: &TrendComponent) -> Self {
        Self::from_shape(component.shape, component.scale)
    }

    /// Piecewise linear interpolation of a table with increasing abscissae
    /// covering `[0, 1]`.
    pub fn from_table(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Parameter(
                "table needs at least two matching points".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || xs[0] > 0.0 || xs[xs.len() - 1] < 1.0 {
            return Err(Error::Parameter(
                "table abscissae must increase and cover [0, 1]".into(),
            ));
        }
        let (tx, ty) = (xs.to_vec(), ys.to_vec());
        let eval = move |x: f64| {
            let k = tx.partition_point(|t| *t <= x).clamp(1, tx.len() - 1);
            let (x0, x1) = (tx[k - 1], tx[k]);
            ty[k - 1] + (x - x0) / (x1 - x0) * (ty[k] - ty[k - 1])
        };
        Ok(Self::from_fn(eval, xs))
    }

    pub fn with_grid(mut self, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::Parameter(
                "integration grid needs at least two points".into(),
            ));
        }
        self.grid_size = grid_size;
        Ok(self)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Integration nodes in `[0, upper]`: the uniform grid, the breakpoints
    /// and `upper` itself.
    fn nodes(&self, upper: f64) -> Vec<f64> {
        let m = self.grid_size;
        let mut nodes: Vec<f64> = (0..m)
            .map(|i| i as f64 / (m - 1) as f64)
            .filter(|t| *t <= upper)
            .chain(self.breakpoints.iter().copied().filter(|b| *b < upper))
            .chain(std::iter::once(upper))
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        nodes
    }

    /// `int_0^upper map(g(x)) dx` using one-sided limits at the nodes.
    fn integrate_map(&self, upper: f64, map: impl Fn(f64) -> f64) -> f64 {
        self.nodes(upper)
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let fa = map(self.eval(a + NUDGE.min(0.5 * (b - a))));
                let fb = map(self.eval(b - NUDGE.min(0.5 * (b - a))));
                0.5 * (b - a) * (fa + fb)
            })
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.integrate_map(1.0, |v| v)
    }

    pub fn integral_to(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.integrate_map(x.min(1.0), |v| v)
        }
    }

    pub fn integral_sq(&self) -> f64 {
        self.integrate_map(1.0, |v| v * v)
    }

    /// `cal_G` on the integration nodes of `[0, 1]` in one cumulative pass.
    pub fn drift_curve(&self) -> (Vec<f64>, Vec<f64>) {
        let nodes = self.nodes(1.0);
        let total = self.integral();
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(nodes.len());
        values.push(0.0);
        for w in nodes.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = NUDGE.min(0.5 * (b - a));
            acc += 0.5 * (b - a) * (self.eval(a + h) + self.eval(b - h));
            values.push(acc - b * total);
        }
        (nodes, values)
    }
}

/// `G(g) = int g^2 - (int g)^2`, evaluated in the centered form
/// `int (g - int g)^2`.
pub fn trend_variance(g: &TrendFunctionHandle) -> f64 {
    let mean = g.integral();
    g.integrate_map(1.0, |v| (v - mean).powi(2))
}

/// `cal_G(x) = int_0^x g - x int_0^1 g`.
pub fn bridge_drift(g: &TrendFunctionHandle, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Parameter(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(g.integral_to(x) - x * g.integral())
}

/// Drift of the normalized partial sums, `sum_l cal_G_l(x) delta_l`.
pub fn drift_vector(trend: &TrendSpec, x: f64, p: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(p);
    for c in trend.components() {
        if c.delta.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: c.delta.len(),
            });
        }
        let g = TrendFunctionHandle::from_component(c);
        out.axpy(bridge_drift(&g, x)?, &c.delta, 1.0);
    }
    Ok(out)
}

/// `(S, x*)` with `S = sup_x (sum_l cal_G_l(x)^2)^{1/2}` attained at `x*`.
pub fn drift_sup_location(trend: &TrendSpec) -> (f64, f64) {
    let handles: Vec<TrendFunctionHandle> = trend
        .components()
        .iter()
        .map(TrendFunctionHandle::from_component)
        .collect();
    let mut breaks: Vec<f64> = handles
        .iter()
        .flat_map(|h| h.breakpoints().to_vec())
        .collect();
    breaks.sort_by(f64::total_cmp);
    let shared: Vec<TrendFunctionHandle> = handles
        .iter()
        .map(|h| {
            let inner = h.clone();
            TrendFunctionHandle::from_fn(move |x| inner.eval(x), &breaks)
        })
        .collect();
    let curves: Vec<(Vec<f64>, Vec<f64>)> = shared.iter().map(|h| h.drift_curve()).collect();
    let Some((nodes, _)) = curves.first() else {
        return (0.0, 0.0);
    };
    let mut best = (0.0, 0.0);
    for (i, x) in nodes.iter().enumerate() {
        let norm = curves.iter().map(|(_, v)| v[i] * v[i]).sum::<f64>().sqrt();
        if norm > best.0 {
            best = (norm, *x);
        }
    }
    best
}

/// `S = sup_x |sum_l cal_G_l(x) delta_l|` for orthonormal directions.
pub fn drift_sup(trend: &TrendSpec) -> f64 {
    drift_sup_location(trend).0
}

/// `beta_{n,i} = g(i/n) - int g` for `i = 1, ..., n`.
pub fn beta_coeffs(g: &TrendFunctionHandle, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::SampleSize {
            required: 1,
            got: 0,
        });
    }
    let mean = g.integral();
    Ok((1..=n)
        .map(|i| g.eval(i as f64 / n as f64) - mean)
        .collect())
}

/// `max_{0 <= r <= h} |sum_{i <= n-r} beta_i beta_{i+r} / n - G(g)|`.
pub fn beta_autocov_error(g: &TrendFunctionHandle, n: usize, h: usize) -> Result<f64> {
    if h >= n {
        return Err(Error::Lag { lag: h as isize, n });
    }
    let beta = beta_coeffs(g, n)?;
    let target = trend_variance(g);
    Ok((0..=h)
        .map(|r| {
            let s: f64 = beta.iter().zip(&beta[r..]).map(|(a, b)| a * b).sum();
            (s / n as f64 - target).abs()
        })
        .fold(0.0, f64::max))
}

/// Comparison pair for the long-run covariance under a single-direction
/// alternative: `C_B / s_n` approaches `target = delta (x) delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AltCovarianceLimit {
    pub s_n: f64,
    pub kappa: f64,
    pub target: OperatorMatrix,
}

pub fn alt_covariance_limit(
    trend: &TrendSpec,
    kernel: &KernelSpec,
    n: usize,
    h: usize,
) -> Result<AltCovarianceLimit> {
    let [component] = trend.components() else {
        return Err(Error::Unsupported(format!(
            "the long-run covariance limit needs exactly one change direction, got {}",
            trend.count()
        )));
    };
    if h == 0 {
        return Err(Error::Parameter("bandwidth must be at least 1".into()));
    }
    let gv = trend_variance(&TrendFunctionHandle::from_component(component));
    Ok(AltCovarianceLimit {
        s_n: gv * kernel.weight_sum(n, h),
        kappa: gv * kernel.integral(),
        target: tensor(&component.delta, &component.delta)?,
    })
}
