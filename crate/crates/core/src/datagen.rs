//! Simulation designs: Brownian-motion functional noise, piecewise linear
//! trends along one or several directions, scenarios A-F and a functional
//! AR(1) generator.
//!
//! Population principal components `v_j` are the eigenvectors of the
//! Brownian covariance `min(s, t)` represented in the basis. They are signed
//! to agree with the Karhunen-Loeve functions `sqrt(2) sin((j - 1/2) pi t)`,
//! and [`bm_kl_component`] reports the exact Karhunen-Loeve eigenvalue.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hilbert::{
    trapezoid_weights, uniform_grid, BasisDescriptor, FunctionalSample, OperatorMatrix, Projector,
};
use crate::spectral::{eig_sym, EigenSystem};
use crate::{Error, Result};

/// Grid on which Brownian paths are synthesized before projection.
pub const BM_GRID: usize = 1001;
/// Fine grid for deterministic curves (directions, operators).
const FINE_GRID: usize = 20_001;
const BURN_IN: usize = 100;

/// Piecewise linear trend `g_[theta1, theta2]`: zero up to `theta1`, linear
/// to one at `theta2`, one afterwards. `theta1 == theta2` is the step
/// `1{x > theta2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendShape {
    pub theta1: f64,
    pub theta2: f64,
}

impl TrendShape {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1 > 0.0 && theta1 <= theta2 && theta2 <= 1.0 && theta1 < 1.0) {
            return Err(Error::Trend(format!(
                "need 0 < theta1 <= theta2 <= 1 and theta1 < 1, got [{theta1}, {theta2}]"
            )));
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn step(at: f64) -> Result<Self> {
        Self::new(at, at)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = (self.theta1, self.theta2);
        if x > b {
            1.0
        } else if x > a {
            (x - a) / (b - a)
        } else {
            0.0
        }
    }

    pub fn is_step(&self) -> bool {
        self.theta1 == self.theta2
    }
}

/// `g_[theta1, theta2](x)` with parameter validation.
pub fn trend_value(theta1: f64, theta2: f64, x: f64) -> Result<f64> {
    let shape = TrendShape::new(theta1, theta2)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Trend(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(shape.eval(x))
}

/// One summand `scale * g(i/n) * delta` of the mean model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendComponent {
    pub shape: TrendShape,
    pub scale: f64,
    pub delta: DVector<f64>,
}

impl TrendComponent {
    pub fn g(&self, x: f64) -> f64 {
        self.scale * self.shape.eval(x)
    }
}

/// Mean model `m_i = sum_l scale_l g_l(i/n) delta_l` with orthonormal
/// directions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrendSpec {
    components: Vec<TrendComponent>,
}

impl TrendSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(components: Vec<TrendComponent>) -> Result<Self> {
        for (l, c) in components.iter().enumerate() {
            if (c.delta.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Trend(format!(
                    "direction {l} has norm {}, expected 1",
                    c.delta.norm()
                )));
            }
            if !c.scale.is_finite() {
                return Err(Error::Trend(format!(
                    "scale of component {l} is not finite"
                )));
            }
            for (m, other) in components.iter().enumerate().take(l) {
                if other.delta.len() != c.delta.len() {
                    return Err(Error::Dimension {
                        expected: other.delta.len(),
                        got: c.delta.len(),
                    });
                }
                if other.delta.dot(&c.delta).abs() > 1e-8 {
                    return Err(Error::Trend(format!(
                        "directions {m} and {l} are not orthogonal"
                    )));
                }
            }
        }
        Ok(Self { components })
    }

    pub fn single(shape: TrendShape, scale: f64, delta: DVector<f64>) -> Result<Self> {
        Self::new(vec![TrendComponent {
            shape,
            scale,
            delta,
        }])
    }

    pub fn components(&self) -> &[TrendComponent] {
        &self.components
    }

    /// Number of change directions.
    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Mean curve at rescaled time `x`.
    pub fn mean_at(&self, x: f64, p: usize) -> DVector<f64> {
        let mut m = DVector::zeros(p);
        for c in &self.components {
            m.axpy(c.g(x), &c.delta, 1.0);
        }
        m
    }
}

/// Adds `m_i` to observation `i = 1, ..., n`, evaluated at `i/n`.
pub fn inject_change(sample: &FunctionalSample, trend: &TrendSpec) -> Result<FunctionalSample> {
    let p = sample.p();
    for c in trend.components() {
        if c.delta.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: c.delta.len(),
            });
        }
    }
    let n = sample.n();
    let mut coeffs = sample.coeffs().clone();
    for i in 0..n {
        let m = trend.mean_at((i + 1) as f64 / n as f64, p);
        let mut row = coeffs.row_mut(i);
        row += m.transpose();
    }
    FunctionalSample::new(coeffs, sample.basis())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn brownian_grid_values(n: usize, grid_size: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let step = (1.0 / (grid_size - 1) as f64).sqrt();
    let mut values = DMatrix::zeros(n, grid_size);
    for i in 0..n {
        let mut w = 0.0;
        for t in 1..grid_size {
            let z: f64 = StandardNormal.sample(rng);
            w += step * z;
            values[(i, t)] = w;
        }
    }
    values
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size < 100 {
        return Err(Error::Parameter(format!(
            "grid_size must be at least 100, got {grid_size}"
        )));
    }
    Ok(())
}

/// `n` Brownian paths sampled on `uniform_grid(grid_size)`, one per row.
pub fn brownian_curves(n: usize, grid_size: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_grid(grid_size)?;
    Ok(brownian_grid_values(n, grid_size, &mut rng_for(seed, 0)))
}

/// Brownian paths projected onto the 25-function Fourier basis.
pub fn brownian_paths(n: usize, grid_size: usize, seed: u64) -> Result<FunctionalSample> {
    let curves = brownian_curves(n, grid_size, seed)?;
    Projector::new(BasisDescriptor::fourier25(), &uniform_grid(grid_size))?.project_rows(&curves)
}

/// Functional AR(1) `eps_i = psi eps_{i-1} + xi_i` with Brownian innovations
/// and `Psi = psi * I` in the Fourier basis. The innovations of the retained
/// observations are exactly `brownian_paths(n, BM_GRID, seed)`; the burn-in
/// draws from a separate stream.
pub fn far1(n: usize, psi: f64, seed: u64) -> Result<FunctionalSample> {
    if psi >= 1.0 {
        return Err(Error::Stability(psi));
    }
    if !(psi >= 0.0) {
        return Err(Error::Parameter(format!(
            "psi must be nonnegative, got {psi}"
        )));
    }
    let innovations = brownian_paths(n, BM_GRID, seed)?;
    let basis = innovations.basis();
    let projector = Projector::new(basis, &uniform_grid(BM_GRID))?;
    let burn = projector.project_rows(&brownian_grid_values(
        BURN_IN,
        BM_GRID,
        &mut rng_for(seed, 1),
    ))?;

    let mut state = DVector::zeros(basis.dimension);
    for i in 0..BURN_IN {
        state = &state * psi + burn.row(i);
    }
    let mut coeffs = innovations.into_coeffs();
    for i in 0..n {
        state = &state * psi + coeffs.row(i).transpose();
        coeffs.set_row(i, &state.transpose());
    }
    FunctionalSample::new(coeffs, basis)
}

fn fine_projector(basis: BasisDescriptor) -> Result<Projector> {
    Projector::new(basis, &uniform_grid(FINE_GRID))
}

/// Basis representation of the Brownian covariance operator
/// `(C f)(t) = int min(s, t) f(s) ds`, that is
/// `C_ab = int_0^1 T_a(u) T_b(u) du` with `T_a(u) = int_u^1 b_a`.
pub fn bm_covariance_operator(basis: BasisDescriptor) -> Result<OperatorMatrix> {
    let grid = uniform_grid(FINE_GRID);
    let w = trapezoid_weights(&grid);
    let eval = basis.evaluation_matrix(&grid);
    let m = grid.len();
    let p = basis.dimension;
    // tails[(i, a)] = int_{t_i}^1 b_a
    let mut tails = DMatrix::zeros(m, p);
    for a in 0..p {
        let mut acc = 0.0;
        for i in (0..m - 1).rev() {
            acc += 0.5 * (grid[i + 1] - grid[i]) * (eval[(i, a)] + eval[(i + 1, a)]);
            tails[(i, a)] = acc;
        }
    }
    let mut weighted = tails.clone();
    for (mut row, wi) in weighted.row_iter_mut().zip(&w) {
        row *= *wi;
    }
    Ok(OperatorMatrix::new(tails.tr_mul(&weighted))?.symmetrize())
}

/// Karhunen-Loeve eigenvalue `((j - 1/2) pi)^{-2}` of Brownian motion.
pub fn kl_eigenvalue(j: usize) -> f64 {
    ((j as f64 - 0.5) * PI).powi(-2)
}

/// Karhunen-Loeve eigenfunction `sqrt(2) sin((j - 1/2) pi t)`.
pub fn kl_function(j: usize, t: f64) -> f64 {
    SQRT_2 * ((j as f64 - 0.5) * PI * t).sin()
}

struct KlSystem {
    basis: BasisDescriptor,
    operator: OperatorMatrix,
    eigen: EigenSystem,
}

fn kl_system_for(basis: BasisDescriptor) -> Result<KlSystem> {
    let operator = bm_covariance_operator(basis)?;
    let mut eigen = eig_sym(&operator)?;
    let projector = fine_projector(basis)?;
    for j in 0..basis.dimension {
        let values: Vec<f64> = projector
            .grid()
            .iter()
            .map(|t| kl_function(j + 1, *t))
            .collect();
        let target = projector.project(&values)?;
        if eigen.vector(j).dot(&target) < 0.0 {
            let mut col = eigen.vectors.column_mut(j);
            col.neg_mut();
        }
    }
    Ok(KlSystem {
        basis,
        operator,
        eigen,
    })
}

fn kl_system() -> &'static KlSystem {
    static SYSTEM: OnceLock<KlSystem> = OnceLock::new();
    SYSTEM.get_or_init(|| {
        kl_system_for(BasisDescriptor::fourier25())
            .expect("Fourier Brownian covariance is well posed")
    })
}

/// Covariance of Brownian motion in the 25-function Fourier basis (cached).
pub fn bm_covariance_fourier25() -> &'static OperatorMatrix {
    &kl_system().operator
}

/// `(lambda_j, v_j)` for `1 <= j <= 25` in the Fourier basis.
pub fn bm_kl_component(j: usize) -> Result<(f64, DVector<f64>)> {
    let sys = kl_system();
    bm_kl_component_from(sys, j)
}

/// As [`bm_kl_component`] for an arbitrary basis (not cached).
pub fn bm_kl_component_in(basis: BasisDescriptor, j: usize) -> Result<(f64, DVector<f64>)> {
    bm_kl_component_from(&kl_system_for(basis)?, j)
}

fn bm_kl_component_from(sys: &KlSystem, j: usize) -> Result<(f64, DVector<f64>)> {
    if j == 0 || j > sys.basis.dimension {
        return Err(Error::Dimension {
            expected: sys.basis.dimension,
            got: j,
        });
    }
    Ok((kl_eigenvalue(j), sys.eigen.vector(j - 1).into_owned()))
}

/// Deterministic change directions used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedDirection {
    Sin,
    Cos,
    /// The identity curve `t`.
    Linear,
    /// Population principal component `v_j`.
    Kl(usize),
}

impl NamedDirection {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Sin => t.sin(),
            Self::Cos => t.cos(),
            Self::Linear => t,
            Self::Kl(j) => kl_function(j, t),
        }
    }
}

/// Unit-norm coefficient vector of a named direction in the Fourier basis.
pub fn named_direction(direction: NamedDirection) -> Result<DVector<f64>> {
    if let NamedDirection::Kl(j) = direction {
        return Ok(bm_kl_component(j)?.1);
    }
    let projector = fine_projector(BasisDescriptor::fourier25())?;
    let values: Vec<f64> = projector
        .grid()
        .iter()
        .map(|t| direction.eval(*t))
        .collect();
    let v = projector.project(&values)?;
    let norm = v.norm();
    Ok(v / norm)
}

/// `(int_0^1 f^2)^{-1/2}`, the constant making `c f` a unit vector of
/// `L^2[0,1]`.
pub fn continuous_normalizer(f: impl Fn(f64) -> f64) -> f64 {
    let grid = uniform_grid(FINE_GRID);
    let w = trapezoid_weights(&grid);
    let sq: f64 = grid.iter().zip(&w).map(|(t, w)| w * f(*t).powi(2)).sum();
    sq.sqrt().recip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 6] = [Self::A, Self::B, Self::C, Self::D, Self::E, Self::F];
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            "F" => Ok(Self::F),
            other => Err(Error::Parameter(format!("unknown scenario '{other}'"))),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Mean model of a scenario. `A` is the null hypothesis.
pub fn scenario_trend(id: ScenarioId) -> Result<TrendSpec> {
    let third = 1.0 / 3.0;
    let two_thirds = 2.0 / 3.0;
    match id {
        ScenarioId::A => Ok(TrendSpec::none()),
        ScenarioId::B => TrendSpec::single(
            TrendShape::step(0.5)?,
            third,
            named_direction(NamedDirection::Sin)?,
        ),
        ScenarioId::C => TrendSpec::single(
            TrendShape::step(0.5)?,
            0.5,
            named_direction(NamedDirection::Kl(10))?,
        ),
        ScenarioId::D => TrendSpec::single(
            TrendShape::new(third, two_thirds)?,
            0.25,
            named_direction(NamedDirection::Linear)?,
        ),
        ScenarioId::E => TrendSpec::single(
            TrendShape::new(third, two_thirds)?,
            third,
            named_direction(NamedDirection::Cos)?,
        ),
        ScenarioId::F => {
            let scale = 8f64.powf(-0.5);
            TrendSpec::new(vec![
                TrendComponent {
                    shape: TrendShape::new(0.6, 1.0)?,
                    scale,
                    delta: named_direction(NamedDirection::Kl(10))?,
                },
                TrendComponent {
                    shape: TrendShape::new(third, two_thirds)?,
                    scale,
                    delta: named_direction(NamedDirection::Kl(15))?,
                },
            ])
        }
    }
}

/// Direction `(v_10 + v_11 + v_12) / sqrt(3)` with an abrupt mid-sample
/// change of size 1/3, the setting used to illustrate the aligned component.
pub fn figure2_trend() -> Result<TrendSpec> {
    let mut delta = DVector::zeros(BasisDescriptor::fourier25().dimension);
    for j in 10..=12 {
        delta += bm_kl_component(j)?.1;
    }
    let delta = delta / 3f64.sqrt();
    let delta = &delta / delta.norm();
    TrendSpec::single(TrendShape::step(0.5)?, 1.0 / 3.0, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Noise {
    #[default]
    Brownian,
    Far1 {
        psi: f64,
    },
}

pub fn noise(kind: Noise, n: usize, seed: u64) -> Result<FunctionalSample> {
    match kind {
        Noise::Brownian => brownian_paths(n, BM_GRID, seed),
        Noise::Far1 { psi } => far1(n, psi, seed),
    }
}

/// Scenario sample with Brownian noise.
pub fn scenario(id: ScenarioId, n: usize, seed: u64) -> Result<FunctionalSample> {
    scenario_with_noise(id, n, seed, Noise::Brownian)
}

pub fn scenario_with_noise(
    id: ScenarioId,
    n: usize,
    seed: u64,
    kind: Noise,
) -> Result<FunctionalSample> {
    if n < 10 {
        return Err(Error::SampleSize {
            required: 10,
            got: n,
        });
    }
    inject_change(&noise(kind, n, seed)?, &scenario_trend(id)?)
}
