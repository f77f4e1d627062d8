//! Coefficient-space representation of `L^2[0,1]`.
//!
//! Every curve is stored as its coefficient vector in an orthonormal basis.
//! Inner products, tensor operators and Hilbert-Schmidt norms then become the
//! Euclidean dot product, the outer product and the Frobenius norm. Grids only
//! appear when curves are read, written or projected.

use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `1, sqrt(2) sin(2 pi k t), sqrt(2) cos(2 pi k t)` for `k = 1, 2, ...`,
    /// sine and cosine interleaved.
    Fourier,
    /// Scaled cell indicators `sqrt(p) 1{t in [j/p, (j+1)/p)}`.
    RawGrid,
}

/// An orthonormal basis of `L^2[0,1]` truncated to `dimension` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub kind: BasisKind,
    pub dimension: usize,
}

/// Basis size used throughout the simulation designs.
pub const DEFAULT_FOURIER_DIM: usize = 25;

impl BasisDescriptor {
    pub fn new(kind: BasisKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Parameter("basis dimension must be positive".into()));
        }
        Ok(Self { kind, dimension })
    }

    pub fn fourier(dimension: usize) -> Result<Self> {
        Self::new(BasisKind::Fourier, dimension)
    }

    pub fn raw_grid(dimension: usize) -> Result<Self> {
        Self::new(BasisKind::RawGrid, dimension)
    }

    /// The 25-function Fourier basis.
    pub fn fourier25() -> Self {
        Self {
            kind: BasisKind::Fourier,
            dimension: DEFAULT_FOURIER_DIM,
        }
    }

    /// Value of the `j`-th (zero-based) basis function at `t`.
    pub fn evaluate(&self, j: usize, t: f64) -> f64 {
        debug_assert!(j < self.dimension);
        match self.kind {
            BasisKind::Fourier => {
                if j == 0 {
                    1.0
                } else {
                    let k = ((j + 1) / 2) as f64;
                    let arg = 2.0 * PI * k * t;
                    if j % 2 == 1 {
                        SQRT_2 * arg.sin()
                    } else {
                        SQRT_2 * arg.cos()
                    }
                }
            }
            BasisKind::RawGrid => {
                let p = self.dimension;
                let cell = ((t * p as f64).floor() as usize).min(p - 1);
                if cell == j {
                    (p as f64).sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// `m x p` matrix of basis evaluations on `grid`.
    pub fn evaluation_matrix(&self, grid: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(grid.len(), self.dimension, |i, j| self.evaluate(j, grid[i]))
    }

    /// Evaluates the curve with coefficients `coeffs` on `grid`.
    pub fn reconstruct(&self, coeffs: &DVector<f64>, grid: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dimension, coeffs.len())?;
        Ok(grid
            .iter()
            .map(|&t| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.evaluate(j, t))
                    .sum()
            })
            .collect())
    }
}

/// `m` equispaced points `0, 1/(m-1), ..., 1`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

/// Composite trapezoid weights for an increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let mut w = vec![0.0; m];
    for i in 1..m {
        let half = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += half;
        w[i] += half;
    }
    w
}

fn validate_grid(grid: &[f64], basis: &BasisDescriptor) -> Result<()> {
    if grid.len() < basis.dimension.max(2) {
        return Err(Error::Dimension {
            expected: basis.dimension.max(2),
            got: grid.len(),
        });
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Parameter("grid points must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Quadrature projection onto a basis for a fixed grid.
///
/// Holds the trapezoid-weighted evaluation matrix so that many curves sampled
/// on the same grid can be projected with one matrix product.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: BasisDescriptor,
    grid: Vec<f64>,
    weighted: DMatrix<f64>,
}

impl Projector {
    pub fn new(basis: BasisDescriptor, grid: &[f64]) -> Result<Self> {
        validate_grid(grid, &basis)?;
        let weights = trapezoid_weights(grid);
        let mut weighted = basis.evaluation_matrix(grid);
        for (mut row, w) in weighted.row_iter_mut().zip(&weights) {
            row *= *w;
        }
        Ok(Self {
            basis,
            grid: grid.to_vec(),
            weighted,
        })
    }

    pub fn basis(&self) -> BasisDescriptor {
        self.basis
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn project(&self, values: &[f64]) -> Result<DVector<f64>> {
        check_len(self.grid.len(), values.len())?;
        Ok(self.weighted.tr_mul(&DVector::from_column_slice(values)))
    }

    /// Projects every row of an `n x m` matrix of grid values.
    pub fn project_rows(&self, values: &DMatrix<f64>) -> Result<FunctionalSample> {
        check_len(self.grid.len(), values.ncols())?;
        FunctionalSample::new(values * &self.weighted, self.basis)
    }
}

/// Projects a grid-sampled curve onto `basis` with the trapezoid rule.
pub fn project_curve(
    values: &[f64],
    grid: &[f64],
    basis: &BasisDescriptor,
) -> Result<DVector<f64>> {
    Projector::new(*basis, grid)?.project(values)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// `<x, y>`; in an orthonormal basis this is the dot product of coefficients.
pub fn inner_product(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(x.dot(y))
}

/// The operator `z -> <y, z> x`, i.e. the matrix `x y^T`.
pub fn tensor(x: &DVector<f64>, y: &DVector<f64>) -> Result<OperatorMatrix> {
    check_len(x.len(), y.len())?;
    Ok(OperatorMatrix(x * y.transpose()))
}

/// Hilbert-Schmidt norm (Frobenius norm of the coefficient matrix).
pub fn hs_norm(a: &OperatorMatrix) -> f64 {
    a.0.norm()
}

/// A `p x p` matrix representing a bounded operator in the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<f64>);

impl OperatorMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Shape(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self(entries))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        Self(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.0
    }

    pub fn apply(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.dim(), z.len())?;
        Ok(&self.0 * z)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrize(&self) -> Self {
        Self((&self.0 + self.0.transpose()) * 0.5)
    }

    /// Largest absolute difference between `A` and `A^T`.
    pub fn asymmetry(&self) -> f64 {
        let p = self.dim();
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in (i + 1)..p {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

/// `n` curves stored as an `n x p` matrix of basis coefficients; row `i` is
/// observation `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    coeffs: DMatrix<f64>,
    basis: BasisDescriptor,
}

impl FunctionalSample {
    pub fn new(coeffs: DMatrix<f64>, basis: BasisDescriptor) -> Result<Self> {
        check_len(basis.dimension, coeffs.ncols())?;
        if coeffs.nrows() == 0 {
            return Err(Error::SampleSize {
                required: 1,
                got: 0,
            });
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("sample contains non-finite values".into()));
        }
        Ok(Self { coeffs, basis })
    }

    pub fn from_rows(rows: &[Vec<f64>], basis: BasisDescriptor) -> Result<Self> {
        let p = basis.dimension;
        for row in rows {
            check_len(p, row.len())?;
        }
        let coeffs = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(coeffs, basis)
    }

    pub fn n(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn p(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn basis(&self) -> BasisDescriptor {
        self.basis
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DMatrix<f64> {
        self.coeffs
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.coeffs.row(i).transpose()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.row_mean().transpose()
    }

    /// Adds the same curve to every observation.
    pub fn shifted(&self, curve: &DVector<f64>) -> Result<Self> {
        check_len(self.p(), curve.len())?;
        let mut coeffs = self.coeffs.clone();
        for mut row in coeffs.row_iter_mut() {
            row += curve.transpose();
        }
        Self::new(coeffs, self.basis)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.coeffs * c, self.basis)
    }

    pub(crate) fn require(&self, n_min: usize) -> Result<()> {
        if self.n() < n_min {
            Err(Error::SampleSize {
                required: n_min,
                got: self.n(),
            })
        } else {
            Ok(())
        }
    }
}
