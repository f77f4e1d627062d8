//! Symmetric eigendecomposition and truncated inverse square roots.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::hilbert::{hs_norm, OperatorMatrix};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in descending (signed) order with matching orthonormal
/// eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> DVectorView<'_, f64> {
        self.vectors.column(j)
    }

    /// `sum_j lambda_j v_j v_j^T`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        let scaled = &self.vectors * DMatrix::from_diagonal(&self.values);
        OperatorMatrix::new(scaled * self.vectors.transpose()).expect("square")
    }

    /// Orthogonal projection onto the span of the leading `d` eigenvectors.
    pub fn projection(&self, d: usize) -> Result<OperatorMatrix> {
        check_rank(d, self.dim())?;
        let lead = self.vectors.columns(0, d);
        OperatorMatrix::new(&lead * lead.transpose())
    }

    /// Numerical zero for eigenvalues: `1e-12 * max(1, |lambda_1|)`.
    pub fn degeneracy_threshold(&self) -> f64 {
        let top = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-12 * top.max(1.0)
    }
}

fn check_rank(d: usize, p: usize) -> Result<()> {
    if d == 0 || d > p {
        Err(Error::Parameter(format!(
            "dimension d = {d} must satisfy 1 <= d <= {p}"
        )))
    } else {
        Ok(())
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Iterates full sweeps of plane rotations until the off-diagonal Frobenius
/// norm drops below `1e-13 * ||A||`. Eigenvectors are normalized so that their
/// largest-magnitude entry (lowest index on ties) is positive.
pub fn eig_sym(a: &OperatorMatrix) -> Result<EigenSystem> {
    let scale = hs_norm(a);
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL * scale.max(1.0) {
        return Err(Error::Shape(format!(
            "matrix is not symmetric (max deviation {asym:e})"
        )));
    }
    let p = a.dim();
    let mut m = a.symmetrize().into_entries();
    let mut v = DMatrix::<f64>::identity(p, p);
    let tol = OFF_DIAGONAL_TOL * scale;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= tol {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                rotate(&mut m, &mut v, i, j);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > tol {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]).then(x.cmp(&y)));
    let values = DVector::from_iterator(p, order.iter().map(|&k| m[(k, k)]));
    let mut vectors = DMatrix::zeros(p, p);
    for (col, &k) in order.iter().enumerate() {
        let mut vec = v.column(k).into_owned();
        let mut lead = 0;
        for r in 1..p {
            if vec[r].abs() > vec[lead].abs() {
                lead = r;
            }
        }
        if vec[lead] < 0.0 {
            vec.neg_mut();
        }
        vectors.set_column(col, &vec);
    }
    Ok(EigenSystem { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut s = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Annihilates `m[(i, j)]` with a plane rotation, accumulating it into `v`.
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, i: usize, j: usize) {
    let aij = m[(i, j)];
    if aij == 0.0 {
        return;
    }
    let theta = (m[(j, j)] - m[(i, i)]) / (2.0 * aij);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let p = m.nrows();
    for k in 0..p {
        let mki = m[(k, i)];
        let mkj = m[(k, j)];
        m[(k, i)] = c * mki - s * mkj;
        m[(k, j)] = s * mki + c * mkj;
    }
    for k in 0..p {
        let mik = m[(i, k)];
        let mjk = m[(j, k)];
        m[(i, k)] = c * mik - s * mjk;
        m[(j, k)] = s * mik + c * mjk;
    }
    m[(i, j)] = 0.0;
    m[(j, i)] = 0.0;
    for k in 0..p {
        let vki = v[(k, i)];
        let vkj = v[(k, j)];
        v[(k, i)] = c * vki - s * vkj;
        v[(k, j)] = s * vki + c * vkj;
    }
}

/// `sum_{j <= d} |lambda_j|^{-1/2} v_j v_j^T`.
///
/// Fails with [`Error::DegenerateSpectrum`] if any of the leading `d`
/// eigenvalues is within `eps` of zero.
pub fn truncated_invsqrt(eigen: &EigenSystem, d: usize, eps: f64) -> Result<OperatorMatrix> {
    check_rank(d, eigen.dim())?;
    check_spectrum(eigen, d, eps)?;
    let p = eigen.dim();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..d {
        let v = eigen.vector(j);
        out += (&v * v.transpose()) / eigen.values[j].abs().sqrt();
    }
    OperatorMatrix::new(out)
}

pub(crate) fn check_spectrum(eigen: &EigenSystem, d: usize, eps: f64) -> Result<()> {
    for j in 0..d {
        let value = eigen.values[j];
        if value.abs() <= eps {
            return Err(Error::DegenerateSpectrum {
                index: j + 1,
                value,
            });
        }
    }
    Ok(())
}

/// Hilbert-Schmidt distance between the rank-`d` eigenprojections.
pub fn subspace_distance(e1: &EigenSystem, e2: &EigenSystem, d: usize) -> Result<f64> {
    if e1.dim() != e2.dim() {
        return Err(Error::Dimension {
            expected: e1.dim(),
            got: e2.dim(),
        });
    }
    Ok(hs_norm(&(&e1.projection(d)? - &e2.projection(d)?)))
}
