//! Density matrices and the state-level primitives built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_dims, check_square, eigh, hermitian_part, hermiticity_deviation, CMatrix,
    CVector, SpectralDecomposition, C64, TOL_HERM,
};

/// Trace slack accepted by [`validate_density`].
pub const TOL_TRACE: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const TOL_PSD: f64 = 1e-10;

/// A validated quantum state: Hermitian, unit trace and positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

/// Subsystem of a two-qubit state. `A` is the left tensor factor (path I).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Validates `m` as a density matrix, reporting the first violated invariant.
pub fn validate_density(m: &CMatrix) -> Result<DensityMatrix> {
    check_square(m)?;
    let deviation = hermiticity_deviation(m);
    if deviation > TOL_HERM {
        return Err(Error::NotHermitian { deviation });
    }
    let tr = linalg::trace(m).re;
    if (tr - 1.0).abs() > TOL_TRACE {
        return Err(Error::TraceNotOne { trace: tr });
    }
    let matrix = hermitian_part(m);
    let min_eigenvalue = linalg::eigvalsh(&matrix)?[0];
    if min_eigenvalue < -TOL_PSD {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    Ok(DensityMatrix { matrix })
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_density(&m)
    }

    /// Skips validation. Callers must guarantee the invariants.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        DensityMatrix {
            matrix: hermitian_part(&m),
        }
    }

    /// `|psi><psi|` for a (not necessarily normalised) nonzero vector.
    pub fn pure(psi: &[C64]) -> Self {
        let v = CVector::from_column_slice(psi);
        let norm2 = v.norm_squared();
        assert!(norm2 > 0.0, "zero state vector");
        Self::from_trusted(&v * v.adjoint() / c(norm2, 0.0))
    }

    /// Computational basis state `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut psi = vec![c(0.0, 0.0); dim];
        psi[index] = c(1.0, 0.0);
        Self::pure(&psi)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim) / c(dim as f64, 0.0))
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        validate_density(&linalg::diag(populations))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn spectrum(&self) -> Result<SpectralDecomposition> {
        eigh(&self.matrix)
    }

    /// Eigenvalues in ascending order with residues in `(-TOL_PSD, 0)` set to 0.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut values = linalg::eigvalsh(&self.matrix)?;
        for v in &mut values {
            if *v < 0.0 {
                if *v < -TOL_PSD {
                    return Err(Error::NotPositive { min_eigenvalue: *v });
                }
                *v = 0.0;
            }
        }
        Ok(values)
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }
}

/// Partial trace of a 2x2 bipartite state, keeping `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    check_dims(4, rho.dim())?;
    let m = rho.matrix();
    let mut out = CMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = (0..2)
                .map(|k| match keep {
                    Subsystem::A => m[(2 * i + k, 2 * j + k)],
                    Subsystem::B => m[(2 * k + i, 2 * k + j)],
                })
                .sum();
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2`, clamped to `[0, 1]`.
pub fn fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    check_dims(rho1.dim(), rho2.dim())?;
    let s = linalg::sqrtm_psd(rho1.matrix())?;
    let inner = hermitian_part(&(&s * rho2.matrix() * &s));
    let root_trace: f64 = linalg::eigvalsh(&inner)?
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `rho_A (x) rho_B` with `rho_A` as the left factor.
pub fn tensor(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_trusted(linalg::kron(rho_a.matrix(), rho_b.matrix()))
}

/// `U rho U^dagger`; `U` must be unitary within [`TOL_HERM`].
pub fn apply_unitary(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    check_square(u)?;
    check_dims(rho.dim(), u.nrows())?;
    linalg::check_unitary(u)?;
    Ok(DensityMatrix::from_trusted(linalg::conjugate_by(
        u,
        rho.matrix(),
    )))
}

/// Serialisable form of a matrix: rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_abs_diff, pauli_x};

    fn phi(theta_deg: f64) -> DensityMatrix {
        let t = theta_deg.to_radians();
        DensityMatrix::pure(&[
            c(0.0, 0.0),
            c(t.cos(), 0.0),
            c(t.sin(), 0.0),
            c(0.0, 0.0),
        ])
    }

    #[test]
    fn validate_examples() {
        assert!(validate_density(&diag(&[0.5, 0.5])).is_ok());
        assert!(matches!(
            validate_density(&diag(&[1.2, -0.2])),
            Err(Error::NotPositive { min_eigenvalue }) if (min_eigenvalue + 0.2).abs() < 1e-12
        ));
        assert!(matches!(
            validate_density(&diag(&[0.6, 0.6])),
            Err(Error::TraceNotOne { trace }) if (trace - 1.2).abs() < 1e-12
        ));
        let skew = linalg::from_rows(2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(matches!(
            validate_density(&skew),
            Err(Error::NotHermitian { .. })
        ));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(
            validate_density(&rect),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn partial_trace_examples() {
        let hv = DensityMatrix::basis(4, 1);
        let a = partial_trace(&hv, Subsystem::A).unwrap();
        assert!(max_abs_diff(a.matrix(), &diag(&[1.0, 0.0])) < 1e-15);
        let b = partial_trace(&hv, Subsystem::B).unwrap();
        assert!(max_abs_diff(b.matrix(), &diag(&[0.0, 1.0])) < 1e-15);

        let bell = partial_trace(&phi(45.0), Subsystem::A).unwrap();
        assert!(max_abs_diff(bell.matrix(), &diag(&[0.5, 0.5])) < 1e-15);

        let thirty = partial_trace(&phi(30.0), Subsystem::A).unwrap();
        assert!(max_abs_diff(thirty.matrix(), &diag(&[0.75, 0.25])) < 1e-15);

        let qubit = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            partial_trace(&qubit, Subsystem::A),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fidelity_examples() {
        let rho = phi(30.0);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-10);
        let h = DensityMatrix::basis(2, 0);
        let v = DensityMatrix::basis(2, 1);
        assert!(fidelity(&h, &v).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4);
        let f = fidelity(&phi(45.0), &mixed).unwrap();
        assert!((f - 0.25).abs() < 1e-10);
        assert!((fidelity(&mixed, &phi(45.0)).unwrap() - 0.25).abs() < 1e-8);
        assert!(matches!(fidelity(&h, &mixed), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unitary_and_tensor_examples() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let same = apply_unitary(&rho, &linalg::identity(2)).unwrap();
        assert!(max_abs_diff(same.matrix(), rho.matrix()) < 1e-15);
        let swapped = apply_unitary(&rho, &pauli_x()).unwrap();
        assert!(max_abs_diff(swapped.matrix(), &diag(&[0.7, 0.3])) < 1e-15);

        let hv = tensor(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1));
        assert!(max_abs_diff(hv.matrix(), DensityMatrix::basis(4, 1).matrix()) < 1e-15);

        let not_unitary = diag(&[1.0, 0.5]);
        assert!(matches!(
            apply_unitary(&rho, &not_unitary),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            apply_unitary(&rho, &linalg::identity(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
