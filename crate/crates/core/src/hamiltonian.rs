//! Bare Hamiltonians `H = sum_i eps_i E |eps_i><eps_i|`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, check_dims, eigh, CMatrix};
use crate::state::DensityMatrix;

/// Hermitian observable stored through its spectral data. Levels are
/// dimensionless and ascending; energies are `level * unit_energy`.
#[derive(Debug, Clone)]
pub struct ObservableHamiltonian {
    unit_energy: f64,
    levels: Vec<f64>,
    eigenbasis: CMatrix,
}

impl ObservableHamiltonian {
    /// Hamiltonian diagonal in the computational basis, `levels[k]` being the
    /// level of basis state `|k>`. Levels need not be sorted.
    pub fn from_levels(levels: &[f64], unit_energy: f64) -> Result<Self> {
        check_unit_energy(unit_energy)?;
        if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "energy levels must be finite and non-empty, got {levels:?}"
            )));
        }
        let n = levels.len();
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort keeps degenerate levels in basis order
        order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        let eigenbasis = CMatrix::from_fn(n, n, |i, j| {
            if order[j] == i {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        Ok(Self {
            unit_energy,
            levels: order.iter().map(|&k| levels[k]).collect(),
            eigenbasis,
        })
    }

    /// Diagonalises a Hermitian matrix given in absolute energy units.
    pub fn from_matrix(h: &CMatrix, unit_energy: f64) -> Result<Self> {
        check_unit_energy(unit_energy)?;
        let spectral = eigh(h)?;
        Ok(Self {
            unit_energy,
            levels: spectral
                .eigenvalues
                .iter()
                .map(|e| e / unit_energy)
                .collect(),
            eigenbasis: spectral.eigenvectors,
        })
    }

    /// Explicit spectral data; the basis must be unitary and the levels ascending.
    pub fn from_spectral(levels: Vec<f64>, eigenbasis: CMatrix, unit_energy: f64) -> Result<Self> {
        check_unit_energy(unit_energy)?;
        check_dims(levels.len(), eigenbasis.nrows())?;
        linalg::check_unitary(&eigenbasis)?;
        if levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParams("levels must be ascending".into()));
        }
        Ok(Self {
            unit_energy,
            levels,
            eigenbasis,
        })
    }

    /// `H_A (x) I + I (x) H_B`, in the unit energy of `h_a`.
    pub fn bipartite(h_a: &Self, h_b: &Self) -> Self {
        let (da, db) = (h_a.dim(), h_b.dim());
        let ratio = h_b.unit_energy / h_a.unit_energy;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(da * db);
        for i in 0..da {
            for j in 0..db {
                pairs.push((h_a.levels[i] + ratio * h_b.levels[j], i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let basis = linalg::kron(&h_a.eigenbasis, &h_b.eigenbasis);
        let n = da * db;
        let eigenbasis = CMatrix::from_fn(n, n, |row, col| {
            let (_, i, j) = pairs[col];
            basis[(row, i * db + j)]
        });
        Self {
            unit_energy: h_a.unit_energy,
            levels: pairs.iter().map(|p| p.0).collect(),
            eigenbasis,
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn unit_energy(&self) -> f64 {
        self.unit_energy
    }

    /// Dimensionless levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Energies `eps_i * E`, ascending.
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l * self.unit_energy).collect()
    }

    /// Columns are the energy eigenvectors in level order.
    pub fn eigenbasis(&self) -> &CMatrix {
        &self.eigenbasis
    }

    pub fn matrix(&self) -> CMatrix {
        let v = &self.eigenbasis;
        let energies = self.energies();
        let scaled = CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * energies[j]);
        scaled * v.adjoint()
    }

    /// `V^dagger M V`: the matrix in the energy eigenbasis.
    pub fn to_energy_basis(&self, m: &CMatrix) -> CMatrix {
        self.eigenbasis.adjoint() * m * &self.eigenbasis
    }

    /// `Tr(H)`.
    pub fn trace(&self) -> f64 {
        self.energies().iter().sum()
    }
}

fn check_unit_energy(e: f64) -> Result<()> {
    if e.is_finite() && e > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "unit energy must be positive, got {e}"
        )))
    }
}

/// `Tr(rho H)`.
pub fn expectation(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    check_dims(h.dim(), rho.dim())?;
    let in_basis = h.to_energy_basis(rho.matrix());
    let energies = h.energies();
    let value: f64 = (0..h.dim()).map(|i| in_basis[(i, i)].re * energies[i]).sum();
    Ok(value)
}
