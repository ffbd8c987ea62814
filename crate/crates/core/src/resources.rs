//! Entropies, coherence and two-qubit entanglement measures, plus checks of
//! the capacity trade-off relations for qubit batteries:
//!
//! ```text
//! CSU = C/E + S(rho)        >= 1
//! CTU = C/E + T_q(rho)      <= 1     (q >= 2)
//! CLU = C^2/E^2 + 2 L(rho)   = 1
//! CCU = C/E - Cohe_l1(rho)  >= 0
//! ```
//!
//! Entropies use log base 2. Coherence is measured in the eigenbasis of the
//! supplied Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::battery::{capacity, QubitBatteryParams};
use crate::error::{Error, Result};
use crate::hamiltonian::ObservableHamiltonian;
use crate::linalg::{self, check_dims, kron};
use crate::state::DensityMatrix;

/// Default tolerance for relation checks on analytic states.
pub const ANALYTIC_TOLERANCE: f64 = 1e-9;
/// Default tolerance for relation checks on reconstructed states.
pub const EXPERIMENTAL_TOLERANCE: f64 = 0.02;

/// `-sum x log2 x` with `0 log 0 = 0`.
fn shannon_bits(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Binary entropy `h(t)`.
pub fn binary_entropy(t: f64) -> f64 {
    shannon_bits([t, 1.0 - t])
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(shannon_bits(rho.eigenvalues()?))
}

/// Tsallis entropy `(1 - Tr rho^q) / (q - 1)` for `q > 1`.
pub fn tsallis_entropy(rho: &DensityMatrix, q: f64) -> Result<f64> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidOrder(q));
    }
    let moment: f64 = rho.eigenvalues()?.iter().map(|l| l.powf(q)).sum();
    Ok((1.0 - moment) / (q - 1.0))
}

/// `1 - Tr rho^2`.
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    1.0 - rho.purity()
}

/// Sum of off-diagonal moduli in the energy eigenbasis.
pub fn l1_coherence(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    check_dims(h.dim(), rho.dim())?;
    let m = h.to_energy_basis(rho.matrix());
    let n = m.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += m[(i, j)].norm();
            }
        }
    }
    Ok(total)
}

/// `S(Delta(rho)) - S(rho)` with `Delta` the dephasing in the energy eigenbasis.
pub fn relative_entropy_coherence(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    check_dims(h.dim(), rho.dim())?;
    let m = h.to_energy_basis(rho.matrix());
    let dephased = shannon_bits((0..m.nrows()).map(|i| m[(i, i)].re.max(0.0)));
    Ok((dephased - von_neumann_entropy(rho)?).max(0.0))
}

/// Robustness of coherence of a qubit in the closed form `2r`.
pub fn robustness_of_coherence_qubit(params: &QubitBatteryParams) -> Result<f64> {
    params.validate()?;
    Ok(2.0 * params.r)
}

/// Robustness of coherence of a general state. Only qubits are supported,
/// where it coincides with the l1 coherence.
pub fn robustness_of_coherence(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            supported: 2,
            found: rho.dim(),
        });
    }
    l1_coherence(rho, h)
}

/// Wootters concurrence of a two-qubit state, conjugating in the
/// computational basis.
pub fn concurrence(rho_ab: &DensityMatrix) -> Result<f64> {
    check_dims(4, rho_ab.dim())?;
    let yy = kron(&linalg::pauli_y(), &linalg::pauli_y());
    let rho = rho_ab.matrix();
    let flipped = &yy * rho.map(|z| z.conj()) * &yy;
    // The eigenvalues of rho * flipped equal those of the Hermitian matrix
    // sqrt(rho) flipped sqrt(rho), which avoids a non-Hermitian eigensolve.
    let s = linalg::sqrtm_psd(rho)?;
    let r = linalg::hermitian_part(&(&s * flipped * &s));
    let mut roots: Vec<f64> = linalg::eigvalsh(&r)?
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).max(0.0))
}

/// `sqrt(1 - C^2)`, guarded against rounding above 1.
fn concurrence_complement(c: f64) -> f64 {
    (1.0 - c * c).max(0.0).sqrt()
}

/// Entanglement of formation from a concurrence value.
pub fn eof_from_concurrence(c: f64) -> f64 {
    binary_entropy((1.0 + concurrence_complement(c)) / 2.0)
}

/// Geometric measure of entanglement from a concurrence value.
pub fn geometric_from_concurrence(c: f64) -> f64 {
    (1.0 - concurrence_complement(c)) / 2.0
}

pub fn entanglement_of_formation(rho_ab: &DensityMatrix) -> Result<f64> {
    Ok(eof_from_concurrence(concurrence(rho_ab)?))
}

pub fn geometric_measure(rho_ab: &DensityMatrix) -> Result<f64> {
    Ok(geometric_from_concurrence(concurrence(rho_ab)?))
}

/// Entanglement summary of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub capacity_gap: f64,
    pub concurrence: f64,
    pub eof: f64,
    pub geometric: f64,
}

pub fn entanglement_report(
    rho_ab: &DensityMatrix,
    h_a: &ObservableHamiltonian,
    h_b: &ObservableHamiltonian,
) -> Result<EntanglementReport> {
    let c = concurrence(rho_ab)?;
    Ok(EntanglementReport {
        capacity_gap: crate::battery::capacity_gap(rho_ab, h_a, h_b)?,
        concurrence: c,
        eof: eof_from_concurrence(c),
        geometric: geometric_from_concurrence(c),
    })
}

/// Values of the four capacity relations for one qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    /// `C/E + S`
    pub csu: f64,
    /// `C/E + T_q`
    pub ctu: f64,
    /// `C^2/E^2 + 2L`
    pub clu: f64,
    /// `C/E - Cohe_l1`
    pub ccu: f64,
    pub csu_holds: bool,
    pub ctu_holds: bool,
    pub clu_holds: bool,
    pub ccu_holds: bool,
    pub tolerance: f64,
}

impl RelationReport {
    pub fn all_hold(&self) -> bool {
        self.csu_holds && self.ctu_holds && self.clu_holds && self.ccu_holds
    }
}

/// Evaluates the four relations for a qubit battery with Tsallis order `q >= 2`.
pub fn check_relations(
    rho: &DensityMatrix,
    h: &ObservableHamiltonian,
    q: f64,
    tolerance: f64,
) -> Result<RelationReport> {
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            supported: 2,
            found: rho.dim(),
        });
    }
    if !(q >= 2.0) {
        return Err(Error::InvalidOrder(q));
    }
    let cap = capacity(rho, h)?.capacity / h.unit_energy();
    let csu = cap + von_neumann_entropy(rho)?;
    let ctu = cap + tsallis_entropy(rho, q)?;
    let clu = cap * cap + 2.0 * linear_entropy(rho);
    let ccu = cap - l1_coherence(rho, h)?;
    Ok(RelationReport {
        csu,
        ctu,
        clu,
        ccu,
        csu_holds: csu >= 1.0 - tolerance,
        ctu_holds: ctu <= 1.0 + tolerance,
        clu_holds: (clu - 1.0).abs() <= tolerance,
        ccu_holds: ccu >= -tolerance,
        tolerance,
    })
}
