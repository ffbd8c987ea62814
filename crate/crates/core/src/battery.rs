//! Ergotropy, antiergotropy and battery capacity.
//!
//! For a state with eigenvalues `lambda_0 <= ... <= lambda_{d-1}` and a bare
//! Hamiltonian with ascending levels `eps_i`, the unitary orbit of the state
//! has its lowest energy at the passive state (largest population in the
//! lowest level) and its highest energy at the active state (largest
//! population in the highest level):
//!
//! ```text
//! Tr(rho_passive H) = sum_i lambda_i eps_{d-1-i} E
//! Tr(rho_active  H) = sum_i lambda_i eps_i       E
//! ```
//!
//! Ergotropy is the energy above the passive state, antiergotropy the energy
//! below the active state, and the capacity is their sum, i.e. the full width
//! of the unitarily accessible energy window. Only the spectra of the state
//! and of the Hamiltonian enter the capacity.
//!
//! For a qubit whose populations have no preferred sign, `cos(2 theta)` can
//! be negative (e.g. `theta = 60 deg`); the capacity is always the absolute
//! value `|cos 2theta| E`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{expectation, ObservableHamiltonian};
use crate::linalg::{self, c, check_dims, CMatrix};
use crate::state::{partial_trace, DensityMatrix, Subsystem};

const CLAMP_TOL: f64 = 1e-10;

/// Energetic summary of a state relative to a bare Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryQuantities {
    pub ergotropy: f64,
    pub antiergotropy: f64,
    pub capacity: f64,
    pub passive_energy: f64,
    pub active_energy: f64,
    pub initial_energy: f64,
}

/// Bloch-type parameterisation of a qubit battery state
/// `[[1-p, r e^{i phase}], [r e^{-i phase}, p]]` with `H = E|1><1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBatteryParams {
    /// Excited-state population.
    pub p: f64,
    /// Coherence modulus, `0 <= r <= sqrt(p(1-p))`.
    pub r: f64,
    /// Coherence phase in radians.
    pub phase: f64,
}

impl QubitBatteryParams {
    pub fn new(p: f64, r: f64, phase: f64) -> Result<Self> {
        let params = Self { p, r, phase };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { p, r, phase } = *self;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("p = {p} outside [0, 1]")));
        }
        if r < 0.0 || !r.is_finite() {
            return Err(Error::InvalidParams(format!("r = {r} must be >= 0")));
        }
        if r * r > p * (1.0 - p) + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "r^2 = {} exceeds p(1-p) = {}",
                r * r,
                p * (1.0 - p)
            )));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidParams("phase must be finite".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> CMatrix {
        let off = num_complex::Complex64::from_polar(self.r, self.phase);
        linalg::from_rows(
            2,
            &[c(1.0 - self.p, 0.0), off, off.conj(), c(self.p, 0.0)],
        )
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        self.validate()?;
        DensityMatrix::new(self.matrix())
    }

    /// `sqrt((2p-1)^2 + 4r^2)`, the eigenvalue splitting.
    pub fn delta(&self) -> f64 {
        ((2.0 * self.p - 1.0).powi(2) + 4.0 * self.r * self.r).sqrt()
    }
}

/// The qubit Hamiltonian `E|1><1|`.
pub fn qubit_hamiltonian(unit_energy: f64) -> Result<ObservableHamiltonian> {
    ObservableHamiltonian::from_levels(&[0.0, 1.0], unit_energy)
}

/// Eigenvalues of `rho` paired with `H`'s eigenvectors, either anti-sorted
/// (passive) or sorted (active).
fn rearranged(
    rho: &DensityMatrix,
    h: &ObservableHamiltonian,
    passive: bool,
) -> Result<DensityMatrix> {
    check_dims(h.dim(), rho.dim())?;
    let lambdas = rho.eigenvalues()?;
    let d = lambdas.len();
    let weights: Vec<f64> = (0..d)
        .map(|level| {
            if passive {
                lambdas[d - 1 - level]
            } else {
                lambdas[level]
            }
        })
        .collect();
    let v = h.eigenbasis();
    let scaled = CMatrix::from_fn(d, d, |i, j| v[(i, j)] * weights[j]);
    Ok(DensityMatrix::from_trusted(scaled * v.adjoint()))
}

/// Lowest-energy state in the unitary orbit of `rho`.
pub fn passive_state(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<DensityMatrix> {
    rearranged(rho, h, true)
}

/// Highest-energy state in the unitary orbit of `rho`.
pub fn active_state(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<DensityMatrix> {
    rearranged(rho, h, false)
}

/// `sum_i lambda_i eps_{d-1-i} E`.
pub fn passive_energy(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    check_dims(h.dim(), rho.dim())?;
    let lambdas = rho.eigenvalues()?;
    let energies = h.energies();
    Ok(lambdas
        .iter()
        .zip(energies.iter().rev())
        .map(|(l, e)| l * e)
        .sum())
}

/// `sum_i lambda_i eps_i E`.
pub fn active_energy(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    check_dims(h.dim(), rho.dim())?;
    let lambdas = rho.eigenvalues()?;
    let energies = h.energies();
    Ok(lambdas.iter().zip(energies.iter()).map(|(l, e)| l * e).sum())
}

fn energy_scale(h: &ObservableHamiltonian) -> f64 {
    h.energies().iter().fold(1.0_f64, |acc, e| acc.max(e.abs()))
}

fn clamp_non_negative(value: f64, scale: f64, what: &str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::InternalConsistency(format!(
            "{what} is negative: {value:e}"
        )))
    }
}

/// Maximum work extractable by a cyclic unitary.
pub fn ergotropy(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    let initial = expectation(rho, h)?;
    clamp_non_negative(initial - passive_energy(rho, h)?, energy_scale(h), "ergotropy")
}

/// Maximum work that can be stored by a cyclic unitary.
pub fn antiergotropy(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<f64> {
    let initial = expectation(rho, h)?;
    clamp_non_negative(
        active_energy(rho, h)? - initial,
        energy_scale(h),
        "antiergotropy",
    )
}

/// Ergotropy, antiergotropy and their sum, the battery capacity.
pub fn capacity(rho: &DensityMatrix, h: &ObservableHamiltonian) -> Result<BatteryQuantities> {
    let initial_energy = expectation(rho, h)?;
    let passive = passive_energy(rho, h)?;
    let active = active_energy(rho, h)?;
    let scale = energy_scale(h);
    let ergotropy = clamp_non_negative(initial_energy - passive, scale, "ergotropy")?;
    let antiergotropy = clamp_non_negative(active - initial_energy, scale, "antiergotropy")?;
    Ok(BatteryQuantities {
        ergotropy,
        antiergotropy,
        capacity: ergotropy + antiergotropy,
        passive_energy: passive,
        active_energy: active,
        initial_energy,
    })
}

/// `E * sqrt((2p-1)^2 + 4r^2)`.
pub fn qubit_capacity_closed_form(params: &QubitBatteryParams, unit_energy: f64) -> Result<f64> {
    params.validate()?;
    Ok(unit_energy * params.delta())
}

/// Global capacity of `rho_AB` under `H_A (x) I + I (x) H_B` minus the two
/// local capacities of its marginals. Signed.
pub fn capacity_gap(
    rho_ab: &DensityMatrix,
    h_a: &ObservableHamiltonian,
    h_b: &ObservableHamiltonian,
) -> Result<f64> {
    check_dims(4, rho_ab.dim())?;
    check_dims(2, h_a.dim())?;
    check_dims(2, h_b.dim())?;
    let h_ab = ObservableHamiltonian::bipartite(h_a, h_b);
    let global = capacity(rho_ab, &h_ab)?.capacity;
    let local_a = capacity(&partial_trace(rho_ab, Subsystem::A)?, h_a)?.capacity;
    let local_b = capacity(&partial_trace(rho_ab, Subsystem::B)?, h_b)?.capacity;
    Ok(global - local_a - local_b)
}

/// Extreme energies found over an explicit set of unitaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkExtrema {
    pub min_energy: f64,
    pub max_energy: f64,
}

const ORACLE_CHUNK: usize = 1024;
const ORACLE_MAX_PERMUTATION_DIM: usize = 8;

/// Searches the unitary orbit of `rho` for its energy extremes by sampling
/// `n_samples` Haar unitaries plus every unitary that maps the eigenbasis
/// of `rho` onto a permutation of the energy eigenbasis.
///
/// This is a test oracle independent of the rearrangement formulas: it
/// only evaluates `Tr(U rho U^dagger H)`. Deterministic for a given seed.
pub fn brute_force_work_extrema(
    rho: &DensityMatrix,
    h: &ObservableHamiltonian,
    n_samples: usize,
    seed: u64,
) -> Result<WorkExtrema> {
    check_dims(h.dim(), rho.dim())?;
    let d = rho.dim();
    if d > ORACLE_MAX_PERMUTATION_DIM {
        return Err(Error::UnsupportedDimension {
            supported: ORACLE_MAX_PERMUTATION_DIM,
            found: d,
        });
    }
    let h_matrix = h.matrix();
    let energy = |u: &CMatrix| linalg::trace_product(&linalg::conjugate_by(u, rho.matrix()), &h_matrix).re;

    let rho_basis = rho.spectrum()?.eigenvectors;
    let mut extrema = WorkExtrema {
        min_energy: f64::INFINITY,
        max_energy: f64::NEG_INFINITY,
    };
    for perm in linalg::permutations(d) {
        let u = h.eigenbasis() * linalg::permutation_matrix(&perm) * rho_basis.adjoint();
        let e = energy(&u);
        extrema.min_energy = extrema.min_energy.min(e);
        extrema.max_energy = extrema.max_energy.max(e);
    }

    let chunks = n_samples.div_ceil(ORACLE_CHUNK);
    let sampled = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = ORACLE_CHUNK.min(n_samples - chunk * ORACLE_CHUNK);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..count {
                let e = energy(&linalg::haar_unitary(d, &mut rng));
                lo = lo.min(e);
                hi = hi.max(e);
            }
            (lo, hi)
        })
        .collect::<Vec<_>>();
    for (lo, hi) in sampled {
        extrema.min_energy = extrema.min_energy.min(lo);
        extrema.max_energy = extrema.max_energy.max(hi);
    }
    Ok(extrema)
}
