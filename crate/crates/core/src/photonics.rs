//! Two-photon polarization source, projective measurements and Poissonian
//! coincidence counting.
//!
//! Polarization is encoded as `|H> = |0>`, `|V> = |1>`, photon A (path I) is
//! the left tensor factor. Outcome 0 of each basis is `H`, `D` or `L`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ObservableHamiltonian;
use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::state::{DensityMatrix, Subsystem};

/// Local polarization measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    HV,
    DA,
    LR,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::HV, Basis::DA, Basis::LR];

    /// The two outcome kets of this basis, outcome 0 first.
    pub fn kets(self) -> [[C64; 2]; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Basis::HV => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
            Basis::DA => [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
            Basis::LR => [[c(s, 0.0), c(0.0, s)], [c(s, 0.0), c(0.0, -s)]],
        }
    }

    /// Single-photon projector onto `outcome`.
    pub fn projector(self, outcome: usize) -> CMatrix {
        let v = CVector::from_column_slice(&self.kets()[outcome]);
        &v * v.adjoint()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
            Basis::LR => "LR",
        };
        f.write_str(name)
    }
}

/// Pair of local bases, one per photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub basis_a: Basis,
    pub basis_b: Basis,
}

impl MeasurementSetting {
    pub fn new(basis_a: Basis, basis_b: Basis) -> Self {
        Self { basis_a, basis_b }
    }

    /// Two-photon kets for outcomes `(a, b)` in the order 00, 01, 10, 11.
    pub fn kets(&self) -> [CVector; 4] {
        let ka = self.basis_a.kets();
        let kb = self.basis_b.kets();
        std::array::from_fn(|k| {
            let (a, b) = (k / 2, k % 2);
            CVector::from_fn(4, |i, _| ka[a][i / 2] * kb[b][i % 2])
        })
    }

    /// Rank-one projectors `Pi_a (x) Pi_b`, outcomes ordered 00, 01, 10, 11.
    pub fn projectors(&self) -> [CMatrix; 4] {
        self.kets().map(|v| &v * v.adjoint())
    }

    /// Born-rule probabilities of the four outcomes, clipped at zero.
    pub fn probabilities(&self, rho: &DensityMatrix) -> [f64; 4] {
        self.kets().map(|v| {
            (v.adjoint() * rho.matrix() * &v)[(0, 0)].re.max(0.0)
        })
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.basis_a, self.basis_b)
    }
}

/// The nine settings `{HV, DA, LR}^2` (36 projectors), informationally complete.
pub fn tomography_settings() -> Vec<MeasurementSetting> {
    Basis::ALL
        .iter()
        .flat_map(|&a| Basis::ALL.iter().map(move |&b| MeasurementSetting::new(a, b)))
        .collect()
}

/// Coincidence counts of one setting. Serialises as
/// `{"basis_A": "HV", "basis_B": "DA", "counts": [n00, n01, n10, n11]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    #[serde(rename = "basis_A")]
    pub basis_a: Basis,
    #[serde(rename = "basis_B")]
    pub basis_b: Basis,
    pub counts: [u64; 4],
}

impl CountRecord {
    pub fn setting(&self) -> MeasurementSetting {
        MeasurementSetting::new(self.basis_a, self.basis_b)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Kind of noise mixed into the prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    None,
    #[default]
    White,
    Dephasing,
}

/// White-noise strength giving fidelity 0.985 to a Bell target.
pub const DEFAULT_NOISE_STRENGTH: f64 = 0.02;
pub const DEFAULT_MEAN_COUNTS: f64 = 1e4;

/// Source parameters for a single prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Degrees, in `[0, 90]`.
    pub theta: f64,
    pub noise_model: NoiseModel,
    pub noise_strength: f64,
    pub mean_counts_per_setting: f64,
    pub seed: u64,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        check_strength(self.noise_strength)?;
        if !(self.mean_counts_per_setting > 0.0) || !self.mean_counts_per_setting.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mean_counts_per_setting must be positive, got {}",
                self.mean_counts_per_setting
            )));
        }
        Ok(())
    }

    /// The noisy state this source emits.
    pub fn prepared_state(&self) -> Result<DensityMatrix> {
        self.validate()?;
        apply_noise(&prepare_phi(self.theta)?, self.noise_model, self.noise_strength)
    }

    /// Simulated counts over the full tomography set.
    pub fn simulate(&self) -> Result<Vec<CountRecord>> {
        let rho = self.prepared_state()?;
        Ok(simulate_counts(
            &rho,
            &tomography_settings(),
            self.mean_counts_per_setting,
            self.seed,
        ))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=90.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidAngle(theta))
    }
}

fn check_strength(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidStrength(s))
    }
}

/// `|Phi(theta)> = cos(theta)|H>|V> + sin(theta)|V>|H>`, theta in degrees.
pub fn phi_vector(theta_deg: f64) -> Result<[C64; 4]> {
    check_theta(theta_deg)?;
    let t = theta_deg.to_radians();
    Ok([c(0.0, 0.0), c(t.cos(), 0.0), c(t.sin(), 0.0), c(0.0, 0.0)])
}

pub fn prepare_phi(theta_deg: f64) -> Result<DensityMatrix> {
    Ok(DensityMatrix::pure(&phi_vector(theta_deg)?))
}

/// Mixes `rho` with white noise, or damps its computational-basis coherences.
pub fn apply_noise(rho: &DensityMatrix, model: NoiseModel, strength: f64) -> Result<DensityMatrix> {
    check_strength(strength)?;
    let m = rho.matrix();
    let d = rho.dim();
    let out = match model {
        NoiseModel::None => m.clone(),
        NoiseModel::White => {
            m * c(1.0 - strength, 0.0) + linalg::identity(d) * c(strength / d as f64, 0.0)
        }
        NoiseModel::Dephasing => CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                m[(i, j)]
            } else {
                m[(i, j)] * (1.0 - strength)
            }
        }),
    };
    DensityMatrix::new(out)
}

/// Per-photon Hamiltonian `E|H><H|` used for both paths.
pub fn polarization_hamiltonian(unit_energy: f64) -> Result<ObservableHamiltonian> {
    ObservableHamiltonian::from_levels(&[1.0, 0.0], unit_energy)
}

/// Draws Poisson coincidence counts with mean `N Tr(rho Pi_a (x) Pi_b)` for
/// every outcome of every setting.
///
/// Setting `k` draws from its own ChaCha stream `k` of `seed`, so the output
/// does not depend on evaluation order.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    mean_counts: f64,
    seed: u64,
) -> Vec<CountRecord> {
    settings
        .iter()
        .enumerate()
        .map(|(k, setting)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let probabilities = setting.probabilities(rho);
            CountRecord {
                basis_a: setting.basis_a,
                basis_b: setting.basis_b,
                counts: probabilities.map(|p| poisson_draw(mean_counts * p, &mut rng)),
            }
        })
        .collect()
}

/// One Poisson draw; a zero mean gives zero counts.
pub fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(rng) as u64
}

/// `P(a, b | x, y) = N^{ab} / sum N`, outcomes ordered 00, 01, 10, 11.
pub fn joint_probability(record: &CountRecord) -> Result<[f64; 4]> {
    let total = record.total();
    if total == 0 {
        return Err(Error::EmptyRecord {
            setting: record.setting().to_string(),
        });
    }
    Ok(record.counts.map(|n| n as f64 / total as f64))
}

/// Marginal outcome distribution of one photon for each record.
pub fn marginal_probability(records: &[CountRecord], party: Subsystem) -> Result<Vec<[f64; 2]>> {
    records
        .iter()
        .map(|record| {
            let total = record.total();
            if total == 0 {
                return Err(Error::EmptyRecord {
                    setting: record.setting().to_string(),
                });
            }
            let n = record.counts;
            let zero = match party {
                Subsystem::A => n[0] + n[1],
                Subsystem::B => n[0] + n[2],
            };
            let p0 = zero as f64 / total as f64;
            Ok([p0, (total - zero) as f64 / total as f64])
        })
        .collect()
}
