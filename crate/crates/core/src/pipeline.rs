//! End-to-end simulated experiment: prepare `|Phi(theta)>`, add noise, count
//! coincidences, reconstruct by maximum likelihood and evaluate every battery,
//! resource and entanglement quantity with bootstrap error bars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::battery::{capacity, capacity_gap, qubit_hamiltonian, QubitBatteryParams};
use crate::error::{Error, Result};
use crate::photonics::{
    self, apply_noise, polarization_hamiltonian, prepare_phi, NoiseModel, SourceConfig,
    DEFAULT_MEAN_COUNTS, DEFAULT_NOISE_STRENGTH,
};
use crate::resources::{
    self, check_relations, concurrence, eof_from_concurrence, geometric_from_concurrence,
    RelationReport,
};
use crate::state::{fidelity, partial_trace, DensityMatrix, Subsystem};
use crate::tomography::{bootstrap_many, mle_reconstruct, MleOptions};

/// Output file format for figure tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

pub const DEFAULT_THETAS: [f64; 4] = [15.0, 30.0, 45.0, 60.0];
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Pipeline configuration; the JSON config file uses these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Degrees.
    pub thetas: Vec<f64>,
    pub unit_energy: f64,
    pub noise_model: NoiseModel,
    pub noise_strength: f64,
    pub mean_counts_per_setting: f64,
    pub seed: u64,
    pub tsallis_q: f64,
    pub bootstrap_resamples: usize,
    pub output_dir: String,
    pub format: ReportFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            thetas: DEFAULT_THETAS.to_vec(),
            unit_energy: 1.0,
            noise_model: NoiseModel::White,
            noise_strength: DEFAULT_NOISE_STRENGTH,
            mean_counts_per_setting: DEFAULT_MEAN_COUNTS,
            seed: DEFAULT_SEED,
            tsallis_q: 2.0,
            bootstrap_resamples: 200,
            output_dir: "report".into(),
            format: ReportFormat::Json,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::InvalidConfig("thetas must not be empty".into()));
        }
        for &theta in &self.thetas {
            self.source(theta, 0).validate()?;
        }
        if !(self.unit_energy > 0.0) || !self.unit_energy.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "unit_energy must be positive, got {}",
                self.unit_energy
            )));
        }
        if !(self.tsallis_q >= 2.0) {
            return Err(Error::InvalidOrder(self.tsallis_q));
        }
        if self.bootstrap_resamples < 2 {
            return Err(Error::InvalidConfig(
                "bootstrap_resamples must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Source settings for one angle; `index` selects an independent seed.
    pub fn source(&self, theta: f64, index: usize) -> SourceConfig {
        SourceConfig {
            theta,
            noise_model: self.noise_model,
            noise_strength: self.noise_strength,
            mean_counts_per_setting: self.mean_counts_per_setting,
            seed: derive_seed(self.seed, index as u64),
        }
    }

    /// SHA-256 of the config's JSON encoding (sorted keys).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// SplitMix64 mix of a base seed and a tag, for independent sub-streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const BOOTSTRAP_TAG: u64 = 1 << 32;

/// Every scalar reported for a two-photon state. Single-photon quantities
/// refer to path I (photon A) with `H_A = E|H><H|`; capacities are in units
/// of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateQuantities {
    pub capacity: f64,
    pub ergotropy: f64,
    pub antiergotropy: f64,
    pub von_neumann: f64,
    pub tsallis: f64,
    pub linear_entropy: f64,
    pub l1_coherence: f64,
    pub relative_entropy_coherence: f64,
    pub csu: f64,
    pub ctu: f64,
    pub clu: f64,
    pub ccu: f64,
    pub capacity_gap: f64,
    pub concurrence: f64,
    pub eof: f64,
    pub geometric: f64,
}

impl StateQuantities {
    pub const NAMES: [&'static str; 16] = [
        "capacity",
        "ergotropy",
        "antiergotropy",
        "von_neumann",
        "tsallis",
        "linear_entropy",
        "l1_coherence",
        "relative_entropy_coherence",
        "csu",
        "ctu",
        "clu",
        "ccu",
        "capacity_gap",
        "concurrence",
        "eof",
        "geometric",
    ];

    pub fn values(&self) -> [f64; 16] {
        [
            self.capacity,
            self.ergotropy,
            self.antiergotropy,
            self.von_neumann,
            self.tsallis,
            self.linear_entropy,
            self.l1_coherence,
            self.relative_entropy_coherence,
            self.csu,
            self.ctu,
            self.clu,
            self.ccu,
            self.capacity_gap,
            self.concurrence,
            self.eof,
            self.geometric,
        ]
    }

    pub fn from_values(v: &[f64]) -> Self {
        assert_eq!(v.len(), Self::NAMES.len());
        Self {
            capacity: v[0],
            ergotropy: v[1],
            antiergotropy: v[2],
            von_neumann: v[3],
            tsallis: v[4],
            linear_entropy: v[5],
            l1_coherence: v[6],
            relative_entropy_coherence: v[7],
            csu: v[8],
            ctu: v[9],
            clu: v[10],
            ccu: v[11],
            capacity_gap: v[12],
            concurrence: v[13],
            eof: v[14],
            geometric: v[15],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|k| self.values()[k])
    }

    pub fn relations(&self, tolerance: f64) -> RelationReport {
        RelationReport {
            csu: self.csu,
            ctu: self.ctu,
            clu: self.clu,
            ccu: self.ccu,
            csu_holds: self.csu >= 1.0 - tolerance,
            ctu_holds: self.ctu <= 1.0 + tolerance,
            clu_holds: (self.clu - 1.0).abs() <= tolerance,
            ccu_holds: self.ccu >= -tolerance,
            tolerance,
        }
    }
}

/// Evaluates all reported quantities of a two-photon state.
pub fn analyze_state(rho_ab: &DensityMatrix, unit_energy: f64, q: f64) -> Result<StateQuantities> {
    crate::linalg::check_dims(4, rho_ab.dim())?;
    let h = polarization_hamiltonian(unit_energy)?;
    let rho_a = partial_trace(rho_ab, Subsystem::A)?;
    let battery = capacity(&rho_a, &h)?;
    let relations = check_relations(&rho_a, &h, q, resources::EXPERIMENTAL_TOLERANCE)?;
    let c = concurrence(rho_ab)?;
    Ok(StateQuantities {
        capacity: battery.capacity / unit_energy,
        ergotropy: battery.ergotropy / unit_energy,
        antiergotropy: battery.antiergotropy / unit_energy,
        von_neumann: resources::von_neumann_entropy(&rho_a)?,
        tsallis: resources::tsallis_entropy(&rho_a, q)?,
        linear_entropy: resources::linear_entropy(&rho_a),
        l1_coherence: resources::l1_coherence(&rho_a, &h)?,
        relative_entropy_coherence: resources::relative_entropy_coherence(&rho_a, &h)?,
        csu: relations.csu,
        ctu: relations.ctu,
        clu: relations.clu,
        ccu: relations.ccu,
        capacity_gap: capacity_gap(rho_ab, &h, &h)? / unit_energy,
        concurrence: c,
        eof: eof_from_concurrence(c),
        geometric: geometric_from_concurrence(c),
    })
}

/// Quantities of the exact (optionally noisy) source state, no sampling.
pub fn analytic_quantities(
    theta: f64,
    noise_model: NoiseModel,
    noise_strength: f64,
    unit_energy: f64,
    q: f64,
) -> Result<StateQuantities> {
    let rho = apply_noise(&prepare_phi(theta)?, noise_model, noise_strength)?;
    analyze_state(&rho, unit_energy, q)
}

/// One angle of the report.
#[derive(Debug, Clone)]
pub struct ThetaRow {
    pub theta: f64,
    /// Reconstructed two-photon state.
    pub rho: DensityMatrix,
    /// Point estimates from `rho`.
    pub values: StateQuantities,
    /// Bootstrap standard deviations.
    pub errors: StateQuantities,
    /// Bootstrap means.
    pub bootstrap_means: StateQuantities,
    pub fidelity_to_ideal: f64,
    pub fidelity_to_target: f64,
    pub log_likelihood: f64,
    pub mle_iterations: usize,
    pub mle_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: PipelineConfig,
    pub rows: Vec<ThetaRow>,
    pub metadata: ReportMetadata,
}

impl ReportBundle {
    /// A bundle with no rows, e.g. for a config without angles.
    pub fn empty(config: PipelineConfig) -> Self {
        let metadata = metadata(&config);
        Self {
            config,
            rows: Vec::new(),
            metadata,
        }
    }
}

fn metadata(config: &PipelineConfig) -> ReportMetadata {
    ReportMetadata {
        seed: config.seed,
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn stage<T>(theta: f64, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|source| Error::Stage {
        theta,
        stage,
        source: Box::new(source),
    })
}

fn run_theta(config: &PipelineConfig, index: usize, theta: f64) -> Result<ThetaRow> {
    let source = config.source(theta, index);
    let ideal = stage(theta, "prepare", prepare_phi(theta))?;
    let target = stage(theta, "noise", source.prepared_state())?;
    let records = stage(theta, "simulate", source.simulate())?;
    let options = MleOptions::default();
    let mle = stage(theta, "reconstruct", mle_reconstruct(&records, None, &options))?;
    let (e, q) = (config.unit_energy, config.tsallis_q);
    let values = stage(theta, "analyze", analyze_state(&mle.rho, e, q))?;
    let start = mle.rho.matrix().clone();
    let estimates = stage(
        theta,
        "bootstrap",
        bootstrap_many(
            &records,
            |resampled| {
                let fit = mle_reconstruct(resampled, Some(&start), &options)?;
                Ok(analyze_state(&fit.rho, e, q)?.values().to_vec())
            },
            config.bootstrap_resamples,
            derive_seed(config.seed, BOOTSTRAP_TAG + index as u64),
        ),
    )?;
    let stds: Vec<f64> = estimates.iter().map(|b| b.std).collect();
    let means: Vec<f64> = estimates.iter().map(|b| b.mean).collect();
    Ok(ThetaRow {
        theta,
        values,
        errors: StateQuantities::from_values(&stds),
        bootstrap_means: StateQuantities::from_values(&means),
        fidelity_to_ideal: stage(theta, "fidelity", fidelity(&mle.rho, &ideal))?,
        fidelity_to_target: stage(theta, "fidelity", fidelity(&mle.rho, &target))?,
        log_likelihood: mle.log_likelihood,
        mle_iterations: mle.iterations,
        mle_converged: mle.converged,
        rho: mle.rho,
    })
}

/// Runs every angle of `config`. Rows come back in config order and the
/// result depends only on the config (seed included).
pub fn run_pipeline(config: &PipelineConfig) -> Result<ReportBundle> {
    config.validate()?;
    let rows = config
        .thetas
        .par_iter()
        .enumerate()
        .map(|(index, &theta)| run_theta(config, index, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportBundle {
        config: config.clone(),
        rows,
        metadata: metadata(config),
    })
}

/// Tsallis orders swept by [`verify_relations`].
pub const RELATION_ORDERS: [f64; 4] = [2.0, 2.5, 3.0, 5.0];

#[derive(Debug, Clone, Serialize)]
pub struct RelationViolation {
    pub sample: usize,
    pub params: QubitBatteryParams,
    pub q: f64,
    pub report: RelationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationSweep {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub violations: Vec<RelationViolation>,
}

/// Random qubit battery state: `p` uniform, `r` uniform on its allowed
/// range, phase uniform.
pub fn random_qubit_params<R: Rng + ?Sized>(rng: &mut R) -> QubitBatteryParams {
    let p: f64 = rng.random();
    let r = rng.random::<f64>() * (p * (1.0 - p)).sqrt();
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    QubitBatteryParams { p, r, phase }
}

const SWEEP_CHUNK: usize = 4096;

/// Checks the four capacity relations on `samples` random qubit states
/// with `H = E|1><1|`, for every order in [`RELATION_ORDERS`].
pub fn verify_relations(samples: usize, seed: u64, tolerance: f64) -> Result<RelationSweep> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be at least 1".into()));
    }
    let h = qubit_hamiltonian(1.0)?;
    let chunks = samples.div_ceil(SWEEP_CHUNK);
    let found = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let first = chunk * SWEEP_CHUNK;
            let mut violations = Vec::new();
            for sample in first..samples.min(first + SWEEP_CHUNK) {
                let params = random_qubit_params(&mut rng);
                let rho = params.density()?;
                for q in RELATION_ORDERS {
                    let report = check_relations(&rho, &h, q, tolerance)?;
                    if !report.all_hold() {
                        violations.push(RelationViolation {
                            sample,
                            params,
                            q,
                            report,
                        });
                    }
                }
            }
            Ok(violations)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RelationSweep {
        samples,
        seed,
        tolerance,
        violations: found.into_iter().flatten().collect(),
    })
}

/// Simulated counts for one angle of a config.
pub fn simulate_theta(config: &PipelineConfig, theta: f64) -> Result<Vec<photonics::CountRecord>> {
    let index = config.thetas.iter().position(|&t| t == theta).unwrap_or(0);
    config.source(theta, index).simulate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values_match_closed_forms() {
        for theta in DEFAULT_THETAS {
            let t = theta.to_radians();
            let q = analytic_quantities(theta, NoiseModel::None, 0.0, 1.0, 2.0).unwrap();
            assert!((q.capacity - (2.0 * t).cos().abs()).abs() < 1e-9);
            let h = resources::binary_entropy(t.cos().powi(2));
            assert!((q.von_neumann - h).abs() < 1e-9);
            assert!(q.l1_coherence.abs() < 1e-9);
            assert!((q.capacity_gap - 2.0 * (1.0 - (2.0 * t).cos().abs())).abs() < 1e-9);
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let config = PipelineConfig::default();
        assert!(config.validate().is_ok());
        let parsed: PipelineConfig = serde_json::from_str(r#"{"thetas": [30], "seed": 5}"#).unwrap();
        assert_eq!(parsed.thetas, vec![30.0]);
        assert_eq!(parsed.bootstrap_resamples, 200);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
        let bad = PipelineConfig { thetas: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { noise_strength: 2.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidStrength(_))));
        let bad = PipelineConfig { thetas: vec![100.0], ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidAngle(_))));
        assert_eq!(config.hash(), PipelineConfig::default().hash());
        assert_ne!(config.hash(), PipelineConfig { seed: 1, ..Default::default() }.hash());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
    }

    #[test]
    fn verify_relations_small_sweep() {
        let sweep = verify_relations(500, 3, 1e-9).unwrap();
        assert!(sweep.violations.is_empty());
        let inverted = verify_relations(10, 3, -1.0).unwrap();
        assert_eq!(inverted.violations.len(), 10 * RELATION_ORDERS.len());
        assert!(verify_relations(0, 3, 1e-9).is_err());
    }
}
