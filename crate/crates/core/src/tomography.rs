//! Two-qubit state reconstruction from coincidence counts.
//!
//! Linear inversion solves the Born-rule equations in the Pauli basis by least
//! squares and may return an unphysical matrix. Maximum likelihood then fits
//! `rho = T^dagger T / Tr(T^dagger T)` with `T` lower triangular (4 real
//! diagonal entries and 6 complex sub-diagonal entries), which is positive
//! semidefinite and unit-trace for every parameter value. The negative
//! per-count log-likelihood is minimised with L-BFGS and a backtracking line
//! search, so every accepted step strictly increases the likelihood.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::photonics::{joint_probability, poisson_draw, CountRecord};
use crate::state::{fidelity, matrix_to_json, DensityMatrix, MatrixJson};

const DIM: usize = 4;
/// Real parameters of a lower-triangular `T` with real diagonal.
pub const N_PARAMS: usize = DIM * DIM;
/// Identity admixture added to the starting point so every outcome has
/// nonzero probability.
pub const INIT_EPSILON: f64 = 1e-6;
const RANK_TOL: f64 = 1e-10;
const STALL_WINDOW: usize = 10;
const STALL_TOL: f64 = 1e-14;
const LBFGS_MEMORY: usize = 10;

/// Options for [`mle_reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Threshold on the max-norm of the per-count log-likelihood gradient.
    pub grad_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-8,
        }
    }
}

/// Outcome of a maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho: DensityMatrix,
    /// `sum_k n_k ln p_k` at the returned state.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was met or the objective stalled.
    pub converged: bool,
    /// Max-norm of the per-count gradient at the returned state.
    pub gradient_norm: f64,
    pub fidelity_to_target: Option<f64>,
}

impl TomographyResult {
    pub fn with_target(mut self, target: &DensityMatrix) -> Result<Self> {
        self.fidelity_to_target = Some(fidelity(&self.rho, target)?);
        Ok(self)
    }

    pub fn to_json(&self) -> TomographyJson {
        TomographyJson {
            rho: matrix_to_json(self.rho.matrix()),
            log_likelihood: self.log_likelihood,
            iterations: self.iterations,
            converged: self.converged,
            gradient_norm: self.gradient_norm,
            fidelity_to_target: self.fidelity_to_target,
        }
    }
}

/// Wire form of [`TomographyResult`]: `rho` is a 4x4 array of `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyJson {
    pub rho: MatrixJson,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_to_target: Option<f64>,
}

/// Rank-one measurement outcomes with their observed weights.
#[derive(Debug, Clone)]
struct Outcomes {
    kets: Vec<CVector>,
    counts: Vec<f64>,
}

impl Outcomes {
    fn from_records(records: &[CountRecord]) -> Self {
        let mut kets = Vec::with_capacity(records.len() * 4);
        let mut counts = Vec::with_capacity(records.len() * 4);
        for record in records {
            for (ket, &n) in record.setting().kets().into_iter().zip(&record.counts) {
                kets.push(ket);
                counts.push(n as f64);
            }
        }
        Self { kets, counts }
    }

    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Pauli-product basis `sigma_i (x) sigma_j`, i, j in {I, X, Y, Z}.
fn pauli_basis() -> Vec<CMatrix> {
    let singles = [
        linalg::identity(2),
        linalg::pauli_x(),
        linalg::pauli_y(),
        linalg::pauli_z(),
    ];
    singles
        .iter()
        .flat_map(|a| singles.iter().map(move |b| linalg::kron(a, b)))
        .collect()
}

fn design_matrix(kets: &[CVector], basis: &[CMatrix]) -> DMatrix<f64> {
    DMatrix::from_fn(kets.len(), basis.len(), |k, j| {
        (kets[k].adjoint() * &basis[j] * &kets[k])[(0, 0)].re
    })
}

fn check_complete(design: &DMatrix<f64>) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * largest.max(1.0))
        .count();
    if rank < N_PARAMS {
        return Err(Error::UnderdeterminedSet {
            rank,
            needed: N_PARAMS,
        });
    }
    Ok(svd)
}

/// Least-squares inversion of `Tr(M Pi_k) = p_k`, Hermitised and
/// trace-normalised. The result need not be positive semidefinite.
pub fn linear_reconstruct(records: &[CountRecord]) -> Result<CMatrix> {
    let mut kets = Vec::new();
    let mut frequencies = Vec::new();
    for record in records {
        let p = joint_probability(record)?;
        for (ket, f) in record.setting().kets().into_iter().zip(p) {
            kets.push(ket);
            frequencies.push(f);
        }
    }
    let basis = pauli_basis();
    let design = design_matrix(&kets, &basis);
    let svd = check_complete(&design)?;
    let coefficients = svd
        .solve(&DVector::from_vec(frequencies), RANK_TOL)
        .map_err(|e| Error::InternalConsistency(e.to_string()))?;
    let m = basis
        .iter()
        .zip(coefficients.iter())
        .fold(CMatrix::zeros(DIM, DIM), |acc, (b, &x)| acc + b * c(x, 0.0));
    let m = linalg::hermitian_part(&m);
    let tr = linalg::trace(&m).re;
    Ok(m / c(tr, 0.0))
}

/// Euclidean projection of `values` onto the probability simplex.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm: keep the eigenvectors of the
/// Hermitian part and project its eigenvalues onto the simplex.
pub fn project_to_physical(m: &CMatrix) -> Result<DensityMatrix> {
    linalg::check_square(m)?;
    let spectral = linalg::eigh(&linalg::hermitian_part(m))?;
    let clipped = project_simplex(&spectral.eigenvalues);
    let projected = linalg::SpectralDecomposition {
        eigenvalues: clipped,
        eigenvectors: spectral.eigenvectors,
    }
    .reconstruct();
    DensityMatrix::new(projected)
}

/// Lower-triangular `T` from the parameter vector: diagonal first, then the
/// strictly lower entries row by row as `(re, im)` pairs.
pub fn t_from_params(x: &[f64]) -> CMatrix {
    debug_assert_eq!(x.len(), N_PARAMS);
    let mut t = CMatrix::zeros(DIM, DIM);
    for i in 0..DIM {
        t[(i, i)] = c(x[i], 0.0);
    }
    let mut k = DIM;
    for i in 1..DIM {
        for j in 0..i {
            t[(i, j)] = c(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

fn params_from_t(t: &CMatrix) -> Vec<f64> {
    let mut x = vec![0.0; N_PARAMS];
    for i in 0..DIM {
        x[i] = t[(i, i)].re;
    }
    let mut k = DIM;
    for i in 1..DIM {
        for j in 0..i {
            x[k] = t[(i, j)].re;
            x[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    x
}

/// `rho = T^dagger T / Tr(T^dagger T)`.
pub fn density_from_params(x: &[f64]) -> DensityMatrix {
    let t = t_from_params(x);
    let a = t.adjoint() * &t;
    let tr = linalg::trace(&a).re;
    DensityMatrix::from_trusted(a / c(tr, 0.0))
}

/// Lower-triangular `T` with real diagonal and `T^dagger T = rho`.
fn params_from_density(rho: &CMatrix) -> Result<Vec<f64>> {
    // Cholesky of the index-reversed matrix J rho J = L L^dagger gives
    // rho = (J L J)(J L^dagger J), so T = J L^dagger J is lower triangular.
    let n = rho.nrows();
    let reverse = |m: &CMatrix| CMatrix::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)]);
    let l = Cholesky::new(reverse(rho))
        .ok_or_else(|| Error::InternalConsistency("starting state is not positive definite".into()))?
        .unpack();
    Ok(params_from_t(&reverse(&l.adjoint())))
}

/// Negative per-count log-likelihood and its gradient in the `T` parameters.
struct Objective<'a> {
    outcomes: &'a Outcomes,
    total: f64,
}

impl Objective<'_> {
    /// `-(1/N) sum_k n_k ln p_k`; `None` if some observed outcome has zero probability.
    fn value(&self, x: &[f64]) -> Option<f64> {
        let t = t_from_params(x);
        let norm = t.norm_squared();
        if !(norm > 0.0) {
            return None;
        }
        let mut acc = 0.0;
        for (ket, &n) in self.outcomes.kets.iter().zip(&self.outcomes.counts) {
            if n == 0.0 {
                continue;
            }
            let q = (&t * ket).norm_squared();
            if !(q > 0.0) {
                return None;
            }
            acc += n * (q / norm).ln();
        }
        let f = -acc / self.total;
        f.is_finite().then_some(f)
    }

    /// Gradient of [`Self::value`]. With `A = T^dagger T` and
    /// `G = sum_k (n_k / q_k) (T psi_k) psi_k^dagger - (N / Tr A) T`,
    /// `df/dRe T_ij = -2 Re G_ij / N` and `df/dIm T_ij = -2 Im G_ij / N`.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = t_from_params(x);
        let norm = t.norm_squared();
        let mut g = &t * c(-self.total / norm, 0.0);
        for (ket, &n) in self.outcomes.kets.iter().zip(&self.outcomes.counts) {
            if n == 0.0 {
                continue;
            }
            let w = &t * ket;
            let q = w.norm_squared();
            g += (&w * ket.adjoint()) * c(n / q, 0.0);
        }
        let scale = -2.0 / self.total;
        let mut grad = vec![0.0; N_PARAMS];
        for i in 0..DIM {
            grad[i] = scale * g[(i, i)].re;
        }
        let mut k = DIM;
        for i in 1..DIM {
            for j in 0..i {
                grad[k] = scale * g[(i, j)].re;
                grad[k + 1] = scale * g[(i, j)].im;
                k += 2;
            }
        }
        grad
    }
}

/// Per-count log-likelihood gradient of the records at parameter point `x`.
/// Exposed for finite-difference checks.
pub fn likelihood_gradient(records: &[CountRecord], x: &[f64]) -> Vec<f64> {
    let outcomes = Outcomes::from_records(records);
    let objective = Objective {
        total: outcomes.total(),
        outcomes: &outcomes,
    };
    objective.gradient(x).into_iter().map(|g| -g).collect()
}

/// Per-count log-likelihood `(1/N) sum_k n_k ln p_k` at parameter point `x`.
pub fn mean_log_likelihood(records: &[CountRecord], x: &[f64]) -> f64 {
    let outcomes = Outcomes::from_records(records);
    let objective = Objective {
        total: outcomes.total(),
        outcomes: &outcomes,
    };
    objective.value(x).map_or(f64::NEG_INFINITY, |f| -f)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Minimum {
    x: Vec<f64>,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
}

fn lbfgs(objective: &Objective<'_>, x0: Vec<f64>, options: &MleOptions) -> Result<Minimum> {
    let mut x = x0;
    let mut f = objective
        .value(&x)
        .ok_or_else(|| Error::InternalConsistency("likelihood is not finite at the start".into()))?;
    let mut g = objective.gradient(&x);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(LBFGS_MEMORY);
    let mut recent = vec![f];
    let mut iterations = 0;
    let mut converged = max_norm(&g) <= options.grad_tol;

    while !converged && iterations < options.max_iter {
        iterations += 1;

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        // backtracking Armijo search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            if let Some(ft) = objective.value(&trial) {
                if ft <= f + 1e-4 * step * slope && ft < f {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no decrease representable in double precision
            converged = true;
            break;
        };
        debug_assert!(f_new < f, "likelihood decreased on an accepted step");
        let g_new = objective.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == LBFGS_MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;

        recent.push(f);
        if recent.len() > STALL_WINDOW + 1 {
            recent.remove(0);
        }
        let stalled = recent.len() == STALL_WINDOW + 1 && recent[0] - f <= STALL_TOL;
        converged = max_norm(&g) <= options.grad_tol || stalled;
    }

    Ok(Minimum {
        gradient_norm: max_norm(&g),
        x,
        value: f,
        iterations,
        converged,
    })
}

/// Starting state: physical projection of the linear estimate plus
/// `INIT_EPSILON * I`, renormalised.
pub fn initial_state(records: &[CountRecord]) -> Result<DensityMatrix> {
    let linear = linear_reconstruct(records)?;
    regularise(&project_to_physical(&linear)?.into_matrix())
}

fn regularise(m: &CMatrix) -> Result<DensityMatrix> {
    let n = m.nrows();
    let shifted = linalg::hermitian_part(m) + linalg::identity(n) * c(INIT_EPSILON, 0.0);
    let tr = linalg::trace(&shifted).re;
    DensityMatrix::new(shifted / c(tr, 0.0))
}

/// Maximum-likelihood two-qubit state. A run that hits `max_iter` still
/// returns its (physical) iterate with `converged = false`.
pub fn mle_reconstruct(
    records: &[CountRecord],
    init: Option<&CMatrix>,
    options: &MleOptions,
) -> Result<TomographyResult> {
    if options.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let outcomes = Outcomes::from_records(records);
    let design = design_matrix(&outcomes.kets, &pauli_basis());
    check_complete(&design)?;
    for record in records {
        joint_probability(record)?;
    }
    let start = match init {
        Some(m) => {
            linalg::check_square(m)?;
            linalg::check_dims(DIM, m.nrows())?;
            regularise(&project_to_physical(m)?.into_matrix())?
        }
        None => initial_state(records)?,
    };
    let objective = Objective {
        total: outcomes.total(),
        outcomes: &outcomes,
    };
    let x0 = params_from_density(start.matrix())?;
    let minimum = lbfgs(&objective, x0, options)?;
    Ok(TomographyResult {
        rho: DensityMatrix::new(density_from_params(&minimum.x).into_matrix())?,
        log_likelihood: -minimum.value * objective.total,
        iterations: minimum.iterations,
        converged: minimum.converged,
        gradient_norm: minimum.gradient_norm,
        fidelity_to_target: None,
    })
}

/// Bootstrap mean and spread of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub std: f64,
    pub resamples: usize,
}

/// Redraws every count as Poisson with mean equal to the observed count.
/// Resample `index` uses ChaCha stream `index` of `seed`.
pub fn poisson_resample(records: &[CountRecord], seed: u64, index: u64) -> Vec<CountRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    records
        .iter()
        .map(|r| CountRecord {
            counts: r.counts.map(|n| poisson_draw(n as f64, &mut rng)),
            ..r.clone()
        })
        .collect()
}

/// Parametric Poisson bootstrap of a vector-valued statistic. Each output
/// component gets its own estimate; order matches the statistic's output.
pub fn bootstrap_many<F>(
    records: &[CountRecord],
    statistic: F,
    resamples: usize,
    seed: u64,
) -> Result<Vec<BootstrapEstimate>>
where
    F: Fn(&[CountRecord]) -> Result<Vec<f64>> + Sync,
{
    if resamples < 2 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least 2 resamples, got {resamples}"
        )));
    }
    let draws = (0..resamples)
        .into_par_iter()
        .map(|index| {
            statistic(&poisson_resample(records, seed, index as u64)).map_err(|source| {
                Error::StatisticFailure {
                    index,
                    source: Box::new(source),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let width = draws[0].len();
    if draws.iter().any(|d| d.len() != width) {
        return Err(Error::InternalConsistency(
            "bootstrap statistic changed output length".into(),
        ));
    }
    let n = resamples as f64;
    Ok((0..width)
        .map(|k| {
            // shifted by the first draw so a constant statistic has exactly zero spread
            let pivot = draws[0][k];
            let offset = draws.iter().map(|d| d[k] - pivot).sum::<f64>() / n;
            let var = draws
                .iter()
                .map(|d| (d[k] - pivot - offset).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            let mean = pivot + offset;
            BootstrapEstimate {
                mean,
                std: var.max(0.0).sqrt(),
                resamples,
            }
        })
        .collect())
}

/// Parametric Poisson bootstrap of a scalar statistic.
pub fn bootstrap_error_bars<F>(
    records: &[CountRecord],
    statistic: F,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapEstimate>
where
    F: Fn(&[CountRecord]) -> Result<f64> + Sync,
{
    let mut estimates = bootstrap_many(records, |r| statistic(r).map(|v| vec![v]), resamples, seed)?;
    Ok(estimates.remove(0))
}
