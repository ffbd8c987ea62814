use qbcap::photonics::{
    apply_noise, joint_probability, prepare_phi, simulate_counts, tomography_settings, CountRecord, NoiseModel,
};
use qbcap::pipeline::analyze_state;
use qbcap::state::{fidelity, validate_density};
use qbcap::tomography::{bootstrap_error_bars, mle_reconstruct, MleOptions};
use qbcap::DensityMatrix;

fn exact_counts(rho: &DensityMatrix, n: f64) -> Vec<CountRecord> {
    tomography_settings()
        .into_iter()
        .map(|s| CountRecord {
            basis_a: s.basis_a,
            basis_b: s.basis_b,
            counts: s.probabilities(rho).map(|p| (n * p).round() as u64),
        })
        .collect()
}

fn noisy(theta: f64, s: f64) -> DensityMatrix {
    apply_noise(&prepare_phi(theta).unwrap(), NoiseModel::White, s).unwrap()
}

#[test]
fn exact_counts_reconstruct_generating_state() {
    for rho in [noisy(30.0, 0.02), noisy(60.0, 0.1), DensityMatrix::maximally_mixed(4)] {
        let fit = mle_reconstruct(&exact_counts(&rho, 1e8), None, &MleOptions::default()).unwrap();
        let f = fidelity(&fit.rho, &rho).unwrap();
        assert!(f >= 1.0 - 1e-6, "fidelity {f}");
    }
}

#[test]
fn maximally_mixed_at_high_counts() {
    let rho = DensityMatrix::maximally_mixed(4);
    let records = simulate_counts(&rho, &tomography_settings(), 1e6, 11);
    let fit = mle_reconstruct(&records, None, &MleOptions::default()).unwrap();
    assert!(fidelity(&fit.rho, &rho).unwrap() >= 0.9999);
}

#[test]
fn noisy_bell_state_regression() {
    let target = noisy(45.0, 0.02);
    let records = simulate_counts(&target, &tomography_settings(), 1e4, 3);
    let fit = mle_reconstruct(&records, None, &MleOptions::default())
        .unwrap()
        .with_target(&target)
        .unwrap();
    assert!(fit.fidelity_to_target.unwrap() >= 0.99);
    assert!(fit.converged);
}

#[test]
fn likelihood_never_decreases_with_more_iterations() {
    let records = simulate_counts(&noisy(15.0, 0.05), &tomography_settings(), 2e3, 5);
    let mut last = f64::NEG_INFINITY;
    for max_iter in 1..40 {
        let fit = mle_reconstruct(&records, None, &MleOptions { max_iter, grad_tol: 0.0 }).unwrap();
        assert!(fit.log_likelihood >= last - 1e-9 * last.abs(), "iteration {max_iter}");
        last = fit.log_likelihood;
    }
}

#[test]
fn output_is_physical_even_without_convergence() {
    for seed in 0..5 {
        let records = simulate_counts(&noisy(30.0, 0.0), &tomography_settings(), 50.0, seed);
        let fit = mle_reconstruct(&records, None, &MleOptions { max_iter: 3, grad_tol: 1e-8 }).unwrap();
        validate_density(fit.rho.matrix()).unwrap();
    }
}

fn capacity_std(n: f64, seed: u64) -> f64 {
    let records = simulate_counts(&noisy(45.0, 0.02), &tomography_settings(), n, seed);
    let options = MleOptions::default();
    bootstrap_error_bars(
        &records,
        |r| {
            let fit = mle_reconstruct(r, None, &options)?;
            Ok(analyze_state(&fit.rho, 1.0, 2.0)?.capacity)
        },
        100,
        seed,
    )
    .unwrap()
    .std
}

#[test]
fn bootstrap_capacity_spread_and_scaling() {
    let low = capacity_std(1e4, 21);
    let high = capacity_std(1e6, 21);
    assert!(low <= 0.02, "std at 1e4: {low}");
    let ratio = low / high;
    assert!((10.0 / 1.5..=10.0 * 1.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn relative_frequencies_converge() {
    let n = 1e6;
    for (k, rho) in [noisy(15.0, 0.02), noisy(45.0, 0.3), DensityMatrix::maximally_mixed(4)].iter().enumerate() {
        let settings = tomography_settings();
        let records = simulate_counts(rho, &settings, n, 100 + k as u64);
        for (record, setting) in records.iter().zip(&settings) {
            let freq = joint_probability(record).unwrap();
            let p = setting.probabilities(rho);
            for j in 0..4 {
                let bound = 3.0 * (p[j] / n).sqrt() + 1e-12;
                assert!((freq[j] - p[j]).abs() <= bound, "{setting:?} outcome {j}: {} vs {}", freq[j], p[j]);
            }
        }
    }
}
