use proptest::prelude::*;
use qbcap::battery::{
    active_energy, active_state, capacity, capacity_gap, passive_energy, passive_state,
    qubit_capacity_closed_form, qubit_hamiltonian, QubitBatteryParams,
};
use qbcap::hamiltonian::expectation;
use qbcap::linalg::{self, haar_unitary, kron};
use qbcap::photonics::{apply_noise, polarization_hamiltonian, prepare_phi, NoiseModel};
use qbcap::resources::{
    check_relations, concurrence, eof_from_concurrence, geometric_from_concurrence,
    l1_coherence, linear_entropy, relative_entropy_coherence, tsallis_entropy,
    von_neumann_entropy,
};
use qbcap::state::{apply_unitary, fidelity, partial_trace, tensor, Subsystem};
use qbcap::{DensityMatrix, ObservableHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    let diag = DensityMatrix::diagonal(&w.iter().map(|x| x / total).collect::<Vec<_>>()).unwrap();
    apply_unitary(&diag, &haar_unitary(d, rng)).unwrap()
}

fn random_hamiltonian(d: usize, rng: &mut ChaCha8Rng) -> ObservableHamiltonian {
    let mut levels: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    levels.sort_by(f64::total_cmp);
    ObservableHamiltonian::from_spectral(levels, haar_unitary(d, rng), 1.0 + rng.random::<f64>()).unwrap()
}

fn qubit_params() -> impl Strategy<Value = QubitBatteryParams> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(p, frac, phase)| {
        QubitBatteryParams {
            p,
            r: frac * (p * (1.0 - p)).sqrt(),
            phase,
        }
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_preserved_by_unitaries(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(d, &mut rng);
        let rotated = apply_unitary(&rho, &haar_unitary(d, &mut rng)).unwrap();
        let a = sorted(rho.eigenvalues().unwrap());
        let b = sorted(rotated.eigenvalues().unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_inverts_tensor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_state(2, &mut rng);
        let b = random_state(2, &mut rng);
        let ab = tensor(&a, &b);
        prop_assert!(linalg::max_abs_diff(partial_trace(&ab, Subsystem::A).unwrap().matrix(), a.matrix()) < 1e-12);
        prop_assert!(linalg::max_abs_diff(partial_trace(&ab, Subsystem::B).unwrap().matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn fidelity_invariant_under_tensoring(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_state(2, &mut rng);
        let s = random_state(2, &mut rng);
        let t = random_state(2, &mut rng);
        let base = fidelity(&r, &s).unwrap();
        let extended = fidelity(&tensor(&r, &t), &tensor(&s, &t)).unwrap();
        prop_assert!((base - extended).abs() < 1e-8);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn capacity_is_unitary_invariant(seed in any::<u64>(), d in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(d, &mut rng);
        let h = random_hamiltonian(d, &mut rng);
        let rotated = apply_unitary(&rho, &haar_unitary(d, &mut rng)).unwrap();
        let c1 = capacity(&rho, &h).unwrap();
        let c2 = capacity(&rotated, &h).unwrap();
        prop_assert!((c1.capacity - c2.capacity).abs() < 1e-10);
        prop_assert!((c1.capacity - (c1.active_energy - c1.passive_energy)).abs() < 1e-10);
        prop_assert!(c1.ergotropy >= 0.0 && c1.antiergotropy >= 0.0);
    }

    #[test]
    fn qubit_closed_form_matches_general(params in qubit_params(), e in 0.1..10.0f64) {
        let h = qubit_hamiltonian(e).unwrap();
        let general = capacity(&params.density().unwrap(), &h).unwrap().capacity;
        let closed = qubit_capacity_closed_form(&params, e).unwrap();
        prop_assert!((general - closed).abs() < 1e-10 * e.max(1.0));
    }

    #[test]
    fn degenerate_levels_do_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(4, &mut rng);
        let basis = haar_unitary(4, &mut rng);
        let h = ObservableHamiltonian::from_spectral(vec![0.0, 1.0, 1.0, 2.0], basis.clone(), 1.0).unwrap();
        // rotate inside the degenerate level-1 subspace
        let mut mixer = linalg::identity(4);
        mixer.view_mut((1, 1), (2, 2)).copy_from(&haar_unitary(2, &mut rng));
        let h2 = ObservableHamiltonian::from_spectral(vec![0.0, 1.0, 1.0, 2.0], &basis * mixer, 1.0).unwrap();
        let a = capacity(&rho, &h).unwrap();
        let b = capacity(&rho, &h2).unwrap();
        prop_assert!((a.capacity - b.capacity).abs() < 1e-10);
        prop_assert!((a.ergotropy - b.ergotropy).abs() < 1e-10);
    }

    #[test]
    fn capacity_gap_is_nonnegative_for_phi(theta in 0.0..90.0f64, s in 0.0..0.5f64) {
        let rho = apply_noise(&prepare_phi(theta).unwrap(), NoiseModel::White, s).unwrap();
        let h = polarization_hamiltonian(1.0).unwrap();
        prop_assert!(capacity_gap(&rho, &h, &h).unwrap() >= -1e-10);
    }

    #[test]
    fn rearrangements_bound_random_unitaries(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(d, &mut rng);
        let h = random_hamiltonian(d, &mut rng);
        let lo = passive_energy(&rho, &h).unwrap();
        let hi = active_energy(&rho, &h).unwrap();
        prop_assert!((expectation(&passive_state(&rho, &h).unwrap(), &h).unwrap() - lo).abs() < 1e-10);
        prop_assert!((expectation(&active_state(&rho, &h).unwrap(), &h).unwrap() - hi).abs() < 1e-10);
        for _ in 0..32 {
            let u = haar_unitary(d, &mut rng);
            let e = expectation(&apply_unitary(&rho, &u).unwrap(), &h).unwrap();
            prop_assert!(e >= lo - 1e-10 && e <= hi + 1e-10);
        }
    }

    #[test]
    fn relations_hold_for_qubits(params in qubit_params(), q in 2.0..8.0f64) {
        let report = check_relations(&params.density().unwrap(), &qubit_hamiltonian(1.0).unwrap(), q, 1e-9).unwrap();
        prop_assert!(report.all_hold(), "{report:?}");
        prop_assert!((report.clu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn concurrence_local_unitary_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(4, &mut rng);
        let u = kron(&haar_unitary(2, &mut rng), &haar_unitary(2, &mut rng));
        let a = concurrence(&rho).unwrap();
        let b = concurrence(&apply_unitary(&rho, &u).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-8);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn entanglement_monotones_increase(c1 in 0.0..=1.0f64, c2 in 0.0..=1.0f64) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(eof_from_concurrence(lo) <= eof_from_concurrence(hi) + 1e-15);
        prop_assert!(geometric_from_concurrence(lo) <= geometric_from_concurrence(hi) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&eof_from_concurrence(c1)));
        prop_assert!((0.0..=0.5).contains(&geometric_from_concurrence(c1)));
    }

    #[test]
    fn entropies_unitary_invariant(seed in any::<u64>(), d in 2usize..=4, q in 1.5..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(d, &mut rng);
        let rotated = apply_unitary(&rho, &haar_unitary(d, &mut rng)).unwrap();
        prop_assert!((von_neumann_entropy(&rho).unwrap() - von_neumann_entropy(&rotated).unwrap()).abs() < 1e-9);
        prop_assert!((tsallis_entropy(&rho, q).unwrap() - tsallis_entropy(&rotated, q).unwrap()).abs() < 1e-9);
        prop_assert!((linear_entropy(&rho) - linear_entropy(&rotated)).abs() < 1e-9);
    }

    #[test]
    fn relative_entropy_coherence_below_capacity(params in qubit_params()) {
        let h = qubit_hamiltonian(1.0).unwrap();
        let rho = params.density().unwrap();
        let cap = capacity(&rho, &h).unwrap().capacity;
        let cre = relative_entropy_coherence(&rho, &h).unwrap();
        let l1 = l1_coherence(&rho, &h).unwrap();
        prop_assert!(cre >= -1e-12);
        prop_assert!(l1 <= cap + 1e-9);
    }
}

#[test]
fn capacity_coherence_relation_with_relative_entropy() {
    let h = qubit_hamiltonian(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let mut violations = Vec::new();
    for k in 0..n {
        let params = qbcap::pipeline::random_qubit_params(&mut rng);
        let rho = params.density().unwrap();
        let margin = capacity(&rho, &h).unwrap().capacity - relative_entropy_coherence(&rho, &h).unwrap();
        if margin < -1e-9 {
            violations.push((k, params, margin));
        }
    }
    println!("C/E - relative-entropy coherence < 0 in {} of {n} samples", violations.len());
    assert!(violations.is_empty(), "first violations: {:?}", &violations[..violations.len().min(5)]);
}

#[test]
fn closed_form_matches_for_phi_marginals() {
    let h = polarization_hamiltonian(1.0).unwrap();
    for theta in [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0f64] {
        let rho = prepare_phi(theta).unwrap();
        let a = partial_trace(&rho, Subsystem::A).unwrap();
        let cap = capacity(&a, &h).unwrap().capacity;
        assert!((cap - (2.0 * theta.to_radians()).cos().abs()).abs() < 1e-12);
    }
}
