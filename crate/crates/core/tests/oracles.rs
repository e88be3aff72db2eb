//! Statistical and structural checks against independently computed
//! reference values.

use num_complex::Complex64;
use purestat::bounds::{commutator_pairing, max_marginal_entanglement_defect, max_marginal_spread};
use purestat::dynamics::{dephased_pure, empirical_time_average, sample_times, time_statistics};
use purestat::ensembles::{
    harmonic_mean, sample_entangled_hamiltonian, sample_haar_state, sample_mean_energy_state,
    sample_random_hamiltonian, trial_rng, SpectrumSpec,
};
use purestat::linalg::{
    partial_trace, swap_operator, tensor_product, ComplexMatrix, NormKind, Subsystem,
};
use purestat::{
    canonical_state, commutator, purity, schatten_norm, trace_distance, DensityMatrix, Dims,
    Hamiltonian, PureState, Subspace,
};
use rand::Rng;

fn naive_partial_trace_s(rho: &ComplexMatrix, d_s: usize, d_b: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d_s, d_s);
    for i in 0..d_s {
        for j in 0..d_s {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..d_b {
                acc += rho[(i * d_b + b, j * d_b + b)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

#[test]
fn partial_trace_matches_index_summation() {
    let dims = Dims::new(2, 3).unwrap();
    let mut rng = trial_rng(3, 0);
    let psi = sample_haar_state(&Subspace::full(dims), &mut rng);
    let rho = psi.density();
    let fast = partial_trace(rho.matrix(), 2, 3, Subsystem::S).unwrap();
    assert!(fast.max_abs_diff(&naive_partial_trace_s(rho.matrix(), 2, 3)) < 1e-12);
    assert!(psi.reduced(Subsystem::S).matrix().max_abs_diff(&fast) < 1e-12);
}

#[test]
fn swap_trick() {
    let mut rng = trial_rng(4, 0);
    let d = 3;
    let a = ComplexMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let b = ComplexMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let lhs = (&tensor_product(&a, &b) * &swap_operator(d)).trace();
    let rhs = (&a * &b).trace();
    assert!((lhs - rhs).norm() < 1e-12);
}

#[test]
fn haar_mean_projector() {
    let dims = Dims::single(12);
    let indices = [0, 2, 3, 5, 7, 8, 10, 11];
    let sub = Subspace::coordinate(dims, &indices).unwrap();
    let n = 20_000;
    let mut rng = trial_rng(11, 0);
    let mut mean = ComplexMatrix::zeros(12, 12);
    for _ in 0..n {
        let psi = sample_haar_state(&sub, &mut rng);
        mean = &mean + &ComplexMatrix::outer(psi.amplitudes());
    }
    let mean = mean.scale_real(1.0 / n as f64);
    let expected = sub.projector().scale_real(1.0 / 8.0);
    assert!(mean.max_abs_diff(&expected) < 3.0 / (n as f64).sqrt());
}

#[test]
fn random_state_marginals_are_nearly_mixed() {
    let dims = Dims::new(2, 64).unwrap();
    let full = Subspace::full(dims);
    let mixed = DensityMatrix::maximally_mixed(Dims::single(2));
    let mut rng = trial_rng(12, 0);
    let n = 1000;
    let close = (0..n)
        .filter(|_| {
            let m = sample_haar_state(&full, &mut rng)
                .reduced(Subsystem::S)
                .with_dims(Dims::single(2))
                .unwrap();
            trace_distance(&m, &mixed).unwrap() <= 0.25
        })
        .count();
    assert!(close as f64 >= 0.99 * n as f64, "{close}/{n}");
}

#[test]
fn haar_and_entangled_eigenbasis_marginals() {
    let dims = Dims::new(2, 32).unwrap();
    let mut rng = trial_rng(13, 0);
    let all: Vec<usize> = (0..64).collect();
    let h = sample_random_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
    assert!(max_marginal_entanglement_defect(&h, &all).unwrap() / 2.0 <= 0.35);
    let e = sample_entangled_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
    assert!(max_marginal_spread(&e, &all).unwrap() < 1e-10);
    assert!(max_marginal_entanglement_defect(&e, &all).unwrap() < 1e-10);
    assert!(e.gap_report().non_resonant);
}

/// Kolmogorov–Smirnov statistic of |⟨0|Uψ⟩|² against the Beta(1, d−1) law
/// `F(x) = 1 − (1−x)^{d−1}` of a Haar state's first coordinate.
#[test]
fn rotated_haar_states_keep_their_law() {
    let d = 8;
    let dims = Dims::single(d);
    let mut rng = trial_rng(14, 0);
    let u = purestat::ensembles::haar_unitary(d, &mut rng);
    let n = 4000;
    let mut xs: Vec<f64> = (0..n)
        .map(|_| {
            let psi = sample_haar_state(&Subspace::full(dims), &mut rng);
            u.mul_vec(psi.amplitudes())[0].norm_sqr()
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (1.0 - x).powi(d as i32 - 1);
            (f - i as f64 / n as f64)
                .abs()
                .max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1.63/√n is the 1% critical value
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
}

#[test]
fn mean_energy_sampler_hits_target_energy() {
    let d = 128;
    let dims = Dims::single(d);
    let mut rng = trial_rng(15, 0);
    let spectrum: Vec<f64> = (0..d).map(|k| 1.0 + k as f64 / (d - 1) as f64).collect();
    let h = Hamiltonian::diagonal(&spectrum, dims).unwrap();
    let e = harmonic_mean(&spectrum);
    let n = 5000;
    let mut mean = 0.0;
    for _ in 0..n {
        let psi = sample_mean_energy_state(&h, e, &mut rng).unwrap();
        mean += psi
            .amplitudes()
            .iter()
            .zip(&spectrum)
            .map(|(c, ek)| c.norm_sqr() * ek)
            .sum::<f64>();
    }
    mean /= n as f64;
    assert!((mean - e).abs() <= 0.05 * e, "{mean} vs {e}");
}

#[test]
fn mean_energy_fourth_moments() {
    let d = 64;
    let dims = Dims::single(d);
    let spectrum: Vec<f64> = (0..d).map(|k| 1.0 + k as f64 / (d - 1) as f64).collect();
    let h = Hamiltonian::diagonal(&spectrum, dims).unwrap();
    let e = harmonic_mean(&spectrum);
    let mut rng = trial_rng(16, 0);
    let n = 20_000;
    let mut fourth = vec![0.0; d];
    for _ in 0..n {
        let psi = sample_mean_energy_state(&h, e, &mut rng).unwrap();
        for (acc, c) in fourth.iter_mut().zip(psi.amplitudes()) {
            *acc += c.norm_sqr().powi(2) / n as f64;
        }
    }
    for (k, ek) in [0, d / 2, d - 1].map(|k| (k, spectrum[k])) {
        let predicted = 2.0 * e * e / (d * d) as f64 / (ek * ek);
        assert!(
            (fourth[k] - predicted).abs() <= 0.1 * predicted,
            "k={k}: {} vs {predicted}",
            fourth[k]
        );
    }
}

#[test]
fn canonical_state_commutes_with_hamiltonian() {
    let mut rng = trial_rng(17, 0);
    let h = sample_random_hamiltonian(&SpectrumSpec::default(), Dims::single(5), &mut rng).unwrap();
    let rho = canonical_state(&h, 1.7).unwrap();
    assert!(commutator(rho.matrix(), &h.matrix()).unwrap().max_abs() < 1e-12);
}

#[test]
fn commutator_lemma_on_random_4x4() {
    let mut rng = trial_rng(18, 0);
    let dims = Dims::single(4);
    for _ in 0..1000 {
        let states: Vec<PureState> = (0..2)
            .map(|_| sample_haar_state(&Subspace::full(dims), &mut rng))
            .collect();
        let w: f64 = rng.random();
        let rho = DensityMatrix::mixture(&[w, 1.0 - w], &states).unwrap();
        let a = sample_random_hamiltonian(
            &SpectrumSpec::Uniform {
                low: -1.0,
                high: 1.0,
            },
            dims,
            &mut rng,
        )
        .unwrap()
        .matrix();
        let c = commutator(rho.matrix(), &a)
            .unwrap()
            .scale(Complex64::new(0.0, 1.0))
            .hermitian_part();
        let norm = schatten_norm(&c, NormKind::Trace).unwrap();
        assert!(commutator_pairing(rho.matrix(), &a).unwrap().sum <= 0.5 * norm + 1e-12);
    }
}

#[test]
fn dephasing_equals_long_time_average() {
    let dims = Dims::new(2, 16).unwrap();
    let mut rng = trial_rng(19, 0);
    let h = sample_random_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
    let psi = sample_haar_state(&Subspace::full(dims), &mut rng);
    let horizon = 1e4 / h.gap_report().min_gap_difference.max(1e-6);
    let report = empirical_time_average(&h, &psi, horizon.min(1e7), 4000, None, &mut rng).unwrap();
    assert!(report.discrepancy <= 0.05, "{}", report.discrepancy);

    let omega = dephased_pure(&psi, &h).unwrap();
    let times = sample_times(1e3, 500, &mut rng);
    let stats = time_statistics(&h, &psi, &times, |_, _| 1.0).unwrap();
    assert!(stats.variance.abs() < 1e-20);
    let fourth: f64 = h
        .energy_coefficients(psi.amplitudes())
        .iter()
        .map(|c| c.norm_sqr().powi(2))
        .sum();
    assert!((purity(&omega) - fourth).abs() < 1e-12);
}
