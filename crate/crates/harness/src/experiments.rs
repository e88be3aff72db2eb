//! One pipeline per experiment id: draw the instance for a trial, measure
//! the empirical side and score it against the catalog.

use num_complex::Complex64;
use purestat::bounds::{
    commutator_pairing, compare, evaluate_bound, linden_delta, max_marginal_entanglement_defect,
    max_marginal_spread,
};
use purestat::dynamics::{
    default_horizon, dephased_marginal, finite_difference_step, pointer_blocks,
    pointer_hamiltonian, purity_rate_pure, sample_times, series_csv, subsystem_derivative_pure,
    subsystem_speed_pure, suppression_factor, EnergyExpansion,
};
use purestat::ensembles::{
    haar_unitary, harmonic_mean, sample_entangled_hamiltonian, sample_haar_state,
    sample_random_hamiltonian, shift_for_harmonic_mean, EnsembleKind, EnsembleSpec, SpectrumSpec,
    TrialRng,
};
use purestat::linalg::{inner, normalize, reduce_pure, tensor_vec, trace_norm_anti_hermitian};
use purestat::states::{purity_matrix, trace_distance_matrices};
use purestat::{
    partial_trace, tensor_product, BoundContext, BoundReport, ComplexMatrix, CompositeHamiltonian,
    DensityMatrix, Dims, Estimate, Hamiltonian, PureState, Subspace, Subsystem, TheoremId,
};
use rand::Rng;

use crate::config::{ExperimentId, ExperimentSpec};
use crate::error::{HarnessError, Result};
use crate::runner::TrialRecord;
use crate::stats::{fraction, mean_stderr};

/// Pointer-diagonal drift tolerated by the einselection demo.
pub const POINTER_DRIFT_TOL: f64 = 1e-10;
/// Slack factor of the averaged weak-coupling coherence check.
pub const WEAK_COUPLING_SLACK: f64 = 5.0;

/// A time series written next to the per-trial CSV (trial 0 only).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: &'static str,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub series: Option<Series>,
}

impl From<TrialRecord> for TrialOutput {
    fn from(record: TrialRecord) -> Self {
        Self {
            record,
            series: None,
        }
    }
}

/// Objects drawn once per experiment and shared by all trials.
#[derive(Debug, Clone, Default)]
pub struct Shared {
    pub observables: Vec<ComplexMatrix>,
    pub subspace: Option<Subspace>,
    pub hamiltonian: Option<Hamiltonian>,
    pub energy: f64,
}

fn spec_err(spec: &ExperimentSpec, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Spec(format!("{}: {msg}", spec.id))
}

/// Hermitian matrix with a Haar eigenbasis and eigenvalues uniform on
/// `[−1, 1]`, rescaled to operator norm 1.
pub fn random_observable<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let mut values: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let top = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    values.iter_mut().for_each(|v| *v /= top);
    let u = haar_unitary(d, rng);
    (&(&u * &ComplexMatrix::from_real_diagonal(&values)) * &u.adjoint()).hermitian_part()
}

/// Rank-`rank` projector inside `subspace`, rotated by a Haar unitary on the
/// subspace so that it commutes with `Π_R`.
fn subspace_projector<R: Rng + ?Sized>(
    subspace: &Subspace,
    rank: usize,
    rng: &mut R,
) -> ComplexMatrix {
    let d_r = subspace.dim();
    let w = haar_unitary(d_r, rng);
    let d = subspace.dims().total();
    let mut p = ComplexMatrix::zeros(d, d);
    for j in 0..rank {
        let v = subspace.embed(&w.column(j));
        p = &p + &ComplexMatrix::outer(&v);
    }
    p.hermitian_part()
}

/// Projector of rank `rank` (default `d_R/2`) inside the subspace, so it
/// commutes with the subspace projector.
fn ranked_projector(
    spec: &ExperimentSpec,
    sub: &Subspace,
    rng: &mut TrialRng,
) -> Result<ComplexMatrix> {
    let rank = spec.param_usize("rank", sub.dim() / 2)?;
    if rank == 0 || rank > sub.dim() {
        return Err(spec_err(
            spec,
            format!("rank {rank} outside 1..={}", sub.dim()),
        ));
    }
    Ok(subspace_projector(sub, rank, rng))
}

/// `X − Tr_B X/d_B ⊗ I − I ⊗ Tr_S X/d_S + Tr X/d · I`, the part of `X` with
/// vanishing partial traces.
fn coupling_part(x: &ComplexMatrix, dims: Dims) -> Result<ComplexMatrix> {
    let (d_s, d_b) = (dims.d_s, dims.d_b);
    let d = (d_s * d_b) as f64;
    let xs = partial_trace(x, d_s, d_b, Subsystem::S)?.scale_real(1.0 / d_b as f64);
    let xb = partial_trace(x, d_s, d_b, Subsystem::B)?.scale_real(1.0 / d_s as f64);
    let c = x.trace().re / d;
    let mut out = x - &tensor_product(&xs, &ComplexMatrix::identity(d_b));
    out = &out - &tensor_product(&ComplexMatrix::identity(d_s), &xb);
    Ok((&out + &ComplexMatrix::identity(d_s * d_b).scale_real(c)).hermitian_part())
}

/// Weakly coupled `H_S⊗I + I⊗H_B + H_SB`: evenly spaced `H_S` levels in a Haar
/// basis, a random `H_B` and a random coupling with
/// `‖H_SB‖∞ = coupling × min gap of H_S`.
pub struct WeakCoupling {
    pub parts: CompositeHamiltonian,
    pub system_levels: Vec<f64>,
    pub system_basis: ComplexMatrix,
    pub gap: f64,
}

pub fn weak_coupling<R: Rng + ?Sized>(
    dims: Dims,
    coupling: f64,
    rng: &mut R,
) -> Result<WeakCoupling> {
    if dims.d_s < 2 {
        return Err(HarnessError::Spec("weak coupling needs d_s >= 2".into()));
    }
    let levels: Vec<f64> = (0..dims.d_s)
        .map(|k| k as f64 / (dims.d_s - 1) as f64)
        .collect();
    let gap = 1.0 / (dims.d_s - 1) as f64;
    let v = haar_unitary(dims.d_s, rng);
    let h_s = (&(&v * &ComplexMatrix::from_real_diagonal(&levels)) * &v.adjoint()).hermitian_part();
    let h_b = random_observable(dims.d_b, rng);
    let x = coupling_part(&random_observable(dims.total(), rng), dims)?;
    let norm = purestat::schatten_norm(&x, purestat::NormKind::Operator)?;
    let h_sb = x.scale_real(coupling * gap / norm.max(f64::MIN_POSITIVE));
    let parts = CompositeHamiltonian::from_parts(0.0, &h_s, &h_b, &h_sb)?;
    Ok(WeakCoupling {
        parts,
        system_levels: levels,
        system_basis: v,
        gap,
    })
}

impl WeakCoupling {
    /// `|+⟩` in the `H_S` eigenbasis.
    pub fn plus_state(&self) -> PureState {
        let d_s = self.system_levels.len();
        let mut amp = vec![Complex64::new(0.0, 0.0); d_s];
        for k in 0..d_s {
            for (i, a) in amp.iter_mut().enumerate() {
                *a += self.system_basis[(i, k)];
            }
        }
        normalize(&mut amp);
        PureState::normalized(amp, Dims::single(d_s)).expect("non-zero vector")
    }

    /// `ρ^S` written in the `H_S` eigenbasis.
    pub fn in_system_basis(&self, rho_s: &ComplexMatrix) -> ComplexMatrix {
        &(&self.system_basis.adjoint() * rho_s) * &self.system_basis
    }
}

fn spectrum(spec: &ExperimentSpec) -> Result<SpectrumSpec> {
    let v = spec.param_list("spectrum", &[0.0, 1.0])?;
    match v.as_slice() {
        [low, high] if low < high => Ok(SpectrumSpec::Uniform {
            low: *low,
            high: *high,
        }),
        _ => Err(spec_err(
            spec,
            "`spectrum` must be `low, high` with low < high",
        )),
    }
}

fn random_hamiltonian(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<Hamiltonian> {
    Ok(sample_random_hamiltonian(&spectrum(spec)?, spec.dims, rng)?)
}

fn horizon(spec: &ExperimentSpec, h: &Hamiltonian) -> f64 {
    spec.horizon
        .unwrap_or_else(|| default_horizon(h.gap_report()))
}

fn times(spec: &ExperimentSpec, h: &Hamiltonian, rng: &mut TrialRng) -> Result<Vec<f64>> {
    if spec.time_samples == 0 {
        return Err(spec_err(spec, "time_samples must be at least 1"));
    }
    Ok(sample_times(horizon(spec, h), spec.time_samples, rng))
}

/// `n` evenly spaced times on `[0, t_max]`.
fn grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|j| t_max * j as f64 / (n - 1) as f64).collect(),
    }
}

fn need_samples(spec: &ExperimentSpec) -> Result<usize> {
    if spec.samples == 0 {
        return Err(spec_err(spec, "samples must be at least 1"));
    }
    Ok(spec.samples)
}

fn draw_state(
    spec: &ExperimentSpec,
    h: Option<&Hamiltonian>,
    rng: &mut TrialRng,
) -> Result<PureState> {
    Ok(spec.ensemble.sample_with(spec.dims, h, rng)?)
}

fn rho_s(psi: &[Complex64], dims: Dims) -> ComplexMatrix {
    reduce_pure(psi, dims.d_s, dims.d_b, Subsystem::S)
}

fn mixed(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d).scale_real(1.0 / d as f64)
}

fn check(theorem: TheoremId, lhs: Estimate, ctx: &BoundContext) -> Result<TrialRecord> {
    Ok(TrialRecord::from_report(&purestat::check_bound(
        theorem, lhs, ctx,
    )?))
}

/// Collapses pointwise reports into one record: the smallest margin is kept
/// and the trial passes only if every point does.
fn pointwise(reports: &[BoundReport]) -> TrialRecord {
    let worst = reports
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("at least one point");
    let violations = reports.iter().filter(|r| r.is_violation()).count();
    let mut record = TrialRecord::from_report(worst);
    record.satisfied = reports.iter().all(|r| r.satisfied);
    record.vacuous = reports.iter().all(|r| r.vacuous);
    record
        .diagnostics
        .push(("pointwise_violations", violations as f64));
    record
}

/// Objects shared by every trial of `spec`, drawn from a dedicated stream.
pub fn prepare(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<Shared> {
    use TheoremId::*;
    let d = spec.dims.total();
    let mut shared = Shared::default();
    match spec.id {
        ExperimentId::Theorem(McVarianceIdentity) => {
            let sub = spec.ensemble.subspace(spec.dims, None)?;
            shared.observables.push(ranked_projector(spec, &sub, rng)?);
            shared.subspace = Some(sub);
        }
        ExperimentId::Theorem(McConcentration | McVarianceConcentration | Levy) => {
            let sub = spec.ensemble.subspace(spec.dims, None)?;
            let b = match spec.param_str("observable", "random") {
                "random" => random_observable(d, rng),
                "projector" => ranked_projector(spec, &sub, rng)?,
                other => {
                    return Err(spec_err(
                        spec,
                        format!("observable `{other}` is neither `random` nor `projector`"),
                    ))
                }
            };
            shared.observables.push(b);
            shared.subspace = Some(sub);
        }
        ExperimentId::Theorem(CoarseGrained) => {
            shared.subspace = Some(spec.ensemble.subspace(spec.dims, None)?);
            let m = spec.param_usize("m", 4)?;
            if m == 0 {
                return Err(spec_err(spec, "m must be at least 1"));
            }
            shared.observables = (0..m).map(|_| random_observable(d, rng)).collect();
        }
        ExperimentId::Theorem(DeffMeanEnergy) => {
            let [low, high] = spec.param_list("spectrum", &[1.0, 2.0])?[..] else {
                return Err(spec_err(spec, "`spectrum` must be `low, high`"));
            };
            if !(low > 0.0 && high > low) {
                return Err(spec_err(
                    spec,
                    "mean-energy spectrum must satisfy 0 < low < high",
                ));
            }
            let levels: Vec<f64> = (0..d)
                .map(|k| low + (high - low) * k as f64 / (d.max(2) - 1) as f64)
                .collect();
            shared.energy = match spec.param_str("energy", "harmonic") {
                "harmonic" => harmonic_mean(&levels),
                v => v
                    .parse()
                    .map_err(|_| spec_err(spec, format!("energy `{v}` is not a number")))?,
            };
            shared.hamiltonian = Some(Hamiltonian::diagonal(&levels, spec.dims)?);
        }
        _ => {}
    }
    Ok(shared)
}

/// Runs trial `trial` of `spec`.
pub fn run_trial(
    spec: &ExperimentSpec,
    shared: &Shared,
    trial: u64,
    rng: &mut TrialRng,
) -> Result<TrialOutput> {
    use TheoremId::*;
    let out: TrialOutput = match spec.id {
        ExperimentId::Theorem(t) => match t {
            McVarianceIdentity => mc_variance_identity(spec, shared, rng)?.into(),
            McConcentration => mc_concentration(spec, shared, rng)?.into(),
            McVarianceConcentration => mc_variance_concentration(spec, shared, rng)?.into(),
            CoarseGrained => coarse_grained(spec, shared, rng)?.into(),
            CanonicalReduction => canonical_reduction(spec, rng)?.into(),
            DeffSubspaceMean | DeffSubspaceTail | DeffProductMean => deff(spec, t, rng)?.into(),
            DeffMeanEnergy => deff_mean_energy(spec, shared, rng)?.into(),
            ExpectationEquilibration => expectation(spec, rng)?.into(),
            SubsystemEquilibration => subsystem(spec, rng)?.into(),
            PurityEquilibration => purity_equilibration(spec, rng)?.into(),
            Speed | PurityRateAvg => rates(spec, t, rng)?.into(),
            PurityRateInstant => purity_rate_instant(spec, rng)?.into(),
            Ergodicity => ergodicity(spec, rng)?.into(),
            CommutatorLower => commutator_lower(spec, rng)?.into(),
            Decoherence => decoherence(spec, rng)?.into(),
            Isi => isi(spec, rng)?.into(),
            IsiLindenDelta => isi_linden(spec, rng)?.into(),
            EntangledStateTail => entangled_state_tail(spec, rng)?.into(),
            EntangledEigsTail => entangled_eigs_tail(spec, rng)?.into(),
            Levy => levy(spec, shared, rng)?.into(),
            EqTimeHeisenberg => eq_time_heisenberg(spec, rng)?.into(),
            EqTimePurity => eq_time_purity(spec, rng)?.into(),
        },
        ExperimentId::EinselectionDemo => einselection(spec, trial, rng)?,
        ExperimentId::SecondLawDemo => second_law(spec, trial, rng)?,
        ExperimentId::DistanceTrajectory => distance_trajectory(spec, trial, rng)?,
    };
    Ok(out)
}

fn mc_moments(b: &ComplexMatrix, sub: &Subspace) -> (f64, f64) {
    let p = sub.projector();
    let d_r = sub.dim() as f64;
    let bp = b * &p;
    let mean = bp.trace().re / d_r;
    let second = (&(b * b) * &p).trace().re / d_r;
    (mean, second)
}

fn mc_variance_identity(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<TrialRecord> {
    let sub = shared.subspace.as_ref().expect("prepared");
    let b = &shared.observables[0];
    let (mean, second) = mc_moments(b, sub);
    let n = need_samples(spec)?;
    let xs: Vec<f64> = (0..n)
        .map(|_| b.expectation(sample_haar_state(sub, rng).amplitudes()).re)
        .collect();
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let (lhs, se) = mean_stderr(&sq);
    let ctx = BoundContext {
        d_r: Some(sub.dim()),
        mc_mean: Some(mean),
        mc_second_moment: Some(second),
        ..Default::default()
    };
    let mut r = check(TheoremId::McVarianceIdentity, Estimate::new(lhs, se), &ctx)?;
    let (m, m_se) = mean_stderr(&xs);
    r.diagnostics
        .push(("mean_z", (m - mean) / m_se.max(f64::MIN_POSITIVE)));
    Ok(r)
}

fn concentration_samples(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<(Vec<f64>, f64, f64)> {
    let sub = shared.subspace.as_ref().expect("prepared");
    let b = &shared.observables[0];
    let (mean, second) = mc_moments(b, sub);
    let n = need_samples(spec)?;
    let xs = (0..n)
        .map(|_| b.expectation(sample_haar_state(sub, rng).amplitudes()).re)
        .collect();
    Ok((xs, mean, second))
}

fn epsilon(spec: &ExperimentSpec) -> Result<f64> {
    let eps = spec.param_f64("epsilon", 0.1)?;
    if !(eps > 0.0) {
        return Err(spec_err(spec, "epsilon must be positive"));
    }
    Ok(eps)
}

fn mc_concentration(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let (xs, mean, _) = concentration_samples(spec, shared, rng)?;
    let (p, se) = fraction(xs.iter().map(|x| (x - mean).abs() >= eps));
    let ctx = BoundContext {
        d_r: shared.subspace.as_ref().map(Subspace::dim),
        epsilon: Some(eps),
        norm_b: Some(1.0),
        ..Default::default()
    };
    let mut r = check(TheoremId::McConcentration, Estimate::new(p, se), &ctx)?;
    let (m, m_se) = mean_stderr(&xs);
    let devs: Vec<f64> = xs.iter().map(|x| (x - mean).abs()).collect();
    r.diagnostics
        .push(("mean_z", (m - mean) / m_se.max(f64::MIN_POSITIVE)));
    r.diagnostics.push(("mean_abs_dev", mean_stderr(&devs).0));
    Ok(r)
}

fn mc_variance_concentration(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let sub = shared.subspace.as_ref().expect("prepared");
    let b = &shared.observables[0];
    let b2 = b * b;
    let (mean, second) = mc_moments(b, sub);
    let var_mc = second - mean * mean;
    let n = need_samples(spec)?;
    let flags = (0..n).map(|_| {
        let psi = sample_haar_state(sub, rng);
        let x = b.expectation(psi.amplitudes()).re;
        let var = b2.expectation(psi.amplitudes()).re - x * x;
        (var - var_mc).abs() > eps
    });
    let (p, se) = fraction(flags.collect::<Vec<_>>());
    let ctx = BoundContext {
        d_r: Some(sub.dim()),
        epsilon: Some(eps),
        ..Default::default()
    };
    check(
        TheoremId::McVarianceConcentration,
        Estimate::new(p, se),
        &ctx,
    )
}

fn coarse_grained(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let sub = shared.subspace.as_ref().expect("prepared");
    let means: Vec<f64> = shared
        .observables
        .iter()
        .map(|a| mc_moments(a, sub).0)
        .collect();
    let n = need_samples(spec)?;
    let flags: Vec<bool> = (0..n)
        .map(|_| {
            let psi = sample_haar_state(sub, rng);
            shared
                .observables
                .iter()
                .zip(&means)
                .map(|(a, m)| (a.expectation(psi.amplitudes()).re - m).abs())
                .fold(0.0, f64::max)
                >= eps
        })
        .collect();
    let (p, se) = fraction(flags);
    let ctx = BoundContext {
        d_r: Some(sub.dim()),
        epsilon: Some(eps),
        m: Some(shared.observables.len()),
        norm_a: Some(1.0),
        ..Default::default()
    };
    check(TheoremId::CoarseGrained, Estimate::new(p, se), &ctx)
}

fn canonical_reduction(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let h = random_hamiltonian(spec, rng)?;
    let sub = spec.ensemble.subspace(spec.dims, Some(&h))?;
    let dims = spec.dims;
    let p = sub.projector().scale_real(1.0 / sub.dim() as f64);
    let mc_s = partial_trace(&p, dims.d_s, dims.d_b, Subsystem::S)?;
    let mc_b = partial_trace(&p, dims.d_s, dims.d_b, Subsystem::B)?;
    let ctx = BoundContext {
        d_r: Some(sub.dim()),
        d_s: Some(dims.d_s),
        epsilon: Some(eps),
        d_eff_b: Some(1.0 / purity_matrix(&mc_b)),
        ..Default::default()
    };
    let threshold = purestat::bounds::canonical_threshold(&ctx)?;
    let n = need_samples(spec)?;
    let dists: Vec<f64> = (0..n)
        .map(|_| {
            trace_distance_matrices(
                &rho_s(sample_haar_state(&sub, rng).amplitudes(), dims),
                &mc_s,
            )
        })
        .collect::<purestat::Result<_>>()?;
    let (p_hit, se) = fraction(dists.iter().map(|&x| x >= threshold));
    let mut r = check(
        TheoremId::CanonicalReduction,
        Estimate::new(p_hit, se),
        &ctx,
    )?;
    r.diagnostics.push(("mean_distance", mean_stderr(&dists).0));
    r.diagnostics.push(("threshold", threshold));
    Ok(r)
}

fn deff(spec: &ExperimentSpec, theorem: TheoremId, rng: &mut TrialRng) -> Result<TrialRecord> {
    let h = random_hamiltonian(spec, rng)?;
    let n = need_samples(spec)?;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let psi = draw_state(spec, Some(&h), rng)?;
            let fourth: f64 = h
                .energy_coefficients(psi.amplitudes())
                .iter()
                .map(|c| c.norm_sqr().powi(2))
                .sum();
            Ok(1.0 / fourth)
        })
        .collect::<Result<_>>()?;
    let mut ctx = BoundContext::default();
    match &spec.ensemble.kind {
        EnsembleKind::Product { d_sr, d_br } => {
            ctx.d_sr = Some(*d_sr);
            ctx.d_br = Some(*d_br);
            ctx.d_r = Some(d_sr * d_br);
        }
        _ => ctx.d_r = Some(spec.ensemble.subspace(spec.dims, Some(&h))?.dim()),
    }
    let d_r = ctx.d_r.expect("set above") as f64;
    let below = values.iter().filter(|&&x| x < d_r / 4.0).count();
    let mut r = match theorem {
        TheoremId::DeffSubspaceTail => {
            let (p, se) = fraction(values.iter().map(|&x| x < d_r / 4.0));
            check(theorem, Estimate::new(p, se), &ctx)?
        }
        _ => {
            let (m, se) = mean_stderr(&values);
            check(theorem, Estimate::new(m, se), &ctx)?
        }
    };
    r.diagnostics.push((
        "min_deff",
        values.iter().copied().fold(f64::INFINITY, f64::min),
    ));
    r.diagnostics.push(("below_quarter", below as f64));
    Ok(r)
}

fn deff_mean_energy(
    spec: &ExperimentSpec,
    shared: &Shared,
    rng: &mut TrialRng,
) -> Result<TrialRecord> {
    let h = shared.hamiltonian.as_ref().expect("prepared");
    let ensemble = EnsembleSpec {
        kind: EnsembleKind::MeanEnergy {
            energy: shared.energy,
        },
        ..spec.ensemble.clone()
    };
    let n = need_samples(spec)?;
    let mut purities = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    for _ in 0..n {
        let psi = ensemble.sample_with(spec.dims, Some(h), rng)?;
        let pops: Vec<f64> = h
            .energy_coefficients(psi.amplitudes())
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        purities.push(pops.iter().map(|p| p * p).sum::<f64>());
        energies.push(
            pops.iter()
                .zip(h.eigenvalues())
                .map(|(p, e)| p * e)
                .sum::<f64>(),
        );
    }
    let a = shift_for_harmonic_mean(h.eigenvalues(), shared.energy)?;
    let shifted: Vec<f64> = h.eigenvalues().iter().map(|e| e + a).collect();
    let ctx = BoundContext {
        spectrum: Some(shifted),
        energy: Some(shared.energy + a),
        ..Default::default()
    };
    let (m, se) = mean_stderr(&purities);
    let mut r = check(TheoremId::DeffMeanEnergy, Estimate::new(m, se), &ctx)?;
    r.diagnostics
        .push(("mean_energy", mean_stderr(&energies).0));
    r.diagnostics.push(("target_energy", shared.energy));
    Ok(r)
}

/// Instance shared by the time-average experiments: a random Hamiltonian, an
/// initial state and the populations of its dephased state.
struct Equilibration {
    h: Hamiltonian,
    psi: PureState,
    pops: Vec<f64>,
    times: Vec<f64>,
}

impl Equilibration {
    fn draw(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<Self> {
        let h = random_hamiltonian(spec, rng)?;
        let psi = draw_state(spec, Some(&h), rng)?;
        let pops = EnergyExpansion::new(&psi, &h).populations();
        let times = times(spec, &h, rng)?;
        Ok(Self {
            h,
            psi,
            pops,
            times,
        })
    }

    fn purity_omega(&self) -> f64 {
        self.pops.iter().map(|p| p * p).sum()
    }

    fn marginal(&self, keep: Subsystem) -> DensityMatrix {
        dephased_marginal(&self.pops, &self.h, keep)
    }
}

fn expectation(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eq = Equilibration::draw(spec, rng)?;
    let a = random_observable(spec.dims.total(), rng);
    let a_e = eq.h.to_eigenbasis(&a);
    let expansion = EnergyExpansion::new(&eq.psi, &eq.h);
    let target: f64 = eq
        .pops
        .iter()
        .enumerate()
        .map(|(k, p)| p * a_e[(k, k)].re)
        .sum();
    let c = expansion.coefficients();
    let sq: Vec<f64> = eq
        .times
        .iter()
        .map(|&t| {
            let ct: Vec<Complex64> = c
                .iter()
                .zip(eq.h.eigenvalues())
                .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t))
                .collect();
            (a_e.expectation(&ct).re - target).powi(2)
        })
        .collect();
    let (m, se) = mean_stderr(&sq);
    let ctx = BoundContext {
        norm_a: Some(1.0),
        d_eff: Some(1.0 / eq.purity_omega()),
        ..Default::default()
    };
    check(
        TheoremId::ExpectationEquilibration,
        Estimate::new(m, se),
        &ctx,
    )
}

fn subsystem(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eq = Equilibration::draw(spec, rng)?;
    let omega_s = eq.marginal(Subsystem::S);
    let omega_b = eq.marginal(Subsystem::B);
    let expansion = EnergyExpansion::new(&eq.psi, &eq.h);
    let dists: Vec<f64> = eq
        .times
        .iter()
        .map(|&t| {
            trace_distance_matrices(&rho_s(&expansion.state_at(t), spec.dims), omega_s.matrix())
        })
        .collect::<purestat::Result<_>>()?;
    let (m, se) = mean_stderr(&dists);
    let ctx = BoundContext {
        d_s: Some(spec.dims.d_s),
        d_eff_b: Some(1.0 / purestat::purity(&omega_b)),
        d_eff: Some(1.0 / eq.purity_omega()),
        ..Default::default()
    };
    let mut r = check(
        TheoremId::SubsystemEquilibration,
        Estimate::new(m, se),
        &ctx,
    )?;
    let forms = purestat::bounds::evaluate_forms(TheoremId::SubsystemEquilibration, &ctx)?;
    if let Some((_, g)) = forms.iter().find(|(n, _)| *n == "global") {
        r.diagnostics.push(("global_rhs", *g));
    }
    Ok(r)
}

fn purity_equilibration(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eq = Equilibration::draw(spec, rng)?;
    let dims = spec.dims;
    let omega_s = eq.marginal(Subsystem::S);
    let omega_b = eq.marginal(Subsystem::B);
    let expansion = EnergyExpansion::new(&eq.psi, &eq.h);
    let mut p_s = Vec::with_capacity(eq.times.len());
    let mut mismatch = 0.0f64;
    for &t in &eq.times {
        let v = expansion.state_at(t);
        let ps = purity_matrix(&rho_s(&v, dims));
        let pb = purity_matrix(&reduce_pure(&v, dims.d_s, dims.d_b, Subsystem::B));
        mismatch = mismatch.max((ps - pb).abs());
        p_s.push(ps);
    }
    let (m, se) = mean_stderr(&p_s);
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        purity_omega_b: Some(purestat::purity(&omega_b)),
        purity_omega: Some(eq.purity_omega()),
        d_eff: Some(1.0 / eq.purity_omega()),
        ..Default::default()
    };
    let mut r = check(
        TheoremId::PurityEquilibration,
        Estimate::new((m - purestat::purity(&omega_s)).abs(), se),
        &ctx,
    )?;
    let forms = purestat::bounds::evaluate_forms(TheoremId::PurityEquilibration, &ctx)?;
    if let Some((_, g)) = forms.iter().find(|(n, _)| *n == "global") {
        r.diagnostics.push(("global_rhs", *g));
    }
    r.diagnostics.push(("purity_sb_mismatch", mismatch));
    Ok(r)
}

/// Relative error of the analytic rates against central differences at `t`.
fn finite_difference_errors(
    expansion: &EnergyExpansion<'_>,
    parts: &CompositeHamiltonian,
    t: f64,
    step: f64,
) -> Result<(f64, f64)> {
    let dims = parts.dims();
    // Re-expand around ψ_t: phases e^{-iE(t±δ)} lose all precision at large t.
    let psi = expansion.pure_state_at(t);
    let local = EnergyExpansion::new(&psi, expansion.hamiltonian());
    let at = |s: f64| rho_s(&local.state_at(s), dims);
    let (plus, minus) = (at(step), at(-step));
    let fd = (&plus - &minus).scale_real(0.5 / step);
    let analytic = subsystem_derivative_pure(&psi, parts)?;
    let scale = analytic
        .frobenius_norm()
        .max(fd.frobenius_norm())
        .max(1e-12);
    let speed_err = (&analytic - &fd).frobenius_norm() / scale;
    let rate = purity_rate_pure(&psi, parts)?;
    let fd_rate = (purity_matrix(&plus) - purity_matrix(&minus)) / (2.0 * step);
    let rate_err = (rate - fd_rate).abs() / rate.abs().max(fd_rate.abs()).max(1e-8);
    Ok((speed_err, rate_err))
}

/// Points per trial at which the finite-difference cross-check runs.
const FD_POINTS: usize = 4;

fn rates(spec: &ExperimentSpec, theorem: TheoremId, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eq = Equilibration::draw(spec, rng)?;
    let parts = CompositeHamiltonian::decompose(&eq.h)?;
    let expansion = EnergyExpansion::new(&eq.psi, &eq.h);
    let values: Vec<f64> = eq
        .times
        .iter()
        .map(|&t| {
            let psi = expansion.pure_state_at(t);
            Ok(match theorem {
                TheoremId::Speed => subsystem_speed_pure(&psi, &parts)?,
                _ => purity_rate_pure(&psi, &parts)?.abs(),
            })
        })
        .collect::<Result<_>>()?;
    let (m, se) = mean_stderr(&values);
    let ctx = BoundContext {
        d_s: Some(spec.dims.d_s),
        d_eff: Some(1.0 / eq.purity_omega()),
        norm_h_sb: Some(parts.coupling_norm()?),
        norm_h_s_sb: Some(parts.system_and_coupling_norm()?),
        ..Default::default()
    };
    let mut r = check(theorem, Estimate::new(m, se), &ctx)?;
    let step = finite_difference_step(&eq.h);
    let (mut speed_err, mut rate_err) = (0.0f64, 0.0f64);
    for &t in eq
        .times
        .iter()
        .step_by((eq.times.len() / FD_POINTS).max(1))
        .take(FD_POINTS)
    {
        let (s, p) = finite_difference_errors(&expansion, &parts, t, step)?;
        speed_err = speed_err.max(s);
        rate_err = rate_err.max(p);
    }
    r.diagnostics.push(("fd_rel_err_derivative", speed_err));
    r.diagnostics.push(("fd_rel_err_purity_rate", rate_err));
    Ok(r)
}

fn purity_rate_instant(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eq = Equilibration::draw(spec, rng)?;
    let parts = CompositeHamiltonian::decompose(&eq.h)?;
    let norm_h_sb = parts.coupling_norm()?;
    let expansion = EnergyExpansion::new(&eq.psi, &eq.h);
    let mut reports = Vec::with_capacity(eq.times.len());
    let (mut op_fail, mut pure_fail) = (0usize, 0usize);
    for &t in &eq.times {
        let psi = expansion.pure_state_at(t);
        let rs = psi.reduced(Subsystem::S);
        let entropy = purestat::von_neumann_entropy(&rs);
        let eig = rs.eigenvalues();
        let ctx = BoundContext {
            purity_s: Some(purestat::purity(&rs)),
            mutual_information: Some(2.0 * entropy),
            entropy_s: Some(entropy),
            norm_rho_s: Some(eig.iter().copied().fold(0.0, f64::max)),
            norm_h_sb: Some(norm_h_sb),
            ..Default::default()
        };
        let lhs = Estimate::exact(purity_rate_pure(&psi, &parts)?.abs());
        for (name, rhs) in purestat::bounds::evaluate_forms(TheoremId::PurityRateInstant, &ctx)?
            .into_iter()
            .skip(1)
        {
            let failed = compare(TheoremId::PurityRateInstant, lhs, rhs, None).is_violation();
            match name {
                "operator_norm" => op_fail += failed as usize,
                _ => pure_fail += failed as usize,
            }
        }
        reports.push(purestat::check_bound(
            TheoremId::PurityRateInstant,
            lhs,
            &ctx,
        )?);
    }
    let mut r = pointwise(&reports);
    r.diagnostics
        .push(("operator_norm_form_violations", op_fail as f64));
    r.diagnostics
        .push(("pure_form_violations", pure_fail as f64));
    Ok(r)
}

fn ergodicity(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let h = random_hamiltonian(spec, rng)?;
    let sub = spec.ensemble.subspace(spec.dims, Some(&h))?;
    let b = random_observable(spec.dims.total(), rng);
    let b_e = h.to_eigenbasis(&b);
    let diag: Vec<f64> = (0..h.dim()).map(|k| b_e[(k, k)].re).collect();
    let mc_mean = mc_moments(&b, &sub).0;
    let n = need_samples(spec)?;
    let mut xs = Vec::with_capacity(n);
    let mut discrepancy = 0.0f64;
    for i in 0..n {
        let psi = sample_haar_state(&sub, rng);
        let expansion = EnergyExpansion::new(&psi, &h);
        let x: f64 = expansion
            .populations()
            .iter()
            .zip(&diag)
            .map(|(p, b)| p * b)
            .sum();
        if i == 0 && spec.time_samples > 0 {
            let ts = times(spec, &h, rng)?;
            let empirical = ts
                .iter()
                .map(|&t| b.expectation(&expansion.state_at(t)).re)
                .sum::<f64>()
                / ts.len() as f64;
            discrepancy = (empirical - x).abs();
        }
        xs.push(x);
    }
    let (p, se) = fraction(xs.iter().map(|x| (x - mc_mean).abs() >= eps));
    let ctx = BoundContext {
        d_r: Some(sub.dim()),
        epsilon: Some(eps),
        norm_dephased_b: Some(diag.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        ..Default::default()
    };
    let mut r = check(TheoremId::Ergodicity, Estimate::new(p, se), &ctx)?;
    let (m, m_se) = mean_stderr(&xs);
    r.diagnostics.push(("mean_minus_mc", m - mc_mean));
    r.diagnostics.push(("mean_stderr", m_se));
    r.diagnostics
        .push(("time_sampling_discrepancy", discrepancy));
    Ok(r)
}

fn commutator_lower(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let dims = spec.dims;
    let full = Subspace::full(dims);
    let states = [sample_haar_state(&full, rng), sample_haar_state(&full, rng)];
    let w: f64 = rng.random();
    let rho = DensityMatrix::mixture(&[w, 1.0 - w], &states)?;
    let a = random_observable(dims.total(), rng);
    let norm = trace_norm_anti_hermitian(&purestat::commutator(rho.matrix(), &a)?)?;
    let pairing = commutator_pairing(rho.matrix(), &a)?;
    let ctx = BoundContext {
        pairing_sum: Some(pairing.sum),
        ..Default::default()
    };
    let mut r = check(TheoremId::CommutatorLower, Estimate::exact(norm), &ctx)?;
    r.diagnostics
        .push(("exact_pairing", pairing.exact as u8 as f64));
    Ok(r)
}

fn coupling(spec: &ExperimentSpec) -> Result<f64> {
    let c = spec.param_f64("coupling", 0.01)?;
    if !(c > 0.0) {
        return Err(spec_err(spec, "coupling must be positive"));
    }
    Ok(c)
}

/// Pointwise pairing check along a weak-coupling trajectory, plus the
/// time-averaged coherence of the widest-gap pair.
struct WeakRun {
    reports: Vec<BoundReport>,
    pairing: Vec<f64>,
    rhs: Vec<f64>,
    mean_coherence: f64,
    coherence_rhs: f64,
}

fn weak_run(wc: &WeakCoupling, psi: &PureState, times: &[f64]) -> Result<WeakRun> {
    let h = &wc.parts.assembled;
    let dims = h.dims();
    let norm_h_sb = wc.parts.coupling_norm()?;
    let levels = &wc.system_levels;
    let (k, l) = (0, levels.len() - 1);
    let expansion = EnergyExpansion::new(psi, h);
    let mut out = WeakRun {
        reports: vec![],
        pairing: vec![],
        rhs: vec![],
        mean_coherence: 0.0,
        coherence_rhs: 0.0,
    };
    let mut speeds = 0.0;
    for &t in times {
        let state = expansion.pure_state_at(t);
        let rs = wc.in_system_basis(&rho_s(state.amplitudes(), dims));
        let speed = subsystem_speed_pure(&state, &wc.parts)?;
        let pairing = purestat::max_pairing(levels, &rs)?;
        let ctx = BoundContext {
            norm_h_sb: Some(norm_h_sb),
            speed: Some(speed),
            ..Default::default()
        };
        let report =
            purestat::check_bound(TheoremId::Decoherence, Estimate::exact(pairing.sum), &ctx)?;
        out.pairing.push(pairing.sum);
        out.rhs.push(report.rhs);
        out.reports.push(report);
        out.mean_coherence += rs[(k, l)].norm();
        speeds += speed;
    }
    let n = times.len() as f64;
    out.mean_coherence /= n;
    out.coherence_rhs = WEAK_COUPLING_SLACK * (norm_h_sb + speeds / n) / (levels[l] - levels[k]);
    Ok(out)
}

fn weak_initial_state(wc: &WeakCoupling, d_b: usize, rng: &mut TrialRng) -> PureState {
    let b = sample_haar_state(&Subspace::full(Dims::single(d_b)), rng);
    let s = wc.plus_state();
    PureState::new(
        tensor_vec(s.amplitudes(), b.amplitudes()),
        Dims { d_s: s.dim(), d_b },
    )
    .expect("product of unit vectors")
}

fn decoherence(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let wc = weak_coupling(spec.dims, coupling(spec)?, rng)?;
    let psi = weak_initial_state(&wc, spec.dims.d_b, rng);
    let ts = times(spec, &wc.parts.assembled, rng)?;
    let run = weak_run(&wc, &psi, &ts)?;
    let mut r = pointwise(&run.reports);
    r.diagnostics.push(("mean_coherence", run.mean_coherence));
    r.diagnostics.push(("coherence_rhs", run.coherence_rhs));
    Ok(r)
}

fn orthogonal_state(psi: &PureState, sub: &Subspace, rng: &mut TrialRng) -> Result<PureState> {
    loop {
        let mut v = sample_haar_state(sub, rng).into_amplitudes();
        let proj = inner(psi.amplitudes(), &v);
        for (x, y) in v.iter_mut().zip(psi.amplitudes()) {
            *x -= proj * y;
        }
        if purestat::linalg::norm(&v) > 1e-6 {
            return Ok(PureState::normalized(v, psi.dims())?);
        }
    }
}

fn isi(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let dims = spec.dims;
    let h = match spec.param_str("eigenbasis", "entangled") {
        "entangled" => sample_entangled_hamiltonian(&spectrum(spec)?, dims, rng)?,
        "haar" => random_hamiltonian(spec, rng)?,
        other => {
            return Err(spec_err(
                spec,
                format!("eigenbasis `{other}` is neither `haar` nor `entangled`"),
            ))
        }
    };
    let sub = spec.ensemble.subspace(dims, Some(&h))?;
    let psi = sample_haar_state(&sub, rng);
    let phi = orthogonal_state(&psi, &sub, rng)?;
    let all: Vec<usize> = (0..h.dim()).collect();
    let spread = max_marginal_spread(&h, &all)?;
    let defect = max_marginal_entanglement_defect(&h, &all)?;
    let (ea, eb) = (
        EnergyExpansion::new(&psi, &h),
        EnergyExpansion::new(&phi, &h),
    );
    let ts = times(spec, &h, rng)?;
    let dists: Vec<f64> = ts
        .iter()
        .map(|&t| {
            trace_distance_matrices(&rho_s(&ea.state_at(t), dims), &rho_s(&eb.state_at(t), dims))
        })
        .collect::<purestat::Result<_>>()?;
    let d_eff_b = |e: &EnergyExpansion<'_>| {
        1.0 / purestat::purity(&dephased_marginal(&e.populations(), &h, Subsystem::B))
    };
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        d_eff_b: Some(d_eff_b(&ea)),
        d_eff_b_other: Some(d_eff_b(&eb)),
        delta: Some(spread.min(defect)),
        ..Default::default()
    };
    let (m, se) = mean_stderr(&dists);
    let mut r = check(TheoremId::Isi, Estimate::new(m, se), &ctx)?;
    r.diagnostics.push(("delta", spread.min(defect)));
    r.diagnostics.push(("marginal_spread", spread));
    r.diagnostics.push(("entanglement_defect", defect));
    Ok(r)
}

fn isi_linden(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let dims = spec.dims;
    let h = random_hamiltonian(spec, rng)?;
    let sub = spec.ensemble.subspace(dims, Some(&h))?;
    let mc_s = partial_trace(
        &sub.projector().scale_real(1.0 / sub.dim() as f64),
        dims.d_s,
        dims.d_b,
        Subsystem::S,
    )?;
    let n = need_samples(spec)?;
    let dists: Vec<f64> = (0..n)
        .map(|_| {
            let psi = sample_haar_state(&sub, rng);
            let omega_s = dephased_marginal(
                &EnergyExpansion::new(&psi, &h).populations(),
                &h,
                Subsystem::S,
            );
            trace_distance_matrices(omega_s.matrix(), &mc_s)
        })
        .collect::<purestat::Result<_>>()?;
    let delta = linden_delta(&h, &sub)?;
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        d_r: Some(sub.dim()),
        delta: Some(delta),
        ..Default::default()
    };
    let (m, se) = mean_stderr(&dists);
    let mut r = check(TheoremId::IsiLindenDelta, Estimate::new(m, se), &ctx)?;
    r.diagnostics.push(("linden_delta", delta));
    Ok(r)
}

fn entangled_state_tail(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let dims = spec.dims;
    let target = mixed(dims.d_s);
    let n = need_samples(spec)?;
    let dists: Vec<f64> = (0..n)
        .map(|_| {
            trace_distance_matrices(
                &rho_s(draw_state(spec, None, rng)?.amplitudes(), dims),
                &target,
            )
            .map_err(Into::into)
        })
        .collect::<Result<_>>()?;
    let (p, se) = fraction(dists.iter().map(|&x| x >= eps));
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        d_b: Some(dims.d_b),
        epsilon: Some(eps),
        ..Default::default()
    };
    let mut r = check(TheoremId::EntangledStateTail, Estimate::new(p, se), &ctx)?;
    r.diagnostics
        .push(("max_distance", dists.iter().copied().fold(0.0, f64::max)));
    Ok(r)
}

fn entangled_eigs_tail(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let dims = spec.dims;
    let all: Vec<usize> = (0..dims.total()).collect();
    let n = need_samples(spec)?;
    let worst: Vec<f64> = (0..n)
        .map(|_| Ok(max_marginal_entanglement_defect(&random_hamiltonian(spec, rng)?, &all)? / 2.0))
        .collect::<Result<_>>()?;
    let (p, se) = fraction(worst.iter().map(|&x| x >= eps));
    let ctx = BoundContext {
        d: Some(dims.total()),
        d_s: Some(dims.d_s),
        d_b: Some(dims.d_b),
        epsilon: Some(eps),
        ..Default::default()
    };
    let mut r = check(TheoremId::EntangledEigsTail, Estimate::new(p, se), &ctx)?;
    r.diagnostics.push((
        "max_eigenvector_distance",
        worst.iter().copied().fold(0.0, f64::max),
    ));
    Ok(r)
}

fn levy(spec: &ExperimentSpec, shared: &Shared, rng: &mut TrialRng) -> Result<TrialRecord> {
    let eps = epsilon(spec)?;
    let (xs, mean, _) = concentration_samples(spec, shared, rng)?;
    let (p, se) = fraction(xs.iter().map(|x| (x - mean).abs() >= eps));
    let d_r = shared.subspace.as_ref().expect("prepared").dim();
    // f(ψ) = Tr[Bψ] on the real unit sphere of dimension 2d_R, Lipschitz 2‖B‖
    let ctx = BoundContext {
        d: Some(2 * d_r),
        epsilon: Some(eps),
        eta: Some(2.0),
        ..Default::default()
    };
    check(TheoremId::Levy, Estimate::new(p, se), &ctx)
}

fn eq_time_heisenberg(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let dims = spec.dims;
    let h = random_hamiltonian(spec, rng)?;
    let d = h.dim();
    let w = spec.param_usize("window", 16)?;
    if w < 2 || w > d {
        return Err(spec_err(spec, format!("window {w} outside 2..={d}")));
    }
    let start = rng.random_range(0..=d - w);
    let window: Vec<usize> = (start..start + w).collect();
    let sub = Subspace::energy_window(&h, &window)?;
    let psi = sample_haar_state(&sub, rng);
    let e = h.eigenvalues();
    let delta_e = e[start + w - 1] - e[start];
    let ctx = BoundContext {
        delta_e: Some(delta_e),
        ..Default::default()
    };
    let heisenberg = evaluate_bound(TheoremId::EqTimeHeisenberg, &ctx)?;
    let expansion = EnergyExpansion::new(&psi, &h);
    let rho0 = rho_s(psi.amplitudes(), dims);
    let n = spec.time_samples.max(1);
    let t_max = spec.horizon.unwrap_or(10.0 * heisenberg);
    let reports: Vec<BoundReport> = (1..=n)
        .map(|j| {
            let t = t_max * j as f64 / n as f64;
            let dist = trace_distance_matrices(&rho0, &rho_s(&expansion.state_at(t), dims))?;
            Ok(compare(
                TheoremId::EqTimeHeisenberg,
                Estimate::exact(t),
                dist * heisenberg,
                None,
            ))
        })
        .collect::<Result<_>>()?;
    let mut r = pointwise(&reports);
    r.diagnostics.push(("heisenberg_time", heisenberg));
    Ok(r)
}

fn eq_time_purity(spec: &ExperimentSpec, rng: &mut TrialRng) -> Result<TrialRecord> {
    let dims = spec.dims;
    let p_eq = spec.param_f64("target_purity", 0.9)?;
    if !(p_eq > 1.0 / dims.d_s as f64 && p_eq < 1.0) {
        return Err(spec_err(spec, "target_purity must lie in (1/d_s, 1)"));
    }
    let h = random_hamiltonian(spec, rng)?;
    let parts = CompositeHamiltonian::decompose(&h)?;
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        p_eq: Some(p_eq),
        norm_h_sb: Some(parts.coupling_norm()?),
        ..Default::default()
    };
    let rhs = evaluate_bound(TheoremId::EqTimePurity, &ctx)?;
    let b = sample_haar_state(&Subspace::full(Dims::single(dims.d_b)), rng);
    let s = PureState::basis(0, Dims::single(dims.d_s))?;
    let psi = PureState::new(tensor_vec(s.amplitudes(), b.amplitudes()), dims)?;
    let expansion = EnergyExpansion::new(&psi, &h);
    let n = spec.time_samples.max(2);
    let t_max = spec.horizon.unwrap_or(50.0 * rhs);
    let ts = grid(t_max, n);
    let p: Vec<f64> = ts
        .iter()
        .map(|&t| purity_matrix(&rho_s(&expansion.state_at(t), dims)))
        .collect();
    let crossing = (1..n).find(|&j| p[j] <= p_eq).map(|j| {
        let f = (p[j - 1] - p_eq) / (p[j - 1] - p[j]);
        ts[j - 1] + f * (ts[j] - ts[j - 1])
    });
    let lhs = crossing.unwrap_or(t_max);
    let mut r = TrialRecord::from_report(&compare(
        TheoremId::EqTimePurity,
        Estimate::exact(lhs),
        rhs,
        None,
    ));
    r.diagnostics
        .push(("crossed", crossing.is_some() as u8 as f64));
    Ok(r)
}

fn einselection(spec: &ExperimentSpec, trial: u64, rng: &mut TrialRng) -> Result<TrialOutput> {
    let dims = spec.dims;
    let (d_s, d_b) = (dims.d_s, dims.d_b);
    if d_s < 2 {
        return Err(spec_err(spec, "einselection needs d_s >= 2"));
    }
    let blocks: Vec<ComplexMatrix> = match spec.param_str("blocks", "random") {
        "random" => (0..d_s).map(|_| random_observable(d_b, rng)).collect(),
        "equal" => vec![random_observable(d_b, rng); d_s],
        other => {
            return Err(spec_err(
                spec,
                format!("blocks `{other}` is neither `random` nor `equal`"),
            ))
        }
    };
    let parts = pointer_hamiltonian(d_s, &blocks)?;
    let block_h = pointer_blocks(d_s, &blocks)?;
    let psi_b = sample_haar_state(&Subspace::full(Dims::single(d_b)), rng);
    let plus = PureState::normalized(vec![Complex64::new(1.0, 0.0); d_s], Dims::single(d_s))?;
    let psi = PureState::new(tensor_vec(plus.amplitudes(), psi_b.amplitudes()), dims)?;
    let h = &parts.assembled;
    let expansion = EnergyExpansion::new(&psi, h);
    let t_max = spec.horizon.unwrap_or(50.0);
    let ts = grid(t_max, spec.time_samples.max(2));
    let rho0 = rho_s(psi.amplitudes(), dims);

    let (mut drift, mut residual, mut late, mut late_n) = (0.0f64, 0.0f64, 0.0, 0usize);
    let mut rows = Vec::with_capacity(ts.len());
    for &t in &ts {
        let rs = rho_s(&expansion.state_at(t), dims);
        let step_drift = (0..d_s)
            .map(|p| (rs[(p, p)] - rho0[(p, p)]).norm())
            .fold(0.0, f64::max);
        drift = drift.max(step_drift);
        let mut worst_factor = 0.0f64;
        for p in 0..d_s {
            for q in p + 1..d_s {
                let f = suppression_factor(&block_h[p], &block_h[q], &psi_b, t)?;
                residual = residual.max((rs[(p, q)] - f * rho0[(p, q)]).norm());
                worst_factor = worst_factor.max(f.norm());
            }
        }
        if t >= 0.5 * t_max {
            late += worst_factor;
            late_n += 1;
        }
        rows.push(vec![worst_factor, rs[(0, 1)].norm(), step_drift]);
    }
    let late_suppression = late / late_n.max(1) as f64;

    let wc = weak_coupling(dims, coupling(spec)?, rng)?;
    let weak_psi = weak_initial_state(&wc, d_b, rng);
    let weak = weak_run(&wc, &weak_psi, &ts)?;
    let weak_violations = weak.reports.iter().filter(|r| r.is_violation()).count();
    for (row, (p, r)) in rows.iter_mut().zip(weak.pairing.iter().zip(&weak.rhs)) {
        row.extend([*p, *r]);
    }

    let satisfied = drift <= POINTER_DRIFT_TOL
        && weak_violations == 0
        && weak.mean_coherence <= weak.coherence_rhs;
    let mut record = TrialRecord {
        trial,
        lhs: drift,
        stderr: 0.0,
        rhs: POINTER_DRIFT_TOL,
        satisfied,
        vacuous: false,
        diagnostics: vec![],
    };
    record.diagnostics.extend([
        ("pointer_drift", drift),
        ("factor_residual", residual),
        ("late_suppression", late_suppression),
        ("weak_pointwise_violations", weak_violations as f64),
        ("weak_mean_coherence", weak.mean_coherence),
        ("weak_coherence_rhs", weak.coherence_rhs),
    ]);
    let series = (trial == 0).then(|| Series {
        name: "einselection",
        csv: series_csv(
            &[
                "suppression",
                "offdiag_abs",
                "diag_drift",
                "weak_pairing",
                "weak_rhs",
            ],
            &ts,
            &rows,
        ),
    });
    Ok(TrialOutput { record, series })
}

/// Distances of the S marginal along a trajectory from `psi`.
fn marginal_distances(
    h: &Hamiltonian,
    psi: &PureState,
    times: &[f64],
    target: &ComplexMatrix,
) -> Result<Vec<f64>> {
    let expansion = EnergyExpansion::new(psi, h);
    Ok(times
        .iter()
        .map(|&t| trace_distance_matrices(&rho_s(&expansion.state_at(t), h.dims()), target))
        .collect::<purestat::Result<_>>()?)
}

fn plot_horizon(spec: &ExperimentSpec, h: &Hamiltonian) -> f64 {
    spec.horizon
        .unwrap_or(50.0 / h.spectral_width().max(f64::MIN_POSITIVE))
}

fn second_law(spec: &ExperimentSpec, trial: u64, rng: &mut TrialRng) -> Result<TrialOutput> {
    let dims = spec.dims;
    let h = random_hamiltonian(spec, rng)?;
    let psi = PureState::basis(0, dims)?;
    let pops = EnergyExpansion::new(&psi, &h).populations();
    let omega_b = dephased_marginal(&pops, &h, Subsystem::B);
    let target = mixed(dims.d_s);
    let ts = sample_times(
        default_horizon(h.gap_report()),
        spec.time_samples.max(1),
        rng,
    );
    let dists = marginal_distances(&h, &psi, &ts, &target)?;
    let all: Vec<usize> = (0..h.dim()).collect();
    let defect = max_marginal_entanglement_defect(&h, &all)? / 2.0;
    let rhs = 0.5 * (dims.d_s as f64 * purestat::purity(&omega_b)).sqrt() + defect;
    let (m, se) = mean_stderr(&dists);
    let report = compare(
        TheoremId::SubsystemEquilibration,
        Estimate::new(m, se),
        rhs,
        Some(1.0),
    );
    let mut record = TrialRecord::from_report(&report);
    record.trial = trial;
    record.diagnostics.push(("eigenvector_distance", defect));
    let series = if trial == 0 {
        let grid_t = grid(plot_horizon(spec, &h), spec.time_samples.max(2));
        let expansion = EnergyExpansion::new(&psi, &h);
        let rows = grid_t
            .iter()
            .map(|&t| {
                let rs = DensityMatrix::new(
                    rho_s(&expansion.state_at(t), dims),
                    Dims::single(dims.d_s),
                )?;
                Ok(vec![
                    trace_distance_matrices(rs.matrix(), &target)?,
                    purestat::von_neumann_entropy(&rs),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Some(Series {
            name: "second_law",
            csv: series_csv(&["distance_to_mixed", "entropy_s"], &grid_t, &rows),
        })
    } else {
        None
    };
    Ok(TrialOutput { record, series })
}

fn distance_trajectory(
    spec: &ExperimentSpec,
    trial: u64,
    rng: &mut TrialRng,
) -> Result<TrialOutput> {
    let dims = spec.dims;
    let h = random_hamiltonian(spec, rng)?;
    let b = sample_haar_state(&Subspace::full(Dims::single(dims.d_b)), rng);
    let s = PureState::basis(0, Dims::single(dims.d_s))?;
    let psi = PureState::new(tensor_vec(s.amplitudes(), b.amplitudes()), dims)?;
    let pops = EnergyExpansion::new(&psi, &h).populations();
    let omega_s = dephased_marginal(&pops, &h, Subsystem::S);
    let omega_b = dephased_marginal(&pops, &h, Subsystem::B);
    let ctx = BoundContext {
        d_s: Some(dims.d_s),
        d_eff_b: Some(1.0 / purestat::purity(&omega_b)),
        ..Default::default()
    };
    let bound = evaluate_bound(TheoremId::SubsystemEquilibration, &ctx)?;
    let ts = grid(plot_horizon(spec, &h), spec.time_samples.max(2));
    let dists = marginal_distances(&h, &psi, &ts, omega_s.matrix())?;
    let late = &dists[dists.len() / 2..];
    let (m, se) = mean_stderr(late);
    let mut record = check(
        TheoremId::SubsystemEquilibration,
        Estimate::new(m, se),
        &ctx,
    )?;
    record.trial = trial;
    record.diagnostics.push(("initial_distance", dists[0]));
    let rows: Vec<Vec<f64>> = dists.iter().map(|&x| vec![x, bound]).collect();
    let series = (trial == 0).then(|| Series {
        name: "distance_trajectory",
        csv: series_csv(&["distance", "bound"], &ts, &rows),
    });
    Ok(TrialOutput { record, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use purestat::ensembles::trial_rng;

    #[test]
    fn observable_has_unit_norm() {
        let mut rng = trial_rng(1, 0);
        let a = random_observable(6, &mut rng);
        let n = purestat::schatten_norm(&a, purestat::NormKind::Operator).unwrap();
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coupling_part_has_vanishing_partial_traces() {
        let mut rng = trial_rng(2, 0);
        let dims = Dims::new(2, 3).unwrap();
        let x = coupling_part(&random_observable(6, &mut rng), dims).unwrap();
        assert!(partial_trace(&x, 2, 3, Subsystem::S).unwrap().max_abs() < 1e-12);
        assert!(partial_trace(&x, 2, 3, Subsystem::B).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn weak_coupling_has_requested_strength() {
        let mut rng = trial_rng(3, 0);
        let wc = weak_coupling(Dims::new(2, 8).unwrap(), 0.01, &mut rng).unwrap();
        assert!((wc.parts.coupling_norm().unwrap() - 0.01 * wc.gap).abs() < 1e-10);
        let plus = wc.plus_state();
        let rs = wc.in_system_basis(&plus.density().into_matrix());
        assert!((rs[(0, 1)].norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projector_commutes_with_subspace() {
        let mut rng = trial_rng(4, 0);
        let sub = Subspace::coordinate(Dims::single(8), &[0, 2, 4, 6]).unwrap();
        let b = subspace_projector(&sub, 2, &mut rng);
        let p = sub.projector();
        assert!(purestat::commutator(&b, &p).unwrap().max_abs() < 1e-12);
        assert!((&b * &b).max_abs_diff(&b) < 1e-12);
        assert!((b.trace().re - 2.0).abs() < 1e-12);
    }
}
