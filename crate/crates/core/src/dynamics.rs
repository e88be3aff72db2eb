//! Unitary evolution, dephasing, time averages, subsystem rates and pointer
//! Hamiltonians.
//!
//! Sign convention: `ρ_t = U_t ρ U_t†` with `U_t = e^{−iHt}`, so
//! `dρ/dt = i[ρ, H]`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::eigen::hermitian_eig;
use crate::error::{Error, Result};
use crate::hamiltonian::{gap_report, CompositeHamiltonian, GapReport, Hamiltonian};
use crate::linalg::{
    self, commutator, inner, partial_trace_of_product, reduce_outer, tensor_product, ComplexMatrix,
    Subsystem, I, ZERO,
};
use crate::states::{trace_distance_matrices, DensityMatrix, Dims, PureState, QuantumState};

/// Evolves either kind of state by `U_t`.
pub fn evolve(state: &QuantumState, h: &Hamiltonian, t: f64) -> Result<QuantumState> {
    Ok(match state {
        QuantumState::Pure(p) => QuantumState::Pure(evolve_pure(p, h, t)?),
        QuantumState::Mixed(m) => QuantumState::Mixed(evolve_density(m, h, t)?),
    })
}

pub fn evolve_pure(psi: &PureState, h: &Hamiltonian, t: f64) -> Result<PureState> {
    check_dim(psi.dim(), h)?;
    let v = EnergyExpansion::new(psi, h).state_at(t);
    Ok(PureState::from_trusted(v, psi.dims()))
}

pub fn evolve_density(rho: &DensityMatrix, h: &Hamiltonian, t: f64) -> Result<DensityMatrix> {
    check_dim(rho.dim(), h)?;
    let in_basis = h.to_eigenbasis(rho.matrix());
    let d = h.dim();
    let e = h.eigenvalues();
    let rotated = ComplexMatrix::from_fn(d, d, |k, l| {
        in_basis[(k, l)] * Complex64::from_polar(1.0, -(e[k] - e[l]) * t)
    });
    Ok(DensityMatrix::from_trusted(
        h.from_eigenbasis(&rotated).hermitian_part(),
        rho.dims(),
    ))
}

fn check_dim(d: usize, h: &Hamiltonian) -> Result<()> {
    if d != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {d}, Hamiltonian of dimension {}",
            h.dim()
        )));
    }
    Ok(())
}

/// A pure state written in the energy eigenbasis, for evaluating `ψ_t` at
/// many times at `O(d²)` each.
#[derive(Debug, Clone)]
pub struct EnergyExpansion<'a> {
    h: &'a Hamiltonian,
    coefficients: Vec<Complex64>,
}

impl<'a> EnergyExpansion<'a> {
    pub fn new(psi: &PureState, h: &'a Hamiltonian) -> Self {
        Self {
            h,
            coefficients: h.energy_coefficients(psi.amplitudes()),
        }
    }

    pub fn hamiltonian(&self) -> &'a Hamiltonian {
        self.h
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `|⟨E_k|ψ⟩|²`, the diagonal of the dephased state.
    pub fn populations(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn state_at(&self, t: f64) -> Vec<Complex64> {
        let phased: Vec<Complex64> = self
            .coefficients
            .iter()
            .zip(self.h.eigenvalues())
            .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t))
            .collect();
        self.h.from_energy_coefficients(&phased)
    }

    pub fn pure_state_at(&self, t: f64) -> PureState {
        PureState::from_trusted(self.state_at(t), self.h.dims())
    }
}

/// How the dephasing map treats the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DephaseMode {
    /// Keep only the diagonal in the eigenbasis; requires non-degenerate gaps.
    Strict,
    /// Keep blocks of eigenvalues closer than `tol` (projectors onto
    /// degenerate eigenspaces).
    DegenerateClusters { tol: f64 },
}

/// Cluster label of each eigenvalue under `mode`.
fn clusters(h: &Hamiltonian, mode: DephaseMode) -> Result<Vec<usize>> {
    let e = h.eigenvalues();
    match mode {
        DephaseMode::Strict => {
            if !h.gap_report().non_resonant {
                let g = h.gap_report();
                return Err(Error::Resonant {
                    min_gap: g.min_gap,
                    min_gap_difference: g.min_gap_difference,
                });
            }
            Ok((0..e.len()).collect())
        }
        DephaseMode::DegenerateClusters { tol } => {
            let mut labels = vec![0; e.len()];
            for k in 1..e.len() {
                labels[k] = if e[k] - e[k - 1] < tol {
                    labels[k - 1]
                } else {
                    labels[k - 1] + 1
                };
            }
            Ok(labels)
        }
    }
}

/// `$[X]`: drops the coherences of `X` between distinct eigenspaces.
pub fn dephase_operator(
    x: &ComplexMatrix,
    h: &Hamiltonian,
    mode: DephaseMode,
) -> Result<ComplexMatrix> {
    x.ensure_square()?;
    check_dim(x.rows(), h)?;
    let labels = clusters(h, mode)?;
    let mut in_basis = h.to_eigenbasis(x);
    let d = h.dim();
    for k in 0..d {
        for l in 0..d {
            if labels[k] != labels[l] {
                in_basis[(k, l)] = ZERO;
            }
        }
    }
    Ok(h.from_eigenbasis(&in_basis))
}

pub fn dephase(rho: &DensityMatrix, h: &Hamiltonian, mode: DephaseMode) -> Result<DensityMatrix> {
    let m = dephase_operator(rho.matrix(), h, mode)?;
    Ok(DensityMatrix::from_trusted(m.hermitian_part(), rho.dims()))
}

/// `ω = Σ_k |c_k|² |E_k⟩⟨E_k|` for a pure initial state.
pub fn dephased_pure(psi: &PureState, h: &Hamiltonian) -> Result<DensityMatrix> {
    check_dim(psi.dim(), h)?;
    let p = EnergyExpansion::new(psi, h).populations();
    let diag: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let m = linalg::conjugate_diagonal(h.eigenbasis(), &diag);
    Ok(DensityMatrix::from_trusted(m.hermitian_part(), psi.dims()))
}

/// Marginal `Tr_{other} ω` of the dephased state, built from eigenvector
/// marginals weighted by the populations.
pub fn dephased_marginal(populations: &[f64], h: &Hamiltonian, keep: Subsystem) -> DensityMatrix {
    let dims = h.dims();
    let k_dim = dims.factor(keep);
    let mut acc = ComplexMatrix::zeros(k_dim, k_dim);
    for (k, &p) in populations.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = h.eigenvector(k);
        let m = linalg::reduce_pure(&v, dims.d_s, dims.d_b, keep);
        acc = &acc + &m.scale_real(p);
    }
    DensityMatrix::from_trusted(acc.hermitian_part(), Dims::single(k_dim))
}

/// Default averaging horizon `T = 10⁴ / min gap difference`, falling back to
/// the smallest gap (and then to `10⁴`) when fewer gaps exist.
pub fn default_horizon(gaps: &GapReport) -> f64 {
    let scale = if gaps.min_gap_difference.is_finite() && gaps.min_gap_difference > 0.0 {
        gaps.min_gap_difference
    } else if gaps.min_gap.is_finite() && gaps.min_gap > 0.0 {
        gaps.min_gap
    } else {
        1.0
    };
    1e4 / scale
}

/// `n` times uniform on `[0, T]`, sorted.
pub fn sample_times<R: Rng + ?Sized>(horizon: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| horizon * rng.random::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverageReport {
    pub dephased: DensityMatrix,
    pub empirical: DensityMatrix,
    pub discrepancy: f64,
    pub horizon: f64,
    pub n_samples: usize,
}

/// Averages `ρ_t` (or one of its marginals) over `n` random times in
/// `[0, T]` and compares with the dephased state.
pub fn empirical_time_average<R: Rng + ?Sized>(
    h: &Hamiltonian,
    initial: &PureState,
    horizon: f64,
    n: usize,
    reduce: Option<Subsystem>,
    rng: &mut R,
) -> Result<TimeAverageReport> {
    if !(horizon > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(
            "need a positive horizon and at least two samples".into(),
        ));
    }
    check_dim(initial.dim(), h)?;
    let expansion = EnergyExpansion::new(initial, h);
    let dims = h.dims();
    let out_dim = reduce.map_or(dims.total(), |k| dims.factor(k));
    let mut acc = ComplexMatrix::zeros(out_dim, out_dim);
    for t in sample_times(horizon, n, rng) {
        let v = expansion.state_at(t);
        let m = match reduce {
            Some(keep) => linalg::reduce_pure(&v, dims.d_s, dims.d_b, keep),
            None => ComplexMatrix::outer(&v),
        };
        acc = &acc + &m;
    }
    let empirical_m = acc.scale_real(1.0 / n as f64).hermitian_part();
    let dephased = match reduce {
        Some(keep) => {
            // strict mode still requires non-resonance
            clusters(h, DephaseMode::Strict)?;
            dephased_marginal(&expansion.populations(), h, keep)
        }
        None => dephase(&initial.density(), h, DephaseMode::Strict)?,
    };
    let out_dims = reduce.map_or(dims, |k| Dims::single(dims.factor(k)));
    let empirical = DensityMatrix::from_trusted(empirical_m, out_dims);
    let discrepancy = trace_distance_matrices(dephased.matrix(), empirical.matrix())?;
    Ok(TimeAverageReport {
        dephased,
        empirical,
        discrepancy,
        horizon,
        n_samples: n,
    })
}

/// Mean and spread of a scalar sampled along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTimeStats {
    pub mean: f64,
    /// Population variance over the sampled times, `⟨f²⟩ − ⟨f⟩²`.
    pub variance: f64,
    pub second_moment: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl ScalarTimeStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let second_moment = values.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            mean,
            variance,
            second_moment,
            min,
            max,
            n,
        }
    }
}

/// Statistics of `f(t, ψ_t)` over the given times.
pub fn time_statistics(
    h: &Hamiltonian,
    initial: &PureState,
    times: &[f64],
    mut f: impl FnMut(f64, &PureState) -> f64,
) -> Result<ScalarTimeStats> {
    check_dim(initial.dim(), h)?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("no sample times".into()));
    }
    let expansion = EnergyExpansion::new(initial, h);
    let values: Vec<f64> = times
        .iter()
        .map(|&t| f(t, &expansion.pure_state_at(t)))
        .collect();
    Ok(ScalarTimeStats::from_values(&values))
}

fn check_parts(d: usize, parts: &CompositeHamiltonian) -> Result<Dims> {
    let dims = parts.dims();
    if d != dims.total() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {d}, Hamiltonian on {}x{}",
            dims.d_s, dims.d_b
        )));
    }
    Ok(dims)
}

/// `dρ^S/dt = i[ρ^S, H_S] + i Tr_B[ρ, H_SB]`.
pub fn subsystem_derivative(
    rho: &DensityMatrix,
    parts: &CompositeHamiltonian,
) -> Result<ComplexMatrix> {
    let dims = check_parts(rho.dim(), parts)?;
    let rho_s = rho.partial_trace(Subsystem::S);
    let local = commutator(rho_s.matrix(), &parts.h_s)?;
    let a = partial_trace_of_product(rho.matrix(), &parts.h_sb, dims.d_s, dims.d_b, Subsystem::S)?;
    let b = partial_trace_of_product(&parts.h_sb, rho.matrix(), dims.d_s, dims.d_b, Subsystem::S)?;
    Ok((&local + &(&a - &b)).scale(I))
}

/// Same as [`subsystem_derivative`] for `ρ = |ψ⟩⟨ψ|`, at `O(d²)` cost:
/// `Tr_B[ρ, H_SB] = A − A†` with `A = Tr_B |ψ⟩⟨H_SB ψ|`.
pub fn subsystem_derivative_pure(
    psi: &PureState,
    parts: &CompositeHamiltonian,
) -> Result<ComplexMatrix> {
    let dims = check_parts(psi.dim(), parts)?;
    let a = coupling_term_pure(psi, parts, dims);
    let rho_s = linalg::reduce_pure(psi.amplitudes(), dims.d_s, dims.d_b, Subsystem::S);
    let local = commutator(&rho_s, &parts.h_s)?;
    Ok((&local + &(&a - &a.adjoint())).scale(I))
}

fn coupling_term_pure(psi: &PureState, parts: &CompositeHamiltonian, dims: Dims) -> ComplexMatrix {
    let h_psi = parts.h_sb.mul_vec(psi.amplitudes());
    reduce_outer(psi.amplitudes(), &h_psi, dims.d_s, dims.d_b, Subsystem::S)
}

/// `v_S = ½‖dρ^S/dt‖₁`.
pub fn subsystem_speed(rho: &DensityMatrix, parts: &CompositeHamiltonian) -> Result<f64> {
    Ok(0.5
        * linalg::schatten_norm(
            &subsystem_derivative(rho, parts)?.hermitian_part(),
            linalg::NormKind::Trace,
        )?)
}

pub fn subsystem_speed_pure(psi: &PureState, parts: &CompositeHamiltonian) -> Result<f64> {
    Ok(0.5
        * linalg::schatten_norm(
            &subsystem_derivative_pure(psi, parts)?.hermitian_part(),
            linalg::NormKind::Trace,
        )?)
}

/// Both forms of the subsystem purity rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityRate {
    /// `Tr[ρ^S 2i Tr_B[ρ, H_SB]]`
    pub direct: f64,
    /// `Tr[ρ^S 2i Tr_B[ρ^cor, H_SB]]`, `ρ^cor = ρ − ρ^S⊗ρ^B`
    pub correlated: f64,
}

pub const RATE_AGREEMENT_TOL: f64 = 1e-9;

/// Signed `dp^S/dt`, cross-checked against the correlation-operator form.
pub fn purity_rate(rho: &DensityMatrix, parts: &CompositeHamiltonian) -> Result<f64> {
    let r = purity_rate_forms(rho, parts)?;
    if (r.direct - r.correlated).abs() > RATE_AGREEMENT_TOL * r.direct.abs().max(1.0) {
        return Err(Error::RateMismatch {
            direct: r.direct,
            correlated: r.correlated,
        });
    }
    Ok(r.direct)
}

pub fn purity_rate_forms(rho: &DensityMatrix, parts: &CompositeHamiltonian) -> Result<PurityRate> {
    let dims = check_parts(rho.dim(), parts)?;
    let rho_s = rho.partial_trace(Subsystem::S);
    let rho_b = rho.partial_trace(Subsystem::B);
    let rate = |x: &ComplexMatrix| -> Result<f64> {
        let a = partial_trace_of_product(x, &parts.h_sb, dims.d_s, dims.d_b, Subsystem::S)?;
        let b = partial_trace_of_product(&parts.h_sb, x, dims.d_s, dims.d_b, Subsystem::S)?;
        Ok((rho_s.matrix().trace_product(&(&a - &b)) * I * 2.0).re)
    };
    let cor = rho.matrix() - &tensor_product(rho_s.matrix(), rho_b.matrix());
    Ok(PurityRate {
        direct: rate(rho.matrix())?,
        correlated: rate(&cor)?,
    })
}

/// Direct form of the purity rate for a pure global state, `O(d²)`.
pub fn purity_rate_pure(psi: &PureState, parts: &CompositeHamiltonian) -> Result<f64> {
    let dims = check_parts(psi.dim(), parts)?;
    let a = coupling_term_pure(psi, parts, dims);
    let rho_s = linalg::reduce_pure(psi.amplitudes(), dims.d_s, dims.d_b, Subsystem::S);
    Ok((rho_s.trace_product(&(&a - &a.adjoint())) * I * 2.0).re)
}

/// Gap structure of `H` at tolerance `tol`.
pub fn gap_analysis(h: &Hamiltonian, tol: f64) -> GapReport {
    gap_report(h.eigenvalues(), tol)
}

/// Central-difference step `10⁻⁶/‖H‖∞`.
pub fn finite_difference_step(h: &Hamiltonian) -> f64 {
    1e-6 / h.operator_norm().max(f64::MIN_POSITIVE)
}

/// `H = Σ_p |p⟩⟨p| ⊗ H^(p)`, diagonalized block by block.
pub fn pointer_hamiltonian(d_s: usize, blocks: &[ComplexMatrix]) -> Result<CompositeHamiltonian> {
    let pb = pointer_blocks(d_s, blocks)?;
    let d_b = blocks[0].rows();
    let d = d_s * d_b;
    let mut values = Vec::with_capacity(d);
    let mut basis = ComplexMatrix::zeros(d, d);
    for (p, block) in pb.iter().enumerate() {
        values.extend_from_slice(block.eigenvalues());
        for i in 0..d_b {
            for j in 0..d_b {
                basis[(p * d_b + i, p * d_b + j)] = block.eigenbasis()[(i, j)];
            }
        }
    }
    let h = Hamiltonian::from_eigen(values, basis, Dims::new(d_s, d_b)?)?;
    CompositeHamiltonian::decompose(&h)
}

/// Diagonalized pointer blocks `H^(p)`, validated.
pub fn pointer_blocks(d_s: usize, blocks: &[ComplexMatrix]) -> Result<Vec<Hamiltonian>> {
    if blocks.len() != d_s || d_s == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks for pointer dimension {d_s}",
            blocks.len()
        )));
    }
    let d_b = blocks[0].ensure_square()?;
    blocks
        .iter()
        .map(|b| {
            if b.rows() != d_b || b.cols() != d_b {
                return Err(Error::DimensionMismatch(
                    "pointer blocks of different size".into(),
                ));
            }
            let eig = hermitian_eig(b)?;
            Hamiltonian::from_eigen(eig.eigenvalues, eig.eigenbasis, Dims::single(d_b))
        })
        .collect()
}

/// `⟨ψ^B| U^(q)† U^(p) |ψ^B⟩`, the factor multiplying `ρ^S_pq` at time `t`
/// for a product initial state under a pointer Hamiltonian.
pub fn suppression_factor(
    block_p: &Hamiltonian,
    block_q: &Hamiltonian,
    psi_b: &PureState,
    t: f64,
) -> Result<Complex64> {
    let up = evolve_pure(psi_b, block_p, t)?;
    let uq = evolve_pure(psi_b, block_q, t)?;
    Ok(inner(uq.amplitudes(), up.amplitudes()))
}

/// States along a trajectory, optionally reduced to one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub reduced: Option<Subsystem>,
}

impl Trajectory {
    /// Times must be strictly increasing.
    pub fn compute(
        h: &Hamiltonian,
        initial: &PureState,
        times: &[f64],
        reduce: Option<Subsystem>,
    ) -> Result<Self> {
        check_dim(initial.dim(), h)?;
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        let expansion = EnergyExpansion::new(initial, h);
        let states = times
            .iter()
            .map(|&t| {
                let psi = expansion.pure_state_at(t);
                match reduce {
                    Some(keep) => psi.reduced(keep),
                    None => psi.density(),
                }
            })
            .collect();
        Ok(Self {
            times: times.to_vec(),
            states,
            reduced: reduce,
        })
    }

    /// CSV with a `t` column followed by one column per functional.
    pub fn to_csv(&self, columns: &[&str], f: impl Fn(f64, &DensityMatrix) -> Vec<f64>) -> String {
        let rows: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| f(t, s))
            .collect();
        series_csv(columns, &self.times, &rows)
    }
}

/// `t,<columns…>` CSV with LF line endings.
pub fn series_csv(columns: &[&str], times: &[f64], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("t");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        write!(out, "{t:?}").unwrap();
        for x in row {
            write!(out, ",{x:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{
        haar_unitary, sample_haar_state, sample_random_hamiltonian, trial_rng, SpectrumSpec,
    };
    use crate::linalg::ONE;
    use crate::states::{purity, trace_distance, Subspace};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_composite(d_s: usize, d_b: usize, seed: u64) -> CompositeHamiltonian {
        let mut rng = trial_rng(seed, 0);
        let h = sample_random_hamiltonian(
            &SpectrumSpec::default(),
            Dims::new(d_s, d_b).unwrap(),
            &mut rng,
        )
        .unwrap();
        CompositeHamiltonian::decompose(&h).unwrap()
    }

    #[test]
    fn evolution_examples() {
        let h = Hamiltonian::diagonal(&[0.0, 1.0], Dims::single(2)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureState::new(vec![c(s), c(s)], Dims::single(2)).unwrap();
        let minus = PureState::new(vec![c(s), c(-s)], Dims::single(2)).unwrap();
        let out = evolve_pure(&plus, &h, std::f64::consts::PI).unwrap();
        assert!(
            out.density()
                .matrix()
                .max_abs_diff(minus.density().matrix())
                < 1e-15
        );
        assert_eq!(evolve_pure(&plus, &h, 0.0).unwrap(), plus);
        let e1 = PureState::basis(1, Dims::single(2)).unwrap();
        let out = evolve(&QuantumState::Pure(e1.clone()), &h, 3.7)
            .unwrap()
            .to_density();
        assert!(out.matrix().max_abs_diff(e1.density().matrix()) < 1e-15);
        let mixed = evolve_density(&plus.density(), &h, std::f64::consts::PI).unwrap();
        assert!(mixed.matrix().max_abs_diff(minus.density().matrix()) < 1e-15);
    }

    #[test]
    fn dephasing_examples() {
        let h = Hamiltonian::diagonal(&[0.0, 1.0, 3.0], Dims::single(3)).unwrap();
        let diag = DensityMatrix::new(
            ComplexMatrix::from_real_diagonal(&[0.2, 0.3, 0.5]),
            Dims::single(3),
        )
        .unwrap();
        assert_eq!(dephase(&diag, &h, DephaseMode::Strict).unwrap(), diag);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sup = PureState::new(vec![c(s), c(s), ZERO], Dims::single(3)).unwrap();
        let w = dephase(&sup.density(), &h, DephaseMode::Strict).unwrap();
        assert!(
            w.matrix()
                .max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.5, 0.5, 0.0]))
                < 1e-15
        );
        assert!(
            dephased_pure(&sup, &h)
                .unwrap()
                .matrix()
                .max_abs_diff(w.matrix())
                < 1e-15
        );

        let resonant = Hamiltonian::diagonal(&[0.0, 1.0, 2.0], Dims::single(3)).unwrap();
        assert!(matches!(
            dephase(&sup.density(), &resonant, DephaseMode::Strict),
            Err(Error::Resonant { .. })
        ));
        let degenerate = Hamiltonian::diagonal(&[0.0, 0.0, 2.0], Dims::single(3)).unwrap();
        let kept = dephase(
            &sup.density(),
            &degenerate,
            DephaseMode::DegenerateClusters { tol: 1e-9 },
        )
        .unwrap();
        assert!(kept.matrix().max_abs_diff(sup.density().matrix()) < 1e-15);
    }

    #[test]
    fn dephasing_is_idempotent_and_commutes() {
        let mut rng = trial_rng(5, 0);
        let dims = Dims::new(2, 4).unwrap();
        let h = sample_random_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
        let psi = sample_haar_state(&Subspace::full(dims), &mut rng);
        let w = dephase(&psi.density(), &h, DephaseMode::Strict).unwrap();
        let ww = dephase(&w, &h, DephaseMode::Strict).unwrap();
        assert!(w.matrix().max_abs_diff(ww.matrix()) < 1e-12);
        assert!(commutator(w.matrix(), &h.matrix()).unwrap().max_abs() < 1e-12);
        assert!((w.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_state_time_average_is_exact() {
        let mut rng = trial_rng(6, 0);
        let dims = Dims::new(2, 4).unwrap();
        let h = sample_random_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
        let psi = PureState::new(h.eigenvector(3), dims).unwrap();
        let r = empirical_time_average(&h, &psi, 100.0, 10, None, &mut rng).unwrap();
        assert!(r.discrepancy < 1e-9);
        let stats = time_statistics(&h, &psi, &[0.0, 1.0, 2.0], |_, s| {
            s.amplitudes().iter().map(|z| z.norm_sqr()).sum()
        })
        .unwrap();
        assert!((stats.mean - 1.0).abs() < 1e-12);
        assert!(stats.variance < 1e-24);
    }

    #[test]
    fn time_average_converges_to_dephased_state() {
        let mut rng = trial_rng(8, 0);
        let dims = Dims::new(2, 16).unwrap();
        let h = sample_random_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
        let psi = sample_haar_state(&Subspace::full(dims), &mut rng);
        let horizon = default_horizon(h.gap_report());
        let r = empirical_time_average(&h, &psi, horizon, 10_000, None, &mut rng).unwrap();
        assert!(r.discrepancy <= 0.02, "discrepancy {}", r.discrepancy);
        let rs =
            empirical_time_average(&h, &psi, horizon, 2000, Some(Subsystem::S), &mut rng).unwrap();
        let direct = r.dephased.partial_trace(Subsystem::S);
        assert!(rs.dephased.matrix().max_abs_diff(direct.matrix()) < 1e-12);
    }

    #[test]
    fn speed_and_rate_vanish_in_trivial_cases() {
        let parts = random_composite(2, 4, 9);
        let psi = PureState::new(parts.assembled.eigenvector(2), parts.dims()).unwrap();
        assert!(subsystem_speed(&psi.density(), &parts).unwrap() < 1e-12);
        assert!(subsystem_speed_pure(&psi, &parts).unwrap() < 1e-12);

        let prod = PureState::product(
            &PureState::basis(0, Dims::single(2)).unwrap(),
            &PureState::basis(1, Dims::single(4)).unwrap(),
        );
        let forms = purity_rate_forms(&prod.density(), &parts).unwrap();
        assert!(forms.direct.abs() < 1e-12 && forms.correlated.abs() < 1e-12);
    }

    #[test]
    fn uncoupled_speed_is_local_commutator() {
        let h_s = ComplexMatrix::from_real_rows(&[&[0.5, 0.2], &[0.2, -0.5]]).unwrap();
        let h_b = ComplexMatrix::from_real_diagonal(&[0.1, -0.3, 0.2]);
        let parts =
            CompositeHamiltonian::from_parts(0.0, &h_s, &h_b, &ComplexMatrix::zeros(6, 6)).unwrap();
        let mut rng = trial_rng(1, 1);
        let psi = sample_haar_state(&Subspace::full(parts.dims()), &mut rng);
        let rho_s = psi.reduced(Subsystem::S);
        let expected = 0.5
            * linalg::trace_norm_anti_hermitian(&commutator(rho_s.matrix(), &h_s).unwrap())
                .unwrap();
        assert!((subsystem_speed_pure(&psi, &parts).unwrap() - expected).abs() < 1e-12);
        assert!(purity_rate(&psi.density(), &parts).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rates_match_finite_differences() {
        let parts = random_composite(2, 6, 10);
        let h = &parts.assembled;
        let mut rng = trial_rng(10, 1);
        let psi = sample_haar_state(&Subspace::full(parts.dims()), &mut rng);
        let delta = finite_difference_step(h);
        let at = |t: f64| evolve_pure(&psi, h, t).unwrap();

        let dp = (purity(&at(delta).reduced(Subsystem::S))
            - purity(&at(-delta).reduced(Subsystem::S)))
            / (2.0 * delta);
        let rate = purity_rate(&psi.density(), &parts).unwrap();
        assert!(
            (rate - dp).abs() <= 1e-4 * rate.abs().max(1e-3),
            "{rate} vs {dp}"
        );
        assert!((purity_rate_pure(&psi, &parts).unwrap() - rate).abs() < 1e-12);

        let v = subsystem_speed_pure(&psi, &parts).unwrap();
        let fd = trace_distance(
            &at(-delta).reduced(Subsystem::S),
            &at(delta).reduced(Subsystem::S),
        )
        .unwrap()
            / (2.0 * delta);
        assert!((v - fd).abs() <= 1e-4 * v, "{v} vs {fd}");
        assert!((subsystem_speed(&psi.density(), &parts).unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn pointer_hamiltonian_preserves_populations() {
        let mut rng = trial_rng(12, 0);
        let d_b = 8;
        let blocks: Vec<ComplexMatrix> = (0..2)
            .map(|_| {
                let u = haar_unitary(d_b, &mut rng);
                let e: Vec<f64> = (0..d_b).map(|_| rng.random::<f64>()).collect();
                let h = Hamiltonian::from_eigen(e, u, Dims::single(d_b)).unwrap();
                h.matrix()
            })
            .collect();
        let parts = pointer_hamiltonian(2, &blocks).unwrap();
        let pb = pointer_blocks(2, &blocks).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi_s = PureState::new(vec![c(s), c(s)], Dims::single(2)).unwrap();
        let psi_b = sample_haar_state(&Subspace::full(Dims::single(d_b)), &mut rng);
        let psi = PureState::product(&psi_s, &psi_b);
        for t in [0.0, 0.5, 3.0, 40.0] {
            let rho_s = evolve_pure(&psi, &parts.assembled, t)
                .unwrap()
                .reduced(Subsystem::S);
            assert!((rho_s.matrix()[(0, 0)].re - 0.5).abs() < 1e-10);
            assert!((rho_s.matrix()[(1, 1)].re - 0.5).abs() < 1e-10);
            let factor = suppression_factor(&pb[0], &pb[1], &psi_b, t).unwrap();
            assert!((rho_s.matrix()[(0, 1)] - factor * 0.5).norm() < 1e-9);
        }
        assert!(pointer_hamiltonian(3, &blocks).is_err());
    }

    #[test]
    fn equal_blocks_do_not_decohere() {
        let block = ComplexMatrix::from_real_rows(&[&[0.3, 0.1], &[0.1, -0.2]]).unwrap();
        let parts = pointer_hamiltonian(2, &[block.clone(), block]).unwrap();
        assert!(parts.h_sb.max_abs() < 1e-12);
        assert!(parts.h_s.max_abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = PureState::product(
            &PureState::new(vec![c(s), c(s)], Dims::single(2)).unwrap(),
            &PureState::basis(0, Dims::single(2)).unwrap(),
        );
        let r0 = psi.reduced(Subsystem::S);
        let rt = evolve_pure(&psi, &parts.assembled, 7.0)
            .unwrap()
            .reduced(Subsystem::S);
        assert!(r0.matrix().max_abs_diff(rt.matrix()) < 1e-12);
    }

    #[test]
    fn trajectory_csv() {
        let h = Hamiltonian::diagonal(&[0.0, 1.0], Dims::single(2)).unwrap();
        let psi = PureState::basis(0, Dims::single(2)).unwrap();
        let traj = Trajectory::compute(&h, &psi, &[0.0, 0.5, 1.0], None).unwrap();
        let csv = traj.to_csv(&["p00"], |_, s| vec![s.matrix()[(0, 0)].re]);
        assert_eq!(csv, "t,p00\n0.0,1.0\n0.5,1.0\n1.0,1.0\n");
        assert!(Trajectory::compute(&h, &psi, &[1.0, 0.5], None).is_err());
        assert_eq!(traj.states[1].matrix()[(0, 0)], ONE);
    }
}
