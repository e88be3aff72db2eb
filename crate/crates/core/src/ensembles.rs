//! Random states and Hamiltonians.
//!
//! Every sampler takes an explicit generator. Reproducible per-trial
//! generators come from [`trial_rng`]: ChaCha8 keyed by the run seed, with the
//! trial index selecting the stream, so trial `k` draws the same numbers no
//! matter which worker runs it.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hamiltonian::{gap_report, Hamiltonian, DEFAULT_GAP_TOL};
use crate::linalg::{inner, normalize, tensor_product, ComplexMatrix};
use crate::states::{Dims, PureState, Subspace};

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `trial_index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// `σ(x + iy)` with `x, y` independent standard normals.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * x, sigma * y)
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<Complex64> {
    (0..d).map(|_| complex_gaussian(rng, 1.0)).collect()
}

/// Haar-distributed unitary.
///
/// Columns of a complex Gaussian matrix are orthonormalized by Gram–Schmidt
/// (two passes), which is the QR factorization whose triangular factor has a
/// positive real diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut v = gaussian_vector(rng, d);
        for _ in 0..2 {
            for u in &cols {
                let proj = inner(u, &v);
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
        }
        normalize(&mut v);
        cols.push(v);
    }
    ComplexMatrix::from_columns(&cols).expect("Gaussian columns are finite")
}

/// Uniformly random unit vector in the span of `subspace`.
pub fn sample_haar_state<R: Rng + ?Sized>(subspace: &Subspace, rng: &mut R) -> PureState {
    let mut c = gaussian_vector(rng, subspace.dim());
    normalize(&mut c);
    let mut v = subspace.embed(&c);
    normalize(&mut v);
    PureState::from_trusted(v, subspace.dims())
}

/// `ψ^S ⊗ ψ^B` with each factor Haar on its subspace. The subspaces are taken
/// as unipartite; the result has dims `(d_S, d_B)` of their ambient spaces.
pub fn sample_product_state<R: Rng + ?Sized>(
    basis_s: &Subspace,
    basis_b: &Subspace,
    rng: &mut R,
) -> PureState {
    let s = sample_haar_state(basis_s, rng);
    let b = sample_haar_state(basis_b, rng);
    PureState::product(&s, &b)
}

/// Eigenvalue distribution for random Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    /// i.i.d. uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Fixed values; jittered only if resonant.
    Explicit(Vec<f64>),
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

impl SpectrumSpec {
    pub fn draw<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            SpectrumSpec::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "bad spectrum interval [{low}, {high}]"
                    )));
                }
                Ok((0..d).map(|_| rng.random_range(*low..*high)).collect())
            }
            SpectrumSpec::Explicit(values) => {
                if values.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "{} eigenvalues for dimension {d}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

pub const JITTER_SCALE: f64 = 1e-6;
pub const MAX_JITTER_ROUNDS: usize = 100;

/// Perturbs a spectrum by i.i.d. uniform shifts of size `1e-6 × width` until
/// it has non-degenerate gaps at tolerance `1e-9`. Already non-resonant input
/// is returned unchanged (sorted).
pub fn make_non_resonant<R: Rng + ?Sized>(mut values: Vec<f64>, rng: &mut R) -> Result<Vec<f64>> {
    values.sort_by(f64::total_cmp);
    if gap_report(&values, DEFAULT_GAP_TOL).non_resonant {
        return Ok(values);
    }
    let width = values[values.len() - 1] - values[0];
    let amplitude = JITTER_SCALE * width;
    for _ in 0..MAX_JITTER_ROUNDS {
        for v in values.iter_mut() {
            *v += amplitude * rng.random_range(-1.0..1.0);
        }
        values.sort_by(f64::total_cmp);
        if gap_report(&values, DEFAULT_GAP_TOL).non_resonant {
            return Ok(values);
        }
    }
    Err(Error::JitterExhausted(MAX_JITTER_ROUNDS))
}

/// Hamiltonian with a Haar-random eigenbasis and a non-resonant spectrum.
pub fn sample_random_hamiltonian<R: Rng + ?Sized>(
    spectrum: &SpectrumSpec,
    dims: Dims,
    rng: &mut R,
) -> Result<Hamiltonian> {
    let d = dims.total();
    let values = make_non_resonant(spectrum.draw(d, rng)?, rng)?;
    let basis = haar_unitary(d, rng);
    Ok(Hamiltonian::assemble(values, basis, dims))
}

/// Hamiltonian whose eigenvectors all have the maximally mixed state as
/// their marginal on S.
///
/// Requires `d_B = m·d_S`. Writing `B = B₁⊗B₂` with `dim B₁ = d_S`, the
/// eigenvectors are `(V_S⊗W_B)(|Φ_ab⟩⊗|c⟩)`, where `|Φ_ab⟩` is the
/// generalized Bell basis of `S⊗B₁` and `V_S`, `W_B` are Haar unitaries. Local
/// unitaries do not change the S marginal, which is `I/d_S` for every Bell
/// vector.
pub fn sample_entangled_hamiltonian<R: Rng + ?Sized>(
    spectrum: &SpectrumSpec,
    dims: Dims,
    rng: &mut R,
) -> Result<Hamiltonian> {
    let (d_s, d_b) = (dims.d_s, dims.d_b);
    if d_b % d_s != 0 {
        return Err(Error::InvalidArgument(format!(
            "bath dimension {d_b} is not a multiple of {d_s}"
        )));
    }
    let m = d_b / d_s;
    let d = dims.total();
    let values = make_non_resonant(spectrum.draw(d, rng)?, rng)?;
    let v_s = haar_unitary(d_s, rng);
    let w_b = haar_unitary(d_b, rng);
    let local = tensor_product(&v_s, &w_b);

    let amp = 1.0 / (d_s as f64).sqrt();
    let mut bell = ComplexMatrix::zeros(d, d);
    let mut col = 0;
    for a in 0..d_s {
        for b in 0..d_s {
            for c in 0..m {
                for j in 0..d_s {
                    let phase = 2.0 * std::f64::consts::PI * (a * j) as f64 / d_s as f64;
                    let b1 = (j + b) % d_s;
                    bell[(j * d_b + b1 * m + c, col)] = Complex64::from_polar(amp, phase);
                }
                col += 1;
            }
        }
    }
    // random pairing of energies and eigenvectors
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled = ComplexMatrix::from_fn(d, d, |i, j| bell[(i, order[j])]);
    Ok(Hamiltonian::assemble(values, &local * &shuffled, dims))
}

/// `d / Σ 1/E_k`.
pub fn harmonic_mean(spectrum: &[f64]) -> f64 {
    spectrum.len() as f64 / spectrum.iter().map(|e| 1.0 / e).sum::<f64>()
}

/// Shift `a` such that the harmonic mean of `{E_k + a}` equals `E + a`.
///
/// `f(a) = H(a) − (E + a)` runs from `E_0 − E < 0` at `a = −E_0` to
/// `E_⌀ − E > 0` as `a → ∞`, so a root exists exactly when
/// `E_0 < E < E_⌀`; it is located by bisection.
pub fn shift_for_harmonic_mean(spectrum: &[f64], energy: f64) -> Result<f64> {
    if spectrum.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let e0 = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = spectrum.iter().sum::<f64>() / spectrum.len() as f64;
    let scale = e0.abs().max(mean.abs()).max(1.0);
    if mean - e0 <= 1e-12 * scale {
        if (energy - e0).abs() <= 1e-12 * scale {
            return Ok(0.0);
        }
        return Err(Error::EnergyOutOfRange {
            energy,
            lower: e0,
            upper: mean,
        });
    }
    if !(energy > e0 && energy < mean) {
        return Err(Error::EnergyOutOfRange {
            energy,
            lower: e0,
            upper: mean,
        });
    }
    let f = |a: f64| {
        let inv: f64 = spectrum.iter().map(|e| 1.0 / (e + a)).sum();
        spectrum.len() as f64 / inv - (energy + a)
    };
    if e0 > 0.0 && f(0.0).abs() <= 1e-12 * energy.abs() {
        return Ok(0.0);
    }
    let mut lo = -e0;
    let mut span = mean - e0;
    let mut doublings = 0;
    while f(-e0 + span) <= 0.0 {
        span *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::EnergyOutOfRange {
                energy,
                lower: e0,
                upper: mean,
            });
        }
    }
    let mut hi = -e0 + span;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-coefficient widths `σ_k = √(E/(d E_k))` of the mean-energy sampler.
pub fn mean_energy_sigmas(spectrum: &[f64], energy: f64) -> Result<Vec<f64>> {
    let d = spectrum.len() as f64;
    if let Some(&bad) = spectrum.iter().find(|&&e| e <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean-energy sampler needs positive energies, found {bad}"
        )));
    }
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean-energy sampler needs positive target energy, got {energy}"
        )));
    }
    Ok(spectrum
        .iter()
        .map(|&e| (energy / (d * e)).sqrt())
        .collect())
}

/// Approximate sample from the mean-energy ensemble of `h` at energy `E`.
///
/// The spectrum must already be shifted so that `E` sits at the harmonic
/// mean (see [`shift_for_harmonic_mean`]). Real and imaginary parts of
/// `c_k = ⟨E_k|ψ⟩` are drawn from `N(0, σ_k²)` and the vector is then
/// normalized.
pub fn sample_mean_energy_state<R: Rng + ?Sized>(
    h: &Hamiltonian,
    energy: f64,
    rng: &mut R,
) -> Result<PureState> {
    let sigmas = mean_energy_sigmas(h.eigenvalues(), energy)?;
    let mut c: Vec<Complex64> = sigmas.iter().map(|&s| complex_gaussian(rng, s)).collect();
    normalize(&mut c);
    let mut v = h.from_energy_coefficients(&c);
    normalize(&mut v);
    Ok(PureState::from_trusted(v, h.dims()))
}

/// Which basis vectors span a Haar subspace.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceSpec {
    Full,
    /// Computational basis indices.
    Coordinates(Vec<usize>),
    /// Energy eigenvector indices (ascending energy) of the trial Hamiltonian.
    Energy(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    HaarSubspace(SubspaceSpec),
    /// Haar factors on the first `d_sr` (resp. `d_br`) computational basis
    /// vectors of S (resp. B).
    Product {
        d_sr: usize,
        d_br: usize,
    },
    /// Mean-energy ensemble at energy `E`, given on the unshifted spectrum.
    MeanEnergy {
        energy: f64,
    },
}

/// Sampler choice plus the `(seed, trial_index)` that fixes its stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub seed: u64,
    pub trial_index: u64,
}

impl EnsembleSpec {
    pub fn rng(&self) -> TrialRng {
        trial_rng(self.seed, self.trial_index)
    }

    pub fn subspace(&self, dims: Dims, h: Option<&Hamiltonian>) -> Result<Subspace> {
        match &self.kind {
            EnsembleKind::HaarSubspace(SubspaceSpec::Full) => Ok(Subspace::full(dims)),
            EnsembleKind::HaarSubspace(SubspaceSpec::Coordinates(idx)) => {
                Subspace::coordinate(dims, idx)
            }
            EnsembleKind::HaarSubspace(SubspaceSpec::Energy(idx)) => {
                Subspace::energy_window(h.ok_or(Error::MissingContext("hamiltonian"))?, idx)
            }
            _ => Err(Error::InvalidArgument(
                "ensemble has no single subspace".into(),
            )),
        }
    }

    /// Draws one state using the spec's own stream.
    pub fn sample(&self, dims: Dims, h: Option<&Hamiltonian>) -> Result<PureState> {
        self.sample_with(dims, h, &mut self.rng())
    }

    /// Draws one state from a caller-supplied generator.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        dims: Dims,
        h: Option<&Hamiltonian>,
        rng: &mut R,
    ) -> Result<PureState> {
        match &self.kind {
            EnsembleKind::HaarSubspace(_) => Ok(sample_haar_state(&self.subspace(dims, h)?, rng)),
            EnsembleKind::Product { d_sr, d_br } => {
                let s =
                    Subspace::coordinate(Dims::single(dims.d_s), &(0..*d_sr).collect::<Vec<_>>())?;
                let b =
                    Subspace::coordinate(Dims::single(dims.d_b), &(0..*d_br).collect::<Vec<_>>())?;
                Ok(sample_product_state(&s, &b, rng))
            }
            EnsembleKind::MeanEnergy { energy } => {
                let h = h.ok_or(Error::MissingContext("hamiltonian"))?;
                let a = shift_for_harmonic_mean(h.eigenvalues(), *energy)?;
                sample_mean_energy_state(&h.shifted(a), energy + a, rng)
            }
        }
    }

    /// Flat key/value form, keys as in the harness config.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        match &self.kind {
            EnsembleKind::HaarSubspace(sub) => {
                kv.insert("kind".into(), "haar_subspace".into());
                let s = match sub {
                    SubspaceSpec::Full => "all".to_string(),
                    SubspaceSpec::Coordinates(idx) => format!("coord:{}", format_index_list(idx)),
                    SubspaceSpec::Energy(idx) => format!("energy:{}", format_index_list(idx)),
                };
                kv.insert("subspace".into(), s);
            }
            EnsembleKind::Product { d_sr, d_br } => {
                kv.insert("kind".into(), "product".into());
                kv.insert("d_sr".into(), d_sr.to_string());
                kv.insert("d_br".into(), d_br.to_string());
            }
            EnsembleKind::MeanEnergy { energy } => {
                kv.insert("kind".into(), "mean_energy".into());
                kv.insert("energy".into(), format!("{energy:?}"));
            }
        }
        kv.insert("seed".into(), self.seed.to_string());
        kv.insert("trial_index".into(), self.trial_index.to_string());
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidArgument(format!("missing key `{k}`")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{k}` is not an integer")))
        };
        let kind = match get("kind")?.trim() {
            "haar_subspace" => {
                let s = kv.get("subspace").map_or("all", |s| s.as_str()).trim();
                let sub = if s == "all" {
                    SubspaceSpec::Full
                } else if let Some(rest) = s.strip_prefix("coord:") {
                    SubspaceSpec::Coordinates(parse_index_list(rest)?)
                } else if let Some(rest) = s.strip_prefix("energy:") {
                    SubspaceSpec::Energy(parse_index_list(rest)?)
                } else {
                    return Err(Error::InvalidArgument(format!("unknown subspace `{s}`")));
                };
                EnsembleKind::HaarSubspace(sub)
            }
            "product" => EnsembleKind::Product {
                d_sr: num("d_sr")? as usize,
                d_br: num("d_br")? as usize,
            },
            "mean_energy" => EnsembleKind::MeanEnergy {
                energy: get("energy")?
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument("`energy` is not a number".into()))?,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown ensemble kind `{other}`"
                )))
            }
        };
        Ok(Self {
            kind,
            seed: num("seed")?,
            trial_index: kv
                .get("trial_index")
                .map_or(Ok(0), |_| num("trial_index"))?,
        })
    }
}

/// Parses `0..4,7,9..11` into `[0,1,2,3,7,9,10]` (ranges are half-open).
pub fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad index list `{s}`"));
    let mut out = vec![];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// Inverse of [`parse_index_list`], compressing consecutive runs.
pub fn format_index_list(idx: &[usize]) -> String {
    let mut parts = vec![];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && idx[j + 1] == idx[j] + 1 {
            j += 1;
        }
        if j > i {
            parts.push(format!("{}..{}", idx[i], idx[j] + 1));
        } else {
            parts.push(idx[i].to_string());
        }
        i = j + 1;
    }
    parts.join(",")
}

/// Largest `|⟨a|b⟩ − δ_ab|` over the columns of `u`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    (&u.adjoint() * u).max_abs_diff(&ComplexMatrix::identity(u.cols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Subsystem;
    use crate::states::{mutual_information_pure, purity, trace_distance};
    use crate::DensityMatrix;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| trial_rng(7, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| trial_rng(7, 3).random()).collect();
        assert_eq!(a, b);
        let mut r1 = trial_rng(7, 3);
        let mut r2 = trial_rng(7, 4);
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = trial_rng(1, 0);
        for d in [1, 2, 7, 32] {
            assert!(unitarity_residual(&haar_unitary(d, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_subspace_is_deterministic_projector() {
        let dims = Dims::single(4);
        let sub = Subspace::coordinate(dims, &[2]).unwrap();
        let mut rng = trial_rng(3, 0);
        let psi = sample_haar_state(&sub, &mut rng);
        assert!((psi.amplitudes()[2].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_state_has_no_correlations() {
        let mut rng = trial_rng(5, 1);
        let s = Subspace::full(Dims::single(3));
        let b = Subspace::coordinate(Dims::single(5), &[0, 2, 4]).unwrap();
        let psi = sample_product_state(&s, &b, &mut rng);
        assert_eq!(psi.dims(), Dims::new(3, 5).unwrap());
        assert!((purity(&psi.reduced(Subsystem::S)) - 1.0).abs() < 1e-12);
        assert!(mutual_information_pure(&psi) < 1e-10);
        let trivial = sample_product_state(
            &Subspace::coordinate(Dims::single(2), &[1]).unwrap(),
            &Subspace::coordinate(Dims::single(2), &[0]).unwrap(),
            &mut rng,
        );
        assert!((trivial.amplitudes()[2].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_hamiltonian_small_cases() {
        let mut rng = trial_rng(11, 0);
        let h = sample_random_hamiltonian(
            &SpectrumSpec::Explicit(vec![0.0, 1.0]),
            Dims::single(2),
            &mut rng,
        )
        .unwrap();
        assert_eq!(h.eigenvalues(), &[0.0, 1.0]);
        assert_eq!(h.gap_report().min_gap, 1.0);
        assert!(h.gap_report().non_resonant);
        let h = sample_random_hamiltonian(&SpectrumSpec::default(), Dims::single(16), &mut rng)
            .unwrap();
        assert!(h.gap_report().non_resonant);
        assert!(unitarity_residual(h.eigenbasis()) < 1e-10);
    }

    #[test]
    fn jitter_resolves_equal_spacing() {
        let mut rng = trial_rng(2, 2);
        let values: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let fixed = make_non_resonant(values.clone(), &mut rng).unwrap();
        assert!(gap_report(&fixed, DEFAULT_GAP_TOL).non_resonant);
        for (a, b) in fixed.iter().zip(&values) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!(matches!(
            make_non_resonant(vec![1.0; 3], &mut rng),
            Err(Error::JitterExhausted(_))
        ));
    }

    #[test]
    fn entangled_eigenbasis_marginals_are_maximally_mixed() {
        let mut rng = trial_rng(4, 0);
        let dims = Dims::new(2, 8).unwrap();
        let h = sample_entangled_hamiltonian(&SpectrumSpec::default(), dims, &mut rng).unwrap();
        assert!(unitarity_residual(h.eigenbasis()) < 1e-10);
        let mixed = DensityMatrix::maximally_mixed(Dims::single(2));
        for k in 0..dims.total() {
            let psi = PureState::new(h.eigenvector(k), dims).unwrap();
            assert!(trace_distance(&psi.reduced(Subsystem::S), &mixed).unwrap() < 1e-12);
        }
        assert!(sample_entangled_hamiltonian(
            &SpectrumSpec::default(),
            Dims::new(3, 8).unwrap(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn harmonic_shift_examples() {
        assert_eq!(shift_for_harmonic_mean(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert!(shift_for_harmonic_mean(&[1.0, 3.0], 1.5).unwrap().abs() < 1e-9);
        let spectrum = [1.0, 2.0, 3.0, 6.0];
        let a = shift_for_harmonic_mean(&spectrum, 2.4).unwrap();
        let shifted: Vec<f64> = spectrum.iter().map(|e| e + a).collect();
        assert!((harmonic_mean(&shifted) - (2.4 + a)).abs() <= 1e-9 * (2.4 + a));
        assert!(a > -1.0);
        assert!(matches!(
            shift_for_harmonic_mean(&spectrum, 0.5),
            Err(Error::EnergyOutOfRange { .. })
        ));
        assert!(matches!(
            shift_for_harmonic_mean(&spectrum, 3.0),
            Err(Error::EnergyOutOfRange { .. })
        ));
    }

    #[test]
    fn sigma_formula() {
        let s = mean_energy_sigmas(&[1.0, 3.0], 1.5).unwrap();
        assert!((s[0] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((s[1] - 0.5).abs() < 1e-15);
        assert!(mean_energy_sigmas(&[-1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn index_lists_round_trip() {
        let idx = parse_index_list("0..4, 7,9..11").unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3, 7, 9, 10]);
        assert_eq!(format_index_list(&idx), "0..4,7,9..11");
        assert!(parse_index_list("a..2").is_err());
    }

    #[test]
    fn ensemble_spec_kv_round_trip() {
        for kind in [
            EnsembleKind::HaarSubspace(SubspaceSpec::Full),
            EnsembleKind::HaarSubspace(SubspaceSpec::Coordinates(vec![0, 1, 5])),
            EnsembleKind::HaarSubspace(SubspaceSpec::Energy((0..16).collect())),
            EnsembleKind::Product { d_sr: 2, d_br: 8 },
            EnsembleKind::MeanEnergy { energy: 1.4375 },
        ] {
            let spec = EnsembleSpec {
                kind,
                seed: 99,
                trial_index: 12,
            };
            assert_eq!(EnsembleSpec::from_kv(&spec.to_kv()).unwrap(), spec);
        }
    }

    #[test]
    fn ensemble_spec_sampling_is_reproducible() {
        let dims = Dims::new(2, 4).unwrap();
        let spec = EnsembleSpec {
            kind: EnsembleKind::Product { d_sr: 2, d_br: 3 },
            seed: 1,
            trial_index: 5,
        };
        assert_eq!(
            spec.sample(dims, None).unwrap(),
            spec.sample(dims, None).unwrap()
        );
        let other = EnsembleSpec {
            trial_index: 6,
            ..spec.clone()
        };
        assert_ne!(
            spec.sample(dims, None).unwrap(),
            other.sample(dims, None).unwrap()
        );
        let needs_h = EnsembleSpec {
            kind: EnsembleKind::MeanEnergy { energy: 1.0 },
            seed: 1,
            trial_index: 0,
        };
        assert!(matches!(
            needs_h.sample(dims, None),
            Err(Error::MissingContext(_))
        ));
    }
}
