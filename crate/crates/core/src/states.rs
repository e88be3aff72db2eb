//! Pure and mixed states on bipartite spaces and the quantities defined on
//! them: trace distance, purity, effective dimension, entropies.

use num_complex::Complex64;

use crate::eigen::{hermitian_eig, hermitian_eigenvalues};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{
    self, inner, norm, tensor_product, tensor_vec, ComplexMatrix, Subsystem, ONE, ZERO,
};

pub const NORM_TOL: f64 = 1e-10;
pub const HERMITIAN_STATE_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;
pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Bipartite dimensions `(d_S, d_B)`. `d_B = 1` is a unipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub d_s: usize,
    pub d_b: usize,
}

impl Dims {
    pub fn new(d_s: usize, d_b: usize) -> Result<Self> {
        if d_s == 0 || d_b == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive, got {d_s}x{d_b}"
            )));
        }
        Ok(Self { d_s, d_b })
    }

    pub fn single(d: usize) -> Self {
        Self { d_s: d, d_b: 1 }
    }

    pub fn total(&self) -> usize {
        self.d_s * self.d_b
    }

    pub fn factor(&self, which: Subsystem) -> usize {
        match which {
            Subsystem::S => self.d_s,
            Subsystem::B => self.d_b,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.total() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "length {len} for dims {}x{}",
                self.d_s, self.d_b
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    dims: Dims,
}

impl PureState {
    /// Accepts only vectors normalized to within `1e-10`.
    pub fn new(amplitudes: Vec<Complex64>, dims: Dims) -> Result<Self> {
        dims.check_len(amplitudes.len())?;
        let n = norm(&amplitudes);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {n} is not 1")));
        }
        Ok(Self { amplitudes, dims })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>, dims: Dims) -> Result<Self> {
        dims.check_len(amplitudes.len())?;
        let n = linalg::normalize(&mut amplitudes);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self { amplitudes, dims })
    }

    pub(crate) fn from_trusted(amplitudes: Vec<Complex64>, dims: Dims) -> Self {
        debug_assert_eq!(amplitudes.len(), dims.total());
        Self { amplitudes, dims }
    }

    pub fn basis(k: usize, dims: Dims) -> Result<Self> {
        if k >= dims.total() {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} out of range"
            )));
        }
        let mut v = vec![ZERO; dims.total()];
        v[k] = ONE;
        Ok(Self {
            amplitudes: v,
            dims,
        })
    }

    /// `ψ^S ⊗ ψ^B`.
    pub fn product(s: &PureState, b: &PureState) -> Self {
        Self {
            amplitudes: tensor_vec(&s.amplitudes, &b.amplitudes),
            dims: Dims {
                d_s: s.dims.total(),
                d_b: b.dims.total(),
            },
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn with_dims(self, dims: Dims) -> Result<Self> {
        dims.check_len(self.amplitudes.len())?;
        Ok(Self { dims, ..self })
    }

    pub fn overlap(&self, other: &PureState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: ComplexMatrix::outer(&self.amplitudes),
            dims: self.dims,
        }
    }

    /// Reduced state of one factor, computed without forming `|ψ⟩⟨ψ|`.
    pub fn reduced(&self, keep: Subsystem) -> DensityMatrix {
        let m = linalg::reduce_pure(&self.amplitudes, self.dims.d_s, self.dims.d_b, keep);
        DensityMatrix {
            matrix: m,
            dims: Dims::single(self.dims.factor(keep)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Dims,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix, dims: Dims) -> Result<Self> {
        let d = matrix.ensure_square()?;
        dims.check_len(d)?;
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_STATE_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HERMITIAN_STATE_TOL,
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let matrix = matrix.hermitian_part();
        let min = hermitian_eigenvalues(&matrix)?[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { matrix, dims })
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix, dims: Dims) -> Self {
        debug_assert_eq!(matrix.rows(), dims.total());
        Self { matrix, dims }
    }

    pub fn maximally_mixed(dims: Dims) -> Self {
        let d = dims.total();
        Self {
            matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            dims,
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        psi.density()
    }

    /// `Σ p_k |ψ_k⟩⟨ψ_k|`; the weights must be a probability vector.
    pub fn mixture(weights: &[f64], states: &[PureState]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidArgument("need one weight per state".into()));
        }
        let dims = states[0].dims;
        let mut m = ComplexMatrix::zeros(dims.total(), dims.total());
        for (w, s) in weights.iter().zip(states) {
            if s.dims != dims {
                return Err(Error::DimensionMismatch(
                    "mixture of states with different dims".into(),
                ));
            }
            m = &m + &ComplexMatrix::outer(s.amplitudes()).scale_real(*w);
        }
        Self::new(m, dims)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn with_dims(self, dims: Dims) -> Result<Self> {
        dims.check_len(self.matrix.rows())?;
        Ok(Self { dims, ..self })
    }

    pub fn partial_trace(&self, keep: Subsystem) -> DensityMatrix {
        let m = linalg::partial_trace(&self.matrix, self.dims.d_s, self.dims.d_b, keep)
            .expect("dims were validated at construction");
        DensityMatrix {
            matrix: m,
            dims: Dims::single(self.dims.factor(keep)),
        }
    }

    /// `ρ ⊗ σ`, with `ρ` as the system factor.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: tensor_product(&self.matrix, &other.matrix),
            dims: Dims {
                d_s: self.dim(),
                d_b: other.dim(),
            },
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix).expect("density matrices are Hermitian")
    }

    /// `Tr[ρ A]`.
    pub fn expectation(&self, a: &ComplexMatrix) -> Complex64 {
        self.matrix.trace_product(a)
    }
}

/// A state of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn dims(&self) -> Dims {
        match self {
            QuantumState::Pure(p) => p.dims(),
            QuantumState::Mixed(m) => m.dims(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(p) => p.density(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }
}

fn same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    trace_distance_matrices(&rho.matrix, &sigma.matrix)
}

/// Trace distance on raw Hermitian matrices.
pub fn trace_distance_matrices(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let diff = (rho - sigma).hermitian_part();
    Ok(0.5
        * hermitian_eigenvalues(&diff)?
            .iter()
            .map(|x| x.abs())
            .sum::<f64>())
}

/// `√(1 − |⟨ψ|φ⟩|²)`.
pub fn pure_trace_distance(psi: &PureState, phi: &PureState) -> Result<f64> {
    if psi.dim() != phi.dim() {
        return Err(Error::DimensionMismatch(
            "pure states of different dimension".into(),
        ));
    }
    Ok((1.0 - psi.overlap(phi).norm_sqr()).max(0.0).sqrt())
}

/// Projector onto the non-negative eigenspace of `ρ − σ`.
pub fn positive_part_projector(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<ComplexMatrix> {
    same_dim(rho, sigma)?;
    let eig = hermitian_eig(&(&rho.matrix - &sigma.matrix).hermitian_part())?;
    let d = rho.dim();
    let cols: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k] >= 0.0).collect();
    Ok(ComplexMatrix::from_fn(d, d, |i, j| {
        cols.iter()
            .map(|&k| eig.eigenbasis[(i, k)] * eig.eigenbasis[(j, k)].conj())
            .sum()
    }))
}

/// `max_Π Tr[Π(ρ − σ)]`, attained by the positive-part projector.
pub fn max_projector_distinguishability(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let p = positive_part_projector(rho, sigma)?;
    Ok(p.trace_product(&(&rho.matrix - &sigma.matrix)).re)
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    purity_matrix(&rho.matrix)
}

/// `Tr[A²] = Σ|A_ij|²` for Hermitian `A`.
pub fn purity_matrix(a: &ComplexMatrix) -> f64 {
    a.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

/// `1/Tr[ρ²]`.
pub fn effective_dimension(rho: &DensityMatrix) -> f64 {
    1.0 / purity(rho)
}

/// Shannon entropy `−Σ p log p` of a spectrum, natural log, `0 log 0 = 0`.
pub fn spectrum_entropy(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// `−Tr[ρ log ρ]` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    spectrum_entropy(&rho.eigenvalues())
}

/// Entropy in an arbitrary logarithm base, e.g. 2 for bits.
pub fn von_neumann_entropy_base(rho: &DensityMatrix, base: f64) -> f64 {
    von_neumann_entropy(rho) / base.ln()
}

/// `S(ρ^S) + S(ρ^B) − S(ρ)`.
pub fn mutual_information(rho: &DensityMatrix) -> f64 {
    let s = von_neumann_entropy(&rho.partial_trace(Subsystem::S));
    let b = von_neumann_entropy(&rho.partial_trace(Subsystem::B));
    (s + b - von_neumann_entropy(rho)).max(0.0)
}

/// `I_SB = 2 S(ρ^S)` for a pure global state.
pub fn mutual_information_pure(psi: &PureState) -> f64 {
    2.0 * von_neumann_entropy(&psi.reduced(Subsystem::S))
}

/// A subspace given by an orthonormal basis, together with the dims of the
/// ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Vec<Vec<Complex64>>,
    dims: Dims,
}

impl Subspace {
    pub fn new(basis: Vec<Vec<Complex64>>, dims: Dims) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::EmptyBasis);
        }
        for v in &basis {
            dims.check_len(v.len())?;
        }
        let mut worst: f64 = 0.0;
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate().skip(i) {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((inner(u, v) - target).norm());
            }
        }
        if !worst.is_finite() {
            return Err(Error::NonFinite);
        }
        if worst > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(worst));
        }
        Ok(Self { basis, dims })
    }

    pub fn full(dims: Dims) -> Self {
        Self::coordinate(dims, &(0..dims.total()).collect::<Vec<_>>()).expect("indices in range")
    }

    /// Span of selected computational basis vectors.
    pub fn coordinate(dims: Dims, indices: &[usize]) -> Result<Self> {
        let d = dims.total();
        let mut basis = Vec::with_capacity(indices.len());
        for &k in indices {
            if k >= d {
                return Err(Error::InvalidArgument(format!(
                    "basis index {k} out of range for dimension {d}"
                )));
            }
            let mut v = vec![ZERO; d];
            v[k] = ONE;
            basis.push(v);
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "basis index {} repeated",
                w[0]
            )));
        }
        if basis.is_empty() {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { basis, dims })
    }

    /// Span of selected energy eigenvectors.
    pub fn energy_window(h: &Hamiltonian, indices: &[usize]) -> Result<Self> {
        let d = h.dim();
        let mut basis = Vec::with_capacity(indices.len());
        for &k in indices {
            if k >= d {
                return Err(Error::InvalidArgument(format!(
                    "eigenvector index {k} out of range for dimension {d}"
                )));
            }
            basis.push(h.eigenvector(k));
        }
        Self::new(basis, h.dims())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn basis(&self) -> &[Vec<Complex64>] {
        &self.basis
    }

    /// Maps subspace coordinates to an ambient vector.
    pub fn embed(&self, coefficients: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coefficients.len(), self.dim());
        let mut out = vec![ZERO; self.dims.total()];
        for (c, v) in coefficients.iter().zip(&self.basis) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    pub fn projector(&self) -> ComplexMatrix {
        let d = self.dims.total();
        let mut p = ComplexMatrix::zeros(d, d);
        for v in &self.basis {
            for i in 0..d {
                if v[i] == ZERO {
                    continue;
                }
                for j in 0..d {
                    p[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        p
    }
}

/// `Π_R / d_R`.
pub fn microcanonical_state(subspace: &Subspace) -> DensityMatrix {
    DensityMatrix {
        matrix: subspace.projector().scale_real(1.0 / subspace.dim() as f64),
        dims: subspace.dims(),
    }
}

/// `e^{−βH}/Z`, evaluated in the eigenbasis with exponents shifted by the
/// ground energy so that large `β` cannot overflow.
pub fn canonical_state(h: &Hamiltonian, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inverse temperature {beta} must be finite and non-negative"
        )));
    }
    let e0 = h.eigenvalues()[0];
    let weights: Vec<f64> = h
        .eigenvalues()
        .iter()
        .map(|&e| (-beta * (e - e0)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<Complex64> = weights.iter().map(|w| Complex64::new(w / z, 0.0)).collect();
    let m = linalg::conjugate_diagonal(h.eigenbasis(), &probs);
    Ok(DensityMatrix {
        matrix: m.hermitian_part(),
        dims: h.dims(),
    })
}

/// Mutually orthogonal projectors `Π_r` describing macro states.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroObservableSet {
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
    complete: bool,
}

impl MacroObservableSet {
    pub fn new(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::EmptyBasis);
        }
        if labels.len() != projectors.len() {
            return Err(Error::InvalidArgument(
                "one label per projector required".into(),
            ));
        }
        let d = projectors[0].ensure_square()?;
        let mut sum = ComplexMatrix::zeros(d, d);
        for (r, p) in projectors.iter().enumerate() {
            if p.rows() != d || p.cols() != d {
                return Err(Error::DimensionMismatch(
                    "projectors of different size".into(),
                ));
            }
            let idem = (&(p * p) - p).max_abs().max(p.hermitian_deviation());
            if idem > PROJECTOR_TOL {
                return Err(Error::InvalidArgument(format!(
                    "entry {r} is not a projector (residual {idem:.3e})"
                )));
            }
            for (s, q) in projectors.iter().enumerate().skip(r + 1) {
                let overlap = (p * q).max_abs();
                if overlap > PROJECTOR_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "projectors {r} and {s} overlap ({overlap:.3e})"
                    )));
                }
            }
            sum = &sum + p;
        }
        let complete = sum.max_abs_diff(&ComplexMatrix::identity(d)) <= PROJECTOR_TOL;
        Ok(Self {
            projectors,
            labels,
            complete,
        })
    }

    /// Projectors onto blocks of computational basis indices.
    pub fn from_partition(d: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut projectors = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut p = ComplexMatrix::zeros(d, d);
            for &k in block {
                if k >= d {
                    return Err(Error::InvalidArgument(format!("index {k} out of range")));
                }
                p[(k, k)] = ONE;
            }
            projectors.push(p);
        }
        let labels = (0..blocks.len()).map(|r| format!("M{r}")).collect();
        Self::new(projectors, labels)
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// `D_M(ρ, σ) = max_r Tr[Π_r(ρ − σ)]`.
pub fn macro_pseudo_distance(
    m: &MacroObservableSet,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<f64> {
    same_dim(rho, sigma)?;
    if m.projectors[0].rows() != rho.dim() {
        return Err(Error::DimensionMismatch(
            "macro projectors do not match the state dimension".into(),
        ));
    }
    let diff = &rho.matrix - &sigma.matrix;
    Ok(m.projectors
        .iter()
        .map(|p| p.trace_product(&diff).re)
        .fold(f64::NEG_INFINITY, f64::max))
}
