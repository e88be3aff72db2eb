use num_complex::Complex64;

use crate::eigen::hermitian_eig;
use crate::error::{Error, Result};
use crate::linalg::{self, partial_trace, tensor_product, ComplexMatrix, NormKind, Subsystem};
use crate::states::Dims;

/// Gap tolerance used when none is given.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;
pub const UNITARITY_TOL: f64 = 1e-10;

/// Gap structure of a spectrum.
///
/// `min_gap_difference` is the smallest `|(E_k − E_l) − (E_m − E_n)|` over
/// distinct pairs of positive gaps; it is infinite when fewer than two gaps
/// exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub min_gap: f64,
    pub min_gap_difference: f64,
    pub non_resonant: bool,
    pub tolerance: f64,
}

/// Exhaustive pairwise scan up to this dimension; sorted-gap scan above.
pub const EXHAUSTIVE_GAP_SCAN_MAX_DIM: usize = 64;

pub fn gap_report(spectrum: &[f64], tol: f64) -> GapReport {
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut gaps = Vec::with_capacity(sorted.len() * sorted.len().saturating_sub(1) / 2);
    for k in 0..sorted.len() {
        for l in 0..k {
            gaps.push(sorted[k] - sorted[l]);
        }
    }
    let min_gap_difference = if sorted.len() <= EXHAUSTIVE_GAP_SCAN_MAX_DIM {
        let mut best = f64::INFINITY;
        for i in 0..gaps.len() {
            for j in (i + 1)..gaps.len() {
                best = best.min((gaps[i] - gaps[j]).abs());
            }
        }
        best
    } else {
        gaps.sort_by(f64::total_cmp);
        gaps.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    };
    GapReport {
        min_gap,
        min_gap_difference,
        non_resonant: min_gap > tol && min_gap_difference > tol,
        tolerance: tol,
    }
}

/// A Hamiltonian stored through its eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    eigenvalues: Vec<f64>,
    eigenbasis: ComplexMatrix,
    dims: Dims,
    gaps: GapReport,
}

impl Hamiltonian {
    /// From a spectrum and a unitary whose columns are the eigenvectors.
    /// Eigenpairs are reordered to ascending energy.
    pub fn from_eigen(
        eigenvalues: Vec<f64>,
        eigenbasis: ComplexMatrix,
        dims: Dims,
    ) -> Result<Self> {
        let d = eigenbasis.ensure_square()?;
        if eigenvalues.len() != d || dims.total() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues, {d}x{d} basis, dims {}x{}",
                eigenvalues.len(),
                dims.d_s,
                dims.d_b
            )));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite);
        }
        let residual =
            (&eigenbasis.adjoint() * &eigenbasis).max_abs_diff(&ComplexMatrix::identity(d));
        if residual > UNITARITY_TOL {
            return Err(Error::NotOrthonormal(residual));
        }
        Ok(Self::assemble(eigenvalues, eigenbasis, dims))
    }

    pub(crate) fn assemble(eigenvalues: Vec<f64>, eigenbasis: ComplexMatrix, dims: Dims) -> Self {
        let d = eigenvalues.len();
        let (eigenvalues, eigenbasis) = if eigenvalues.windows(2).all(|w| w[0] <= w[1]) {
            (eigenvalues, eigenbasis)
        } else {
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&i, &j| eigenvalues[i].total_cmp(&eigenvalues[j]));
            let basis = ComplexMatrix::from_fn(d, d, |i, j| eigenbasis[(i, order[j])]);
            (order.iter().map(|&k| eigenvalues[k]).collect(), basis)
        };
        let gaps = gap_report(&eigenvalues, DEFAULT_GAP_TOL);
        Self {
            eigenvalues,
            eigenbasis,
            dims,
            gaps,
        }
    }

    /// Diagonalizes a Hermitian matrix.
    pub fn from_matrix(matrix: &ComplexMatrix, dims: Dims) -> Result<Self> {
        let d = matrix.ensure_square()?;
        if dims.total() != d {
            return Err(Error::DimensionMismatch(format!(
                "{d}x{d} matrix for dims {}x{}",
                dims.d_s, dims.d_b
            )));
        }
        let eig = hermitian_eig(matrix)?;
        Ok(Self::assemble(eig.eigenvalues, eig.eigenbasis, dims))
    }

    /// Diagonal in the computational basis.
    pub fn diagonal(spectrum: &[f64], dims: Dims) -> Result<Self> {
        Self::from_eigen(
            spectrum.to_vec(),
            ComplexMatrix::identity(spectrum.len()),
            dims,
        )
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenbasis(&self) -> &ComplexMatrix {
        &self.eigenbasis
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenbasis.column(k)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn gap_report(&self) -> &GapReport {
        &self.gaps
    }

    /// Re-runs the gap scan at a different tolerance.
    pub fn gap_report_at(&self, tol: f64) -> GapReport {
        gap_report(&self.eigenvalues, tol)
    }

    pub fn with_dims(mut self, dims: Dims) -> Result<Self> {
        if dims.total() != self.dim() {
            return Err(Error::DimensionMismatch(
                "dims do not match the Hamiltonian".into(),
            ));
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let diag: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&e| Complex64::new(e, 0.0))
            .collect();
        linalg::conjugate_diagonal(&self.eigenbasis, &diag).hermitian_part()
    }

    /// `max |E_k|`.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }

    /// `E_max − E_min`.
    pub fn spectral_width(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        linalg::unitary_from_hamiltonian(self, t)
    }

    /// `V† X V`: an operator written in the energy eigenbasis.
    pub fn to_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&self.eigenbasis.adjoint() * x) * &self.eigenbasis
    }

    /// `V X V†`: back from the energy eigenbasis.
    pub fn from_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&self.eigenbasis * x) * &self.eigenbasis.adjoint()
    }

    /// Coefficients `⟨E_k|ψ⟩`.
    pub fn energy_coefficients(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.eigenbasis.adjoint_mul_vec(psi)
    }

    /// `Σ_k c_k |E_k⟩`.
    pub fn from_energy_coefficients(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.eigenbasis.mul_vec(c)
    }

    /// Same eigenbasis, spectrum shifted by `a`.
    pub fn shifted(&self, a: f64) -> Self {
        let eigenvalues: Vec<f64> = self.eigenvalues.iter().map(|e| e + a).collect();
        Self {
            gaps: self.gaps,
            eigenvalues,
            eigenbasis: self.eigenbasis.clone(),
            dims: self.dims,
        }
    }
}

/// `H = h0·I + H_S⊗I + I⊗H_B + H_SB` with traceless `H_S`, `H_B`, `H_SB`.
///
/// The traceless convention fixes the decomposition uniquely:
/// `h0 = Tr H / d`, `H_S = Tr_B H / d_B − h0 I`, `H_B = Tr_S H / d_S − h0 I`,
/// and `H_SB` is the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeHamiltonian {
    pub h0_coefficient: f64,
    pub h_s: ComplexMatrix,
    pub h_b: ComplexMatrix,
    pub h_sb: ComplexMatrix,
    pub assembled: Hamiltonian,
}

impl CompositeHamiltonian {
    pub fn decompose(h: &Hamiltonian) -> Result<Self> {
        let m = h.matrix();
        let parts = split(&m, h.dims())?;
        Ok(Self {
            h0_coefficient: parts.0,
            h_s: parts.1,
            h_b: parts.2,
            h_sb: parts.3,
            assembled: h.clone(),
        })
    }

    /// Assembles and diagonalizes `h0·I + H_S⊗I + I⊗H_B + H_SB`. The pieces
    /// need not be traceless; the stored parts are re-normalized to the
    /// traceless convention.
    pub fn from_parts(
        h0: f64,
        h_s: &ComplexMatrix,
        h_b: &ComplexMatrix,
        h_sb: &ComplexMatrix,
    ) -> Result<Self> {
        let d_s = h_s.ensure_hermitian(linalg::HERMITIAN_TOL * h_s.max_abs().max(1.0))?;
        let d_b = h_b.ensure_hermitian(linalg::HERMITIAN_TOL * h_b.max_abs().max(1.0))?;
        let d = h_sb.ensure_hermitian(linalg::HERMITIAN_TOL * h_sb.max_abs().max(1.0))?;
        if d != d_s * d_b {
            return Err(Error::DimensionMismatch(format!(
                "coupling is {d}x{d}, factors are {d_s} and {d_b}"
            )));
        }
        let dims = Dims::new(d_s, d_b)?;
        let total = assemble(h0, h_s, h_b, h_sb);
        let assembled = Hamiltonian::from_matrix(&total, dims)?;
        let (h0_coefficient, h_s, h_b, h_sb) = split(&total, dims)?;
        Ok(Self {
            h0_coefficient,
            h_s,
            h_b,
            h_sb,
            assembled,
        })
    }

    pub fn dims(&self) -> Dims {
        self.assembled.dims()
    }

    /// `h0·I + H_S⊗I + I⊗H_B + H_SB`.
    pub fn total_matrix(&self) -> ComplexMatrix {
        assemble(self.h0_coefficient, &self.h_s, &self.h_b, &self.h_sb)
    }

    /// `H_S⊗I + H_SB`.
    pub fn system_and_coupling(&self) -> ComplexMatrix {
        let d_b = self.dims().d_b;
        &tensor_product(&self.h_s, &ComplexMatrix::identity(d_b)) + &self.h_sb
    }

    /// `‖H_SB‖∞`.
    pub fn coupling_norm(&self) -> Result<f64> {
        linalg::schatten_norm(&self.h_sb, NormKind::Operator)
    }

    /// `‖H_S⊗I + H_SB‖∞`.
    pub fn system_and_coupling_norm(&self) -> Result<f64> {
        linalg::schatten_norm(&self.system_and_coupling(), NormKind::Operator)
    }
}

fn assemble(
    h0: f64,
    h_s: &ComplexMatrix,
    h_b: &ComplexMatrix,
    h_sb: &ComplexMatrix,
) -> ComplexMatrix {
    let (d_s, d_b) = (h_s.rows(), h_b.rows());
    let mut total = &tensor_product(h_s, &ComplexMatrix::identity(d_b))
        + &tensor_product(&ComplexMatrix::identity(d_s), h_b);
    total = &total + h_sb;
    &total + &ComplexMatrix::identity(d_s * d_b).scale_real(h0)
}

fn split(
    m: &ComplexMatrix,
    dims: Dims,
) -> Result<(f64, ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    let (d_s, d_b) = (dims.d_s, dims.d_b);
    let d = dims.total();
    let h0 = m.trace().re / d as f64;
    let h_s = &partial_trace(m, d_s, d_b, Subsystem::S)?.scale_real(1.0 / d_b as f64)
        - &ComplexMatrix::identity(d_s).scale_real(h0);
    let h_b = &partial_trace(m, d_s, d_b, Subsystem::B)?.scale_real(1.0 / d_s as f64)
        - &ComplexMatrix::identity(d_b).scale_real(h0);
    let local = assemble(h0, &h_s, &h_b, &ComplexMatrix::zeros(d, d));
    let h_sb = (m - &local).hermitian_part();
    Ok((h0, h_s.hermitian_part(), h_b.hermitian_part(), h_sb))
}
