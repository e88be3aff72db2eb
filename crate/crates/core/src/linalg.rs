//! Dense complex matrices and the handful of operations the rest of the crate
//! is built on: products, tensor products, partial traces, Schatten norms.
//!
//! Composite indices are system-major: basis state `|s⟩⊗|b⟩` of a
//! `d_S ⊗ d_B` space sits at index `s * d_B + b`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::eigen::hermitian_eig;
use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default entrywise tolerance for Hermiticity checks on inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * d + i] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * d + i] = z;
        }
        m
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self::new(r, c, data)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::EmptyBasis);
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            for (i, &z) in c.iter().enumerate() {
                m.data[i * cols + j] = z;
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn outer(v: &[Complex64]) -> Self {
        let d = v.len();
        Self::from_fn(d, d, |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        if self
            .data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| {
            self.data[j * self.cols + i].conj()
        })
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                dev = dev.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<usize> {
        let d = self.ensure_square()?;
        let deviation = self.hermitian_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: tol,
            });
        }
        Ok(d)
    }

    /// `(A + A†)/2`, used to scrub round-off asymmetry.
    pub fn hermitian_part(&self) -> Self {
        let d = self.rows;
        Self::from_fn(d, d, |i, j| {
            (self.data[i * d + j] + self.data[j * d + i].conj()) * 0.5
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.dot(other))
    }

    fn dot(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: n,
            cols: p,
            data: out,
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A† v`.
    pub fn adjoint_mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![ZERO; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    /// `Tr[A B]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        acc
    }

    /// Expectation value `⟨v|A|v⟩`.
    pub fn expectation(&self, v: &[Complex64]) -> Complex64 {
        inner(v, &self.mul_vec(v))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.dot(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix sum dimension mismatch"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "matrix difference dimension mismatch"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [Complex64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Kronecker product; `(A⊗B)[i·rB + k, j·cB + l] = A[i,j]·B[k,l]`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca, rb, cb) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    let oc = ca * cb;
    for i in 0..ra {
        for j in 0..ca {
            let x = a.data[i * ca + j];
            if x == ZERO {
                continue;
            }
            for k in 0..rb {
                let row = (i * rb + k) * oc + j * cb;
                for l in 0..cb {
                    out.data[row + l] = x * b.data[k * cb + l];
                }
            }
        }
    }
    out
}

pub fn tensor_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Which factor of a bipartite space survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    S,
    B,
}

/// Traces out one factor of an operator on `d_S ⊗ d_B`.
pub fn partial_trace(
    rho: &ComplexMatrix,
    d_s: usize,
    d_b: usize,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let d = d_s * d_b;
    if rho.rows != d || rho.cols != d {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator on a {d_s}x{d_b} bipartite space",
            rho.rows, rho.cols
        )));
    }
    let out = match keep {
        Subsystem::S => ComplexMatrix::from_fn(d_s, d_s, |i, j| {
            (0..d_b)
                .map(|b| rho.data[(i * d_b + b) * d + j * d_b + b])
                .sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(d_b, d_b, |k, l| {
            (0..d_s)
                .map(|s| rho.data[(s * d_b + k) * d + s * d_b + l])
                .sum()
        }),
    };
    Ok(out)
}

/// Reduced state of a pure vector without forming the full projector.
/// Viewing `ψ` as a `d_S × d_B` matrix `M`, `Tr_B ψψ† = M M†` and
/// `Tr_S ψψ† = (Mᵀ M̄)`.
pub fn reduce_pure(psi: &[Complex64], d_s: usize, d_b: usize, keep: Subsystem) -> ComplexMatrix {
    reduce_outer(psi, psi, d_s, d_b, keep)
}

/// Partial trace of the rank-one operator `|a⟩⟨b|`.
pub fn reduce_outer(
    a: &[Complex64],
    b: &[Complex64],
    d_s: usize,
    d_b: usize,
    keep: Subsystem,
) -> ComplexMatrix {
    assert_eq!(a.len(), d_s * d_b);
    assert_eq!(b.len(), d_s * d_b);
    match keep {
        Subsystem::S => ComplexMatrix::from_fn(d_s, d_s, |i, j| {
            let ra = &a[i * d_b..(i + 1) * d_b];
            let rb = &b[j * d_b..(j + 1) * d_b];
            ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(d_b, d_b, |k, l| {
            (0..d_s)
                .map(|s| a[s * d_b + k] * b[s * d_b + l].conj())
                .sum()
        }),
    }
}

/// `Tr_B[A B]` or `Tr_S[A B]` without forming the full product.
pub fn partial_trace_of_product(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    d_s: usize,
    d_b: usize,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let d = d_s * d_b;
    for m in [a, b] {
        if m.rows != d || m.cols != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator on a {d_s}x{d_b} space",
                m.rows, m.cols
            )));
        }
    }
    let out = match keep {
        Subsystem::S => ComplexMatrix::from_fn(d_s, d_s, |i, j| {
            let mut acc = ZERO;
            for x in 0..d_b {
                let row = a.row(i * d_b + x);
                let col = j * d_b + x;
                for (k, &r) in row.iter().enumerate() {
                    acc += r * b.data[k * d + col];
                }
            }
            acc
        }),
        Subsystem::B => ComplexMatrix::from_fn(d_b, d_b, |i, j| {
            let mut acc = ZERO;
            for x in 0..d_s {
                let row = a.row(x * d_b + i);
                let col = x * d_b + j;
                for (k, &r) in row.iter().enumerate() {
                    acc += r * b.data[k * d + col];
                }
            }
            acc
        }),
    };
    Ok(out)
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() || a.rows != b.rows || a.cols != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "commutator of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(&a.dot(b) - &b.dot(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `Σ|λ_k|`
    Trace,
    /// `√Σ|λ_k|²`
    HilbertSchmidt,
    /// `max|λ_k|`
    Operator,
}

/// Schatten norms of a Hermitian matrix, from its spectrum.
///
/// The Hilbert–Schmidt norm is computed entrywise and so accepts any square
/// matrix; the other two require Hermitian input.
pub fn schatten_norm(a: &ComplexMatrix, kind: NormKind) -> Result<f64> {
    a.ensure_square()?;
    match kind {
        NormKind::HilbertSchmidt => Ok(a.frobenius_norm()),
        NormKind::Trace | NormKind::Operator => {
            let tol = HERMITIAN_TOL * a.max_abs().max(1.0);
            a.ensure_hermitian(tol)?;
            let eig = hermitian_eig(&a.hermitian_part())?;
            let abs = eig.eigenvalues.iter().map(|x| x.abs());
            Ok(match kind {
                NormKind::Trace => abs.sum(),
                _ => abs.fold(0.0, f64::max),
            })
        }
    }
}

/// Trace norm of an anti-Hermitian matrix `X`, via the Hermitian `iX`.
pub fn trace_norm_anti_hermitian(x: &ComplexMatrix) -> Result<f64> {
    schatten_norm(&x.scale(I), NormKind::Trace)
}

/// The swap `S|i⟩|j⟩ = |j⟩|i⟩` on `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(j * d + i, i * d + j)] = ONE;
        }
    }
    s
}

/// `V diag(w) V†`.
pub fn conjugate_diagonal(basis: &ComplexMatrix, diag: &[Complex64]) -> ComplexMatrix {
    let d = diag.len();
    assert_eq!(basis.cols, d);
    let r = basis.rows;
    // scale column k of V by w_k, then multiply by V†
    let mut scaled = basis.clone();
    for i in 0..r {
        for k in 0..d {
            scaled.data[i * d + k] *= diag[k];
        }
    }
    scaled.dot(&basis.adjoint())
}

/// `U_t = e^{−iHt} = V diag(e^{−iE_k t}) V†`.
pub fn unitary_from_hamiltonian(h: &crate::hamiltonian::Hamiltonian, t: f64) -> ComplexMatrix {
    let phases: Vec<Complex64> = h
        .eigenvalues()
        .iter()
        .map(|&e| Complex64::from_polar(1.0, -e * t))
        .collect();
    conjugate_diagonal(h.eigenbasis(), &phases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
        assert_eq!(
            ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_of_diagonals() {
        let a = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        let b = ComplexMatrix::from_real_diagonal(&[3.0, 4.0]);
        assert_eq!(
            tensor_product(&a, &b),
            ComplexMatrix::from_real_diagonal(&[3.0, 4.0, 6.0, 8.0])
        );
    }

    #[test]
    fn kron_index_convention() {
        let a = ComplexMatrix::from_fn(2, 3, |i, j| c((i * 3 + j) as f64, 1.0));
        let b = ComplexMatrix::from_fn(3, 2, |k, l| c(0.5, (k * 2 + l) as f64));
        let ab = tensor_product(&a, &b);
        assert_eq!((ab.rows(), ab.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..2 {
                        assert_eq!(ab[(i * 3 + k, j * 2 + l)], a[(i, j)] * b[(k, l)]);
                    }
                }
            }
        }
    }

    #[test]
    fn bell_state_marginal_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)];
        let rho = ComplexMatrix::outer(&bell);
        let red = partial_trace(&rho, 2, 2, Subsystem::S).unwrap();
        assert!(red.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        assert!(reduce_pure(&bell, 2, 2, Subsystem::B).max_abs_diff(&red) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = ComplexMatrix::identity(6);
        assert!(matches!(
            partial_trace(&rho, 2, 2, Subsystem::S),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn product_state_factorizes() {
        let rho = ComplexMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]).unwrap();
        let sigma =
            ComplexMatrix::from_real_rows(&[&[2.0, 0.0, 0.5], &[0.0, 1.0, 0.0], &[0.5, 0.0, 1.0]])
                .unwrap();
        let prod = tensor_product(&rho, &sigma);
        let red = partial_trace(&prod, 2, 3, Subsystem::S).unwrap();
        assert!(red.max_abs_diff(&rho.scale_real(4.0)) < 1e-14);
    }

    #[test]
    fn norms_of_identity() {
        let id = ComplexMatrix::identity(5);
        assert!((schatten_norm(&id, NormKind::Trace).unwrap() - 5.0).abs() < 1e-12);
        assert!(
            (schatten_norm(&id, NormKind::HilbertSchmidt).unwrap() - 5f64.sqrt()).abs() < 1e-12
        );
        assert!((schatten_norm(&id, NormKind::Operator).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norms_of_signed_diagonal() {
        let a = ComplexMatrix::from_real_diagonal(&[0.7, -0.3]);
        assert!((schatten_norm(&a, NormKind::Trace).unwrap() - 1.0).abs() < 1e-12);
        assert!((schatten_norm(&a, NormKind::Operator).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn eigen_norms_reject_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            schatten_norm(&a, NormKind::Trace),
            Err(Error::NotHermitian { .. })
        ));
        assert!(schatten_norm(&a, NormKind::HilbertSchmidt).is_ok());
    }

    #[test]
    fn commutator_cases() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64)));
        assert!(commutator(&a, &a).unwrap().max_abs() < 1e-14);
        let d1 = ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let d2 = ComplexMatrix::from_real_diagonal(&[-1.0, 5.0, 0.5]);
        assert_eq!(commutator(&d1, &d2).unwrap().max_abs(), 0.0);
        assert!(commutator(&d1, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn commutator_hand_computed() {
        // [ρ, A] with ρ = ½[[1,1],[1,1]], A = diag(0,1) is ½[[0,1],[−1,0]]
        let rho = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let a = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let comm = commutator(&rho, &a).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[0.0, 0.5], &[-0.5, 0.0]]).unwrap();
        assert!(comm.max_abs_diff(&expected) < 1e-15);
        assert!((trace_norm_anti_hermitian(&comm).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_matches_product() {
        let a = ComplexMatrix::from_fn(6, 6, |i, j| {
            c((i * 7 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.3)
        });
        let b = ComplexMatrix::from_fn(6, 6, |i, j| c(((i + 2 * j) % 5) as f64, 0.2 * j as f64));
        for keep in [Subsystem::S, Subsystem::B] {
            let fast = partial_trace_of_product(&a, &b, 2, 3, keep).unwrap();
            let slow = partial_trace(&(&a * &b), 2, 3, keep).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-12);
        }
    }

    #[test]
    fn swap_squares_to_identity() {
        let s = swap_operator(3);
        assert!((&s * &s).max_abs_diff(&ComplexMatrix::identity(9)) < 1e-15);
    }
}
