//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HERMITIAN_TOL, ZERO};

/// Sweeps stop once the off-diagonal Frobenius norm falls below this
/// fraction of the Frobenius norm of the input.
pub const OFF_DIAGONAL_THRESHOLD: f64 = 1e-13;
pub const MAX_SWEEPS: usize = 30;

/// Eigenvalues in ascending order with the matching eigenvectors as columns
/// of `eigenbasis`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenbasis: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenbasis.column(k)
    }

    /// `V Λ V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let diag: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&e| Complex64::new(e, 0.0))
            .collect();
        crate::linalg::conjugate_diagonal(&self.eigenbasis, &diag)
    }
}

/// Full eigendecomposition. Input must be square and Hermitian to within
/// `1e-12` entrywise (relative to the largest entry when that exceeds one).
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    let (values, vt) = jacobi(a, true)?;
    let vt = vt.expect("vectors requested");
    let d = values.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    // row k of `vt` is eigenvector k; place it in column position
    let eigenbasis = ComplexMatrix::from_fn(d, d, |i, j| vt[order[j] * d + i]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenbasis,
    })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let (mut values, _) = jacobi(a, false)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn jacobi(a: &ComplexMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<Complex64>>)> {
    let d = a.ensure_square()?;
    let scale = a.max_abs().max(1.0);
    let deviation = a.hermitian_deviation();
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian {
            deviation,
            tolerance: HERMITIAN_TOL * scale,
        });
    }

    let mut m: Vec<Complex64> = a.hermitian_part().as_slice().to_vec();
    for i in 0..d {
        m[i * d + i].im = 0.0;
    }
    let mut vt = want_vectors.then(|| ComplexMatrix::identity(d).as_slice().to_vec());

    let total = a.frobenius_norm();
    let threshold = OFF_DIAGONAL_THRESHOLD * total;
    let off_norm = |m: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += m[i * d + j].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweep = 0;
    loop {
        let off = off_norm(&m);
        if off <= threshold || total == 0.0 {
            break;
        }
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps: sweep,
                residual: off,
            });
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let app = m[p * d + p].re;
                let aqq = m[q * d + q].re;
                // entries negligible against both diagonals are dropped once
                // the iteration is well underway
                if sweep > 3
                    && app.abs() + 100.0 * g == app.abs()
                    && aqq.abs() + 100.0 * g == aqq.abs()
                {
                    m[p * d + q] = ZERO;
                    m[q * d + p] = ZERO;
                    continue;
                }
                rotate(&mut m, vt.as_deref_mut(), d, p, q, apq, g, app, aqq);
            }
        }
        sweep += 1;
    }

    let values = (0..d).map(|i| m[i * d + i].re).collect();
    Ok((values, vt))
}

/// Applies `A ← J† A J` (and `Vᵀ ← Jᵀ Vᵀ`) for the unitary that zeroes
/// `A[p,q]`. With `A[p,q] = g e^{iφ}`, `J` is the real rotation on the
/// phase-corrected pair: `J_pp = c`, `J_pq = s`, `J_qp = −s e^{−iφ}`,
/// `J_qq = c e^{−iφ}`.
#[allow(clippy::too_many_arguments)]
fn rotate(
    m: &mut [Complex64],
    vt: Option<&mut [Complex64]>,
    d: usize,
    p: usize,
    q: usize,
    apq: Complex64,
    g: f64,
    app: f64,
    aqq: f64,
) {
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.0
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = apq / g; // e^{iφ}

    // rows p and q of J† A
    for k in 0..d {
        let xp = m[p * d + k];
        let xq = m[q * d + k];
        m[p * d + k] = xp * c - phase * xq * s;
        m[q * d + k] = xp * s + phase * xq * c;
    }
    // right-multiplying by J changes only columns p and q; Hermiticity lets
    // those be filled from the rows just computed
    for k in 0..d {
        if k == p || k == q {
            continue;
        }
        m[k * d + p] = m[p * d + k].conj();
        m[k * d + q] = m[q * d + k].conj();
    }
    m[p * d + p] = Complex64::new(app - t * g, 0.0);
    m[q * d + q] = Complex64::new(aqq + t * g, 0.0);
    m[p * d + q] = ZERO;
    m[q * d + p] = ZERO;

    if let Some(vt) = vt {
        // columns p, q of V J, stored as rows of Vᵀ
        let conj_phase = phase.conj();
        for k in 0..d {
            let vp = vt[p * d + k];
            let vq = vt[q * d + k];
            vt[p * d + k] = vp * c - conj_phase * vq * s;
            vt[q * d + k] = vp * s + conj_phase * vq * c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn random_hermitian(d: usize, seed: u64) -> ComplexMatrix {
        // small LCG keeps these tests free of the sampler module
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let x = ComplexMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()));
        (&x + &x.adjoint()).scale_real(0.5)
    }

    fn unitarity_residual(v: &ComplexMatrix) -> f64 {
        (&v.adjoint() * v).max_abs_diff(&ComplexMatrix::identity(v.rows()))
    }

    #[test]
    fn identity_spectrum() {
        let e = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
        assert!(unitarity_residual(&e.eigenbasis) < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = hermitian_eig(&x).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
        assert!(e.reconstruct().max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn pauli_y_complex_phases() {
        let y = ComplexMatrix::new(2, 2, vec![ZERO, -crate::linalg::I, crate::linalg::I, ZERO])
            .unwrap();
        let e = hermitian_eig(&y).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!(e.reconstruct().max_abs_diff(&y) < 1e-15);
    }

    #[test]
    fn random_reconstruction() {
        for (seed, d) in [(1, 8), (2, 17), (3, 40)] {
            let a = random_hermitian(d, seed);
            let e = hermitian_eig(&a).unwrap();
            assert!(unitarity_residual(&e.eigenbasis) < 1e-10);
            assert!(e.reconstruct().max_abs_diff(&a) < 1e-9 * a.max_abs());
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let only = hermitian_eigenvalues(&a).unwrap();
            for (x, y) in only.iter().zip(&e.eigenvalues) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_block() {
        let d = ComplexMatrix::from_real_diagonal(&[2.0, 2.0, -1.0]);
        let e = hermitian_eig(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 2.0, 2.0]);
        assert_eq!(e.eigenbasis[(2, 0)], ONE);
    }

    #[test]
    fn zero_matrix() {
        let e = hermitian_eig(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            hermitian_eig(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.5, 0.0]]).unwrap();
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn deterministic() {
        let a = random_hermitian(12, 9);
        assert_eq!(hermitian_eig(&a).unwrap(), hermitian_eig(&a).unwrap());
    }
}
