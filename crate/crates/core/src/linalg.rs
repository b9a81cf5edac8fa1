//! Dense linear algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Zero;

use crate::{Result, SsmError};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn complexify(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Largest singular value.
pub fn norm2(a: &RMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Frobenius norm of `a − aᵀ` relative to that of `a`.
pub fn symmetry_deviation(a: &RMat) -> f64 {
    let scale = a.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / scale
}

/// Eigenvalue bounds of the symmetric part of `a`.
pub fn symmetric_eigen_range(a: &RMat) -> (f64, f64) {
    let sym = (a + a.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().lu().try_inverse().ok_or(SsmError::SingularTransform {
        condition: f64::INFINITY,
    })
}

pub fn inverse_real(m: &RMat) -> Option<RMat> {
    m.clone().lu().try_inverse()
}

/// Eigenvalues and right eigenvectors of a real square matrix.
///
/// The complex Schur form supplies the eigenvalues; eigenvectors come from
/// back-substitution on the triangular factor and are then polished with a
/// few Newton steps on the original matrix, which matters for badly scaled
/// inputs such as stiff finite-element models. Eigenvectors are returned
/// with unit 2-norm and in the order the Schur form produced them.
pub fn eigen(a: &RMat) -> Result<(Vec<Complex64>, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let ac = complexify(a);
    let schur = nalgebra::linalg::Schur::try_new(ac.clone(), f64::EPSILON, 10_000 * n).ok_or(SsmError::EigenFailure)?;
    let (q, t) = schur.unpack();
    let anorm = ac.norm().max(f64::MIN_POSITIVE);
    let small = anorm * f64::EPSILON;

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = CVec::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::zero();
            for m in (j + 1)..=k {
                s += t[(j, m)] * y[m];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[j] = -s / d;
        }
        let mut v = &q * y;
        let nv = v.norm();
        v /= Complex64::new(nv, 0.0);
        let (lambda, v) = newton_polish(&ac, lambda, v);
        values.push(lambda);
        vectors.set_column(k, &v);
    }
    Ok((values, vectors))
}

/// Newton iteration on `(A − λI)v = 0`, `v_p = const`, from an approximate pair.
fn newton_polish(a: &CMat, lambda0: Complex64, v0: CVec) -> (Complex64, CVec) {
    let n = a.nrows();
    let p = v0.icamax();
    let anorm = a.norm();
    let residual = |lambda: Complex64, v: &CVec| -> f64 {
        let r = a * v - v * lambda;
        r.norm() / v.norm()
    };
    let mut lambda = lambda0;
    let mut v = &v0 / v0[p];
    let mut best = (residual(lambda, &v), lambda, v.clone());
    for _ in 0..3 {
        if best.0 <= 1e-15 * anorm {
            break;
        }
        let mut jac = CMat::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = a[(i, j)];
            }
            jac[(i, i)] -= lambda;
            jac[(i, n)] = -v[i];
        }
        jac[(n, p)] = Complex64::new(1.0, 0.0);
        let mut rhs = CVec::zeros(n + 1);
        let r = a * &v - &v * lambda;
        for i in 0..n {
            rhs[i] = -r[i];
        }
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        for i in 0..n {
            v[i] += step[i];
        }
        lambda += step[n];
        let res = residual(lambda, &v);
        if res < best.0 {
            best = (res, lambda, v.clone());
        } else {
            break;
        }
    }
    let (_, lambda, v) = best;
    let nv = v.norm();
    (lambda, v / Complex64::new(nv, 0.0))
}
