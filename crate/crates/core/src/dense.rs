//! Minimal dense kernels for the small subspace problems that show up in the
//! eigensolver (Rayleigh-Ritz on 2-3 vectors), quadrature construction
//! (Golub-Welsch) and local least-squares projections. Everything is
//! row-major `Vec<T>` of size `n * n`; nothing here is meant for large `n`.

use crate::scalar::Real;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns of a row-major matrix (`vecs[i * n + k]` is component `i` of
/// eigenvector `k`).
pub fn jacobi_eigh<T: Real>(a_in: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a_in.len(), n * n);
    let mut a = a_in.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    if n <= 1 {
        return (vec![if n == 1 { a[0] } else { T::zero() }; n], v);
    }

    let eps = T::epsilon();
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for p in 0..n {
            scale = scale + a[p * n + p].abs();
            for q in (p + 1)..n {
                off = off + a[p * n + q].abs();
            }
        }
        if off <= eps * (scale + T::of(1e-300)) {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= eps * (a[p * n + p].abs() + a[q * n + q].abs() + T::min_positive_value()) {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals: Vec<T> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            vecs[i * n + new_k] = v[i * n + old_k];
        }
    }
    (vals, vecs)
}

/// In-place Cholesky factorization A = L L^T (lower triangle). Fails on a
/// non-positive pivot.
pub fn cholesky<T: Real>(a: &mut [T], n: usize) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d <= T::zero() {
            return None;
        }
        let l = d.sqrt();
        a[j * n + j] = l;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l;
        }
    }
    // zero the strict upper triangle for cleanliness
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = T::zero();
        }
    }
    Some(())
}

/// Solve L y = b in place given the Cholesky factor L (lower, row-major).
pub fn forward_subst<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve L^T x = y in place given the Cholesky factor L (lower, row-major).
pub fn backward_subst_t<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve the SPD system A x = b via Cholesky; `a` is consumed as scratch.
pub fn solve_spd<T: Real>(a: &mut [T], n: usize, b: &mut [T]) -> Option<()> {
    cholesky(a, n)?;
    forward_subst(a, n, b);
    backward_subst_t(a, n, b);
    Some(())
}

/// Smallest eigenpair of the generalized symmetric pencil (A, M) with M SPD,
/// via M = L L^T and a Jacobi solve of L^-1 A L^-T.
pub fn smallest_generalized<T: Real>(a: &[T], m: &[T], n: usize) -> Option<(T, Vec<T>)> {
    let mut l = m.to_vec();
    cholesky(&mut l, n)?;
    // B = L^-1 A L^-T, built column by column
    let mut b = vec![T::zero(); n * n];
    for j in 0..n {
        let mut col: Vec<T> = (0..n).map(|i| a[i * n + j]).collect();
        forward_subst(&l, n, &mut col);
        for i in 0..n {
            b[i * n + j] = col[i];
        }
    }
    for i in 0..n {
        let mut row: Vec<T> = (0..n).map(|j| b[i * n + j]).collect();
        forward_subst(&l, n, &mut row);
        for j in 0..n {
            b[i * n + j] = row[j];
        }
    }
    // enforce symmetry lost to rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (b[i * n + j] + b[j * n + i]) * T::of(0.5);
            b[i * n + j] = s;
            b[j * n + i] = s;
        }
    }
    let (vals, vecs) = jacobi_eigh(&b, n);
    let mut x: Vec<T> = (0..n).map(|i| vecs[i * n]).collect();
    backward_subst_t(&l, n, &mut x);
    Some((vals[0], x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        // symmetric 3x3 with known spectrum: eigenvalues of
        // [[2,1,0],[1,2,1],[0,1,2]] are 2 - sqrt(2), 2, 2 + sqrt(2)
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let (vals, vecs) = jacobi_eigh(&a, 3);
        let s2 = 2.0_f64.sqrt();
        assert!((vals[0] - (2.0 - s2)).abs() < 1e-13);
        assert!((vals[1] - 2.0).abs() < 1e-13);
        assert!((vals[2] - (2.0 + s2)).abs() < 1e-13);
        // residual of the first pair
        for i in 0..3 {
            let mut r = -vals[0] * vecs[i * 3];
            for j in 0..3 {
                r += a[i * 3 + j] * vecs[j * 3];
            }
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn spd_solve_roundtrip() {
        let mut a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0];
        let mut b = vec![1.0, 2.0, 3.0];
        let a0 = a.clone();
        solve_spd(&mut a, 3, &mut b).unwrap();
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a0[i * 3 + j] * b[j]).sum();
            let rhs = [1.0, 2.0, 3.0][i];
            assert!((s - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_matches_direct() {
        // A = diag(2, 6), M = diag(2, 2) -> smallest generalized eigenvalue 1
        let a: [f64; 4] = [2.0, 0.0, 0.0, 6.0];
        let m: [f64; 4] = [2.0, 0.0, 0.0, 2.0];
        let (val, vec) = smallest_generalized(&a, &m, 2).unwrap();
        assert!((val - 1.0).abs() < 1e-14);
        assert!(vec[1].abs() < 1e-12 * vec[0].abs());
    }
}
