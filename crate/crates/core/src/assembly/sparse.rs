//! Symmetric sparse operators in CSR form. All operators on one space share
//! a single `Pattern`, so linear combinations are plain value-vector axpys.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shared sparsity pattern (full symmetric storage, sorted columns, diagonal
/// always present).
#[derive(Debug)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    /// Position of the diagonal entry of each row in `col_idx`/values.
    pub diag: Vec<usize>,
}

impl Pattern {
    /// Build from element dof lists (dof adjacency through shared elements).
    pub fn build<'a>(n: usize, element_dofs: impl Iterator<Item = &'a [u32]> + Clone) -> Arc<Self> {
        // dof -> incident element offsets
        let mut counts = vec![0usize; n + 1];
        for dofs in element_dofs.clone() {
            for &d in dofs {
                counts[d as usize + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut incidence = vec![0u32; counts[n]];
        let mut cursor = counts.clone();
        for (e, dofs) in element_dofs.clone().enumerate() {
            for &d in dofs {
                incidence[cursor[d as usize]] = e as u32;
                cursor[d as usize] += 1;
            }
        }
        let elems: Vec<&[u32]> = element_dofs.collect();

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx: Vec<u32> = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        let mut buf: Vec<u32> = Vec::with_capacity(64);
        for d in 0..n {
            buf.clear();
            buf.push(d as u32);
            for &e in &incidence[counts[d]..counts[d + 1]] {
                buf.extend_from_slice(elems[e as usize]);
            }
            buf.sort_unstable();
            buf.dedup();
            let start = col_idx.len();
            col_idx.extend_from_slice(&buf);
            let dpos = start + buf.binary_search(&(d as u32)).unwrap();
            diag.push(dpos);
            row_ptr.push(col_idx.len());
        }
        Arc::new(Pattern {
            n,
            row_ptr,
            col_idx,
            diag,
        })
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Value index of entry (row, col), if present.
    pub fn find(&self, row: usize, col: u32) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricCsr<T> {
    pub pattern: Arc<Pattern>,
    pub vals: Vec<T>,
}

impl<T: Real> SymmetricCsr<T> {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let nnz = pattern.nnz();
        SymmetricCsr {
            pattern,
            vals: vec![T::zero(); nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn entry(&self, row: usize, col: usize) -> T {
        self.pattern
            .find(row, col as u32)
            .map(|k| self.vals[k])
            .unwrap_or_else(T::zero)
    }

    pub fn diag(&self) -> Vec<T> {
        self.pattern.diag.iter().map(|&k| self.vals[k]).collect()
    }

    /// y = A x (parallel over rows; per-row accumulation is sequential, so
    /// the result is bitwise deterministic for any thread count).
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        let p = &self.pattern;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = T::zero();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.vals[k] * x[p.col_idx[k] as usize];
            }
            *yi = s;
        });
    }

    pub fn matvec_alloc(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// self + s * other (identical patterns).
    pub fn add_scaled(&self, s: T, other: &SymmetricCsr<T>) -> SymmetricCsr<T> {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "pattern mismatch");
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(&a, &b)| a + s * b)
            .collect();
        SymmetricCsr {
            pattern: self.pattern.clone(),
            vals,
        }
    }

    /// Symmetric Gauss-Seidel application z = (D+U)^-1 D (D+L)^-1 r on the
    /// free dofs (masked rows stay zero).
    pub fn sgs_apply(&self, r: &[T], z: &mut [T], free: &[bool]) {
        let p = &self.pattern;
        let n = p.n;
        z.iter_mut().for_each(|v| *v = T::zero());
        // forward sweep: (D+L) z = r
        for i in 0..n {
            if !free[i] {
                continue;
            }
            let mut s = r[i];
            let mut d = T::zero();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k] as usize;
                if j < i {
                    s -= self.vals[k] * z[j];
                } else if j == i {
                    d = self.vals[k];
                }
            }
            z[i] = s / d;
        }
        // scale by D
        for i in 0..n {
            if free[i] {
                z[i] *= self.vals[p.diag[i]];
            }
        }
        // backward sweep: (D+U) z = (scaled)
        for i in (0..n).rev() {
            if !free[i] {
                continue;
            }
            let mut s = z[i];
            let mut d = T::zero();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k] as usize;
                if j > i {
                    s -= self.vals[k] * z[j];
                } else if j == i {
                    d = self.vals[k];
                }
            }
            z[i] = s / d;
        }
    }

    /// Dense row-major copy (small problems and oracles only).
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                out[i * n + self.pattern.col_idx[k] as usize] = self.vals[k];
            }
        }
        out
    }

    /// Build from a dense symmetric matrix (tests and tiny systems).
    pub fn from_dense(n: usize, dense: &[T]) -> Self {
        assert_eq!(dense.len(), n * n);
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut diag = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if i == j || v != T::zero() {
                    if i == j {
                        diag.push(col_idx.len());
                    }
                    col_idx.push(j as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SymmetricCsr {
            pattern: Arc::new(Pattern {
                n,
                row_ptr,
                col_idx,
                diag,
            }),
            vals,
        }
    }
}

/// Preconditioned conjugate gradients on the free dofs. The input/output
/// vector must be zero on masked dofs; `b` is the (already reduced) right
/// hand side. Returns the iteration count.
pub fn pcg<T: Real>(
    a: &SymmetricCsr<T>,
    b: &[T],
    x: &mut [T],
    free: &[bool],
    precond: Option<&SymmetricCsr<T>>,
    rel_tol: T,
    max_iter: usize,
) -> Result<usize> {
    let n = a.n();
    let mask = |v: &mut [T]| {
        for i in 0..n {
            if !free[i] {
                v[i] = T::zero();
            }
        }
    };
    let dotp = |u: &[T], v: &[T]| -> T { u.iter().zip(v).map(|(&a, &b)| a * b).sum() };

    let mut r = vec![T::zero(); n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    mask(&mut r);
    let bnorm = dotp(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(0);
    }
    let mut z = vec![T::zero(); n];
    let apply_precond = |r: &[T], z: &mut [T]| match precond {
        Some(k) => k.sgs_apply(r, z, free),
        None => z.copy_from_slice(r),
    };
    apply_precond(&r, &mut z);
    mask(&mut z);
    let mut p = z.clone();
    let mut rz = dotp(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 0..max_iter {
        if dotp(&r, &r).sqrt() <= rel_tol * bnorm {
            return Ok(it);
        }
        a.matvec(&p, &mut ap);
        mask(&mut ap);
        let alpha = rz / dotp(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        apply_precond(&r, &mut z);
        mask(&mut z);
        let rz_new = dotp(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = (dotp(&r, &r).sqrt() / bnorm).to_f64_lossy();
    if res <= rel_tol.to_f64_lossy() * 10.0 {
        // accept a near miss rather than abort a long outer iteration
        return Ok(max_iter);
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SymmetricCsr<f64> {
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 2.0;
            if i > 0 {
                dense[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                dense[i * n + i + 1] = -1.0;
            }
        }
        SymmetricCsr::from_dense(n, &dense)
    }

    #[test]
    fn matvec_matches_dense() {
        let a = laplace_1d(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let y = a.matvec_alloc(&x);
        let d = a.to_dense();
        for i in 0..7 {
            let want: f64 = (0..7).map(|j| d[i * 7 + j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pcg_solves_spd_system() {
        let a = laplace_1d(40);
        let free = vec![true; 40];
        let xstar: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let b = a.matvec_alloc(&xstar);
        for precond in [false, true] {
            let mut x = vec![0.0; 40];
            let p = precond.then(|| a.clone());
            pcg(&a, &b, &mut x, &free, p.as_ref(), 1e-12, 500).unwrap();
            for i in 0..40 {
                assert!((x[i] - xstar[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pcg_respects_mask() {
        let a = laplace_1d(10);
        let mut free = vec![true; 10];
        free[0] = false;
        free[9] = false;
        let mut b = vec![1.0; 10];
        b[0] = 0.0;
        b[9] = 0.0;
        let mut x = vec![0.0; 10];
        pcg(&a, &b, &mut x, &free, Some(&a), 1e-12, 200).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[9], 0.0);
        // residual on free dofs vanishes
        let r = a.matvec_alloc(&x);
        for i in 1..9 {
            assert!((r[i] - 1.0).abs() < 1e-9);
        }
    }
}
