//! Smallest generalized eigenpair of a symmetric pencil (A, M) by LOBPCG
//! (block size 1) with a shifted symmetric Gauss-Seidel preconditioner,
//! falling back to a dense solve for very small free-dof counts.

use crate::assembly::SymmetricCsr;
use crate::dense::{jacobi_eigh, smallest_generalized};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric linear operator (sparse matrix or matrix-free composite).
pub trait LinOp<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

impl<T: Real> LinOp<T> for SymmetricCsr<T> {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y);
    }
}

pub(crate) struct EigOptions<'a, T: Real> {
    /// Convergence: ||A x - theta M x||_2 <= tol * |theta| for the
    /// M-normalized iterate.
    pub tol: T,
    pub max_iter: usize,
    /// Interior-dof mask; `None` means all dofs are free.
    pub mask: Option<&'a [bool]>,
    pub guess: Option<&'a [T]>,
    /// Projector applied after every operator/preconditioner application
    /// (keeps iterates in a linear constraint subspace).
    pub constraint: Option<&'a (dyn Fn(&mut [T]) + Sync)>,
    /// Sparse part of A used to build the shifted SGS preconditioner
    /// (`None` disables preconditioning).
    pub precond_sparse: Option<&'a SymmetricCsr<T>>,
    /// Return the best iterate instead of failing when the residual stalls
    /// at its attainable floor (used by the SCF driver, which re-verifies
    /// convergence in its own scaled norm).
    pub stall_ok: bool,
}

pub(crate) fn lobpcg_smallest<T: Real>(
    a: &dyn LinOp<T>,
    m: &SymmetricCsr<T>,
    opts: EigOptions<'_, T>,
) -> Result<(T, Vec<T>)> {
    let n = a.dim();
    assert_eq!(m.n(), n);
    let all_free;
    let mask: &[bool] = match opts.mask {
        Some(f) => f,
        None => {
            all_free = vec![true; n];
            &all_free
        }
    };
    let n_free = mask.iter().filter(|&&f| f).count();
    if n_free == 0 {
        return Err(Error::Space("eigenproblem has no free dofs".into()));
    }

    let apply_mask = |v: &mut [T]| {
        for i in 0..n {
            if !mask[i] {
                v[i] = T::zero();
            }
        }
    };
    let project = |v: &mut [T]| {
        apply_mask(v);
        if let Some(p) = opts.constraint {
            p(v);
            apply_mask(v);
        }
    };
    let dot = |a: &[T], b: &[T]| -> T { a.iter().zip(b).map(|(&x, &y)| x * y).sum() };

    // dense fallback for tiny problems (no constraint path needs it)
    if n_free <= 12 && opts.constraint.is_none() {
        return dense_smallest(a, m, mask, n_free);
    }

    let mut x = match opts.guess {
        Some(g) => g.to_vec(),
        None => vec![T::one(); n],
    };
    project(&mut x);
    let mut mx = m.matvec_alloc(&x);
    let mut xn = dot(&x, &mx);
    if !(xn > T::zero()) {
        x = vec![T::one(); n];
        project(&mut x);
        mx = m.matvec_alloc(&x);
        xn = dot(&x, &mx);
        if !(xn > T::zero()) {
            return Err(Error::Space("degenerate start vector".into()));
        }
    }
    let s = xn.sqrt().recip();
    x.iter_mut().for_each(|v| *v *= s);
    mx.iter_mut().for_each(|v| *v *= s);

    let mut ax = vec![T::zero(); n];
    a.apply(&x, &mut ax);
    project(&mut ax);
    let mut theta = dot(&x, &ax);

    // shifted SGS preconditioner K = A + shift M, rebuilt when theta sinks
    let mut shift = T::zero();
    let mut precond: Option<SymmetricCsr<T>> = None;
    let mut jacobi_diag: Option<Vec<T>> = None;

    let mut p: Option<(Vec<T>, Vec<T>, Vec<T>)> = None; // (p, Ap, Mp)
    let mut best = (theta, x.clone(), T::infinity());
    let mut stall = 0usize;

    for it in 0..opts.max_iter {
        let mut r: Vec<T> = (0..n).map(|i| ax[i] - theta * mx[i]).collect();
        project(&mut r);
        let res = dot(&r, &r).sqrt();
        if res < best.2 * T::of(0.99) {
            stall = 0;
        } else {
            stall += 1;
        }
        if res < best.2 {
            best = (theta, x.clone(), res);
        }
        if res <= opts.tol * (theta.abs() + T::of(1e-300)) {
            return Ok((theta, x));
        }
        if opts.stall_ok && stall > 300 {
            return Ok((best.0, best.1));
        }

        if let Some(ap) = opts.precond_sparse {
            let desired = if theta >= T::zero() {
                T::zero()
            } else {
                -theta + T::one()
            };
            if (precond.is_none() && jacobi_diag.is_none()) || desired > shift {
                shift = desired;
                let shared_pattern = std::sync::Arc::ptr_eq(&ap.pattern, &m.pattern);
                if shared_pattern {
                    let k = if shift > T::zero() {
                        ap.add_scaled(shift, m)
                    } else {
                        ap.clone()
                    };
                    let dmin = k
                        .diag()
                        .iter()
                        .zip(mask)
                        .filter(|(_, &f)| f)
                        .map(|(&d, _)| d)
                        .fold(T::infinity(), T::min);
                    if dmin > T::zero() {
                        precond = Some(k);
                        jacobi_diag = None;
                    } else {
                        jacobi_diag = Some(
                            k.diag().iter().map(|d| d.abs().max(T::of(1e-300))).collect(),
                        );
                        precond = None;
                    }
                } else {
                    // patterns differ (arbitrary pencil): Jacobi on the
                    // combined diagonal
                    let da = ap.diag();
                    let dm = m.diag();
                    jacobi_diag = Some(
                        da.iter()
                            .zip(&dm)
                            .map(|(&a, &b)| (a + shift * b).abs().max(T::of(1e-300)))
                            .collect(),
                    );
                    precond = None;
                }
            }
        }

        let mut w = vec![T::zero(); n];
        if let Some(k) = &precond {
            k.sgs_apply(&r, &mut w, mask);
        } else if let Some(d) = &jacobi_diag {
            for i in 0..n {
                w[i] = r[i] / d[i];
            }
        } else {
            w.copy_from_slice(&r);
        }
        project(&mut w);

        // M-orthonormalize w against x
        let mut mw = m.matvec_alloc(&w);
        let c = dot(&x, &mw);
        for i in 0..n {
            w[i] -= c * x[i];
        }
        project(&mut w);
        mw = m.matvec_alloc(&w);
        let wn = dot(&w, &mw);
        if !(wn > T::of(1e-300)) {
            // stagnation: residual has no new component
            return Ok((theta, x));
        }
        let s = wn.sqrt().recip();
        w.iter_mut().for_each(|v| *v *= s);
        mw.iter_mut().for_each(|v| *v *= s);
        let mut aw = vec![T::zero(); n];
        a.apply(&w, &mut aw);
        project(&mut aw);

        // optional third direction: previous update, orthonormalized
        let mut basis: Vec<(&[T], &[T], &[T])> = Vec::with_capacity(3);
        let (mut pv, mut apv, mut mpv);
        let use_p = if let Some((pp, app, mpp)) = &p {
            pv = pp.clone();
            apv = app.clone();
            mpv = mpp.clone();
            let cx = dot(&x, &mpv);
            let cw = dot(&w, &mpv);
            for i in 0..n {
                pv[i] -= cx * x[i] + cw * w[i];
                apv[i] -= cx * ax[i] + cw * aw[i];
                mpv[i] -= cx * mx[i] + cw * mw[i];
            }
            let pn = dot(&pv, &mpv);
            if pn > T::of(1e-24) {
                let s = pn.sqrt().recip();
                pv.iter_mut().for_each(|v| *v *= s);
                apv.iter_mut().for_each(|v| *v *= s);
                mpv.iter_mut().for_each(|v| *v *= s);
                true
            } else {
                false
            }
        } else {
            pv = Vec::new();
            apv = Vec::new();
            mpv = Vec::new();
            false
        };
        basis.push((&x, &ax, &mx));
        basis.push((&w, &aw, &mw));
        if use_p {
            basis.push((&pv, &apv, &mpv));
        }

        // Rayleigh-Ritz on the (M-orthonormal) basis
        let k = basis.len();
        let mut gram_a = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                gram_a[i * k + j] = dot(basis[i].0, basis[j].1);
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let s = (gram_a[i * k + j] + gram_a[j * k + i]) * T::of(0.5);
                gram_a[i * k + j] = s;
                gram_a[j * k + i] = s;
            }
        }
        let (vals, vecs) = jacobi_eigh(&gram_a, k);
        let c: Vec<T> = (0..k).map(|i| vecs[i * k]).collect();
        theta = vals[0];

        let mut xn = vec![T::zero(); n];
        let mut axn = vec![T::zero(); n];
        let mut mxn = vec![T::zero(); n];
        let mut pn = vec![T::zero(); n];
        let mut apn = vec![T::zero(); n];
        let mut mpn = vec![T::zero(); n];
        for (ci, (b, ab, mb)) in c.iter().zip(&basis) {
            for i in 0..n {
                xn[i] += *ci * b[i];
                axn[i] += *ci * ab[i];
                mxn[i] += *ci * mb[i];
            }
        }
        for (ci, (b, ab, mb)) in c.iter().zip(&basis).skip(1) {
            for i in 0..n {
                pn[i] += *ci * b[i];
                apn[i] += *ci * ab[i];
                mpn[i] += *ci * mb[i];
            }
        }
        // renormalize x in M
        let nx = dot(&xn, &mxn);
        if !(nx > T::zero()) {
            return Err(Error::EigNotConverged {
                iterations: it,
                residual: best.2.to_f64_lossy(),
                lambda: best.0.to_f64_lossy(),
            });
        }
        let s = nx.sqrt().recip();
        xn.iter_mut().for_each(|v| *v *= s);
        axn.iter_mut().for_each(|v| *v *= s);
        mxn.iter_mut().for_each(|v| *v *= s);
        x = xn;
        ax = axn;
        mx = mxn;
        p = Some((pn, apn, mpn));
    }

    Err(Error::EigNotConverged {
        iterations: opts.max_iter,
        residual: best.2.to_f64_lossy(),
        lambda: best.0.to_f64_lossy(),
    })
}

fn dense_smallest<T: Real>(
    a: &dyn LinOp<T>,
    m: &SymmetricCsr<T>,
    mask: &[bool],
    n_free: usize,
) -> Result<(T, Vec<T>)> {
    let n = a.dim();
    let free_idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let mut ad = vec![T::zero(); n_free * n_free];
    let mut md = vec![T::zero(); n_free * n_free];
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); n];
    for (jc, &j) in free_idx.iter().enumerate() {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        a.apply(&e, &mut col);
        for (ic, &i) in free_idx.iter().enumerate() {
            ad[ic * n_free + jc] = col[i];
        }
        m.matvec(&e, &mut col);
        for (ic, &i) in free_idx.iter().enumerate() {
            md[ic * n_free + jc] = col[i];
        }
    }
    let (val, vec_small) = smallest_generalized(&ad, &md, n_free)
        .ok_or_else(|| Error::Space("mass matrix not positive definite".into()))?;
    let mut x = vec![T::zero(); n];
    for (ic, &i) in free_idx.iter().enumerate() {
        x[i] = vec_small[ic];
    }
    // M-normalize
    let mx = m.matvec_alloc(&x);
    let s = x
        .iter()
        .zip(&mx)
        .map(|(&a, &b)| a * b)
        .sum::<T>()
        .sqrt()
        .recip();
    x.iter_mut().for_each(|v| *v *= s);
    Ok((val, x))
}

/// Smallest eigenpair of the pencil (A, M): returns (theta, w) with
/// ||A w - theta M w|| <= tol |theta| and w normalized to w' M w = 1.
pub fn smallest_eigenpair<T: Real>(
    a: &SymmetricCsr<T>,
    m: &SymmetricCsr<T>,
    tol: T,
    guess: Option<&[T]>,
) -> Result<(T, Vec<T>)> {
    lobpcg_smallest(
        a,
        m,
        EigOptions {
            tol,
            max_iter: 20_000,
            mask: None,
            guess,
            constraint: None,
            precond_sparse: Some(a),
            stall_ok: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencils() {
        let a = SymmetricCsr::from_dense(3, &[1.0f64, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let id = SymmetricCsr::from_dense(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (val, vec) = smallest_eigenpair(&a, &id, 1e-12, None).unwrap();
        assert!((val - 1.0).abs() < 1e-10);
        assert!(vec[0].abs() > 0.99 && vec[1].abs() < 1e-6 && vec[2].abs() < 1e-6);

        let a = SymmetricCsr::from_dense(2, &[2.0f64, 0.0, 0.0, 6.0]);
        let m = SymmetricCsr::from_dense(2, &[2.0, 0.0, 0.0, 2.0]);
        let (val, _) = smallest_eigenpair(&a, &m, 1e-12, None).unwrap();
        assert!((val - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_pencil_matches_dense_oracle() {
        // deterministic pseudo-random SPD pencil, 50x50
        let n = 50;
        let mut state = 12345u64;
        let mut rnd = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (2f64.powi(31)) - 0.5
        };
        let mut a = vec![0.0f64; n * n];
        let mut m = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rnd();
                a[i * n + j] = v;
                a[j * n + i] = v;
                let w = 0.3 * rnd();
                m[i * n + j] = w;
                m[j * n + i] = w;
            }
            a[i * n + i] += 2.0 + i as f64 * 0.1;
            m[i * n + i] += 5.0;
        }
        let (want, _) = smallest_generalized(&a, &m, n).unwrap();
        let asp = SymmetricCsr::from_dense(n, &a);
        let msp = SymmetricCsr::from_dense(n, &m);
        let (got, vec) = smallest_eigenpair(&asp, &msp, 1e-10, None).unwrap();
        assert!(
            (got - want).abs() < 1e-8 * want.abs().max(1.0),
            "lobpcg {got} vs dense {want}"
        );
        // normalization contract
        let mv = msp.matvec_alloc(&vec);
        let norm: f64 = vec.iter().zip(&mv).map(|(a, b)| a * b).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvergence_reports_best_iterate() {
        let a = SymmetricCsr::from_dense(
            30,
            &{
                let mut d = vec![0.0f64; 900];
                for i in 0..30 {
                    d[i * 30 + i] = 1.0 + i as f64;
                    if i > 0 {
                        d[i * 30 + i - 1] = -0.49;
                        d[(i - 1) * 30 + i] = -0.49;
                    }
                }
                d
            },
        );
        let id = {
            let mut d = vec![0.0f64; 900];
            for i in 0..30 {
                d[i * 30 + i] = 1.0;
            }
            SymmetricCsr::from_dense(30, &d)
        };
        let err = lobpcg_smallest(
            &a,
            &id,
            EigOptions {
                tol: 1e-14,
                max_iter: 1,
                mask: None,
                guess: None,
                constraint: None,
                precond_sparse: None,
                stall_ok: false,
            },
        )
        .unwrap_err();
        match err {
            Error::EigNotConverged { residual, .. } => assert!(residual.is_finite()),
            e => panic!("unexpected error {e}"),
        }
    }
}
