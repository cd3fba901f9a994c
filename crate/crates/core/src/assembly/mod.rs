//! Assembly of the discrete operators: stiffness, (weighted) mass, the
//! linearized Hamiltonian, load vectors and the Hartree potential.

mod hartree;
mod sparse;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fespace::{FESpace, FEFunction, MAX_BASIS};
use crate::geom::Point3;
use crate::model::ProblemModel;
use crate::scalar::Real;

pub use hartree::{direct_convolution, hartree_potential, HartreeField};
pub use sparse::{pcg, Pattern, SymmetricCsr};

/// Per-element, per-quadrature-point scalar samples on a space's volume rule.
#[derive(Debug, Clone)]
pub struct QuadField<T> {
    pub n_elems: usize,
    pub n_qp: usize,
    pub data: Vec<T>,
}

impl<T: Real> QuadField<T> {
    pub fn zeros(space: &FESpace<T>) -> Self {
        let n_elems = space.mesh.n_elements();
        let n_qp = space.volume_rule.len();
        QuadField {
            n_elems,
            n_qp,
            data: vec![T::zero(); n_elems * n_qp],
        }
    }

    #[inline]
    pub fn at(&self, elem: usize, q: usize) -> T {
        self.data[elem * self.n_qp + q]
    }

    #[inline]
    pub fn set(&mut self, elem: usize, q: usize, v: T) {
        self.data[elem * self.n_qp + q] = v;
    }

    /// Sample a coordinate field at all quadrature points.
    pub fn from_fn(space: &FESpace<T>, f: impl Fn(Point3<T>) -> T + Sync + Send) -> Self {
        let n_qp = space.volume_rule.len();
        let n_elems = space.mesh.n_elements();
        let f = &f;
        let data: Vec<T> = (0..n_elems)
            .into_par_iter()
            .flat_map_iter(move |e| {
                let geo = space.mesh.element_geometry(e);
                space
                    .volume_rule
                    .points
                    .iter()
                    .map(move |&b| f(geo.point_from_bary(b)))
                    .collect::<Vec<_>>()
            })
            .collect();
        QuadField {
            n_elems,
            n_qp,
            data,
        }
    }

    /// Values of a finite element function at quadrature points.
    pub fn from_function(u: &FEFunction<T>) -> Self {
        let space = &u.space;
        let n_qp = space.volume_rule.len();
        let n_elems = space.mesh.n_elements();
        let data: Vec<T> = (0..n_elems)
            .into_par_iter()
            .flat_map_iter(|e| {
                space
                    .volume_rule
                    .points
                    .iter()
                    .map(move |&b| u.value(e, b))
                    .collect::<Vec<_>>()
            })
            .collect();
        QuadField {
            n_elems,
            n_qp,
            data,
        }
    }

    /// Density u^2 at quadrature points.
    pub fn density_of(u: &FEFunction<T>) -> Self {
        let mut f = Self::from_function(u);
        f.data.iter_mut().for_each(|v| *v = *v * *v);
        f
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        QuadField {
            n_elems: self.n_elems,
            n_qp: self.n_qp,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// (1 - m) * self + m * other.
    pub fn mixed(&self, other: &QuadField<T>, m: T) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        let one_m = T::one() - m;
        QuadField {
            n_elems: self.n_elems,
            n_qp: self.n_qp,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| one_m * a + m * b)
                .collect(),
        }
    }

    /// L2(Omega) norm of the sampled field.
    pub fn l2_norm(&self, space: &FESpace<T>) -> T {
        let rule = &space.volume_rule;
        let mut s = T::zero();
        for e in 0..self.n_elems {
            let vol = space.mesh.element_geometry(e).volume;
            for q in 0..self.n_qp {
                let v = self.at(e, q);
                s += rule.weights[q] * vol * v * v;
            }
        }
        s.sqrt()
    }

    pub fn l2_distance(&self, other: &QuadField<T>, space: &FESpace<T>) -> T {
        let rule = &space.volume_rule;
        let mut s = T::zero();
        for e in 0..self.n_elems {
            let vol = space.mesh.element_geometry(e).volume;
            for q in 0..self.n_qp {
                let d = self.at(e, q) - other.at(e, q);
                s += rule.weights[q] * vol * d * d;
            }
        }
        s.sqrt()
    }

    /// Quadrature integral of the field.
    pub fn integral(&self, space: &FESpace<T>) -> T {
        let rule = &space.volume_rule;
        let mut s = T::zero();
        for e in 0..self.n_elems {
            let vol = space.mesh.element_geometry(e).volume;
            for q in 0..self.n_qp {
                s += rule.weights[q] * vol * self.at(e, q);
            }
        }
        s
    }

    pub fn min(&self) -> T {
        self.data.iter().cloned().fold(T::infinity(), T::min)
    }
}

/// Dirichlet treatment during scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Elim {
    /// Keep every entry (full S^h operator).
    None,
    /// Drop boundary rows/columns, unit diagonal (invertible block form).
    DirichletIdentity,
    /// Drop boundary rows/columns, zero diagonal (additive weight terms).
    DirichletZero,
}

pub(crate) fn pattern_of<T: Real>(space: &FESpace<T>) -> Arc<Pattern> {
    space
        .pattern
        .get_or_init(|| {
            let n_elems = space.mesh.n_elements();
            Pattern::build(
                space.n_dofs,
                (0..n_elems).map(|e| space.element_dofs(e)),
            )
        })
        .clone()
}

/// Assemble a symmetric operator from per-element local matrices. Local
/// matrices are computed in parallel chunkwise, then scattered sequentially
/// in element order: the accumulation order is fixed, so results are
/// bitwise reproducible for any thread count.
pub(crate) fn assemble_operator<T: Real>(
    space: &FESpace<T>,
    elim: Elim,
    local: impl Fn(usize, &mut [T]) + Sync,
) -> SymmetricCsr<T> {
    let pattern = pattern_of(space);
    let mut op = SymmetricCsr::zeros(pattern.clone());
    let k = space.dofs_per_elem();
    let n_elems = space.mesh.n_elements();
    const CHUNK: usize = 2048;

    let mut buf = vec![T::zero(); CHUNK * k * k];
    let mut start = 0;
    while start < n_elems {
        let len = CHUNK.min(n_elems - start);
        buf[..len * k * k]
            .par_chunks_mut(k * k)
            .enumerate()
            .for_each(|(off, lm)| {
                lm.iter_mut().for_each(|v| *v = T::zero());
                local(start + off, lm);
            });
        for off in 0..len {
            let e = start + off;
            let dofs = space.element_dofs(e);
            let lm = &buf[off * k * k..(off + 1) * k * k];
            for i in 0..k {
                let gi = dofs[i] as usize;
                if elim != Elim::None && !space.free[gi] {
                    continue;
                }
                for j in 0..k {
                    let gj = dofs[j];
                    if elim != Elim::None && !space.free[gj as usize] {
                        continue;
                    }
                    let slot = pattern.find(gi, gj).expect("dof pair in pattern");
                    op.vals[slot] += lm[i * k + j];
                }
            }
        }
        start += len;
    }
    match elim {
        Elim::DirichletIdentity => {
            for d in 0..space.n_dofs {
                if !space.free[d] {
                    op.vals[pattern.diag[d]] = T::one();
                }
            }
        }
        Elim::DirichletZero | Elim::None => {}
    }
    op
}

/// Stiffness A_ij = int grad phi_i . grad phi_j with Dirichlet elimination
/// (boundary rows/columns dropped, unit diagonal).
pub fn assemble_stiffness<T: Real>(space: &FESpace<T>) -> SymmetricCsr<T> {
    assemble_stiffness_impl(space, Elim::DirichletIdentity)
}

/// Stiffness over the full space S^h (no boundary treatment); used by the
/// Hartree Poisson solve where boundary values are inhomogeneous.
pub(crate) fn assemble_stiffness_full<T: Real>(space: &FESpace<T>) -> SymmetricCsr<T> {
    assemble_stiffness_impl(space, Elim::None)
}

fn assemble_stiffness_impl<T: Real>(space: &FESpace<T>, elim: Elim) -> SymmetricCsr<T> {
    let k = space.dofs_per_elem();
    let rule = space.volume_rule.clone();
    assemble_operator(space, elim, |e, lm| {
        let geo = space.mesh.element_geometry(e);
        for (q, &b) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.volume;
            let grads = space.basis_gradients(b, &geo);
            for i in 0..k {
                lm[i * k + i] += w * crate::geom::dot(grads[i], grads[i]);
                for j in (i + 1)..k {
                    let c = w * crate::geom::dot(grads[i], grads[j]);
                    lm[i * k + j] += c;
                    lm[j * k + i] += c;
                }
            }
        }
    })
}

/// Mass M_ij = int w phi_i phi_j over the full space (no boundary
/// elimination; weighted and unweighted behave identically).
pub fn assemble_mass<T: Real>(space: &FESpace<T>, weight: Option<&QuadField<T>>) -> SymmetricCsr<T> {
    assemble_mass_impl(space, weight, Elim::None)
}

pub(crate) fn assemble_weighted_mass_eliminated<T: Real>(
    space: &FESpace<T>,
    weight: &QuadField<T>,
) -> SymmetricCsr<T> {
    assemble_mass_impl(space, Some(weight), Elim::DirichletZero)
}

fn assemble_mass_impl<T: Real>(
    space: &FESpace<T>,
    weight: Option<&QuadField<T>>,
    elim: Elim,
) -> SymmetricCsr<T> {
    if let Some(w) = weight {
        assert_eq!(w.n_elems, space.mesh.n_elements());
        assert_eq!(w.n_qp, space.volume_rule.len());
    }
    let k = space.dofs_per_elem();
    let rule = space.volume_rule.clone();
    assemble_operator(space, elim, |e, lm| {
        let geo = space.mesh.element_geometry(e);
        let mut vals = [[T::zero(); MAX_BASIS]; 64];
        debug_assert!(rule.len() <= 64);
        for (q, &b) in rule.points.iter().enumerate() {
            vals[q] = space.basis_values(b);
        }
        // accumulate each unordered pair once so symmetry is bitwise exact
        for q in 0..rule.len() {
            let mut w = rule.weights[q] * geo.volume;
            if let Some(field) = weight {
                w *= field.at(e, q);
            }
            let v = &vals[q];
            for i in 0..k {
                lm[i * k + i] += w * v[i] * v[i];
                for j in (i + 1)..k {
                    let c = w * v[i] * v[j];
                    lm[i * k + j] += c;
                    lm[j * k + i] += c;
                }
            }
        }
    })
}

/// Load vector b_i = int f phi_i for a sampled field.
pub fn assemble_load<T: Real>(space: &FESpace<T>, f: &QuadField<T>) -> Vec<T> {
    let k = space.dofs_per_elem();
    let rule = &space.volume_rule;
    let n_elems = space.mesh.n_elements();
    let locals: Vec<Vec<T>> = (0..n_elems)
        .into_par_iter()
        .map(|e| {
            let geo = space.mesh.element_geometry(e);
            let mut lv = vec![T::zero(); k];
            for (q, &b) in rule.points.iter().enumerate() {
                let w = rule.weights[q] * geo.volume * f.at(e, q);
                let vals = space.basis_values(b);
                for i in 0..k {
                    lv[i] += w * vals[i];
                }
            }
            lv
        })
        .collect();
    let mut out = vec![T::zero(); space.n_dofs];
    for (e, lv) in locals.iter().enumerate() {
        for (i, &d) in space.element_dofs(e).iter().enumerate() {
            out[d as usize] += lv[i];
        }
    }
    out
}

/// Linearized Hamiltonian at a fixed density: H = alpha K + M[V + N1(rho) +
/// rho^{q-1} phi], with Dirichlet elimination and unit boundary diagonal.
/// Returns the operator together with the Hartree field actually used (so
/// the caller can reuse exactly the same phi downstream).
pub fn assemble_hamiltonian<T: Real>(
    model: &ProblemModel<T>,
    space: &Arc<FESpace<T>>,
    rho: &QuadField<T>,
) -> Result<(SymmetricCsr<T>, Option<HartreeField<T>>)> {
    if rho.min() < T::of(-1e-12) {
        return Err(Error::Assembly(format!(
            "density has negative entries (min {:?})",
            rho.min().to_f64_lossy()
        )));
    }
    let hartree = match &model.nonlocal {
        Some(spec) => {
            let rho_q = rho.map(|r| r.max(T::zero()).powf(spec.q));
            Some(hartree_potential(space, &rho_q, spec)?)
        }
        None => None,
    };
    let v_field = QuadField::from_fn(space, |p| model.potential.eval(p));
    let mut weight = QuadField {
        n_elems: rho.n_elems,
        n_qp: rho.n_qp,
        data: vec![T::zero(); rho.data.len()],
    };
    let q_exp = model.nonlocal.as_ref().map(|s| s.q);
    for e in 0..rho.n_elems {
        for q in 0..rho.n_qp {
            let r = rho.at(e, q).max(T::zero());
            let mut w = v_field.at(e, q) + model.local.eval(r);
            if let (Some(h), Some(qe)) = (&hartree, q_exp) {
                w += r.powf(qe - T::one()) * h.at_quad.at(e, q);
            }
            weight.set(e, q, w);
        }
    }
    let k = assemble_stiffness(space);
    let w = assemble_weighted_mass_eliminated(space, &weight);
    let mut h = w;
    for (hv, kv) in h.vals.iter_mut().zip(&k.vals) {
        *hv += model.alpha * *kv;
    }
    Ok((h, hartree))
}
