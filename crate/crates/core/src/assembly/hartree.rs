//! Hartree potential phi(x) = int rho_q(y) / |x - y| dy, either by a Poisson
//! solve with monopole boundary data or by direct double quadrature.

use rayon::prelude::*;

use super::{assemble_load, assemble_stiffness_full, pcg, QuadField};
use crate::error::{Error, Result};
use crate::fespace::{FESpace, FEFunction};
use crate::geom::{self, Point3};
use crate::model::{HartreeStrategy, Kernel, NonlocalSpec};
use crate::scalar::Real;

#[derive(Debug, Clone)]
enum Repr<T: Real> {
    Fe(FEFunction<T>),
    Direct(DirectSources<T>),
}

#[derive(Debug, Clone)]
struct DirectSources<T> {
    positions: Vec<Point3<T>>,
    charges: Vec<T>,
}

/// The computed potential: samples on the owning space's volume rule plus a
/// representation that can be evaluated on refinements.
#[derive(Debug, Clone)]
pub struct HartreeField<T: Real> {
    pub at_quad: QuadField<T>,
    repr: Repr<T>,
}

impl<T: Real> HartreeField<T> {
    /// Evaluate on the volume quadrature points of a space over a refinement
    /// of the field's own mesh.
    pub fn eval_on_refinement(&self, fine: &FESpace<T>) -> Result<QuadField<T>> {
        match &self.repr {
            Repr::Fe(phi) => {
                let coarse_mesh = &phi.space.mesh;
                if !fine.mesh.is_refinement_of(coarse_mesh) {
                    return Err(Error::Assembly(
                        "Hartree field evaluation requires nested meshes".into(),
                    ));
                }
                let n_qp = fine.volume_rule.len();
                let n_elems = fine.mesh.n_elements();
                let mut out = QuadField {
                    n_elems,
                    n_qp,
                    data: vec![T::zero(); n_elems * n_qp],
                };
                for e in 0..n_elems {
                    let cl = fine.mesh.ancestor_leaf_in(coarse_mesh, e)?;
                    let cgeo = coarse_mesh.element_geometry(cl);
                    let fgeo = fine.mesh.element_geometry(e);
                    for (q, &b) in fine.volume_rule.points.iter().enumerate() {
                        let x = fgeo.point_from_bary(b);
                        out.set(e, q, phi.value(cl, cgeo.bary_from_point(x)));
                    }
                }
                Ok(out)
            }
            Repr::Direct(src) => {
                let n_qp = fine.volume_rule.len();
                let n_elems = fine.mesh.n_elements();
                let data: Vec<T> = (0..n_elems)
                    .into_par_iter()
                    .flat_map_iter(|e| {
                        let geo = fine.mesh.element_geometry(e);
                        fine.volume_rule
                            .points
                            .iter()
                            .map(|&b| {
                                let x = geo.point_from_bary(b);
                                let mut s = T::zero();
                                for (p, &c) in src.positions.iter().zip(&src.charges) {
                                    let d = geom::dist(x, *p);
                                    if d > T::zero() {
                                        s += c / d;
                                    }
                                }
                                s
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                Ok(QuadField {
                    n_elems,
                    n_qp,
                    data,
                })
            }
        }
    }

    /// Point evaluation away from source points (far-field checks).
    pub fn eval_at(&self, x: Point3<T>) -> Result<T> {
        match &self.repr {
            Repr::Direct(src) => {
                let mut s = T::zero();
                for (p, &c) in src.positions.iter().zip(&src.charges) {
                    s += c / geom::dist(x, *p);
                }
                Ok(s)
            }
            Repr::Fe(phi) => {
                let mesh = &phi.space.mesh;
                for leaf in 0..mesh.n_elements() {
                    let geo = mesh.element_geometry(leaf);
                    let b = geo.bary_from_point(x);
                    let tol = T::of(-1e-10);
                    if b.iter().all(|&c| c >= tol) {
                        return Ok(phi.value(leaf, b));
                    }
                }
                Err(Error::Assembly("point outside mesh".into()))
            }
        }
    }
}

/// Compute the Hartree potential of the (already exponentiated) source
/// rho^q >= 0 at the space's volume quadrature points.
pub fn hartree_potential<T: Real>(
    space: &std::sync::Arc<FESpace<T>>,
    rho_q: &QuadField<T>,
    spec: &NonlocalSpec<T>,
) -> Result<HartreeField<T>> {
    if rho_q.min() < T::of(-1e-12) {
        return Err(Error::Assembly(format!(
            "hartree source has negative entries (min {:?})",
            rho_q.min().to_f64_lossy()
        )));
    }
    match (spec.strategy, &spec.kernel) {
        (HartreeStrategy::Poisson, Kernel::Coulomb) => poisson_path(space, rho_q),
        (HartreeStrategy::Poisson, Kernel::Custom(_)) => Err(Error::Assembly(
            "poisson strategy requires the Coulomb kernel".into(),
        )),
        (HartreeStrategy::Direct, kernel) => direct_path(space.as_ref(), rho_q, kernel),
    }
}

fn poisson_path<T: Real>(
    space: &std::sync::Arc<FESpace<T>>,
    rho_q: &QuadField<T>,
) -> Result<HartreeField<T>> {
    let rule = &space.volume_rule;
    // total charge and centroid for the monopole boundary data
    let mut total = T::zero();
    let mut centroid = [T::zero(); 3];
    for e in 0..rho_q.n_elems {
        let geo = space.mesh.element_geometry(e);
        for (q, &b) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.volume * rho_q.at(e, q);
            total += w;
            let x = geo.point_from_bary(b);
            for k in 0..3 {
                centroid[k] += w * x[k];
            }
        }
    }
    let tiny = T::of(1e-300);
    let xbar = if total.abs() > tiny {
        geom::scale(centroid, T::one() / total)
    } else {
        [T::zero(); 3]
    };

    let k_full = assemble_stiffness_full(space);
    let four_pi = T::of(4.0) * T::PI();
    let mut rhs = assemble_load(space, rho_q);
    rhs.iter_mut().for_each(|v| *v *= four_pi);

    // boundary values g, lifted into the rhs
    let mut g = vec![T::zero(); space.n_dofs];
    for d in 0..space.n_dofs {
        if !space.free[d] && total.abs() > tiny {
            let r = geom::dist(space.dof_point(d), xbar);
            g[d] = total / r;
        }
    }
    let kg = k_full.matvec_alloc(&g);
    for d in 0..space.n_dofs {
        if space.free[d] {
            rhs[d] -= kg[d];
        } else {
            rhs[d] = T::zero();
        }
    }
    let mut phi0 = vec![T::zero(); space.n_dofs];
    pcg(
        &k_full,
        &rhs,
        &mut phi0,
        &space.free,
        Some(&k_full),
        T::of(1e-10),
        2000,
    )?;
    for d in 0..space.n_dofs {
        phi0[d] += g[d];
    }
    let phi = FEFunction::from_coeffs(space.clone(), phi0);
    let at_quad = QuadField::from_function(&phi);
    Ok(HartreeField {
        at_quad,
        repr: Repr::Fe(phi),
    })
}

fn direct_path<T: Real>(
    space: &FESpace<T>,
    rho_q: &QuadField<T>,
    kernel: &Kernel<T>,
) -> Result<HartreeField<T>> {
    let rule = &space.volume_rule;
    let n_qp = rule.len();
    let n_elems = rho_q.n_elems;
    let mut positions = Vec::with_capacity(n_elems * n_qp);
    let mut charges = Vec::with_capacity(n_elems * n_qp);
    let mut elem_h = Vec::with_capacity(n_elems);
    for e in 0..n_elems {
        let geo = space.mesh.element_geometry(e);
        elem_h.push(geo.h);
        for (q, &b) in rule.points.iter().enumerate() {
            positions.push(geo.point_from_bary(b));
            charges.push(rule.weights[q] * geo.volume * rho_q.at(e, q));
        }
    }
    let data: Vec<T> = (0..n_elems * n_qp)
        .into_par_iter()
        .map(|t| {
            let te = t / n_qp;
            let xt = positions[t];
            let eps = elem_h[te] / T::of(10.0);
            let eps2 = eps * eps;
            let mut s = T::zero();
            for (si, (p, &c)) in positions.iter().zip(&charges).enumerate() {
                let se = si / n_qp;
                let d2 = {
                    let dx = xt[0] - p[0];
                    let dy = xt[1] - p[1];
                    let dz = xt[2] - p[2];
                    dx * dx + dy * dy + dz * dz
                };
                let denom2 = if se == te { d2 + eps2 } else { d2 };
                if denom2 > T::zero() {
                    let r = denom2.sqrt();
                    let k = match kernel {
                        Kernel::Coulomb => T::one() / r,
                        Kernel::Custom(f) => f(r),
                    };
                    s += c * k;
                }
            }
            s
        })
        .collect();
    Ok(HartreeField {
        at_quad: QuadField {
            n_elems,
            n_qp,
            data,
        },
        repr: Repr::Direct(DirectSources { positions, charges }),
    })
}

/// Direct kernel convolution (K * f)(x_t) over quadrature sources, used by
/// the second-variation cross terms and small-mesh oracles. No
/// regularization: sources exclude the target point itself.
pub fn direct_convolution<T: Real>(
    space: &FESpace<T>,
    f: &QuadField<T>,
    kernel: &Kernel<T>,
) -> QuadField<T> {
    let rule = &space.volume_rule;
    let n_qp = rule.len();
    let n_elems = f.n_elems;
    let mut positions = Vec::with_capacity(n_elems * n_qp);
    let mut charges = Vec::with_capacity(n_elems * n_qp);
    let mut elem_h = Vec::with_capacity(n_elems);
    for e in 0..n_elems {
        let geo = space.mesh.element_geometry(e);
        elem_h.push(geo.h);
        for (q, &b) in rule.points.iter().enumerate() {
            positions.push(geo.point_from_bary(b));
            charges.push(rule.weights[q] * geo.volume * f.at(e, q));
        }
    }
    let data: Vec<T> = (0..n_elems * n_qp)
        .into_par_iter()
        .map(|t| {
            let te = t / n_qp;
            let xt = positions[t];
            let eps = elem_h[te] / T::of(10.0);
            let eps2 = eps * eps;
            let mut s = T::zero();
            for (si, (p, &c)) in positions.iter().zip(&charges).enumerate() {
                let se = si / n_qp;
                let d2 = {
                    let dx = xt[0] - p[0];
                    let dy = xt[1] - p[1];
                    let dz = xt[2] - p[2];
                    dx * dx + dy * dy + dz * dz
                };
                let denom2 = if se == te { d2 + eps2 } else { d2 };
                if denom2 > T::zero() {
                    let r = denom2.sqrt();
                    let k = match kernel {
                        Kernel::Coulomb => T::one() / r,
                        Kernel::Custom(g) => g(r),
                    };
                    s += c * k;
                }
            }
            s
        })
        .collect();
    QuadField {
        n_elems,
        n_qp,
        data,
    }
}
