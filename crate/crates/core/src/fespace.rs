//! Continuous Lagrange spaces of degree 1 or 2 on a tetrahedral mesh, with
//! homogeneous Dirichlet boundary handled by flagging boundary dofs.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::mesh::{ElementGeometry, Faces, Mesh, LOCAL_EDGES};
use crate::quadrature::{tet_rule, tri_rule, QuadratureRule};
use crate::scalar::Real;

pub const MAX_BASIS: usize = 10;

#[derive(Debug)]
pub struct FESpace<T: Real> {
    pub mesh: Arc<Mesh<T>>,
    pub degree: usize,
    pub n_dofs: usize,
    /// Per-leaf global dof ids, `dofs_per_elem` entries each.
    dof_map: Vec<u32>,
    /// Nodal coordinate of every dof.
    dof_points: Vec<Point3<T>>,
    /// `true` for interior dofs, `false` on the Dirichlet boundary.
    pub free: Vec<bool>,
    pub faces: Faces,
    pub volume_rule: QuadratureRule<T, 4>,
    pub face_rule: QuadratureRule<T, 3>,
    /// Sparsity pattern cache, filled on first assembly.
    pub(crate) pattern: OnceLock<Arc<crate::assembly::Pattern>>,
}

impl<T: Real> FESpace<T> {
    /// Build S^h on a conforming mesh. `quadrature_degree` overrides the
    /// default volume rule exactness of `2 * degree + 2` (the face rule is
    /// exact to `2 * degree`).
    pub fn build(
        mesh: Arc<Mesh<T>>,
        degree: usize,
        quadrature_degree: Option<usize>,
    ) -> Result<Arc<Self>> {
        if !(degree == 1 || degree == 2) {
            return Err(Error::Space(format!("unsupported degree {degree}")));
        }
        if !mesh.is_conforming() {
            return Err(Error::Space("mesh is not conforming".into()));
        }
        let faces = mesh.build_faces();
        let n_elems = mesh.n_elements();
        let n_verts = mesh.n_vertices();
        let per_elem = Self::dofs_per_elem_of(degree);

        let mut dof_map = vec![0u32; n_elems * per_elem];
        let mut dof_points: Vec<Point3<T>>;
        let n_dofs;

        if degree == 1 {
            for leaf in 0..n_elems {
                let ids = mesh.element_vertex_ids(leaf);
                for k in 0..4 {
                    dof_map[leaf * 4 + k] = ids[k] as u32;
                }
            }
            dof_points = (0..n_verts).map(|v| mesh.vertex(v)).collect();
            n_dofs = n_verts;
        } else {
            let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
            for leaf in 0..n_elems {
                let ids = mesh.element_vertex_ids(leaf);
                for k in 0..4 {
                    dof_map[leaf * 10 + k] = ids[k] as u32;
                }
                for (e, le) in LOCAL_EDGES.iter().enumerate() {
                    let (a, b) = (ids[le[0]] as u32, ids[le[1]] as u32);
                    let key = if a < b { (a, b) } else { (b, a) };
                    let next = n_verts as u32 + edges.len() as u32;
                    let id = *edges.entry(key).or_insert(next);
                    dof_map[leaf * 10 + 4 + e] = id;
                }
            }
            n_dofs = n_verts + edges.len();
            dof_points = vec![[T::zero(); 3]; n_dofs];
            for v in 0..n_verts {
                dof_points[v] = mesh.vertex(v);
            }
            for (&(a, b), &id) in &edges {
                dof_points[id as usize] = crate::geom::midpoint(
                    mesh.vertex(a as usize),
                    mesh.vertex(b as usize),
                );
            }
        }

        // Dirichlet boundary dofs from boundary faces (vertices and, for
        // degree 2, edge midpoints of boundary faces).
        let mut free = vec![true; n_dofs];
        for f in &faces.faces {
            if !f.is_boundary() {
                continue;
            }
            for &v in &f.vertices {
                free[v as usize] = false;
            }
        }
        if degree == 2 {
            let mut boundary_edges: HashMap<(u32, u32), ()> = HashMap::new();
            for f in &faces.faces {
                if f.is_boundary() {
                    let v = f.vertices;
                    for (a, b) in [(v[0], v[1]), (v[0], v[2]), (v[1], v[2])] {
                        boundary_edges.insert(if a < b { (a, b) } else { (b, a) }, ());
                    }
                }
            }
            for leaf in 0..n_elems {
                let ids = mesh.element_vertex_ids(leaf);
                for (e, le) in LOCAL_EDGES.iter().enumerate() {
                    let (a, b) = (ids[le[0]] as u32, ids[le[1]] as u32);
                    let key = if a < b { (a, b) } else { (b, a) };
                    if boundary_edges.contains_key(&key) {
                        free[dof_map[leaf * 10 + 4 + e] as usize] = false;
                    }
                }
            }
        }

        let vol_deg = quadrature_degree.unwrap_or(2 * degree + 2);
        Ok(Arc::new(FESpace {
            mesh,
            degree,
            n_dofs,
            dof_map,
            dof_points,
            free,
            faces,
            volume_rule: tet_rule(vol_deg),
            face_rule: tri_rule(2 * degree),
            pattern: OnceLock::new(),
        }))
    }

    pub fn dofs_per_elem(&self) -> usize {
        Self::dofs_per_elem_of(self.degree)
    }

    fn dofs_per_elem_of(degree: usize) -> usize {
        if degree == 1 {
            4
        } else {
            10
        }
    }

    pub fn element_dofs(&self, leaf: usize) -> &[u32] {
        let k = self.dofs_per_elem();
        &self.dof_map[leaf * k..(leaf + 1) * k]
    }

    pub fn dof_point(&self, dof: usize) -> Point3<T> {
        self.dof_points[dof]
    }

    pub fn n_free_dofs(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    /// Values of all basis functions at a barycentric point.
    pub fn basis_values(&self, b: [T; 4]) -> [T; MAX_BASIS] {
        let mut out = [T::zero(); MAX_BASIS];
        if self.degree == 1 {
            out[..4].copy_from_slice(&b);
        } else {
            let two = T::of(2.0);
            let four = T::of(4.0);
            for i in 0..4 {
                out[i] = b[i] * (two * b[i] - T::one());
            }
            for (e, le) in LOCAL_EDGES.iter().enumerate() {
                out[4 + e] = four * b[le[0]] * b[le[1]];
            }
        }
        out
    }

    /// Physical gradients of all basis functions at a barycentric point.
    pub fn basis_gradients(
        &self,
        b: [T; 4],
        geo: &ElementGeometry<T>,
    ) -> [Point3<T>; MAX_BASIS] {
        let mut out = [[T::zero(); 3]; MAX_BASIS];
        if self.degree == 1 {
            out[..4].copy_from_slice(&geo.bary_grads);
        } else {
            let four = T::of(4.0);
            for i in 0..4 {
                let c = four * b[i] - T::one();
                out[i] = crate::geom::scale(geo.bary_grads[i], c);
            }
            for (e, le) in LOCAL_EDGES.iter().enumerate() {
                let (i, j) = (le[0], le[1]);
                for k in 0..3 {
                    out[4 + e][k] =
                        four * (b[i] * geo.bary_grads[j][k] + b[j] * geo.bary_grads[i][k]);
                }
            }
        }
        out
    }

    /// Laplacians of all basis functions (constant per element).
    pub fn basis_laplacians(&self, geo: &ElementGeometry<T>) -> [T; MAX_BASIS] {
        let mut out = [T::zero(); MAX_BASIS];
        if self.degree == 2 {
            let four = T::of(4.0);
            let eight = T::of(8.0);
            for i in 0..4 {
                out[i] = four * crate::geom::dot(geo.bary_grads[i], geo.bary_grads[i]);
            }
            for (e, le) in LOCAL_EDGES.iter().enumerate() {
                out[4 + e] =
                    eight * crate::geom::dot(geo.bary_grads[le[0]], geo.bary_grads[le[1]]);
            }
        }
        out
    }
}

/// Coefficient vector over a space's dof map.
#[derive(Debug, Clone)]
pub struct FEFunction<T: Real> {
    pub space: Arc<FESpace<T>>,
    pub coeffs: Vec<T>,
}

impl<T: Real> FEFunction<T> {
    pub fn zeros(space: Arc<FESpace<T>>) -> Self {
        let n = space.n_dofs;
        FEFunction {
            space,
            coeffs: vec![T::zero(); n],
        }
    }

    pub fn from_coeffs(space: Arc<FESpace<T>>, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), space.n_dofs);
        FEFunction { space, coeffs }
    }

    /// Nodal interpolation: coefficients are the field values at dof nodes.
    pub fn interpolate(
        space: Arc<FESpace<T>>,
        f: impl Fn(Point3<T>) -> T,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(space.n_dofs);
        for d in 0..space.n_dofs {
            let v = f(space.dof_point(d));
            if !v.is_finite() {
                return Err(Error::Space(format!(
                    "interpolated field is not finite at dof {d} ({:?})",
                    space.dof_point(d).map(|x| x.to_f64_lossy())
                )));
            }
            coeffs.push(v);
        }
        Ok(FEFunction { space, coeffs })
    }

    pub fn zero_boundary(&mut self) {
        for (c, &f) in self.coeffs.iter_mut().zip(&self.space.free) {
            if !f {
                *c = T::zero();
            }
        }
    }

    /// Value and physical gradient at a barycentric point of a leaf.
    pub fn value_and_grad(
        &self,
        leaf: usize,
        b: [T; 4],
        geo: &ElementGeometry<T>,
    ) -> (T, Point3<T>) {
        let vals = self.space.basis_values(b);
        let grads = self.space.basis_gradients(b, geo);
        let dofs = self.space.element_dofs(leaf);
        let mut v = T::zero();
        let mut g = [T::zero(); 3];
        for (k, &d) in dofs.iter().enumerate() {
            let c = self.coeffs[d as usize];
            v += c * vals[k];
            for x in 0..3 {
                g[x] += c * grads[k][x];
            }
        }
        (v, g)
    }

    pub fn value(&self, leaf: usize, b: [T; 4]) -> T {
        let vals = self.space.basis_values(b);
        let dofs = self.space.element_dofs(leaf);
        dofs.iter()
            .enumerate()
            .map(|(k, &d)| self.coeffs[d as usize] * vals[k])
            .sum()
    }

    /// Values and gradients at a list of barycentric points.
    pub fn evaluate(&self, leaf: usize, points: &[[T; 4]]) -> Vec<(T, Point3<T>)> {
        let geo = self.space.mesh.element_geometry(leaf);
        points
            .iter()
            .map(|&b| self.value_and_grad(leaf, b, &geo))
            .collect()
    }

    /// Laplacian of the restriction to a leaf (identically zero for degree 1,
    /// constant for degree 2).
    pub fn laplacian(&self, leaf: usize, geo: &ElementGeometry<T>) -> T {
        if self.space.degree == 1 {
            return T::zero();
        }
        let laps = self.space.basis_laplacians(geo);
        let dofs = self.space.element_dofs(leaf);
        dofs.iter()
            .enumerate()
            .map(|(k, &d)| self.coeffs[d as usize] * laps[k])
            .sum()
    }

    /// Exact nodal transfer onto a space over a refinement of this mesh.
    pub fn transfer_to(&self, fine: &Arc<FESpace<T>>) -> Result<FEFunction<T>> {
        let coarse_mesh = &self.space.mesh;
        if !fine.mesh.is_refinement_of(coarse_mesh) {
            return Err(Error::Space(
                "transfer target is not a refinement of the source mesh".into(),
            ));
        }
        // owning fine leaf for every fine dof
        let mut owner = vec![u32::MAX; fine.n_dofs];
        for leaf in 0..fine.mesh.n_elements() {
            for &d in fine.element_dofs(leaf) {
                if owner[d as usize] == u32::MAX {
                    owner[d as usize] = leaf as u32;
                }
            }
        }
        let mut coeffs = vec![T::zero(); fine.n_dofs];
        for d in 0..fine.n_dofs {
            let leaf = owner[d] as usize;
            let coarse_leaf = fine.mesh.ancestor_leaf_in(coarse_mesh, leaf)?;
            let geo = coarse_mesh.element_geometry(coarse_leaf);
            let b = geo.bary_from_point(fine.dof_point(d));
            coeffs[d] = self.value(coarse_leaf, b);
        }
        Ok(FEFunction {
            space: fine.clone(),
            coeffs,
        })
    }

    /// (volume L2 norm squared, H1 seminorm squared) of one element.
    pub fn element_norms_sq(&self, leaf: usize) -> (T, T) {
        let geo = self.space.mesh.element_geometry(leaf);
        let rule = &self.space.volume_rule;
        let mut l2 = T::zero();
        let mut h1 = T::zero();
        for (q, &b) in rule.points.iter().enumerate() {
            let (v, g) = self.value_and_grad(leaf, b, &geo);
            let w = rule.weights[q] * geo.volume;
            l2 += w * v * v;
            h1 += w * crate::geom::dot(g, g);
        }
        (l2, h1)
    }

    pub fn l2_norm_sq(&self) -> T {
        (0..self.space.mesh.n_elements())
            .map(|leaf| self.element_norms_sq(leaf).0)
            .sum()
    }

    /// Full H1 norm squared (L2 + seminorm).
    pub fn h1_norm_sq(&self) -> T {
        (0..self.space.mesh.n_elements())
            .map(|leaf| {
                let (l2, h1) = self.element_norms_sq(leaf);
                l2 + h1
            })
            .sum()
    }
}
