//! Conforming tetrahedral meshes over box domains with tagged bisection.
//!
//! Elements form a binary forest: refinement appends children and the mesh
//! views the leaves. Each element carries an ordered vertex tuple and a
//! bisection tag; the refinement edge is determined by tag and vertex order
//! alone, which is what guarantees finitely many similarity classes and
//! terminating conforming closure.

mod bisect;
mod boxmesh;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{self, Point3};
use crate::scalar::Real;

pub use boxmesh::build_box_mesh;

/// Axis-aligned box domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
}

impl<T: Real> BoxDomain<T> {
    pub fn new(intervals: [[T; 2]; 3]) -> Result<Self> {
        for iv in &intervals {
            if !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite() {
                return Err(Error::Mesh(format!(
                    "degenerate box interval [{:?}, {:?}]",
                    iv[0], iv[1]
                )));
            }
        }
        Ok(BoxDomain {
            lo: [intervals[0][0], intervals[1][0], intervals[2][0]],
            hi: [intervals[0][1], intervals[1][1], intervals[2][1]],
        })
    }

    pub fn volume(&self) -> T {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1]) * (self.hi[2] - self.lo[2])
    }

    pub fn extent(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains_strict(&self, p: Point3<T>) -> bool {
        (0..3).all(|k| self.lo[k] < p[k] && p[k] < self.hi[k])
    }

    pub fn center(&self) -> Point3<T> {
        let half = T::of(0.5);
        [
            (self.lo[0] + self.hi[0]) * half,
            (self.lo[1] + self.hi[1]) * half,
            (self.lo[2] + self.hi[2]) * half,
        ]
    }
}

/// The five configurations of the marked-tetrahedron data structure. With
/// box (Kuhn) initial meshes only `PlanarUnflagged` and `Adjacent` occur;
/// the remaining variants exist for externally marked meshes, which the box
/// constructor never produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkedType {
    PlanarUnflagged,
    PlanarFlagged,
    Adjacent,
    Opposite,
    Mixed,
}

/// Forest node. `tag` is the bisection tag in {1, 2, 3}; the refinement edge
/// is (vertices[0], vertices[tag]).
#[derive(Debug, Clone)]
pub(crate) struct Element {
    pub vertices: [u32; 4],
    pub tag: u8,
    pub generation: u32,
    pub parent: Option<u32>,
    pub children: Option<[u32; 2]>,
}

#[derive(Debug, Clone)]
pub struct Mesh<T: Real> {
    pub(crate) vertices: Vec<Point3<T>>,
    pub(crate) elements: Vec<Element>,
    /// Leaf (active) element ids, ascending.
    pub(crate) leaves: Vec<u32>,
    /// Midpoint vertex of every edge that has ever been bisected, keyed by
    /// sorted endpoint ids. This is the vertex-deduplication genealogy.
    pub(crate) edge_midpoints: HashMap<(u32, u32), u32>,
    pub(crate) closure_limit: u32,
    pub(crate) domain: Option<BoxDomain<T>>,
}

/// Per-element geometric data.
#[derive(Debug, Clone)]
pub struct ElementGeometry<T> {
    pub coords: [Point3<T>; 4],
    pub volume: T,
    /// Element diameter: longest edge.
    pub h: T,
    /// Insphere diameter 6 V / S.
    pub rho: T,
    /// Constant gradients of the four barycentric coordinates.
    pub bary_grads: [Point3<T>; 4],
}

impl<T: Real> ElementGeometry<T> {
    pub fn shape_ratio(&self) -> T {
        self.h / self.rho
    }

    pub fn point_from_bary(&self, b: [T; 4]) -> Point3<T> {
        let mut p = [T::zero(); 3];
        for i in 0..4 {
            for k in 0..3 {
                p[k] += b[i] * self.coords[i][k];
            }
        }
        p
    }

    pub fn bary_from_point(&self, p: Point3<T>) -> [T; 4] {
        let d = geom::sub(p, self.coords[0]);
        let l1 = geom::dot(self.bary_grads[1], d);
        let l2 = geom::dot(self.bary_grads[2], d);
        let l3 = geom::dot(self.bary_grads[3], d);
        [T::one() - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn centroid(&self) -> Point3<T> {
        let q = T::of(0.25);
        self.point_from_bary([q, q, q, q])
    }
}

/// Local faces of a tetrahedron: face `i` is opposite vertex `i`.
pub(crate) const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Local edges in the order (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
pub(crate) const LOCAL_EDGES: [[usize; 2]; 6] =
    [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

#[derive(Debug, Clone)]
pub struct FaceInfo {
    /// Vertex ids, sorted ascending.
    pub vertices: [u32; 3],
    /// (leaf index, local face index) of the first adjacent element.
    pub first: (u32, u8),
    /// Second adjacent element; `None` on the boundary.
    pub second: Option<(u32, u8)>,
}

impl FaceInfo {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }
}

/// Face topology of the current leaves.
#[derive(Debug, Clone)]
pub struct Faces {
    pub faces: Vec<FaceInfo>,
    /// Per leaf: global face id of each local face.
    pub elem_faces: Vec<[u32; 4]>,
    pub vertex_on_boundary: Vec<bool>,
    pub n_interior: usize,
}

/// Geometry of one face, oriented outward from the face's first element.
#[derive(Debug, Clone)]
pub struct FaceGeometry<T> {
    pub normal: Point3<T>,
    pub area: T,
    /// Face diameter: longest edge of the triangle.
    pub diameter: T,
}

#[derive(Debug, Clone, Copy)]
pub struct QualityStats<T> {
    pub h_max: T,
    /// max over elements of h_T / rho_T.
    pub max_shape_ratio: T,
}

impl<T: Real> Mesh<T> {
    pub(crate) fn from_parts(
        vertices: Vec<Point3<T>>,
        tets: Vec<([u32; 4], u8)>,
        domain: Option<BoxDomain<T>>,
    ) -> Result<Self> {
        let elements: Vec<Element> = tets
            .iter()
            .map(|&(vertices, tag)| Element {
                vertices,
                tag,
                generation: 0,
                parent: None,
                children: None,
            })
            .collect();
        let leaves = (0..elements.len() as u32).collect();
        let mesh = Mesh {
            vertices,
            elements,
            leaves,
            edge_midpoints: HashMap::new(),
            closure_limit: 64,
            domain,
        };
        for i in 0..mesh.n_elements() {
            let g = mesh.element_geometry(i);
            if !(g.volume > T::zero()) {
                return Err(Error::Mesh(format!("element {i} is degenerate")));
            }
        }
        Ok(mesh)
    }

    /// Test/tool constructor for hand-built meshes (not part of the public
    /// surface; production meshes come from `build_box_mesh`).
    #[allow(dead_code)]
    pub(crate) fn from_simplices(
        vertices: Vec<Point3<T>>,
        tets: Vec<([usize; 4], u8)>,
    ) -> Result<Self> {
        let tets = tets
            .into_iter()
            .map(|(v, t)| {
                assert!((1..=3).contains(&t), "bisection tag must be 1..=3");
                ([v[0] as u32, v[1] as u32, v[2] as u32, v[3] as u32], t)
            })
            .collect();
        Self::from_parts(vertices, tets, None)
    }

    pub fn n_elements(&self) -> usize {
        self.leaves.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, id: usize) -> Point3<T> {
        self.vertices[id]
    }

    pub fn domain(&self) -> Option<BoxDomain<T>> {
        self.domain
    }

    pub fn set_closure_limit(&mut self, limit: u32) {
        self.closure_limit = limit;
    }

    pub(crate) fn leaf(&self, leaf: usize) -> &Element {
        &self.elements[self.leaves[leaf] as usize]
    }

    pub fn element_vertex_ids(&self, leaf: usize) -> [usize; 4] {
        let v = self.leaf(leaf).vertices;
        [v[0] as usize, v[1] as usize, v[2] as usize, v[3] as usize]
    }

    pub fn element_generation(&self, leaf: usize) -> u32 {
        self.leaf(leaf).generation
    }

    /// Local vertex indices of the refinement edge.
    pub fn refinement_edge(&self, leaf: usize) -> (usize, usize) {
        (0, self.leaf(leaf).tag as usize)
    }

    /// Marked-tetrahedron type implied by the bisection tag: the faces
    /// containing the refinement edge are marked with it, and the marked
    /// edges of the remaining two faces follow from the child recursion.
    pub fn element_type(&self, leaf: usize) -> MarkedType {
        match self.leaf(leaf).tag {
            3 => MarkedType::Adjacent,
            1 | 2 => MarkedType::PlanarUnflagged,
            t => unreachable!("invalid tag {t}"),
        }
    }

    pub fn element_geometry(&self, leaf: usize) -> ElementGeometry<T> {
        let ids = self.leaf(leaf).vertices;
        let coords = [
            self.vertices[ids[0] as usize],
            self.vertices[ids[1] as usize],
            self.vertices[ids[2] as usize],
            self.vertices[ids[3] as usize],
        ];
        geometry_of(&coords)
    }

    /// Longest edge per leaf (the mesh-size function h(x)).
    pub fn size_function(&self) -> Vec<T> {
        (0..self.n_elements())
            .map(|i| self.element_geometry(i).h)
            .collect()
    }

    pub fn quality_stats(&self) -> QualityStats<T> {
        let mut h_max = T::zero();
        let mut ratio = T::zero();
        for i in 0..self.n_elements() {
            let g = self.element_geometry(i);
            h_max = h_max.max(g.h);
            ratio = ratio.max(g.shape_ratio());
        }
        QualityStats {
            h_max,
            max_shape_ratio: ratio,
        }
    }

    pub fn total_volume(&self) -> T {
        (0..self.n_elements())
            .map(|i| self.element_geometry(i).volume)
            .sum()
    }

    /// Face topology over the current leaves.
    pub fn build_faces(&self) -> Faces {
        let mut map: HashMap<[u32; 3], u32> = HashMap::with_capacity(self.n_elements() * 2);
        let mut faces: Vec<FaceInfo> = Vec::with_capacity(self.n_elements() * 2);
        let mut elem_faces = vec![[u32::MAX; 4]; self.n_elements()];
        for leaf in 0..self.n_elements() {
            let verts = self.leaf(leaf).vertices;
            for (lf, idx) in LOCAL_FACES.iter().enumerate() {
                let mut key = [verts[idx[0]], verts[idx[1]], verts[idx[2]]];
                key.sort_unstable();
                match map.get(&key) {
                    Some(&fid) => {
                        let f = &mut faces[fid as usize];
                        debug_assert!(f.second.is_none(), "face shared by >2 elements");
                        f.second = Some((leaf as u32, lf as u8));
                        elem_faces[leaf][lf] = fid;
                    }
                    None => {
                        let fid = faces.len() as u32;
                        faces.push(FaceInfo {
                            vertices: key,
                            first: (leaf as u32, lf as u8),
                            second: None,
                        });
                        map.insert(key, fid);
                        elem_faces[leaf][lf] = fid;
                    }
                }
            }
        }
        let mut vertex_on_boundary = vec![false; self.n_vertices()];
        let mut n_interior = 0;
        for f in &faces {
            if f.is_boundary() {
                for &v in &f.vertices {
                    vertex_on_boundary[v as usize] = true;
                }
            } else {
                n_interior += 1;
            }
        }
        Faces {
            faces,
            elem_faces,
            vertex_on_boundary,
            n_interior,
        }
    }

    /// Unit normal (outward from the face's first element), area, diameter.
    pub fn face_geometry(&self, faces: &Faces, face_id: usize) -> FaceGeometry<T> {
        let f = &faces.faces[face_id];
        let a = self.vertices[f.vertices[0] as usize];
        let b = self.vertices[f.vertices[1] as usize];
        let c = self.vertices[f.vertices[2] as usize];
        let cr = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let area = geom::norm(cr) * T::of(0.5);
        let mut normal = geom::scale(cr, T::one() / geom::norm(cr));
        let ge = self.element_geometry(f.first.0 as usize);
        let fc = geom::scale(geom::add(geom::add(a, b), c), T::of(1.0 / 3.0));
        if geom::dot(normal, geom::sub(fc, ge.centroid())) < T::zero() {
            normal = geom::scale(normal, -T::one());
        }
        let d01 = geom::dist(a, b);
        let d02 = geom::dist(a, c);
        let d12 = geom::dist(b, c);
        FaceGeometry {
            normal,
            area,
            diameter: d01.max(d02).max(d12),
        }
    }

    /// omega(T): the element and its face neighbors.
    pub fn patch_of_element(&self, faces: &Faces, leaf: usize) -> Vec<usize> {
        let mut out = vec![leaf];
        for &fid in &faces.elem_faces[leaf] {
            let f = &faces.faces[fid as usize];
            let other = if f.first.0 as usize == leaf {
                f.second.map(|(e, _)| e as usize)
            } else {
                Some(f.first.0 as usize)
            };
            if let Some(e) = other {
                out.push(e);
            }
        }
        out
    }

    /// omega(e): the one or two elements adjacent to a face.
    pub fn patch_of_face(&self, faces: &Faces, face_id: usize) -> Vec<usize> {
        let f = &faces.faces[face_id];
        let mut out = vec![f.first.0 as usize];
        if let Some((e, _)) = f.second {
            out.push(e as usize);
        }
        out
    }

    /// Fast conformity test from the bisection genealogy: a leaf is
    /// non-conforming iff one of its edges has a recorded midpoint vertex.
    pub fn is_conforming(&self) -> bool {
        self.leaves
            .iter()
            .all(|&id| !self.has_split_edge(id))
    }

    pub(crate) fn has_split_edge(&self, elem_id: u32) -> bool {
        let v = self.elements[elem_id as usize].vertices;
        LOCAL_EDGES.iter().any(|e| {
            let (a, b) = (v[e[0]], v[e[1]]);
            let key = if a < b { (a, b) } else { (b, a) };
            self.edge_midpoints.contains_key(&key)
        })
    }

    /// Brute-force audit, independent of the genealogy: every face key is
    /// shared by exactly two leaves or lies on the domain boundary, paired
    /// normals are antiparallel, volumes are positive and sum to the box
    /// volume.
    pub fn audit_conformity(&self) -> Result<()> {
        let mut counts: HashMap<[u32; 3], u32> = HashMap::with_capacity(self.n_elements() * 2);
        for leaf in 0..self.n_elements() {
            let verts = self.leaf(leaf).vertices;
            for idx in LOCAL_FACES.iter() {
                let mut key = [verts[idx[0]], verts[idx[1]], verts[idx[2]]];
                key.sort_unstable();
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        for (key, c) in &counts {
            if *c > 2 {
                return Err(Error::Mesh(format!(
                    "face {key:?} shared by {c} elements"
                )));
            }
            if *c == 1 {
                if let Some(dom) = &self.domain {
                    let on_boundary = (0..3).any(|k| {
                        [dom.lo[k], dom.hi[k]].iter().any(|&plane| {
                            key.iter().all(|&v| {
                                (self.vertices[v as usize][k] - plane).abs()
                                    <= T::of(1e-12) * (T::one() + plane.abs())
                            })
                        })
                    });
                    if !on_boundary {
                        return Err(Error::Mesh(format!(
                            "interior face {key:?} has a single adjacent element (hanging vertex)"
                        )));
                    }
                }
            }
        }
        let faces = self.build_faces();
        for (fid, f) in faces.faces.iter().enumerate() {
            if f.second.is_some() {
                let g1 = self.face_geometry(&faces, fid);
                // outward normal from the second element
                let swapped = Faces {
                    faces: vec![FaceInfo {
                        vertices: f.vertices,
                        first: f.second.unwrap(),
                        second: Some(f.first),
                    }],
                    elem_faces: Vec::new(),
                    vertex_on_boundary: Vec::new(),
                    n_interior: 1,
                };
                let g2 = self.face_geometry(&swapped, 0);
                let s = geom::norm(geom::add(g1.normal, g2.normal));
                if s > T::of(1e-12) {
                    return Err(Error::Mesh(format!(
                        "face {fid} normals not antiparallel (defect {s:?})"
                    )));
                }
            }
        }
        let mut vol = T::zero();
        for i in 0..self.n_elements() {
            let g = self.element_geometry(i);
            if !(g.volume > T::zero()) {
                return Err(Error::Mesh(format!("element {i} degenerate")));
            }
            vol += g.volume;
        }
        if let Some(dom) = &self.domain {
            let rel = ((vol - dom.volume()) / dom.volume()).abs();
            if rel > T::of(1e-10) {
                return Err(Error::Mesh(format!(
                    "leaf volumes sum to {vol:?}, box volume {:?}",
                    dom.volume()
                )));
            }
        }
        Ok(())
    }

    /// True when `self` was produced from `coarse` by refinement calls.
    pub fn is_refinement_of(&self, coarse: &Mesh<T>) -> bool {
        if coarse.elements.len() > self.elements.len()
            || coarse.vertices.len() > self.vertices.len()
        {
            return false;
        }
        coarse
            .elements
            .iter()
            .zip(&self.elements)
            .all(|(c, s)| c.vertices == s.vertices && c.tag == s.tag)
    }

    /// Coarse leaf index containing the given fine leaf (requires
    /// `self.is_refinement_of(coarse)`).
    pub fn ancestor_leaf_in(&self, coarse: &Mesh<T>, leaf: usize) -> Result<usize> {
        let mut id = self.leaves[leaf];
        loop {
            if (id as usize) < coarse.elements.len()
                && coarse.elements[id as usize].children.is_none()
            {
                return coarse
                    .leaves
                    .binary_search(&id)
                    .map_err(|_| Error::Mesh(format!("forest id {id} is not a coarse leaf")));
            }
            id = self.elements[id as usize]
                .parent
                .ok_or_else(|| Error::Mesh("meshes are not nested".into()))?;
        }
    }

    /// Each child's vertices must lie in the closed parent simplex.
    pub fn check_nestedness(&self) -> Result<()> {
        let tol = T::of(1e-12);
        for &id in &self.leaves {
            let e = &self.elements[id as usize];
            let Some(pid) = e.parent else { continue };
            let p = &self.elements[pid as usize];
            let coords = [
                self.vertices[p.vertices[0] as usize],
                self.vertices[p.vertices[1] as usize],
                self.vertices[p.vertices[2] as usize],
                self.vertices[p.vertices[3] as usize],
            ];
            let pg = geometry_of(&coords);
            for &v in &e.vertices {
                let b = pg.bary_from_point(self.vertices[v as usize]);
                for c in b {
                    if c < -tol || c > T::one() + tol {
                        return Err(Error::Mesh(format!(
                            "child vertex {v} outside parent {pid} (bary {:?})",
                            b.map(|x| x.to_f64_lossy())
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn geometry_of<T: Real>(coords: &[Point3<T>; 4]) -> ElementGeometry<T> {
    let e1 = geom::sub(coords[1], coords[0]);
    let e2 = geom::sub(coords[2], coords[0]);
    let e3 = geom::sub(coords[3], coords[0]);
    let det = geom::det3(e1, e2, e3);
    let volume = det.abs() / T::of(6.0);
    // rows of the inverse Jacobian are the barycentric gradients 1..3
    let inv_det = T::one() / det;
    let r1 = geom::scale(geom::cross(e2, e3), inv_det);
    let r2 = geom::scale(geom::cross(e3, e1), inv_det);
    let r3 = geom::scale(geom::cross(e1, e2), inv_det);
    let r0 = [
        -r1[0] - r2[0] - r3[0],
        -r1[1] - r2[1] - r3[1],
        -r1[2] - r2[2] - r3[2],
    ];
    let mut h = T::zero();
    for e in LOCAL_EDGES.iter() {
        h = h.max(geom::dist(coords[e[0]], coords[e[1]]));
    }
    let mut surface = T::zero();
    for f in LOCAL_FACES.iter() {
        surface += geom::tri_area(coords[f[0]], coords[f[1]], coords[f[2]]);
    }
    let rho = T::of(6.0) * volume / surface;
    ElementGeometry {
        coords: *coords,
        volume,
        h,
        rho,
        bary_grads: [r0, r1, r2, r3],
    }
}
