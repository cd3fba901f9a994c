//! Marked bisection with conforming closure.

use super::{Element, Mesh};
use crate::error::{Error, Result};
use crate::geom;
use crate::scalar::Real;

impl<T: Real> Mesh<T> {
    /// Refine: bisect every marked leaf once, then close. Leaf indices refer
    /// to the current leaf ordering. Returns the refined mesh; the receiver
    /// stays valid (nested-mesh queries need both).
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh<T>> {
        self.bisect_times(marked, 1)
    }

    /// Refine with `b >= 1` bisections per marked leaf.
    pub fn bisect_times(&self, marked: &[usize], b: u32) -> Result<Mesh<T>> {
        if b == 0 {
            return Err(Error::Mesh("bisection count must be >= 1".into()));
        }
        let mut out = self.clone();
        out.refine_in_place(marked, b)?;
        Ok(out)
    }

    /// `rounds` sweeps of full bisection; 3 sweeps halve every edge.
    pub fn refine_uniform(&self, rounds: u32) -> Result<Mesh<T>> {
        let mut mesh = self.clone();
        for _ in 0..rounds {
            let all: Vec<usize> = (0..mesh.n_elements()).collect();
            mesh.refine_in_place(&all, 1)?;
        }
        Ok(mesh)
    }

    pub(crate) fn refine_in_place(&mut self, marked: &[usize], b: u32) -> Result<()> {
        let n = self.n_elements();
        for &m in marked {
            if m >= n {
                return Err(Error::Mesh(format!(
                    "marked element {m} out of range ({n} elements)"
                )));
            }
        }

        // marked elements first, to depth b
        let mut stack: Vec<(u32, u32)> =
            marked.iter().map(|&m| (self.leaves[m], b)).collect();
        while let Some((id, depth)) = stack.pop() {
            if depth == 0 {
                continue;
            }
            if self.elements[id as usize].children.is_none() {
                self.bisect_element(id);
            }
            if depth > 1 {
                let [c1, c2] = self.elements[id as usize].children.unwrap();
                stack.push((c1, depth - 1));
                stack.push((c2, depth - 1));
            }
        }

        // conforming closure: any leaf owning a split edge gets bisected
        let mut sweeps = 0u32;
        loop {
            self.rebuild_leaves();
            let bad: Vec<u32> = self
                .leaves
                .iter()
                .copied()
                .filter(|&id| self.has_split_edge(id))
                .collect();
            if bad.is_empty() {
                break;
            }
            sweeps += 1;
            if sweeps > self.closure_limit {
                return Err(Error::ClosureDepthExceeded {
                    limit: self.closure_limit,
                });
            }
            for id in bad {
                if self.elements[id as usize].children.is_none() {
                    self.bisect_element(id);
                }
            }
        }
        Ok(())
    }

    fn rebuild_leaves(&mut self) {
        self.leaves = (0..self.elements.len() as u32)
            .filter(|&id| self.elements[id as usize].children.is_none())
            .collect();
    }

    fn midpoint_vertex(&mut self, a: u32, b: u32) -> u32 {
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&z) = self.edge_midpoints.get(&key) {
            return z;
        }
        let z = self.vertices.len() as u32;
        self.vertices.push(geom::midpoint(
            self.vertices[a as usize],
            self.vertices[b as usize],
        ));
        self.edge_midpoints.insert(key, z);
        z
    }

    /// Bisect one leaf across its refinement edge (vertices[0], vertices[d]).
    /// Children keep the vertex ordering that drives future refinement-edge
    /// selection; the tag cycles 3 -> 2 -> 1 -> 3.
    fn bisect_element(&mut self, id: u32) {
        let (verts, tag, generation) = {
            let e = &self.elements[id as usize];
            debug_assert!(e.children.is_none());
            (e.vertices, e.tag as usize, e.generation)
        };
        let z = self.midpoint_vertex(verts[0], verts[tag]);
        let new_tag = if tag > 1 { (tag - 1) as u8 } else { 3u8 };

        let mut c1 = verts;
        c1[tag] = z;

        let mut c2 = [0u32; 4];
        for i in 0..tag {
            c2[i] = verts[i + 1];
        }
        c2[tag] = z;
        for i in (tag + 1)..4 {
            c2[i] = verts[i];
        }

        let base = self.elements.len() as u32;
        for vs in [c1, c2] {
            self.elements.push(Element {
                vertices: vs,
                tag: new_tag,
                generation: generation + 1,
                parent: Some(id),
                children: None,
            });
        }
        self.elements[id as usize].children = Some([base, base + 1]);
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_box_mesh;
    use super::*;

    #[test]
    fn single_tet_bisection_halves_volume() {
        let mesh: Mesh<f64> = Mesh::from_simplices(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![([0, 1, 2, 3], 3)],
        )
        .unwrap();
        let fine = mesh.bisect(&[0]).unwrap();
        assert_eq!(fine.n_elements(), 2);
        let parent_vol = mesh.element_geometry(0).volume;
        for i in 0..2 {
            assert!((fine.element_geometry(i).volume - parent_vol / 2.0).abs() < 1e-15);
            assert_eq!(fine.element_generation(i), 1);
        }
        fine.check_nestedness().unwrap();
    }

    #[test]
    fn closure_keeps_cube_conforming() {
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        let fine = mesh.bisect(&[0]).unwrap();
        assert!(fine.n_elements() >= 7);
        fine.audit_conformity().unwrap();
        assert!(fine.is_conforming());
        assert!(fine.is_refinement_of(&mesh));
    }

    #[test]
    fn uniform_sweeps_octasect_and_halve_h() {
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        let h0 = mesh.quality_stats().h_max;
        let mut m = mesh.clone();
        for round in 1..=6u32 {
            m = m.refine_uniform(1).unwrap();
            m.audit_conformity().unwrap();
            assert_eq!(m.n_elements(), 6 * 2usize.pow(round));
            if round % 3 == 0 {
                // every 3 full sweeps multiply the count by 8 and halve h
                let h = m.quality_stats().h_max;
                let expect = h0 / 2f64.powi((round / 3) as i32);
                assert!(
                    (h - expect).abs() < 1e-12,
                    "round {round}: h_max {h} vs {expect}"
                );
            }
        }
        assert_eq!(m.n_elements(), 6 * 64);
    }

    #[test]
    fn shape_classes_stabilize_under_uniform_bisection() {
        // bounded similarity classes: the per-round max of h/rho takes
        // finitely many values and its running maximum stops growing after
        // round 3
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        let mut m = mesh.clone();
        let mut ratios = Vec::new();
        for _ in 0..10 {
            m = m.refine_uniform(1).unwrap();
            ratios.push(m.quality_stats().max_shape_ratio);
        }
        let cap = ratios[..3].iter().cloned().fold(0.0f64, f64::max);
        for (round, &r) in ratios.iter().enumerate().skip(3) {
            assert!(
                r <= cap + 1e-12,
                "shape ratio grew after round 3: round {} has {} > {}",
                round + 1,
                r,
                cap
            );
        }
        // values repeat with the 3-round similarity cycle
        for k in 3..10 {
            assert!((ratios[k] - ratios[k - 3]).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_size_function_monotone_under_refinement() {
        let coarse = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [2, 2, 2]).unwrap();
        let fine = coarse.bisect(&(0..12).collect::<Vec<_>>()).unwrap();
        let coarse_h = coarse.size_function();
        for leaf in 0..fine.n_elements() {
            let hf = fine.element_geometry(leaf).h;
            let anc = fine.ancestor_leaf_in(&coarse, leaf).unwrap();
            assert!(hf <= coarse_h[anc] + 1e-14);
        }
    }

    #[test]
    fn closure_limit_error_signals_tag_trouble() {
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        let mut m = mesh.clone();
        m.set_closure_limit(0);
        let err = m.refine_in_place(&[0], 1).unwrap_err();
        assert!(matches!(err, Error::ClosureDepthExceeded { limit: 0 }));
    }

    #[test]
    fn bisect_rejects_bad_ids() {
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        assert!(mesh.bisect(&[99]).is_err());
        assert!(mesh.bisect_times(&[0], 0).is_err());
    }

    #[test]
    fn randomized_marking_stays_conforming() {
        // deterministic splitmix64 so the fuzz is reproducible
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        let mut mesh =
            build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        for round in 0..30 {
            let n = mesh.n_elements();
            let count = 1 + (next() as usize) % 3;
            let marked: Vec<usize> = (0..count).map(|_| (next() as usize) % n).collect();
            mesh = mesh.bisect(&marked).unwrap();
            assert!(mesh.is_conforming(), "round {round}");
            if round % 5 == 0 {
                mesh.audit_conformity().unwrap();
                mesh.check_nestedness().unwrap();
            }
        }
        mesh.audit_conformity().unwrap();
    }
}
