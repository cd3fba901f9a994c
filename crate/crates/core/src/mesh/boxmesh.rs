//! Initial meshes: Kuhn split of a box grid.

use super::{BoxDomain, Mesh};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Build a conforming tetrahedral mesh of an axis-aligned box: each cell of
/// the `divisions` grid is split into the six Kuhn tetrahedra along the cell
/// diagonal, every tetrahedron tagged so that recursive bisection stays
/// conforming (all cells share the same diagonal orientation).
pub fn build_box_mesh<T: Real>(
    intervals: [[T; 2]; 3],
    divisions: [usize; 3],
) -> Result<Mesh<T>> {
    let domain = BoxDomain::new(intervals)?;
    if divisions.iter().any(|&d| d == 0) {
        return Err(Error::Mesh("divisions must be >= 1 in every direction".into()));
    }
    let [nx, ny, nz] = divisions;
    let vertex_id = |i: usize, j: usize, k: usize| -> u32 {
        (i + (nx + 1) * (j + (ny + 1) * k)) as u32
    };

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let f = |lo: T, hi: T, idx: usize, n: usize| {
                    // exact endpoints so boundary detection is robust
                    if idx == 0 {
                        lo
                    } else if idx == n {
                        hi
                    } else {
                        lo + (hi - lo) * T::of(idx as f64 / n as f64)
                    }
                };
                vertices.push([
                    f(domain.lo[0], domain.hi[0], i, nx),
                    f(domain.lo[1], domain.hi[1], j, ny),
                    f(domain.lo[2], domain.hi[2], k, nz),
                ]);
            }
        }
    }

    // The six permutations of unit steps define the Kuhn tetrahedra
    // (v0 = cell corner, v3 = opposite corner); the shared refinement edge
    // of all six is the cell diagonal (tag 3).
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS.iter() {
                    let mut idx = [i, j, k];
                    let mut vs = [vertex_id(i, j, k), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        idx[axis] += 1;
                        vs[step + 1] = vertex_id(idx[0], idx[1], idx[2]);
                    }
                    tets.push((vs, 3u8));
                }
            }
        }
    }

    Mesh::from_parts(vertices, tets, Some(domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_kuhn_split() {
        let mesh = build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).unwrap();
        assert_eq!(mesh.n_elements(), 6);
        assert_eq!(mesh.n_vertices(), 8);
        mesh.audit_conformity().unwrap();
        assert!((mesh.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn example_box_element_count() {
        // divisions (8,6,4) on [-8,8]x[-6,6]x[-4,4]: 192 cells, 6 tets each
        let mesh =
            build_box_mesh::<f64>([[-8.0, 8.0], [-6.0, 6.0], [-4.0, 4.0]], [8, 6, 4]).unwrap();
        assert_eq!(mesh.n_elements(), 1152);
        assert_eq!(mesh.n_vertices(), 9 * 7 * 5);
        mesh.audit_conformity().unwrap();
    }

    #[test]
    fn congruent_cells_share_shape_ratio() {
        let mesh = build_box_mesh::<f64>([[0.0, 2.0], [0.0, 1.0], [0.0, 1.0]], [2, 1, 1]).unwrap();
        assert_eq!(mesh.n_elements(), 12);
        // independent oracle: recompute h and rho from raw coordinates
        let ratios: Vec<f64> = (0..mesh.n_elements())
            .map(|i| {
                let ids = mesh.element_vertex_ids(i);
                let c: Vec<[f64; 3]> = ids.iter().map(|&v| mesh.vertex(v)).collect();
                let mut h: f64 = 0.0;
                for a in 0..4 {
                    for b in (a + 1)..4 {
                        let d: f64 = (0..3).map(|k| (c[a][k] - c[b][k]).powi(2)).sum();
                        h = h.max(d.sqrt());
                    }
                }
                let vol = {
                    let e = |p: usize, k: usize| c[p][k] - c[0][k];
                    ((e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
                        - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
                        + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0)))
                        / 6.0)
                        .abs()
                };
                let tri = |p: usize, q: usize, r: usize| {
                    let u: Vec<f64> = (0..3).map(|k| c[q][k] - c[p][k]).collect();
                    let v: Vec<f64> = (0..3).map(|k| c[r][k] - c[p][k]).collect();
                    let cx = u[1] * v[2] - u[2] * v[1];
                    let cy = u[2] * v[0] - u[0] * v[2];
                    let cz = u[0] * v[1] - u[1] * v[0];
                    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
                };
                let s = tri(1, 2, 3) + tri(0, 2, 3) + tri(0, 1, 3) + tri(0, 1, 2);
                h / (6.0 * vol / s)
            })
            .collect();
        let (min, max) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        assert!((max - min) / max < 1e-12, "ratios {min}..{max}");
        // cross-check the library geometry against the oracle
        for (i, &r) in ratios.iter().enumerate() {
            let g = mesh.element_geometry(i);
            assert!((g.shape_ratio() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(build_box_mesh::<f64>([[0.0, 0.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).is_err());
        assert!(build_box_mesh::<f64>([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], [1, 1, 1]).is_err());
        assert!(build_box_mesh::<f64>([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [0, 1, 1]).is_err());
    }
}
