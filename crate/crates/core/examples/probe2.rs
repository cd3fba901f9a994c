use afem::assembly::{assemble_hamiltonian, assemble_mass, QuadField};
use afem::fespace::FESpace;
use afem::mesh::build_box_mesh;
use afem::model::{make_gpe_model, make_linear_model, Potential};
use afem::mesh::BoxDomain;
use afem::solver::{lobpcg_probe};
use std::sync::Arc;

fn main() {
    // linear Laplacian unit cube at several resolutions
    let dom = BoxDomain::new([[0.0,1.0],[0.0,1.0],[0.0,1.0]]).unwrap();
    let lin = make_linear_model(0.5, 1.0, Potential::Zero, dom).unwrap();
    for div in [4usize, 8] {
        let mesh = build_box_mesh::<f64>([[0.0,1.0],[0.0,1.0],[0.0,1.0]], [div,div,div]).unwrap();
        let space = FESpace::build(Arc::new(mesh), 1, None).unwrap();
        let rho = QuadField::zeros(&space);
        let (h,_) = assemble_hamiltonian(&lin, &space, &rho).unwrap();
        let m = assemble_mass(&space, None);
        let (theta, w) = lobpcg_probe(&h, &m, &space.free, 1e-11).unwrap();
        let neg2: f64 = w.iter().filter(|&&c| c<0.0).map(|c|c*c).sum();
        let tot2: f64 = w.iter().map(|c|c*c).sum();
        println!("linear div={div}: theta={theta:.6} negfrac={:.3e}", neg2/tot2);
    }
    // GPE beta=200 example-1 box at increasing resolution, gaussian rho
    let dom = BoxDomain::new([[-8.0,8.0],[-6.0,6.0],[-4.0,4.0]]).unwrap();
    let gpe = make_gpe_model(200.0, [1.0,2.0,4.0], dom).unwrap();
    for lvl in 0..3u32 {
        let mesh = build_box_mesh::<f64>([[-8.0,8.0],[-6.0,6.0],[-4.0,4.0]], [8,6,4]).unwrap();
        let mesh = mesh.refine_uniform(3*lvl).unwrap();
        let space = FESpace::build(Arc::new(mesh), 1, None).unwrap();
        let mut u0 = afem::fespace::FEFunction::interpolate(space.clone(), |p| {
            (-(0.25*p[0]*p[0] + 0.5*p[1]*p[1] + 1.0*p[2]*p[2])).exp()
        }).unwrap();
        u0.zero_boundary();
        let s = (1.0/u0.l2_norm_sq()).sqrt();
        u0.coeffs.iter_mut().for_each(|c| *c *= s);
        let rho = QuadField::density_of(&u0);
        let (h,_) = assemble_hamiltonian(&gpe, &space, &rho).unwrap();
        let m = assemble_mass(&space, None);
        let (theta, w) = lobpcg_probe(&h, &m, &space.free, 1e-11).unwrap();
        let neg2: f64 = w.iter().filter(|&&c| c<0.0).map(|c|c*c).sum();
        let tot2: f64 = w.iter().map(|c|c*c).sum();
        println!("gpe200 lvl={lvl} ({} elems): theta={theta:.6} negfrac={:.3e}", space.mesh.n_elements(), neg2/tot2);
    }
}
