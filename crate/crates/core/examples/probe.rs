use afem::assembly::{assemble_hamiltonian, assemble_mass, QuadField};
use afem::dense::smallest_generalized;
use afem::fespace::{FESpace, FEFunction};
use afem::mesh::{build_box_mesh, BoxDomain};
use afem::model::make_gpe_model;
use afem::solver::{scf_solve, smallest_eigenpair, ScfOptions};
use std::sync::Arc;

fn main() {
    let domain = BoxDomain::new([[-8.0, 8.0], [-6.0, 6.0], [-4.0, 4.0]]).unwrap();
    let model = make_gpe_model(50.0, [1.0, 2.0, 4.0], domain).unwrap();
    let coarse_mesh = build_box_mesh::<f64>([[-8.0, 8.0], [-6.0, 6.0], [-4.0, 4.0]], [4, 3, 2]).unwrap();
    let fine_mesh = Arc::new(coarse_mesh.refine_uniform(3).unwrap());
    let fine = FESpace::build(fine_mesh, 1, None).unwrap();
    println!("fine: {} dofs, {} free", fine.n_dofs, fine.n_free_dofs());

    // run SCF without warm start to its fixed point, extract final density
    let opts = ScfOptions { max_iter: 200, ..Default::default() };
    let r = scf_solve(&model, &fine, &opts, None);
    let u = match r { Ok(p) => { println!("scf ok lambda {}", p.lambda); p.u },
        Err(e) => { println!("scf failed ({})", &format!("{e}")[..60]); return; } };
    let _ = u;
}
