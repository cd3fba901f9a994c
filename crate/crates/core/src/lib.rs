//! Adaptive tetrahedral finite elements for constrained nonlinear eigenvalue
//! problems of the form `(-a Lap + V + N(u^2)) u = lambda u`, `int u^2 = Z`,
//! with residual a posteriori error indicators, marked-tetrahedron bisection
//! and the Solve -> Estimate -> Mark -> Refine loop. Ships Gross-Pitaevskii
//! and Thomas-Fermi-von Weizsaecker (helium) models.
//!
//! The numerics are generic over the scalar type via [`scalar::Real`]
//! (`f32`/`f64`); the concrete `f64` aliases below are what the CLI and the
//! acceptance runs use.

pub mod assembly;
pub mod dense;
pub mod error;
pub mod fespace;
pub mod geom;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases.
pub type Mesh64 = mesh::Mesh<f64>;
pub type BoxDomain64 = mesh::BoxDomain<f64>;
pub type FESpace64 = fespace::FESpace<f64>;
pub type FEFunction64 = fespace::FEFunction<f64>;
pub type ProblemModel64 = model::ProblemModel<f64>;
pub type QuadField64 = assembly::QuadField<f64>;
