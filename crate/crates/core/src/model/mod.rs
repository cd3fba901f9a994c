//! Problem definitions: coefficients, local and nonlocal nonlinearities,
//! energy and eigenvalue-energy formulas, and the built-in models.

pub mod lda;

use crate::assembly::HartreeField;
use crate::error::{Error, Result};
use crate::fespace::FEFunction;
use crate::geom::{self, Point3};
use crate::mesh::BoxDomain;
use crate::scalar::Real;

pub use lda::v_xc as eval_vxc;

/// C_TF = (3/10)(3 pi^2)^(2/3).
pub fn thomas_fermi_constant<T: Real>() -> T {
    T::of(0.3) * (T::of(3.0) * T::PI() * T::PI()).powf(T::of(2.0 / 3.0))
}

#[derive(Debug, Clone, Copy)]
pub enum Potential<T: Real> {
    Zero,
    /// V = (gx^2 x^2 + gy^2 y^2 + gz^2 z^2) / 2.
    Harmonic { gamma: [T; 3] },
    /// V = -charge / |x - center|.
    CoulombNucleus { charge: T, center: Point3<T> },
    Custom(fn(Point3<T>) -> T),
}

impl<T: Real> Potential<T> {
    pub fn eval(&self, p: Point3<T>) -> T {
        match self {
            Potential::Zero => T::zero(),
            Potential::Harmonic { gamma } => {
                T::of(0.5)
                    * (gamma[0] * gamma[0] * p[0] * p[0]
                        + gamma[1] * gamma[1] * p[1] * p[1]
                        + gamma[2] * gamma[2] * p[2] * p[2])
            }
            Potential::CoulombNucleus { charge, center } => {
                -*charge / geom::dist(p, *center)
            }
            Potential::Custom(f) => f(p),
        }
    }
}

/// Local nonlinearity N1 with derivative, antiderivative E(s) = int_0^s N1,
/// and the recorded growth exponents (p1 for N1, p2 for N1').
#[derive(Debug, Clone, Copy)]
pub enum LocalNonlinearity<T: Real> {
    None,
    /// N1(rho) = beta rho (cubic term in the wavefunction).
    Cubic { beta: T },
    /// N1(rho) = (5/3) C_TF rho^(2/3) + v_xc(rho).
    TfwLda,
    Custom {
        eval: fn(T) -> T,
        deriv: fn(T) -> T,
        antideriv: fn(T) -> T,
        p1: f64,
        p2: f64,
    },
}

impl<T: Real> LocalNonlinearity<T> {
    pub fn eval(&self, rho: T) -> T {
        match self {
            LocalNonlinearity::None => T::zero(),
            LocalNonlinearity::Cubic { beta } => *beta * rho,
            LocalNonlinearity::TfwLda => {
                let r = rho.max(T::zero());
                T::of(5.0 / 3.0) * thomas_fermi_constant::<T>() * r.powf(T::of(2.0 / 3.0))
                    + lda::v_xc(r)
            }
            LocalNonlinearity::Custom { eval, .. } => eval(rho),
        }
    }

    pub fn eval_deriv(&self, rho: T) -> T {
        match self {
            LocalNonlinearity::None => T::zero(),
            LocalNonlinearity::Cubic { beta } => *beta,
            LocalNonlinearity::TfwLda => {
                let r = rho.max(T::zero());
                if r == T::zero() {
                    return T::zero();
                }
                T::of(10.0 / 9.0) * thomas_fermi_constant::<T>() * r.powf(T::of(-1.0 / 3.0))
                    + lda::v_xc_deriv(r)
            }
            LocalNonlinearity::Custom { deriv, .. } => deriv(rho),
        }
    }

    /// E(s) = int_0^s N1(t) dt.
    pub fn antideriv(&self, s: T) -> T {
        match self {
            LocalNonlinearity::None => T::zero(),
            LocalNonlinearity::Cubic { beta } => *beta * s * s * T::of(0.5),
            LocalNonlinearity::TfwLda => {
                let r = s.max(T::zero());
                thomas_fermi_constant::<T>() * r.powf(T::of(5.0 / 3.0))
                    + lda::v_xc_antideriv(r)
            }
            LocalNonlinearity::Custom { antideriv, .. } => antideriv(s),
        }
    }

    /// Recorded growth exponents (p1, p2) for the assumption audit. For the
    /// TFW functional these describe the large-density growth.
    pub fn growth_exponents(&self) -> (f64, f64) {
        match self {
            LocalNonlinearity::None => (0.0, 0.0),
            LocalNonlinearity::Cubic { .. } => (1.0, 0.0),
            LocalNonlinearity::TfwLda => (2.0 / 3.0, 0.0),
            LocalNonlinearity::Custom { p1, p2, .. } => (*p1, *p2),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LocalNonlinearity::None => true,
            LocalNonlinearity::Cubic { beta } => *beta == T::zero(),
            _ => false,
        }
    }
}

/// Convolution kernel of the nonlocal term.
#[derive(Debug, Clone, Copy)]
pub enum Kernel<T: Real> {
    /// K(x) = 1 / |x|.
    Coulomb,
    /// Radially sampled custom kernel K(|x|).
    Custom(fn(T) -> T),
}

/// How the Hartree-type convolution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HartreeStrategy {
    /// -Lap phi = 4 pi rho^q with monopole Dirichlet boundary data
    /// (near-linear cost; Coulomb kernel only).
    Poisson,
    /// Double quadrature with a regularized near-field (quadratic cost; the
    /// small-mesh oracle).
    Direct,
}

/// Nonlocal term N2(rho) = rho^(q-1) * int rho^q(y) K(. - y) dy.
#[derive(Debug, Clone, Copy)]
pub struct NonlocalSpec<T: Real> {
    pub kernel: Kernel<T>,
    pub q: T,
    pub strategy: HartreeStrategy,
}

#[derive(Debug, Clone)]
pub struct ProblemModel<T: Real> {
    pub name: String,
    pub alpha: T,
    pub z: T,
    pub potential: Potential<T>,
    pub local: LocalNonlinearity<T>,
    pub nonlocal: Option<NonlocalSpec<T>>,
    pub domain: BoxDomain<T>,
}

impl<T: Real> ProblemModel<T> {
    /// No density dependence at all: a single linearized solve is exact.
    pub fn is_linear(&self) -> bool {
        self.local.is_zero() && self.nonlocal.is_none()
    }

    pub fn with_hartree_strategy(mut self, strategy: HartreeStrategy) -> Self {
        if let Some(spec) = &mut self.nonlocal {
            spec.strategy = strategy;
        }
        self
    }
}

/// Gross-Pitaevskii: (-1/2 Lap + V + beta u^2) u = lambda u, |u|_0^2 = 1,
/// with the anisotropic harmonic trap V = (gx^2 x^2 + ...) / 2.
pub fn make_gpe_model<T: Real>(
    beta: T,
    gamma: [T; 3],
    domain: BoxDomain<T>,
) -> Result<ProblemModel<T>> {
    if beta < T::zero() {
        return Err(Error::Model("gpe interaction beta must be >= 0".into()));
    }
    Ok(ProblemModel {
        name: "gpe".into(),
        alpha: T::of(0.5),
        z: T::one(),
        potential: Potential::Harmonic { gamma },
        local: LocalNonlinearity::Cubic { beta },
        nonlocal: None,
        domain,
    })
}

/// TFW orbital-free model for a helium atom at the origin:
/// -(1/10) Lap u - (2/|x|) u + (Hartree + (5/3) C_TF u^(4/3) + vxc(u^2)) u
/// = lambda u with |u|_0^2 = 2.
pub fn make_tfw_helium_model<T: Real>(domain: BoxDomain<T>) -> Result<ProblemModel<T>> {
    let origin = [T::zero(); 3];
    if !domain.contains_strict(origin) {
        return Err(Error::Model(
            "the nucleus (origin) must lie strictly inside the box".into(),
        ));
    }
    Ok(ProblemModel {
        name: "tfw_helium".into(),
        alpha: T::of(0.1),
        z: T::of(2.0),
        potential: Potential::CoulombNucleus {
            charge: T::of(2.0),
            center: origin,
        },
        local: LocalNonlinearity::TfwLda,
        nonlocal: Some(NonlocalSpec {
            kernel: Kernel::Coulomb,
            q: T::one(),
            strategy: HartreeStrategy::Poisson,
        }),
        domain,
    })
}

/// Linear eigenvalue model (N = 0) with a chosen potential.
pub fn make_linear_model<T: Real>(
    alpha: T,
    z: T,
    potential: Potential<T>,
    domain: BoxDomain<T>,
) -> Result<ProblemModel<T>> {
    if alpha <= T::zero() || z <= T::zero() {
        return Err(Error::Model("alpha and Z must be positive".into()));
    }
    Ok(ProblemModel {
        name: "linear".into(),
        alpha,
        z,
        potential,
        local: LocalNonlinearity::None,
        nonlocal: None,
        domain,
    })
}

/// Total energy E(u) = int alpha |grad u|^2 + V u^2 + E(u^2) + D_K/(2q).
/// `hartree` must be supplied exactly when the model has a nonlocal term and
/// must have been computed from this u's density.
pub fn energy<T: Real>(
    model: &ProblemModel<T>,
    u: &FEFunction<T>,
    hartree: Option<&HartreeField<T>>,
) -> Result<T> {
    match (&model.nonlocal, hartree) {
        (Some(_), None) => {
            return Err(Error::Model(
                "model has a nonlocal term: a Hartree field is required".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(Error::Model(
                "model has no nonlocal term but a Hartree field was supplied".into(),
            ))
        }
        _ => {}
    }
    let space = &u.space;
    let rule = &space.volume_rule;
    let mut e = T::zero();
    for leaf in 0..space.mesh.n_elements() {
        let geo = space.mesh.element_geometry(leaf);
        for (q, &b) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * geo.volume;
            let (v, g) = u.value_and_grad(leaf, b, &geo);
            let rho = v * v;
            let x = geo.point_from_bary(b);
            e += w
                * (model.alpha * geom::dot(g, g)
                    + model.potential.eval(x) * rho
                    + model.local.antideriv(rho));
        }
    }
    if let (Some(spec), Some(h)) = (&model.nonlocal, hartree) {
        let dk = d_k_of(model, u, h, spec.q);
        e += dk / (T::of(2.0) * spec.q);
    }
    Ok(e)
}

/// D_K(rho^q, rho^q) = int rho^q phi evaluated with the same quadrature and
/// phi field as the rest of the pipeline.
fn d_k_of<T: Real>(
    _model: &ProblemModel<T>,
    u: &FEFunction<T>,
    hartree: &HartreeField<T>,
    q: T,
) -> T {
    let space = &u.space;
    let rule = &space.volume_rule;
    let mut dk = T::zero();
    for leaf in 0..space.mesh.n_elements() {
        let geo = space.mesh.element_geometry(leaf);
        for (k, &b) in rule.points.iter().enumerate() {
            let w = rule.weights[k] * geo.volume;
            let v = u.value(leaf, b);
            let rho_q = (v * v).max(T::zero()).powf(q);
            dk += w * rho_q * hartree.at_quad.at(leaf, k);
        }
    }
    dk
}

/// Eigenvalue from the energy:
/// Z lambda = E + int (N1(rho) rho - E(rho)) + (1 - 1/(2q)) D_K.
pub fn lambda_from_energy<T: Real>(
    model: &ProblemModel<T>,
    u: &FEFunction<T>,
    e: T,
    hartree: Option<&HartreeField<T>>,
) -> Result<T> {
    let norm_sq = u.l2_norm_sq();
    let rel = ((norm_sq - model.z) / model.z).abs();
    if rel > T::of(1e-8) {
        return Err(Error::Model(format!(
            "wavefunction norm^2 {:?} deviates from Z {:?} by {:?} relative",
            norm_sq.to_f64_lossy(),
            model.z.to_f64_lossy(),
            rel.to_f64_lossy()
        )));
    }
    let space = &u.space;
    let rule = &space.volume_rule;
    let mut correction = T::zero();
    for leaf in 0..space.mesh.n_elements() {
        let geo = space.mesh.element_geometry(leaf);
        for (k, &b) in rule.points.iter().enumerate() {
            let w = rule.weights[k] * geo.volume;
            let v = u.value(leaf, b);
            let rho = v * v;
            correction += w * (model.local.eval(rho) * rho - model.local.antideriv(rho));
        }
    }
    let mut zl = e + correction;
    if let (Some(spec), Some(h)) = (&model.nonlocal, hartree) {
        let dk = d_k_of(model, u, h, spec.q);
        zl += (T::one() - T::one() / (T::of(2.0) * spec.q)) * dk;
    } else if model.nonlocal.is_some() {
        return Err(Error::Model(
            "model has a nonlocal term: a Hartree field is required".into(),
        ));
    }
    Ok(zl / model.z)
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AssumptionReport {
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Report-only audit of the model assumptions: recorded growth exponents,
/// kernel range and positivity, potential sampling. The coercivity-type
/// condition on the energy functional is recorded as assumed, not verified.
pub fn audit_assumptions<T: Real>(model: &ProblemModel<T>) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let mut check = |name: &str, passed: bool, detail: String| {
        report.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    };

    check(
        "alpha_positive",
        model.alpha > T::zero(),
        format!("alpha = {:?}", model.alpha.to_f64_lossy()),
    );
    check(
        "z_positive",
        model.z > T::zero(),
        format!("Z = {:?}", model.z.to_f64_lossy()),
    );

    let (p1, p2) = model.local.growth_exponents();
    check(
        "p1_in_range",
        (0.0..2.0).contains(&p1),
        format!("p1 = {p1} (required [0, 2))"),
    );
    check(
        "p2_in_range",
        (0.0..1.0).contains(&p2),
        format!("p2 = {p2} (required [0, 1))"),
    );

    if let Some(spec) = &model.nonlocal {
        let q = spec.q.to_f64_lossy();
        check(
            "q_in_range",
            (1.0..1.5).contains(&q),
            format!("q = {q} (required [1, 3/2))"),
        );
        let mut nonneg = true;
        let mut worst = f64::INFINITY;
        for k in -6..=6 {
            let r = T::of(10f64.powi(k) * 0.73);
            let val = match spec.kernel {
                Kernel::Coulomb => T::one() / r,
                Kernel::Custom(f) => f(r),
            };
            worst = worst.min(val.to_f64_lossy());
            if val < T::zero() {
                nonneg = false;
            }
        }
        check(
            "kernel_nonnegative",
            nonneg,
            format!("min sampled kernel value {worst:.3e}"),
        );
    }

    // V sampled at pseudo-random interior points (the nucleus sits on a mesh
    // vertex, never on a quadrature node, so finite samples are meaningful)
    let mut state = 0x51ed2701u64;
    let mut rand01 = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (2f64.powi(31))
    };
    let mut v_ok = true;
    for _ in 0..64 {
        let p = [
            model.domain.lo[0] + model.domain.extent(0) * T::of(rand01()),
            model.domain.lo[1] + model.domain.extent(1) * T::of(rand01()),
            model.domain.lo[2] + model.domain.extent(2) * T::of(rand01()),
        ];
        if !model.potential.eval(p).is_finite() {
            v_ok = false;
        }
    }
    check(
        "potential_finite_at_samples",
        v_ok,
        "V sampled at 64 pseudo-random interior points".into(),
    );

    report.notes.push(
        "growth condition on the energy density (coercivity constant vs the \
         gradient-quotient infimum): assumed, not verified"
            .into(),
    );
    if matches!(model.local, LocalNonlinearity::TfwLda) {
        report.notes.push(
            "TFW: recorded exponents describe large-density growth; N1' \
             diverges like rho^(-1/3) as rho -> 0"
                .into(),
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_hamiltonian, assemble_mass, QuadField};
    use crate::fespace::FESpace;
    use crate::mesh::build_box_mesh;
    use std::sync::Arc;

    fn gpe_box() -> BoxDomain<f64> {
        BoxDomain::new([[-8.0, 8.0], [-6.0, 6.0], [-4.0, 4.0]]).unwrap()
    }

    #[test]
    fn gpe_model_fields() {
        let m = make_gpe_model(200.0, [1.0, 2.0, 4.0], gpe_box()).unwrap();
        assert_eq!(m.alpha, 0.5);
        assert_eq!(m.z, 1.0);
        assert!(m.nonlocal.is_none());
        // potential at (1,1,1): (1 + 4 + 16)/2 = 10.5
        assert!((m.potential.eval([1.0, 1.0, 1.0]) - 10.5).abs() < 1e-14);
        assert!((m.local.eval(2.0) - 400.0).abs() < 1e-12);
        assert!((m.local.antideriv(2.0) - 400.0).abs() < 1e-12);

        let lin = make_gpe_model(0.0, [1.0, 2.0, 4.0], gpe_box()).unwrap();
        assert!(lin.is_linear());
        assert_eq!(lin.local.eval(3.0), 0.0);
        assert_eq!(lin.local.antideriv(3.0), 0.0);
        assert!(make_gpe_model(-1.0, [1.0, 1.0, 1.0], gpe_box()).is_err());
    }

    #[test]
    fn tfw_model_fields() {
        let domain: BoxDomain<f64> = BoxDomain::new([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]).unwrap();
        let m = make_tfw_helium_model(domain).unwrap();
        assert_eq!(m.alpha, 0.1);
        assert_eq!(m.z, 2.0);
        let ctf: f64 = thomas_fermi_constant();
        assert!((ctf - 2.871234000188191).abs() < 1e-12);
        // V at unit distance from the nucleus
        assert!((m.potential.eval([1.0, 0.0, 0.0]) + 2.0).abs() < 1e-14);
        // the TF part of the antiderivative is exactly C_TF rho^(5/3)
        for s in [0.01f64, 0.3, 2.0] {
            let tf_part = m.local.antideriv(s) - lda::v_xc_antideriv(s);
            assert!((tf_part - ctf * s.powf(5.0 / 3.0)).abs() < 1e-10 * (1.0 + tf_part.abs()));
        }
        // nucleus outside the box is rejected
        let bad = BoxDomain::new([[1.0, 2.0], [-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        assert!(make_tfw_helium_model(bad).is_err());
    }

    #[test]
    fn local_antiderivative_consistency() {
        let m = make_tfw_helium_model(
            BoxDomain::new([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]).unwrap(),
        )
        .unwrap();
        for k in 0..23 {
            let s = 1e-8 * 10f64.powf(0.5 * k as f64);
            let d = s * 1e-4;
            let fd = (m.local.antideriv(s + d) - m.local.antideriv(s - d)) / (2.0 * d);
            let n1 = m.local.eval(s);
            assert!(
                ((fd - n1) / n1.abs().max(1e-12)).abs() < 1e-6,
                "s = {s}: fd {fd} vs N1 {n1}"
            );
        }
    }

    #[test]
    fn audit_gpe_tfw_and_bad_q() {
        let gpe = make_gpe_model(200.0, [1.0, 2.0, 4.0], gpe_box()).unwrap();
        let rep = audit_assumptions(&gpe);
        assert!(rep.all_passed(), "{:?}", rep.checks);
        assert_eq!(gpe.local.growth_exponents().0, 1.0);

        let tfw = make_tfw_helium_model(
            BoxDomain::new([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]).unwrap(),
        )
        .unwrap();
        let rep = audit_assumptions(&tfw);
        assert!(rep.all_passed(), "{:?}", rep.checks);
        assert!((tfw.local.growth_exponents().0 - 2.0 / 3.0).abs() < 1e-15);

        let mut bad = tfw.clone();
        bad.nonlocal.as_mut().unwrap().q = 1.6;
        let rep = audit_assumptions(&bad);
        assert!(!rep.all_passed());
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name == "q_in_range" && !c.passed));
    }

    fn sine_product_setup(
        degree: usize,
        divisions: usize,
    ) -> (Arc<FESpace<f64>>, FEFunction<f64>) {
        let mesh = build_box_mesh::<f64>(
            [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
            [divisions, divisions, divisions],
        )
        .unwrap();
        let space = FESpace::build(Arc::new(mesh), degree, None).unwrap();
        let pi = std::f64::consts::PI;
        let mut u = FEFunction::interpolate(space.clone(), |p| {
            (pi * p[0]).sin() * (pi * p[1]).sin() * (pi * p[2]).sin()
        })
        .unwrap();
        let scale = 1.0 / u.l2_norm_sq().sqrt();
        u.coeffs.iter_mut().for_each(|c| *c *= scale);
        (space, u)
    }

    #[test]
    fn energy_of_dirichlet_ground_mode() {
        let domain = BoxDomain::new([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        let model = make_linear_model(1.0, 1.0, Potential::Zero, domain).unwrap();
        let exact = 3.0 * std::f64::consts::PI.powi(2);
        let mut errs = Vec::new();
        for div in [4usize, 8] {
            let (_, u) = sine_product_setup(1, div);
            let e = energy(&model, &u, None).unwrap();
            errs.push((e - exact).abs());
        }
        // one h-halving drops the Rayleigh-quotient error ~4x
        let ratio = errs[0] / errs[1];
        assert!((2.5..6.0).contains(&ratio), "errors {errs:?}");
        assert!(errs[1] / exact < 0.10, "errors {errs:?}");

        // zero function has zero energy for local-only models
        let (space, _) = sine_product_setup(1, 2);
        let zero = FEFunction::zeros(space);
        assert_eq!(energy(&model, &zero, None).unwrap(), 0.0);
    }

    #[test]
    fn gpe_energy_with_quartic_term() {
        // alpha = 1/2, V = 0, N1 = rho: E -> 3 pi^2 / 2 + (1/2) * 27/8
        let domain = BoxDomain::new([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        let model = ProblemModel {
            name: "test".into(),
            alpha: 0.5,
            z: 1.0,
            potential: Potential::Zero,
            local: LocalNonlinearity::Cubic { beta: 1.0 },
            nonlocal: None,
            domain,
        };
        let exact = 1.5 * std::f64::consts::PI.powi(2) + 27.0 / 16.0;
        let (_, u) = sine_product_setup(2, 6);
        let e = energy(&model, &u, None).unwrap();
        assert!(
            (e - exact).abs() / exact < 0.01,
            "E = {e}, expected -> {exact}"
        );
    }

    #[test]
    fn lambda_from_energy_identities() {
        let domain = BoxDomain::new([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        // linear model: lambda = E / Z exactly
        let lin = make_linear_model(0.5, 1.0, Potential::Zero, domain).unwrap();
        let (_, u) = sine_product_setup(1, 4);
        let e = energy(&lin, &u, None).unwrap();
        let l = lambda_from_energy(&lin, &u, e, None).unwrap();
        assert!((l - e).abs() < 1e-14 * e.abs());

        // GPE beta = 1: lambda - E = (beta/2) int u^4, exact in quadrature
        let gpe = ProblemModel {
            name: "test".into(),
            alpha: 0.5,
            z: 1.0,
            potential: Potential::Zero,
            local: LocalNonlinearity::Cubic { beta: 1.0 },
            nonlocal: None,
            domain,
        };
        let (space, u) = sine_product_setup(2, 4);
        let e = energy(&gpe, &u, None).unwrap();
        let l = lambda_from_energy(&gpe, &u, e, None).unwrap();
        let quart = QuadField::density_of(&u).map(|r| r * r).integral(&space);
        assert!(
            ((l - e) - 0.5 * quart).abs() < 1e-10 * l.abs(),
            "lambda - E = {} vs {}",
            l - e,
            0.5 * quart
        );
        // against the analytic limit 27/16 on a fine-enough mesh
        assert!((quart - 27.0 / 8.0).abs() / (27.0 / 8.0) < 0.02);

        // norm deviation is rejected
        let mut bad = u.clone();
        bad.coeffs.iter_mut().for_each(|c| *c *= 1.001);
        assert!(lambda_from_energy(&gpe, &bad, e, None).is_err());
    }

    #[test]
    fn tfw_lambda_matches_rayleigh_quotient() {
        let domain = BoxDomain::new([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]).unwrap();
        let model = make_tfw_helium_model(domain)
            .unwrap()
            .with_hartree_strategy(HartreeStrategy::Direct);
        let mesh = build_box_mesh::<f64>([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]], [2, 2, 2]).unwrap();
        let space = FESpace::build(Arc::new(mesh), 1, None).unwrap();
        let mut u = FEFunction::interpolate(space.clone(), |p| {
            (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp()
        })
        .unwrap();
        u.zero_boundary();
        let scale = (2.0 / u.l2_norm_sq()).sqrt();
        u.coeffs.iter_mut().for_each(|c| *c *= scale);

        let rho = QuadField::density_of(&u);
        let (h, hartree) = assemble_hamiltonian(&model, &space, &rho).unwrap();
        let m = assemble_mass(&space, None);
        let hu = h.matvec_alloc(&u.coeffs);
        let mu = m.matvec_alloc(&u.coeffs);
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
        let lambda_rayleigh = dot(&u.coeffs, &hu) / dot(&u.coeffs, &mu);

        let e = energy(&model, &u, hartree.as_ref()).unwrap();
        let lambda_e = lambda_from_energy(&model, &u, e, hartree.as_ref()).unwrap();
        assert!(
            (lambda_e - lambda_rayleigh).abs() < 1e-9 * lambda_rayleigh.abs().max(1.0),
            "energy route {lambda_e} vs rayleigh {lambda_rayleigh}"
        );
    }

    #[test]
    fn energy_requires_matching_hartree() {
        let domain = BoxDomain::new([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]]).unwrap();
        let model = make_tfw_helium_model(domain).unwrap();
        let mesh = build_box_mesh::<f64>([[-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0]], [1, 1, 1]).unwrap();
        let space = FESpace::build(Arc::new(mesh), 1, None).unwrap();
        let u = FEFunction::zeros(space);
        assert!(energy(&model, &u, None).is_err());
    }
}
