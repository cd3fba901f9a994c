//! Quadrature on reference simplices.
//!
//! Rules are conical (Stroud) products of Gauss-Jacobi lines, so all weights
//! are positive and any polynomial degree is available without tables. Points
//! are stored in barycentric coordinates and weights are normalized to sum to
//! one (reference-volume normalized); an integral over a physical element is
//! `volume * sum_q w_q f(x_q)`.

use crate::dense::jacobi_eigh;
use crate::scalar::Real;

/// Quadrature rule on the reference simplex with `N` barycentric coordinates
/// (`N = 4`: tetrahedron, `N = 3`: triangle).
#[derive(Debug, Clone)]
pub struct QuadratureRule<T, const N: usize> {
    /// Declared polynomial exactness degree.
    pub degree: usize,
    pub points: Vec<[T; N]>,
    /// Positive weights summing to one.
    pub weights: Vec<T>,
}

impl<T: Real, const N: usize> QuadratureRule<T, N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss nodes/weights for the weight (1-x)^alpha on [0, 1], exact for
/// polynomials up to degree 2m - 1. Weights sum to 1 / (alpha + 1).
pub fn gauss_jacobi_01<T: Real>(m: usize, alpha: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1);
    let a = alpha as f64;
    // Recurrence coefficients of orthonormal Jacobi polynomials (beta = 0)
    // on [-1, 1], assembled into the Golub-Welsch tridiagonal matrix.
    let n = m;
    let mut tri = vec![T::zero(); n * n];
    for k in 0..n {
        let kk = k as f64;
        let diag = if k == 0 {
            -a / (a + 2.0)
        } else {
            -(a * a) / ((2.0 * kk + a) * (2.0 * kk + a + 2.0))
        };
        tri[k * n + k] = T::of(diag);
        if k >= 1 {
            let num = 2.0 * kk * (kk + a);
            let den = (2.0 * kk + a) * ((2.0 * kk + a + 1.0) * (2.0 * kk + a - 1.0)).sqrt();
            let b = num / den;
            tri[k * n + (k - 1)] = T::of(b);
            tri[(k - 1) * n + k] = T::of(b);
        }
    }
    let (vals, vecs) = jacobi_eigh(&tri, n);
    let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
    let half = T::of(0.5);
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for k in 0..n {
        // map t in [-1,1] to x in [0,1] with 1 - x = (1 - t)/2
        xs.push((T::one() + vals[k]) * half);
        let v0 = vecs[k]; // first component of eigenvector k
        let w = T::of(mu0) * v0 * v0 * T::of(2f64.powf(-(a + 1.0)));
        ws.push(w);
    }
    (xs, ws)
}

/// Gauss-Legendre nodes/weights on [0, 1] (weights sum to 1).
pub fn gauss_legendre_01<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    gauss_jacobi_01(m, 0)
}

/// Conical-product rule on the reference tetrahedron, exact to `degree`.
pub fn tet_rule<T: Real>(degree: usize) -> QuadratureRule<T, 4> {
    let m = degree / 2 + 1;
    let (xu, wu) = gauss_jacobi_01::<T>(m, 2);
    let (xv, wv) = gauss_jacobi_01::<T>(m, 1);
    let (xw, ww) = gauss_jacobi_01::<T>(m, 0);
    let mut points = Vec::with_capacity(m * m * m);
    let mut weights = Vec::with_capacity(m * m * m);
    // collapsed map: x = u, y = v(1-u), z = w(1-u)(1-v); Jacobian (1-u)^2 (1-v)
    // is absorbed in the Jacobi weights. Raw weights sum to 1/6.
    for (&u, &cu) in xu.iter().zip(&wu) {
        for (&v, &cv) in xv.iter().zip(&wv) {
            for (&w, &cw) in xw.iter().zip(&ww) {
                let x = u;
                let y = v * (T::one() - u);
                let z = w * (T::one() - u) * (T::one() - v);
                let l0 = T::one() - x - y - z;
                points.push([l0, x, y, z]);
                weights.push(cu * cv * cw * T::of(6.0));
            }
        }
    }
    QuadratureRule {
        degree,
        points,
        weights,
    }
}

/// Conical-product rule on the reference triangle, exact to `degree`.
pub fn tri_rule<T: Real>(degree: usize) -> QuadratureRule<T, 3> {
    let m = degree / 2 + 1;
    let (xu, wu) = gauss_jacobi_01::<T>(m, 1);
    let (xv, wv) = gauss_jacobi_01::<T>(m, 0);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (&u, &cu) in xu.iter().zip(&wu) {
        for (&v, &cv) in xv.iter().zip(&wv) {
            let x = u;
            let y = v * (T::one() - u);
            let l0 = T::one() - x - y;
            points.push([l0, x, y]);
            weights.push(cu * cv * T::of(2.0));
        }
    }
    QuadratureRule {
        degree,
        points,
        weights,
    }
}

/// Exact integral of a barycentric monomial over the reference simplex,
/// normalized so the constant 1 integrates to 1:
/// `dim! * prod(a_i!) / (sum(a_i) + dim)!` with `dim = N - 1`.
pub fn monomial_integral(exponents: &[usize]) -> f64 {
    let dim = exponents.len() - 1;
    let total: usize = exponents.iter().sum();
    let mut val = factorial(dim);
    for &a in exponents {
        val *= factorial(a);
    }
    val / factorial(total + dim)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_monomials<const N: usize>(rule: &QuadratureRule<f64, N>) {
        // all barycentric monomials up to the declared degree
        let mut exps = vec![[0usize; N]];
        for _ in 0..rule.degree {
            let mut next = Vec::new();
            for e in &exps {
                for i in 0..N {
                    let mut f = *e;
                    f[i] += 1;
                    next.push(f);
                }
            }
            exps.extend(next);
        }
        exps.sort();
        exps.dedup();
        for e in exps {
            let total: usize = e.iter().sum();
            if total > rule.degree {
                continue;
            }
            let mut approx = 0.0;
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let mut m = 1.0;
                for i in 0..N {
                    m *= p[i].powi(e[i] as i32);
                }
                approx += w * m;
            }
            let exact = monomial_integral(&e);
            assert!(
                (approx - exact).abs() < 1e-12,
                "monomial {e:?}: quadrature {approx} vs exact {exact}"
            );
        }
    }

    #[test]
    fn gauss_legendre_matches_reference_nodes() {
        // classic 2-point rule on [0,1]: x = 1/2 +- 1/(2 sqrt 3), w = 1/2
        let (x, w) = gauss_legendre_01::<f64>(2);
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-14);
        assert!((x[1] - (0.5 + d)).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn tet_rules_integrate_monomials() {
        for degree in [1, 2, 3, 4, 5, 6, 8] {
            let rule = tet_rule::<f64>(degree);
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "weights must sum to 1");
            assert!(rule.weights.iter().all(|&w| w > 0.0), "positive weights");
            check_monomials(&rule);
        }
    }

    #[test]
    fn tri_rules_integrate_monomials() {
        for degree in [1, 2, 3, 4, 5, 6] {
            let rule = tri_rule::<f64>(degree);
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-13);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            check_monomials(&rule);
        }
    }

    #[test]
    fn points_are_interior() {
        // no quadrature node may sit on a vertex or face of the simplex
        // (singular potentials are sampled at these points)
        let rule = tet_rule::<f64>(6);
        for p in &rule.points {
            for &c in p {
                assert!(c > 1e-6 && c < 1.0);
            }
        }
    }
}
