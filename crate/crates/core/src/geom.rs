//! Small fixed-size vector helpers for 3D simplex geometry.

use crate::scalar::Real;

pub type Point3<T> = [T; 3];

#[inline]
pub fn sub<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Point3<T>, s: T) -> Point3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Point3<T>, b: Point3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Point3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist<T: Real>(a: Point3<T>, b: Point3<T>) -> T {
    norm(sub(a, b))
}

#[inline]
pub fn midpoint<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    let half = T::of(0.5);
    [
        (a[0] + b[0]) * half,
        (a[1] + b[1]) * half,
        (a[2] + b[2]) * half,
    ]
}

/// Determinant of the 3x3 matrix with the given columns.
#[inline]
pub fn det3<T: Real>(c0: Point3<T>, c1: Point3<T>, c2: Point3<T>) -> T {
    dot(c0, cross(c1, c2))
}

/// Signed volume of the tetrahedron spanned by four points.
#[inline]
pub fn tet_signed_volume<T: Real>(v: &[Point3<T>; 4]) -> T {
    det3(sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])) / T::of(6.0)
}

/// Area of the triangle spanned by three points.
#[inline]
pub fn tri_area<T: Real>(a: Point3<T>, b: Point3<T>, c: Point3<T>) -> T {
    norm(cross(sub(b, a), sub(c, a))) * T::of(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tet_volume() {
        let v: [[f64; 3]; 4] = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        assert!((tet_signed_volume(&v) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_area() {
        let a: f64 = tri_area([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!((a - 0.5).abs() < 1e-15);
    }
}
