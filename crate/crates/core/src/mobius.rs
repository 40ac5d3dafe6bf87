//! 2×2 Möbius maps `x ↦ (A x + B)/(C x + D)` and their fixed points.

use num_complex::Complex;

use crate::scalar::Real;

pub type Mat2<T> = [[Complex<T>; 2]; 2];

pub fn identity<T: Real>() -> Mat2<T> {
    let o = Complex::new(T::one(), T::zero());
    let z = Complex::new(T::zero(), T::zero());
    [[o, z], [z, o]]
}

pub fn mul<T: Real>(p: &Mat2<T>, q: &Mat2<T>) -> Mat2<T> {
    [
        [
            p[0][0] * q[0][0] + p[0][1] * q[1][0],
            p[0][0] * q[0][1] + p[0][1] * q[1][1],
        ],
        [
            p[1][0] * q[0][0] + p[1][1] * q[1][0],
            p[1][0] * q[0][1] + p[1][1] * q[1][1],
        ],
    ]
}

pub fn apply<T: Real>(m: &Mat2<T>, x: Complex<T>) -> Complex<T> {
    (m[0][0] * x + m[0][1]) / (m[1][0] * x + m[1][1])
}

/// Finite fixed points (one or two). A map with `C = 0` has `∞` as a fixed point, which is
/// not returned.
pub fn fixed_points<T: Real>(m: &Mat2<T>) -> Vec<Complex<T>> {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let scale = a.norm() + b.norm() + c.norm() + d.norm();
    // C x² + (D - A) x - B = 0
    let qa = c;
    let qb = d - a;
    let qc = -b;
    if qa.norm() <= T::epsilon() * scale {
        if qb.norm() <= T::epsilon() * scale {
            return Vec::new();
        }
        return vec![-qc / qb];
    }
    let disc = (qb * qb - qa * qc * T::lit(4.0)).sqrt();
    let s = if (qb.conj() * disc).re >= T::zero() {
        qb + disc
    } else {
        qb - disc
    };
    let q = -s / T::lit(2.0);
    if q.norm() == T::zero() {
        return vec![Complex::new(T::zero(), T::zero())];
    }
    vec![q / qa, qc / q]
}
