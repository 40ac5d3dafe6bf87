use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_models::{HalfLine, JacobiCoeffs, Side, TailInfo};
use crate::mobius::{self, Mat2};
use crate::scalar::Real;

/// Depth control for the coefficient-stripping recursion on models without an exact tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthPolicy<T> {
    pub tol: T,
    pub start_depth: usize,
    pub max_depth: usize,
}

impl<T: Real> Default for DepthPolicy<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-13),
            start_depth: 64,
            max_depth: 100_000,
        }
    }
}

/// `m^{(depth)} → m^{(0)}` via `m^{(k-1)} = 1/(b_k - z - a_k² m^{(k)})`.
fn strip<T: Real>(h: &HalfLine<'_, T>, z: Complex<T>, depth: usize, seed: Complex<T>) -> Complex<T> {
    let mut m = seed;
    for k in (1..=depth).rev() {
        let a = h.a(k);
        m = (-z + h.b(k) - m * (a * a)).inv();
    }
    m
}

/// Stripping step `m ↦ 1/(b - z - a² m)` as a Möbius matrix.
fn step_matrix<T: Real>(a: T, b: T, z: Complex<T>) -> Mat2<T> {
    let zero = Complex::new(T::zero(), T::zero());
    [
        [zero, Complex::new(T::one(), T::zero())],
        [Complex::new(-a * a, T::zero()), -z + b],
    ]
}

/// Picks the Herglotz branch among fixed points: for `Im z > 0` the one with the largest
/// imaginary part; on the real axis the root continuous with it from above.
fn herglotz_root<T: Real>(map: impl Fn(Complex<T>) -> Mat2<T>, z: Complex<T>) -> Result<Complex<T>> {
    let pick_upper = |z: Complex<T>| -> Result<Complex<T>> {
        mobius::fixed_points(&map(z))
            .into_iter()
            .max_by(|x, y| x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::Degenerate("tail map without finite fixed point".into()))
    };
    if z.im > T::zero() {
        return pick_upper(z);
    }
    let delta = T::lit(1e-9) * (T::one() + z.norm());
    let reference = pick_upper(z + Complex::new(T::zero(), delta))?;
    mobius::fixed_points(&map(z))
        .into_iter()
        .min_by(|x, y| {
            (x - reference)
                .norm()
                .partial_cmp(&(y - reference).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::Degenerate("tail map without finite fixed point".into()))
}

/// m-function of the periodic tail `ℓ >= tail.start`, i.e. `m^{(start-1)}`.
fn tail_m<T: Real>(h: &HalfLine<'_, T>, tail: TailInfo, z: Complex<T>) -> Result<Complex<T>> {
    let map = |z: Complex<T>| {
        (tail.start..tail.start + tail.period).fold(mobius::identity(), |acc, l| {
            mobius::mul(&acc, &step_matrix(h.a(l), h.b(l), z))
        })
    };
    herglotz_root(map, z)
}

/// m-function of the constant half-line `(a, b)`; the free seed of the depth recursion.
pub fn constant_tail_m<T: Real>(a: T, b: T, z: Complex<T>) -> Result<Complex<T>> {
    herglotz_root(|z| step_matrix(a, b, z), z)
}

/// `m(z, H) = ⟨δ_1, (H - z)^{-1} δ_1⟩` for `Im z > 0`.
///
/// Models with an exact periodic tail close the continued fraction with the tail's fixed
/// point; others descend until the zero seed and the constant-tail seed agree.
pub fn m_half_line<T: Real>(h: &HalfLine<'_, T>, z: Complex<T>, policy: &DepthPolicy<T>) -> Result<Complex<T>> {
    if !(z.im > T::zero()) {
        return Err(Error::Domain(format!("m-function needs Im z > 0, got {z}")));
    }
    if let Some(tail) = h.tail() {
        let seed = tail_m(h, tail, z)?;
        return Ok(strip(h, z, tail.start - 1, seed));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut depth = policy.start_depth.max(1);
    loop {
        let m0 = strip(h, z, depth, zero);
        let seed = constant_tail_m(h.a(depth + 1), h.b(depth + 1), z)?;
        let m1 = strip(h, z, depth, seed);
        let gap = (m1 - m0).norm();
        if gap < policy.tol * m1.norm().max(T::one()) {
            return Ok(m1);
        }
        if depth >= policy.max_depth {
            return Err(Error::Convergence {
                what: format!("m-function tail seeds at depth {depth}"),
                gap: gap.to_f(),
            });
        }
        depth = (depth * 2).min(policy.max_depth);
    }
}

/// Closed-form boundary value `m(λ+i0, H)` for half-lines with an exact periodic tail.
pub fn m_half_line_boundary<T: Real>(h: &HalfLine<'_, T>, lambda: T) -> Result<Complex<T>> {
    let tail = h
        .tail()
        .ok_or_else(|| Error::Domain("no exact tail: closed-form boundary value unavailable".into()))?;
    let z = Complex::new(lambda, T::zero());
    let m = strip(h, z, tail.start - 1, tail_m(h, tail, z)?);
    if !(m.re.is_finite() && m.im.is_finite()) {
        return Err(Error::Degenerate(format!("m-function pole at λ = {lambda}")));
    }
    Ok(m)
}

/// `(m_n^+(z), m_n^-(z))`.
pub fn m_pm<T: Real>(
    j: &JacobiCoeffs<T>,
    n: i64,
    z: Complex<T>,
    policy: &DepthPolicy<T>,
) -> Result<(Complex<T>, Complex<T>)> {
    Ok((
        m_half_line(&j.half_line(n, Side::Plus), z, policy)?,
        m_half_line(&j.half_line(n, Side::Minus), z, policy)?,
    ))
}
