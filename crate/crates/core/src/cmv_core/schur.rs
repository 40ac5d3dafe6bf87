use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lattice_models::{CmvHalfLine, Side, VerblunskyCoeffs};
use crate::mobius::{self, Mat2};
use crate::scalar::Real;
use crate::weyl_jacobi::{ladder_limit, BoundaryPath, BoundaryValue, DepthPolicy, WeylPolicy};

/// Schur step `f ↦ (γ + z f)/(1 + conj(γ) z f)` as a Möbius matrix.
fn step_matrix<T: Real>(gamma: Complex<T>, z: Complex<T>) -> Mat2<T> {
    [
        [z, gamma],
        [gamma.conj() * z, Complex::new(T::one(), T::zero())],
    ]
}

#[inline]
fn step<T: Real>(gamma: Complex<T>, z: Complex<T>, f: Complex<T>) -> Complex<T> {
    (gamma + z * f) / (Complex::new(T::one(), T::zero()) + gamma.conj() * z * f)
}

fn descend<T: Real>(h: &CmvHalfLine<'_, T>, z: Complex<T>, depth: usize, seed: Complex<T>) -> Complex<T> {
    (0..depth).rev().fold(seed, |f, k| step(h.gamma(k), z, f))
}

/// Fixed point of a Schur map product inside the disk; on the circle the root continuous
/// with it from `|z| < 1`.
fn disk_root<T: Real>(map: impl Fn(Complex<T>) -> Mat2<T>, z: Complex<T>) -> Result<Complex<T>> {
    let inner = |z: Complex<T>| -> Result<Complex<T>> {
        mobius::fixed_points(&map(z))
            .into_iter()
            .min_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::Degenerate("Schur tail map without finite fixed point".into()))
    };
    if z.norm() < T::one() - T::lit(1e-12) {
        return inner(z);
    }
    let reference = inner(z * (T::one() - T::lit(1e-9)))?;
    mobius::fixed_points(&map(z))
        .into_iter()
        .min_by(|x, y| {
            (x - reference)
                .norm()
                .partial_cmp(&(y - reference).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::Degenerate("Schur tail map without finite fixed point".into()))
}

/// Schur function of the periodic tail `γ_start, γ_start+1, …`.
fn tail_f<T: Real>(h: &CmvHalfLine<'_, T>, start: usize, period: usize, z: Complex<T>) -> Result<Complex<T>> {
    if (start..start + period).all(|k| h.gamma(k).norm() == T::zero()) {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let map = |z: Complex<T>| {
        (start..start + period).fold(mobius::identity(), |acc, k| mobius::mul(&acc, &step_matrix(h.gamma(k), z)))
    };
    disk_root(map, z)
}

/// Schur function of the constant sequence `γ, γ, …`.
pub fn constant_tail_schur<T: Real>(gamma: Complex<T>, z: Complex<T>) -> Result<Complex<T>> {
    if gamma.norm() == T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    disk_root(|z| step_matrix(gamma, z), z)
}

/// Schur function `f(z)` of the half-line sequence for `|z| < 1`.
///
/// Exact periodic tails close the continued fraction with their fixed point; otherwise the
/// depth doubles until the zero seed and the constant-tail seed agree.
pub fn schur_function<T: Real>(h: &CmvHalfLine<'_, T>, z: Complex<T>, policy: &DepthPolicy<T>) -> Result<Complex<T>> {
    if !(z.norm() < T::one()) {
        return Err(Error::Domain(format!("Schur function needs |z| < 1, got {z}")));
    }
    if let Some((start, period)) = h.tail() {
        let seed = tail_f(h, start, period, z)?;
        return Ok(descend(h, z, start, seed));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut depth = policy.start_depth.max(1);
    loop {
        let f0 = descend(h, z, depth, zero);
        let f1 = descend(h, z, depth, constant_tail_schur(h.gamma(depth), z)?);
        let gap = (f1 - f0).norm();
        if gap < policy.tol {
            return Ok(f1);
        }
        if depth >= policy.max_depth {
            return Err(Error::Convergence {
                what: format!("Schur tail seeds at depth {depth}"),
                gap: gap.to_f(),
            });
        }
        depth = (depth * 2).min(policy.max_depth);
    }
}

fn to_caratheodory<T: Real>(side: Side, z: Complex<T>, f: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let w = match side {
        Side::Plus => z * f,
        Side::Minus => f,
    };
    (one + w) / (one - w)
}

/// `F_±(z, n)` off the unit circle. Outside the disk via `F(1/conj z) = -conj F(z)`.
pub fn caratheodory<T: Real>(
    c: &VerblunskyCoeffs<T>,
    n: i64,
    side: Side,
    z: Complex<T>,
    policy: &DepthPolicy<T>,
) -> Result<Complex<T>> {
    half_line_caratheodory(&c.half_line(n, side), z, policy)
}

pub fn half_line_caratheodory<T: Real>(
    h: &CmvHalfLine<'_, T>,
    z: Complex<T>,
    policy: &DepthPolicy<T>,
) -> Result<Complex<T>> {
    let r = z.norm();
    if r > T::one() {
        let zi = Complex::new(T::one(), T::zero()) / z.conj();
        return Ok(-half_line_caratheodory(h, zi, policy)?.conj());
    }
    if !(r < T::one()) {
        return Err(Error::Domain(format!("Carathéodory function off the circle only, got |z| = {r}")));
    }
    Ok(to_caratheodory(h.side(), z, schur_function(h, z, policy)?))
}

/// Radial limit `F(e^{iθ})` from inside the disk.
pub fn caratheodory_boundary<T: Real>(
    h: &CmvHalfLine<'_, T>,
    theta: T,
    policy: &WeylPolicy<T>,
) -> Result<BoundaryValue<T>> {
    let z = Complex::from_polar(T::one(), theta);
    let closed = match policy.path {
        BoundaryPath::ClosedForm => true,
        BoundaryPath::Ladder => false,
        BoundaryPath::Auto => h.tail().is_some(),
    };
    if closed {
        let (start, period) = h
            .tail()
            .ok_or_else(|| Error::Domain("no exact tail: closed-form boundary value unavailable".into()))?;
        let f = descend(h, z, start, tail_f(h, start, period, z)?);
        let big = to_caratheodory(h.side(), z, f);
        if !(big.re.is_finite() && big.im.is_finite()) {
            return Err(Error::Degenerate(format!("Carathéodory pole at θ = {theta}")));
        }
        Ok(BoundaryValue::exact(big))
    } else {
        ladder_limit(
            |eps| half_line_caratheodory(h, z * (T::one() - eps), &policy.depth),
            &policy.ladder,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::presets;
    use proptest::prelude::*;

    fn c(x: f64, y: f64) -> Complex<f64> {
        Complex::new(x, y)
    }

    #[test]
    fn free_is_one() {
        let m = presets::cmv_free::<f64>();
        let p = DepthPolicy::default();
        for side in [Side::Plus, Side::Minus] {
            for z in [c(0.0, 0.0), c(0.5, 0.3), c(-0.9, 0.0)] {
                assert!((caratheodory(&m, 0, side, z, &p).unwrap() - 1.0).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn defect_values() {
        let m = presets::cmv_defect::<f64>(c(0.5, 0.0), 0);
        let p = DepthPolicy::default();
        assert!((caratheodory(&m, 0, Side::Plus, c(0.0, 0.0), &p).unwrap() - 1.0).norm() < 1e-15);
        // the minus side starts at α_0 itself: f ≡ 1/2
        assert!((caratheodory(&m, 0, Side::Minus, c(0.3, 0.2), &p).unwrap() - 3.0).norm() < 1e-14);
        let bp = caratheodory_boundary(&m.half_line(0, Side::Plus), 2.0, &WeylPolicy::default()).unwrap();
        assert!((bp.value - 1.0).norm() < 1e-15);
    }

    #[test]
    fn outside_reflection() {
        let m = presets::cmv_random::<f64>(0.6, 3, Some(12));
        let p = DepthPolicy::default();
        let z = c(0.3, -0.4);
        let zi = c(1.0, 0.0) / z.conj();
        for side in [Side::Plus, Side::Minus] {
            let a = caratheodory(&m, 1, side, z, &p).unwrap();
            let b = caratheodory(&m, 1, side, zi, &p).unwrap();
            assert!((b + a.conj()).norm() < 1e-14);
        }
        assert!(matches!(
            caratheodory(&m, 0, Side::Plus, c(1.0, 0.0), &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn generated_matches_window() {
        let m = presets::cmv_random::<f64>(0.5, 7, None);
        let p = DepthPolicy::default();
        let z = c(0.2, 0.5);
        let f = caratheodory(&m, 0, Side::Plus, z, &p).unwrap();
        // same coefficients stored explicitly on a long window
        let vals: Vec<_> = (-400..400).map(|n| m.alpha(n)).collect();
        let w = crate::lattice_models::make_cmv(crate::lattice_models::Sequence::window(-400, vals, c(0.0, 0.0))).unwrap();
        let g = caratheodory(&w, 0, Side::Plus, z, &p).unwrap();
        assert!((f - g).norm() < 1e-12);
    }

    #[test]
    fn constant_boundary_is_continuous() {
        let m = presets::cmv_constant::<f64>(c(0.3, 0.0));
        let h = m.half_line(0, Side::Minus);
        let closed = caratheodory_boundary(&h, 2.0, &WeylPolicy::default()).unwrap();
        let ladder = caratheodory_boundary(&h, 2.0, &WeylPolicy::default().with_path(BoundaryPath::Ladder)).unwrap();
        assert!((closed.value - ladder.value).norm() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn caratheodory_positive(r in 0.0f64..0.999, th in -3.2f64..3.2, n in -4i64..4, seed in 0u64..50) {
            let models = [
                presets::cmv_free::<f64>(),
                presets::cmv_defect(c(0.5, 0.0), 0),
                presets::cmv_constant(c(0.3, 0.0)),
                presets::cmv_random(0.7, seed, Some(10)),
            ];
            let z = Complex::from_polar(r, th);
            for m in &models {
                for side in [Side::Plus, Side::Minus] {
                    let f = caratheodory(m, n, side, z, &DepthPolicy::default()).unwrap();
                    prop_assert!(f.re > 0.0);
                }
            }
        }
    }
}
