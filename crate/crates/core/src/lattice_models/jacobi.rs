use num_complex::Complex;

use super::seq::{lcm, Sequence};
use super::Side;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Range of indices scanned to validate generated coefficient sequences.
pub const PROBE_RADIUS: i64 = 4096;

/// Whole-line Jacobi coefficients: `(Ju)_n = a_{n-1} u_{n-1} + b_n u_n + a_n u_{n+1}`.
#[derive(Clone, Debug)]
pub struct JacobiCoeffs<T> {
    a: Sequence<T>,
    b: Sequence<T>,
    a_max: T,
    b_max: T,
}

/// Validates coefficients. `bounds = (A_max, B_max)` is required for generated sequences
/// and checked against stored values otherwise.
pub fn make_jacobi<T: Real>(
    a: Sequence<T>,
    b: Sequence<T>,
    bounds: Option<(T, T)>,
) -> Result<JacobiCoeffs<T>> {
    let a_obs = observed_sup(&a, |x| {
        if !(x > T::zero()) || !x.is_finite() {
            Err(Error::Domain(format!("off-diagonal coefficient {x} is not positive")))
        } else {
            Ok(x)
        }
    })?;
    let b_obs = observed_sup(&b, |x| {
        if !x.is_finite() {
            Err(Error::Domain("diagonal coefficient is not finite".into()))
        } else {
            Ok(x.abs())
        }
    })?;
    let (a_max, b_max) = match bounds {
        Some((am, bm)) => {
            if !am.is_finite() || !bm.is_finite() {
                return Err(Error::Domain("unbounded coefficient declaration".into()));
            }
            if am < a_obs.0 || bm < b_obs.0 {
                return Err(Error::Domain(format!(
                    "declared bounds ({am}, {bm}) below observed sup ({}, {})",
                    a_obs.0, b_obs.0
                )));
            }
            (am, bm)
        }
        None => {
            if a_obs.1 || b_obs.1 {
                return Err(Error::Domain(
                    "generated coefficients need declared sup bounds".into(),
                ));
            }
            (a_obs.0, b_obs.0)
        }
    };
    Ok(JacobiCoeffs {
        a,
        b,
        a_max,
        b_max,
    })
}

/// Sup of `check(x)` over stored (or probed) values, plus a flag telling whether it was probed.
fn observed_sup<T: Real>(s: &Sequence<T>, check: impl Fn(T) -> Result<T>) -> Result<(T, bool)> {
    let mut sup = T::zero();
    match s.stored_values() {
        Some(vals) => {
            for v in vals {
                sup = sup.max(check(v)?);
            }
            Ok((sup, false))
        }
        None => {
            for n in -PROBE_RADIUS..=PROBE_RADIUS {
                sup = sup.max(check(s.at(n))?);
            }
            Ok((sup, true))
        }
    }
}

impl<T: Real> JacobiCoeffs<T> {
    #[inline]
    pub fn a(&self, n: i64) -> T {
        self.a.at(n)
    }

    #[inline]
    pub fn b(&self, n: i64) -> T {
        self.b.at(n)
    }

    pub fn a_seq(&self) -> &Sequence<T> {
        &self.a
    }

    pub fn b_seq(&self) -> &Sequence<T> {
        &self.b
    }

    /// `(A_max, B_max)`.
    pub fn bounds(&self) -> (T, T) {
        (self.a_max, self.b_max)
    }

    /// Spectrum is contained in `[-r, r]`.
    pub fn spectral_radius_bound(&self) -> T {
        self.a_max + self.a_max + self.b_max
    }

    pub fn half_line(&self, n: i64, side: Side) -> HalfLine<'_, T> {
        HalfLine {
            parent: self,
            base: n,
            side,
        }
    }

    /// `(Ju)_n` for a solution candidate given as a closure.
    pub fn residual_at(&self, n: i64, u: impl Fn(i64) -> Complex<T>, z: Complex<T>) -> Complex<T> {
        u(n - 1) * self.a(n - 1) + u(n) * self.b(n) + u(n + 1) * self.a(n) - u(n) * z
    }

    /// Whole-line matvec. The output is supported one site beyond the input on each side.
    pub fn apply(&self, lo: i64, v: &[Complex<T>]) -> (i64, Vec<Complex<T>>) {
        let n = v.len() as i64;
        let get = |k: i64| -> Complex<T> {
            if k < lo || k >= lo + n {
                Complex::new(T::zero(), T::zero())
            } else {
                v[(k - lo) as usize]
            }
        };
        let out = (lo - 1..lo + n + 1)
            .map(|k| get(k - 1) * self.a(k - 1) + get(k) * self.b(k) + get(k + 1) * self.a(k))
            .collect();
        (lo - 1, out)
    }

    /// Periodic data `(a over one period, b over one period)` starting at global index 0, when
    /// the whole sequence is periodic (no explicit window).
    pub fn global_period(&self) -> Option<(Vec<T>, Vec<T>)> {
        fn pure<T: Real>(s: &Sequence<T>) -> Option<Vec<T>> {
            match s {
                Sequence::Window {
                    values,
                    left,
                    right,
                    ..
                } if values.is_empty() && left == right => Some(right.pattern().to_vec()),
                _ => None,
            }
        }
        let pa = pure(&self.a)?;
        let pb = pure(&self.b)?;
        let p = lcm(pa.len(), pb.len());
        let a = (0..p).map(|k| pa[k % pa.len()]).collect();
        let b = (0..p).map(|k| pb[k % pb.len()]).collect();
        Some((a, b))
    }
}

/// Description of where a half-line's coefficients become periodic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TailInfo {
    /// First local index `ℓ >= 1` from which `(a_ℓ, b_ℓ)` is periodic.
    pub start: usize,
    pub period: usize,
}

/// Half-line restriction `J_n^±` with local indices `ℓ = 1, 2, …`.
#[derive(Clone, Copy, Debug)]
pub struct HalfLine<'a, T> {
    parent: &'a JacobiCoeffs<T>,
    base: i64,
    side: Side,
}

impl<'a, T: Real> HalfLine<'a, T> {
    pub fn base(&self) -> i64 {
        self.base
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn parent(&self) -> &'a JacobiCoeffs<T> {
        self.parent
    }

    #[inline]
    pub fn b(&self, l: usize) -> T {
        let l = l as i64;
        match self.side {
            Side::Plus => self.parent.b(self.base + l),
            Side::Minus => self.parent.b(self.base + 1 - l),
        }
    }

    #[inline]
    pub fn a(&self, l: usize) -> T {
        let l = l as i64;
        match self.side {
            Side::Plus => self.parent.a(self.base + l),
            Side::Minus => self.parent.a(self.base - l),
        }
    }

    /// Exact periodic tail, when both parent sequences have one.
    pub fn tail(&self) -> Option<TailInfo> {
        let n = self.base;
        let (start, pa, pb) = match self.side {
            Side::Plus => {
                let (sa, ta) = self.parent.a.right_tail()?;
                let (sb, tb) = self.parent.b.right_tail()?;
                ((sa - n).max(sb - n), ta.period(), tb.period())
            }
            Side::Minus => {
                let (sa, ta) = self.parent.a.left_tail()?;
                let (sb, tb) = self.parent.b.left_tail()?;
                ((n - sa + 1).max(n + 2 - sb), ta.period(), tb.period())
            }
        };
        Some(TailInfo {
            start: start.max(1) as usize,
            period: lcm(pa, pb),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::presets;
    use proptest::prelude::*;

    #[test]
    fn rejects_nonpositive_a() {
        let r = make_jacobi(
            Sequence::window(0, vec![0.0], 1.0),
            Sequence::constant(0.0),
            None,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = make_jacobi(
            Sequence::constant(1.0),
            Sequence::constant(0.0),
            Some((f64::INFINITY, 0.0)),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn generated_needs_bounds() {
        let r = make_jacobi(Sequence::constant(1.0), Sequence::generated(|n| n as f64 * 0.0), None);
        assert!(r.is_err());
    }

    #[test]
    fn defect_split_bookkeeping() {
        let j = presets::defect::<f64>(1.0, 0);
        assert_eq!(j.half_line(0, Side::Plus).b(1), 0.0);
        assert_eq!(j.half_line(-1, Side::Plus).b(1), 1.0);
        assert_eq!(j.half_line(0, Side::Minus).b(1), 1.0);
        assert_eq!(j.half_line(1, Side::Minus).b(2), 1.0);
    }

    #[test]
    fn free_apply_delta() {
        let j = presets::free::<f64>();
        let (lo, out) = j.apply(0, &[Complex::new(1.0, 0.0)]);
        assert_eq!(lo, -1);
        assert_eq!(out, vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)]);
        let d = presets::defect::<f64>(1.0, 0);
        let (_, out) = d.apply(0, &[Complex::new(1.0, 0.0)]);
        assert_eq!(out[1], Complex::new(1.0, 0.0));
    }

    #[test]
    fn almost_mathieu_at_zero() {
        let j = presets::almost_mathieu::<f64>(0.5, (5f64.sqrt() - 1.0) / 2.0, 0.0);
        assert!((j.b(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_detection() {
        let j = presets::defect::<f64>(1.0, 0);
        let t = j.half_line(-3, Side::Plus).tail().unwrap();
        // b_ℓ = b_{ℓ-3}: free from ℓ = 4
        assert_eq!(t, TailInfo { start: 4, period: 1 });
        let t = j.half_line(3, Side::Minus).tail().unwrap();
        // b_ℓ = b_{4-ℓ}: free once 4-ℓ < 0
        assert_eq!(t, TailInfo { start: 5, period: 1 });
        let p = presets::periodic::<f64>(vec![1.0], vec![0.5, -0.5]);
        assert_eq!(p.half_line(0, Side::Plus).tail().unwrap().period, 2);
    }

    proptest! {
        #[test]
        fn reindexing_identities(n in -40i64..40, l in 1usize..60, c in -3.0f64..3.0) {
            let j = presets::anderson::<f64>(2.0, 7, Some(30));
            let j2 = presets::defect::<f64>(c, 3);
            for j in [&j, &j2] {
                let p = j.half_line(n, Side::Plus);
                let m = j.half_line(n, Side::Minus);
                prop_assert_eq!(p.b(l), j.b(n + l as i64));
                prop_assert_eq!(p.a(l), j.a(n + l as i64));
                prop_assert_eq!(m.b(l), j.b(n + 1 - l as i64));
                prop_assert_eq!(m.a(l), j.a(n - l as i64));
            }
        }

        #[test]
        fn tails_are_exact(n in -40i64..40, k in 0usize..40) {
            let j = presets::anderson::<f64>(2.0, 11, Some(25));
            for side in [Side::Plus, Side::Minus] {
                let h = j.half_line(n, side);
                let t = h.tail().unwrap();
                let l = t.start + k;
                prop_assert_eq!(h.b(l), h.b(l + t.period));
                prop_assert_eq!(h.a(l), h.a(l + t.period));
            }
        }
    }
}
