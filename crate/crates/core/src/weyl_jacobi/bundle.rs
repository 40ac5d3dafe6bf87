use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boundary::{ladder_limit, BoundaryValue, LadderPolicy};
use super::mfunc::{m_half_line, m_half_line_boundary, DepthPolicy};
use crate::error::{Error, Result};
use crate::lattice_models::{HalfLine, JacobiCoeffs, Side};
use crate::scalar::{sup_norm, Real};

/// How real-axis boundary values are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPath {
    /// Closed form when the model has exact tails, ladder otherwise.
    Auto,
    ClosedForm,
    Ladder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylPolicy<T> {
    pub path: BoundaryPath,
    pub ladder: LadderPolicy<T>,
    pub depth: DepthPolicy<T>,
    pub delta_ac: T,
    pub w_min: T,
}

impl<T: Real> Default for WeylPolicy<T> {
    fn default() -> Self {
        Self {
            path: BoundaryPath::Auto,
            ladder: LadderPolicy::default(),
            depth: DepthPolicy::default(),
            delta_ac: T::lit(1e-6),
            w_min: T::lit(1e-10),
        }
    }
}

impl<T: Real> WeylPolicy<T> {
    pub fn with_path(mut self, path: BoundaryPath) -> Self {
        self.path = path;
        self
    }
}

/// Where a Weyl bundle is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralPoint<T> {
    /// `λ + i0`.
    Boundary(T),
    /// A point with `Im z > 0`.
    Upper(Complex<T>),
}

/// Weyl solutions and derived data at one spectral point, on the index range `[-K, K]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylBundle<T> {
    pub lambda: T,
    pub z: Complex<T>,
    pub k: usize,
    /// `m_0^+` with its ladder.
    pub m_plus: BoundaryValue<T>,
    /// `m_0^-` with its ladder.
    pub m_minus: BoundaryValue<T>,
    /// `m_n^+` for `n ∈ [-K-1, K]`.
    pub m_plus_all: Vec<Complex<T>>,
    /// `m_n^-` for `n ∈ [-K-1, K]`.
    pub m_minus_all: Vec<Complex<T>>,
    /// `u_n^+` for `n ∈ [-K, K]`, `u_0^+ = 1`.
    pub u_plus: Vec<Complex<T>>,
    pub u_minus: Vec<Complex<T>>,
    pub wronskian: Complex<T>,
    /// Relative spread of `W` over the range.
    pub wronskian_spread: T,
    pub f_plus: T,
    pub f_minus: T,
    pub in_ac2: bool,
}

impl<T: Real> WeylBundle<T> {
    fn idx_u(&self, n: i64) -> usize {
        assert!(n.unsigned_abs() as usize <= self.k, "index {n} outside bundle range");
        (n + self.k as i64) as usize
    }

    pub fn u_p(&self, n: i64) -> Complex<T> {
        self.u_plus[self.idx_u(n)]
    }

    pub fn u_m(&self, n: i64) -> Complex<T> {
        self.u_minus[self.idx_u(n)]
    }

    pub fn m_p(&self, n: i64) -> Complex<T> {
        self.m_plus_all[(n + self.k as i64 + 1) as usize]
    }

    pub fn m_m(&self, n: i64) -> Complex<T> {
        self.m_minus_all[(n + self.k as i64 + 1) as usize]
    }

    /// Combined extrapolation error of the two boundary values.
    pub fn err(&self) -> T {
        self.m_plus.err_estimate + self.m_minus.err_estimate
    }

    /// `G_nm = u^-_{min} u^+_{max} / W`.
    pub fn green(&self, n: i64, m: i64) -> Complex<T> {
        let (lo, hi) = (n.min(m), n.max(m));
        self.u_m(lo) * self.u_p(hi) / self.wronskian
    }

    /// `max |a_{n-1}u_{n-1} + b_n u_n + a_n u_{n+1} - z u_n| / ‖u‖_∞` over the interior, both solutions.
    pub fn recurrence_residual(&self, j: &JacobiCoeffs<T>) -> T {
        let k = self.k as i64;
        let mut worst = T::zero();
        for u in [&self.u_plus, &self.u_minus] {
            let scale = sup_norm(u).max(T::min_positive_value());
            let at = |n: i64| u[(n + k) as usize];
            for n in -k + 1..k {
                worst = worst.max(j.residual_at(n, at, self.z).norm() / scale);
            }
        }
        worst
    }
}

fn finite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Boundary value of the half-line m-function at `λ + i0`.
pub fn half_line_boundary<T: Real>(
    h: &HalfLine<'_, T>,
    lambda: T,
    policy: &WeylPolicy<T>,
) -> Result<BoundaryValue<T>> {
    let closed = match policy.path {
        BoundaryPath::ClosedForm => true,
        BoundaryPath::Ladder => false,
        BoundaryPath::Auto => h.tail().is_some(),
    };
    if closed {
        Ok(BoundaryValue::exact(m_half_line_boundary(h, lambda)?))
    } else {
        ladder_limit(
            |eps| m_half_line(h, Complex::new(lambda, eps), &policy.depth),
            &policy.ladder,
        )
    }
}

/// One stripping pass in each direction from seeds `m_K^+` and `m_{-K-1}^-`.
fn strip_all<T: Real>(
    j: &JacobiCoeffs<T>,
    z: Complex<T>,
    k: usize,
    seed_plus: Complex<T>,
    seed_minus: Complex<T>,
) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let k = k as i64;
    let len = (2 * k + 2) as usize;
    let off = k + 1;
    let mut mp = vec![seed_plus; len];
    for n in (-k - 1..k).rev() {
        let a = j.a(n + 1);
        mp[(n + off) as usize] = (-z + j.b(n + 1) - mp[(n + 1 + off) as usize] * (a * a)).inv();
    }
    let mut mm = vec![seed_minus; len];
    for n in -k..=k {
        let a = j.a(n - 1);
        mm[(n + off) as usize] = (-z + j.b(n) - mm[(n - 1 + off) as usize] * (a * a)).inv();
    }
    (mp, mm)
}

/// Weyl bundle at `λ + i0` (ratio recursions from boundary m-values).
pub fn weyl_solutions<T: Real>(
    j: &JacobiCoeffs<T>,
    lambda: T,
    k: usize,
    policy: &WeylPolicy<T>,
) -> Result<WeylBundle<T>> {
    weyl_at(j, SpectralPoint::Boundary(lambda), k, policy)
}

/// Weyl bundle at a boundary point or in the upper half-plane.
pub fn weyl_at<T: Real>(
    j: &JacobiCoeffs<T>,
    at: SpectralPoint<T>,
    k: usize,
    policy: &WeylPolicy<T>,
) -> Result<WeylBundle<T>> {
    let k = k.max(1);
    let ki = k as i64;
    let hp = j.half_line(ki, Side::Plus);
    let hm = j.half_line(-ki - 1, Side::Minus);
    let (z, seed_p, seed_m) = match at {
        SpectralPoint::Boundary(lambda) => (
            Complex::new(lambda, T::zero()),
            half_line_boundary(&hp, lambda, policy)?,
            half_line_boundary(&hm, lambda, policy)?,
        ),
        SpectralPoint::Upper(z) => (
            z,
            BoundaryValue::exact(m_half_line(&hp, z, &policy.depth)?),
            BoundaryValue::exact(m_half_line(&hm, z, &policy.depth)?),
        ),
    };
    let (mp, mm) = strip_all(j, z, k, seed_p.value, seed_m.value);
    if !mp.iter().chain(&mm).all(|&m| finite(m) && m.norm() > T::zero()) {
        return Err(Error::Degenerate(format!("m-function pole or zero near {z}")));
    }
    let at_m = |v: &Vec<Complex<T>>, n: i64| v[(n + ki + 1) as usize];

    // ratio recursions, u_0 = 1
    let one = Complex::new(T::one(), T::zero());
    let mut up = vec![one; 2 * k + 1];
    let mut um = vec![one; 2 * k + 1];
    for n in 0..ki {
        up[(n + 1 + ki) as usize] = -up[(n + ki) as usize] * at_m(&mp, n) * j.a(n);
        um[(n + 1 + ki) as usize] = -um[(n + ki) as usize] / (at_m(&mm, n) * j.a(n));
    }
    for n in (-ki..0).rev() {
        up[(n + ki) as usize] = -up[(n + 1 + ki) as usize] / (at_m(&mp, n) * j.a(n));
        um[(n + ki) as usize] = -um[(n + 1 + ki) as usize] * at_m(&mm, n) * j.a(n);
    }

    let wr = |n: i64| {
        let (i, i1) = ((n + ki) as usize, (n + 1 + ki) as usize);
        (up[i1] * um[i] - um[i1] * up[i]) * j.a(n)
    };
    let w = wr(0);
    if !(w.norm() >= policy.w_min) {
        return Err(Error::Degenerate(format!("Wronskian |W| = {:.3e} below threshold", w.norm().to_f())));
    }
    let spread = (-ki..ki).map(|n| (wr(n) - w).norm()).fold(T::zero(), T::max) / w.norm();

    let pi = T::PI();
    let w2 = w.norm_sqr();
    let a0 = j.a(0);
    let am1 = j.a(-1);
    let f_plus = am1 * am1 * at_m(&mm, -1).im / (pi * w2);
    let f_minus = a0 * a0 * at_m(&mp, 0).im / (pi * w2);

    // per-rung values of m_0^± for the record
    let rung_values = |seed: &BoundaryValue<T>, plus: bool| -> Vec<(T, Complex<T>)> {
        seed.eps_ladder
            .iter()
            .map(|&(eps, _)| {
                let zz = Complex::new(z.re, eps);
                let h = if plus { &hp } else { &hm };
                let s = m_half_line(h, zz, &policy.depth).unwrap_or(Complex::new(T::nan(), T::nan()));
                let (p, m) = if plus {
                    strip_all(j, zz, k, s, seed_m.value)
                } else {
                    strip_all(j, zz, k, seed_p.value, s)
                };
                (eps, if plus { at_m(&p, 0) } else { at_m(&m, 0) })
            })
            .collect()
    };
    let m_plus = BoundaryValue {
        value: at_m(&mp, 0),
        eps_ladder: rung_values(&seed_p, true),
        err_estimate: seed_p.err_estimate,
        flagged: seed_p.flagged,
    };
    let m_minus = BoundaryValue {
        value: at_m(&mm, 0),
        eps_ladder: rung_values(&seed_m, false),
        err_estimate: seed_m.err_estimate,
        flagged: seed_m.flagged,
    };
    let d = policy.delta_ac;
    let in_ac2 = m_plus.value.im > d
        && m_minus.value.im > d
        && m_plus.err_estimate < d / T::lit(10.0)
        && m_minus.err_estimate < d / T::lit(10.0)
        && !m_plus.flagged
        && !m_minus.flagged;

    Ok(WeylBundle {
        lambda: z.re,
        z,
        k,
        m_plus,
        m_minus,
        m_plus_all: mp,
        m_minus_all: mm,
        u_plus: up,
        u_minus: um,
        wronskian: w,
        wronskian_spread: spread,
        f_plus,
        f_minus,
        in_ac2,
    })
}

/// `G_nm` at `λ + i0` or `z` in the upper half-plane.
pub fn green<T: Real>(
    j: &JacobiCoeffs<T>,
    n: i64,
    m: i64,
    at: SpectralPoint<T>,
    policy: &WeylPolicy<T>,
) -> Result<Complex<T>> {
    let k = n.unsigned_abs().max(m.unsigned_abs()) as usize + 1;
    Ok(weyl_at(j, at, k, policy)?.green(n, m))
}

/// `G_nn = -1/(a_n² m_n^+ - 1/m_n^-)`, with the combined boundary-value error.
pub fn green_diag_via_m<T: Real>(
    j: &JacobiCoeffs<T>,
    n: i64,
    at: SpectralPoint<T>,
    policy: &WeylPolicy<T>,
) -> Result<(Complex<T>, T)> {
    let (hp, hm) = (j.half_line(n, Side::Plus), j.half_line(n, Side::Minus));
    let (mp, mm) = match at {
        SpectralPoint::Boundary(lambda) => (
            half_line_boundary(&hp, lambda, policy)?,
            half_line_boundary(&hm, lambda, policy)?,
        ),
        SpectralPoint::Upper(z) => (
            BoundaryValue::exact(m_half_line(&hp, z, &policy.depth)?),
            BoundaryValue::exact(m_half_line(&hm, z, &policy.depth)?),
        ),
    };
    if mm.value.norm() <= T::epsilon() {
        return Err(Error::Degenerate("m_n^- vanishes".into()));
    }
    let a = j.a(n);
    let den = mp.value * (a * a) - mm.value.inv();
    if den.norm() <= T::epsilon() {
        return Err(Error::Degenerate("a_n² m_n^+ = 1/m_n^-".into()));
    }
    Ok((-den.inv(), mp.err_estimate + mm.err_estimate))
}

/// Membership in the multiplicity-two a.c. set at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ac2Point<T> {
    pub lambda: T,
    pub in_ac2: bool,
    pub im_m_plus: T,
    pub im_m_minus: T,
    pub err: T,
    /// Reason for exclusion when the boundary values could not be certified.
    pub note: Option<String>,
}

/// `Im m_0^±(λ+i0) > δ_ac` with extrapolation error below `δ_ac/10`, per grid point.
pub fn detect_ac2<T: Real>(
    j: &JacobiCoeffs<T>,
    grid: &[T],
    delta_ac: T,
    policy: &WeylPolicy<T>,
) -> Vec<Ac2Point<T>> {
    grid.par_iter()
        .map(|&lambda| {
            let hp = j.half_line(0, Side::Plus);
            let hm = j.half_line(0, Side::Minus);
            match (
                half_line_boundary(&hp, lambda, policy),
                half_line_boundary(&hm, lambda, policy),
            ) {
                (Ok(p), Ok(m)) => {
                    let err = p.err_estimate + m.err_estimate;
                    let certified = !p.flagged && !m.flagged && err < delta_ac / T::lit(10.0);
                    Ac2Point {
                        lambda,
                        in_ac2: certified && p.value.im > delta_ac && m.value.im > delta_ac,
                        im_m_plus: p.value.im,
                        im_m_minus: m.value.im,
                        err,
                        note: (!certified).then(|| "boundary value not certified".to_string()),
                    }
                }
                (Err(e), _) | (_, Err(e)) => Ac2Point {
                    lambda,
                    in_ac2: false,
                    im_m_plus: T::nan(),
                    im_m_minus: T::nan(),
                    err: T::infinity(),
                    note: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::presets;

    fn c(x: f64, y: f64) -> Complex<f64> {
        Complex::new(x, y)
    }

    #[test]
    fn free_plane_waves_at_zero() {
        let j = presets::free::<f64>();
        let b = weyl_solutions(&j, 0.0, 3, &WeylPolicy::default()).unwrap();
        let mi = c(0.0, -1.0);
        let pi = c(0.0, 1.0);
        for n in -3i64..=3 {
            assert!((b.u_p(n) - mi.powi(n as i32)).norm() < 1e-14);
            assert!((b.u_m(n) - pi.powi(n as i32)).norm() < 1e-14);
        }
        assert!((b.wronskian - c(0.0, -2.0)).norm() < 1e-14);
        let q = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((b.f_plus - q).abs() < 1e-15 && (b.f_minus - q).abs() < 1e-15);
        assert!(b.in_ac2);
    }

    #[test]
    fn free_at_one() {
        let j = presets::free::<f64>();
        let b = weyl_solutions(&j, 1.0, 6, &WeylPolicy::default()).unwrap();
        for n in -6i64..=6 {
            assert!((b.u_p(n).norm() - 1.0).abs() < 1e-13);
            assert!((b.u_m(n).norm() - 1.0).abs() < 1e-13);
        }
        let f = 1.0 / (2.0 * std::f64::consts::PI * 3f64.sqrt());
        assert!((b.f_plus - f).abs() < 1e-14);
        assert!((b.f_minus - f).abs() < 1e-14);
    }

    #[test]
    fn free_green_values() {
        let j = presets::free::<f64>();
        let p = WeylPolicy::default();
        let g00 = green(&j, 0, 0, SpectralPoint::Boundary(0.0), &p).unwrap();
        assert!((g00 - c(0.0, 0.5)).norm() < 1e-14);
        let g02 = green(&j, 0, 2, SpectralPoint::Boundary(0.0), &p).unwrap();
        assert!((g02 - c(0.0, -0.5)).norm() < 1e-14);
        let (gd, err) = green_diag_via_m(&j, 0, SpectralPoint::Boundary(0.0), &p).unwrap();
        assert!((gd - c(0.0, 0.5)).norm() < 1e-14);
        assert_eq!(err, 0.0);
        let m = c(0.0, 2f64.sqrt() - 1.0);
        let (g2i, _) = green_diag_via_m(&j, 0, SpectralPoint::Upper(c(0.0, 2.0)), &p).unwrap();
        assert!((g2i + (m - m.inv()).inv()).norm() < 1e-14);
    }

    #[test]
    fn bundle_invariants_on_presets() {
        let models = [
            presets::free::<f64>(),
            presets::defect(1.0, 0),
            presets::period2(0.5),
            presets::anderson(1.0, 4, Some(6)),
        ];
        let p = WeylPolicy::default();
        for j in &models {
            for lambda in [-1.3, 0.7, 1.1] {
                let b = match weyl_solutions(j, lambda, 20, &p) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
                assert!(b.recurrence_residual(j) < 1e-10);
                assert!(b.wronskian_spread < 1e-9);
                if b.in_ac2 {
                    assert!(b.f_plus > 0.0 && b.f_minus > 0.0);
                }
                assert_eq!(b.u_p(0), c(1.0, 0.0));
                assert_eq!(b.u_m(0), c(1.0, 0.0));
            }
        }
    }

    #[test]
    fn green_symmetric() {
        let j = presets::anderson::<f64>(1.5, 2, Some(8));
        let p = WeylPolicy::default();
        for (n, m) in [(0, 3), (-2, 4), (5, -5), (1, 2), (-3, -1)] {
            for at in [SpectralPoint::Boundary(0.4), SpectralPoint::Upper(c(0.2, 0.5))] {
                let g1 = green(&j, n, m, at, &p).unwrap();
                let g2 = green(&j, m, n, at, &p).unwrap();
                assert!((g1 - g2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ac2_detection() {
        let j = presets::free::<f64>();
        let grid: Vec<f64> = (0..39).map(|i| -1.9 + 0.1 * i as f64).collect();
        assert!(detect_ac2(&j, &grid, 1e-6, &WeylPolicy::default()).iter().all(|p| p.in_ac2));
        let out = detect_ac2(&j, &[3.0, -3.0], 1e-6, &WeylPolicy::default());
        assert!(out.iter().all(|p| !p.in_ac2));
        let d = presets::defect::<f64>(1.0, 0);
        let ladder = WeylPolicy::default().with_path(BoundaryPath::Ladder);
        assert!(detect_ac2(&d, &grid, 1e-6, &ladder).iter().all(|p| p.in_ac2));
    }

    #[test]
    fn closed_form_equals_ladder_on_free() {
        let j = presets::free::<f64>();
        let closed = WeylPolicy::default();
        let ladder = WeylPolicy::default().with_path(BoundaryPath::Ladder);
        for i in 0..50 {
            let lambda = -1.9 + 3.8 * (i as f64 + 0.5) / 50.0;
            let a = weyl_solutions(&j, lambda, 2, &closed).unwrap();
            let b = weyl_solutions(&j, lambda, 2, &ladder).unwrap();
            assert!((a.m_plus.value - b.m_plus.value).norm() < 1e-7);
            assert!((a.m_minus.value - b.m_minus.value).norm() < 1e-7);
        }
    }
}
