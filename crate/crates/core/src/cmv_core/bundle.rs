use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::schur::{caratheodory_boundary, half_line_caratheodory};
use crate::error::{Error, Result};
use crate::lattice_models::{Side, VerblunskyCoeffs};
use crate::scalar::Real;
use crate::weyl_jacobi::{BoundaryValue, WeylPolicy};

/// Where a CMV bundle is evaluated: a radial limit on the circle or a point off it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CmvPoint<T> {
    Circle(T),
    Off(Complex<T>),
}

type Pair<T> = [Complex<T>; 2];

/// Laurent and Weyl solutions of `ℰ(u, v) = z(u, v)` on `[-K, K]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmvWeylBundle<T> {
    /// `arg z`.
    pub theta: T,
    pub z: Complex<T>,
    pub k: usize,
    pub cara_plus: BoundaryValue<T>,
    pub cara_minus: BoundaryValue<T>,
    pub p: Vec<Complex<T>>,
    pub q: Vec<Complex<T>>,
    pub r: Vec<Complex<T>>,
    pub s: Vec<Complex<T>>,
    pub u_plus: Vec<Complex<T>>,
    pub u_minus: Vec<Complex<T>>,
    pub v_plus: Vec<Complex<T>>,
    pub v_minus: Vec<Complex<T>>,
    /// `W(0) = u_+ v_- - v_+ u_-` at `n = 0`; at site `n` the same expression is `(-1)^n W`.
    pub wronskian: Complex<T>,
    /// `max_n |(-1)^n W(n) - W| / |W|`.
    pub wronskian_spread: T,
    pub f_plus: T,
    pub f_minus: T,
    pub in_ac2: bool,
}

/// `T(z, n)`; determinant `-1` for both parities.
pub fn transfer<T: Real>(c: &VerblunskyCoeffs<T>, z: Complex<T>, n: i64) -> [Pair<T>; 2] {
    let a = c.alpha(n);
    let ir = T::one() / c.rho(n);
    let one = Complex::new(ir, T::zero());
    if n.rem_euclid(2) == 1 {
        [[a * ir, z * ir], [one / z, a.conj() * ir]]
    } else {
        [[a.conj() * ir, one], [one, a * ir]]
    }
}

fn mul<T: Real>(m: &[Pair<T>; 2], x: Pair<T>) -> Pair<T> {
    [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
}

/// Inverse of a determinant `-1` matrix.
fn inv_mul<T: Real>(m: &[Pair<T>; 2], x: Pair<T>) -> Pair<T> {
    [-m[1][1] * x[0] + m[0][1] * x[1], m[1][0] * x[0] - m[0][0] * x[1]]
}

/// Solution of the transfer equation on `[-K, K]` from its value at `0`.
fn propagate<T: Real>(c: &VerblunskyCoeffs<T>, z: Complex<T>, k: usize, init: Pair<T>) -> Vec<Pair<T>> {
    let ki = k as i64;
    let mut out = vec![init; 2 * k + 1];
    for n in 1..=ki {
        out[(n + ki) as usize] = mul(&transfer(c, z, n), out[(n - 1 + ki) as usize]);
    }
    for n in (-ki + 1..=0).rev() {
        out[(n - 1 + ki) as usize] = inv_mul(&transfer(c, z, n), out[(n + ki) as usize]);
    }
    out
}

impl<T: Real> CmvWeylBundle<T> {
    fn idx(&self, n: i64) -> usize {
        assert!(n.unsigned_abs() as usize <= self.k, "index {n} outside bundle range");
        (n + self.k as i64) as usize
    }

    pub fn u_p(&self, n: i64) -> Complex<T> {
        self.u_plus[self.idx(n)]
    }

    pub fn u_m(&self, n: i64) -> Complex<T> {
        self.u_minus[self.idx(n)]
    }

    pub fn v_p(&self, n: i64) -> Complex<T> {
        self.v_plus[self.idx(n)]
    }

    pub fn v_m(&self, n: i64) -> Complex<T> {
        self.v_minus[self.idx(n)]
    }

    pub fn err(&self) -> T {
        self.cara_plus.err_estimate + self.cara_minus.err_estimate
    }

    /// `(𝒞 - z)^{-1}_{nm}` by the parity case split.
    pub fn resolvent(&self, n: i64, m: i64) -> Complex<T> {
        let num = if n < m || (n == m && n.rem_euclid(2) == 1) {
            self.u_m(n) * self.v_p(m)
        } else {
            self.v_m(m) * self.u_p(n)
        };
        -num / (self.z * self.wronskian)
    }

    /// `⟨δ_n, (𝒞+z)(𝒞-z)^{-1} δ_m⟩ = δ_nm + 2z (𝒞-z)^{-1}_{nm}`.
    pub fn caratheodory_entry(&self, n: i64, m: i64) -> Complex<T> {
        let d = if n == m { T::one() } else { T::zero() };
        Complex::new(d, T::zero()) + self.z * self.resolvent(n, m) * T::lit(2.0)
    }

    /// Largest transfer-equation residual relative to the solution size.
    pub fn transfer_residual(&self, c: &VerblunskyCoeffs<T>) -> T {
        let k = self.k as i64;
        let mut worst = T::zero();
        for (u, v) in [(&self.p, &self.r), (&self.q, &self.s), (&self.u_plus, &self.v_plus), (&self.u_minus, &self.v_minus)] {
            for n in -k + 1..=k {
                let (i, i0) = ((n + k) as usize, (n - 1 + k) as usize);
                let x = mul(&transfer(c, self.z, n), [u[i0], v[i0]]);
                let scale = u[i].norm().max(v[i].norm()).max(T::one());
                worst = worst.max(((x[0] - u[i]).norm() + (x[1] - v[i]).norm()) / scale);
            }
        }
        worst
    }

    /// Residual of `u = ℒ v` (blocks `Θ_{2n}`) and `ℳ u = z v` (blocks `Θ_{2n+1}`) over all
    /// pairs inside the window, relative to the local solution size.
    pub fn theta_residual(&self, c: &VerblunskyCoeffs<T>) -> T {
        let k = self.k as i64;
        let mut worst = T::zero();
        for (u, v) in [(&self.p, &self.r), (&self.q, &self.s), (&self.u_plus, &self.v_plus), (&self.u_minus, &self.v_minus)] {
            for j in -k + 1..=k {
                let (i0, i1) = ((j - 1 + k) as usize, (j + k) as usize);
                let t = c.theta(j);
                let scale = [u[i0], u[i1], v[i0], v[i1]].iter().fold(T::one(), |m, x| m.max(x.norm()));
                let res = if j.rem_euclid(2) == 0 {
                    (t[0][0] * v[i0] + t[0][1] * v[i1] - u[i0]).norm() + (t[1][0] * v[i0] + t[1][1] * v[i1] - u[i1]).norm()
                } else {
                    (t[0][0] * u[i0] + t[0][1] * u[i1] - self.z * v[i0]).norm()
                        + (t[1][0] * u[i0] + t[1][1] * u[i1] - self.z * v[i1]).norm()
                };
                worst = worst.max(res / scale);
            }
        }
        worst
    }
}

/// Bundle at the radial limit `z = e^{iθ}`.
pub fn laurent_weyl<T: Real>(
    c: &VerblunskyCoeffs<T>,
    theta: T,
    k: usize,
    policy: &WeylPolicy<T>,
) -> Result<CmvWeylBundle<T>> {
    laurent_weyl_at(c, CmvPoint::Circle(theta), k, policy)
}

pub fn laurent_weyl_at<T: Real>(
    c: &VerblunskyCoeffs<T>,
    at: CmvPoint<T>,
    k: usize,
    policy: &WeylPolicy<T>,
) -> Result<CmvWeylBundle<T>> {
    let k = k.max(1);
    let (hp, hm) = (c.half_line(0, Side::Plus), c.half_line(0, Side::Minus));
    let (z, fp, fm) = match at {
        CmvPoint::Circle(theta) => (
            Complex::from_polar(T::one(), theta),
            caratheodory_boundary(&hp, theta, policy)?,
            caratheodory_boundary(&hm, theta, policy)?,
        ),
        CmvPoint::Off(z) => (
            z,
            BoundaryValue::exact(half_line_caratheodory(&hp, z, &policy.depth)?),
            BoundaryValue::exact(half_line_caratheodory(&hm, z, &policy.depth)?),
        ),
    };
    let one = Complex::new(T::one(), T::zero());
    let pr = propagate(c, z, k, [one, one]);
    let qs = propagate(c, z, k, [-one, one]);
    let (f_p, f_m) = (fp.value, fm.value);
    let split = |v: &Vec<Pair<T>>, i: usize| -> Vec<Complex<T>> { v.iter().map(|x| x[i]).collect() };
    let (p, r, q, s) = (split(&pr, 0), split(&pr, 1), split(&qs, 0), split(&qs, 1));
    let comb = |x: &Vec<Complex<T>>, y: &Vec<Complex<T>>, f: Complex<T>| -> Vec<Complex<T>> {
        x.iter().zip(y).map(|(a, b)| a + f * b).collect()
    };
    let u_plus = comb(&q, &p, f_p);
    let v_plus = comb(&s, &r, f_p);
    let u_minus = comb(&q, &p, -f_m);
    let v_minus = comb(&s, &r, -f_m);
    let wr = |i: usize| u_plus[i] * v_minus[i] - v_plus[i] * u_minus[i];
    let w = wr(k);
    if !(w.norm() >= policy.w_min) {
        return Err(Error::Degenerate(format!("CMV Wronskian |W| = {:.3e} below threshold", w.norm().to_f())));
    }
    let spread = (0..2 * k + 1)
        .map(|i| {
            let sign = if (i as i64 - k as i64).rem_euclid(2) == 0 { T::one() } else { -T::one() };
            (wr(i) * sign - w).norm()
        })
        .fold(T::zero(), T::max)
        / w.norm();
    let den = T::PI() * w.norm_sqr();
    let four = T::lit(4.0);
    let d = policy.delta_ac;
    let tenth = d / T::lit(10.0);
    let in_ac2 = f_p.re > d
        && f_m.re > d
        && fp.err_estimate < tenth
        && fm.err_estimate < tenth
        && !fp.flagged
        && !fm.flagged
        && matches!(at, CmvPoint::Circle(_));
    Ok(CmvWeylBundle {
        theta: z.arg(),
        z,
        k,
        f_plus: four * f_m.re / den,
        f_minus: four * f_p.re / den,
        cara_plus: fp,
        cara_minus: fm,
        p,
        q,
        r,
        s,
        u_plus,
        u_minus,
        v_plus,
        v_minus,
        wronskian: w,
        wronskian_spread: spread,
        in_ac2,
    })
}

/// `(𝒞 - z)^{-1}_{nm}` for `|z| ≠ 1`.
pub fn cmv_resolvent<T: Real>(
    c: &VerblunskyCoeffs<T>,
    n: i64,
    m: i64,
    z: Complex<T>,
    policy: &WeylPolicy<T>,
) -> Result<Complex<T>> {
    if (z.norm() - T::one()).abs() <= T::epsilon() {
        return Err(Error::Domain("resolvent on the unit circle needs a radial limit".into()));
    }
    let k = n.unsigned_abs().max(m.unsigned_abs()) as usize + 1;
    Ok(laurent_weyl_at(c, CmvPoint::Off(z), k, policy)?.resolvent(n, m))
}

/// `[𝒞, χ_n^+]` as four explicit entries `(row, col, value)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmvCommutator<T> {
    pub n: i64,
    pub entries: Vec<(i64, i64, Complex<T>)>,
}

impl<T: Real> CmvCommutator<T> {
    /// Applies to a field on `[lo, lo + v.len())`; the output lives on the same window.
    pub fn apply(&self, lo: i64, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); v.len()];
        let hi = lo + v.len() as i64;
        for &(i, j, x) in &self.entries {
            if i >= lo && i < hi && j >= lo && j < hi {
                out[(i - lo) as usize] += x * v[(j - lo) as usize];
            }
        }
        out
    }

    /// `⟨a, [𝒞, χ] b⟩` for fields given as closures.
    pub fn form(&self, a: impl Fn(i64) -> Complex<T>, b: impl Fn(i64) -> Complex<T>) -> Complex<T> {
        self.entries
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &(i, j, x)| acc + a(i).conj() * x * b(j))
    }
}

pub fn cmv_commutator<T: Real>(c: &VerblunskyCoeffs<T>, n: i64) -> CmvCommutator<T> {
    let rho = |j: i64| Complex::new(c.rho(j), T::zero());
    let r = rho(n);
    let entries = if n.rem_euclid(2) == 0 {
        vec![
            (n, n - 2, -r * rho(n - 1)),
            (n, n - 1, -r * c.alpha(n - 1).conj()),
            (n - 1, n, -r * c.alpha(n + 1)),
            (n - 1, n + 1, r * rho(n + 1)),
        ]
    } else {
        vec![
            (n - 2, n, r * rho(n - 1)),
            (n - 1, n, r * c.alpha(n - 1).conj()),
            (n, n - 1, r * c.alpha(n + 1)),
            (n + 1, n - 1, -r * rho(n + 1)),
        ]
    };
    CmvCommutator { n, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::{presets, TruncatedCmv};
    use std::f64::consts::PI;

    fn c(x: f64, y: f64) -> Complex<f64> {
        Complex::new(x, y)
    }

    #[test]
    fn free_bundle_values() {
        let m = presets::cmv_free::<f64>();
        let b = laurent_weyl(&m, 0.0, 4, &WeylPolicy::default()).unwrap();
        assert_eq!((b.p[4], b.r[4], b.q[4], b.s[4]), (c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)));
        assert!(b.u_p(0).norm() < 1e-15);
        assert!((b.v_p(0) - 2.0).norm() < 1e-15);
        assert!((b.u_m(0) + 2.0).norm() < 1e-15);
        assert!(b.v_m(0).norm() < 1e-15);
        assert!((b.wronskian - 4.0).norm() < 1e-15);
        assert!((b.f_plus - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((b.f_minus - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(b.in_ac2);
        assert_eq!(transfer(&m, c(1.0, 0.0), 0), [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    }

    #[test]
    fn bundle_invariants() {
        let p = WeylPolicy::default();
        let models = [
            presets::cmv_free::<f64>(),
            presets::cmv_defect(c(0.5, 0.0), 0),
            presets::cmv_constant(c(0.3, 0.0)),
            presets::cmv_random(0.5, 11, Some(8)),
        ];
        for m in &models {
            for th in [0.9, 2.0, -2.5] {
                let b = laurent_weyl(m, th, 8, &p).unwrap();
                assert!(b.transfer_residual(m) < 1e-12);
                assert!(b.theta_residual(m) < 1e-10, "{}", b.theta_residual(m));
                assert!(b.wronskian_spread < 1e-9);
            }
        }
    }

    #[test]
    fn uv_relation() {
        let m = presets::cmv_random::<f64>(0.6, 5, Some(6));
        let p = WeylPolicy::default();
        let z = c(0.5, 0.2);
        let a = laurent_weyl_at(&m, CmvPoint::Off(z), 5, &p).unwrap();
        let b = laurent_weyl_at(&m, CmvPoint::Off(c(1.0, 0.0) / z.conj()), 5, &p).unwrap();
        for n in -5..=5 {
            assert!((b.v_p(n) + a.u_p(n).conj()).norm() < 1e-10);
            assert!((b.v_m(n) + a.u_m(n).conj()).norm() < 1e-10);
        }
    }

    /// Dense resolvent of a truncation by Gaussian elimination with partial pivoting.
    fn dense_resolvent(t: &TruncatedCmv<f64>, z: Complex<f64>, col: usize) -> Vec<Complex<f64>> {
        let mut a = t.dense();
        let d = t.dim();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] -= z;
        }
        let mut b = vec![c(0.0, 0.0); d];
        b[col] = c(1.0, 0.0);
        for k in 0..d {
            let piv = (k..d).max_by(|&i, &j| a[i][k].norm().partial_cmp(&a[j][k].norm()).unwrap()).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..d {
                let f = a[i][k] / a[k][k];
                if f.norm() == 0.0 {
                    continue;
                }
                for j in k..d {
                    let x = a[k][j];
                    a[i][j] -= f * x;
                }
                let x = b[k];
                b[i] -= f * x;
            }
        }
        for k in (0..d).rev() {
            let mut s = b[k];
            for j in k + 1..d {
                s -= a[k][j] * b[j];
            }
            b[k] = s / a[k][k];
        }
        b
    }

    #[test]
    fn resolvent_matches_truncation() {
        let p = WeylPolicy::default();
        for m in [presets::cmv_free::<f64>(), presets::cmv_random(0.6, 2, Some(6))] {
            let t = TruncatedCmv::new(&m, 200);
            for z in [c(0.5, 0.0), c(0.2, -0.6), c(1.5, 0.4)] {
                for mm in -3..=3i64 {
                    let col = dense_resolvent(&t, z, t.slot(mm).unwrap());
                    for n in -3..=3i64 {
                        let want = col[t.slot(n).unwrap()];
                        let got = cmv_resolvent(&m, n, mm, z, &p).unwrap();
                        assert!((got - want).norm() < 1e-8, "n={n} m={mm} z={z}: {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn commutator_free_entries() {
        let m = presets::cmv_free::<f64>();
        let e = cmv_commutator(&m, 2).entries;
        assert_eq!(e[0], (2, 0, c(-1.0, 0.0)));
        assert_eq!(e[3], (1, 3, c(1.0, 0.0)));
        assert_eq!(e[1].2, c(0.0, 0.0));
        let o = cmv_commutator(&m, 3).entries;
        assert_eq!(o[0], (1, 3, c(1.0, 0.0)));
        assert_eq!(o[3], (4, 2, c(-1.0, 0.0)));
    }

    #[test]
    fn commutator_matches_dense() {
        for seed in 0..20u64 {
            let m = presets::cmv_random::<f64>(0.8, seed, None);
            let t = TruncatedCmv::new(&m, 50);
            let u = t.dense();
            let d = t.dim();
            for n in -3..=3i64 {
                let comm = cmv_commutator(&m, n);
                let chi = |s: usize| if t.lo() + s as i64 >= n { 1.0 } else { 0.0 };
                let mut worst = 0.0f64;
                for i in 0..d {
                    let mut e = vec![c(0.0, 0.0); d];
                    e[i] = c(1.0, 0.0);
                    let sparse = comm.apply(t.lo(), &e);
                    for r in 0..d {
                        let dense = u[r][i] * chi(i) - chi(r) * u[r][i];
                        worst = worst.max((dense - sparse[r]).norm());
                    }
                }
                assert!(worst < 1e-12, "seed {seed} n {n}: {worst}");
            }
        }
    }
}
