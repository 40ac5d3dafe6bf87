use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use super::window::EnergyWindow;
use crate::error::{Error, Result};
use crate::lattice_models::{TruncatedCmv, TruncatedOperator};
use crate::linalg::SymTridiagEigen;
use crate::scalar::Real;

/// Largest Jacobi truncation propagated through a dense eigendecomposition.
pub const MAX_DENSE_DIM: usize = 8001;

/// Samples used for the Fourier coefficients of a circle profile.
const FOURIER_SAMPLES: usize = 1 << 15;

type C<T> = Complex<T>;

fn zero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

fn check_len<T: Real>(op: &TruncatedOperator<T>, len: usize) -> Result<()> {
    if len != op.dim() {
        return Err(Error::Domain(format!("state of length {len} on a truncation of dimension {}", op.dim())));
    }
    Ok(())
}

fn eigen<T: Real>(op: &TruncatedOperator<T>) -> Result<Option<Arc<SymTridiagEigen<T>>>> {
    match op {
        TruncatedOperator::Jacobi(j) => {
            if j.dim() > MAX_DENSE_DIM {
                return Err(Error::Capacity(format!(
                    "dimension {} exceeds the dense propagator limit {MAX_DENSE_DIM}; use a Chebyshev propagator",
                    j.dim()
                )));
            }
            Ok(Some(j.eigen()))
        }
        TruncatedOperator::Cmv(_) => Ok(None),
    }
}

/// Integer step count of a CMV time argument.
pub fn steps_of<T: Real>(t: T) -> Result<i64> {
    if t.fract() != T::zero() || !t.is_finite() {
        return Err(Error::Domain(format!("CMV evolution takes integer steps, got {t}")));
    }
    Ok(t.to_i64().unwrap_or(0))
}

/// `𝒞^k v` by repeated banded multiplication.
pub fn cmv_power<T: Real>(c: &TruncatedCmv<T>, v: &[C<T>], k: i64) -> Result<Vec<C<T>>> {
    let mut x = v.to_vec();
    for _ in 0..k.unsigned_abs() {
        x = if k > 0 { c.apply(&x)? } else { c.apply_inverse(&x)? };
    }
    Ok(x)
}

/// `e^{-itJ} ψ` (Jacobi) or `𝒞^t ψ` (CMV, integer `t`).
pub fn evolve<T: Real>(op: &TruncatedOperator<T>, psi: &[C<T>], t: T) -> Result<Vec<C<T>>> {
    Flow::new(op, psi)?.at(t)
}

/// A state followed in time. Jacobi flows keep eigen-coefficients; CMV flows step from the
/// last requested time.
pub struct Flow<'a, T: Real> {
    op: &'a TruncatedOperator<T>,
    kind: FlowKind<T>,
}

enum FlowKind<T: Real> {
    Spectral {
        eigen: Arc<SymTridiagEigen<T>>,
        coeffs: Vec<C<T>>,
    },
    Stepped {
        steps: i64,
        state: Vec<C<T>>,
    },
}

impl<'a, T: Real> Flow<'a, T> {
    pub fn new(op: &'a TruncatedOperator<T>, psi: &[C<T>]) -> Result<Self> {
        check_len(op, psi.len())?;
        let kind = match eigen(op)? {
            Some(e) => FlowKind::Spectral {
                coeffs: e.coefficients(psi),
                eigen: e,
            },
            None => FlowKind::Stepped {
                steps: 0,
                state: psi.to_vec(),
            },
        };
        Ok(Self { op, kind })
    }

    pub fn at(&mut self, t: T) -> Result<Vec<C<T>>> {
        match &mut self.kind {
            FlowKind::Spectral { eigen, coeffs } => Ok(eigen.synthesize(coeffs, |l| Complex::from_polar(T::one(), -l * t))),
            FlowKind::Stepped { steps, state } => {
                let target = steps_of(t)?;
                let TruncatedOperator::Cmv(c) = self.op else {
                    unreachable!("stepped flow on a CMV truncation")
                };
                *state = cmv_power(c, state, target - *steps)?;
                *steps = target;
                Ok(state.clone())
            }
        }
    }
}

/// Fourier coefficients `ĥ_m`, `m = 0..=M`, of the window profile on the circle, trimmed
/// where they fall below rounding level.
fn profile_fourier<T: Real>(w: &EnergyWindow<T>) -> Vec<C<f64>> {
    let s = FOURIER_SAMPLES;
    let m_max = s / 4;
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples: Vec<(f64, f64)> = (0..s)
        .map(|j| {
            let th = two_pi * j as f64 / s as f64;
            (th, w.profile_angle(T::lit(th)).to_f())
        })
        .filter(|&(_, h)| h != 0.0)
        .collect();
    let chunks: Vec<Vec<C<f64>>> = samples
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = vec![C::new(0.0, 0.0); m_max + 1];
            for &(th, h) in chunk {
                let step = C::from_polar(1.0, -th);
                let mut e = C::new(h / s as f64, 0.0);
                for a in acc.iter_mut() {
                    *a += e;
                    e *= step;
                }
            }
            acc
        })
        .collect();
    let mut hat = vec![C::new(0.0, 0.0); m_max + 1];
    for c in chunks {
        for (h, x) in hat.iter_mut().zip(c) {
            *h += x;
        }
    }
    let floor = hat[0].norm() * 1e-17;
    let last = hat.iter().rposition(|h| h.norm() > floor).unwrap_or(0);
    hat.truncate(last + 1);
    hat
}

/// `h(𝒞) ψ = Σ_m ĥ_m 𝒞^m ψ` for a real profile (`ĥ_{-m} = conj ĥ_m`).
fn cmv_filter<T: Real>(c: &TruncatedCmv<T>, w: &EnergyWindow<T>, psi: &[C<T>]) -> Result<Vec<C<T>>> {
    let hat = profile_fourier(w);
    let cv = |h: C<f64>| Complex::new(T::lit(h.re), T::lit(h.im));
    let mut out: Vec<C<T>> = psi.iter().map(|&x| x * cv(hat[0])).collect();
    let (mut fwd, mut back) = (psi.to_vec(), psi.to_vec());
    for h in &hat[1..] {
        fwd = c.apply(&fwd)?;
        back = c.apply_inverse(&back)?;
        let (hp, hm) = (cv(*h), cv(h.conj()));
        for ((o, &f), &b) in out.iter_mut().zip(&fwd).zip(&back) {
            *o += hp * f + hm * b;
        }
    }
    Ok(out)
}

/// `profile(T) ψ`; errors when the result carries less than `1e-8` of the input mass.
pub fn spectral_filter<T: Real>(op: &TruncatedOperator<T>, window: &EnergyWindow<T>, psi: &[C<T>]) -> Result<Vec<C<T>>> {
    check_len(op, psi.len())?;
    window.validate()?;
    let out = match op {
        TruncatedOperator::Jacobi(_) => {
            let e = eigen(op)?.expect("Jacobi truncation has an eigendecomposition");
            let c = e.coefficients(psi);
            e.synthesize(&c, |l| Complex::new(window.profile(l), T::zero()))
        }
        TruncatedOperator::Cmv(c) => cmv_filter(c, window, psi)?,
    };
    let before = norm_sqr(psi);
    let after = norm_sqr(&out);
    if !(after > T::lit(1e-8) * before) {
        return Err(Error::EmptyWindow {
            mass: if before > T::zero() { (after / before).to_f() } else { 0.0 },
        });
    }
    Ok(out)
}

pub fn norm_sqr<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// `(‖χ^- ψ‖², ‖χ^+ ψ‖²)` with site 0 on the left.
pub fn split_mass<T: Real>(lo: i64, psi: &[C<T>]) -> (T, T) {
    let mut l = T::zero();
    let mut r = T::zero();
    for (k, x) in psi.iter().enumerate() {
        if lo + k as i64 <= 0 {
            l += x.norm_sqr();
        } else {
            r += x.norm_sqr();
        }
    }
    (l, r)
}

/// Mass on sites satisfying `keep`.
pub fn mass_where<T: Real>(lo: i64, psi: &[C<T>], keep: impl Fn(i64) -> bool) -> T {
    psi.iter()
        .enumerate()
        .filter(|(k, _)| keep(lo + *k as i64))
        .map(|(_, x)| x.norm_sqr())
        .sum()
}

/// `ψ` with the sites failing `keep` set to zero.
pub fn cut<T: Real>(lo: i64, psi: &[C<T>], keep: impl Fn(i64) -> bool) -> Vec<C<T>> {
    psi.iter()
        .enumerate()
        .map(|(k, &x)| if keep(lo + k as i64) { x } else { zero() })
        .collect()
}

/// Centroid and radius: every site farther than `radius` from the centroid together holds
/// at most `tail` of the mass.
pub fn packet_extent<T: Real>(lo: i64, psi: &[C<T>], tail: T) -> (T, T) {
    let total = norm_sqr(psi);
    if total == T::zero() {
        return (T::zero(), T::zero());
    }
    let centroid = psi
        .iter()
        .enumerate()
        .map(|(k, x)| x.norm_sqr() * T::from_i(lo + k as i64))
        .sum::<T>()
        / total;
    let mut by_distance: Vec<(T, T)> = psi
        .iter()
        .enumerate()
        .map(|(k, x)| ((T::from_i(lo + k as i64) - centroid).abs(), x.norm_sqr()))
        .collect();
    by_distance.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let budget = tail * total;
    let mut outside = T::zero();
    for (d, m) in by_distance {
        outside += m;
        if outside > budget {
            return (centroid, d);
        }
    }
    (centroid, T::zero())
}

pub fn delta<T: Real>(op: &TruncatedOperator<T>, site: i64) -> Result<Vec<C<T>>> {
    let lo = op.lo();
    let hi = lo + op.dim() as i64 - 1;
    if site < lo || site > hi {
        return Err(Error::OutOfWindow { index: site, lo, hi });
    }
    let mut v = vec![zero(); op.dim()];
    v[(site - lo) as usize] = Complex::new(T::one(), T::zero());
    Ok(v)
}

/// Largest propagation speed: `2 sup a + sup |b|` (Jacobi), 2 sites per step (CMV).
pub fn speed_bound<T: Real>(op: &TruncatedOperator<T>) -> T {
    match op {
        TruncatedOperator::Jacobi(j) => {
            let a = j.off().iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            let b = j.diag().iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            T::lit(2.0) * a + b
        }
        TruncatedOperator::Cmv(_) => T::lit(2.0),
    }
}

/// Group-velocity bound used for timing: `2 sup a` (Jacobi), 2 (CMV).
pub(crate) fn transport_speed<T: Real>(op: &TruncatedOperator<T>) -> T {
    match op {
        TruncatedOperator::Jacobi(j) => T::lit(2.0) * j.off().iter().fold(T::zero(), |m, &x| m.max(x.abs())),
        TruncatedOperator::Cmv(_) => T::lit(2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::{presets, truncate, OperatorModel};

    fn jac(m: crate::lattice_models::JacobiCoeffs<f64>, n: usize) -> TruncatedOperator<f64> {
        truncate(&OperatorModel::Jacobi(m), n).unwrap()
    }

    fn cmv(m: crate::lattice_models::VerblunskyCoeffs<f64>, n: usize) -> TruncatedOperator<f64> {
        truncate(&OperatorModel::Cmv(m), n).unwrap()
    }

    #[test]
    fn free_taylor() {
        let op = jac(presets::free(), 60);
        let d0 = delta(&op, 0).unwrap();
        let t = 1e-3;
        let v = evolve(&op, &d0, t).unwrap();
        let lo = op.lo();
        for (k, x) in v.iter().enumerate() {
            let n = lo + k as i64;
            let expect = match n {
                0 => Complex::new(1.0 - t * t, 0.0),
                -1 | 1 => Complex::new(0.0, -t),
                -2 | 2 => Complex::new(-t * t / 2.0, 0.0),
                _ => Complex::new(0.0, 0.0),
            };
            assert!((x - expect).norm() < 1e-8, "n={n} {x}");
        }
    }

    #[test]
    fn norm_preserved() {
        let models = [
            jac(presets::defect(1.0, 0), 200),
            jac(presets::period2(0.5), 200),
            jac(presets::anderson(1.0, 3, Some(50)), 200),
        ];
        for op in &models {
            let mut psi = delta(op, -3).unwrap();
            psi[210] = Complex::new(0.3, -0.4);
            let n0 = norm_sqr(&psi);
            let mut flow = Flow::new(op, &psi).unwrap();
            for t in [0.5, 10.0, 77.7, 300.0] {
                assert!((norm_sqr(&flow.at(t).unwrap()) - n0).abs() < 1e-10);
            }
        }
        let op = cmv(presets::cmv_random(0.6, 4, Some(40)), 200);
        let psi = delta(&op, 5).unwrap();
        let mut flow = Flow::new(&op, &psi).unwrap();
        for t in [1.0, 17.0, 400.0, -30.0] {
            assert!((norm_sqr(&flow.at(t).unwrap()) - 1.0).abs() < 1e-10);
        }
        assert!(flow.at(0.5).is_err());
    }

    #[test]
    fn cmv_one_step_is_column() {
        let op = cmv(presets::cmv_free(), 20);
        let TruncatedOperator::Cmv(c) = &op else { unreachable!() };
        let d0 = delta(&op, 0).unwrap();
        let v = evolve(&op, &d0, 1.0).unwrap();
        let dense = c.dense();
        let k0 = c.slot(0).unwrap();
        for r in 0..op.dim() {
            assert_eq!(v[r], dense[r][k0]);
        }
        // free CMV carries even sites two to the right
        assert_eq!(v[c.slot(2).unwrap()], Complex::new(1.0, 0.0));
    }

    #[test]
    fn jacobi_matches_dense_exponential_series() {
        let op = jac(presets::defect(0.7, 1), 12);
        let TruncatedOperator::Jacobi(j) = &op else { unreachable!() };
        let psi = delta(&op, 2).unwrap();
        let t = 0.8;
        // Taylor series of e^{-itJ} on the 25x25 matrix
        let mut term = psi.clone();
        let mut sum = psi.clone();
        for k in 1..80 {
            let jt = j.apply(&term).unwrap();
            term = jt.iter().map(|x| x * Complex::new(0.0, -t / k as f64)).collect();
            for (s, x) in sum.iter_mut().zip(&term) {
                *s += x;
            }
        }
        let v = evolve(&op, &psi, t).unwrap();
        let gap = v.iter().zip(&sum).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn light_cone() {
        let op = jac(presets::defect(1.0, 0), 400);
        let d0 = delta(&op, 0).unwrap();
        let v_max = speed_bound(&op);
        for t in [10.0, 50.0, 120.0] {
            let v = evolve(&op, &d0, t).unwrap();
            let r = v_max * t + 10.0 * f64::cbrt(t) + 10.0;
            let outside = mass_where(op.lo(), &v, |n| (n as f64).abs() > r);
            assert!(outside < 1e-8, "t={t} outside={outside}");
        }
        let op = cmv(presets::cmv_random(0.8, 1, Some(30)), 300);
        let d0 = delta(&op, 1).unwrap();
        let v = evolve(&op, &d0, 60.0).unwrap();
        assert_eq!(mass_where(op.lo(), &v, |n| (n - 1).abs() > 120), 0.0);
    }

    #[test]
    fn filter_full_window_is_identity() {
        let op = jac(presets::defect(1.0, 0), 80);
        let psi = delta(&op, 3).unwrap();
        let w = EnergyWindow::new(0.0, 10.0, 0.5).unwrap();
        let out = spectral_filter(&op, &w, &psi).unwrap();
        assert!(out.iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-10));
        let op = cmv(presets::cmv_defect(Complex::new(0.5, 0.0), 0), 80);
        let psi = delta(&op, 3).unwrap();
        let w = EnergyWindow::new(0.0, 10.0, 0.9).unwrap();
        let out = spectral_filter(&op, &w, &psi).unwrap();
        assert!(out.iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn disjoint_window_is_empty() {
        let op = jac(presets::free(), 100);
        let psi = delta(&op, 0).unwrap();
        let w = EnergyWindow::new(3.0, 0.3, 0.0).unwrap();
        assert!(matches!(spectral_filter(&op, &w, &psi), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn filtered_mass_matches_density_of_states() {
        // free local density of states at a deep site: 1/(π sqrt(4 - λ²))
        let op = jac(presets::free(), 1500);
        let psi = delta(&op, 0).unwrap();
        let w = EnergyWindow::new(0.0, 0.4, 0.0).unwrap();
        let out = spectral_filter(&op, &w, &psi).unwrap();
        let (x, wt) = crate::linalg::gauss_legendre::<f64>(64);
        let oracle: f64 = x
            .iter()
            .zip(&wt)
            .map(|(&x, &wt)| {
                let l = 0.4 * x;
                0.4 * wt * w.profile(l).powi(2) / (std::f64::consts::PI * (4.0 - l * l).sqrt())
            })
            .sum();
        let mass = norm_sqr(&out);
        assert!((mass - oracle).abs() < 2e-3 * oracle, "{mass} vs {oracle}");
    }

    #[test]
    fn filter_is_idempotent_on_flat_top() {
        let narrow = EnergyWindow::new(0.1, 0.2, 0.0).unwrap();
        let wide = EnergyWindow::new(0.1, 0.5, 0.6).unwrap();
        let ops = [jac(presets::period2(0.5), 300), cmv(presets::cmv_defect(Complex::new(0.5, 0.0), 0), 300)];
        for (i, op) in ops.iter().enumerate() {
            let narrow = if i == 0 { EnergyWindow::new(1.2, 0.1, 0.0).unwrap() } else { narrow };
            let wide = if i == 0 { EnergyWindow::new(1.2, 0.25, 0.6).unwrap() } else { wide };
            let psi = spectral_filter(op, &narrow, &delta(op, -2).unwrap()).unwrap();
            let again = spectral_filter(op, &wide, &psi).unwrap();
            let gap = psi.iter().zip(&again).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-10, "model {i}: {gap}");
        }
    }
}
