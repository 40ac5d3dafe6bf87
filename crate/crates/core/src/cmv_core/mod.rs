//! CMV counterpart of the Jacobi machinery: Carathéodory functions, Laurent and Weyl
//! solutions, resolvent, commutators, Stone matrices and the reflection probability.

mod bundle;
mod schur;

pub use bundle::{
    cmv_commutator, cmv_resolvent, laurent_weyl, laurent_weyl_at, transfer, CmvCommutator, CmvPoint, CmvWeylBundle,
};
pub use schur::{caratheodory, caratheodory_boundary, constant_tail_schur, half_line_caratheodory, schur_function};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice_models::{Side, TruncatedCmv, VerblunskyCoeffs};
use crate::reflection_jacobi::{verdict, ExpansionData, ReflTolerances, ReflectionReport, StoneRoute, Verdict};
use crate::scalar::{sup_norm, Real};
use crate::weyl_jacobi::{extrapolate, WeylPolicy};

/// `|(F_+ - conj F_-)/(F_+ + F_-)|²`.
pub fn r_from_caratheodory<T: Real>(f_plus: Complex<T>, f_minus: Complex<T>) -> T {
    ((f_plus - f_minus.conj()) / (f_plus + f_minus)).norm_sqr()
}

/// `(α, β)` with `u_+ = α ũ_+ + β ũ_-`, where `ũ_±` are the limits from outside the disk
/// (`F_± ↦ -conj F_±`). Residual checked over the bundle.
pub fn cmv_alpha_beta<T: Real>(b: &CmvWeylBundle<T>) -> Result<(Complex<T>, Complex<T>)> {
    if !b.in_ac2 {
        return Err(Error::UndefinedReflection { at: b.theta.to_f() });
    }
    let (fp, fm) = (b.cara_plus.value, b.cara_minus.value);
    let alpha = (fm.conj() - fp) / (fp + fm).conj();
    let beta = Complex::new(T::one(), T::zero()) - alpha;
    let residual = (0..b.p.len())
        .map(|i| {
            let outer_p = b.q[i] - b.p[i] * fp.conj();
            let outer_m = b.q[i] + b.p[i] * fm.conj();
            (b.u_plus[i] - outer_p * alpha - outer_m * beta).norm()
        })
        .fold(T::zero(), T::max);
    let scale = sup_norm(&b.u_plus).max(T::min_positive_value());
    if !(residual <= T::lit(1e-8) * scale) {
        return Err(Error::InconsistentBundle {
            residual: (residual / scale).to_f(),
        });
    }
    Ok((alpha, beta))
}

/// Spectral reflection probability at `e^{iθ}`; the report's `lambda` field holds `θ`.
pub fn cmv_r_spec<T: Real>(
    c: &VerblunskyCoeffs<T>,
    theta: T,
    policy: &WeylPolicy<T>,
    tol: &ReflTolerances<T>,
) -> Result<ReflectionReport<T>> {
    let b = laurent_weyl(c, theta, 2, policy)?;
    if !b.in_ac2 {
        return Err(Error::UndefinedReflection { at: theta.to_f() });
    }
    let (alpha, beta) = cmv_alpha_beta(&b)?;
    let (fp, fm) = (b.cara_plus.value, b.cara_minus.value);
    let num = fp - fm.conj();
    let den = fp + fm;
    let r = r_from_caratheodory(fp, fm);
    let two = T::lit(2.0);
    let de = b.err();
    let err = two * num.norm() * de / den.norm_sqr() + two * num.norm_sqr() * de / den.norm().powi(3);
    let diag_defect = (-1..=1).map(|n| b.caratheodory_entry(n, n).im.abs()).fold(T::zero(), T::max);
    Ok(ReflectionReport {
        lambda: theta,
        r_spec: r,
        alpha,
        beta,
        refl_measure: diag_defect < tol.measure + de,
        refl_spectral: num.norm() < tol.spectral + de,
        in_ac2: true,
        err,
        diag_defect,
        spectral_defect: num.norm(),
        r_swapped: None,
    })
}

/// `F_+(e^{iθ}, n) = conj F_-(e^{iθ}, n)` at `n = 0` within `tol + err`, audited at `n = ±1`.
pub fn cmv_reflectionless<T: Real>(c: &VerblunskyCoeffs<T>, arc: &[T], tol: T, policy: &WeylPolicy<T>) -> Verdict<T> {
    let results = arc
        .par_iter()
        .map(|&theta| {
            let r = (|| {
                let b = laurent_weyl(c, theta, 1, policy)?;
                if !b.in_ac2 {
                    return Err(Error::UndefinedReflection { at: theta.to_f() });
                }
                let mut worst = T::zero();
                let mut err = b.err();
                for n in -1..=1 {
                    let fp = caratheodory_boundary(&c.half_line(n, Side::Plus), theta, policy)?;
                    let fm = caratheodory_boundary(&c.half_line(n, Side::Minus), theta, policy)?;
                    err = err.max(fp.err_estimate + fm.err_estimate);
                    worst = worst.max((fp.value - fm.value.conj()).norm());
                }
                Ok((worst < tol + err, worst))
            })();
            (theta, r)
        })
        .collect();
    verdict(results)
}

/// Reflection reports over an angle grid.
pub fn cmv_scan<T: Real>(
    c: &VerblunskyCoeffs<T>,
    thetas: &[T],
    policy: &WeylPolicy<T>,
    tol: &ReflTolerances<T>,
) -> Vec<(T, Result<ReflectionReport<T>>)> {
    thetas
        .par_iter()
        .map(|&t| (t, cmv_r_spec(c, t, policy, tol)))
        .collect()
}

/// Truncation half-width used for the radial rung `r = 1 - ε` of the resolvent route.
fn truncation_for(eps: f64, window: i64) -> usize {
    (64.0 / eps).ceil() as usize + 2 * window.unsigned_abs() as usize + 8
}

/// Largest truncation the resolvent route will build; smaller rungs are dropped.
pub const MAX_STONE_TRUNCATION: usize = 1 << 18;

/// Stone matrix `S(n, m; e^{iθ})` on `window`.
pub fn cmv_stone<T: Real>(
    c: &VerblunskyCoeffs<T>,
    theta: T,
    window: &[i64],
    route: StoneRoute,
    policy: &WeylPolicy<T>,
) -> Result<ExpansionData<T>> {
    if window.is_empty() {
        return Err(Error::Domain("empty Stone window".into()));
    }
    match route {
        StoneRoute::Expansion => {
            let k = window.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0) + 1;
            let b = laurent_weyl(c, theta, k, policy)?;
            if !b.in_ac2 {
                return Err(Error::UndefinedReflection { at: theta.to_f() });
            }
            let up: Vec<_> = window.iter().map(|&n| b.u_p(n)).collect();
            let um: Vec<_> = window.iter().map(|&n| b.u_m(n)).collect();
            let s: Vec<Vec<Complex<T>>> = (0..window.len())
                .map(|i| {
                    (0..window.len())
                        .map(|k| up[i] * up[k].conj() * b.f_plus + um[i] * um[k].conj() * b.f_minus)
                        .collect()
                })
                .collect();
            let smax = s.iter().flatten().map(|v| v.norm()).fold(T::zero(), T::max);
            Ok(ExpansionData {
                lambda: theta,
                route,
                window: window.to_vec(),
                s,
                f_plus: b.f_plus,
                f_minus: b.f_minus,
                u_plus: up,
                u_minus: um,
                err: T::lit(4.0) * smax * b.err(),
            })
        }
        StoneRoute::ResolventLimit => stone_by_truncation(c, theta, window, policy),
    }
}

fn stone_by_truncation<T: Real>(
    c: &VerblunskyCoeffs<T>,
    theta: T,
    window: &[i64],
    policy: &WeylPolicy<T>,
) -> Result<ExpansionData<T>> {
    let lp = &policy.ladder;
    let reach = window.iter().map(|n| n.abs()).max().unwrap_or(0);
    let z = Complex::from_polar(T::one(), theta);
    let d = window.len();
    let inv_two_pi = T::one() / (T::lit(2.0) * T::PI());
    let mut rungs: Vec<(T, Vec<Vec<Complex<T>>>)> = Vec::new();
    let mut eps = lp.eps0;
    for _ in 0..lp.rungs {
        let n = truncation_for(eps.to_f(), reach);
        if n > MAX_STONE_TRUNCATION {
            break;
        }
        let t = TruncatedCmv::new(c, n);
        let r = T::one() - eps;
        let w_in = z * r;
        let w_out = z / r;
        let col_in = t.resolvent_columns(w_in, window)?;
        let col_out = t.resolvent_columns(w_out, window)?;
        let s: Vec<Vec<Complex<T>>> = (0..d)
            .map(|i| {
                let row = t.slot(window[i]).unwrap();
                (0..d)
                    .map(|k| (w_in * col_in[k][row] - w_out * col_out[k][row]) * (T::lit(2.0) * inv_two_pi))
                    .collect()
            })
            .collect();
        rungs.push((eps, s));
        eps *= lp.ratio;
    }
    if rungs.len() < lp.min_rungs.max(2) {
        return Err(Error::Capacity(format!(
            "resolvent route needs truncations beyond {MAX_STONE_TRUNCATION} sites"
        )));
    }
    let mut s = vec![vec![Complex::new(T::zero(), T::zero()); d]; d];
    let mut err = T::zero();
    let mut flagged = false;
    for i in 0..d {
        for k in 0..d {
            let bv = extrapolate(rungs.iter().map(|(e, s)| (*e, s[i][k])).collect(), lp);
            s[i][k] = bv.value;
            err = err.max(bv.err_estimate);
            flagged |= bv.flagged;
        }
    }
    if flagged {
        return Err(Error::Convergence {
            what: format!("CMV Stone ladder at θ = {theta}"),
            gap: err.to_f(),
        });
    }
    Ok(ExpansionData {
        lambda: theta,
        route: StoneRoute::ResolventLimit,
        window: window.to_vec(),
        s,
        f_plus: T::nan(),
        f_minus: T::nan(),
        u_plus: Vec::new(),
        u_minus: Vec::new(),
        err,
    })
}
