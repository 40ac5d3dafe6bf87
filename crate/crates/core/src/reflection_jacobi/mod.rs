//! Spectral reflection probability, reflectionless predicates, Stone matrices and the
//! eigenfunction transforms for whole-line Jacobi operators.

mod stone;
mod transform;

pub use stone::{stone_matrix, ExpansionData, StoneRoute};
pub use transform::{
    ac2_bands, parseval_check, periodic_bands, transform_hat, transform_inverse, ParsevalResult,
    SpectralGrid,
};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_models::JacobiCoeffs;
use crate::scalar::{sup_norm, Real};
use crate::weyl_jacobi::{weyl_solutions, WeylBundle, WeylPolicy};

/// Per-energy reflection record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport<T> {
    pub lambda: T,
    pub r_spec: T,
    pub alpha: Complex<T>,
    pub beta: Complex<T>,
    /// `|Re G_nn(λ+i0)| < tol + err` for `n ∈ {-1, 0, 1}`.
    pub refl_measure: bool,
    /// `|a_0² m_0^+ conj(m_0^-) - 1| < tol + err`.
    pub refl_spectral: bool,
    pub in_ac2: bool,
    pub err: T,
    /// Largest diagonal defect behind `refl_measure`: `max_{n ∈ {-1,0,1}} |Re G_nn|` for
    /// Jacobi, `|Im ⟨δ_n, (𝒞+z)(𝒞-z)^{-1} δ_n⟩|` for CMV.
    pub diag_defect: T,
    /// Jacobi: `|a_0² m_0^+ conj(m_0^-) - 1|`; CMV: `|F_+ - conj(F_-)|`.
    pub spectral_defect: T,
    /// Jacobi only: the ratio with the conjugation moved from the numerator to the
    /// denominator. It equals `1/r_spec` and is recorded only for comparison.
    pub r_swapped: Option<T>,
}

/// Tolerances for the reflectionless flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflTolerances<T> {
    pub measure: T,
    pub spectral: T,
}

impl<T: Real> Default for ReflTolerances<T> {
    fn default() -> Self {
        Self {
            measure: T::lit(1e-6),
            spectral: T::lit(1e-6),
        }
    }
}

/// Wronskian `W(f, g) = a_0 (g_1 f_0 - f_1 g_0)`.
fn wr<T: Real>(a0: T, f: (Complex<T>, Complex<T>), g: (Complex<T>, Complex<T>)) -> Complex<T> {
    (g.1 * f.0 - f.1 * g.0) * a0
}

/// `(α, β)` with `u^+ = α conj(u^+) + β conj(u^-)`, residual checked on the whole bundle.
pub fn alpha_beta<T: Real>(j: &JacobiCoeffs<T>, bundle: &WeylBundle<T>) -> Result<(Complex<T>, Complex<T>)> {
    if !bundle.in_ac2 {
        return Err(Error::UndefinedReflection { at: bundle.lambda.to_f() });
    }
    let a0 = j.a(0);
    let up = (bundle.u_p(0), bundle.u_p(1));
    let cup = (up.0.conj(), up.1.conj());
    let cum = (bundle.u_m(0).conj(), bundle.u_m(1).conj());
    let alpha = wr(a0, up, cum) / wr(a0, cup, cum);
    let beta = wr(a0, up, cup) / wr(a0, cum, cup);
    let k = bundle.k as i64;
    let residual = (-k..=k)
        .map(|n| (bundle.u_p(n) - bundle.u_p(n).conj() * alpha - bundle.u_m(n).conj() * beta).norm())
        .fold(T::zero(), T::max);
    let scale = sup_norm(&bundle.u_plus);
    if !(residual <= T::lit(1e-8) * scale) {
        return Err(Error::InconsistentBundle {
            residual: (residual / scale).to_f(),
        });
    }
    Ok((alpha, beta))
}

/// `|a_0² m^+ conj(m^-) - 1|² / |a_0² m^+ m^- - 1|²`.
pub fn r_from_m<T: Real>(a0: T, m_plus: Complex<T>, m_minus: Complex<T>) -> T {
    let a2 = a0 * a0;
    let num = m_plus * m_minus.conj() * a2 - T::one();
    let den = m_plus * m_minus * a2 - T::one();
    num.norm_sqr() / den.norm_sqr()
}

fn report_from_bundle<T: Real>(
    j: &JacobiCoeffs<T>,
    b: &WeylBundle<T>,
    tol: &ReflTolerances<T>,
) -> Result<ReflectionReport<T>> {
    let (alpha, beta) = alpha_beta(j, b)?;
    let a0 = j.a(0);
    let (mp, mm) = (b.m_plus.value, b.m_minus.value);
    let r = r_from_m(a0, mp, mm);
    let a2 = a0 * a0;
    let num = mp * mm.conj() * a2 - T::one();
    let den = mp * mm * a2 - T::one();
    // first-order propagation of the boundary-value errors
    let dm = a2 * (mm.norm() * b.m_plus.err_estimate + mp.norm() * b.m_minus.err_estimate);
    let two = T::lit(2.0);
    let err = two * num.norm() * dm / den.norm_sqr() + two * num.norm_sqr() * dm / den.norm().powi(3);
    let diag_defect = (-1..=1).map(|n| b.green(n, n).re.abs()).fold(T::zero(), T::max);
    let berr = b.err();
    Ok(ReflectionReport {
        lambda: b.lambda,
        r_spec: r,
        alpha,
        beta,
        refl_measure: diag_defect < tol.measure + berr,
        refl_spectral: num.norm() < tol.spectral + berr,
        in_ac2: b.in_ac2,
        err,
        diag_defect,
        spectral_defect: num.norm(),
        r_swapped: Some(den.norm_sqr() / num.norm_sqr()),
    })
}

/// Spectral reflection probability at `λ` via the Weyl bundle.
pub fn r_spec<T: Real>(
    j: &JacobiCoeffs<T>,
    lambda: T,
    policy: &WeylPolicy<T>,
    tol: &ReflTolerances<T>,
) -> Result<ReflectionReport<T>> {
    let b = weyl_solutions(j, lambda, 2, policy)?;
    if !b.in_ac2 {
        return Err(Error::UndefinedReflection { at: lambda.to_f() });
    }
    report_from_bundle(j, &b, tol)
}

/// Outcome of a predicate over a grid; only accepted points are quantified over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict<T> {
    pub holds: bool,
    /// Grid points where the predicate fails.
    pub witnesses: Vec<T>,
    /// Grid points excluded (not certified in the a.c. set), with the reason.
    pub excluded: Vec<(T, String)>,
    pub max_violation: T,
}

pub(crate) fn verdict<T: Real>(results: Vec<(T, Result<(bool, T)>)>) -> Verdict<T> {
    let mut v = Verdict {
        holds: true,
        witnesses: Vec::new(),
        excluded: Vec::new(),
        max_violation: T::zero(),
    };
    for (lambda, r) in results {
        match r {
            Ok((ok, viol)) => {
                v.max_violation = v.max_violation.max(viol);
                if !ok {
                    v.holds = false;
                    v.witnesses.push(lambda);
                }
            }
            Err(e) => v.excluded.push((lambda, e.to_string())),
        }
    }
    v
}

/// `|Re G_nn(λ+i0)| < tol + err` for all grid points and `n ∈ n_set`.
pub fn is_measure_reflectionless<T: Real>(
    j: &JacobiCoeffs<T>,
    grid: &[T],
    n_set: &[i64],
    tol: T,
    policy: &WeylPolicy<T>,
) -> Verdict<T> {
    let k = n_set.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(1) + 1;
    let results = grid
        .par_iter()
        .map(|&lambda| {
            let r = weyl_solutions(j, lambda, k, policy).and_then(|b| {
                if !b.in_ac2 {
                    return Err(Error::UndefinedReflection { at: lambda.to_f() });
                }
                let viol = n_set.iter().map(|&n| b.green(n, n).re.abs()).fold(T::zero(), T::max);
                Ok((viol < tol + b.err(), viol))
            });
            (lambda, r)
        })
        .collect();
    verdict(results)
}

/// `a_n² m_n^+ conj(m_n^-) = 1` at `n = 0` within `tol + err`, with the propagation audit at
/// `n = ±1` and `u^+ = conj(u^-)` on a window of `window` sites.
pub fn is_spectrally_reflectionless<T: Real>(
    j: &JacobiCoeffs<T>,
    grid: &[T],
    tol: T,
    window: usize,
    policy: &WeylPolicy<T>,
) -> Verdict<T> {
    let results = grid
        .par_iter()
        .map(|&lambda| {
            let r = weyl_solutions(j, lambda, window.max(2), policy).and_then(|b| {
                if !b.in_ac2 {
                    return Err(Error::UndefinedReflection { at: lambda.to_f() });
                }
                let defect = |n: i64| {
                    let a = j.a(n);
                    (b.m_p(n) * b.m_m(n).conj() * (a * a) - T::one()).norm()
                };
                let thr = tol + b.err();
                let d0 = defect(0);
                let dpm = defect(-1).max(defect(1));
                let k = b.k as i64;
                let scale = sup_norm(&b.u_plus).max(sup_norm(&b.u_minus));
                let mismatch = (-k..=k)
                    .map(|n| (b.u_p(n) - b.u_m(n).conj()).norm())
                    .fold(T::zero(), T::max)
                    / scale;
                let viol = d0.max(dpm).max(mismatch);
                Ok((d0 < thr && dpm < thr && mismatch < thr, viol))
            });
            (lambda, r)
        })
        .collect();
    verdict(results)
}

/// Reflection reports over a grid; points outside the certified a.c. set are returned as errors.
pub fn scan<T: Real>(
    j: &JacobiCoeffs<T>,
    grid: &[T],
    policy: &WeylPolicy<T>,
    tol: &ReflTolerances<T>,
) -> Vec<(T, Result<ReflectionReport<T>>)> {
    grid.par_iter()
        .map(|&lambda| (lambda, r_spec(j, lambda, policy, tol)))
        .collect()
}
