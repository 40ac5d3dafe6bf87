use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{cut, evolve, norm_sqr};
use super::HorizonPolicy;
use crate::error::{Error, Result};
use crate::lattice_models::{TruncatedCmv, TruncatedJacobi, TruncatedOperator};
use crate::linalg::TridiagLu;
use crate::scalar::Real;

type C<T> = Complex<T>;

/// Half-line cut-off: `Left` keeps sites `n <= 0`, `Right` keeps `n > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    Left,
    Right,
}

impl Half {
    pub fn keeps(self, n: i64) -> bool {
        match self {
            Half::Left => n <= 0,
            Half::Right => n > 0,
        }
    }
}

/// `Plus` takes the limit `t → -∞` (where the state came from), `Minus` takes `t → +∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSign {
    Plus,
    Minus,
}

/// Two estimates of an asymptotic localization projection applied to `ψ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    /// Sandwich `e^{itH} χ e^{-itH} ψ` at `|t| = horizon`.
    pub vector: Vec<C<T>>,
    /// Abelian mean over the ε ladder, extrapolated to ε = 0.
    pub abelian: Vec<C<T>>,
    pub horizon: T,
    /// `‖vector - abelian‖ / ‖ψ‖`.
    pub gap: T,
    /// Size of the last extrapolation correction, relative to `‖ψ‖`.
    pub extrapolation_err: T,
}

/// Davies–Simon projection `P_{half}^{sign} ψ`, cross-checked by two estimators.
pub fn project_ds<T: Real>(
    op: &TruncatedOperator<T>,
    psi: &[C<T>],
    half: Half,
    sign: TimeSign,
    policy: &HorizonPolicy<T>,
) -> Result<Projection<T>> {
    let norm = norm_sqr(psi).sqrt();
    if norm == T::zero() {
        return Err(Error::Domain("projection of the zero vector".into()));
    }
    let s = policy.sandwich(op);
    let lo = op.lo();
    let (t1, t2) = match sign {
        TimeSign::Plus => (-s, s),
        TimeSign::Minus => (s, -s),
    };
    let mid = cut(lo, &evolve(op, psi, t1)?, |n| half.keeps(n));
    let vector = evolve(op, &mid, t2)?;

    let eps = &policy.abel_eps;
    if eps.is_empty() {
        return Err(Error::Domain("empty abelian ε ladder".into()));
    }
    let rungs: Vec<Vec<C<T>>> = eps
        .iter()
        .map(|&e| match op {
            TruncatedOperator::Jacobi(j) => abelian_jacobi(j, psi, half, sign, e),
            TruncatedOperator::Cmv(c) => abelian_cmv(c, psi, half, sign, e),
        })
        .collect::<Result<_>>()?;
    let (abelian, correction) = extrapolate_to_zero(eps, rungs);
    let gap = distance(&vector, &abelian) / norm;
    let out = Projection {
        vector,
        abelian,
        horizon: s,
        gap,
        extrapolation_err: correction / norm,
    };
    if !(gap <= policy.gap_tol) {
        return Err(Error::NotConverged { gap: gap.to_f() });
    }
    Ok(out)
}

fn distance<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<T>().sqrt()
}

/// Neville extrapolation of vector samples `v(ε_i)` to `ε = 0`; also returns the norm of the
/// last correction.
fn extrapolate_to_zero<T: Real>(eps: &[T], vals: Vec<Vec<C<T>>>) -> (Vec<C<T>>, T) {
    let n = vals.len();
    let mut p = vals;
    let mut correction = T::zero();
    for m in 1..n {
        let prev_best = p[0].clone();
        for i in 0..n - m {
            let (xi, xm) = (eps[i], eps[i + m]);
            let next: Vec<C<T>> = p[i]
                .iter()
                .zip(&p[i + 1])
                .map(|(&a, &b)| (b * xi - a * xm) / (xi - xm))
                .collect();
            p[i] = next;
        }
        correction = distance(&p[0], &prev_best);
    }
    (p.swap_remove(0), correction)
}

/// `χψ - Σ_k c_k (J - λ_k ∓ iε)^{-1} [J, χ] v_k` over the eigenpairs carrying `ψ`.
fn abelian_jacobi<T: Real>(j: &TruncatedJacobi<T>, psi: &[C<T>], half: Half, sign: TimeSign, eps: T) -> Result<Vec<C<T>>> {
    let e = j.eigen();
    let c = e.coefficients(psi);
    let (s0, s1) = match (j.slot(0), j.slot(1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Domain("truncation does not contain sites 0 and 1".into())),
    };
    let a0 = j.off()[s0];
    // [J, χ^-] v = a_0 (v_0 δ_1 - v_1 δ_0); χ^+ flips the sign
    let orient = match half {
        Half::Left => T::one(),
        Half::Right => -T::one(),
    };
    let shift = match sign {
        TimeSign::Plus => eps,
        TimeSign::Minus => -eps,
    };
    let cmax = c.iter().map(|x| x.norm()).fold(T::zero(), T::max);
    let floor = cmax * T::lit(1e-13);
    let off: Vec<C<T>> = j.off().iter().map(|&a| Complex::new(a, T::zero())).collect();
    let d = j.dim();
    let ks: Vec<usize> = (0..d).filter(|&k| c[k].norm() > floor).collect();
    // fixed chunks summed in index order keep the result independent of scheduling
    let partials: Vec<Vec<C<T>>> = ks
        .par_chunks(32)
        .map(|chunk| -> Result<Vec<C<T>>> {
            let mut acc = vec![Complex::new(T::zero(), T::zero()); d];
            for &k in chunk {
                let v = e.vector(k);
                let z = Complex::new(e.values()[k], shift);
                let diag: Vec<C<T>> = j.diag().iter().map(|&b| Complex::new(b, T::zero()) - z).collect();
                let lu = TridiagLu::new(&off, &diag, &off, None)?;
                let mut rhs = vec![Complex::new(T::zero(), T::zero()); d];
                rhs[s0] = c[k] * (-a0 * v[s1] * orient);
                rhs[s1] = c[k] * (a0 * v[s0] * orient);
                lu.solve_in_place(&mut rhs);
                for (x, y) in acc.iter_mut().zip(rhs) {
                    *x += y;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![Complex::new(T::zero(), T::zero()); d];
    for p in partials {
        for (x, y) in sum.iter_mut().zip(p) {
            *x += y;
        }
    }
    let lo = j.lo();
    Ok(cut(lo, psi, |n| half.keeps(n))
        .into_iter()
        .zip(sum)
        .map(|(x, s)| x - s)
        .collect())
}

/// Abel mean `(1-r) Σ_n r^n 𝒞^{∓n} χ 𝒞^{±n} ψ` with `r = 1 - ε`, summed by parts and Horner.
fn abelian_cmv<T: Real>(c: &TruncatedCmv<T>, psi: &[C<T>], half: Half, sign: TimeSign, eps: T) -> Result<Vec<C<T>>> {
    let lo = c.lo();
    let r = T::one() - eps;
    let terms = (T::lit(36.0) / eps).ceil().to_usize().unwrap_or(1).max(1);
    let chi = |v: &[C<T>]| cut(lo, v, |n| half.keeps(n));
    // [𝒞, χ] is supported next to the cut
    let local: Vec<usize> = (-6i64..=6).filter_map(|n| c.slot(n)).collect();
    let commutator = |v: &[C<T>]| -> Result<Vec<(usize, C<T>)>> {
        let a = c.apply(&chi(v))?;
        let b = chi(&c.apply(v)?);
        Ok(local.iter().map(|&k| (k, a[k] - b[k])).collect())
    };
    let forward = matches!(sign, TimeSign::Minus);
    // y_k = X 𝒞^{-k} ψ (Plus) or X 𝒞^{k-1} ψ (Minus)
    let mut ys = Vec::with_capacity(terms);
    let mut phi = psi.to_vec();
    for _ in 0..terms {
        if forward {
            ys.push(commutator(&phi)?);
            phi = c.apply(&phi)?;
        } else {
            phi = c.apply_inverse(&phi)?;
            ys.push(commutator(&phi)?);
        }
    }
    let mut s = vec![Complex::new(T::zero(), T::zero()); c.dim()];
    for y in ys.iter().rev() {
        let mut next: Vec<C<T>> = if forward { c.apply_inverse(&s)? } else { c.apply(&s)? };
        for x in next.iter_mut() {
            *x = *x * r;
        }
        for &(k, v) in y {
            next[k] += v;
        }
        s = next;
    }
    let tail: Vec<C<T>> = if forward {
        c.apply_inverse(&s)?.into_iter().map(|x| -x * r).collect()
    } else {
        s.into_iter().map(|x| x * r).collect()
    };
    Ok(chi(psi).into_iter().zip(tail).map(|(a, b)| a + b).collect())
}
