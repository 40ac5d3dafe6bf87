use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_models::{JacobiCoeffs, Side};
use crate::linalg::TridiagLu;
use crate::scalar::Real;
use crate::weyl_jacobi::{extrapolate, m_half_line, weyl_solutions, WeylPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoneRoute {
    /// `π^{-1} Im G(λ+iε)` extrapolated along the ε-ladder.
    ResolventLimit,
    /// Rank-two sum over the Weyl solutions with densities `f_±`.
    Expansion,
}

/// Stone matrix on a window of sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionData<T> {
    pub lambda: T,
    pub route: StoneRoute,
    pub window: Vec<i64>,
    /// `s[i][k] = S_{window[i], window[k]}`.
    pub s: Vec<Vec<Complex<T>>>,
    pub f_plus: T,
    pub f_minus: T,
    /// Weyl solutions on the window (expansion route only; empty otherwise).
    pub u_plus: Vec<Complex<T>>,
    pub u_minus: Vec<Complex<T>>,
    /// Largest per-entry error estimate.
    pub err: T,
}

impl<T: Real> ExpansionData<T> {
    pub fn entry(&self, n: i64, m: i64) -> Option<Complex<T>> {
        let i = self.window.iter().position(|&x| x == n)?;
        let k = self.window.iter().position(|&x| x == m)?;
        Some(self.s[i][k])
    }

    /// `max |S_nm - conj(S_mn)|`.
    pub fn hermitian_defect(&self) -> T {
        let d = self.window.len();
        let mut worst = T::zero();
        for i in 0..d {
            for k in 0..d {
                worst = worst.max((self.s[i][k] - self.s[k][i].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, in descending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        let d = self.window.len();
        let half = T::lit(0.5);
        let h: Vec<Vec<Complex<T>>> = (0..d)
            .map(|i| (0..d).map(|k| (self.s[i][k] + self.s[k][i].conj()) * half).collect())
            .collect();
        crate::linalg::hermitian_eigenvalues(&h)
    }
}

/// Stone matrix `S(λ)` over `window` by the requested route.
pub fn stone_matrix<T: Real>(
    j: &JacobiCoeffs<T>,
    lambda: T,
    window: &[i64],
    route: StoneRoute,
    policy: &WeylPolicy<T>,
) -> Result<ExpansionData<T>> {
    if window.is_empty() {
        return Err(Error::Domain("empty Stone window".into()));
    }
    match route {
        StoneRoute::Expansion => expansion(j, lambda, window, policy),
        StoneRoute::ResolventLimit => resolvent_limit(j, lambda, window, policy),
    }
}

fn expansion<T: Real>(
    j: &JacobiCoeffs<T>,
    lambda: T,
    window: &[i64],
    policy: &WeylPolicy<T>,
) -> Result<ExpansionData<T>> {
    let k = window.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0) + 1;
    let b = weyl_solutions(j, lambda, k, policy)?;
    if !b.in_ac2 {
        return Err(Error::UndefinedReflection { at: lambda.to_f() });
    }
    let up: Vec<_> = window.iter().map(|&n| b.u_p(n)).collect();
    let um: Vec<_> = window.iter().map(|&n| b.u_m(n)).collect();
    let s: Vec<Vec<Complex<T>>> = (0..window.len())
        .map(|i| {
            (0..window.len())
                .map(|k| up[i].conj() * up[k] * b.f_plus + um[i].conj() * um[k] * b.f_minus)
                .collect()
        })
        .collect();
    let smax = s.iter().flatten().map(|v| v.norm()).fold(T::zero(), T::max);
    let mscale = b.m_plus.value.norm().min(b.m_minus.value.norm()).max(T::epsilon());
    Ok(ExpansionData {
        lambda,
        route: StoneRoute::Expansion,
        window: window.to_vec(),
        s,
        f_plus: b.f_plus,
        f_minus: b.f_minus,
        u_plus: up,
        u_minus: um,
        err: T::lit(4.0) * smax * b.err() / mscale,
    })
}

/// `G(z)` on `[w0, w1]` from the tridiagonal window with the two half-line self-energies.
fn window_resolvent<T: Real>(
    j: &JacobiCoeffs<T>,
    w0: i64,
    w1: i64,
    z: Complex<T>,
    policy: &WeylPolicy<T>,
) -> Result<Vec<Vec<Complex<T>>>> {
    let d = (w1 - w0 + 1) as usize;
    let mr = m_half_line(&j.half_line(w1, Side::Plus), z, &policy.depth)?;
    let ml = m_half_line(&j.half_line(w0 - 1, Side::Minus), z, &policy.depth)?;
    let mut diag: Vec<Complex<T>> = (0..d).map(|i| Complex::new(j.b(w0 + i as i64), T::zero()) - z).collect();
    let off: Vec<Complex<T>> = (0..d - 1).map(|i| Complex::new(j.a(w0 + i as i64), T::zero())).collect();
    let ar = j.a(w1);
    let al = j.a(w0 - 1);
    diag[d - 1] -= mr * (ar * ar);
    diag[0] -= ml * (al * al);
    let lu = TridiagLu::new(&off, &diag, &off, None)?;
    let mut cols = Vec::with_capacity(d);
    for c in 0..d {
        let mut e = vec![Complex::new(T::zero(), T::zero()); d];
        e[c] = Complex::new(T::one(), T::zero());
        lu.solve_in_place(&mut e);
        cols.push(e);
    }
    // cols[c][r] = G_{r,c}; return row-major
    Ok((0..d).map(|r| (0..d).map(|c| cols[c][r]).collect()).collect())
}

fn resolvent_limit<T: Real>(
    j: &JacobiCoeffs<T>,
    lambda: T,
    window: &[i64],
    policy: &WeylPolicy<T>,
) -> Result<ExpansionData<T>> {
    let w0 = *window.iter().min().unwrap();
    let w1 = *window.iter().max().unwrap();
    let lp = &policy.ladder;
    let two_pi_i = Complex::new(T::zero(), T::lit(2.0) * T::PI());
    let mut rungs: Vec<(T, Vec<Vec<Complex<T>>>)> = Vec::new();
    let mut eps = lp.eps0;
    let mut last_err = None;
    for _ in 0..lp.rungs {
        match window_resolvent(j, w0, w1, Complex::new(lambda, eps), policy) {
            Ok(g) => {
                let s: Vec<Vec<Complex<T>>> = window
                    .iter()
                    .map(|&n| {
                        let r = (n - w0) as usize;
                        window
                            .iter()
                            .map(|&m| {
                                let c = (m - w0) as usize;
                                (g[r][c] - g[c][r].conj()) / two_pi_i
                            })
                            .collect()
                    })
                    .collect();
                rungs.push((eps, s));
            }
            Err(e) => {
                last_err = Some(e);
                break;
            }
        }
        eps *= lp.ratio;
    }
    if rungs.len() < lp.min_rungs.max(2) {
        return Err(last_err.unwrap_or(Error::Convergence {
            what: "Stone ladder too short".into(),
            gap: f64::INFINITY,
        }));
    }
    let d = window.len();
    let mut s = vec![vec![Complex::new(T::zero(), T::zero()); d]; d];
    let mut err = T::zero();
    let mut flagged = false;
    for i in 0..d {
        for k in 0..d {
            let ladder = rungs.iter().map(|(e, s)| (*e, s[i][k])).collect();
            let bv = extrapolate(ladder, lp);
            s[i][k] = bv.value;
            err = err.max(bv.err_estimate);
            flagged |= bv.flagged;
        }
    }
    if flagged {
        return Err(Error::Convergence {
            what: format!("Stone matrix ladder at λ = {lambda}"),
            gap: err.to_f(),
        });
    }
    // densities from the diagonal m-values are not needed on this route
    Ok(ExpansionData {
        lambda,
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
