use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_models::{JacobiCoeffs, Periodic};
use crate::linalg::{gauss_legendre, hermitian_eigenvalues};
use crate::scalar::Real;
use crate::weyl_jacobi::{weyl_solutions, WeylPolicy};

/// Spectrum `{|Δ| <= 2}` of the periodic operator with one period `(a, b)`, as closed
/// intervals with touching bands merged.
///
/// The band edges are the eigenvalues of the Floquet matrices with `θ = 0` and `θ = π`.
pub fn periodic_bands<T: Real>(a: &[T], b: &[T]) -> Vec<(T, T)> {
    let p = b.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut edges = Vec::with_capacity(2 * p);
    for sign in [T::one(), -T::one()] {
        let mut h = vec![vec![zero; p]; p];
        for i in 0..p {
            h[i][i] += Complex::new(b[i], T::zero());
            let ph = if i == p - 1 { sign } else { T::one() };
            let c = Complex::new(a[i] * ph, T::zero());
            h[i][(i + 1) % p] += c;
            h[(i + 1) % p][i] += c;
        }
        edges.extend(hermitian_eigenvalues(&h));
    }
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let scale = edges.iter().fold(T::one(), |m, e| m.max(e.abs()));
    let mut bands: Vec<(T, T)> = Vec::new();
    for pair in edges.chunks(2) {
        let (lo, hi) = (pair[0], pair[1]);
        match bands.last_mut() {
            Some(last) if lo - last.1 <= T::lit(1e-12) * scale => last.1 = hi,
            _ => bands.push((lo, hi)),
        }
    }
    bands
}

fn tail_period<T: Real>(a: &Periodic<T>, b: &Periodic<T>) -> (Vec<T>, Vec<T>) {
    let p = crate::lattice_models::lcm(a.period(), b.period());
    ((0..p as i64).map(|n| a.at(n)).collect(), (0..p as i64).map(|n| b.at(n)).collect())
}

fn intersect<T: Real>(x: &[(T, T)], y: &[(T, T)]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for &(a0, a1) in x {
        for &(b0, b1) in y {
            let (lo, hi) = (a0.max(b0), a1.min(b1));
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    out
}

/// Essential a.c. spectrum of multiplicity two for models periodic outside a finite window:
/// the intersection of the band sets of the two tails.
pub fn ac2_bands<T: Real>(j: &JacobiCoeffs<T>) -> Result<Vec<(T, T)>> {
    let no_tail = || Error::Domain("band structure needs periodic tails".into());
    let (_, ar) = j.a_seq().right_tail().ok_or_else(no_tail)?;
    let (_, br) = j.b_seq().right_tail().ok_or_else(no_tail)?;
    let (_, al) = j.a_seq().left_tail().ok_or_else(no_tail)?;
    let (_, bl) = j.b_seq().left_tail().ok_or_else(no_tail)?;
    let (a, b) = tail_period(ar, br);
    let right = periodic_bands(&a, &b);
    let (a, b) = tail_period(al, bl);
    let left = periodic_bands(&a, &b);
    Ok(intersect(&right, &left))
}

/// Quadrature grid with the Weyl solutions and densities solved at every node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralGrid<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Bundle half-width: solutions are stored on `[-k, k]`.
    pub k: usize,
    pub u_plus: Vec<Vec<Complex<T>>>,
    pub u_minus: Vec<Vec<Complex<T>>>,
    pub f_plus: Vec<T>,
    pub f_minus: Vec<T>,
    pub accepted: Vec<bool>,
    pub excluded: Vec<(T, String)>,
    /// Largest boundary-value error over accepted nodes.
    pub err: T,
}

impl<T: Real> SpectralGrid<T> {
    /// Solves the Weyl bundles at the given nodes. Nodes outside the certified
    /// multiplicity-two set get zero density and are listed in `excluded`.
    pub fn new(j: &JacobiCoeffs<T>, nodes: Vec<T>, weights: Vec<T>, k: usize, policy: &WeylPolicy<T>) -> Self {
        let k = k.max(1);
        let solved: Vec<_> = nodes
            .par_iter()
            .map(|&l| {
                weyl_solutions(j, l, k, policy).and_then(|b| {
                    if b.in_ac2 {
                        Ok(b)
                    } else {
                        Err(Error::UndefinedReflection { at: l.to_f() })
                    }
                })
            })
            .collect();
        let zero = Complex::new(T::zero(), T::zero());
        let mut g = SpectralGrid {
            nodes,
            weights,
            k,
            u_plus: Vec::new(),
            u_minus: Vec::new(),
            f_plus: Vec::new(),
            f_minus: Vec::new(),
            accepted: Vec::new(),
            excluded: Vec::new(),
            err: T::zero(),
        };
        for (i, r) in solved.into_iter().enumerate() {
            match r {
                Ok(b) => {
                    g.err = g.err.max(b.err());
                    g.u_plus.push(b.u_plus);
                    g.u_minus.push(b.u_minus);
                    g.f_plus.push(b.f_plus);
                    g.f_minus.push(b.f_minus);
                    g.accepted.push(true);
                }
                Err(e) => {
                    g.excluded.push((g.nodes[i], e.to_string()));
                    g.u_plus.push(vec![zero; 2 * k + 1]);
                    g.u_minus.push(vec![zero; 2 * k + 1]);
                    g.f_plus.push(T::zero());
                    g.f_minus.push(T::zero());
                    g.accepted.push(false);
                }
            }
        }
        g
    }

    /// Gauss–Legendre in `φ` on each band under `λ = c + h cos φ`, which absorbs the
    /// inverse square-root behaviour of the densities at band edges.
    pub fn bands(j: &JacobiCoeffs<T>, bands: &[(T, T)], per_band: usize, k: usize, policy: &WeylPolicy<T>) -> Self {
        let (x, w) = gauss_legendre::<T>(per_band);
        let half = T::lit(0.5);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for &(lo, hi) in bands {
            let c = (lo + hi) * half;
            let h = (hi - lo) * half;
            for (xi, wi) in x.iter().zip(&w) {
                let phi = (*xi + T::one()) * T::FRAC_PI_2();
                nodes.push(c + h * phi.cos());
                weights.push(*wi * T::FRAC_PI_2() * h * phi.sin());
            }
        }
        Self::new(j, nodes, weights, k, policy)
    }

    /// Band quadrature over the detected a.c. bands of a model with periodic tails.
    pub fn for_model(j: &JacobiCoeffs<T>, per_band: usize, k: usize, policy: &WeylPolicy<T>) -> Result<Self> {
        let bands = ac2_bands(j)?;
        Ok(Self::bands(j, &bands, per_band, k, policy))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn slot(&self, n: i64) -> Result<usize> {
        let k = self.k as i64;
        if n < -k || n > k {
            return Err(Error::OutOfWindow { index: n, lo: -k, hi: k });
        }
        Ok((n + k) as usize)
    }

    /// `∫ (|g_+|² f_+ + |g_-|² f_-) dλ`.
    pub fn weighted_norm_sqr(&self, g_plus: &[Complex<T>], g_minus: &[Complex<T>]) -> T {
        (0..self.len())
            .map(|i| self.weights[i] * (g_plus[i].norm_sqr() * self.f_plus[i] + g_minus[i].norm_sqr() * self.f_minus[i]))
            .sum()
    }
}

/// `φ̂_±(λ) = Σ_n conj(u_n^±(λ)) φ_n` at the grid nodes, for `φ` supported on `[lo, lo+len)`.
pub fn transform_hat<T: Real>(
    grid: &SpectralGrid<T>,
    lo: i64,
    phi: &[Complex<T>],
) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let slots: Vec<(usize, Complex<T>)> = phi
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > T::zero())
        .map(|(i, &v)| grid.slot(lo + i as i64).map(|s| (s, v)))
        .collect::<Result<_>>()?;
    let zero = Complex::new(T::zero(), T::zero());
    let eval = |u: &Vec<Complex<T>>| slots.iter().fold(zero, |acc, &(s, v)| acc + u[s].conj() * v);
    Ok((
        grid.u_plus.iter().map(eval).collect(),
        grid.u_minus.iter().map(eval).collect(),
    ))
}

/// `ǧ_n = ∫ (g_+ u_n^+ f_+ + g_- u_n^- f_-) dλ` for `n ∈ [lo, hi]`.
pub fn transform_inverse<T: Real>(
    grid: &SpectralGrid<T>,
    g_plus: &[Complex<T>],
    g_minus: &[Complex<T>],
    lo: i64,
    hi: i64,
) -> Result<Vec<Complex<T>>> {
    if g_plus.len() != grid.len() || g_minus.len() != grid.len() {
        return Err(Error::Domain("grid function length mismatch".into()));
    }
    (lo..=hi)
        .map(|n| {
            let s = grid.slot(n)?;
            Ok((0..grid.len())
                .map(|i| {
                    (g_plus[i] * grid.u_plus[i][s] * grid.f_plus[i] + g_minus[i] * grid.u_minus[i][s] * grid.f_minus[i])
                        * grid.weights[i]
                })
                .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalResult<T> {
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
}

/// `∫ (|φ̂_+|² f_+ + |φ̂_-|² f_-) dλ` against `‖φ‖²`.
pub fn parseval_check<T: Real>(grid: &SpectralGrid<T>, lo: i64, phi: &[Complex<T>]) -> Result<ParsevalResult<T>> {
    let (hp, hm) = transform_hat(grid, lo, phi)?;
    let lhs = grid.weighted_norm_sqr(&hp, &hm);
    let rhs: T = phi.iter().map(|v| v.norm_sqr()).sum();
    Ok(ParsevalResult {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
