//! Small dense and tridiagonal kernels used by the spectral and dynamical code.

use std::ops::Neg;

use num_complex::Complex;
use num_traits::{NumAssign, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Field element usable in the pivoted tridiagonal solver.
pub trait LinScalar: Copy + NumAssign + Neg<Output = Self> + Send + Sync {
    type R: Real;
    fn modulus(self) -> Self::R;
    fn from_real(r: Self::R) -> Self;
}

impl<T: Real> LinScalar for T {
    type R = T;
    fn modulus(self) -> T {
        self.abs()
    }
    fn from_real(r: T) -> T {
        r
    }
}

impl<T: Real> LinScalar for Complex<T> {
    type R = T;
    fn modulus(self) -> T {
        self.norm()
    }
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
}

/// LU factorization with partial pivoting of a tridiagonal matrix.
///
/// `lower[i]` is entry `(i+1, i)`, `upper[i]` is `(i, i+1)`.
#[derive(Clone, Debug)]
pub struct TridiagLu<S> {
    d: Vec<S>,
    du: Vec<S>,
    du2: Vec<S>,
    mult: Vec<S>,
    swapped: Vec<bool>,
}

impl<S: LinScalar> TridiagLu<S> {
    /// Factors the matrix. Exactly zero pivots are replaced by `tiny` when given,
    /// otherwise they raise a degenerate error.
    pub fn new(lower: &[S], diag: &[S], upper: &[S], tiny: Option<S::R>) -> Result<Self> {
        let n = diag.len();
        let mut d = diag.to_vec();
        let mut du = upper.to_vec();
        let mut du2 = vec![S::zero(); n.saturating_sub(2)];
        let mut mult = vec![S::zero(); n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let mut dl = lower.to_vec();
        for i in 0..n.saturating_sub(1) {
            if d[i].modulus() >= dl[i].modulus() {
                if d[i].modulus() == S::R::zero() {
                    d[i] = fix_pivot(tiny)?;
                }
                let fact = dl[i] / d[i];
                mult[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                mult[i] = fact;
                swapped[i] = true;
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
            }
            dl[i] = S::zero();
        }
        if n > 0 && d[n - 1].modulus() == S::R::zero() {
            d[n - 1] = fix_pivot(tiny)?;
        }
        Ok(Self {
            d,
            du,
            du2,
            mult,
            swapped,
        })
    }

    pub fn solve_in_place(&self, b: &mut [S]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.mult[i] * b[i + 1];
            } else {
                let t = b[i];
                b[i + 1] -= self.mult[i] * t;
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn fix_pivot<S: LinScalar>(tiny: Option<S::R>) -> Result<S> {
    tiny.map(S::from_real)
        .ok_or_else(|| Error::Degenerate("singular tridiagonal system".into()))
}

/// Solves a tridiagonal system once.
pub fn solve_tridiagonal<S: LinScalar>(
    lower: &[S],
    diag: &[S],
    upper: &[S],
    rhs: &[S],
) -> Result<Vec<S>> {
    let lu = TridiagLu::new(lower, diag, upper, None)?;
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Full eigendecomposition of a real symmetric tridiagonal matrix.
///
/// Eigenvalues by Sturm-sequence bisection, eigenvectors by inverse iteration with
/// reorthogonalization inside clusters of close eigenvalues.
#[derive(Clone, Debug)]
pub struct SymTridiagEigen<T> {
    dim: usize,
    values: Vec<T>,
    /// Eigenvector `k` occupies `vectors[k*dim .. (k+1)*dim]`.
    vectors: Vec<T>,
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        let e2 = if i == 0 { T::zero() } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { T::zero() } else { e2 / q };
        if q.abs() < tiny {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval of a symmetric tridiagonal matrix.
pub fn gershgorin<T: Real>(diag: &[T], off: &[T]) -> (T, T) {
    let n = diag.len();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { T::zero() }
            + if i + 1 < n { off[i].abs() } else { T::zero() };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

fn bisect_eigenvalue<T: Real>(diag: &[T], off: &[T], k: usize, lo: T, hi: T) -> T {
    let (mut a, mut b) = (lo, hi);
    let eps = T::epsilon();
    for _ in 0..200 {
        let mid = (a + b) / T::lit(2.0);
        if b - a <= eps * (a.abs().max(b.abs()) + T::min_positive_value().sqrt()) {
            break;
        }
        if mid <= a || mid >= b {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            b = mid;
        } else {
            a = mid;
        }
    }
    (a + b) / T::lit(2.0)
}

/// Eigenvalues with index in `range` (ascending order).
pub fn tridiag_eigenvalues<T: Real>(diag: &[T], off: &[T], range: std::ops::Range<usize>) -> Vec<T> {
    let (lo, hi) = gershgorin(diag, off);
    let pad = (hi - lo).max(T::one()) * T::lit(1e-12);
    range
        .into_par_iter()
        .map(|k| bisect_eigenvalue(diag, off, k, lo - pad, hi + pad))
        .collect()
}

impl<T: Real> SymTridiagEigen<T> {
    pub fn new(diag: &[T], off: &[T]) -> Self {
        let n = diag.len();
        let values = tridiag_eigenvalues(diag, off, 0..n);
        let (lo, hi) = gershgorin(diag, off);
        let scale = lo.abs().max(hi.abs()).max(T::min_positive_value().sqrt());
        let cluster_gap = scale * T::lit(1e-7);
        // clusters of consecutive close eigenvalues
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || values[k] - values[k - 1] > cluster_gap {
                clusters.push((start, k));
                start = k;
            }
        }
        let blocks: Vec<Vec<T>> = clusters
            .par_iter()
            .map(|&(s, e)| inverse_iteration_cluster(diag, off, &values[s..e], scale))
            .collect();
        let mut vectors = Vec::with_capacity(n * n);
        for b in blocks {
            vectors.extend(b);
        }
        Self {
            dim: n,
            values,
            vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[T] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Coefficients `⟨v_k, ψ⟩` for every `k`.
    pub fn coefficients(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.dim)
            .into_par_iter()
            .map(|k| dot_real(self.vector(k), psi))
            .collect()
    }

    /// `Σ_k c_k g(λ_k) v_k` over the eigenpairs where `g` is nonzero.
    pub fn synthesize(&self, c: &[Complex<T>], g: impl Fn(T) -> Complex<T> + Sync) -> Vec<Complex<T>> {
        let n = self.dim;
        let chunk = 64;
        let partials: Vec<Vec<Complex<T>>> = (0..n)
            .collect::<Vec<_>>()
            .par_chunks(chunk)
            .map(|ks| {
                let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
                for &k in ks {
                    let w = c[k] * g(self.values[k]);
                    if w.norm_sqr() == T::zero() {
                        continue;
                    }
                    for (a, &v) in acc.iter_mut().zip(self.vector(k)) {
                        *a += w * v;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for p in partials {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        out
    }
}

fn dot_real<T: Real>(v: &[T], psi: &[Complex<T>]) -> Complex<T> {
    let mut s = Complex::new(T::zero(), T::zero());
    for (&a, &b) in v.iter().zip(psi) {
        s += b * a;
    }
    s
}

fn inverse_iteration_cluster<T: Real>(diag: &[T], off: &[T], lams: &[T], scale: T) -> Vec<T> {
    let n = diag.len();
    let mut out: Vec<T> = Vec::with_capacity(n * lams.len());
    let tiny = T::epsilon() * scale;
    for (j, &lam) in lams.iter().enumerate() {
        // tiny deterministic perturbation keeps identical shifts in a cluster distinct
        let shift = lam + tiny * T::from_i(j as i64);
        let d: Vec<T> = diag.iter().map(|&x| x - shift).collect();
        let lu = TridiagLu::new(off, &d, off, Some(tiny)).expect("pivot fixed");
        let mut x: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(0.37) * T::lit(((i * 7919 + j * 104729) % 1013) as f64 / 1013.0))
            .collect();
        for _ in 0..4 {
            orthogonalize(&mut x, &out, n);
            normalize(&mut x);
            lu.solve_in_place(&mut x);
        }
        orthogonalize(&mut x, &out, n);
        normalize(&mut x);
        out.extend_from_slice(&x);
    }
    out
}

fn orthogonalize<T: Real>(x: &mut [T], basis: &[T], n: usize) {
    for b in basis.chunks(n) {
        let p: T = b.iter().zip(x.iter()).map(|(&u, &v)| u * v).sum();
        for (xi, &bi) in x.iter_mut().zip(b) {
            *xi -= p * bi;
        }
    }
}

fn normalize<T: Real>(x: &mut [T]) {
    let s = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if s > T::zero() {
        for v in x.iter_mut() {
            *v /= s;
        }
    }
}

/// Eigenvalues (descending) of a Hermitian matrix, via cyclic Jacobi rotations on the
/// real symmetric embedding `[[Re, -Im], [Im, Re]]` (each eigenvalue appears twice there).
pub fn hermitian_eigenvalues<T: Real>(m: &[Vec<Complex<T>>]) -> Vec<T> {
    let n = m.len();
    let d = 2 * n;
    let mut a = vec![vec![T::zero(); d]; d];
    for i in 0..n {
        for j in 0..n {
            let z = (m[i][j] + m[j][i].conj()) / T::lit(2.0);
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    let mut ev = symmetric_eigenvalues(a);
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    ev.into_iter().step_by(2).collect()
}

/// Eigenvalues of a small dense real symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigenvalues<T: Real>(mut a: Vec<Vec<T>>) -> Vec<T> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: T = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (
        x.into_iter().map(T::lit).collect(),
        w.into_iter().map(T::lit).collect(),
    )
}
