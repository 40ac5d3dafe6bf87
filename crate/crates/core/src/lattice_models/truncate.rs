use std::sync::{Arc, OnceLock};

use num_complex::Complex;

use super::cmv::{theta, VerblunskyCoeffs};
use super::jacobi::JacobiCoeffs;
use super::OperatorModel;
use crate::error::{Error, Result};
use crate::linalg::{SymTridiagEigen, TridiagLu};
use crate::scalar::Real;

/// Finite section of a Jacobi matrix on sites `[-N, N]`, decoupled by `a_{-N-1} = a_N = 0`.
#[derive(Debug)]
pub struct TruncatedJacobi<T: Real> {
    half: usize,
    diag: Vec<T>,
    off: Vec<T>,
    eigen: OnceLock<Arc<SymTridiagEigen<T>>>,
}

impl<T: Real> TruncatedJacobi<T> {
    pub fn new(j: &JacobiCoeffs<T>, n: usize) -> Self {
        let lo = -(n as i64);
        let diag = (0..2 * n + 1).map(|k| j.b(lo + k as i64)).collect();
        let off = (0..2 * n).map(|k| j.a(lo + k as i64)).collect();
        Self {
            half: n,
            diag,
            off,
            eigen: OnceLock::new(),
        }
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn lo(&self) -> i64 {
        -(self.half as i64)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn off(&self) -> &[T] {
        &self.off
    }

    /// Position of site `n` in the storage, if inside the window.
    pub fn slot(&self, n: i64) -> Option<usize> {
        let k = n - self.lo();
        (k >= 0 && (k as usize) < self.dim()).then_some(k as usize)
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(v.len(), self.dim(), self.lo())?;
        let d = self.dim();
        Ok((0..d)
            .map(|k| {
                let mut s = v[k] * self.diag[k];
                if k > 0 {
                    s += v[k - 1] * self.off[k - 1];
                }
                if k + 1 < d {
                    s += v[k + 1] * self.off[k];
                }
                s
            })
            .collect())
    }

    pub fn dense(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        let mut m = vec![vec![T::zero(); d]; d];
        for k in 0..d {
            m[k][k] = self.diag[k];
            if k + 1 < d {
                m[k][k + 1] = self.off[k];
                m[k + 1][k] = self.off[k];
            }
        }
        m
    }

    /// Full eigendecomposition, computed once and shared.
    pub fn eigen(&self) -> Arc<SymTridiagEigen<T>> {
        self.eigen
            .get_or_init(|| Arc::new(SymTridiagEigen::new(&self.diag, &self.off)))
            .clone()
    }
}

/// CMV truncation on sites `[-N, N-1]`, decoupled by setting `α_{-N} = α_N = 1`.
#[derive(Clone, Debug)]
pub struct TruncatedCmv<T> {
    half: usize,
    /// `α_j` for `j ∈ [-N, N]`, boundary values already replaced.
    alpha: Vec<Complex<T>>,
}

impl<T: Real> TruncatedCmv<T> {
    pub fn new(c: &VerblunskyCoeffs<T>, n: usize) -> Self {
        let lo = -(n as i64);
        let mut alpha: Vec<_> = (0..2 * n + 1).map(|k| c.alpha(lo + k as i64)).collect();
        alpha[0] = Complex::new(T::one(), T::zero());
        alpha[2 * n] = Complex::new(T::one(), T::zero());
        Self { half: n, alpha }
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn lo(&self) -> i64 {
        -(self.half as i64)
    }

    pub fn dim(&self) -> usize {
        2 * self.half
    }

    pub fn slot(&self, n: i64) -> Option<usize> {
        let k = n - self.lo();
        (k >= 0 && (k as usize) < self.dim()).then_some(k as usize)
    }

    fn alpha_at(&self, j: i64) -> Complex<T> {
        self.alpha[(j - self.lo()) as usize]
    }

    /// `⊕ Θ_j` (or its adjoint) over `j ≡ parity`, restricted to the window.
    fn factor(&self, parity: i64, adjoint: bool, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let lo = self.lo();
        let hi = lo + self.dim() as i64 - 1;
        let mut out = vec![Complex::new(T::zero(), T::zero()); v.len()];
        let mut j = if (lo - parity).rem_euclid(2) == 0 { lo } else { lo + 1 };
        while j <= hi + 1 {
            let mut t = theta(self.alpha_at(j));
            if adjoint {
                t = [
                    [t[0][0].conj(), t[1][0].conj()],
                    [t[0][1].conj(), t[1][1].conj()],
                ];
            }
            let (i0, i1) = (j - 1 - lo, j - lo);
            if j - 1 < lo {
                out[i1 as usize] = t[1][1] * v[i1 as usize];
            } else if j > hi {
                out[i0 as usize] = t[0][0] * v[i0 as usize];
            } else {
                let (x, y) = (v[i0 as usize], v[i1 as usize]);
                out[i0 as usize] = t[0][0] * x + t[0][1] * y;
                out[i1 as usize] = t[1][0] * x + t[1][1] * y;
            }
            j += 2;
        }
        out
    }

    /// `ℒ v` (blocks `Θ_{2k}`).
    pub fn apply_l(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.factor(0, false, v)
    }

    /// `ℳ v` (blocks `Θ_{2k+1}`).
    pub fn apply_m(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.factor(1, false, v)
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(v.len(), self.dim(), self.lo())?;
        Ok(self.apply_l(&self.apply_m(v)))
    }

    /// `𝒞^{-1} v = ℳ* ℒ* v`.
    pub fn apply_inverse(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(v.len(), self.dim(), self.lo())?;
        Ok(self.factor(1, true, &self.factor(0, true, v)))
    }

    /// `ℳ* v`.
    pub fn apply_m_adjoint(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.factor(1, true, v)
    }

    pub fn dense(&self) -> Vec<Vec<Complex<T>>> {
        let d = self.dim();
        let mut m = vec![vec![Complex::new(T::zero(), T::zero()); d]; d];
        for k in 0..d {
            let mut e = vec![Complex::new(T::zero(), T::zero()); d];
            e[k] = Complex::new(T::one(), T::zero());
            let col = self.apply_l(&self.apply_m(&e));
            for (r, x) in col.into_iter().enumerate() {
                m[r][k] = x;
            }
        }
        m
    }

    /// Columns `(𝒞 - w)^{-1} δ_m` for each `m` in `cols`, via the tridiagonal pencil
    /// `𝒞 - w = (ℒ - w ℳ*) ℳ`.
    pub fn resolvent_columns(&self, w: Complex<T>, cols: &[i64]) -> Result<Vec<Vec<Complex<T>>>> {
        let d = self.dim();
        let lo = self.lo();
        let hi = lo + d as i64 - 1;
        let zero = Complex::new(T::zero(), T::zero());
        let (mut lower, mut diag, mut upper) = (vec![zero; d - 1], vec![zero; d], vec![zero; d - 1]);
        for j in lo..=hi + 1 {
            let t = theta(self.alpha_at(j));
            let (t, c) = if j.rem_euclid(2) == 0 {
                (t, Complex::new(T::one(), T::zero()))
            } else {
                ([[t[0][0].conj(), t[1][0].conj()], [t[0][1].conj(), t[1][1].conj()]], -w)
            };
            let (a, b) = (j - 1, j);
            if a >= lo {
                diag[(a - lo) as usize] += c * t[0][0];
            }
            if b <= hi {
                diag[(b - lo) as usize] += c * t[1][1];
            }
            if a >= lo && b <= hi {
                upper[(a - lo) as usize] += c * t[0][1];
                lower[(a - lo) as usize] += c * t[1][0];
            }
        }
        let lu = TridiagLu::new(&lower, &diag, &upper, None)?;
        cols.iter()
            .map(|&m| {
                let s = self.slot(m).ok_or(Error::OutOfWindow { index: m, lo, hi })?;
                let mut y = vec![zero; d];
                y[s] = Complex::new(T::one(), T::zero());
                lu.solve_in_place(&mut y);
                Ok(self.apply_m_adjoint(&y))
            })
            .collect()
    }

    /// `max |U*U - I|`.
    pub fn unitarity_defect(&self) -> T {
        let u = self.dense();
        let d = self.dim();
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut s = Complex::new(T::zero(), T::zero());
                for k in 0..d {
                    s += u[k][i].conj() * u[k][j];
                }
                if i == j {
                    s -= Complex::new(T::one(), T::zero());
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

fn check_len(len: usize, dim: usize, lo: i64) -> Result<()> {
    if len != dim {
        return Err(Error::OutOfWindow {
            index: lo + len as i64 - 1,
            lo,
            hi: lo + dim as i64 - 1,
        });
    }
    Ok(())
}

#[derive(Debug)]
pub enum TruncatedOperator<T: Real> {
    Jacobi(TruncatedJacobi<T>),
    Cmv(TruncatedCmv<T>),
}

impl<T: Real> TruncatedOperator<T> {
    pub fn lo(&self) -> i64 {
        match self {
            Self::Jacobi(t) => t.lo(),
            Self::Cmv(t) => t.lo(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Jacobi(t) => t.dim(),
            Self::Cmv(t) => t.dim(),
        }
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        match self {
            Self::Jacobi(t) => t.apply(v),
            Self::Cmv(t) => t.apply(v),
        }
    }
}

/// Decoupled finite section (`N >= 2`).
pub fn truncate<T: Real>(op: &OperatorModel<T>, n: usize) -> Result<TruncatedOperator<T>> {
    if n < 2 {
        return Err(Error::Domain(format!("truncation half-width {n} < 2")));
    }
    Ok(match op {
        OperatorModel::Jacobi(j) => TruncatedOperator::Jacobi(TruncatedJacobi::new(j, n)),
        OperatorModel::Cmv(c) => TruncatedOperator::Cmv(TruncatedCmv::new(c, n)),
    })
}
