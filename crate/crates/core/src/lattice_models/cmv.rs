use num_complex::Complex;

use super::jacobi::PROBE_RADIUS;
use super::seq::Sequence;
use super::Side;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Block<T> = [[Complex<T>; 2]; 2];

/// `Θ(α) = [[-α, ρ], [ρ, conj α]]`, acting on the pair of sites `(j-1, j)` for `Θ_j`.
pub fn theta<T: Real>(alpha: Complex<T>) -> Block<T> {
    let rho = Complex::new((T::one() - alpha.norm_sqr()).max(T::zero()).sqrt(), T::zero());
    [[-alpha, rho], [rho, alpha.conj()]]
}

/// Whole-line Verblunsky coefficients; `𝒞 = ℒℳ` with `ℒ = ⊕ Θ_{2k}`, `ℳ = ⊕ Θ_{2k+1}`.
#[derive(Clone, Debug)]
pub struct VerblunskyCoeffs<T> {
    alpha: Sequence<Complex<T>>,
}

pub fn make_cmv<T: Real>(alpha: Sequence<Complex<T>>) -> Result<VerblunskyCoeffs<T>> {
    let check = |a: Complex<T>| -> Result<()> {
        if !(a.norm() < T::one()) {
            return Err(Error::Domain(format!(
                "Verblunsky coefficient {a} has modulus >= 1"
            )));
        }
        Ok(())
    };
    match alpha.stored_values() {
        Some(v) => v.into_iter().try_for_each(check)?,
        None => (-PROBE_RADIUS..=PROBE_RADIUS).try_for_each(|n| check(alpha.at(n)))?,
    }
    Ok(VerblunskyCoeffs { alpha })
}

impl<T: Real> VerblunskyCoeffs<T> {
    #[inline]
    pub fn alpha(&self, n: i64) -> Complex<T> {
        self.alpha.at(n)
    }

    pub fn alpha_seq(&self) -> &Sequence<Complex<T>> {
        &self.alpha
    }

    #[inline]
    pub fn rho(&self, n: i64) -> T {
        (T::one() - self.alpha(n).norm_sqr()).sqrt()
    }

    pub fn theta(&self, j: i64) -> Block<T> {
        theta(self.alpha(j))
    }

    pub fn half_line(&self, n: i64, side: Side) -> CmvHalfLine<'_, T> {
        CmvHalfLine {
            parent: self,
            base: n,
            side,
        }
    }

    /// Applies `⊕ Θ_j` over all `j ≡ parity (mod 2)` to a field on `[lo, lo+len)`.
    /// The output covers every pair touching the support.
    pub fn apply_factor(&self, parity: i64, lo: i64, v: &[Complex<T>]) -> (i64, Vec<Complex<T>>) {
        let hi = lo + v.len() as i64 - 1;
        // pairs (j-1, j) with j ≡ parity; the first must contain lo
        let j0 = if (lo + 1 - parity).rem_euclid(2) == 0 { lo + 1 } else { lo };
        let j1 = if (hi - parity).rem_euclid(2) == 0 { hi } else { hi + 1 };
        let out_lo = j0 - 1;
        let get = |k: i64| -> Complex<T> {
            if k < lo || k > hi {
                Complex::new(T::zero(), T::zero())
            } else {
                v[(k - lo) as usize]
            }
        };
        let mut out = Vec::with_capacity((j1 - out_lo + 1) as usize);
        let mut j = j0;
        while j <= j1 {
            let t = self.theta(j);
            let (x, y) = (get(j - 1), get(j));
            out.push(t[0][0] * x + t[0][1] * y);
            out.push(t[1][0] * x + t[1][1] * y);
            j += 2;
        }
        (out_lo, out)
    }

    /// Whole-line `𝒞 v = ℒ(ℳ v)`.
    pub fn apply(&self, lo: i64, v: &[Complex<T>]) -> (i64, Vec<Complex<T>>) {
        let (l1, w) = self.apply_factor(1, lo, v);
        self.apply_factor(0, l1, &w)
    }
}

/// Half-line Schur data: the coefficient sequence `γ_0, γ_1, …` whose Schur function
/// builds the Carathéodory function at the split.
///
/// `Plus` at base `n`: `γ_k = -conj(α_{n+1+k})`, and `F = (1 + z f)/(1 - z f)`.
/// `Minus` at base `n`: `γ_k = α_{n-k}`, and `F = (1 + f)/(1 - f)`.
#[derive(Clone, Copy, Debug)]
pub struct CmvHalfLine<'a, T> {
    parent: &'a VerblunskyCoeffs<T>,
    base: i64,
    side: Side,
}

impl<'a, T: Real> CmvHalfLine<'a, T> {
    pub fn base(&self) -> i64 {
        self.base
    }

    pub fn side(&self) -> Side {
        self.side
    }

    #[inline]
    pub fn gamma(&self, k: usize) -> Complex<T> {
        let k = k as i64;
        match self.side {
            Side::Plus => -self.parent.alpha(self.base + 1 + k).conj(),
            Side::Minus => self.parent.alpha(self.base - k),
        }
    }

    /// `(start, period)` such that `γ_k` is periodic for `k >= start`.
    pub fn tail(&self) -> Option<(usize, usize)> {
        let n = self.base;
        match self.side {
            Side::Plus => {
                let (s, t) = self.parent.alpha.right_tail()?;
                Some(((s - n - 1).max(0) as usize, t.period()))
            }
            Side::Minus => {
                let (s, t) = self.parent.alpha.left_tail()?;
                Some(((n - s + 1).max(0) as usize, t.period()))
            }
        }
    }
}
