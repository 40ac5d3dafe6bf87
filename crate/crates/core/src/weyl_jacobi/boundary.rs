use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Geometric ε-ladder `ε_k = eps0·ratio^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPolicy<T> {
    pub eps0: T,
    pub ratio: T,
    pub rungs: usize,
    /// Fewer successful rungs than this is a hard failure.
    pub min_rungs: usize,
    /// Above this extrapolation residual the value is flagged.
    pub cauchy_tol: T,
    /// Highest Richardson order tried.
    pub max_order: usize,
}

impl<T: Real> Default for LadderPolicy<T> {
    fn default() -> Self {
        Self {
            eps0: T::lit(1e-2),
            ratio: T::lit(0.5),
            rungs: 12,
            min_rungs: 3,
            cauchy_tol: T::lit(1e-6),
            max_order: 6,
        }
    }
}

/// Limit value at `λ+i0` (or a radial limit) with the ladder it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue<T> {
    pub value: Complex<T>,
    pub eps_ladder: Vec<(T, Complex<T>)>,
    pub err_estimate: T,
    /// Ladder did not settle within `cauchy_tol`.
    pub flagged: bool,
}

impl<T: Real> BoundaryValue<T> {
    /// Closed-form value, no extrapolation involved.
    pub fn exact(value: Complex<T>) -> Self {
        Self {
            value,
            eps_ladder: Vec::new(),
            err_estimate: T::zero(),
            flagged: false,
        }
    }
}

/// Extrapolates `g(ε)` to `ε = 0` along the ladder.
///
/// Rungs where `g` fails are dropped; only the leading run of successful rungs is used.
/// The order of the Richardson step is chosen adaptively as the one with the smallest
/// difference between its last two table entries, which is reported as `err_estimate`.
pub fn ladder_limit<T: Real>(
    g: impl Fn(T) -> Result<Complex<T>>,
    policy: &LadderPolicy<T>,
) -> Result<BoundaryValue<T>> {
    let mut ladder = Vec::with_capacity(policy.rungs);
    let mut eps = policy.eps0;
    let mut last_err = None;
    for _ in 0..policy.rungs {
        match g(eps) {
            Ok(v) if v.re.is_finite() && v.im.is_finite() => ladder.push((eps, v)),
            Ok(_) => {
                last_err = Some(Error::Degenerate("non-finite ladder value".into()));
                break;
            }
            Err(e) => {
                last_err = Some(e);
                break;
            }
        }
        eps *= policy.ratio;
    }
    if ladder.len() < policy.min_rungs.max(2) {
        return Err(last_err.unwrap_or(Error::Convergence {
            what: "ladder too short".into(),
            gap: f64::INFINITY,
        }));
    }
    Ok(extrapolate(ladder, policy))
}

/// Richardson limit of precomputed ladder values (`ε` decreasing by `policy.ratio`).
pub fn extrapolate<T: Real>(ladder: Vec<(T, Complex<T>)>, policy: &LadderPolicy<T>) -> BoundaryValue<T> {
    let (value, err) = if ladder.len() >= 2 {
        richardson(&ladder, policy.ratio, policy.max_order)
    } else {
        (ladder[0].1, T::infinity())
    };
    BoundaryValue {
        value,
        flagged: !(err <= policy.cauchy_tol),
        err_estimate: err,
        eps_ladder: ladder,
    }
}

/// Neville–Richardson table for data with an expansion in integer powers of `ε`.
fn richardson<T: Real>(ladder: &[(T, Complex<T>)], ratio: T, max_order: usize) -> (Complex<T>, T) {
    let k = ladder.len();
    let mut table: Vec<Vec<Complex<T>>> = Vec::with_capacity(k);
    for (i, &(_, v)) in ladder.iter().enumerate() {
        let mut row = vec![v];
        for j in 1..=i.min(max_order) {
            let f = ratio.powi(-(j as i32)) - T::one();
            let prev: &Vec<Complex<T>> = &table[i - 1];
            row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / f);
        }
        table.push(row);
    }
    let last = &table[k - 1];
    let prev = &table[k - 2];
    let mut best = (last[0], (last[0] - prev[0]).norm());
    for j in 1..last.len() {
        if j >= prev.len() {
            break;
        }
        let e = (last[j] - prev[j]).norm();
        if e < best.1 {
            best = (last[j], e);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_exact() {
        let bv = ladder_limit(|_| Ok(Complex::new(0.0, 1.0)), &LadderPolicy::default()).unwrap();
        assert_eq!(bv.value, Complex::new(0.0, 1.0));
        assert_eq!(bv.err_estimate, 0.0);
    }

    #[test]
    fn polynomial_in_eps_extrapolates() {
        let g = |e: f64| Ok(Complex::new(1.0 + 3.0 * e - 2.0 * e * e, e.powi(3)));
        let bv = ladder_limit(g, &LadderPolicy::default()).unwrap();
        assert!((bv.value - Complex::new(1.0, 0.0)).norm() < 1e-13);
        assert!(!bv.flagged);
    }

    #[test]
    fn failing_tail_rungs_are_dropped() {
        let g = |e: f64| {
            if e < 1e-3 {
                Err(Error::Convergence {
                    what: "depth".into(),
                    gap: 1.0,
                })
            } else {
                Ok(Complex::new(2.0 + e, 0.0))
            }
        };
        let bv = ladder_limit(g, &LadderPolicy::default()).unwrap();
        assert_eq!(bv.eps_ladder.len(), 4);
        assert!((bv.value.re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oscillating_ladder_is_flagged() {
        let g = |e: f64| Ok(Complex::new((1.0 / e).sin(), 0.0));
        let bv = ladder_limit(g, &LadderPolicy::default()).unwrap();
        assert!(bv.flagged);
    }
}
