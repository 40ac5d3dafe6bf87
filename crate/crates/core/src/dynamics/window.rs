use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;
use crate::scalar::Real;

/// Spectral window with a C^∞ bump profile: 1 on the flat top, 0 outside `center ± halfwidth`.
///
/// For CMV models `center` is an angle and distances are measured along the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct EnergyWindow<T> {
    pub center: T,
    pub halfwidth: T,
    /// Fraction of `halfwidth` on which the profile equals 1.
    #[serde(default)]
    pub flat_top: T,
}

/// `e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`, 0 for `t <= 0`, 1 for `t >= 1`.
fn smoothstep<T: Real>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let a = (-t.recip()).exp();
    let b = (-(T::one() - t).recip()).exp();
    a / (a + b)
}

/// Angle reduced to `(-π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    let mut y = x % two_pi;
    if y > T::PI() {
        y -= two_pi;
    } else if y <= -T::PI() {
        y += two_pi;
    }
    y
}

impl<T: Real> EnergyWindow<T> {
    pub fn new(center: T, halfwidth: T, flat_top: T) -> Result<Self> {
        let w = Self {
            center,
            halfwidth,
            flat_top,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.halfwidth > T::zero()) || !self.center.is_finite() {
            return Err(Error::Domain(format!(
                "window needs a finite center and positive halfwidth, got {} ± {}",
                self.center, self.halfwidth
            )));
        }
        if !(self.flat_top >= T::zero() && self.flat_top < T::one()) {
            return Err(Error::Domain(format!("flat-top fraction {} outside [0, 1)", self.flat_top)));
        }
        Ok(())
    }

    pub fn lo(&self) -> T {
        self.center - self.halfwidth
    }

    pub fn hi(&self) -> T {
        self.center + self.halfwidth
    }

    fn at_distance(&self, d: T) -> T {
        let top = self.flat_top * self.halfwidth;
        if d <= top {
            T::one()
        } else if d >= self.halfwidth {
            T::zero()
        } else {
            smoothstep((self.halfwidth - d) / (self.halfwidth - top))
        }
    }

    pub fn profile(&self, x: T) -> T {
        self.at_distance((x - self.center).abs())
    }

    /// Profile of an angle, distance taken along the circle.
    pub fn profile_angle(&self, theta: T) -> T {
        self.at_distance(wrap_angle(theta - self.center).abs())
    }

    /// `∫ f w² / ∫ w²` over the window by Gauss–Legendre with `nodes` points. Nodes where `f`
    /// fails are dropped from both integrals and reported.
    pub fn average(&self, nodes: usize, f: impl Fn(T) -> Result<T> + Sync) -> WindowAverage<T> {
        let (x, w) = gauss_legendre::<T>(nodes.max(2));
        let pts: Vec<(T, T)> = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| (self.center + self.halfwidth * x, w * self.profile(self.center + self.halfwidth * x).powi(2)))
            .collect();
        let vals: Vec<Result<T>> = pts.par_iter().map(|&(x, _)| f(x)).collect();
        let (mut num, mut den, mut total) = (T::zero(), T::zero(), T::zero());
        let (mut min, mut max) = (T::infinity(), T::neg_infinity());
        let mut excluded = Vec::new();
        for (&(x, wt), v) in pts.iter().zip(vals) {
            total += wt;
            match v {
                Ok(v) => {
                    num += wt * v;
                    den += wt;
                    if wt > T::zero() {
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                Err(e) => excluded.push((x, e.to_string())),
            }
        }
        WindowAverage {
            value: if den > T::zero() { num / den } else { T::nan() },
            min,
            max,
            excluded_weight: if total > T::zero() { T::one() - den / total } else { T::one() },
            excluded,
        }
    }
}

/// Profile-weighted window mean of a spectral quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowAverage<T> {
    pub value: T,
    pub min: T,
    pub max: T,
    /// Fraction of the profile weight lost to excluded nodes.
    pub excluded_weight: T,
    pub excluded: Vec<(T, String)>,
}

impl<T: Real> WindowAverage<T> {
    /// Half the spread of the averaged quantity over the window.
    pub fn half_spread(&self) -> T {
        if self.max >= self.min {
            (self.max - self.min) / T::lit(2.0)
        } else {
            T::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape() {
        let w = EnergyWindow::new(0.5f64, 0.4, 0.5).unwrap();
        assert_eq!(w.profile(0.5), 1.0);
        assert_eq!(w.profile(0.69), 1.0);
        assert_eq!(w.profile(0.9), 0.0);
        assert_eq!(w.profile(0.05), 0.0);
        let mid = w.profile(0.8);
        assert!(mid > 0.0 && mid < 1.0);
        // symmetric transition
        assert!((w.profile(0.8) - w.profile(0.2)).abs() < 1e-15);
        assert!((smoothstep(0.5f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn angle_wraps() {
        let w = EnergyWindow::new(std::f64::consts::PI, 0.3, 0.0).unwrap();
        assert!((w.profile_angle(-std::f64::consts::PI + 0.1) - w.profile_angle(std::f64::consts::PI - 0.1)).abs() < 1e-12);
        assert!(w.profile_angle(-std::f64::consts::PI + 0.05) > 0.5);
        assert_eq!(w.profile_angle(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(EnergyWindow::new(0.0f64, 0.0, 0.0).is_err());
        assert!(EnergyWindow::new(0.0f64, 0.1, 1.0).is_err());
    }

    #[test]
    fn average_of_linear_is_center() {
        let w = EnergyWindow::new(0.3f64, 0.2, 0.2).unwrap();
        let a = w.average(48, |x| Ok(x));
        assert!((a.value - 0.3).abs() < 1e-13);
        let a = w.average(48, |x| if x > 0.3 { Err(Error::Domain("x".into())) } else { Ok(1.0) });
        assert_eq!(a.value, 1.0);
        assert!((a.excluded_weight - 0.5).abs() < 1e-12);
    }
}
