//! Time evolution on decoupled truncations, asymptotic localization projections and the
//! dynamical reflection probability.
//!
//! Jacobi truncations propagate through their cached eigendecomposition; CMV truncations step
//! with the banded factors and filter through the Fourier series of the window profile.

mod flow;
mod projection;
mod window;

pub use flow::{
    cmv_power, cut, delta, evolve, mass_where, norm_sqr, packet_extent, spectral_filter, speed_bound, split_mass,
    steps_of, Flow, MAX_DENSE_DIM,
};
pub use projection::{project_ds, Half, Projection, TimeSign};
pub use window::{wrap_angle, EnergyWindow, WindowAverage};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::cmv_core::cmv_r_spec;
use crate::error::{Error, Result};
use crate::lattice_models::{truncate, OperatorModel, TruncatedOperator};
use crate::reflection_jacobi::{r_spec, ReflTolerances};
use crate::scalar::Real;
use crate::weyl_jacobi::WeylPolicy;
use flow::transport_speed;

type C<T> = Complex<T>;

/// Time scales and tolerances of the dynamical estimators. Unset times scale with `N` and
/// the transport speed of the truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct HorizonPolicy<T> {
    /// Seed site at `-offset_fraction · N`.
    pub offset_fraction: T,
    pub purge_time: Option<T>,
    pub probe_time: Option<T>,
    /// Largest `‖χ^+ ψ(-t_probe)‖² / ‖ψ‖²` accepted from the preparation.
    pub probe_tol: T,
    pub sandwich_time: Option<T>,
    pub abel_eps: Vec<T>,
    pub gap_tol: T,
    pub sample_dt: Option<T>,
    /// Trailing samples over which the left mass must be stable.
    pub settle_samples: usize,
    pub settle_tol: T,
    pub edge_fraction: T,
    pub edge_tol: T,
}

impl<T: Real> Default for HorizonPolicy<T> {
    fn default() -> Self {
        Self {
            offset_fraction: T::lit(0.5),
            purge_time: None,
            probe_time: None,
            probe_tol: T::lit(0.01),
            sandwich_time: None,
            abel_eps: vec![T::lit(0.1), T::lit(0.05), T::lit(0.025)],
            gap_tol: T::lit(0.05),
            sample_dt: None,
            settle_samples: 10,
            settle_tol: T::lit(1e-3),
            edge_fraction: T::lit(0.1),
            edge_tol: T::lit(1e-4),
        }
    }
}

fn time_for<T: Real>(op: &TruncatedOperator<T>, t: T) -> T {
    match op {
        TruncatedOperator::Jacobi(_) => t,
        TruncatedOperator::Cmv(_) => t.round().max(T::one()),
    }
}

impl<T: Real> HorizonPolicy<T> {
    fn half_width(op: &TruncatedOperator<T>) -> T {
        T::from_i(op.lo().abs())
    }

    fn scaled(&self, op: &TruncatedOperator<T>, set: Option<T>, fraction: f64) -> T {
        let t = set.unwrap_or_else(|| T::lit(fraction) * Self::half_width(op) / transport_speed(op));
        time_for(op, t)
    }

    pub fn purge(&self, op: &TruncatedOperator<T>) -> T {
        self.scaled(op, self.purge_time, 0.25)
    }

    pub fn probe(&self, op: &TruncatedOperator<T>) -> T {
        self.scaled(op, self.probe_time, 0.6)
    }

    pub fn sandwich(&self, op: &TruncatedOperator<T>) -> T {
        self.scaled(op, self.sandwich_time, 0.3)
    }

    pub fn dt(&self, op: &TruncatedOperator<T>) -> T {
        let t = self.sample_dt.unwrap_or_else(|| T::lit(8.0) / transport_speed(op));
        time_for(op, t)
    }

    pub fn offset(&self, op: &TruncatedOperator<T>) -> i64 {
        (self.offset_fraction * Self::half_width(op)).round().to_i64().unwrap_or(0)
    }
}

/// Normalized incoming packet with its preparation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prepared<T> {
    pub psi: Vec<C<T>>,
    pub seed_site: i64,
    pub centroid: T,
    /// Radius holding all but `1e-6` of the mass.
    pub radius: T,
    pub rms_width: T,
    /// `‖χ^+ ψ(-t_probe)‖² / ‖ψ‖²`.
    pub probe_mass: T,
    pub purge_time: T,
    pub probe_time: T,
}

fn rms_width<T: Real>(lo: i64, psi: &[C<T>], centroid: T) -> T {
    let total = norm_sqr(psi);
    (psi.iter()
        .enumerate()
        .map(|(k, x)| x.norm_sqr() * (T::from_i(lo + k as i64) - centroid).powi(2))
        .sum::<T>()
        / total)
        .sqrt()
}

/// Filtered seed at `-offset`, purged of its left-moving part: evolve back, keep the sites
/// left of the seed, evolve forward, filter again.
pub fn prepare_incoming_left<T: Real>(
    op: &TruncatedOperator<T>,
    window: &EnergyWindow<T>,
    policy: &HorizonPolicy<T>,
) -> Result<Prepared<T>> {
    let lo = op.lo();
    let n = lo.abs();
    let s = -policy.offset(op);
    let seed = delta(op, s)?;
    let filtered = spectral_filter(op, window, &seed)?;
    let tp = policy.purge(op);
    let back = evolve(op, &filtered, -tp)?;
    let kept = cut(lo, &back, |k| k <= s);
    let forward = evolve(op, &kept, tp)?;
    let mut psi = spectral_filter(op, window, &forward)?;
    let norm = norm_sqr(&psi).sqrt();
    for x in psi.iter_mut() {
        *x = *x / norm;
    }
    let (centroid, radius) = packet_extent(lo, &psi, T::lit(1e-6));
    let rms = rms_width(lo, &psi, centroid);
    let tprobe = policy.probe(op);
    let probe = evolve(op, &psi, -tprobe)?;
    let probe_mass = split_mass(lo, &probe).1;
    let limit = -T::from_i(n) / T::lit(4.0);
    if centroid + radius > limit {
        return Err(Error::Preparation(format!(
            "packet at {centroid:.1} with radius {radius:.1} reaches past -N/4 = {limit}; increase N or widen the window"
        )));
    }
    if !(probe_mass < policy.probe_tol) {
        return Err(Error::Preparation(format!(
            "left-moving residue {:.3e} after the purge (tolerance {}); group velocity too small for N = {n}",
            probe_mass.to_f(),
            policy.probe_tol
        )));
    }
    Ok(Prepared {
        psi,
        seed_site: s,
        centroid,
        radius,
        rms_width: rms,
        probe_mass,
        purge_time: tp,
        probe_time: tprobe,
    })
}

/// Guard and settling diagnostics of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics<T> {
    pub preparation_residual: T,
    /// Largest change of the left mass over the trailing settle window.
    pub settle_drift: T,
    /// Mass within `edge_fraction · N` of either end when settled.
    pub edge_mass: T,
    /// Mass left near the origin when settled.
    pub core_mass: T,
    pub max_norm_drift: T,
    pub settled_at: T,
    /// Profile-weighted spectral reflection over the window, when available.
    pub r_spec_avg: Option<T>,
    pub r_spec_half_spread: T,
    pub excluded: Vec<(T, String)>,
}

/// One dynamical reflection experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct EvolutionRun<T> {
    pub model: String,
    pub n: usize,
    pub window: EnergyWindow<T>,
    pub packet: Vec<C<T>>,
    pub times: Vec<T>,
    pub left_mass: Vec<T>,
    pub right_mass: Vec<T>,
    pub r_dyn: T,
    pub err: T,
    pub diagnostics: RunDiagnostics<T>,
}

/// Profile-weighted window mean of the spectral reflection probability (`R_spec` on the
/// line, the Carathéodory form on the circle).
pub fn spectral_window_average<T: Real>(
    model: &OperatorModel<T>,
    window: &EnergyWindow<T>,
    nodes: usize,
    policy: &WeylPolicy<T>,
) -> WindowAverage<T> {
    let tol = ReflTolerances::default();
    match model {
        OperatorModel::Jacobi(j) => window.average(nodes, |l| r_spec(j, l, policy, &tol).map(|r| r.r_spec)),
        OperatorModel::Cmv(c) => window.average(nodes, |th| cmv_r_spec(c, th, policy, &tol).map(|r| r.r_spec)),
    }
}

/// Dynamical reflection probability on the truncation of half-width `n`.
pub fn estimate_r_dyn<T: Real>(
    model: &OperatorModel<T>,
    window: &EnergyWindow<T>,
    n: usize,
    policy: &HorizonPolicy<T>,
) -> Result<EvolutionRun<T>> {
    let op = truncate(model, n)?;
    estimate_r_dyn_on(model, &op, window, policy)
}

/// As [`estimate_r_dyn`], on a truncation built (and possibly shared) by the caller.
pub fn estimate_r_dyn_on<T: Real>(
    model: &OperatorModel<T>,
    op: &TruncatedOperator<T>,
    window: &EnergyWindow<T>,
    policy: &HorizonPolicy<T>,
) -> Result<EvolutionRun<T>> {
    let prep = prepare_incoming_left(op, window, policy)?;
    let lo = op.lo();
    let hi = lo + op.dim() as i64 - 1;
    let half = lo.abs();
    let edge = (policy.edge_fraction * T::from_i(half)).round().to_i64().unwrap_or(0);
    let core = (T::lit(2.0) * prep.rms_width).max(T::lit(10.0));
    let dt = policy.dt(op);
    let t_limit = T::lit(20.0) * T::from_i(half) / transport_speed(op);
    let total = norm_sqr(&prep.psi);

    let mut flow = Flow::new(op, &prep.psi)?;
    let (mut times, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
    let mut arrived = false;
    let mut max_norm_drift = T::zero();
    let mut step = 0usize;
    let (drift, edge_mass, core_mass, t_settle) = loop {
        let t = dt * T::from_usize(step).unwrap_or(T::zero());
        let phi = flow.at(t)?;
        let (l, r) = split_mass(lo, &phi);
        max_norm_drift = max_norm_drift.max((l + r - total).abs());
        times.push(t);
        left.push(l / total);
        right.push(r / total);
        let core_mass = mass_where(lo, &phi, |k| T::from_i(k).abs() <= core) / total;
        let edge_mass = mass_where(lo, &phi, |k| k < lo + edge || k > hi - edge) / total;
        arrived |= core_mass > T::lit(0.1);
        let k = policy.settle_samples.max(1);
        let drift = if left.len() > k {
            let tail = &left[left.len() - 1 - k..];
            let (mn, mx) = tail.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &x| (a.min(x), b.max(x)));
            mx - mn
        } else {
            T::infinity()
        };
        if arrived && core_mass < policy.settle_tol && drift < policy.settle_tol {
            break (drift, edge_mass, core_mass, t);
        }
        if edge_mass > policy.edge_tol {
            return Err(Error::BoundaryContamination {
                edge_mass: edge_mass.to_f(),
                time: t.to_f(),
            });
        }
        if t > t_limit {
            return Err(Error::NotConverged { gap: drift.to_f() });
        }
        step += 1;
    };
    let r_dyn = *left.last().expect("at least one sample");
    let avg = spectral_window_average(model, window, 48, &WeylPolicy::default());
    let spread = if avg.value.is_finite() { avg.half_spread() } else { T::zero() };
    let err = prep.probe_mass + drift + edge_mass + core_mass + spread;
    Ok(EvolutionRun {
        model: match model {
            OperatorModel::Jacobi(_) => "jacobi".into(),
            OperatorModel::Cmv(_) => "cmv".into(),
        },
        n: half as usize,
        window: *window,
        packet: prep.psi,
        times,
        left_mass: left,
        right_mass: right,
        r_dyn,
        err,
        diagnostics: RunDiagnostics {
            preparation_residual: prep.probe_mass,
            settle_drift: drift,
            edge_mass,
            core_mass,
            max_norm_drift,
            settled_at: t_settle,
            r_spec_avg: avg.value.is_finite().then_some(avg.value),
            r_spec_half_spread: spread,
            excluded: avg.excluded,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::presets;

    #[test]
    fn free_preparation_moves_right() {
        let op = truncate(&OperatorModel::Jacobi(presets::free::<f64>()), 800).unwrap();
        let w = EnergyWindow::new(0.0, 0.4, 0.0).unwrap();
        let pol = HorizonPolicy::default();
        let p = prepare_incoming_left(&op, &w, &pol).unwrap();
        assert!(p.probe_mass < 1e-3, "{}", p.probe_mass);
        // group velocity 2 at λ = 0
        let (c0, _) = packet_extent(op.lo(), &p.psi, 1e-6);
        let (c1, _) = packet_extent(op.lo(), &evolve(&op, &p.psi, 50.0).unwrap(), 1e-6);
        assert!(((c1 - c0) / 50.0 - 2.0).abs() < 0.05, "{}", (c1 - c0) / 50.0);
        let pr = project_ds(&op, &p.psi, Half::Left, TimeSign::Plus, &pol).unwrap();
        assert!(norm_sqr(&pr.vector) > 0.99);
        assert!(norm_sqr(&pr.abelian) > 0.99);
    }

    #[test]
    fn band_edge_preparation_fails() {
        let op = truncate(&OperatorModel::Jacobi(presets::free()), 300).unwrap();
        let w = EnergyWindow::new(1.95, 0.04, 0.0).unwrap();
        assert!(matches!(
            prepare_incoming_left(&op, &w, &HorizonPolicy::default()),
            Err(Error::Preparation(_))
        ));
    }

    #[test]
    fn small_defect_run() {
        let model = OperatorModel::Jacobi(presets::defect(1.0f64, 0));
        let w = EnergyWindow::new(0.0, 0.3, 0.0).unwrap();
        let run = estimate_r_dyn(&model, &w, 1000, &HorizonPolicy::default()).unwrap();
        let avg = run.diagnostics.r_spec_avg.unwrap();
        assert!((run.r_dyn - avg).abs() < 0.02, "{} vs {avg}", run.r_dyn);
        assert!(run.diagnostics.max_norm_drift < 1e-10);
        for (l, r) in run.left_mass.iter().zip(&run.right_mass) {
            assert!((l + r - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cmv_free_run() {
        let model = OperatorModel::Cmv(presets::cmv_free());
        let w = EnergyWindow::new(1.0, 0.3, 0.0).unwrap();
        let run = estimate_r_dyn(&model, &w, 1000, &HorizonPolicy::default()).unwrap();
        assert!(run.r_dyn < 0.005, "{}", run.r_dyn);
    }

    #[test]
    fn small_truncation_contaminates() {
        let model = OperatorModel::Jacobi(presets::defect(1.0, 0));
        let w = EnergyWindow::new(0.0, 0.3, 0.0).unwrap();
        // a settle tolerance that cannot be met keeps the run going until the edges fill
        let pol = HorizonPolicy {
            settle_tol: 1e-14,
            ..HorizonPolicy::default()
        };
        assert!(matches!(
            estimate_r_dyn(&model, &w, 1000, &pol),
            Err(Error::BoundaryContamination { .. })
        ));
    }
}
