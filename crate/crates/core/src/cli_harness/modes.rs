use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode, ModelEntry, SparseState};
use super::output::{to_csv, to_json, Check, Excluded, Failure, Manifest, Relation, RunOutcome};
use crate::cmv_core::{cmv_commutator, cmv_reflectionless, cmv_scan, cmv_stone, laurent_weyl, laurent_weyl_at, CmvPoint};
use crate::dynamics::{
    delta, estimate_r_dyn_on, norm_sqr, project_ds, spectral_filter, spectral_window_average, EnergyWindow, Half,
    TimeSign,
};
use crate::error::{Error, Result};
use crate::lattice_models::{truncate, OperatorModel, TruncatedCmv, TruncatedOperator};
use crate::reflection_jacobi::{
    is_spectrally_reflectionless, parseval_check, scan, stone_matrix, transform_hat, transform_inverse,
    ReflTolerances, ReflectionReport, SpectralGrid, StoneRoute,
};
use crate::weyl_jacobi::{weyl_solutions, WeylPolicy};

type C64 = Complex<f64>;

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// Collected results of one model (or of the whole run after merging, in model order).
#[derive(Default)]
struct Report {
    checks: Vec<Check>,
    failures: Vec<Failure>,
    excluded: Vec<Excluded>,
    files: BTreeMap<String, Vec<u8>>,
    /// CSV rows for run-level tables, already serialized per table.
    rows: BTreeMap<&'static str, Vec<Vec<String>>>,
    timing: BTreeMap<String, f64>,
}

impl Report {
    fn check(&mut self, name: &str, model: &str, at: Option<String>, value: f64, rel: Relation, limit: f64) {
        self.checks.push(Check::new(name, model, at, value, rel, limit));
    }

    fn fail(&mut self, model: &str, at: Option<String>, e: &Error) {
        self.failures.push(Failure {
            model: model.into(),
            at,
            error: e.to_string(),
        });
    }

    fn exclude(&mut self, model: &str, at: f64, reason: String) {
        self.excluded.push(Excluded {
            model: model.into(),
            at,
            reason,
        });
    }

    fn row(&mut self, table: &'static str, r: Vec<String>) {
        self.rows.entry(table).or_default().push(r);
    }

    fn merge(&mut self, o: Report) {
        self.checks.extend(o.checks);
        self.failures.extend(o.failures);
        self.excluded.extend(o.excluded);
        self.files.extend(o.files);
        for (k, v) in o.rows {
            self.rows.entry(k).or_default().extend(v);
        }
        self.timing.extend(o.timing);
    }

    /// Largest value over `(label, value)` pairs as one check; an empty list fails.
    fn worst(&mut self, name: &str, model: &str, vals: &[(String, f64)], limit: f64) {
        let (at, v) = vals
            .iter()
            .fold((None, f64::NEG_INFINITY), |(a, m), (l, v)| if !(*v <= m) { (Some(l.clone()), *v) } else { (a, m) });
        let v = if vals.is_empty() { f64::NAN } else { v };
        self.check(name, model, at, v, Relation::Below, limit);
    }
}

fn window_label(w: &EnergyWindow<f64>) -> String {
    format!("{}+-{}", w.center, w.halfwidth)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Runs a validated experiment and returns its artifacts without touching the filesystem.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| execute(&cfg))
}

fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let per_model: Vec<Report> = cfg
        .models
        .par_iter()
        .map(|m| {
            let t = Instant::now();
            let mut r = Report::default();
            match m.model.build(cfg.seed) {
                Ok(model) => match cfg.mode {
                    Mode::SpectralScan => scan_model(cfg, m, &model, &mut r),
                    Mode::Dynamics => dynamics_model(cfg, m, &model, false, &mut r),
                    Mode::Compare => dynamics_model(cfg, m, &model, true, &mut r),
                    Mode::StoneAudit => stone_model(cfg, m, &model, &mut r),
                    Mode::ParsevalAudit => parseval_model(cfg, m, &model, &mut r),
                    Mode::InvariantAudit => invariant_model(cfg, m, &model, &mut r),
                },
                Err(e) => r.fail(&m.name, None, &e),
            }
            r.timing.insert(format!("model/{}", m.name), t.elapsed().as_secs_f64());
            r
        })
        .collect();
    let mut all = Report::default();
    for r in per_model {
        all.merge(r);
    }
    for (table, rows) in std::mem::take(&mut all.rows) {
        let (header, note): (&[&str], &str) = match table {
            "compare" => (COMPARE_HEADER, ""),
            "dynamics" => (COMPARE_HEADER, ""),
            "completeness" => (COMPLETENESS_HEADER, ""),
            "parseval" => (PARSEVAL_HEADER, ""),
            "invariants" => (AUDIT_HEADER, ""),
            _ => (AUDIT_HEADER, ""),
        };
        all.files
            .insert(format!("{table}.csv"), to_csv(table, 1, note, &rows, header)?);
    }
    let passed = all.failures.is_empty() && all.checks.iter().all(|c| c.pass);
    let manifest = Manifest {
        schema: super::config::SCHEMA_VERSION,
        name: cfg.name.clone(),
        mode: cfg.mode.as_str().into(),
        seed: cfg.seed,
        passed,
        checks: all.checks,
        failures: all.failures,
        excluded: all.excluded,
        files: all.files.keys().cloned().collect(),
        config: cfg.clone(),
    };
    all.timing.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(RunOutcome {
        manifest,
        files: all.files,
        timing: all.timing,
    })
}

fn tolerances(cfg: &ExperimentConfig) -> ReflTolerances<f64> {
    ReflTolerances {
        measure: cfg.tolerances.measure,
        spectral: cfg.tolerances.spectral,
    }
}

fn grid_points(cfg: &ExperimentConfig, m: &ModelEntry, r: &mut Report) -> Option<Vec<f64>> {
    match cfg.grid_for(m).and_then(|g| g.points()) {
        Ok(p) => Some(p),
        Err(e) => {
            r.fail(&m.name, None, &e);
            None
        }
    }
}

pub const SCAN_HEADER: &[&str] = &[
    "lambda",
    "r_spec",
    "re_alpha",
    "im_alpha",
    "re_beta",
    "im_beta",
    "refl_measure",
    "refl_spectral",
    "in_ac2",
    "err",
    "diag_defect",
    "spectral_defect",
    "r_swapped",
];

#[derive(Serialize)]
struct ScanRow {
    lambda: f64,
    r_spec: Option<f64>,
    re_alpha: Option<f64>,
    im_alpha: Option<f64>,
    re_beta: Option<f64>,
    im_beta: Option<f64>,
    refl_measure: Option<bool>,
    refl_spectral: Option<bool>,
    in_ac2: bool,
    err: Option<f64>,
    diag_defect: Option<f64>,
    spectral_defect: Option<f64>,
    r_swapped: Option<f64>,
}

impl ScanRow {
    fn from_report(at: f64, rep: &ReflectionReport<f64>) -> Self {
        Self {
            lambda: at,
            r_spec: Some(rep.r_spec),
            re_alpha: Some(rep.alpha.re),
            im_alpha: Some(rep.alpha.im),
            re_beta: Some(rep.beta.re),
            im_beta: Some(rep.beta.im),
            refl_measure: Some(rep.refl_measure),
            refl_spectral: Some(rep.refl_spectral),
            in_ac2: rep.in_ac2,
            err: Some(rep.err),
            diag_defect: Some(rep.diag_defect),
            spectral_defect: Some(rep.spectral_defect),
            r_swapped: rep.r_swapped,
        }
    }

    fn excluded(at: f64) -> Self {
        Self {
            lambda: at,
            r_spec: None,
            re_alpha: None,
            im_alpha: None,
            re_beta: None,
            im_beta: None,
            refl_measure: None,
            refl_spectral: None,
            in_ac2: false,
            err: None,
            diag_defect: None,
            spectral_defect: None,
            r_swapped: None,
        }
    }
}

fn scan_model(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, r: &mut Report) {
    let Some(pts) = grid_points(cfg, m, r) else { return };
    let policy = WeylPolicy::default().with_path(m.path);
    let tol = tolerances(cfg);
    let (results, variable, kind) = match model {
        OperatorModel::Jacobi(j) => (scan(j, &pts, &policy, &tol), "lambda", "jacobi"),
        OperatorModel::Cmv(c) => (cmv_scan(c, &pts, &policy, &tol), "theta", "cmv"),
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut accepted = Vec::new();
    for (at, res) in results {
        match res {
            Ok(rep) => {
                rows.push(ScanRow::from_report(at, &rep));
                accepted.push(rep);
            }
            Err(e) => {
                rows.push(ScanRow::excluded(at));
                r.exclude(&m.name, at, e.to_string());
            }
        }
    }
    let path = serde_json::to_value(m.path).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let note = format!("model={} kind={kind} path={path} variable={variable}", m.name);
    match to_csv("scan", 1, &note, &rows, SCAN_HEADER) {
        Ok(b) => {
            r.files.insert(format!("scan/{}.csv", m.name), b);
        }
        Err(e) => r.fail(&m.name, None, &e),
    }
    let label = |x: f64| num(x);
    let excluded = rows.len() - accepted.len();
    if let Some(lim) = m.expect.r_spec_max {
        let v: Vec<_> = accepted.iter().map(|a| (label(a.lambda), a.r_spec)).collect();
        r.worst("r_spec_max", &m.name, &v, lim);
    }
    if let Some(lim) = m.expect.diag_max {
        let v: Vec<_> = accepted.iter().map(|a| (label(a.lambda), a.diag_defect)).collect();
        r.worst("diag_max", &m.name, &v, lim);
    }
    if let Some(lim) = m.expect.max_excluded {
        r.check("excluded_points", &m.name, None, excluded as f64, Relation::AtMost, lim as f64);
    }
    if let (Some(premise), Some(conclusion)) = (cfg.tolerances.implication_premise, cfg.tolerances.implication_conclusion) {
        let premises: Vec<_> = accepted.iter().filter(|a| a.diag_defect < premise).collect();
        let violations = premises.iter().filter(|a| !(a.spectral_defect < conclusion)).count();
        let worst = premises.iter().map(|a| a.spectral_defect).fold(0.0, f64::max);
        r.check("implication_premises", &m.name, None, premises.len() as f64, Relation::Above, 0.0);
        r.check("implication_violations", &m.name, None, violations as f64, Relation::AtMost, 0.0);
        r.check("implication_worst_conclusion", &m.name, None, worst, Relation::Below, conclusion);
    }
}

pub const COMPARE_HEADER: &[&str] = &[
    "model",
    "center",
    "halfwidth",
    "flat_top",
    "r_spec_avg",
    "r_spec_min",
    "r_spec_max",
    "r_dyn",
    "err",
    "gap",
    "limit",
    "settled_at",
    "norm_drift",
    "pass",
];

pub const COMPLETENESS_HEADER: &[&str] = &[
    "model",
    "center",
    "halfwidth",
    "left_sandwich",
    "right_sandwich",
    "defect_sandwich",
    "left_abelian",
    "right_abelian",
    "defect_abelian",
    "estimator_gap",
    "pass",
];

fn dynamics_model(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, compare: bool, r: &mut Report) {
    let op = match truncate(model, cfg.n) {
        Ok(op) => op,
        Err(e) => return r.fail(&m.name, None, &e),
    };
    let policy = WeylPolicy::default().with_path(m.path);
    let tol = &cfg.tolerances;
    let table = if compare { "compare" } else { "dynamics" };
    for (i, w) in cfg.windows_for(m).iter().enumerate() {
        let at = Some(window_label(w));
        if compare || cfg.dynamics.runs {
            let run = match estimate_r_dyn_on(model, &op, w, &cfg.horizon) {
                Ok(run) => run,
                Err(e) => {
                    r.fail(&m.name, at.clone(), &e);
                    continue;
                }
            };
            match to_json(&run) {
                Ok(b) => {
                    r.files.insert(format!("runs/{}_w{i}.json", m.name), b);
                }
                Err(e) => r.fail(&m.name, at.clone(), &e),
            }
            let avg = spectral_window_average(model, w, 48, &policy);
            let has_avg = avg.value.is_finite();
            let gap = has_avg.then(|| (run.r_dyn - avg.value).abs());
            let limit = tol.r_gap.max(3.0 * run.err);
            let mut pass = true;
            let before = r.checks.len();
            if compare {
                match gap {
                    Some(g) => r.check("r_gap", &m.name, at.clone(), g, Relation::Below, limit),
                    None => r.fail(
                        &m.name,
                        at.clone(),
                        &Error::Domain("no certified a.c. spectrum in the window".into()),
                    ),
                }
                for (x, reason) in &avg.excluded {
                    r.exclude(&m.name, *x, reason.clone());
                }
                if let Some(lim) = m.expect.r_spec_max {
                    let v = if has_avg { avg.max } else { f64::NAN };
                    r.check("r_spec_max", &m.name, at.clone(), v, Relation::Below, lim);
                }
                if m.expect.reflectionless == Some(true) {
                    reflectionless_check(cfg, m, model, w, &policy, r);
                }
            }
            if let Some(lim) = m.expect.r_dyn_max {
                r.check("r_dyn_max", &m.name, at.clone(), run.r_dyn, Relation::Below, lim);
            }
            if let Some(lim) = m.expect.r_dyn_min {
                r.check("r_dyn_min", &m.name, at.clone(), run.r_dyn, Relation::Above, lim);
            }
            r.check(
                "norm_drift",
                &m.name,
                at.clone(),
                run.diagnostics.max_norm_drift,
                Relation::Below,
                tol.norm_drift,
            );
            pass &= r.checks[before..].iter().all(|c| c.pass);
            r.row(
                table,
                vec![
                    m.name.clone(),
                    num(w.center),
                    num(w.halfwidth),
                    num(w.flat_top),
                    opt(has_avg.then_some(avg.value)),
                    opt(has_avg.then_some(avg.min)),
                    opt(has_avg.then_some(avg.max)),
                    num(run.r_dyn),
                    num(run.err),
                    opt(gap),
                    num(limit),
                    num(run.diagnostics.settled_at),
                    num(run.diagnostics.max_norm_drift),
                    pass.to_string(),
                ],
            );
        }
        if cfg.dynamics.completeness {
            completeness(cfg, m, &op, w, r);
        }
    }
}

fn reflectionless_check(
    cfg: &ExperimentConfig,
    m: &ModelEntry,
    model: &OperatorModel<f64>,
    w: &EnergyWindow<f64>,
    policy: &WeylPolicy<f64>,
    r: &mut Report,
) {
    let count = 25;
    let pts: Vec<f64> = (0..count)
        .map(|i| w.lo() + 2.0 * w.halfwidth * i as f64 / (count - 1) as f64)
        .collect();
    let tol = cfg.tolerances.spectral;
    let v = match model {
        OperatorModel::Jacobi(j) => is_spectrally_reflectionless(j, &pts, tol, 4, policy),
        OperatorModel::Cmv(c) => cmv_reflectionless(c, &pts, tol, policy),
    };
    let at = Some(window_label(w));
    for (x, reason) in &v.excluded {
        r.exclude(&m.name, *x, reason.clone());
    }
    let certified = count - v.excluded.len();
    r.check("refl_spectral_points", &m.name, at.clone(), certified as f64, Relation::Above, 0.0);
    r.check("refl_spectral_violations", &m.name, at, v.witnesses.len() as f64, Relation::AtMost, 0.0);
}

/// `‖P_ℓ^+ψ‖² + ‖P_r^+ψ‖² = ‖ψ‖²` for the normalized window filter of `δ_0`.
fn completeness(cfg: &ExperimentConfig, m: &ModelEntry, op: &TruncatedOperator<f64>, w: &EnergyWindow<f64>, r: &mut Report) {
    let at = Some(window_label(w));
    let result = (|| -> Result<_> {
        let mut psi = spectral_filter(op, w, &delta(op, 0)?)?;
        let norm = norm_sqr(&psi).sqrt();
        psi.iter_mut().for_each(|x| *x /= norm);
        let left = project_ds(op, &psi, Half::Left, TimeSign::Plus, &cfg.horizon)?;
        let right = project_ds(op, &psi, Half::Right, TimeSign::Plus, &cfg.horizon)?;
        Ok((left, right))
    })();
    let (left, right) = match result {
        Ok(x) => x,
        Err(e) => return r.fail(&m.name, at, &e),
    };
    let (ls, rs) = (norm_sqr(&left.vector), norm_sqr(&right.vector));
    let (la, ra) = (norm_sqr(&left.abelian), norm_sqr(&right.abelian));
    let ds = (ls + rs - 1.0).abs();
    let da = (la + ra - 1.0).abs();
    let tol = cfg.tolerances.completeness;
    let before = r.checks.len();
    r.check("completeness_sandwich", &m.name, at.clone(), ds, Relation::Below, tol);
    r.check("completeness_abelian", &m.name, at.clone(), da, Relation::Below, tol);
    let pass = r.checks[before..].iter().all(|c| c.pass);
    r.row(
        "completeness",
        vec![
            m.name.clone(),
            num(w.center),
            num(w.halfwidth),
            num(ls),
            num(rs),
            num(ds),
            num(la),
            num(ra),
            num(da),
            num(left.gap.max(right.gap)),
            pass.to_string(),
        ],
    );
}

pub const STONE_HEADER: &[&str] = &[
    "lambda",
    "gap",
    "limit",
    "hermitian_defect",
    "min_eig",
    "eig3_expansion",
    "eig3_resolvent",
    "err",
    "pass",
];

#[derive(Serialize)]
struct StoneRow {
    lambda: f64,
    gap: f64,
    limit: f64,
    hermitian_defect: f64,
    min_eig: f64,
    eig3_expansion: f64,
    eig3_resolvent: f64,
    err: f64,
    pass: bool,
}

fn stone_model(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, r: &mut Report) {
    let Some(pts) = grid_points(cfg, m, r) else { return };
    let policy = WeylPolicy::default().with_path(m.path);
    let rad = cfg.stone.radius;
    let sites: Vec<i64> = (-rad..=rad).collect();
    let both = |x: f64| -> Result<_> {
        let get = |route| match model {
            OperatorModel::Jacobi(j) => stone_matrix(j, x, &sites, route, &policy),
            OperatorModel::Cmv(c) => cmv_stone(c, x, &sites, route, &policy),
        };
        Ok((get(StoneRoute::Expansion)?, get(StoneRoute::ResolventLimit)?))
    };
    let results: Vec<(f64, Result<_>)> = pts.par_iter().map(|&x| (x, both(x))).collect();
    let tol = &cfg.tolerances;
    let mut rows = Vec::new();
    for (x, res) in results {
        let at = Some(num(x));
        let (e, s) = match res {
            Ok(v) => v,
            Err(err @ Error::UndefinedReflection { .. }) => {
                r.exclude(&m.name, x, err.to_string());
                continue;
            }
            Err(err) => {
                r.fail(&m.name, at, &err);
                continue;
            }
        };
        let gap = e
            .s
            .iter()
            .flatten()
            .zip(s.s.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let err = e.err.max(s.err);
        let limit = tol.stone_gap.max(10.0 * err);
        let herm = e.hermitian_defect().max(s.hermitian_defect());
        let ee = e.eigenvalues();
        let es = s.eigenvalues();
        let min_eig = ee.last().copied().unwrap_or(0.0);
        let third = |v: &[f64]| v.get(2).copied().unwrap_or(0.0);
        let before = r.checks.len();
        r.check("stone_gap", &m.name, at.clone(), gap, Relation::Below, limit);
        r.check("stone_hermitian", &m.name, at.clone(), herm, Relation::Below, tol.stone_gap);
        r.check("stone_psd", &m.name, at.clone(), -min_eig, Relation::Below, tol.stone_rank);
        r.check("stone_rank", &m.name, at.clone(), third(&ee), Relation::Below, tol.stone_rank);
        rows.push(StoneRow {
            lambda: x,
            gap,
            limit,
            hermitian_defect: herm,
            min_eig,
            eig3_expansion: third(&ee),
            eig3_resolvent: third(&es),
            err,
            pass: r.checks[before..].iter().all(|c| c.pass),
        });
    }
    let variable = if matches!(model, OperatorModel::Cmv(_)) { "theta" } else { "lambda" };
    let note = format!("model={} radius={rad} variable={variable}", m.name);
    match to_csv("stone", 1, &note, &rows, STONE_HEADER) {
        Ok(b) => {
            r.files.insert(format!("stone/{}.csv", m.name), b);
        }
        Err(e) => r.fail(&m.name, None, &e),
    }
}

pub const PARSEVAL_HEADER: &[&str] = &["model", "state", "lhs", "rhs", "gap", "limit", "pass"];

pub const AUDIT_HEADER: &[&str] = &["model", "check", "at", "value", "limit", "pass"];

fn state_vector(s: &SparseState) -> (i64, Vec<C64>) {
    let lo = *s.sites.iter().min().expect("validated nonempty");
    let hi = *s.sites.iter().max().expect("validated nonempty");
    let mut v = vec![C64::new(0.0, 0.0); (hi - lo + 1) as usize];
    for (&n, &x) in s.sites.iter().zip(&s.values) {
        v[(n - lo) as usize] += C64::new(x, 0.0);
    }
    (lo, v)
}

fn spectral_grid(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, r: &mut Report) -> Option<SpectralGrid<f64>> {
    let OperatorModel::Jacobi(j) = model else {
        r.fail(&m.name, None, &Error::Config("transform audits cover Jacobi models".into()));
        return None;
    };
    let policy = WeylPolicy::default().with_path(m.path);
    match SpectralGrid::for_model(j, cfg.parseval.per_band, cfg.parseval.k, &policy) {
        Ok(g) => {
            for (x, reason) in &g.excluded {
                r.exclude(&m.name, *x, reason.clone());
            }
            Some(g)
        }
        Err(e) => {
            r.fail(&m.name, None, &e);
            None
        }
    }
}

fn parseval_model(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, r: &mut Report) {
    let Some(grid) = spectral_grid(cfg, m, model, r) else { return };
    let limit = m.expect.parseval_gap.unwrap_or(cfg.tolerances.parseval_gap);
    for s in &cfg.parseval.states {
        let (lo, phi) = state_vector(s);
        let at = Some(s.label());
        match parseval_check(&grid, lo, &phi) {
            Ok(p) => {
                r.check("parseval", &m.name, at, p.gap, Relation::Below, limit);
                r.row(
                    "parseval",
                    vec![
                        m.name.clone(),
                        s.label(),
                        num(p.lhs),
                        num(p.rhs),
                        num(p.gap),
                        num(limit),
                        (p.gap < limit).to_string(),
                    ],
                );
            }
            Err(e) => r.fail(&m.name, at, &e),
        }
    }
}

/// Grid points of the invariant audit keep the Weyl solutions on `[-K, K]`.
const AUDIT_K: usize = 8;
const AUDIT_TRUNCATION: usize = 24;
const UV_RADIUS: f64 = 0.5;

fn invariant_model(cfg: &ExperimentConfig, m: &ModelEntry, model: &OperatorModel<f64>, r: &mut Report) {
    let Some(pts) = grid_points(cfg, m, r) else { return };
    let policy = WeylPolicy::default().with_path(m.path);
    let tol = &cfg.tolerances;
    let mut record = |r: &mut Report, name: &str, vals: Vec<(String, f64)>, limit: f64| {
        for (at, v) in &vals {
            r.row(
                "invariants",
                vec![m.name.clone(), name.into(), at.clone(), num(*v), num(limit), (*v < limit).to_string()],
            );
        }
        r.worst(name, &m.name, &vals, limit);
    };
    match model {
        OperatorModel::Jacobi(j) => {
            let res: Vec<(f64, Result<(f64, f64)>)> = pts
                .par_iter()
                .map(|&x| {
                    (
                        x,
                        weyl_solutions(j, x, AUDIT_K, &policy).map(|b| (b.wronskian_spread, b.recurrence_residual(j))),
                    )
                })
                .collect();
            let (mut wr, mut rec) = (Vec::new(), Vec::new());
            for (x, v) in res {
                match v {
                    Ok((w, q)) => {
                        wr.push((num(x), w));
                        rec.push((num(x), q));
                    }
                    Err(e) => r.exclude(&m.name, x, e.to_string()),
                }
            }
            record(r, "wronskian_spread", wr, tol.wronskian);
            record(r, "recurrence_residual", rec, tol.recurrence);
            if let Some(grid) = spectral_grid(cfg, m, model, r) {
                transform_audit(cfg, m, &grid, r, &mut record);
            }
        }
        OperatorModel::Cmv(c) => {
            let res: Vec<(f64, Result<(f64, f64, f64)>)> = pts
                .par_iter()
                .map(|&th| {
                    let v = (|| -> Result<_> {
                        let b = laurent_weyl(c, th, AUDIT_K, &policy)?;
                        let z = C64::from_polar(UV_RADIUS, th);
                        let inner = laurent_weyl_at(c, CmvPoint::Off(z), AUDIT_K, &policy)?;
                        let outer = laurent_weyl_at(c, CmvPoint::Off(C64::new(1.0, 0.0) / z.conj()), AUDIT_K, &policy)?;
                        let k = AUDIT_K as i64;
                        let uv = (-k..=k)
                            .map(|n| {
                                (outer.v_p(n) + inner.u_p(n).conj())
                                    .norm()
                                    .max((outer.v_m(n) + inner.u_m(n).conj()).norm())
                            })
                            .fold(0.0, f64::max);
                        Ok((b.wronskian_spread, b.transfer_residual(c).max(b.theta_residual(c)), uv))
                    })();
                    (th, v)
                })
                .collect();
            let (mut wr, mut rec, mut uv) = (Vec::new(), Vec::new(), Vec::new());
            for (x, v) in res {
                match v {
                    Ok((w, q, u)) => {
                        wr.push((num(x), w));
                        rec.push((num(x), q));
                        uv.push((num(x), u));
                    }
                    Err(e) => r.exclude(&m.name, x, e.to_string()),
                }
            }
            record(r, "wronskian_spread", wr, tol.wronskian);
            record(r, "recurrence_residual", rec, tol.recurrence);
            record(r, "uv_relation", uv, tol.uv_relation);
            let t = TruncatedCmv::new(c, AUDIT_TRUNCATION);
            record(r, "unitarity", vec![(format!("N={AUDIT_TRUNCATION}"), t.unitarity_defect())], tol.unitarity);
            let u = t.dense();
            let d = t.dim();
            let comm: Vec<(String, f64)> = (-3..=3i64)
                .map(|n| {
                    let op = cmv_commutator(c, n);
                    let chi = |s: usize| if t.lo() + s as i64 >= n { 1.0 } else { 0.0 };
                    let mut worst = 0.0f64;
                    for i in 0..d {
                        let mut e = vec![C64::new(0.0, 0.0); d];
                        e[i] = C64::new(1.0, 0.0);
                        let sparse = op.apply(t.lo(), &e);
                        for row in 0..d {
                            let dense = u[row][i] * chi(i) - u[row][i] * chi(row);
                            worst = worst.max((dense - sparse[row]).norm());
                        }
                    }
                    (format!("n={n}"), worst)
                })
                .collect();
            record(r, "commutator_dense", comm, tol.commutator);
        }
    }
}

/// Round trip `φ → φ̂ → φ̌` on the states of the Parseval settings, and `‖ǧ‖ ≤ ‖g‖` for a fixed
/// smooth `g`.
fn transform_audit(
    cfg: &ExperimentConfig,
    m: &ModelEntry,
    grid: &SpectralGrid<f64>,
    r: &mut Report,
    record: &mut impl FnMut(&mut Report, &str, Vec<(String, f64)>, f64),
) {
    let k = cfg.parseval.k as i64;
    let mut trips = Vec::new();
    let states: &[SparseState] = if m.expect.pure_ac == Some(false) { &[] } else { &cfg.parseval.states };
    for s in states {
        let (lo, phi) = state_vector(s);
        let res = transform_hat(grid, lo, &phi).and_then(|(hp, hm)| transform_inverse(grid, &hp, &hm, -k, k));
        match res {
            Ok(back) => {
                let mut err2 = 0.0;
                for (i, b) in back.iter().enumerate() {
                    let n = i as i64 - k;
                    let want = if n >= lo && n < lo + phi.len() as i64 { phi[(n - lo) as usize] } else { C64::new(0.0, 0.0) };
                    err2 += (b - want).norm_sqr();
                }
                trips.push((s.label(), (err2 / norm_sqr(&phi)).sqrt()));
            }
            Err(e) => r.fail(&m.name, Some(s.label()), &e),
        }
    }
    if !states.is_empty() {
        record(r, "round_trip", trips, cfg.tolerances.round_trip);
    }
    let gp: Vec<C64> = grid.nodes.iter().map(|&x| C64::from_polar(x.cos(), 3.0 * x)).collect();
    let gm: Vec<C64> = grid.nodes.iter().map(|&x| C64::new(0.0, x / (1.0 + x * x))).collect();
    match transform_inverse(grid, &gp, &gm, -k, k) {
        Ok(back) => {
            let ratio = norm_sqr(&back) / grid.weighted_norm_sqr(&gp, &gm);
            let limit = 1.0 + cfg.tolerances.parseval_gap;
            r.row(
                "invariants",
                vec![m.name.clone(), "inverse_contraction".into(), String::new(), num(ratio), num(limit), (ratio <= limit).to_string()],
            );
            r.check("inverse_contraction", &m.name, None, ratio, Relation::AtMost, limit);
        }
        Err(e) => r.fail(&m.name, None, &e),
    }
}
