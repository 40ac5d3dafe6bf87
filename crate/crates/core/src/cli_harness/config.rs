use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EnergyWindow, HorizonPolicy};
use crate::error::{Error, Result};
use crate::lattice_models::{presets, OperatorModel};
use crate::weyl_jacobi::BoundaryPath;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SpectralScan,
    Dynamics,
    Compare,
    StoneAudit,
    ParsevalAudit,
    InvariantAudit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SpectralScan => "spectral_scan",
            Mode::Dynamics => "dynamics",
            Mode::Compare => "compare",
            Mode::StoneAudit => "stone_audit",
            Mode::ParsevalAudit => "parseval_audit",
            Mode::InvariantAudit => "invariant_audit",
        }
    }
}

/// Model families addressable from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Free,
    Defect {
        c: f64,
        #[serde(default)]
        site: i64,
    },
    Periodic {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Period2 {
        beta: f64,
    },
    AlmostMathieu {
        coupling: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Random diagonal drawn from the run seed.
    Anderson {
        disorder: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<i64>,
    },
    CmvFree,
    CmvConstant {
        alpha: [f64; 2],
    },
    CmvDefect {
        alpha: [f64; 2],
        #[serde(default)]
        site: i64,
    },
    /// Random Verblunsky coefficients drawn from the run seed.
    CmvRandom {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<i64>,
    },
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {x}")))
    }
}

fn in_disk(name: &str, a: [f64; 2]) -> Result<Complex<f64>> {
    let z = Complex::new(a[0], a[1]);
    if !(z.norm() < 1.0) {
        return Err(Error::Config(format!("{name} = {z} must lie in the open unit disk")));
    }
    Ok(z)
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<OperatorModel<f64>> {
        Ok(match self {
            ModelSpec::Free => presets::free().into(),
            ModelSpec::Defect { c, site } => {
                finite("c", *c)?;
                presets::defect(*c, *site).into()
            }
            ModelSpec::Periodic { a, b } => {
                if a.is_empty() || b.is_empty() {
                    return Err(Error::Config("periodic patterns must be nonempty".into()));
                }
                if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::Config("off-diagonal pattern must be positive".into()));
                }
                for &x in b {
                    finite("b", x)?;
                }
                presets::periodic(a.clone(), b.clone()).into()
            }
            ModelSpec::Period2 { beta } => {
                finite("beta", *beta)?;
                presets::period2(*beta).into()
            }
            ModelSpec::AlmostMathieu { coupling, freq, phase } => {
                finite("coupling", *coupling)?;
                finite("freq", *freq)?;
                finite("phase", *phase)?;
                presets::almost_mathieu(*coupling, *freq, *phase).into()
            }
            ModelSpec::Anderson { disorder, support } => {
                finite("disorder", *disorder)?;
                presets::anderson(*disorder, seed, *support).into()
            }
            ModelSpec::CmvFree => presets::cmv_free().into(),
            ModelSpec::CmvConstant { alpha } => presets::cmv_constant(in_disk("alpha", *alpha)?).into(),
            ModelSpec::CmvDefect { alpha, site } => presets::cmv_defect(in_disk("alpha", *alpha)?, *site).into(),
            ModelSpec::CmvRandom { radius, support } => {
                if !(*radius >= 0.0 && *radius < 1.0) {
                    return Err(Error::Config(format!("radius {radius} must lie in [0, 1)")));
                }
                presets::cmv_random(*radius, seed, *support).into()
            }
        })
    }

    pub fn is_cmv(&self) -> bool {
        matches!(
            self,
            ModelSpec::CmvFree | ModelSpec::CmvConstant { .. } | ModelSpec::CmvDefect { .. } | ModelSpec::CmvRandom { .. }
        )
    }
}

/// Per-model pass criteria; unset entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_spec_max: Option<f64>,
    /// Bound on `max_{|n|<=1} |Re G_nn|` (Jacobi) or `|Im K_nn|` (CMV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_dyn_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_dyn_min: Option<f64>,
    /// Require spectral reflectionlessness over each window (compare mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectionless: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parseval_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_excluded: Option<usize>,
    /// `false` when the model has eigenvalues: the transform then only inverts on the a.c.
    /// subspace and the round-trip audit is skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure_ac: Option<bool>,
}

/// Inclusive evenly spaced grid, or an explicit point list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub lo: f64,
    #[serde(default)]
    pub hi: f64,
    #[serde(default)]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<f64>,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        let raw: Vec<f64> = if !self.points.is_empty() {
            self.points.clone()
        } else {
            if self.count == 0 || !(self.lo.is_finite() && self.hi.is_finite()) || self.hi < self.lo {
                return Err(Error::Config(format!(
                    "grid needs finite lo <= hi and count >= 1 (got {}..{} x {})",
                    self.lo, self.hi, self.count
                )));
            }
            if self.count == 1 {
                vec![self.lo]
            } else {
                let step = (self.hi - self.lo) / (self.count - 1) as f64;
                (0..self.count).map(|i| self.lo + step * i as f64).collect()
            }
        };
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid points must be finite".into()));
        }
        Ok(raw
            .into_iter()
            .filter(|x| !self.exclude.iter().any(|e| (x - e).abs() < 1e-12))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub model: ModelSpec,
    /// How real-axis boundary values are obtained.
    #[serde(default = "auto_path")]
    pub path: BoundaryPath,
    /// Overrides the run-level grid (θ for CMV models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Overrides the run-level window list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<EnergyWindow<f64>>>,
    #[serde(default)]
    pub expect: Expectation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Measure-theoretic reflectionless threshold reported per scan row.
    pub measure: f64,
    /// Spectral reflectionless threshold reported per scan row.
    pub spectral: f64,
    /// `|r_dyn - ⟨R_spec⟩|` in compare mode.
    pub r_gap: f64,
    pub completeness: f64,
    pub norm_drift: f64,
    pub stone_gap: f64,
    pub stone_rank: f64,
    pub parseval_gap: f64,
    pub round_trip: f64,
    pub wronskian: f64,
    pub recurrence: f64,
    pub unitarity: f64,
    pub commutator: f64,
    pub uv_relation: f64,
    /// Implication audit: rows with diagonal defect below `premise` must have spectral defect
    /// below `conclusion`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implication_premise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implication_conclusion: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            measure: 1e-6,
            spectral: 1e-6,
            r_gap: 0.02,
            completeness: 0.01,
            norm_drift: 1e-10,
            stone_gap: 1e-6,
            stone_rank: 1e-8,
            parseval_gap: 1e-6,
            round_trip: 1e-4,
            wronskian: 1e-9,
            recurrence: 1e-10,
            unitarity: 1e-12,
            commutator: 1e-12,
            uv_relation: 1e-10,
            implication_premise: None,
            implication_conclusion: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoneSettings {
    /// Sites `|n| <= radius`.
    pub radius: i64,
}

impl Default for StoneSettings {
    fn default() -> Self {
        Self { radius: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseState {
    pub sites: Vec<i64>,
    pub values: Vec<f64>,
}

impl SparseState {
    pub fn label(&self) -> String {
        self.sites
            .iter()
            .zip(&self.values)
            .map(|(s, v)| if *v == 1.0 { format!("d{s}") } else { format!("{v}*d{s}") })
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParsevalSettings {
    pub states: Vec<SparseState>,
    /// Gauss–Legendre nodes per band.
    pub per_band: usize,
    /// Weyl solutions kept on `[-k, k]`.
    pub k: usize,
}

impl Default for ParsevalSettings {
    fn default() -> Self {
        Self {
            states: vec![SparseState {
                sites: vec![0],
                values: vec![1.0],
            }],
            per_band: 120,
            k: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSettings {
    /// Run the reflection estimator per model and window.
    pub runs: bool,
    /// Audit `‖P_ℓ^+ψ‖² + ‖P_r^+ψ‖² = ‖ψ‖²` on the filtered `δ_0` of each window.
    pub completeness: bool,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            runs: true,
            completeness: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Artifact directory used when the command line gives none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn auto_path() -> BoundaryPath {
    BoundaryPath::Auto
}

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

fn n_default() -> usize {
    2000
}

/// One experiment, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_default")]
    pub schema: u32,
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Truncation half-width for the dynamical modes.
    #[serde(default = "n_default")]
    pub n: usize,
    pub models: Vec<ModelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<EnergyWindow<f64>>,
    #[serde(default)]
    pub horizon: HorizonPolicy<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub stone: StoneSettings,
    #[serde(default)]
    pub parseval: ParsevalSettings,
    #[serde(default)]
    pub dynamics: DynamicsSettings,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; parsing it back gives an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running: schema, model parameters,
    /// grids and windows.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema {} not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models".into()));
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("model names must be unique".into()));
        }
        for m in &self.models {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("model name {:?} must be nonempty [A-Za-z0-9_-]", m.name)));
            }
            m.model.build(self.seed).map_err(|e| Error::Config(format!("model {}: {e}", m.name)))?;
            let needs_grid = matches!(
                self.mode,
                Mode::SpectralScan | Mode::StoneAudit | Mode::InvariantAudit
            );
            if needs_grid {
                self.grid_for(m)?.points()?;
            }
            let needs_windows = matches!(self.mode, Mode::Dynamics | Mode::Compare);
            if needs_windows {
                let ws = self.windows_for(m);
                if ws.is_empty() {
                    return Err(Error::Config(format!("model {}: no windows", m.name)));
                }
                for w in ws {
                    w.validate().map_err(|e| Error::Config(format!("model {}: {e}", m.name)))?;
                }
            }
            if self.mode == Mode::ParsevalAudit && m.model.is_cmv() {
                return Err(Error::Config(format!("model {}: the Parseval audit covers Jacobi models", m.name)));
            }
        }
        for s in &self.parseval.states {
            if s.sites.len() != s.values.len() || s.sites.is_empty() {
                return Err(Error::Config("parseval state needs matching nonempty sites and values".into()));
            }
            if s.sites.iter().any(|n| n.unsigned_abs() as usize > self.parseval.k) {
                return Err(Error::Config(format!("parseval state {} reaches past k = {}", s.label(), self.parseval.k)));
            }
        }
        if self.n < 2 {
            return Err(Error::Config(format!("truncation half-width {} < 2", self.n)));
        }
        if self.stone.radius < 0 {
            return Err(Error::Config("stone radius must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn grid_for<'a>(&'a self, m: &'a ModelEntry) -> Result<&'a GridSpec> {
        m.grid
            .as_ref()
            .or(self.grid.as_ref())
            .ok_or_else(|| Error::Config(format!("model {}: no grid", m.name)))
    }

    pub fn windows_for<'a>(&'a self, m: &'a ModelEntry) -> &'a [EnergyWindow<f64>] {
        m.windows.as_deref().unwrap_or(&self.windows)
    }
}
