use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";
pub const SUMMARY: &str = "summary.json";

/// Non-finite floats as JSON `null` (read back as NaN).
mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value < limit`
    Below,
    /// `value > limit`
    Above,
    /// `value <= limit`
    AtMost,
}

/// One pass/fail verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub model: String,
    /// Window or grid point the check is about, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    #[serde(with = "nan_null")]
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, model: &str, at: Option<String>, value: f64, relation: Relation, limit: f64) -> Self {
        let pass = match relation {
            Relation::Below => value < limit,
            Relation::Above => value > limit,
            Relation::AtMost => value <= limit,
        };
        Self {
            name: name.into(),
            model: model.into(),
            at,
            value,
            relation,
            limit,
            pass,
        }
    }

    /// `value / limit` for upper bounds, `limit / value` for lower bounds; above 1 fails.
    pub fn margin(&self) -> f64 {
        if !self.value.is_finite() && !self.pass {
            return f64::INFINITY;
        }
        match self.relation {
            Relation::Below | Relation::AtMost if self.limit > 0.0 => self.value / self.limit,
            Relation::Below | Relation::AtMost => {
                if self.pass {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Relation::Above if self.value > 0.0 => self.limit / self.value,
            Relation::Above => f64::INFINITY,
        }
    }
}

/// A module error that prevented a result, with its context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    pub error: String,
}

/// A grid point left out of a quantifier because it is not certified in the a.c. set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub model: String,
    pub at: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub name: String,
    pub mode: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub excluded: Vec<Excluded>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn worst_margin(&self) -> f64 {
        self.checks.iter().map(Check::margin).fold(0.0, f64::max)
    }
}

/// Result of a run, held in memory until written.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    /// Relative path to content, excluding the manifest and timing files.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Wall-clock seconds per stage; kept apart from the manifest so that reruns compare equal.
    pub timing: BTreeMap<String, f64>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }
}

pub fn to_json<S: Serialize>(v: &S) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// CSV with a leading `# reflectionless <table> v<version> ...` line.
pub fn to_csv<S: Serialize>(table: &str, version: u32, note: &str, rows: &[S], header: &[&str]) -> Result<Vec<u8>> {
    let mut out = format!("# reflectionless {table} v{version}");
    if !note.is_empty() {
        out.push(' ');
        out.push_str(note);
    }
    out.push('\n');
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out.into_bytes());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes every artifact under `dir`, then the manifest and timing files.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &outcome.files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
    }
    fs::write(dir.join(MANIFEST), to_json(&outcome.manifest)?)?;
    fs::write(dir.join(TIMING), to_json(&outcome.timing)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub mode: String,
    pub dir: String,
    pub passed: bool,
    pub checks: usize,
    pub failed_checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub excluded: usize,
    #[serde(with = "nan_null")]
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub passed: bool,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<28} {:<16} {:>6} {:>7} {:>9} {:>9}  {}\n",
            "run", "mode", "checks", "failed", "margin", "seconds", "status"
        );
        for r in &self.runs {
            let secs = r.seconds.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
            s += &format!(
                "{:<28} {:<16} {:>6} {:>7} {:>9.3e} {:>9}  {}\n",
                r.name,
                r.mode,
                r.checks,
                r.failed_checks.len() + r.failures.len(),
                r.worst_margin,
                secs,
                if r.passed { "PASS" } else { "FAIL" }
            );
            for c in &r.failed_checks {
                let at = c.at.as_deref().map(|a| format!(" @ {a}")).unwrap_or_default();
                s += &format!(
                    "    check {} [{}{at}]: {:.4e} vs {:?} {:.4e}\n",
                    c.name, c.model, c.value, c.relation, c.limit
                );
            }
            for f in &r.failures {
                let at = f.at.as_deref().map(|a| format!(" @ {a}")).unwrap_or_default();
                s += &format!("    error [{}{at}]: {}\n", f.model, f.error);
            }
        }
        s += &format!("overall: {}\n", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}

fn read_manifest(dir: &Path) -> Result<Option<(Manifest, Option<f64>)>> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let seconds = fs::read_to_string(dir.join(TIMING))
        .ok()
        .and_then(|t| serde_json::from_str::<BTreeMap<String, f64>>(&t).ok())
        .and_then(|t| t.get("total").copied());
    Ok(Some((m, seconds)))
}

/// Aggregates the manifest in `dir`, or those one level below it, and writes `summary.json`.
pub fn summarize(dir: &Path) -> Result<Summary> {
    if !dir.is_dir() {
        return Err(Error::Io(format!("{} is not a directory", dir.display())));
    }
    let mut found: Vec<(PathBuf, Manifest, Option<f64>)> = Vec::new();
    if let Some((m, t)) = read_manifest(dir)? {
        found.push((dir.to_path_buf(), m, t));
    } else {
        let mut subs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subs.sort();
        for sub in subs {
            if let Some((m, t)) = read_manifest(&sub)? {
                found.push((sub, m, t));
            }
        }
    }
    if found.is_empty() {
        return Err(Error::Io(format!("no {MANIFEST} in {}", dir.display())));
    }
    let runs: Vec<RunSummary> = found
        .into_iter()
        .map(|(path, m, seconds)| RunSummary {
            name: m.name.clone(),
            mode: m.mode.clone(),
            dir: path.display().to_string(),
            passed: m.passed,
            checks: m.checks.len(),
            failed_checks: m.failed_checks().cloned().collect(),
            failures: m.failures.clone(),
            excluded: m.excluded.len(),
            worst_margin: m.worst_margin(),
            seconds,
        })
        .collect();
    let summary = Summary {
        schema: SCHEMA_VERSION,
        passed: runs.iter().all(|r| r.passed),
        runs,
    };
    fs::write(dir.join(SUMMARY), to_json(&summary)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::new("a", "m", None, 1.0, Relation::Below, 2.0).pass);
        assert!(!Check::new("a", "m", None, 2.0, Relation::Below, 2.0).pass);
        assert!(Check::new("a", "m", None, 2.0, Relation::AtMost, 2.0).pass);
        assert!(Check::new("a", "m", None, 3.0, Relation::Above, 2.0).pass);
        assert_eq!(Check::new("a", "m", None, 0.0, Relation::AtMost, 0.0).margin(), 0.0);
    }

    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: Option<f64>,
        ok: bool,
    }

    #[test]
    fn csv_header_and_missing_values() {
        let rows = [Row { x: 0.5, y: None, ok: true }, Row { x: -1.0, y: Some(2.0), ok: false }];
        let out = to_csv("demo", 1, "k=v", &rows, &["x", "y", "ok"]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "# reflectionless demo v1 k=v\nx,y,ok\n0.5,,true\n-1.0,2.0,false\n");
    }
}
