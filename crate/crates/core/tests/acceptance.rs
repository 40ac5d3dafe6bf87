//! Acceptance matrix: every config under `configs/criterion_*.toml` run through the harness,
//! one status line per criterion. Runs sequentially so the timings are meaningful.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use reflectionless::cli_harness::{run, summarize, write_outcome, ExperimentConfig, RunOptions, RunOutcome};

mod common;
use common::plane_wave_r;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn budget(id: usize) -> Option<Duration> {
    let secs = match id {
        1 | 2 => 10,
        3 | 4 | 7 => 300,
        5 | 6 => 60,
        9 => 120,
        _ => return None,
    };
    Some(Duration::from_secs(secs))
}

/// Scan rows of the defect models against the plane-wave oracle; returns the worst deviation.
fn defect_oracle(out: &RunOutcome) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (name, c) in [("defect_c0_5", 0.5), ("defect_c1", 1.0), ("defect_c2", 2.0)] {
        let csv = out.file(&format!("scan/{name}.csv")).ok_or(format!("missing scan/{name}.csv"))?;
        let mut rows = 0;
        for line in csv.lines().skip(2) {
            let f: Vec<&str> = line.split(',').collect();
            let lambda: f64 = f[0].parse().map_err(|e| format!("{name}: {e}"))?;
            let r: f64 = f[1].parse().map_err(|e| format!("{name} @ {lambda}: {e}"))?;
            let want = plane_wave_r(|_| 1.0, |n| if n == 0 { c } else { 0.0 }, 0, lambda);
            worst = worst.max((r - want).abs());
            rows += 1;
        }
        if rows != 3 {
            return Err(format!("{name}: {rows} rows"));
        }
    }
    if worst < 1e-6 {
        Ok(worst)
    } else {
        Err(format!("oracle deviation {worst:.3e}"))
    }
}

#[test]
fn acceptance_matrix() {
    let root = std::env::temp_dir().join(format!("reflectionless-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&root);
    let mut lines = Vec::new();
    let mut all = true;
    for id in 1..=9 {
        let path = configs().join(format!("criterion_{id}.toml"));
        let cfg = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        let start = Instant::now();
        let out = run(&cfg, &RunOptions::default());
        let took = start.elapsed();
        let (mut ok, mut detail) = match &out {
            Ok(o) => {
                write_outcome(o, &root.join(format!("criterion_{id}"))).unwrap();
                let m = &o.manifest;
                let failed: Vec<String> = m
                    .failed_checks()
                    .map(|c| format!("{}[{}]={:.3e}", c.name, c.model, c.value))
                    .chain(m.failures.iter().map(|f| format!("error[{}]: {}", f.model, f.error)))
                    .collect();
                let detail = if failed.is_empty() {
                    format!("{} checks", m.checks.len())
                } else {
                    failed.join("; ")
                };
                (m.passed, detail)
            }
            Err(e) => (false, format!("run error: {e:#}")),
        };
        if id == 2 {
            if let Ok(o) = &out {
                match defect_oracle(o) {
                    Ok(w) => detail.push_str(&format!(", oracle max dev {w:.1e}")),
                    Err(e) => {
                        ok = false;
                        detail.push_str(&format!(", {e}"));
                    }
                }
            }
        }
        let limit = budget(id);
        if limit.is_some_and(|b| took > b) {
            ok = false;
            detail.push_str(", over budget");
        }
        let limit = limit.map(|b| format!("{}s", b.as_secs())).unwrap_or_else(|| "-".into());
        let line = format!(
            "criterion {id}: {} ({:.1}s, budget {limit}) {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        println!("{line}");
        lines.push(line);
        all &= ok;
    }
    let summary = summarize(&root).unwrap();
    assert_eq!(summary.runs.len(), 9);
    let _ = fs::remove_dir_all(&root);
    assert!(all, "acceptance failures:\n{}", lines.join("\n"));
}
