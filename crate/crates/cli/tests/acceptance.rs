//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;

use wpreach_cli::{verify_all, ExperimentConfig};

fn verify_twice(dir: &Path) -> Result<bool, String> {
    let bin = env!("CARGO_BIN_EXE_wpreach");
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        Command::new(bin)
            .args(["verify-all", "--seed", "2026", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        reports.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    Ok(reports[0] == reports[1])
}

fn main() {
    let cfg = ExperimentConfig::default();
    let report = verify_all(&cfg);
    let mut all = true;
    for v in &report.criteria {
        all &= v.passed;
        let detail: Vec<String> = v
            .checks
            .iter()
            .map(|c| format!("{}={:.4e}{}", c.name, c.value, if c.passed { "" } else { " (FAIL)" }))
            .collect();
        let limit = v.runtime_limit_s.map(|l| format!(" limit {l} s")).unwrap_or_default();
        println!(
            "criterion {:>2} {:<34} {} [{:.2} s{limit}] {}{}",
            v.id,
            v.name,
            if v.passed { "PASS" } else { "FAIL" },
            v.elapsed_s,
            detail.join(" "),
            v.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
        );
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let det = verify_twice(dir.path());
    let det_ok = matches!(det, Ok(true));
    all &= det_ok;
    println!(
        "criterion 12 {:<34} {} {}",
        "determinism",
        if det_ok { "PASS" } else { "FAIL" },
        match det {
            Ok(true) => "reports byte-identical".to_string(),
            Ok(false) => "reports differ".to_string(),
            Err(e) => format!("error: {e}"),
        }
    );

    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
