//! Scenario runner for `cdcert`.
//!
//! `verify` loads a TOML scenario, runs its checks in parallel, prints a
//! report and writes one CSV file per curve with columns `t,value,bound,margin`.
//!
//! Exit codes: 0 when every asserted check passes, 1 when one fails, 2 when
//! the file cannot be read or validated, 3 when a check cannot be evaluated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub mod registry;
pub mod runner;
pub mod scenario;

pub use runner::{run_checks, CheckOutcome, Curve, Verdict};
pub use scenario::{Scenario, ScenarioError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Clone, Debug)]
pub struct Options {
    pub tolerance_scale: f64,
    pub csv_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            csv_dir: None,
            seed: None,
        }
    }
}

/// Result of one `verify` run.
#[derive(Clone, Debug)]
pub struct Run {
    pub exit_code: i32,
    pub report: String,
    pub outcomes: Vec<CheckOutcome>,
    pub csv_files: Vec<PathBuf>,
}

pub fn exit_code(outcomes: &[CheckOutcome]) -> i32 {
    if outcomes.iter().any(|o| o.result.is_err()) {
        EXIT_ABORT
    } else if outcomes.iter().any(|o| o.asserted && !o.passed()) {
        EXIT_FAILURE
    } else {
        EXIT_PASS
    }
}

/// Human-readable report. Every line about a check starts with its name and
/// anchor.
pub fn render_report(title: &str, seed: u64, outcomes: &[CheckOutcome]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario {title} (seed {seed})");
    for o in outcomes {
        let tag = format!("{} [{}]", o.info.name, o.info.anchor);
        match &o.result {
            Ok(v) => {
                let status = match (v.passed, o.asserted) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "FAIL (not asserted)",
                };
                let _ = writeln!(
                    out,
                    "{tag} {status} margin {:+.6e}: {}",
                    v.margin, v.summary
                );
                for d in &v.details {
                    let _ = writeln!(out, "{tag}   {d}");
                }
                for w in &v.witnesses {
                    let _ = writeln!(out, "{tag}   witness: {w}");
                }
            }
            Err(e) => {
                let _ = writeln!(out, "{tag} ABORT: {e}");
            }
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    let _ = writeln!(out, "{passed} of {} checks passed", outcomes.len());
    out
}

/// Writes every curve to `dir/<stem>-<index>-<check>-<label>.csv`.
pub fn write_curves(
    dir: &Path,
    stem: &str,
    outcomes: &[CheckOutcome],
) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut files = Vec::new();
    for o in outcomes {
        let Ok(v) = &o.result else { continue };
        for c in &v.curves {
            let path = dir.join(format!(
                "{stem}-{:02}-{}-{}.csv",
                o.index, o.info.name, c.label
            ));
            write_curve(&path, c).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            files.push(path);
        }
    }
    Ok(files)
}

fn write_curve(path: &Path, curve: &Curve) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["t", "value", "bound", "margin"])?;
    for row in &curve.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads, runs and reports one scenario file.
pub fn verify(path: &Path, opts: &Options) -> Run {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            return Run {
                exit_code: EXIT_PARSE,
                report: format!("error: {e}\n"),
                outcomes: Vec::new(),
                csv_files: Vec::new(),
            };
        }
    };
    let seed = opts.seed.or(scenario.seed).unwrap_or(0);
    let stem = path.file_stem().map_or_else(
        || "scenario".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let title = scenario.name.clone().unwrap_or_else(|| stem.clone());
    let outcomes = run_checks(&scenario, seed, opts.tolerance_scale);
    let mut report = render_report(&title, seed, &outcomes);
    let mut code = exit_code(&outcomes);

    let base = path.parent().unwrap_or(Path::new("."));
    let csv_dir = opts
        .csv_dir
        .clone()
        .or_else(|| scenario.output.csv_dir.as_ref().map(|d| base.join(d)));
    let mut csv_files = Vec::new();
    if let Some(dir) = csv_dir {
        match write_curves(&dir, &stem, &outcomes) {
            Ok(files) => csv_files = files,
            Err(e) => {
                let _ = writeln!(report, "error: {e}");
                code = EXIT_ABORT;
            }
        }
    }
    if let Some(r) = &scenario.output.report {
        let target = base.join(r);
        if let Err(e) = fs::write(&target, &report) {
            let _ = writeln!(report, "error: cannot write {}: {e}", target.display());
            code = EXIT_ABORT;
        }
    }
    Run {
        exit_code: code,
        report,
        outcomes,
        csv_files,
    }
}
