//! `lleval validate`: per-file conformance reports.

use std::path::{Path, PathBuf};

use lleval_core::{validate_run, Finding, IngestError};
use serde::Serialize;

use crate::runs::parse_by_extension;
use crate::{outln, CmdResult, GlobalArgs, OutputFormat};

#[derive(Debug, Serialize)]
struct FileReport {
    path: String,
    run_id: Option<String>,
    usable: bool,
    errors: Vec<Finding>,
    warnings: Vec<Finding>,
}

/// Splits an ingest error into its line (when it has one) and a message
/// that does not repeat the line prefix of the error's Display form.
fn error_parts(e: &IngestError) -> (Option<usize>, String) {
    match e {
        IngestError::Parse { line, detail } => (Some(*line), detail.clone()),
        IngestError::MissingField { line, field } => {
            (Some(*line), format!("missing required field `{field}`"))
        }
        IngestError::NonFinite { line, measure } => (
            Some(*line),
            format!("measure `{measure}` is not a finite number"),
        ),
        _ => (None, e.to_string()),
    }
}

/// Builds a report for one file. Unreadable or unparseable files still get
/// a report line so a batch check covers every input.
fn check_file(path: &Path) -> FileReport {
    let mk = |run_id, usable, errors, warnings| FileReport {
        path: path.display().to_string(),
        run_id,
        usable,
        errors,
        warnings,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let f = Finding {
                line: None,
                code: "E_IO".to_string(),
                message: e.to_string(),
            };
            return mk(None, false, vec![f], Vec::new());
        }
    };
    match parse_by_extension(path, &text) {
        Ok(records) => {
            let report = validate_run(&records, None);
            mk(
                Some(report.run_id),
                report.errors.is_empty(),
                report.errors,
                report.warnings,
            )
        }
        Err(e) => {
            let (line, message) = error_parts(&e);
            let f = Finding {
                line,
                code: e.code().to_string(),
                message,
            };
            mk(None, false, vec![f], Vec::new())
        }
    }
}

pub fn run(global: &GlobalArgs, paths: &[PathBuf]) -> CmdResult {
    let reports: Vec<FileReport> = paths.iter().map(|p| check_file(p)).collect();
    let failed = reports.iter().any(|r| !r.usable);
    match global.format {
        OutputFormat::Json => {
            let doc = serde_json::json!({ "files": reports });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Text => {
            for r in &reports {
                let status = if r.usable {
                    match r.warnings.len() {
                        0 => "ok".to_string(),
                        n => format!("ok ({n} warning{})", plural(n)),
                    }
                } else {
                    format!("{} error{}", r.errors.len(), plural(r.errors.len()))
                };
                outln!("{}: {status}", r.path);
                for f in &r.errors {
                    outln!("  {}", render(f));
                    eprintln!("{}: {}", r.path, render(f));
                }
                for f in &r.warnings {
                    outln!("  {}", render(f));
                }
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn render(f: &Finding) -> String {
    match f.line {
        Some(line) => format!("{} (line {line}): {}", f.code, f.message),
        None => format!("{}: {}", f.code, f.message),
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}
