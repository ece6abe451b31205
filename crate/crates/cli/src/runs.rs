//! Shared log loading for the validate and metrics commands: reading run
//! files, picking the measure, and assembling STE curves from a directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use lleval_core::{
    parse_csv_log, parse_log, ste_source, validate_run, ExperienceRecord, IngestError, SteSource,
    TaskId, ValidationReport,
};

use crate::Failure;

pub struct LoadedRun {
    pub path: PathBuf,
    pub records: Vec<ExperienceRecord>,
    pub report: ValidationReport,
}

impl LoadedRun {
    pub fn run_id(&self) -> &str {
        &self.report.run_id
    }
}

pub fn parse_by_extension(path: &Path, text: &str) -> Result<Vec<ExperienceRecord>, IngestError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_csv_log(text),
        _ => parse_log(text),
    }
}

/// Reads and validates one run log. Parse failures are input errors; logs
/// that parse but break lifetime rules come back with a failing report.
pub fn load_run(path: &Path) -> Result<LoadedRun, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let records = parse_by_extension(path, &text)
        .map_err(|e| Failure::input(format!("{}: {} ({e})", path.display(), e.code())))?;
    let report = validate_run(&records, None);
    Ok(LoadedRun {
        path: path.to_path_buf(),
        records,
        report,
    })
}

/// Loads every path, requires all reports clean, and returns the runs
/// sorted by run id. Duplicate run ids across files are an input error.
pub fn load_clean_runs(paths: &[PathBuf]) -> Result<Vec<LoadedRun>, Failure> {
    let mut runs = Vec::with_capacity(paths.len());
    let mut problems = Vec::new();
    for path in paths {
        let run = load_run(path)?;
        if !run.report.is_usable() {
            for e in &run.report.errors {
                problems.push(format!(
                    "{}: {}: {}",
                    path.display(),
                    e.code,
                    e.message
                ));
            }
        }
        runs.push(run);
    }
    if !problems.is_empty() {
        return Err(Failure::input(format!(
            "validation failed:\n  {}",
            problems.join("\n  ")
        )));
    }
    runs.sort_by(|a, b| a.report.run_id.cmp(&b.report.run_id));
    for pair in runs.windows(2) {
        if pair[0].report.run_id == pair[1].report.run_id {
            return Err(Failure::input(format!(
                "duplicate run id `{}` in {} and {}",
                pair[0].report.run_id,
                pair[0].path.display(),
                pair[1].path.display()
            )));
        }
    }
    Ok(runs)
}

/// Picks the measure to evaluate. An explicit request must appear in at
/// least one record; otherwise the runs must agree on a single measure.
pub fn resolve_measure(runs: &[LoadedRun], requested: Option<&str>) -> Result<String, Failure> {
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for run in runs {
        for r in &run.records {
            names.extend(r.measures.keys().map(String::as_str));
        }
    }
    match requested {
        Some(m) => {
            if names.contains(m) {
                Ok(m.to_string())
            } else {
                Err(Failure::input(format!(
                    "measure `{m}` appears in no record; logs carry: {}",
                    join(&names)
                )))
            }
        }
        None => {
            let mut it = names.iter();
            match (it.next(), it.next()) {
                (Some(only), None) => Ok((*only).to_string()),
                (None, _) => Err(Failure::input("logs carry no measures")),
                _ => Err(Failure::input(format!(
                    "logs carry several measures ({}); pick one with --measure",
                    join(&names)
                ))),
            }
        }
    }
}

fn join(names: &BTreeSet<&str>) -> String {
    names.iter().copied().collect::<Vec<_>>().join(", ")
}

/// Loads every `.jsonl` / `.csv` file in the directory as a single-task
/// expert log, keyed by task. Two files for the same task is an input error.
pub fn load_ste_dir(dir: &Path) -> Result<BTreeMap<TaskId, SteSource>, Failure> {
    let mut sources = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("jsonl" | "json" | "csv")
            )
        })
        .collect();
    entries.sort();
    for path in entries {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let records = parse_by_extension(&path, &text)
            .map_err(|e| Failure::input(format!("{}: {} ({e})", path.display(), e.code())))?;
        let source = ste_source(&records)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let task = source.task.clone();
        if sources.insert(task.clone(), source).is_some() {
            return Err(Failure::input(format!(
                "{}: a second STE log for task {task}; keep one file per task",
                path.display()
            )));
        }
    }
    if sources.is_empty() {
        return Err(Failure::input(format!(
            "{}: no .jsonl or .csv STE logs found",
            dir.display()
        )));
    }
    Ok(sources)
}
