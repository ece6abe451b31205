//! `lleval metrics`: per-run metric computation.
//!
//! Every input log must validate cleanly. Runs are processed in parallel
//! and reported sorted by run id so output is stable regardless of thread
//! scheduling. A run that yields no defined aggregate for a metric gets a
//! `not_computed` entry with the reason; the command exits 2 only when no
//! metric of any run could be computed.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;

use lleval_core::{
    assemble_lifetime, backward_transfer_scoped, evaluate_thresholds, forward_transfer_scoped,
    performance_maintenance, performance_recovery, preprocess, relative_performance,
    sample_efficiency, Finding, MetricName, MetricResult, MetricsError, SteSource, TaskId,
    ThresholdVerdict, TransferMode,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config;
use crate::runs::{load_clean_runs, load_ste_dir, resolve_measure, LoadedRun};
use crate::{outln, CmdResult, Failure, GlobalArgs, OutputFormat};

pub struct Options {
    pub paths: Vec<PathBuf>,
    pub measure: Option<String>,
    pub mode: TransferMode,
    pub ste_dir: Option<PathBuf>,
    pub window: Option<usize>,
    pub ft_first_pair_only: bool,
    pub bt_every_block: bool,
    pub pr: bool,
    pub pr_tolerance: f64,
    pub export_curves: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct NotComputed {
    metric: MetricName,
    reason: String,
}

#[derive(Debug, Serialize)]
struct RunOutput {
    run_id: String,
    measure: String,
    metrics: Vec<MetricResult>,
    verdicts: Vec<ThresholdVerdict>,
    not_computed: Vec<NotComputed>,
    warnings: Vec<Finding>,
}

pub fn run(global: &GlobalArgs, opts: Options) -> CmdResult {
    let cfg = config::load(global.config.as_deref())?;
    let mut pre = cfg.preprocess.unwrap_or_default();
    if let Some(w) = opts.window {
        if w == 0 || w % 2 == 0 {
            return Err(Failure::input(format!(
                "--window must be odd and at least 1, got {w}"
            )));
        }
        pre.smoothing_window = w;
    }
    if !(opts.pr_tolerance.is_finite() && (0.0..1.0).contains(&opts.pr_tolerance)) {
        return Err(Failure::input(
            "--pr-tolerance must lie in [0, 1)".to_string(),
        ));
    }

    let runs = load_clean_runs(&opts.paths)?;
    let measure = resolve_measure(&runs, opts.measure.as_deref())?;
    let ste_sources = match &opts.ste_dir {
        Some(dir) => load_ste_dir(dir)?,
        None => BTreeMap::new(),
    };

    if let Some(dir) = &opts.export_curves {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }

    let outputs: Vec<Result<RunOutput, Failure>> = runs
        .par_iter()
        .map(|run| process_run(run, &measure, &pre, &ste_sources, &opts))
        .collect();
    let mut results = Vec::with_capacity(outputs.len());
    for out in outputs {
        results.push(out?);
    }

    let any_computed = results
        .iter()
        .any(|r| r.metrics.iter().any(|m| m.aggregate.is_some()));

    match global.format {
        OutputFormat::Json => {
            let doc = serde_json::json!({ "runs": results });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Text => {
            for r in &results {
                render_text(r);
            }
        }
    }

    if any_computed {
        Ok(0)
    } else {
        Err(Failure::empty(
            "no metric could be computed for any run".to_string(),
        ))
    }
}

fn process_run(
    run: &LoadedRun,
    measure: &str,
    pre: &lleval_core::PreprocessConfig,
    ste_sources: &BTreeMap<TaskId, SteSource>,
    opts: &Options,
) -> Result<RunOutput, Failure> {
    let context = |e: &dyn std::fmt::Display| format!("{}: {e}", run.path.display());
    let lifetime =
        assemble_lifetime(&run.records).map_err(|e| Failure::input(context(&e)))?;
    let processed = preprocess(&lifetime, measure, pre, ste_sources)
        .map_err(|e| Failure::input(context(&e)))?;
    let s = &processed.summaries;

    let mut metrics = Vec::new();
    let mut not_computed = Vec::new();

    metrics.push(performance_maintenance(s));
    metrics.push(forward_transfer_scoped(s, opts.mode, opts.ft_first_pair_only));
    metrics.push(backward_transfer_scoped(s, opts.mode, opts.bt_every_block));

    if opts.ste_dir.is_some() {
        metrics.push(relative_performance(s, &processed.ste));
        let se = sample_efficiency(s, &processed.ste, pre.smoothing_window)
            .map_err(|e| Failure::input(context(&e)))?;
        metrics.push(se);
    } else {
        let reason = "no STE logs provided (pass --ste-dir)".to_string();
        not_computed.push(NotComputed {
            metric: MetricName::RP,
            reason: reason.clone(),
        });
        not_computed.push(NotComputed {
            metric: MetricName::SE,
            reason,
        });
    }

    if opts.pr {
        match performance_recovery(s, opts.pr_tolerance) {
            Ok(r) => metrics.push(r),
            Err(e @ MetricsError::InsufficientEvents { .. }) => {
                not_computed.push(NotComputed {
                    metric: MetricName::PR,
                    reason: format!("{}: {e}", e.code()),
                });
            }
            Err(e) => return Err(Failure::input(context(&e))),
        }
    }

    for m in &metrics {
        if m.aggregate.is_none() {
            not_computed.push(NotComputed {
                metric: m.metric,
                reason: skip_summary(m),
            });
        }
    }
    not_computed.sort_by_key(|n| n.metric);

    let verdicts = evaluate_thresholds(&metrics);

    if let Some(dir) = &opts.export_curves {
        export_curves(dir, run.run_id(), s, &processed.ste)?;
    }

    Ok(RunOutput {
        run_id: run.run_id().to_string(),
        measure: measure.to_string(),
        metrics,
        verdicts,
        not_computed,
        warnings: processed.warnings,
    })
}

/// One human-readable reason for an absent aggregate, built from the
/// per-unit skip records.
fn skip_summary(m: &MetricResult) -> String {
    let mut reasons: Vec<&str> = m.skipped.iter().map(|s| s.reason.as_str()).collect();
    reasons.dedup();
    if reasons.is_empty() {
        "no qualifying units".to_string()
    } else {
        reasons.join("; ")
    }
}

fn label(m: &MetricResult) -> String {
    match m.mode {
        Some(mode) => format!("{} ({mode})", m.metric),
        None => m.metric.to_string(),
    }
}

fn render_text(r: &RunOutput) {
    outln!("run {} [measure: {}]", r.run_id, r.measure);
    for m in &r.metrics {
        match m.aggregate {
            Some(v) => outln!("  {:<16} {v:.6}  (units: {})", label(m), m.per_unit.len()),
            None => outln!("  {:<16} -", label(m)),
        }
    }
    for n in &r.not_computed {
        outln!("  not computed: {}: {}", n.metric, n.reason);
    }
    for v in &r.verdicts {
        let mark = if v.demonstrates_ll { "yes" } else { "no" };
        outln!(
            "  threshold {:<10} {} (vs {})",
            format!("{}:", v.metric),
            mark,
            v.threshold
        );
    }
    for w in &r.warnings {
        outln!("  {}: {}", w.code, w.message);
    }
}

/// Writes `<run_id>.csv` with the processed curves: the smoothed per-block
/// learning series in block order, and any stitched STE curves.
fn export_curves(
    dir: &std::path::Path,
    run_id: &str,
    s: &lleval_core::BlockSummaries,
    ste: &BTreeMap<TaskId, lleval_core::STECurve>,
) -> Result<(), Failure> {
    let safe: String = run_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let path = dir.join(format!("{safe}.csv"));
    let file = std::fs::File::create(&path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["task", "kind", "block_num", "index", "value"])
        .map_err(|e| Failure::input(e.to_string()))?;
    let mut per_task_index: BTreeMap<&TaskId, usize> = BTreeMap::new();
    for (n, block) in &s.learn {
        let counter = per_task_index.entry(&block.task).or_insert(0);
        for v in &block.series {
            *counter += 1;
            w.write_record([
                block.task.to_string(),
                "ll".to_string(),
                n.to_string(),
                counter.to_string(),
                format!("{v}"),
            ])
            .map_err(|e| Failure::input(e.to_string()))?;
        }
    }
    for (task, curve) in ste {
        for (i, v) in curve.series.iter().enumerate() {
            w.write_record([
                task.to_string(),
                "ste".to_string(),
                String::new(),
                (i + 1).to_string(),
                format!("{v}"),
            ])
            .map_err(|e| Failure::input(e.to_string()))?;
        }
    }
    w.into_inner()
        .map_err(|e| Failure::input(e.to_string()))?
        .flush()?;
    Ok(())
}
