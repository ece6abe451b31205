//! `lleval aggregate`: cross-run statistics over metrics JSON files.
//!
//! Inputs are the JSON documents `lleval metrics --format json` writes; the
//! command pools every run entry, summarizes each (metric, mode) across
//! runs, tests aggregates against the demonstrates-LL thresholds, and
//! reports rank correlations between metrics over run-aligned values. PR is
//! carried in the summary table but kept out of threshold testing while the
//! metric stays experimental.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lleval_core::{
    aggregate_runs, binarized_threshold_test, one_tailed_t_test, spearman_correlation,
    threshold_spec, MetricName, MetricResult, TransferMode,
};
use serde::{Deserialize, Serialize};

use crate::{out, outln, CmdResult, Failure, GlobalArgs, OutputFormat, TestArg};

#[derive(Debug, Deserialize)]
struct MetricsDoc {
    runs: Vec<RunEntry>,
}

#[derive(Debug, Deserialize)]
struct RunEntry {
    run_id: String,
    #[serde(default)]
    metrics: Vec<MetricResult>,
}

#[derive(Debug, Serialize)]
struct TestOut {
    metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<TransferMode>,
    threshold: f64,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    df: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    successes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    significant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

#[derive(Debug, Serialize)]
struct CorrelationOut {
    a_metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_mode: Option<TransferMode>,
    b_metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_mode: Option<TransferMode>,
    n: usize,
    rho: f64,
    p: f64,
}

pub fn run(global: &GlobalArgs, paths: &[PathBuf], test: TestArg, alpha: f64) -> CmdResult {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::input("--alpha must lie strictly between 0 and 1"));
    }

    let mut entries: Vec<RunEntry> = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let doc: MetricsDoc = serde_json::from_str(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        entries.extend(doc.runs);
    }
    entries.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    for pair in entries.windows(2) {
        if pair[0].run_id == pair[1].run_id {
            return Err(Failure::input(format!(
                "run id `{}` appears twice in the input",
                pair[0].run_id
            )));
        }
    }
    if entries.is_empty() {
        return Err(Failure::empty("input contains no runs"));
    }

    let per_run: Vec<Vec<MetricResult>> = entries.iter().map(|e| e.metrics.clone()).collect();
    let table = aggregate_runs(&per_run);
    if table.rows.iter().all(|r| r.n == 0) {
        return Err(Failure::empty("no run produced a defined metric aggregate"));
    }

    let mut tests = Vec::new();
    for row in &table.rows {
        if row.metric == MetricName::PR {
            continue;
        }
        let (threshold, _) = threshold_spec(row.metric, row.mode);
        let mut out = TestOut {
            metric: row.metric,
            mode: row.mode,
            threshold,
            n: row.n,
            t: None,
            df: None,
            successes: None,
            p: None,
            significant: None,
            skipped: None,
        };
        if row.values.is_empty() {
            out.skipped = Some("no runs produced this metric".to_string());
        } else {
            match test {
                TestArg::T => match one_tailed_t_test(&row.values, threshold) {
                    Ok(tt) => {
                        out.t = Some(tt.t);
                        out.df = Some(tt.df);
                        out.p = Some(tt.p);
                        out.significant = Some(tt.p < alpha);
                    }
                    Err(e) => out.skipped = Some(e.to_string()),
                },
                TestArg::Binomial => {
                    let bt = binarized_threshold_test(&row.values, threshold, alpha);
                    out.successes = Some(bt.successes);
                    out.p = Some(bt.p);
                    out.significant = Some(bt.significant);
                }
            }
        }
        tests.push(out);
    }

    let (correlations, corr_notes) = correlations(&entries);

    match global.format {
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "num_runs": entries.len(),
                "test": match test { TestArg::T => "t", TestArg::Binomial => "binomial" },
                "alpha": alpha,
                "table": table,
                "threshold_tests": tests,
                "correlations": correlations,
                "correlation_notes": corr_notes,
            });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Text => {
            outln!("aggregate over {} run(s)", entries.len());
            out!("{}", table.render_text());
            let kind = match test {
                TestArg::T => "t",
                TestArg::Binomial => "binomial",
            };
            outln!("threshold tests ({kind}, alpha = {alpha})");
            for t in &tests {
                let name = label(t.metric, t.mode);
                match (&t.skipped, t.p) {
                    (Some(reason), _) => outln!("  {name:<14} skipped: {reason}"),
                    (None, Some(p)) => {
                        let mark = if t.significant == Some(true) {
                            "significant"
                        } else {
                            "not significant"
                        };
                        match t.t {
                            Some(stat) => outln!(
                                "  {name:<14} vs {}: t = {stat:.4}, df = {}, p = {p:.6} ({mark})",
                                t.threshold,
                                t.df.unwrap_or(0)
                            ),
                            None => outln!(
                                "  {name:<14} vs {}: {} of {} above, p = {p:.6} ({mark})",
                                t.threshold,
                                t.successes.unwrap_or(0),
                                t.n
                            ),
                        }
                    }
                    _ => {}
                }
            }
            if table.rows.iter().any(|r| r.metric == MetricName::PR) {
                outln!("note: PR is experimental and excluded from threshold tests");
            }
            if !correlations.is_empty() {
                outln!("rank correlations (run-aligned)");
                for c in &correlations {
                    outln!(
                        "  {} vs {}: rho = {:.4}, p = {:.4}, n = {}",
                        label(c.a_metric, c.a_mode),
                        label(c.b_metric, c.b_mode),
                        c.rho,
                        c.p,
                        c.n
                    );
                }
            }
            for note in &corr_notes {
                outln!("  {note}");
            }
        }
    }
    Ok(0)
}

fn label(metric: MetricName, mode: Option<TransferMode>) -> String {
    match mode {
        Some(m) => format!("{metric} ({m})"),
        None => metric.to_string(),
    }
}

/// Pairwise Spearman over run-aligned aggregates. Only runs where both
/// metrics are defined contribute, and a pair needs at least three.
fn correlations(entries: &[RunEntry]) -> (Vec<CorrelationOut>, Vec<String>) {
    type Key = (MetricName, Option<TransferMode>);
    let mut by_key: BTreeMap<Key, BTreeMap<&str, f64>> = BTreeMap::new();
    for e in entries {
        for m in &e.metrics {
            if let Some(v) = m.aggregate {
                by_key
                    .entry((m.metric, m.mode))
                    .or_default()
                    .insert(e.run_id.as_str(), v);
            }
        }
    }
    let keys: Vec<Key> = by_key.keys().copied().collect();
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for i in 0..keys.len() {
        for j in (i + 1)..keys.len() {
            let a = &by_key[&keys[i]];
            let b = &by_key[&keys[j]];
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (run, v) in a {
                if let Some(w) = b.get(run) {
                    xs.push(*v);
                    ys.push(*w);
                }
            }
            if xs.len() < 3 {
                continue;
            }
            match spearman_correlation(&xs, &ys) {
                Ok(sp) => out.push(CorrelationOut {
                    a_metric: keys[i].0,
                    a_mode: keys[i].1,
                    b_metric: keys[j].0,
                    b_mode: keys[j].1,
                    n: xs.len(),
                    rho: sp.rho,
                    p: sp.p,
                }),
                Err(e) => notes.push(format!(
                    "{} vs {}: {e}",
                    label(keys[i].0, keys[i].1),
                    label(keys[j].0, keys[j].1)
                )),
            }
        }
    }
    (out, notes)
}
