//! The lifelong-learning metrics: performance maintenance (PM), forward and
//! backward transfer (FT/BT), performance relative to a single-task expert
//! (RP), sample efficiency (SE), and the experimental performance recovery
//! slope (PR), plus the threshold verdicts that turn metric values into
//! demonstrates-LL booleans.
//!
//! All metrics read from a [`BlockSummaries`] (and STE curves where needed)
//! and report one value per unit (a task, or a task pair for the transfer
//! metrics), with the aggregate being the plain mean over units. Units whose
//! required data is missing are listed in `skipped` with a reason instead of
//! poisoning the aggregate; an empty unit list yields an absent aggregate,
//! never 0 or NaN.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{STECurve, TaskId};
use crate::preprocess::{smooth_series, BlockSummaries, PreprocessError};

pub mod codes {
    pub const E_ZERO_DENOM: &str = "E_ZERO_DENOM";
    pub const E_DEGENERATE: &str = "E_DEGENERATE";
    pub const E_NO_STE: &str = "E_NO_STE";
    pub const E_STE_SHORT: &str = "E_STE_SHORT";
    pub const E_INSUFFICIENT_EVENTS: &str = "E_INSUFFICIENT_EVENTS";
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("zero denominator in ratio")]
    ZeroDenominator,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("only {found} uncensored recovery event(s); at least 2 required")]
    InsufficientEvents { found: usize },
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::ZeroDenominator => codes::E_ZERO_DENOM,
            MetricsError::Degenerate(_) => codes::E_DEGENERATE,
            MetricsError::InsufficientEvents { .. } => codes::E_INSUFFICIENT_EVENTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricName {
    PM,
    FT,
    BT,
    RP,
    SE,
    PR,
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricName::PM => "PM",
            MetricName::FT => "FT",
            MetricName::BT => "BT",
            MetricName::RP => "RP",
            MetricName::SE => "SE",
            MetricName::PR => "PR",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    Ratio,
    Contrast,
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferMode::Ratio => write!(f, "ratio"),
            TransferMode::Contrast => write!(f, "contrast"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitValue {
    pub unit: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub unit: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<TransferMode>,
    pub per_unit: Vec<UnitValue>,
    pub aggregate: Option<f64>,
    pub skipped: Vec<SkippedUnit>,
}

impl MetricResult {
    fn new(
        metric: MetricName,
        mode: Option<TransferMode>,
        per_unit: Vec<UnitValue>,
        skipped: Vec<SkippedUnit>,
    ) -> Self {
        let aggregate = if per_unit.is_empty() {
            None
        } else {
            Some(mean(per_unit.iter().map(|u| u.value)))
        };
        Self {
            metric,
            mode,
            per_unit,
            aggregate,
            skipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Greater,
    GreaterOrEqual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<TransferMode>,
    pub threshold: f64,
    pub demonstrates_ll: bool,
    pub direction: Direction,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    sum / count as f64
}

/// Contrast(a, b) = (a - b)/(a + b), the zero-safe transfer comparison;
/// lands in [-1, 1] for non-negative operands.
pub fn contrast(a: f64, b: f64) -> Result<f64, MetricsError> {
    if a + b == 0.0 {
        return Err(MetricsError::Degenerate(format!(
            "contrast undefined for a + b = 0 (a = {a}, b = {b})"
        )));
    }
    Ok((a - b) / (a + b))
}

/// Ratio(a, b) = a/b.
pub fn ratio(a: f64, b: f64) -> Result<f64, MetricsError> {
    if b == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok(a / b)
}

fn mode_value(mode: TransferMode, after: f64, before: f64) -> Result<f64, MetricsError> {
    match mode {
        TransferMode::Ratio => ratio(after, before),
        TransferMode::Contrast => contrast(after, before),
    }
}

/// Every task the summaries know about: learned tasks plus tasks that only
/// ever appear in evaluation blocks.
fn all_tasks(summaries: &BlockSummaries) -> BTreeSet<&TaskId> {
    summaries
        .lb_tasks
        .iter()
        .chain(summaries.eval.values().flat_map(|m| m.keys()))
        .collect()
}

/// Forward transfer: walking learning blocks in order, the first block of
/// each task compares every not-yet-learned task's evaluation just after the
/// block against just before it (jumpstart). One value per ordered pair
/// (trained task -> unlearned task).
pub fn forward_transfer(summaries: &BlockSummaries, mode: TransferMode) -> MetricResult {
    forward_transfer_scoped(summaries, mode, false)
}

/// As [`forward_transfer`]; with `first_pair_only` the result is restricted
/// to the single pair (first task in the curriculum -> second distinct task),
/// the narrower reading some write-ups use.
pub fn forward_transfer_scoped(
    summaries: &BlockSummaries,
    mode: TransferMode,
    first_pair_only: bool,
) -> MetricResult {
    let tasks = all_tasks(summaries);
    let mut learned: BTreeSet<&TaskId> = BTreeSet::new();
    let mut seen: BTreeSet<(&TaskId, &TaskId)> = BTreeSet::new();
    let mut per_unit = Vec::new();
    let mut skipped = Vec::new();

    let restrict_to: Option<(&TaskId, &TaskId)> = if first_pair_only {
        let first = summaries.lb_tasks.first();
        let second = summaries
            .lb_tasks
            .iter()
            .find(|t| Some(*t) != first);
        match (first, second) {
            (Some(a), Some(b)) => Some((a, b)),
            // Fewer than two distinct tasks: nothing qualifies.
            _ => return MetricResult::new(MetricName::FT, Some(mode), per_unit, skipped),
        }
    } else {
        None
    };

    for (idx, tn) in summaries.lb_tasks.iter().enumerate() {
        let n = idx as u32 + 1;
        if learned.contains(tn) {
            continue;
        }
        learned.insert(tn);
        for t in &tasks {
            if learned.contains(*t) || !seen.insert((tn, t)) {
                continue;
            }
            if let Some((a, b)) = restrict_to {
                if tn != a || *t != b {
                    continue;
                }
            }
            let unit = format!("{tn}->{t}");
            match (summaries.eval_value(n, t), summaries.eval_value(n - 1, t)) {
                (Some(after), Some(before)) => match mode_value(mode, after, before) {
                    Ok(v) => per_unit.push(UnitValue { unit, value: v }),
                    Err(e) => skipped.push(SkippedUnit {
                        unit,
                        reason: format!("{}: {e}", e.code()),
                    }),
                },
                (after, before) => {
                    let mut missing = Vec::new();
                    if after.is_none() {
                        missing.push(format!("P_E({n},{t})"));
                    }
                    if before.is_none() {
                        missing.push(format!("P_E({},{t})", n - 1));
                    }
                    skipped.push(SkippedUnit {
                        unit,
                        reason: format!("missing eval entries: {}", missing.join(", ")),
                    });
                }
            }
        }
    }
    MetricResult::new(MetricName::FT, Some(mode), per_unit, skipped)
}

/// Backward transfer: from the second learning block on, each block compares
/// every previously learned task's evaluation after the block against before
/// it. By default each unordered task pair contributes once, at its first
/// qualifying block (whether or not its data turns out to be present).
pub fn backward_transfer(summaries: &BlockSummaries, mode: TransferMode) -> MetricResult {
    backward_transfer_scoped(summaries, mode, false)
}

/// As [`backward_transfer`]; with `every_block` a value is emitted at every
/// qualifying evaluation block instead of once per pair, with units labeled
/// `src->tgt@nK`.
pub fn backward_transfer_scoped(
    summaries: &BlockSummaries,
    mode: TransferMode,
    every_block: bool,
) -> MetricResult {
    let tasks = all_tasks(summaries);
    let mut per_unit = Vec::new();
    let mut skipped = Vec::new();
    let mut learned: BTreeSet<&TaskId> = BTreeSet::new();
    let mut seen: BTreeSet<(&TaskId, &TaskId)> = BTreeSet::new();

    // The first block's task counts as learned before the loop begins, so
    // pairs against it qualify from n = 2 onward.
    if let Some(first) = summaries.lb_tasks.first() {
        learned.insert(first);
    }

    for (idx, tn) in summaries.lb_tasks.iter().enumerate().skip(1) {
        let n = idx as u32 + 1;
        learned.insert(tn);
        for t in &tasks {
            if *t == tn || !learned.contains(*t) {
                continue;
            }
            if !every_block {
                let key = if *t < tn { (*t, tn) } else { (tn, *t) };
                if !seen.insert(key) {
                    continue;
                }
            }
            let unit = if every_block {
                format!("{tn}->{t}@n{n}")
            } else {
                format!("{tn}->{t}")
            };
            match (summaries.eval_value(n, t), summaries.eval_value(n - 1, t)) {
                (Some(after), Some(before)) => match mode_value(mode, after, before) {
                    Ok(v) => per_unit.push(UnitValue { unit, value: v }),
                    Err(e) => skipped.push(SkippedUnit {
                        unit,
                        reason: format!("{}: {e}", e.code()),
                    }),
                },
                _ => skipped.push(SkippedUnit {
                    unit,
                    reason: format!("missing eval entry at n={n} or n={}", n - 1),
                }),
            }
        }
    }
    MetricResult::new(MetricName::BT, Some(mode), per_unit, skipped)
}

/// Performance maintenance: at every learning block, each other already
/// learned task contributes the difference between its current evaluation
/// and its evaluation right after its own most recent learning block. Units
/// are tasks; a task's value is the mean of its maintenance values.
pub fn performance_maintenance(summaries: &BlockSummaries) -> MetricResult {
    let tasks = all_tasks(summaries);
    let mut mrb: BTreeMap<&TaskId, u32> = BTreeMap::new();
    let mut values: BTreeMap<&TaskId, Vec<f64>> = BTreeMap::new();
    let mut skipped = Vec::new();

    for (idx, tn) in summaries.lb_tasks.iter().enumerate() {
        let n = idx as u32 + 1;
        mrb.insert(tn, n);
        for t in &tasks {
            if *t == tn {
                continue;
            }
            let Some(&reference) = mrb.get(*t) else {
                continue;
            };
            match (
                summaries.eval_value(n, t),
                summaries.eval_value(reference, t),
            ) {
                (Some(current), Some(baseline)) => {
                    values.entry(t).or_default().push(current - baseline);
                }
                _ => skipped.push(SkippedUnit {
                    unit: t.to_string(),
                    reason: format!("missing eval entry at n={n} or n={reference}"),
                }),
            }
        }
    }

    let per_unit = values
        .into_iter()
        .map(|(t, vs)| UnitValue {
            unit: t.to_string(),
            value: mean(vs.into_iter()),
        })
        .collect();
    MetricResult::new(MetricName::PM, None, per_unit, skipped)
}

/// Learning series of each task concatenated across its learning blocks, in
/// block order.
fn stitched_ll(summaries: &BlockSummaries) -> BTreeMap<&TaskId, Vec<f64>> {
    let mut out: BTreeMap<&TaskId, Vec<f64>> = BTreeMap::new();
    for lb in summaries.learn.values() {
        out.entry(&lb.task).or_default().extend(&lb.series);
    }
    out
}

fn ste_slice<'a>(
    ste: &'a BTreeMap<TaskId, STECurve>,
    task: &TaskId,
    needed: usize,
) -> Result<&'a [f64], SkippedUnit> {
    let Some(curve) = ste.get(task) else {
        return Err(SkippedUnit {
            unit: task.to_string(),
            reason: format!("{}: no STE curve for task", codes::E_NO_STE),
        });
    };
    if curve.series.len() < needed {
        return Err(SkippedUnit {
            unit: task.to_string(),
            reason: format!(
                "{}: STE curve has {} experiences, lifetime has {needed}",
                codes::E_STE_SHORT,
                curve.series.len()
            ),
        });
    }
    Ok(&curve.series[..needed])
}

/// Relative performance: per task, the sum of all lifetime learning values
/// over the sum of the same number of STE learning values. Excess STE
/// experiences are truncated; a short or missing STE curve skips the task.
pub fn relative_performance(
    summaries: &BlockSummaries,
    ste: &BTreeMap<TaskId, STECurve>,
) -> MetricResult {
    let mut per_unit = Vec::new();
    let mut skipped = Vec::new();
    for (task, ll) in stitched_ll(summaries) {
        let ste_vals = match ste_slice(ste, task, ll.len()) {
            Ok(s) => s,
            Err(skip) => {
                skipped.push(skip);
                continue;
            }
        };
        let num: f64 = ll.iter().sum();
        let den: f64 = ste_vals.iter().sum();
        if den == 0.0 {
            skipped.push(SkippedUnit {
                unit: task.to_string(),
                reason: format!("{}: STE values sum to zero", codes::E_ZERO_DENOM),
            });
            continue;
        }
        per_unit.push(UnitValue {
            unit: task.to_string(),
            value: num / den,
        });
    }
    MetricResult::new(MetricName::RP, None, per_unit, skipped)
}

/// Sample efficiency: per task, smooth the stitched lifetime curve and the
/// (truncated) STE curve, find each one's saturation value (max) and
/// saturation experience (1-based index of the first max), and combine
/// (SatVal_LL/SatVal_STE) * (SatExp_STE/SatExp_LL).
pub fn sample_efficiency(
    summaries: &BlockSummaries,
    ste: &BTreeMap<TaskId, STECurve>,
    window: usize,
) -> Result<MetricResult, PreprocessError> {
    let mut per_unit = Vec::new();
    let mut skipped = Vec::new();
    for (task, ll) in stitched_ll(summaries) {
        let ste_vals = match ste_slice(ste, task, ll.len()) {
            Ok(s) => s,
            Err(skip) => {
                skipped.push(skip);
                continue;
            }
        };
        let ll_smooth = smooth_series(&ll, window)?;
        let ste_smooth = smooth_series(ste_vals, window)?;
        let (ll_val, ll_exp) = saturation(&ll_smooth);
        let (ste_val, ste_exp) = saturation(&ste_smooth);
        if ste_val == 0.0 {
            skipped.push(SkippedUnit {
                unit: task.to_string(),
                reason: format!("{}: STE saturation value is zero", codes::E_ZERO_DENOM),
            });
            continue;
        }
        per_unit.push(UnitValue {
            unit: task.to_string(),
            value: (ll_val / ste_val) * (ste_exp as f64 / ll_exp as f64),
        });
    }
    Ok(MetricResult::new(MetricName::SE, None, per_unit, skipped))
}

/// Max value and 1-based index of its first occurrence.
fn saturation(series: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, &v) in series.iter().enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    (best, at + 1)
}

/// Performance recovery (experimental): detects performance drops at repeat
/// learning blocks of a task and fits a least-squares line to the recovery
/// times; a negative slope (recoveries speeding up) suggests the system is
/// retaining something. Events that never re-attain the prior level within
/// the block are censored: flagged and excluded from the fit.
pub fn performance_recovery(
    summaries: &BlockSummaries,
    tolerance: f64,
) -> Result<MetricResult, MetricsError> {
    let mut per_task_events: BTreeMap<&TaskId, Vec<f64>> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut uncensored_total = 0usize;

    let mut blocks_by_task: BTreeMap<&TaskId, Vec<&[f64]>> = BTreeMap::new();
    for lb in summaries.learn.values() {
        blocks_by_task.entry(&lb.task).or_default().push(&lb.series);
    }

    for (task, blocks) in &blocks_by_task {
        for k in 1..blocks.len() {
            let prev_final = *blocks[k - 1].last().expect("learn series are non-empty");
            let current = blocks[k];
            if current[0] >= (1.0 - tolerance) * prev_final {
                continue;
            }
            match current.iter().position(|&v| v >= prev_final) {
                Some(i) => {
                    per_task_events.entry(task).or_default().push((i + 1) as f64);
                    uncensored_total += 1;
                }
                None => skipped.push(SkippedUnit {
                    unit: task.to_string(),
                    reason: format!(
                        "censored: repeat block {k} never re-attained {prev_final:.6} within {} experiences",
                        current.len()
                    ),
                }),
            }
        }
    }

    if uncensored_total < 2 {
        return Err(MetricsError::InsufficientEvents {
            found: uncensored_total,
        });
    }

    let mut per_unit = Vec::new();
    for (task, times) in &per_task_events {
        if times.len() < 2 {
            skipped.push(SkippedUnit {
                unit: task.to_string(),
                reason: "fewer than 2 uncensored events; no line to fit".to_string(),
            });
            continue;
        }
        per_unit.push(UnitValue {
            unit: task.to_string(),
            value: ols_slope(times),
        });
    }
    Ok(MetricResult::new(MetricName::PR, None, per_unit, skipped))
}

/// Least-squares slope of y over x = 1, 2, ..., len.
fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n + 1.0) / 2.0;
    let y_mean = mean(ys.iter().copied());
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

/// The demonstrates-LL threshold for a metric, plus whether exceeding it
/// (rather than falling below it) is the good direction. PR is the one
/// metric where below-threshold is good: recoveries speeding up means a
/// negative slope.
pub fn threshold_spec(metric: MetricName, mode: Option<TransferMode>) -> (f64, bool) {
    match (metric, mode) {
        (MetricName::PM, _) => (0.0, true),
        (MetricName::FT | MetricName::BT, Some(TransferMode::Ratio)) => (1.0, true),
        (MetricName::FT | MetricName::BT, _) => (0.0, true),
        (MetricName::RP | MetricName::SE, _) => (1.0, true),
        (MetricName::PR, _) => (0.0, false),
    }
}

/// Applies the demonstrates-LL threshold table to computed results. Results
/// without an aggregate get no verdict.
pub fn evaluate_thresholds(results: &[MetricResult]) -> Vec<ThresholdVerdict> {
    let mut verdicts = Vec::new();
    for r in results {
        let Some(aggregate) = r.aggregate else {
            continue;
        };
        let (threshold, above_is_ll) = threshold_spec(r.metric, r.mode);
        let demonstrates = if above_is_ll {
            aggregate > threshold
        } else {
            aggregate < threshold
        };
        verdicts.push(ThresholdVerdict {
            metric: r.metric,
            mode: r.mode,
            threshold,
            demonstrates_ll: demonstrates,
            direction: Direction::Greater,
        });
    }
    verdicts
}
