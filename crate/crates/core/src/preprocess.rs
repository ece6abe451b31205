//! Measure preprocessing: smoothing, range shifting, and summarization of a
//! lifetime into the per-block values the metrics consume.
//!
//! For a chosen measure, a lifetime reduces to
//! * `P_E(n, t)`: one scalar per task per evaluation block (the mean, or
//!   median, of the task's evaluation values in the block after learning
//!   block n; n = 0 is the initial evaluation block), and
//! * `P_L(n)`: the per-experience learning series of block n, smoothed
//!   within the block.
//!
//! The range shift adds a per-task offset that pushes all of a task's values
//! strictly above zero so ratio-style metrics never divide by zero. The
//! offset is computed jointly over the lifetime's values and any matched STE
//! values for the task, and applied to both, so LL-vs-STE ratios compare
//! like to like.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Finding;
use crate::model::{BlockType, ExperienceRecord, Lifetime, STECurve, TaskId};

pub mod codes {
    pub const E_EMPTY_SERIES: &str = "E_EMPTY_SERIES";
    pub const E_BAD_WINDOW: &str = "E_BAD_WINDOW";
    pub const E_MEASURE_ABSENT: &str = "E_MEASURE_ABSENT";
    pub const E_STE_FORMAT: &str = "E_STE_FORMAT";
    pub const W_MEASURE_SKIPPED: &str = "W_MEASURE_SKIPPED";
    pub const W_STE_MEASURE_ABSENT: &str = "W_STE_MEASURE_ABSENT";
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("series is empty")]
    EmptySeries,
    #[error("smoothing window must be odd and >= 1, got {0}")]
    BadWindow(usize),
    #[error("measure `{0}` appears in no record of the run")]
    MeasureAbsent(String),
    #[error("not a valid STE log: {0}")]
    SteFormat(String),
}

impl PreprocessError {
    pub fn code(&self) -> &'static str {
        match self {
            PreprocessError::EmptySeries => codes::E_EMPTY_SERIES,
            PreprocessError::BadWindow(_) => codes::E_BAD_WINDOW,
            PreprocessError::MeasureAbsent(_) => codes::E_MEASURE_ABSENT,
            PreprocessError::SteFormat(_) => codes::E_STE_FORMAT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSummarizer {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub smoothing_window: usize,
    pub eval_summarizer: EvalSummarizer,
    pub range_shift: bool,
    pub shift_epsilon: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            smoothing_window: 9,
            eval_summarizer: EvalSummarizer::Mean,
            range_shift: true,
            shift_epsilon: 0.001,
        }
    }
}

/// Record of exactly how a BlockSummaries was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessManifest {
    pub measure_name: String,
    pub smoothing_window: usize,
    pub eval_summarizer: EvalSummarizer,
    pub range_shift: bool,
    pub shift_epsilon: f64,
    /// Offset added to every value of each task (0 when already positive).
    pub shift_offsets: BTreeMap<TaskId, f64>,
}

/// Smoothed learning series of one learning block.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnBlock {
    pub task: TaskId,
    pub series: Vec<f64>,
}

/// Post-preprocessing scalar/series summaries of one lifetime for one
/// measure. `eval[n][t]` is P_E(n, t); `learn[n]` is the smoothed learning
/// series of learning block n (1-based ordinals; eval ordinal 0 is the
/// initial evaluation block). `lb_tasks[n-1]` is t(n) for every learning
/// block, including ones whose learn series is absent because no experience
/// carried the measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSummaries {
    pub measure_name: String,
    pub lb_tasks: Vec<TaskId>,
    pub eval: BTreeMap<u32, BTreeMap<TaskId, f64>>,
    pub learn: BTreeMap<u32, LearnBlock>,
    pub manifest: PreprocessManifest,
}

impl BlockSummaries {
    pub fn eval_value(&self, n: u32, task: &TaskId) -> Option<f64> {
        self.eval.get(&n).and_then(|m| m.get(task)).copied()
    }

    pub fn num_learning_blocks(&self) -> usize {
        self.lb_tasks.len()
    }
}

/// Raw material for an STE curve: the per-block measure maps of a log whose
/// blocks are all learning blocks for one task.
#[derive(Debug, Clone)]
pub struct SteSource {
    pub task: TaskId,
    pub run_id: String,
    pub blocks: Vec<Vec<BTreeMap<String, f64>>>,
}

/// Builds an [`SteSource`] from parsed records, checking the STE log shape
/// (all learning blocks, a single task).
pub fn ste_source(records: &[ExperienceRecord]) -> Result<SteSource, PreprocessError> {
    if records.is_empty() {
        return Err(PreprocessError::SteFormat("log is empty".to_string()));
    }
    let task = records[0].task.clone();
    for r in records {
        if r.block_type != BlockType::Learning {
            return Err(PreprocessError::SteFormat(format!(
                "block {} is not a learning block",
                r.block_num
            )));
        }
        if r.task != task {
            return Err(PreprocessError::SteFormat(format!(
                "log mixes tasks `{}` and `{}`",
                task, r.task
            )));
        }
    }
    let mut blocks: Vec<Vec<BTreeMap<String, f64>>> = Vec::new();
    let mut current_block = records[0].block_num;
    blocks.push(Vec::new());
    for r in records {
        if r.block_num != current_block {
            current_block = r.block_num;
            blocks.push(Vec::new());
        }
        blocks.last_mut().unwrap().push(r.measures.clone());
    }
    Ok(SteSource {
        task,
        run_id: records[0].run_id.clone(),
        blocks,
    })
}

/// Centered moving average with the window clipped at the boundaries: index
/// i averages indices max(0, i-w/2) ..= min(len-1, i+w/2). Window 1 is the
/// identity; output length equals input length.
pub fn smooth_series(values: &[f64], window: usize) -> Result<Vec<f64>, PreprocessError> {
    if values.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(PreprocessError::BadWindow(window));
    }
    let half = window / 2;
    let last = values.len() - 1;
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(last);
            let slice = &values[lo..=hi];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Joint positive offset for one task's lifetime and STE values: 0 when the
/// global minimum is already positive, otherwise -min + eps * max(1, range).
pub fn shift_offset<'a>(values: impl IntoIterator<Item = &'a f64>, epsilon: f64) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || min > 0.0 {
        return 0.0;
    }
    -min + epsilon * (max - min).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOutcome {
    pub lifetime: Vec<f64>,
    pub ste: Vec<f64>,
    pub offset: f64,
}

/// Applies the joint range shift to a task's lifetime values and STE values
/// for the same measure. Both series receive the same offset.
pub fn shift_range(lifetime_values: &[f64], ste_values: &[f64], epsilon: f64) -> ShiftOutcome {
    let offset = shift_offset(lifetime_values.iter().chain(ste_values.iter()), epsilon);
    ShiftOutcome {
        lifetime: lifetime_values.iter().map(|v| v + offset).collect(),
        ste: ste_values.iter().map(|v| v + offset).collect(),
        offset,
    }
}

/// Everything preprocessing produces for one (lifetime, measure) pair.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub summaries: BlockSummaries,
    pub ste: BTreeMap<TaskId, STECurve>,
    pub warnings: Vec<Finding>,
}

/// Summarizes a lifetime without STE data. See [`preprocess`].
pub fn summarize_blocks(
    lifetime: &Lifetime,
    measure_name: &str,
    config: &PreprocessConfig,
) -> Result<(BlockSummaries, Vec<Finding>), PreprocessError> {
    let out = preprocess(lifetime, measure_name, config, &BTreeMap::new())?;
    Ok((out.summaries, out.warnings))
}

/// Full preprocessing pipeline: computes per-task shift offsets jointly over
/// the lifetime and any provided STE sources, then produces P_E scalars,
/// smoothed P_L series, and matching STE curves. Smoothing is applied
/// strictly within block boundaries, on shifted values.
pub fn preprocess(
    lifetime: &Lifetime,
    measure_name: &str,
    config: &PreprocessConfig,
    ste_sources: &BTreeMap<TaskId, SteSource>,
) -> Result<Preprocessed, PreprocessError> {
    if config.smoothing_window == 0 || config.smoothing_window.is_multiple_of(2) {
        return Err(PreprocessError::BadWindow(config.smoothing_window));
    }

    // Per-task value pools for the joint shift offsets.
    let mut pools: BTreeMap<&TaskId, Vec<f64>> = BTreeMap::new();
    let mut present_anywhere = false;
    let mut skipped = 0usize;
    for block in &lifetime.blocks {
        for series in &block.series {
            let vals = series.measure_values(measure_name);
            skipped += series.len() - vals.len();
            if !vals.is_empty() {
                present_anywhere = true;
            }
            pools.entry(&series.task).or_default().extend(vals);
        }
    }
    if !present_anywhere {
        return Err(PreprocessError::MeasureAbsent(measure_name.to_string()));
    }
    for (task, source) in ste_sources {
        let pool = pools.entry(task).or_default();
        for block in &source.blocks {
            pool.extend(block.iter().filter_map(|m| m.get(measure_name)));
        }
    }

    let mut offsets: BTreeMap<TaskId, f64> = BTreeMap::new();
    for (task, pool) in &pools {
        let offset = if config.range_shift {
            shift_offset(pool.iter(), config.shift_epsilon)
        } else {
            0.0
        };
        offsets.insert((*task).clone(), offset);
    }
    let offset_of = |task: &TaskId| offsets.get(task).copied().unwrap_or(0.0);

    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(Finding {
            line: None,
            code: codes::W_MEASURE_SKIPPED.to_string(),
            message: format!("{skipped} experience(s) lack measure `{measure_name}` and were skipped"),
        });
    }

    // P_E scalars: ordinal 0 is the initial EB, ordinal n the EB after LB n.
    let mut eval: BTreeMap<u32, BTreeMap<TaskId, f64>> = BTreeMap::new();
    for n in 0..=lifetime.num_learning_blocks() {
        let Some(block) = lifetime.eval_block_after(n) else {
            continue;
        };
        let mut per_task = BTreeMap::new();
        for series in &block.series {
            let mut vals = series.measure_values(measure_name);
            if vals.is_empty() {
                continue;
            }
            let offset = offset_of(&series.task);
            for v in &mut vals {
                *v += offset;
            }
            per_task.insert(series.task.clone(), summarize_eval(&vals, config.eval_summarizer));
        }
        if !per_task.is_empty() {
            eval.insert(n as u32, per_task);
        }
    }

    // P_L series: shifted then smoothed, never across block boundaries.
    let mut learn: BTreeMap<u32, LearnBlock> = BTreeMap::new();
    for (idx, lb) in lifetime.learning_blocks.iter().enumerate() {
        let block = &lifetime.blocks[lb.block_index];
        let mut vals: Vec<f64> = block
            .series
            .iter()
            .flat_map(|s| s.measure_values(measure_name))
            .collect();
        if vals.is_empty() {
            continue;
        }
        let offset = offset_of(&lb.task);
        for v in &mut vals {
            *v += offset;
        }
        let series = smooth_series(&vals, config.smoothing_window)?;
        learn.insert(
            idx as u32 + 1,
            LearnBlock {
                task: lb.task.clone(),
                series,
            },
        );
    }

    // STE curves under the same treatment: shift, smooth per block, stitch.
    let mut ste = BTreeMap::new();
    for (task, source) in ste_sources {
        let offset = offset_of(task);
        let mut stitched = Vec::new();
        for block in &source.blocks {
            let vals: Vec<f64> = block
                .iter()
                .filter_map(|m| m.get(measure_name).map(|v| v + offset))
                .collect();
            if vals.is_empty() {
                continue;
            }
            stitched.extend(smooth_series(&vals, config.smoothing_window)?);
        }
        if stitched.is_empty() {
            warnings.push(Finding {
                line: None,
                code: codes::W_STE_MEASURE_ABSENT.to_string(),
                message: format!(
                    "STE log `{}` for task `{}` has no values of measure `{}`",
                    source.run_id, task, measure_name
                ),
            });
            continue;
        }
        ste.insert(
            task.clone(),
            STECurve {
                task: task.clone(),
                measure_name: measure_name.to_string(),
                series: stitched,
                source_run_ids: vec![source.run_id.clone()],
            },
        );
    }

    Ok(Preprocessed {
        summaries: BlockSummaries {
            measure_name: measure_name.to_string(),
            lb_tasks: lifetime
                .learning_blocks
                .iter()
                .map(|lb| lb.task.clone())
                .collect(),
            eval,
            learn,
            manifest: PreprocessManifest {
                measure_name: measure_name.to_string(),
                smoothing_window: config.smoothing_window,
                eval_summarizer: config.eval_summarizer,
                range_shift: config.range_shift,
                shift_epsilon: config.shift_epsilon,
                shift_offsets: offsets,
            },
        },
        ste,
        warnings,
    })
}

fn summarize_eval(values: &[f64], summarizer: EvalSummarizer) -> f64 {
    match summarizer {
        EvalSummarizer::Mean => values.iter().sum::<f64>() / values.len() as f64,
        EvalSummarizer::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
    }
}
