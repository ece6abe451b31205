//! Log ingestion: parse the JSONL log format, validate runs against the
//! lifetime invariants, and assemble validated records into [`Lifetime`]s.
//!
//! One log line is one experience:
//!
//! ```json
//! {"run_id":"r1","exp_num":0,"block_num":0,"block_type":"evaluation","task_name":"A","measures":{"reward":1.0}}
//! ```
//!
//! Required fields: `run_id`, `exp_num`, `block_num`, `block_type`,
//! `task_name`, `measures`. Optional: `variant_name`, `timestamp`,
//! `worker_id`. Anything else is kept in the record's extras map and ignored
//! by every metric. STE logs use the same format with every block a learning
//! block for a single task.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    task_set_of, Block, BlockType, ExperienceRecord, LearningBlockRef, Lifetime, TaskId, TaskSeries,
};

/// Stable machine-readable finding codes used in validation reports.
pub mod codes {
    pub const E_PARSE: &str = "E_PARSE";
    pub const E_MISSING_FIELD: &str = "E_MISSING_FIELD";
    pub const E_NONFINITE: &str = "E_NONFINITE";
    pub const E_EMPTY_RUN: &str = "E_EMPTY_RUN";
    pub const E_MIXED_RUN: &str = "E_MIXED_RUN";
    pub const E_EMPTY_TASK: &str = "E_EMPTY_TASK";
    pub const E_NO_MEASURES: &str = "E_NO_MEASURES";
    pub const E_EXP_ORDER: &str = "E_EXP_ORDER";
    pub const E_BLOCK_ORDER: &str = "E_BLOCK_ORDER";
    pub const E_BLOCK_TYPE: &str = "E_BLOCK_TYPE";
    pub const E_MULTI_TASK_LB: &str = "E_MULTI_TASK_LB";
    pub const E_EVAL_TASK_SPLIT: &str = "E_EVAL_TASK_SPLIT";
    pub const E_ALTERNATION: &str = "E_ALTERNATION";
    pub const E_NO_LEARNING_BLOCKS: &str = "E_NO_LEARNING_BLOCKS";
    pub const W_MISSING_EVAL_TASK: &str = "W_MISSING_EVAL_TASK";
    pub const W_NO_INITIAL_EB: &str = "W_NO_INITIAL_EB";
    pub const W_NO_FINAL_EB: &str = "W_NO_FINAL_EB";
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: measure `{measure}` is not a finite number")]
    NonFinite { line: usize, measure: String },
    #[error("run contains no records")]
    EmptyRun,
    #[error("run contains no learning blocks")]
    NoLearningBlocks,
    #[error("records mix run ids `{first}` and `{second}`")]
    MixedRun { first: String, second: String },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Parse { .. } => codes::E_PARSE,
            IngestError::MissingField { .. } => codes::E_MISSING_FIELD,
            IngestError::NonFinite { .. } => codes::E_NONFINITE,
            IngestError::EmptyRun => codes::E_EMPTY_RUN,
            IngestError::NoLearningBlocks => codes::E_NO_LEARNING_BLOCKS,
            IngestError::MixedRun { .. } => codes::E_MIXED_RUN,
        }
    }
}

/// One validation finding. `line` is the 1-based position of the offending
/// record in the parsed list, which equals the file line number for logs
/// without blank lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub line: Option<usize>,
    pub code: String,
    pub message: String,
}

impl Finding {
    fn new(line: Option<usize>, code: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub run_id: String,
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_usable(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Parses a whole JSONL document. Blank lines are skipped; the first
/// malformed line aborts with its 1-based line number.
pub fn parse_log(input: &str) -> Result<Vec<ExperienceRecord>, IngestError> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(line, idx + 1)?);
    }
    Ok(records)
}

fn parse_line(line: &str, line_no: usize) -> Result<ExperienceRecord, IngestError> {
    let value: Value = serde_json::from_str(line).map_err(|e| IngestError::Parse {
        line: line_no,
        detail: format!("malformed JSON: {e}"),
    })?;
    let Value::Object(mut map) = value else {
        return Err(IngestError::Parse {
            line: line_no,
            detail: "expected a JSON object".to_string(),
        });
    };

    let bad_field = |field: &'static str, expected: &str| IngestError::Parse {
        line: line_no,
        detail: format!("field `{field}` must be {expected}"),
    };

    let run_id = match map.remove("run_id") {
        None => return Err(IngestError::MissingField { line: line_no, field: "run_id" }),
        Some(Value::String(s)) => s,
        Some(_) => return Err(bad_field("run_id", "a string")),
    };
    let exp_num = match map.remove("exp_num") {
        None => return Err(IngestError::MissingField { line: line_no, field: "exp_num" }),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| bad_field("exp_num", "a non-negative integer"))?,
    };
    let block_num = match map.remove("block_num") {
        None => return Err(IngestError::MissingField { line: line_no, field: "block_num" }),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| bad_field("block_num", "a non-negative integer"))?,
    };
    let block_type = match map.remove("block_type") {
        None => return Err(IngestError::MissingField { line: line_no, field: "block_type" }),
        Some(Value::String(s)) => match s.as_str() {
            "learning" => BlockType::Learning,
            "evaluation" => BlockType::Evaluation,
            _ => return Err(bad_field("block_type", "\"learning\" or \"evaluation\"")),
        },
        Some(_) => return Err(bad_field("block_type", "\"learning\" or \"evaluation\"")),
    };
    let task_name = match map.remove("task_name") {
        None => return Err(IngestError::MissingField { line: line_no, field: "task_name" }),
        Some(Value::String(s)) => s,
        Some(_) => return Err(bad_field("task_name", "a string")),
    };
    let measures = match map.remove("measures") {
        None => return Err(IngestError::MissingField { line: line_no, field: "measures" }),
        Some(Value::Object(obj)) => {
            let mut out = BTreeMap::new();
            for (k, v) in obj {
                let num = v.as_f64().filter(|f| f.is_finite()).ok_or_else(|| {
                    IngestError::NonFinite {
                        line: line_no,
                        measure: k.clone(),
                    }
                })?;
                out.insert(k, num);
            }
            out
        }
        Some(_) => return Err(bad_field("measures", "an object of numbers")),
    };

    let opt_string = |map: &mut serde_json::Map<String, Value>,
                      field: &'static str|
     -> Result<Option<String>, IngestError> {
        match map.remove(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(bad_field(field, "a string")),
        }
    };
    let variant_name = opt_string(&mut map, "variant_name")?;
    let timestamp = opt_string(&mut map, "timestamp")?;
    let worker_id = opt_string(&mut map, "worker_id")?;

    Ok(ExperienceRecord {
        run_id,
        exp_num,
        block_num,
        block_type,
        task: TaskId {
            task_name,
            variant_name,
        },
        measures,
        worker_id,
        timestamp,
        extras: map,
    })
}

#[derive(Serialize)]
struct RawRecordOut<'a> {
    run_id: &'a str,
    exp_num: u64,
    block_num: u64,
    block_type: BlockType,
    task_name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    variant_name: Option<&'a String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<&'a String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    worker_id: Option<&'a String>,
    measures: &'a BTreeMap<String, f64>,
    #[serde(flatten)]
    extras: &'a serde_json::Map<String, Value>,
}

/// Canonical JSONL serialization; `parse_log(serialize_records(rs)) == rs`.
/// Field order is fixed and measure keys are sorted, so output is byte-stable.
pub fn serialize_records(records: &[ExperienceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let raw = RawRecordOut {
            run_id: &r.run_id,
            exp_num: r.exp_num,
            block_num: r.block_num,
            block_type: r.block_type,
            task_name: &r.task.task_name,
            variant_name: r.task.variant_name.as_ref(),
            timestamp: r.timestamp.as_ref(),
            worker_id: r.worker_id.as_ref(),
            measures: &r.measures,
            extras: &r.extras,
        };
        out.push_str(&serde_json::to_string(&raw).expect("record serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Runs every structural check and files each finding as an error or a
/// warning. Errors make the run unusable; warnings only cause individual
/// metric terms to be skipped downstream.
///
/// Evaluation-block task coverage is checked against `expected_tasks` when
/// given, otherwise against the union of tasks seen anywhere in the run.
pub fn validate_run(
    records: &[ExperienceRecord],
    expected_tasks: Option<&BTreeSet<TaskId>>,
) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    if records.is_empty() {
        errors.push(Finding::new(None, codes::E_EMPTY_RUN, "run contains no records"));
        return ValidationReport {
            run_id: String::new(),
            errors,
            warnings,
        };
    }

    let run_id = records[0].run_id.clone();
    for (i, r) in records.iter().enumerate() {
        let line = Some(i + 1);
        if r.run_id != run_id {
            errors.push(Finding::new(
                line,
                codes::E_MIXED_RUN,
                format!("record belongs to run `{}`, expected `{}`", r.run_id, run_id),
            ));
        }
        if r.task.task_name.is_empty() {
            errors.push(Finding::new(line, codes::E_EMPTY_TASK, "task_name is empty"));
        }
        if r.measures.is_empty() {
            errors.push(Finding::new(
                line,
                codes::E_NO_MEASURES,
                "measures must contain at least one entry",
            ));
        }
        for (name, v) in &r.measures {
            if !v.is_finite() {
                errors.push(Finding::new(
                    line,
                    codes::E_NONFINITE,
                    format!("measure `{name}` is not finite"),
                ));
            }
        }
        if i > 0 {
            let prev = &records[i - 1];
            if r.exp_num <= prev.exp_num {
                errors.push(Finding::new(
                    line,
                    codes::E_EXP_ORDER,
                    format!(
                        "exp_num {} does not increase past previous {}",
                        r.exp_num, prev.exp_num
                    ),
                ));
            }
            if r.block_num < prev.block_num {
                errors.push(Finding::new(
                    line,
                    codes::E_BLOCK_ORDER,
                    format!("block_num {} decreases from {}", r.block_num, prev.block_num),
                ));
            }
            if r.block_num == prev.block_num && r.block_type != prev.block_type {
                errors.push(Finding::new(
                    line,
                    codes::E_BLOCK_TYPE,
                    format!("block {} mixes learning and evaluation records", r.block_num),
                ));
            }
        }
    }

    // Per-block invariants, walking contiguous block_num groups in order.
    let groups = block_groups(records);
    for g in &groups {
        let first = &records[g.start];
        let line = Some(g.start + 1);
        match first.block_type {
            BlockType::Learning => {
                let mut tasks: BTreeSet<&TaskId> = BTreeSet::new();
                for r in &records[g.clone()] {
                    tasks.insert(&r.task);
                }
                if tasks.len() > 1 {
                    errors.push(Finding::new(
                        line,
                        codes::E_MULTI_TASK_LB,
                        format!(
                            "learning block {} holds {} tasks; exactly one allowed",
                            first.block_num,
                            tasks.len()
                        ),
                    ));
                }
            }
            BlockType::Evaluation => {
                // Each task's experiences must be one contiguous stretch.
                let mut seen: BTreeSet<&TaskId> = BTreeSet::new();
                let mut current: Option<&TaskId> = None;
                for r in &records[g.clone()] {
                    if current != Some(&r.task) {
                        if seen.contains(&r.task) {
                            errors.push(Finding::new(
                                line,
                                codes::E_EVAL_TASK_SPLIT,
                                format!(
                                    "evaluation block {} interleaves task `{}` non-contiguously",
                                    first.block_num, r.task
                                ),
                            ));
                        }
                        seen.insert(&r.task);
                        current = Some(&r.task);
                    }
                }
            }
        }
    }

    // Alternation: optional EB first, then strict LB/EB alternation.
    let types: Vec<BlockType> = groups.iter().map(|g| records[g.start].block_type).collect();
    for w in types.windows(2) {
        if w[0] == w[1] {
            errors.push(Finding::new(
                None,
                codes::E_ALTERNATION,
                format!("two consecutive {} blocks break the EB/LB alternation", w[0]),
            ));
        }
    }
    if types.first() == Some(&BlockType::Learning) {
        warnings.push(Finding::new(
            None,
            codes::W_NO_INITIAL_EB,
            "no initial evaluation block; metric terms needing P_E(0,t) are skipped",
        ));
    }
    if types.last() == Some(&BlockType::Learning) {
        warnings.push(Finding::new(
            None,
            codes::W_NO_FINAL_EB,
            "no evaluation block after the final learning block; its terms are skipped",
        ));
    }
    if !types.contains(&BlockType::Learning) {
        errors.push(Finding::new(
            None,
            codes::E_NO_LEARNING_BLOCKS,
            "run contains no learning blocks",
        ));
    }

    // Evaluation coverage of the task set, by block position for stable output.
    let derived: BTreeSet<TaskId> = records.iter().map(|r| r.task.clone()).collect();
    let expected = expected_tasks.unwrap_or(&derived);
    for (pos, g) in groups.iter().enumerate() {
        if records[g.start].block_type != BlockType::Evaluation {
            continue;
        }
        let present: BTreeSet<&TaskId> = records[g.clone()].iter().map(|r| &r.task).collect();
        let missing: Vec<String> = expected
            .iter()
            .filter(|t| !present.contains(t))
            .map(|t| t.to_string())
            .collect();
        if !missing.is_empty() {
            warnings.push(Finding::new(
                Some(g.start + 1),
                codes::W_MISSING_EVAL_TASK,
                format!(
                    "evaluation block at position {} misses tasks: {}",
                    pos,
                    missing.join(", ")
                ),
            ));
        }
    }

    ValidationReport {
        run_id,
        errors,
        warnings,
    }
}

/// Contiguous index ranges sharing a block_num, in file order.
fn block_groups(records: &[ExperienceRecord]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].block_num != records[start].block_num {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

/// Groups validated records into blocks, assigns learning-block ordinals in
/// order of appearance, and derives the task set. The caller must have seen
/// `validate_run(..).is_usable()` first; this only re-checks what it needs
/// to stay panic-free.
pub fn assemble_lifetime(records: &[ExperienceRecord]) -> Result<Lifetime, IngestError> {
    if records.is_empty() {
        return Err(IngestError::EmptyRun);
    }
    let run_id = records[0].run_id.clone();
    for r in records {
        if r.run_id != run_id {
            return Err(IngestError::MixedRun {
                first: run_id,
                second: r.run_id.clone(),
            });
        }
    }

    let mut blocks = Vec::new();
    for g in block_groups(records) {
        let slice = &records[g];
        let mut series: Vec<TaskSeries> = Vec::new();
        for r in slice {
            match series.last_mut() {
                Some(s) if s.task == r.task => s.measures.push(r.measures.clone()),
                _ => series.push(TaskSeries {
                    task: r.task.clone(),
                    measures: vec![r.measures.clone()],
                }),
            }
        }
        blocks.push(Block {
            block_num: slice[0].block_num,
            block_type: slice[0].block_type,
            series,
        });
    }

    let learning_blocks: Vec<LearningBlockRef> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.block_type == BlockType::Learning)
        .map(|(idx, b)| LearningBlockRef {
            block_index: idx,
            task: b.series[0].task.clone(),
            length: b.num_experiences(),
        })
        .collect();
    if learning_blocks.is_empty() {
        return Err(IngestError::NoLearningBlocks);
    }

    let has_initial_eval = blocks[0].block_type == BlockType::Evaluation;
    let mut lifetime = Lifetime {
        run_id,
        blocks,
        learning_blocks,
        task_set: BTreeSet::new(),
        has_initial_eval,
    };
    lifetime.task_set = task_set_of(&lifetime);
    Ok(lifetime)
}

/// CSV import shim. Fixed columns `run_id`, `exp_num`, `block_num`,
/// `block_type`, `task_name` plus optional `variant_name`, `timestamp`,
/// `worker_id`; every remaining column is a measure. Empty cells mean the
/// measure (or optional field) is absent for that row.
pub fn parse_csv_log(input: &str) -> Result<Vec<ExperienceRecord>, IngestError> {
    const FIXED: [&str; 5] = ["run_id", "exp_num", "block_num", "block_type", "task_name"];
    const OPTIONAL: [&str; 3] = ["variant_name", "timestamp", "worker_id"];

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Parse {
            line: 1,
            detail: format!("bad CSV header: {e}"),
        })?
        .clone();
    for required in FIXED {
        if !headers.iter().any(|h| h == required) {
            return Err(IngestError::MissingField {
                line: 1,
                field: match required {
                    "run_id" => "run_id",
                    "exp_num" => "exp_num",
                    "block_num" => "block_num",
                    "block_type" => "block_type",
                    _ => "task_name",
                },
            });
        }
    }

    let col = |name: &str| headers.iter().position(|h| h == name);
    let measure_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !FIXED.contains(h) && !OPTIONAL.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let line_no = row_idx + 2;
        let row = row.map_err(|e| IngestError::Parse {
            line: line_no,
            detail: format!("bad CSV row: {e}"),
        })?;
        let field = |name: &str| col(name).and_then(|i| row.get(i)).unwrap_or("");
        let int_field = |name: &'static str| -> Result<u64, IngestError> {
            field(name).parse().map_err(|_| IngestError::Parse {
                line: line_no,
                detail: format!("field `{name}` must be a non-negative integer"),
            })
        };

        let block_type = match field("block_type") {
            "learning" => BlockType::Learning,
            "evaluation" => BlockType::Evaluation,
            other => {
                return Err(IngestError::Parse {
                    line: line_no,
                    detail: format!("field `block_type` must be \"learning\" or \"evaluation\", got \"{other}\""),
                })
            }
        };
        let mut measures = BTreeMap::new();
        for (i, name) in &measure_cols {
            let cell = row.get(*i).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().ok().filter(|f: &f64| f.is_finite()).ok_or_else(|| {
                IngestError::NonFinite {
                    line: line_no,
                    measure: name.clone(),
                }
            })?;
            measures.insert(name.clone(), v);
        }
        let opt = |name: &str| {
            let v = field(name);
            (!v.is_empty()).then(|| v.to_string())
        };
        records.push(ExperienceRecord {
            run_id: field("run_id").to_string(),
            exp_num: int_field("exp_num")?,
            block_num: int_field("block_num")?,
            block_type,
            task: TaskId {
                task_name: field("task_name").to_string(),
                variant_name: opt("variant_name"),
            },
            measures,
            worker_id: opt("worker_id"),
            timestamp: opt("timestamp"),
            extras: serde_json::Map::new(),
        });
    }
    Ok(records)
}
