//! Core data model for lifelong-learning agent logs.
//!
//! A lifetime is the canonical block sequence EB0, LB1, EB1, ..., LBn, EBn:
//! learning blocks (one task each) alternating with evaluation blocks that
//! probe every task, with an optional evaluation block before any learning
//! happens. Experiences inside a block are ordered by experience number.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifies a task, optionally narrowed to a named variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub task_name: String,
    pub variant_name: Option<String>,
}

impl TaskId {
    pub fn new(task_name: impl Into<String>) -> Self {
        Self {
            task_name: task_name.into(),
            variant_name: None,
        }
    }

    pub fn with_variant(task_name: impl Into<String>, variant: impl Into<String>) -> Self {
        Self {
            task_name: task_name.into(),
            variant_name: Some(variant.into()),
        }
    }

    /// Label safe for file names: non-alphanumeric characters become '_'.
    pub fn slug(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant_name {
            Some(v) => write!(f, "{}.{}", self.task_name, v),
            None => write!(f, "{}", self.task_name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockType {
    Learning,
    Evaluation,
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockType::Learning => write!(f, "learning"),
            BlockType::Evaluation => write!(f, "evaluation"),
        }
    }
}

/// One logged experience. `measures` maps measure name to a finite value;
/// map entries are kept sorted so key order in the source log never matters.
/// Unrecognized top-level JSON fields ride along in `extras` untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceRecord {
    pub run_id: String,
    pub exp_num: u64,
    pub block_num: u64,
    pub block_type: BlockType,
    pub task: TaskId,
    pub measures: std::collections::BTreeMap<String, f64>,
    pub worker_id: Option<String>,
    pub timestamp: Option<String>,
    pub extras: serde_json::Map<String, serde_json::Value>,
}

/// All experiences of one task inside one block, in experience order.
/// Each element of `measures` is the measure map of one experience.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSeries {
    pub task: TaskId,
    pub measures: Vec<std::collections::BTreeMap<String, f64>>,
}

impl TaskSeries {
    /// Values of one measure across the series; experiences missing the
    /// measure are skipped.
    pub fn measure_values(&self, measure: &str) -> Vec<f64> {
        self.measures
            .iter()
            .filter_map(|m| m.get(measure).copied())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }
}

/// A contiguous run of experiences sharing a block number. Learning blocks
/// hold exactly one task series; evaluation blocks hold one per probed task.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub block_num: u64,
    pub block_type: BlockType,
    pub series: Vec<TaskSeries>,
}

impl Block {
    pub fn task_series(&self, task: &TaskId) -> Option<&TaskSeries> {
        self.series.iter().find(|s| &s.task == task)
    }

    pub fn num_experiences(&self) -> usize {
        self.series.iter().map(|s| s.len()).sum()
    }
}

/// Learning block number n (1-based) resolved to its position and task.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningBlockRef {
    pub block_index: usize,
    pub task: TaskId,
    pub length: usize,
}

/// One agent run assembled into blocks, with the learning blocks indexed by
/// ordinal so metrics can talk about "the nth learning block" directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Lifetime {
    pub run_id: String,
    pub blocks: Vec<Block>,
    /// Element k describes learning block k + 1.
    pub learning_blocks: Vec<LearningBlockRef>,
    pub task_set: BTreeSet<TaskId>,
    pub has_initial_eval: bool,
}

impl Lifetime {
    pub fn num_learning_blocks(&self) -> usize {
        self.learning_blocks.len()
    }

    /// Task trained in learning block n (1-based).
    pub fn learning_task(&self, n: usize) -> &TaskId {
        &self.learning_blocks[n - 1].task
    }

    /// The evaluation block that follows learning block n; n = 0 means the
    /// initial evaluation block. None when the log stops early.
    pub fn eval_block_after(&self, n: usize) -> Option<&Block> {
        let idx = if n == 0 {
            if self.has_initial_eval {
                0
            } else {
                return None;
            }
        } else {
            self.learning_blocks.get(n - 1)?.block_index + 1
        };
        let block = self.blocks.get(idx)?;
        (block.block_type == BlockType::Evaluation).then_some(block)
    }
}

/// A single-task expert's learning curve for one measure: every learning
/// block of the STE run concatenated in order, after the same preprocessing
/// (per-block smoothing, joint range shift) applied to the lifetime it is
/// compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct STECurve {
    pub task: TaskId,
    pub measure_name: String,
    pub series: Vec<f64>,
    pub source_run_ids: Vec<String>,
}

/// Union of every task id appearing anywhere in the lifetime, learning or
/// evaluation.
pub fn task_set_of(lifetime: &Lifetime) -> BTreeSet<TaskId> {
    lifetime
        .blocks
        .iter()
        .flat_map(|b| b.series.iter().map(|s| s.task.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn series(task: TaskId, vals: &[f64]) -> TaskSeries {
        TaskSeries {
            task,
            measures: vals
                .iter()
                .map(|v| BTreeMap::from([("reward".to_string(), *v)]))
                .collect(),
        }
    }

    #[test]
    fn task_id_display_and_order() {
        let plain = TaskId::new("A");
        let variant = TaskId::with_variant("A", "v1");
        assert_eq!(plain.to_string(), "A");
        assert_eq!(variant.to_string(), "A.v1");
        assert!(plain < variant);
        assert_eq!(TaskId::with_variant("pick/place", "2").slug(), "pick_place_2");
    }

    #[test]
    fn task_set_is_union_over_all_blocks() {
        let a = TaskId::new("A");
        let b = TaskId::new("B");
        let c = TaskId::new("C");
        let lt = Lifetime {
            run_id: "r1".into(),
            blocks: vec![
                Block {
                    block_num: 0,
                    block_type: BlockType::Learning,
                    series: vec![series(a.clone(), &[1.0])],
                },
                Block {
                    block_num: 1,
                    block_type: BlockType::Evaluation,
                    series: vec![
                        series(a.clone(), &[1.0]),
                        series(b.clone(), &[2.0]),
                        series(c.clone(), &[3.0]),
                    ],
                },
            ],
            learning_blocks: vec![LearningBlockRef {
                block_index: 0,
                task: a.clone(),
                length: 1,
            }],
            task_set: BTreeSet::new(),
            has_initial_eval: false,
        };
        let set = task_set_of(&lt);
        assert_eq!(set, BTreeSet::from([a, b, c]));
    }

    #[test]
    fn eval_block_lookup_follows_ordinals() {
        let a = TaskId::new("A");
        let blocks = vec![
            Block {
                block_num: 0,
                block_type: BlockType::Evaluation,
                series: vec![series(a.clone(), &[0.5])],
            },
            Block {
                block_num: 1,
                block_type: BlockType::Learning,
                series: vec![series(a.clone(), &[1.0, 2.0])],
            },
            Block {
                block_num: 2,
                block_type: BlockType::Evaluation,
                series: vec![series(a.clone(), &[2.5])],
            },
        ];
        let lt = Lifetime {
            run_id: "r1".into(),
            blocks,
            learning_blocks: vec![LearningBlockRef {
                block_index: 1,
                task: a.clone(),
                length: 2,
            }],
            task_set: BTreeSet::from([a.clone()]),
            has_initial_eval: true,
        };
        assert_eq!(lt.eval_block_after(0).unwrap().block_num, 0);
        assert_eq!(lt.eval_block_after(1).unwrap().block_num, 2);
        assert!(lt.eval_block_after(2).is_none());
        assert_eq!(lt.learning_task(1), &a);
    }

    #[test]
    fn measure_values_skip_absent_entries() {
        let a = TaskId::new("A");
        let mut s = series(a, &[1.0, 2.0]);
        s.measures.push(BTreeMap::from([("score".to_string(), 9.0)]));
        assert_eq!(s.measure_values("reward"), vec![1.0, 2.0]);
        assert_eq!(s.measure_values("score"), vec![9.0]);
    }
}
