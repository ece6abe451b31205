//! Scenario generation: turns a compact scenario description into a concrete
//! block schedule (which task trains when, and how evaluation blocks are
//! interleaved) plus a multi-lifetime evaluation protocol with derived seeds.
//!
//! Schedules are pure functions of (spec, seed). The permutations come from
//! the crate's own fixed PRNG, so a spec file reproduces the same curriculum
//! on any platform, and the provenance block records everything needed to
//! audit that claim: a hash of the spec, the seed, and the permutations that
//! were actually used.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Finding;
use crate::model::{BlockType, ExperienceRecord, TaskId};
use crate::rng::{SplitMix64, Xoshiro256PlusPlus};

pub mod codes {
    pub const E_BAD_SPEC: &str = "E_BAD_SPEC";
    pub const E_INDIVISIBLE: &str = "E_INDIVISIBLE";
    pub const E_BAD_PATTERN: &str = "E_BAD_PATTERN";
    pub const W_UNDERPOWERED: &str = "W_UNDERPOWERED";
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario spec: {0}")]
    Invalid(String),
    #[error("lb_length {lb_length} is not divisible by num_superblocks {num_superblocks}")]
    Indivisible {
        lb_length: usize,
        num_superblocks: usize,
    },
    #[error("bad custom pattern: {0}")]
    BadPattern(String),
}

impl ScenarioError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Invalid(_) => codes::E_BAD_SPEC,
            ScenarioError::Indivisible { .. } => codes::E_INDIVISIBLE,
            ScenarioError::BadPattern(_) => codes::E_BAD_PATTERN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioType {
    Condensed,
    Dispersed,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskVariants {
    pub task_name: String,
    /// Empty means the bare task is a single variant with no variant name.
    #[serde(default)]
    pub variants: Vec<String>,
}

fn default_superblocks() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub tasks: Vec<TaskVariants>,
    /// Learning experiences per condensed learning block. Dispersed blocks
    /// get an equal share of this per superblock.
    pub lb_length: usize,
    /// Evaluation experiences per task-variant in every evaluation block.
    pub eb_length_per_task: usize,
    pub scenario_type: ScenarioType,
    #[serde(default = "default_superblocks")]
    pub num_superblocks: usize,
    /// Ordinals into the flattened task-variant list, in training order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_pattern: Option<Vec<usize>>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Flattened task-variant list in declaration order; custom-pattern
    /// ordinals index into this.
    pub fn task_variants(&self) -> Vec<TaskId> {
        let mut out = Vec::new();
        for t in &self.tasks {
            if t.variants.is_empty() {
                out.push(TaskId::new(&t.task_name));
            } else {
                for v in &t.variants {
                    out.push(TaskId::with_variant(&t.task_name, v));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<Vec<TaskId>, ScenarioError> {
        let variants = self.task_variants();
        if variants.is_empty() {
            return Err(ScenarioError::Invalid(
                "at least one task-variant is required".to_string(),
            ));
        }
        let mut seen = BTreeMap::new();
        for v in &variants {
            if seen.insert(v.clone(), ()).is_some() {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate task-variant {v}"
                )));
            }
        }
        if self.lb_length == 0 {
            return Err(ScenarioError::Invalid("lb_length must be positive".to_string()));
        }
        if self.eb_length_per_task == 0 {
            return Err(ScenarioError::Invalid(
                "eb_length_per_task must be positive".to_string(),
            ));
        }
        Ok(variants)
    }
}

/// One scheduled block. Learning blocks have a single segment; evaluation
/// blocks carry one segment per task-variant, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedBlock {
    pub block_type: BlockType,
    pub segments: Vec<(TaskId, usize)>,
}

impl PlannedBlock {
    fn learning(task: TaskId, length: usize) -> Self {
        PlannedBlock {
            block_type: BlockType::Learning,
            segments: vec![(task, length)],
        }
    }

    fn evaluation(variants: &[TaskId], per_task: usize) -> Self {
        PlannedBlock {
            block_type: BlockType::Evaluation,
            segments: variants.iter().map(|t| (t.clone(), per_task)).collect(),
        }
    }

    pub fn num_experiences(&self) -> usize {
        self.segments.iter().map(|(_, len)| len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// FNV-1a hash over the spec's canonical JSON bytes.
    pub spec_hash: u64,
    pub seed: u64,
    /// The index permutations actually used, one list per superblock (or
    /// the explicit pattern for custom scenarios).
    pub permutations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub blocks: Vec<PlannedBlock>,
    pub provenance: Provenance,
}

impl BlockSchedule {
    pub fn num_learning_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.block_type == BlockType::Learning)
            .count()
    }

    pub fn num_evaluation_blocks(&self) -> usize {
        self.blocks.len() - self.num_learning_blocks()
    }

    /// Total learning experiences scheduled per task-variant.
    pub fn learning_totals(&self) -> BTreeMap<TaskId, usize> {
        let mut totals = BTreeMap::new();
        for b in &self.blocks {
            if b.block_type != BlockType::Learning {
                continue;
            }
            for (task, len) in &b.segments {
                *totals.entry(task.clone()).or_insert(0) += len;
            }
        }
        totals
    }

    /// Expands the schedule into placeholder records with empty measures, a
    /// plan file in the same shape as an agent log. Plans are for inspection
    /// and simulation input, not metric computation, so log validation
    /// rejects them (every record lacks measures).
    pub fn to_plan_records(&self, run_id: &str) -> Vec<ExperienceRecord> {
        let mut records = Vec::new();
        let mut exp_num = 0u64;
        for (i, block) in self.blocks.iter().enumerate() {
            for (task, len) in &block.segments {
                for _ in 0..*len {
                    records.push(ExperienceRecord {
                        run_id: run_id.to_string(),
                        exp_num,
                        block_num: i as u64 + 1,
                        block_type: block.block_type,
                        task: task.clone(),
                        measures: BTreeMap::new(),
                        worker_id: None,
                        timestamp: None,
                        extras: serde_json::Map::new(),
                    });
                    exp_num += 1;
                }
            }
        }
        records
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn spec_hash(spec: &ScenarioSpec) -> u64 {
    let bytes = serde_json::to_vec(spec).expect("scenario specs always serialize");
    fnv1a(&bytes)
}

fn interleaved_schedule(
    spec: &ScenarioSpec,
    variants: &[TaskId],
    lb_sequence: &[(usize, usize)],
    permutations: Vec<Vec<usize>>,
) -> BlockSchedule {
    let mut blocks = Vec::with_capacity(2 * lb_sequence.len() + 1);
    blocks.push(PlannedBlock::evaluation(variants, spec.eb_length_per_task));
    for &(ordinal, length) in lb_sequence {
        blocks.push(PlannedBlock::learning(variants[ordinal].clone(), length));
        blocks.push(PlannedBlock::evaluation(variants, spec.eb_length_per_task));
    }
    BlockSchedule {
        blocks,
        provenance: Provenance {
            spec_hash: spec_hash(spec),
            seed: spec.seed,
            permutations,
        },
    }
}

fn permutation(rng: &mut Xoshiro256PlusPlus, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}

/// One learning block per task-variant, in seed-determined random order,
/// with a full evaluation block before and after each.
pub fn generate_condensed(spec: &ScenarioSpec) -> Result<BlockSchedule, ScenarioError> {
    let variants = spec.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let perm = permutation(&mut rng, variants.len());
    let seq: Vec<(usize, usize)> = perm.iter().map(|&i| (i, spec.lb_length)).collect();
    Ok(interleaved_schedule(spec, &variants, &seq, vec![perm]))
}

/// The condensed curriculum split across superblocks: each superblock is a
/// fresh permutation of every task-variant with learning blocks of
/// lb_length / num_superblocks, so per-variant experience totals match the
/// condensed schedule exactly.
pub fn generate_dispersed(spec: &ScenarioSpec) -> Result<BlockSchedule, ScenarioError> {
    let variants = spec.validate()?;
    if spec.num_superblocks == 0 {
        return Err(ScenarioError::Invalid(
            "num_superblocks must be positive".to_string(),
        ));
    }
    if !spec.lb_length.is_multiple_of(spec.num_superblocks) {
        return Err(ScenarioError::Indivisible {
            lb_length: spec.lb_length,
            num_superblocks: spec.num_superblocks,
        });
    }
    let sub_length = spec.lb_length / spec.num_superblocks;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let mut seq = Vec::new();
    let mut permutations = Vec::new();
    for _ in 0..spec.num_superblocks {
        let perm = permutation(&mut rng, variants.len());
        seq.extend(perm.iter().map(|&i| (i, sub_length)));
        permutations.push(perm);
    }
    Ok(interleaved_schedule(spec, &variants, &seq, permutations))
}

/// Learning blocks follow the explicit ordinal pattern, evaluation blocks
/// interleaved as in condensed.
pub fn generate_custom(spec: &ScenarioSpec) -> Result<BlockSchedule, ScenarioError> {
    let variants = spec.validate()?;
    let pattern = spec
        .custom_pattern
        .as_ref()
        .ok_or_else(|| ScenarioError::BadPattern("custom_pattern is required".to_string()))?;
    if pattern.is_empty() {
        return Err(ScenarioError::BadPattern(
            "custom_pattern must not be empty".to_string(),
        ));
    }
    for &ordinal in pattern {
        if ordinal >= variants.len() {
            return Err(ScenarioError::BadPattern(format!(
                "ordinal {ordinal} out of range for {} task-variants",
                variants.len()
            )));
        }
    }
    let seq: Vec<(usize, usize)> = pattern.iter().map(|&i| (i, spec.lb_length)).collect();
    Ok(interleaved_schedule(spec, &variants, &seq, vec![pattern.clone()]))
}

/// Dispatches on the spec's scenario type.
pub fn generate(spec: &ScenarioSpec) -> Result<BlockSchedule, ScenarioError> {
    match spec.scenario_type {
        ScenarioType::Condensed => generate_condensed(spec),
        ScenarioType::Dispersed => generate_dispersed(spec),
        ScenarioType::Custom => generate_custom(spec),
    }
}

pub const MIN_RECOMMENDED_LIFETIMES: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationProtocol {
    pub spec: ScenarioSpec,
    pub num_lifetimes: usize,
    pub lifetime_seeds: Vec<u64>,
    pub pre_deployment_note: String,
}

/// Derives one seed per lifetime from the master seed. Warns when the run
/// count falls below the recommended minimum of eleven.
pub fn build_protocol(
    spec: &ScenarioSpec,
    num_lifetimes: usize,
    master_seed: u64,
) -> Result<(EvaluationProtocol, Vec<Finding>), ScenarioError> {
    spec.validate()?;
    if num_lifetimes == 0 {
        return Err(ScenarioError::Invalid(
            "num_lifetimes must be at least 1".to_string(),
        ));
    }
    let mut warnings = Vec::new();
    if num_lifetimes < MIN_RECOMMENDED_LIFETIMES {
        warnings.push(Finding {
            line: None,
            code: codes::W_UNDERPOWERED.to_string(),
            message: format!(
                "{num_lifetimes} lifetimes planned; at least {MIN_RECOMMENDED_LIFETIMES} \
                 are recommended for reliable aggregates"
            ),
        });
    }
    let mut stream = SplitMix64::new(master_seed);
    let lifetime_seeds: Vec<u64> = (0..num_lifetimes).map(|_| stream.next_u64()).collect();
    Ok((
        EvaluationProtocol {
            spec: spec.clone(),
            num_lifetimes,
            lifetime_seeds,
            pre_deployment_note: "lifetimes begin at deployment: any pre-deployment training \
                                  happens before the first evaluation block and is not logged"
                .to_string(),
        },
        warnings,
    ))
}
