//! Synthetic agents with closed-form learning dynamics. The simulator is a
//! metrology fixture: every metric computed from its logs has an analytic
//! expectation, so the metric engine can be checked against exact values
//! rather than against itself.
//!
//! Per-task skill follows exponential saturation while the task trains,
//! exponential decay toward the initial level while other tasks train, and
//! an optional one-shot jumpstart when a transfer source finishes its first
//! learning block. Evaluation experiences report skill plus Gaussian noise
//! and never change state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BlockType, ExperienceRecord, STECurve, TaskId};
use crate::rng::Xoshiro256PlusPlus;
use crate::scenario::BlockSchedule;

/// Every simulated record carries exactly this one measure.
pub const MEASURE_NAME: &str = "performance";

pub mod codes {
    pub const E_UNKNOWN_TASK: &str = "E_UNKNOWN_TASK";
    pub const E_BAD_PARAMS: &str = "E_BAD_PARAMS";
}

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("no dynamics configured for task {0}")]
    UnknownTask(TaskId),
    #[error("invalid agent params: {0}")]
    Invalid(String),
}

impl SimulateError {
    pub fn code(&self) -> &'static str {
        match self {
            SimulateError::UnknownTask(_) => codes::E_UNKNOWN_TASK,
            SimulateError::Invalid(_) => codes::E_BAD_PARAMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDynamics {
    pub task_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_name: Option<String>,
    /// Skill before any training.
    pub initial_perf: f64,
    /// Asymptotic skill under continued training.
    pub saturation: f64,
    /// Learning experiences to close 1 - 1/e of the remaining gap.
    pub time_constant: f64,
    /// Fraction of learned gain lost per learning experience on other tasks.
    #[serde(default)]
    pub forgetting_rate: f64,
}

impl TaskDynamics {
    pub fn task_id(&self) -> TaskId {
        match &self.variant_name {
            Some(v) => TaskId::with_variant(&self.task_name, v),
            None => TaskId::new(&self.task_name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferEntry {
    pub source_task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_variant: Option<String>,
    pub target_task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_variant: Option<String>,
    /// Fraction of the target's remaining gap granted as a jumpstart.
    pub fraction: f64,
}

impl TransferEntry {
    fn source_id(&self) -> TaskId {
        match &self.source_variant {
            Some(v) => TaskId::with_variant(&self.source_task, v),
            None => TaskId::new(&self.source_task),
        }
    }

    fn target_id(&self) -> TaskId {
        match &self.target_variant {
            Some(v) => TaskId::with_variant(&self.target_task, v),
            None => TaskId::new(&self.target_task),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticAgentParams {
    pub tasks: Vec<TaskDynamics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transfer: Vec<TransferEntry>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticAgentParams {
    pub fn dynamics_for(&self, task: &TaskId) -> Option<&TaskDynamics> {
        self.tasks.iter().find(|t| &t.task_id() == task)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.tasks.is_empty() {
            return Err(SimulateError::Invalid(
                "at least one task is required".to_string(),
            ));
        }
        let mut seen = BTreeSet::new();
        for t in &self.tasks {
            let id = t.task_id();
            if !seen.insert(id.clone()) {
                return Err(SimulateError::Invalid(format!(
                    "duplicate dynamics for task {id}"
                )));
            }
            if !t.initial_perf.is_finite() || !t.saturation.is_finite() {
                return Err(SimulateError::Invalid(format!(
                    "non-finite performance bounds for task {id}"
                )));
            }
            if t.saturation < t.initial_perf {
                return Err(SimulateError::Invalid(format!(
                    "saturation {} below initial_perf {} for task {id}",
                    t.saturation, t.initial_perf
                )));
            }
            if !(t.time_constant.is_finite() && t.time_constant > 0.0) {
                return Err(SimulateError::Invalid(format!(
                    "time_constant must be positive for task {id}"
                )));
            }
            if !(0.0..=1.0).contains(&t.forgetting_rate) {
                return Err(SimulateError::Invalid(format!(
                    "forgetting_rate must be in [0, 1] for task {id}"
                )));
            }
        }
        for tr in &self.transfer {
            for id in [tr.source_id(), tr.target_id()] {
                if !seen.contains(&id) {
                    return Err(SimulateError::UnknownTask(id));
                }
            }
            if !(0.0..=1.0).contains(&tr.fraction) {
                return Err(SimulateError::Invalid(format!(
                    "transfer fraction must be in [0, 1] for {} -> {}",
                    tr.source_id(),
                    tr.target_id()
                )));
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SimulateError::Invalid(
                "noise_sd must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

struct AgentState<'a> {
    params: &'a SyntheticAgentParams,
    skills: BTreeMap<TaskId, f64>,
    /// Tasks that have finished their first learning block.
    learned: BTreeSet<TaskId>,
    /// Transfer pairs whose jumpstart has already fired.
    fired: BTreeSet<(TaskId, TaskId)>,
}

impl<'a> AgentState<'a> {
    fn new(params: &'a SyntheticAgentParams, tasks: impl Iterator<Item = TaskId>) -> Self {
        let mut skills = BTreeMap::new();
        for task in tasks {
            let d = params
                .dynamics_for(&task)
                .expect("tasks are validated before state construction");
            skills.insert(task, d.initial_perf);
        }
        AgentState {
            params,
            skills,
            learned: BTreeSet::new(),
            fired: BTreeSet::new(),
        }
    }

    /// One learning experience on `task`: the trained skill saturates one
    /// step, everything else decays one step.
    fn learn_step(&mut self, task: &TaskId) -> f64 {
        let mut trained_value = 0.0;
        for (id, skill) in self.skills.iter_mut() {
            let d = self
                .params
                .dynamics_for(id)
                .expect("skills map only holds configured tasks");
            if id == task {
                *skill = d.saturation - (d.saturation - *skill) * (-1.0 / d.time_constant).exp();
                trained_value = *skill;
            } else {
                *skill = d.initial_perf + (*skill - d.initial_perf) * (1.0 - d.forgetting_rate);
            }
        }
        trained_value
    }

    /// Marks a task's first learning block as finished and fires any
    /// pending jumpstarts out of it, each transfer pair at most once.
    fn complete_learning_block(&mut self, task: &TaskId) {
        if !self.learned.insert(task.clone()) {
            return;
        }
        for tr in &self.params.transfer {
            if tr.source_id() != *task {
                continue;
            }
            let target = tr.target_id();
            if target == *task || !self.fired.insert((task.clone(), target.clone())) {
                continue;
            }
            if let Some(skill) = self.skills.get_mut(&target) {
                let d = self
                    .params
                    .dynamics_for(&target)
                    .expect("transfer targets are validated");
                *skill += tr.fraction * (d.saturation - *skill);
            }
        }
    }
}

fn record(
    run_id: &str,
    exp_num: u64,
    block_num: u64,
    block_type: BlockType,
    task: &TaskId,
    value: f64,
) -> ExperienceRecord {
    ExperienceRecord {
        run_id: run_id.to_string(),
        exp_num,
        block_num,
        block_type,
        task: task.clone(),
        measures: BTreeMap::from([(MEASURE_NAME.to_string(), value)]),
        worker_id: None,
        timestamp: None,
        extras: serde_json::Map::new(),
    }
}

/// Runs the agent through the schedule and returns the full log.
pub fn simulate_lifetime(
    params: &SyntheticAgentParams,
    schedule: &BlockSchedule,
    run_id: &str,
) -> Result<Vec<ExperienceRecord>, SimulateError> {
    params.validate()?;
    let mut scheduled: BTreeSet<TaskId> = BTreeSet::new();
    for block in &schedule.blocks {
        for (task, _) in &block.segments {
            if params.dynamics_for(task).is_none() {
                return Err(SimulateError::UnknownTask(task.clone()));
            }
            scheduled.insert(task.clone());
        }
    }
    let mut state = AgentState::new(params, scheduled.into_iter());
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    let mut records = Vec::new();
    let mut exp_num = 0u64;

    for (i, block) in schedule.blocks.iter().enumerate() {
        let block_num = i as u64 + 1;
        match block.block_type {
            BlockType::Learning => {
                for (task, len) in &block.segments {
                    for _ in 0..*len {
                        let value = state.learn_step(task);
                        records.push(record(
                            run_id,
                            exp_num,
                            block_num,
                            BlockType::Learning,
                            task,
                            value,
                        ));
                        exp_num += 1;
                    }
                    state.complete_learning_block(task);
                }
            }
            BlockType::Evaluation => {
                for (task, len) in &block.segments {
                    let skill = state.skills[task];
                    for _ in 0..*len {
                        // The draw happens even at zero noise so that runs
                        // differing only in noise_sd share the same noise
                        // stream, scaled.
                        let value = skill + params.noise_sd * rng.next_gaussian();
                        records.push(record(
                            run_id,
                            exp_num,
                            block_num,
                            BlockType::Evaluation,
                            task,
                            value,
                        ));
                        exp_num += 1;
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Trains a single-task expert for `num_lx` experiences and returns its
/// learning curve. No forgetting, transfer, or noise applies: nothing else
/// ever trains, and learning values are noise-free by construction.
pub fn simulate_ste(
    params: &SyntheticAgentParams,
    task: &TaskId,
    num_lx: usize,
) -> Result<STECurve, SimulateError> {
    params.validate()?;
    let d = params
        .dynamics_for(task)
        .ok_or_else(|| SimulateError::UnknownTask(task.clone()))?;
    let mut skill = d.initial_perf;
    let mut series = Vec::with_capacity(num_lx);
    for _ in 0..num_lx {
        skill = d.saturation - (d.saturation - skill) * (-1.0 / d.time_constant).exp();
        series.push(skill);
    }
    Ok(STECurve {
        task: task.clone(),
        measure_name: MEASURE_NAME.to_string(),
        series,
        source_run_ids: vec![format!("ste-{}", task.slug())],
    })
}

/// The same single-task-expert curve as chunked log records: one learning
/// block per requested length, suitable for writing as an STE log file.
pub fn simulate_ste_records(
    params: &SyntheticAgentParams,
    task: &TaskId,
    block_lengths: &[usize],
    run_id: &str,
) -> Result<Vec<ExperienceRecord>, SimulateError> {
    let total: usize = block_lengths.iter().sum();
    let curve = simulate_ste(params, task, total)?;
    let mut records = Vec::with_capacity(total);
    let mut values = curve.series.into_iter();
    let mut exp_num = 0u64;
    for (i, len) in block_lengths.iter().enumerate() {
        for _ in 0..*len {
            let value = values.next().expect("series length equals total");
            records.push(record(
                run_id,
                exp_num,
                i as u64 + 1,
                BlockType::Learning,
                task,
                value,
            ));
            exp_num += 1;
        }
    }
    Ok(records)
}
