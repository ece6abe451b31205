//! Fixture builders shared by the criterion benchmarks.

use std::collections::BTreeMap;

use lleval_core::{
    assemble_lifetime, generate, preprocess, simulate_lifetime, simulate_ste_records, ste_source,
    ExperienceRecord, Lifetime, PreprocessConfig, Preprocessed, ScenarioSpec, ScenarioType,
    SteSource, SyntheticAgentParams, TaskDynamics, TaskId, TaskVariants, TransferEntry,
};

pub fn bench_spec(num_tasks: usize, lb_length: usize, num_superblocks: usize) -> ScenarioSpec {
    ScenarioSpec {
        tasks: (0..num_tasks)
            .map(|i| TaskVariants {
                task_name: format!("task{i}"),
                variants: Vec::new(),
            })
            .collect(),
        lb_length,
        eb_length_per_task: 8,
        scenario_type: ScenarioType::Condensed,
        num_superblocks,
        custom_pattern: None,
        seed: 31,
    }
}

pub fn bench_agent(num_tasks: usize, noise_sd: f64) -> SyntheticAgentParams {
    let tasks = (0..num_tasks)
        .map(|i| TaskDynamics {
            task_name: format!("task{i}"),
            variant_name: None,
            initial_perf: 1.0 + 0.2 * i as f64,
            saturation: 4.0 + 0.5 * i as f64,
            time_constant: 8.0 + i as f64,
            forgetting_rate: 0.02 + 0.01 * i as f64,
        })
        .collect();
    let transfer = (0..num_tasks)
        .map(|i| TransferEntry {
            source_task: format!("task{i}"),
            source_variant: None,
            target_task: format!("task{}", (i + 1) % num_tasks),
            target_variant: None,
            fraction: 0.2,
        })
        .collect();
    SyntheticAgentParams {
        tasks,
        transfer,
        noise_sd,
        seed: 64,
    }
}

pub fn bench_records(spec: &ScenarioSpec, agent: &SyntheticAgentParams) -> Vec<ExperienceRecord> {
    let schedule = generate(spec).unwrap();
    simulate_lifetime(agent, &schedule, "bench-run").unwrap()
}

pub fn bench_ste_sources(
    spec: &ScenarioSpec,
    agent: &SyntheticAgentParams,
) -> BTreeMap<TaskId, SteSource> {
    let schedule = generate(spec).unwrap();
    let mut lengths: BTreeMap<TaskId, Vec<usize>> = BTreeMap::new();
    for block in &schedule.blocks {
        if block.block_type == lleval_core::BlockType::Learning {
            let (task, len) = &block.segments[0];
            lengths.entry(task.clone()).or_default().push(*len);
        }
    }
    let mut solo = agent.clone();
    solo.noise_sd = 0.0;
    lengths
        .into_iter()
        .map(|(task, lens)| {
            let records = simulate_ste_records(&solo, &task, &lens, "bench-ste").unwrap();
            let source = ste_source(&records).unwrap();
            (task, source)
        })
        .collect()
}

pub fn bench_lifetime(records: &[ExperienceRecord]) -> Lifetime {
    assemble_lifetime(records).unwrap()
}

pub fn bench_processed(
    lifetime: &Lifetime,
    ste: &BTreeMap<TaskId, SteSource>,
) -> Preprocessed {
    preprocess(lifetime, "performance", &PreprocessConfig::default(), ste).unwrap()
}
