//! `lleval scenario` and `lleval simulate`: curriculum generation and
//! synthetic log production, both driven by the TOML config.

use std::path::{Path, PathBuf};

use lleval_core::rng::SplitMix64;
use lleval_core::{
    build_protocol, generate, serialize_records, BlockSchedule, ScenarioType, TaskId,
};
use rayon::prelude::*;

use crate::config;
use crate::{outln, CmdResult, Failure, GlobalArgs, OutputFormat};

fn type_name(t: ScenarioType) -> &'static str {
    match t {
        ScenarioType::Condensed => "condensed",
        ScenarioType::Dispersed => "dispersed",
        ScenarioType::Custom => "custom",
    }
}

pub fn scenario(global: &GlobalArgs, out: Option<PathBuf>, lifetimes: Option<usize>) -> CmdResult {
    let cfg = config::load(global.config.as_deref())?;
    let mut spec = cfg.scenario_or_err()?.clone();
    if let Some(seed) = global.seed {
        spec.seed = seed;
    }
    let schedule = generate(&spec).map_err(|e| Failure::input(e.to_string()))?;

    let mut plan_info = None;
    if let Some(path) = &out {
        let records = schedule.to_plan_records("plan-0");
        std::fs::write(path, serialize_records(&records))
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        plan_info = Some((path.display().to_string(), records.len()));
    }

    let mut protocol_info = None;
    if let Some(n) = lifetimes {
        let (protocol, warnings) =
            build_protocol(&spec, n, spec.seed).map_err(|e| Failure::input(e.to_string()))?;
        protocol_info = Some((protocol, warnings));
    }

    match global.format {
        OutputFormat::Json => {
            let mut doc = serde_json::json!({
                "scenario_type": type_name(spec.scenario_type),
                "task_variants": spec.task_variants().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                "num_learning_blocks": schedule.num_learning_blocks(),
                "num_evaluation_blocks": schedule.num_evaluation_blocks(),
                "learning_totals": schedule.learning_totals().iter()
                    .map(|(t, n)| (t.to_string(), *n)).collect::<std::collections::BTreeMap<_, _>>(),
                "provenance": schedule.provenance,
            });
            if let Some((path, n)) = &plan_info {
                doc["plan"] = serde_json::json!({ "path": path, "records": n });
            }
            if let Some((protocol, warnings)) = &protocol_info {
                doc["protocol"] = serde_json::json!({
                    "num_lifetimes": protocol.num_lifetimes,
                    "lifetime_seeds": protocol.lifetime_seeds,
                    "note": protocol.pre_deployment_note,
                    "warnings": warnings,
                });
            }
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Text => {
            let variants = spec.task_variants();
            outln!(
                "scenario: {} over {} task-variant(s), seed {}",
                type_name(spec.scenario_type),
                variants.len(),
                spec.seed
            );
            outln!(
                "blocks: {} learning + {} evaluation",
                schedule.num_learning_blocks(),
                schedule.num_evaluation_blocks()
            );
            let totals: Vec<String> = schedule
                .learning_totals()
                .iter()
                .map(|(t, n)| format!("{t}={n}"))
                .collect();
            outln!("learning experiences per task: {}", totals.join(", "));
            outln!("spec hash: {:#018x}", schedule.provenance.spec_hash);
            if let Some((path, n)) = &plan_info {
                outln!("plan: wrote {n} records to {path}");
            }
            if let Some((protocol, warnings)) = &protocol_info {
                outln!(
                    "protocol: {} lifetime seed(s): {:?}",
                    protocol.num_lifetimes, protocol.lifetime_seeds
                );
                outln!("note: {}", protocol.pre_deployment_note);
                for w in warnings {
                    eprintln!("warning {}: {}", w.code, w.message);
                }
            }
        }
    }
    Ok(0)
}

/// Per-variant learning-block lengths of a schedule, in block order. The
/// STE logs mirror this chunking so their curves line up with the lifetime.
fn lb_lengths(schedule: &BlockSchedule) -> std::collections::BTreeMap<TaskId, Vec<usize>> {
    let mut lengths: std::collections::BTreeMap<TaskId, Vec<usize>> = Default::default();
    for block in &schedule.blocks {
        if block.block_type == lleval_core::BlockType::Learning {
            for (task, len) in &block.segments {
                lengths.entry(task.clone()).or_default().push(*len);
            }
        }
    }
    lengths
}

pub fn simulate(global: &GlobalArgs, out_dir: &Path, lifetimes: usize) -> CmdResult {
    let cfg = config::load(global.config.as_deref())?;
    let mut spec = cfg.scenario_or_err()?.clone();
    let params = cfg.agent_or_err()?.clone();
    if let Some(seed) = global.seed {
        spec.seed = seed;
    }
    params.validate().map_err(|e| Failure::input(e.to_string()))?;

    let (protocol, warnings) =
        build_protocol(&spec, lifetimes, spec.seed).map_err(|e| Failure::input(e.to_string()))?;

    let ste_dir = out_dir.join("ste");
    std::fs::create_dir_all(&ste_dir)
        .map_err(|e| Failure::input(format!("{}: {e}", ste_dir.display())))?;

    // Each lifetime gets its own schedule and agent seed so block orders and
    // noise streams differ across runs but reproduce exactly from the master
    // seed.
    let run_paths: Vec<PathBuf> = protocol
        .lifetime_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &lifetime_seed)| -> Result<PathBuf, Failure> {
            let mut stream = SplitMix64::new(lifetime_seed);
            let mut spec_i = spec.clone();
            spec_i.seed = stream.next_u64();
            let mut params_i = params.clone();
            params_i.seed = stream.next_u64();
            let schedule = generate(&spec_i).map_err(|e| Failure::input(e.to_string()))?;
            let run_id = format!("run-{i:03}");
            let records = lleval_core::simulate_lifetime(&params_i, &schedule, &run_id)
                .map_err(|e| Failure::input(e.to_string()))?;
            let path = out_dir.join(format!("{run_id}.jsonl"));
            std::fs::write(&path, serialize_records(&records))
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    // One STE log per task-variant, chunked like the first lifetime's
    // learning blocks. STE curves are noise free, so the agent seed is moot.
    let first_schedule = {
        let mut spec_0 = spec.clone();
        spec_0.seed = SplitMix64::new(protocol.lifetime_seeds[0]).next_u64();
        generate(&spec_0).map_err(|e| Failure::input(e.to_string()))?
    };
    let mut ste_paths = Vec::new();
    for (task, lengths) in lb_lengths(&first_schedule) {
        let slug = task.slug();
        let records =
            lleval_core::simulate_ste_records(&params, &task, &lengths, &format!("ste-{slug}"))
                .map_err(|e| Failure::input(e.to_string()))?;
        let path = ste_dir.join(format!("{slug}.jsonl"));
        std::fs::write(&path, serialize_records(&records))
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        ste_paths.push(path);
    }

    match global.format {
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "out_dir": out_dir.display().to_string(),
                "lifetimes": lifetimes,
                "runs": run_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "ste": ste_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "lifetime_seeds": protocol.lifetime_seeds,
                "warnings": warnings,
            });
            outln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
        OutputFormat::Text => {
            outln!(
                "wrote {} lifetime log(s) and {} STE log(s) under {}",
                run_paths.len(),
                ste_paths.len(),
                out_dir.display()
            );
            for w in &warnings {
                eprintln!("warning {}: {}", w.code, w.message);
            }
        }
    }
    Ok(0)
}
