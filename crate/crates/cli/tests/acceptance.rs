//! The acceptance gate: ten checks covering the worked examples, oracle
//! equivalence against independent transcriptions of the metric procedures,
//! invariance properties, golden statistics fixtures, scenario structure,
//! end-to-end determinism, and noise robustness.
//!
//! Each check prints one `[ACCEPTANCE] cNN ...: PASS|FAIL` line (visible
//! with `cargo test --test acceptance -- --nocapture`).

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lleval_core::rng::{SplitMix64, Xoshiro256PlusPlus};
use lleval_core::{
    assemble_lifetime, backward_transfer, build_protocol, contrast, cost_overhead,
    forward_transfer, generate, one_tailed_t_test, performance_maintenance, preprocess, ratio,
    relative_performance, required_sample_size, sample_efficiency, simulate_lifetime,
    simulate_ste_records, spearman_correlation, ste_source, BlockSummaries, BlockType,
    EvalSummarizer, LearnBlock, MetricResult, PreprocessConfig, PreprocessManifest, Preprocessed,
    STECurve, ScenarioSpec, ScenarioType, SteSource, SyntheticAgentParams, TaskDynamics, TaskId,
    TaskVariants, TransferEntry, TransferMode,
};

fn report<F: FnOnce() + UnwindSafe>(name: &str, f: F) {
    match catch_unwind(f) {
        Ok(()) => println!("[ACCEPTANCE] {name}: PASS"),
        Err(e) => {
            println!("[ACCEPTANCE] {name}: FAIL");
            resume_unwind(e);
        }
    }
}

/// Relative closeness with a floor of 1 so near-zero references compare
/// absolutely.
fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn lleval_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lleval"))
}

#[test]
fn c01_sample_size_reproduction() {
    report("c01 sample-size reproduction", || {
        assert_eq!(required_sample_size(1.0, 0.05, 0.1), 11);
        let start = Instant::now();
        let n = required_sample_size(1.0, 0.05, 0.1);
        let elapsed = start.elapsed();
        assert_eq!(n, 11);
        assert!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
        let out = lleval_bin()
            .args(["samplesize", "--k", "1"])
            .output()
            .unwrap();
        assert_eq!(String::from_utf8_lossy(&out.stdout), "11\n");
    });
}

#[test]
fn c02_cost_overhead_reproduction() {
    report("c02 cost-overhead reproduction", || {
        let v = cost_overhead(300.0, 100, 200.0, 100).unwrap();
        assert_eq!(v, 1.5, "exact arithmetic expected");
        let out = lleval_bin()
            .args(["cost", "300", "100", "200", "100"])
            .output()
            .unwrap();
        assert_eq!(String::from_utf8_lossy(&out.stdout), "1.5\n");
    });
}

// ---------------------------------------------------------------------------
// c03: randomized equivalence against independent metric transcriptions.

/// A randomly drawn lifetime in summary form plus STE curves, the shared
/// input for both the engine and the reference transcriptions.
struct RandomCase {
    tasks: Vec<TaskId>,
    summaries: BlockSummaries,
    ste: BTreeMap<TaskId, STECurve>,
}

fn value_in(rng: &mut Xoshiro256PlusPlus, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn random_case(rng: &mut Xoshiro256PlusPlus) -> RandomCase {
    let num_tasks = 1 + rng.next_bounded(4) as usize;
    let tasks: Vec<TaskId> = (0..num_tasks)
        .map(|i| TaskId::new(format!("t{i}")))
        .collect();
    let num_lbs = 1 + rng.next_bounded(6) as usize;
    let lb_tasks: Vec<TaskId> = (0..num_lbs)
        .map(|_| tasks[rng.next_bounded(num_tasks as u64) as usize].clone())
        .collect();

    let mut eval = BTreeMap::new();
    for n in 0..=num_lbs as u32 {
        let mut row = BTreeMap::new();
        for t in &tasks {
            row.insert(t.clone(), value_in(rng, 0.1, 10.0));
        }
        eval.insert(n, row);
    }

    let mut learn = BTreeMap::new();
    for n in 1..=num_lbs as u32 {
        let len = 3 + rng.next_bounded(6) as usize;
        let series = (0..len).map(|_| value_in(rng, 0.1, 10.0)).collect();
        learn.insert(
            n,
            LearnBlock {
                task: lb_tasks[n as usize - 1].clone(),
                series,
            },
        );
    }

    let mut ll_totals: BTreeMap<TaskId, usize> = BTreeMap::new();
    for lb in learn.values() {
        *ll_totals.entry(lb.task.clone()).or_default() += lb.series.len();
    }
    let mut ste = BTreeMap::new();
    for (task, total) in ll_totals {
        let len = total + rng.next_bounded(6) as usize;
        let series: Vec<f64> = (0..len).map(|_| value_in(rng, 0.1, 10.0)).collect();
        ste.insert(
            task.clone(),
            STECurve {
                task,
                measure_name: "m".to_string(),
                series,
                source_run_ids: vec!["ste".to_string()],
            },
        );
    }

    let manifest = PreprocessManifest {
        measure_name: "m".to_string(),
        smoothing_window: 1,
        eval_summarizer: EvalSummarizer::Mean,
        range_shift: false,
        shift_epsilon: 0.001,
        shift_offsets: BTreeMap::new(),
    };
    RandomCase {
        tasks,
        summaries: BlockSummaries {
            measure_name: "m".to_string(),
            lb_tasks,
            eval,
            learn,
            manifest,
        },
        ste,
    }
}

/// Self-contained renderings of the five metric procedures, written
/// directly against the P_E / P_L tables and deliberately independent of
/// the engine code paths. The single shared interpretation is that the
/// first block's task counts as learned from the start in the backward
/// procedure, since nothing earlier can ever mark it.
mod oracle {
    use super::*;

    pub fn pe(case: &RandomCase, n: u32, t: &TaskId) -> f64 {
        case.summaries.eval[&n][t]
    }

    pub fn apply(mode: TransferMode, a: f64, b: f64) -> f64 {
        match mode {
            TransferMode::Ratio => a / b,
            TransferMode::Contrast => (a - b) / (a + b),
        }
    }

    pub fn mean(vs: &[f64]) -> Option<f64> {
        if vs.is_empty() {
            None
        } else {
            Some(vs.iter().sum::<f64>() / vs.len() as f64)
        }
    }

    pub fn ft(case: &RandomCase, mode: TransferMode) -> (BTreeMap<String, f64>, Option<f64>) {
        let mut values = BTreeMap::new();
        let mut order = Vec::new();
        let mut learned: Vec<&TaskId> = Vec::new();
        let mut pairs: Vec<(&TaskId, &TaskId)> = Vec::new();
        for (idx, tn) in case.summaries.lb_tasks.iter().enumerate() {
            let n = idx as u32 + 1;
            if learned.contains(&tn) {
                continue;
            }
            learned.push(tn);
            for t in &case.tasks {
                if learned.contains(&t) || pairs.contains(&(tn, t)) {
                    continue;
                }
                pairs.push((tn, t));
                let v = apply(mode, pe(case, n, t), pe(case, n - 1, t));
                values.insert(format!("{tn}->{t}"), v);
                order.push(v);
            }
        }
        let agg = mean(&order);
        (values, agg)
    }

    pub fn bt(case: &RandomCase, mode: TransferMode) -> (BTreeMap<String, f64>, Option<f64>) {
        let mut values = BTreeMap::new();
        let mut order = Vec::new();
        let mut learned: Vec<&TaskId> = Vec::new();
        let mut pairs: Vec<(&TaskId, &TaskId)> = Vec::new();
        if let Some(first) = case.summaries.lb_tasks.first() {
            learned.push(first);
        }
        for (idx, tn) in case.summaries.lb_tasks.iter().enumerate().skip(1) {
            let n = idx as u32 + 1;
            if !learned.contains(&tn) {
                learned.push(tn);
            }
            for t in &case.tasks {
                if t == tn || !learned.contains(&t) {
                    continue;
                }
                let unordered = if t < tn { (t, tn) } else { (tn, t) };
                if pairs.contains(&unordered) {
                    continue;
                }
                pairs.push(unordered);
                let v = apply(mode, pe(case, n, t), pe(case, n - 1, t));
                values.insert(format!("{tn}->{t}"), v);
                order.push(v);
            }
        }
        let agg = mean(&order);
        (values, agg)
    }

    pub fn pm(case: &RandomCase) -> (BTreeMap<String, f64>, Option<f64>) {
        let mut mrb: BTreeMap<&TaskId, u32> = BTreeMap::new();
        let mut maintenance: BTreeMap<&TaskId, Vec<f64>> = BTreeMap::new();
        for (idx, tn) in case.summaries.lb_tasks.iter().enumerate() {
            let n = idx as u32 + 1;
            mrb.insert(tn, n);
            for t in &case.tasks {
                if t == tn {
                    continue;
                }
                if let Some(&m) = mrb.get(t) {
                    maintenance
                        .entry(t)
                        .or_default()
                        .push(pe(case, n, t) - pe(case, m, t));
                }
            }
        }
        let mut per_task = BTreeMap::new();
        let mut order = Vec::new();
        for (t, vs) in &maintenance {
            let v = mean(vs).unwrap();
            per_task.insert(t.to_string(), v);
            order.push(v);
        }
        let agg = mean(&order);
        (per_task, agg)
    }

    /// Concatenated learning series per task, in block order.
    pub fn concat_ll(case: &RandomCase) -> BTreeMap<TaskId, Vec<f64>> {
        let mut out: BTreeMap<TaskId, Vec<f64>> = BTreeMap::new();
        for lb in case.summaries.learn.values() {
            out.entry(lb.task.clone()).or_default().extend(&lb.series);
        }
        out
    }

    pub fn rp(case: &RandomCase) -> (BTreeMap<String, f64>, Option<f64>) {
        let mut per_task = BTreeMap::new();
        let mut order = Vec::new();
        for (t, ll) in concat_ll(case) {
            let ste = &case.ste[&t].series[..ll.len()];
            let v = ll.iter().sum::<f64>() / ste.iter().sum::<f64>();
            per_task.insert(t.to_string(), v);
            order.push(v);
        }
        let agg = mean(&order);
        (per_task, agg)
    }

    /// Independent centered moving average with boundary clipping.
    pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
        let half = window / 2;
        let mut out = Vec::with_capacity(values.len());
        for i in 0..values.len() {
            let lo = i.saturating_sub(half);
            let hi = usize::min(i + half, values.len() - 1);
            let mut sum = 0.0;
            for v in &values[lo..=hi] {
                sum += v;
            }
            out.push(sum / (hi - lo + 1) as f64);
        }
        out
    }

    fn sat(series: &[f64]) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0;
        for (i, &v) in series.iter().enumerate() {
            if v > best {
                best = v;
                at = i + 1;
            }
        }
        (best, at)
    }

    pub fn se(case: &RandomCase, window: usize) -> (BTreeMap<String, f64>, Option<f64>) {
        let mut per_task = BTreeMap::new();
        let mut order = Vec::new();
        for (t, ll) in concat_ll(case) {
            let ste = &case.ste[&t].series[..ll.len()];
            let (lv, le) = sat(&smooth(&ll, window));
            let (sv, se_exp) = sat(&smooth(ste, window));
            let v = (lv / sv) * (se_exp as f64 / le as f64);
            per_task.insert(t.to_string(), v);
            order.push(v);
        }
        let agg = mean(&order);
        (per_task, agg)
    }
}

fn unit_map(r: &MetricResult) -> BTreeMap<String, f64> {
    r.per_unit
        .iter()
        .map(|u| (u.unit.clone(), u.value))
        .collect()
}

fn assert_result_close(
    label: &str,
    case_idx: usize,
    engine: &MetricResult,
    want_units: &BTreeMap<String, f64>,
    want_agg: Option<f64>,
    tol: f64,
) {
    let got_units = unit_map(engine);
    assert_eq!(
        got_units.keys().collect::<Vec<_>>(),
        want_units.keys().collect::<Vec<_>>(),
        "{label} case {case_idx}: unit sets differ"
    );
    for (unit, &want) in want_units {
        let got = got_units[unit];
        assert!(
            rel_close(got, want, tol),
            "{label} case {case_idx} unit {unit}: {got} vs {want}"
        );
    }
    match (engine.aggregate, want_agg) {
        (None, None) => {}
        (Some(a), Some(b)) => assert!(
            rel_close(a, b, tol),
            "{label} case {case_idx} aggregate: {a} vs {b}"
        ),
        (a, b) => panic!("{label} case {case_idx}: aggregate presence differs: {a:?} vs {b:?}"),
    }
}

#[test]
fn c03_transcription_equivalence() {
    report(
        "c03 metric-transcription equivalence (1000 random lifetimes)",
        || {
            let start = Instant::now();
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x0ACCE97);
            let window = 5;
            let tol = 1e-12;
            for i in 0..1000 {
                let case = random_case(&mut rng);
                for mode in [TransferMode::Ratio, TransferMode::Contrast] {
                    let (units, agg) = oracle::ft(&case, mode);
                    let engine = forward_transfer(&case.summaries, mode);
                    assert_result_close("FT", i, &engine, &units, agg, tol);
                    let (units, agg) = oracle::bt(&case, mode);
                    let engine = backward_transfer(&case.summaries, mode);
                    assert_result_close("BT", i, &engine, &units, agg, tol);
                }
                let (units, agg) = oracle::pm(&case);
                let engine = performance_maintenance(&case.summaries);
                assert_result_close("PM", i, &engine, &units, agg, tol);
                let (units, agg) = oracle::rp(&case);
                let engine = relative_performance(&case.summaries, &case.ste);
                assert_result_close("RP", i, &engine, &units, agg, tol);
                let (units, agg) = oracle::se(&case, window);
                let engine = sample_efficiency(&case.summaries, &case.ste, window).unwrap();
                assert_result_close("SE", i, &engine, &units, agg, tol);
            }
            let elapsed = start.elapsed();
            assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
        },
    );
}

// ---------------------------------------------------------------------------
// c04: closed-form checks on noise-free synthetic agents.

fn two_task_spec(pattern: Vec<usize>, lb_length: usize) -> ScenarioSpec {
    ScenarioSpec {
        tasks: vec![
            TaskVariants {
                task_name: "a".to_string(),
                variants: Vec::new(),
            },
            TaskVariants {
                task_name: "b".to_string(),
                variants: Vec::new(),
            },
        ],
        lb_length,
        eb_length_per_task: 4,
        scenario_type: ScenarioType::Custom,
        num_superblocks: 3,
        custom_pattern: Some(pattern),
        seed: 5,
    }
}

fn dynamics(name: &str, p0: f64, sat: f64, tau: f64, phi: f64) -> TaskDynamics {
    TaskDynamics {
        task_name: name.to_string(),
        variant_name: None,
        initial_perf: p0,
        saturation: sat,
        time_constant: tau,
        forgetting_rate: phi,
    }
}

fn summarize(
    params: &SyntheticAgentParams,
    spec: &ScenarioSpec,
    ste: &BTreeMap<TaskId, SteSource>,
) -> Preprocessed {
    let schedule = generate(spec).unwrap();
    let records = simulate_lifetime(params, &schedule, "fixture").unwrap();
    let lifetime = assemble_lifetime(&records).unwrap();
    preprocess(&lifetime, "performance", &PreprocessConfig::default(), ste).unwrap()
}

#[test]
fn c04_analytic_simulator_checks() {
    report("c04 analytic simulator checks (noise-free)", || {
        let no_ste = BTreeMap::new();

        // Perfect memory: nothing forgets, so maintenance is exactly zero.
        let params = SyntheticAgentParams {
            tasks: vec![
                dynamics("a", 1.0, 5.0, 8.0, 0.0),
                dynamics("b", 0.5, 3.0, 10.0, 0.0),
            ],
            transfer: Vec::new(),
            noise_sd: 0.0,
            seed: 9,
        };
        let p = summarize(&params, &two_task_spec(vec![0, 1], 30), &no_ste);
        let pm = performance_maintenance(&p.summaries);
        assert_eq!(
            pm.aggregate,
            Some(0.0),
            "perfect memory must give PM = 0 exactly"
        );

        // Forgetting: task a decays geometrically while b trains, so PM
        // equals the closed-form drop.
        let phi = 0.1;
        let (p0a, sata, taua) = (1.0, 5.0, 8.0);
        let lb = 30usize;
        let params = SyntheticAgentParams {
            tasks: vec![
                dynamics("a", p0a, sata, taua, phi),
                dynamics("b", 0.5, 3.0, 10.0, 0.0),
            ],
            transfer: Vec::new(),
            noise_sd: 0.0,
            seed: 9,
        };
        let p = summarize(&params, &two_task_spec(vec![0, 1], lb), &no_ste);
        let pm = performance_maintenance(&p.summaries).aggregate.unwrap();
        let decay_step = (-1.0 / taua).exp();
        let mut a_skill = p0a;
        for _ in 0..lb {
            a_skill = sata - (sata - a_skill) * decay_step;
        }
        let a_after = p0a + (a_skill - p0a) * (1.0 - phi).powi(lb as i32);
        let expected = a_after - a_skill;
        assert!(
            (pm - expected).abs() < 1e-9,
            "forgetting PM: {pm} vs closed form {expected}"
        );

        // Jumpstart: training a lifts b before b's first block, so FT in
        // ratio mode is the boosted-over-baseline closed form.
        let (p0b, satb) = (0.5, 3.0);
        let fraction = 0.4;
        let params = SyntheticAgentParams {
            tasks: vec![
                dynamics("a", 1.0, 5.0, 8.0, 0.0),
                dynamics("b", p0b, satb, 10.0, 0.0),
            ],
            transfer: vec![TransferEntry {
                source_task: "a".to_string(),
                source_variant: None,
                target_task: "b".to_string(),
                target_variant: None,
                fraction,
            }],
            noise_sd: 0.0,
            seed: 9,
        };
        let p = summarize(&params, &two_task_spec(vec![0, 1], 30), &no_ste);
        let ft = forward_transfer(&p.summaries, TransferMode::Ratio)
            .aggregate
            .unwrap();
        let boosted = p0b + fraction * (satb - p0b);
        let expected = boosted / p0b;
        assert!(
            (ft - expected).abs() < 1e-9,
            "jumpstart FT: {ft} vs closed form {expected}"
        );

        // Self-STE: the same dynamics as both lifelong agent and single-task
        // expert give identical curves, so RP and SE are exactly 1.
        let solo = SyntheticAgentParams {
            tasks: vec![dynamics("a", 1.0, 5.0, 8.0, 0.0)],
            transfer: Vec::new(),
            noise_sd: 0.0,
            seed: 9,
        };
        let spec = ScenarioSpec {
            tasks: vec![TaskVariants {
                task_name: "a".to_string(),
                variants: Vec::new(),
            }],
            lb_length: 25,
            eb_length_per_task: 4,
            scenario_type: ScenarioType::Condensed,
            num_superblocks: 3,
            custom_pattern: None,
            seed: 5,
        };
        let task = TaskId::new("a");
        let ste_records = simulate_ste_records(&solo, &task, &[25], "ste-a").unwrap();
        let mut sources = BTreeMap::new();
        sources.insert(task.clone(), ste_source(&ste_records).unwrap());
        let p = summarize(&solo, &spec, &sources);
        let rp = relative_performance(&p.summaries, &p.ste);
        assert_eq!(rp.aggregate, Some(1.0), "self-STE RP must be exactly 1");
        let se = sample_efficiency(&p.summaries, &p.ste, 9).unwrap();
        assert_eq!(se.aggregate, Some(1.0), "self-STE SE must be exactly 1");
    });
}

#[test]
fn c05_threshold_equivalence() {
    report("c05 ratio/contrast threshold equivalence (10000 pairs)", || {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x7123);
        for _ in 0..10_000 {
            // Log-uniform magnitudes cover six orders on each side.
            let a = 10f64.powf(-3.0 + 6.0 * rng.next_f64());
            let b = 10f64.powf(-3.0 + 6.0 * rng.next_f64());
            let r = ratio(a, b).unwrap();
            let c = contrast(a, b).unwrap();
            assert_eq!(r > 1.0, c > 0.0, "disagreement at a={a}, b={b}");
        }
    });
}

// ---------------------------------------------------------------------------
// c06: invariance properties.

#[test]
fn c06_invariance_suites() {
    report("c06 invariance suites (4 x 1000 cases)", || {
        let tol = 1e-9;

        // Maintenance is invariant under a common additive shift of every
        // evaluation score.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x51F7);
        for i in 0..1000 {
            let case = random_case(&mut rng);
            let shift = value_in(&mut rng, -3.0, 3.0);
            let mut shifted = case.summaries.clone();
            for row in shifted.eval.values_mut() {
                for v in row.values_mut() {
                    *v += shift;
                }
            }
            let base = performance_maintenance(&case.summaries);
            let moved = performance_maintenance(&shifted);
            assert_result_close("PM-shift", i, &moved, &unit_map(&base), base.aggregate, tol);
        }

        // Ratio-mode transfer is invariant under a common positive scale of
        // every evaluation score.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x5CA1E);
        for i in 0..1000 {
            let case = random_case(&mut rng);
            let scale = 10f64.powf(value_in(&mut rng, -2.0, 2.0));
            let mut scaled = case.summaries.clone();
            for row in scaled.eval.values_mut() {
                for v in row.values_mut() {
                    *v *= scale;
                }
            }
            let base = forward_transfer(&case.summaries, TransferMode::Ratio);
            let moved = forward_transfer(&scaled, TransferMode::Ratio);
            assert_result_close("FT-scale", i, &moved, &unit_map(&base), base.aggregate, tol);
            let base = backward_transfer(&case.summaries, TransferMode::Ratio);
            let moved = backward_transfer(&scaled, TransferMode::Ratio);
            assert_result_close("BT-scale", i, &moved, &unit_map(&base), base.aggregate, tol);
        }

        // Expert-relative metrics are invariant when lifelong and expert
        // curves are scaled together.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0xB07);
        for i in 0..1000 {
            let case = random_case(&mut rng);
            let scale = 10f64.powf(value_in(&mut rng, -2.0, 2.0));
            let mut scaled_summaries = case.summaries.clone();
            for lbk in scaled_summaries.learn.values_mut() {
                for v in &mut lbk.series {
                    *v *= scale;
                }
            }
            let mut scaled_ste = case.ste.clone();
            for curve in scaled_ste.values_mut() {
                for v in &mut curve.series {
                    *v *= scale;
                }
            }
            let base = relative_performance(&case.summaries, &case.ste);
            let moved = relative_performance(&scaled_summaries, &scaled_ste);
            assert_result_close("RP-scale", i, &moved, &unit_map(&base), base.aggregate, tol);
            let base = sample_efficiency(&case.summaries, &case.ste, 5).unwrap();
            let moved = sample_efficiency(&scaled_summaries, &scaled_ste, 5).unwrap();
            assert_result_close("SE-scale", i, &moved, &unit_map(&base), base.aggregate, tol);
        }

        // Rank correlation is invariant under strictly increasing transforms
        // of either variable.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x4A11);
        for i in 0..1000 {
            let n = 3 + rng.next_bounded(28) as usize;
            let xs: Vec<f64> = (0..n).map(|_| value_in(&mut rng, -5.0, 5.0)).collect();
            let ys: Vec<f64> = (0..n).map(|_| value_in(&mut rng, -5.0, 5.0)).collect();
            let fx: Vec<f64> = match i % 3 {
                0 => xs.iter().map(|x| 2.0 * x + 1.0).collect(),
                1 => xs.iter().map(|x| x.exp()).collect(),
                _ => xs.iter().map(|x| x * x * x).collect(),
            };
            let gy: Vec<f64> = ys.iter().map(|y| 0.5 * y - 7.0).collect();
            let base = spearman_correlation(&xs, &ys).unwrap();
            let moved = spearman_correlation(&fx, &gy).unwrap();
            assert_eq!(base.rho, moved.rho, "case {i}: rho changed");
            assert_eq!(base.p, moved.p, "case {i}: p changed");
        }
    });
}

// ---------------------------------------------------------------------------
// c07: golden statistics fixtures.

/// Strict relative comparison for the golden cross-check.
fn rel_strict(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        return a.abs() <= tol;
    }
    ((a - b) / b).abs() <= tol
}

#[test]
fn c07_golden_statistics() {
    report("c07 golden statistics cross-check", || {
        let doc: serde_json::Value =
            serde_json::from_str(include_str!("golden/stats_golden.json")).unwrap();
        let tol = 1e-9;
        let floats = |v: &serde_json::Value| -> Vec<f64> {
            v.as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect()
        };
        let t_cases = doc["t_tests"].as_array().unwrap();
        assert_eq!(t_cases.len(), 100);
        for (i, case) in t_cases.iter().enumerate() {
            let values = floats(&case["values"]);
            let threshold = case["threshold"].as_f64().unwrap();
            let res = one_tailed_t_test(&values, threshold).unwrap();
            let t_ref = case["t"].as_f64().unwrap();
            let p_ref = case["p"].as_f64().unwrap();
            assert!(
                rel_strict(res.t, t_ref, tol),
                "t case {i}: t {} vs {t_ref}",
                res.t
            );
            assert!(
                rel_strict(res.p, p_ref, tol),
                "t case {i}: p {} vs {p_ref}",
                res.p
            );
            assert_eq!(res.df, case["df"].as_u64().unwrap());
        }
        let sp_cases = doc["spearman"].as_array().unwrap();
        assert_eq!(sp_cases.len(), 100);
        for (i, case) in sp_cases.iter().enumerate() {
            let xs = floats(&case["x"]);
            let ys = floats(&case["y"]);
            let res = spearman_correlation(&xs, &ys).unwrap();
            let rho_ref = case["rho"].as_f64().unwrap();
            let p_ref = case["p"].as_f64().unwrap();
            assert!(
                rel_strict(res.rho, rho_ref, tol),
                "spearman case {i}: rho {} vs {rho_ref}",
                res.rho
            );
            assert!(
                rel_strict(res.p, p_ref, tol),
                "spearman case {i}: p {} vs {p_ref}",
                res.p
            );
        }
    });
}

// ---------------------------------------------------------------------------
// c08: scenario structure.

fn three_by_two_spec(scenario_type: ScenarioType) -> ScenarioSpec {
    ScenarioSpec {
        tasks: ["alpha", "beta", "gamma"]
            .iter()
            .map(|name| TaskVariants {
                task_name: name.to_string(),
                variants: vec!["v1".to_string(), "v2".to_string()],
            })
            .collect(),
        lb_length: 60,
        eb_length_per_task: 5,
        scenario_type,
        num_superblocks: 3,
        custom_pattern: None,
        seed: 77,
    }
}

fn learning_blocks(schedule: &lleval_core::BlockSchedule) -> Vec<(TaskId, usize)> {
    schedule
        .blocks
        .iter()
        .filter(|b| b.block_type == BlockType::Learning)
        .map(|b| b.segments[0].clone())
        .collect()
}

#[test]
fn c08_scenario_structure() {
    report("c08 scenario structural checks", || {
        let condensed = generate(&three_by_two_spec(ScenarioType::Condensed)).unwrap();
        let lbs = learning_blocks(&condensed);
        let ebs = condensed
            .blocks
            .iter()
            .filter(|b| b.block_type == BlockType::Evaluation)
            .count();
        assert_eq!(lbs.len(), 6);
        assert_eq!(ebs, 7);
        assert!(lbs.iter().all(|(_, len)| *len == 60));
        let condensed_variants: std::collections::BTreeSet<&TaskId> =
            lbs.iter().map(|(t, _)| t).collect();
        assert_eq!(condensed_variants.len(), 6, "each variant exactly once");
        for block in &condensed.blocks {
            if block.block_type == BlockType::Evaluation {
                assert_eq!(block.segments.len(), 6);
                assert!(block.segments.iter().all(|(_, len)| *len == 5));
            }
        }

        let dispersed = generate(&three_by_two_spec(ScenarioType::Dispersed)).unwrap();
        let lbs_d = learning_blocks(&dispersed);
        let ebs_d = dispersed
            .blocks
            .iter()
            .filter(|b| b.block_type == BlockType::Evaluation)
            .count();
        assert_eq!(lbs_d.len(), 18);
        assert_eq!(ebs_d, 19);
        assert!(lbs_d.iter().all(|(_, len)| *len == 20), "one third length");
        for superblock in lbs_d.chunks(6) {
            let seen: std::collections::BTreeSet<&TaskId> =
                superblock.iter().map(|(t, _)| t).collect();
            assert_eq!(seen.len(), 6, "every variant once per superblock");
        }

        let mut condensed_totals: BTreeMap<&TaskId, usize> = BTreeMap::new();
        for (t, len) in &lbs {
            *condensed_totals.entry(t).or_default() += len;
        }
        let mut dispersed_totals: BTreeMap<&TaskId, usize> = BTreeMap::new();
        for (t, len) in &lbs_d {
            *dispersed_totals.entry(t).or_default() += len;
        }
        assert_eq!(condensed_totals, dispersed_totals);
        assert!(condensed_totals.values().all(|&v| v == 60));
    });
}

// ---------------------------------------------------------------------------
// c09: end-to-end determinism through the binary.

const PIPELINE_CONFIG: &str = r#"
[scenario]
lb_length = 40
eb_length_per_task = 4
scenario_type = "condensed"
num_superblocks = 2
seed = 2026

[[scenario.tasks]]
task_name = "alpha"

[[scenario.tasks]]
task_name = "beta"

[[scenario.tasks]]
task_name = "gamma"

[agent]
noise_sd = 0.02
seed = 0

[[agent.tasks]]
task_name = "alpha"
initial_perf = 1.0
saturation = 5.0
time_constant = 9.0
forgetting_rate = 0.05

[[agent.tasks]]
task_name = "beta"
initial_perf = 1.2
saturation = 4.0
time_constant = 12.0
forgetting_rate = 0.08

[[agent.tasks]]
task_name = "gamma"
initial_perf = 0.8
saturation = 4.5
time_constant = 7.0
forgetting_rate = 0.03

[[agent.transfer]]
source_task = "alpha"
target_task = "beta"
fraction = 0.3
"#;

type FileBytes = Vec<(String, Vec<u8>)>;

/// Recursive (relative path, bytes) listing in sorted order.
fn dir_bytes(root: &Path) -> FileBytes {
    fn walk(root: &Path, dir: &Path, out: &mut FileBytes) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn c09_pipeline_determinism() {
    report("c09 end-to-end pipeline determinism", || {
        let start = Instant::now();
        let base = std::env::temp_dir().join(format!("lleval-acceptance-{}", std::process::id()));
        let _ = fs::remove_dir_all(&base);
        fs::create_dir_all(&base).unwrap();
        let config = base.join("config.toml");
        fs::write(&config, PIPELINE_CONFIG).unwrap();

        let run_pipeline = |tag: &str| -> (FileBytes, Vec<u8>, Vec<u8>) {
            let out_dir = base.join(tag);
            let sim = lleval_bin()
                .arg("simulate")
                .arg("--config")
                .arg(&config)
                .arg("--out-dir")
                .arg(&out_dir)
                .args(["--lifetimes", "11"])
                .output()
                .unwrap();
            assert!(
                sim.status.success(),
                "{}",
                String::from_utf8_lossy(&sim.stderr)
            );

            let mut run_paths: Vec<_> = fs::read_dir(&out_dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.is_file())
                .collect();
            run_paths.sort();
            assert_eq!(run_paths.len(), 11);
            let mut cmd = lleval_bin();
            cmd.args(["--format", "json", "metrics"]);
            for p in &run_paths {
                cmd.arg(p);
            }
            cmd.arg("--ste-dir").arg(out_dir.join("ste"));
            let metrics = cmd.output().unwrap();
            assert!(
                metrics.status.success(),
                "{}",
                String::from_utf8_lossy(&metrics.stderr)
            );
            let metrics_path = base.join(format!("{tag}-metrics.json"));
            fs::write(&metrics_path, &metrics.stdout).unwrap();

            let agg = lleval_bin()
                .args(["--format", "json", "aggregate"])
                .arg(&metrics_path)
                .output()
                .unwrap();
            assert!(
                agg.status.success(),
                "{}",
                String::from_utf8_lossy(&agg.stderr)
            );
            (dir_bytes(&out_dir), metrics.stdout, agg.stdout)
        };

        let first = run_pipeline("x");
        let second = run_pipeline("y");
        assert_eq!(first.0, second.0, "simulated artifacts differ");
        assert_eq!(first.1, second.1, "metrics output differs");
        assert_eq!(first.2, second.2, "aggregate output differs");
        assert!(!first.1.is_empty() && !first.2.is_empty());

        let _ = fs::remove_dir_all(&base);
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    });
}

// ---------------------------------------------------------------------------
// c10: noise robustness.

#[test]
fn c10_noise_robustness() {
    report("c10 noise-robustness monotonicity", || {
        let spec = ScenarioSpec {
            tasks: ["alpha", "beta", "gamma"]
                .iter()
                .map(|name| TaskVariants {
                    task_name: name.to_string(),
                    variants: Vec::new(),
                })
                .collect(),
            lb_length: 40,
            eb_length_per_task: 6,
            scenario_type: ScenarioType::Condensed,
            num_superblocks: 2,
            custom_pattern: None,
            seed: 404,
        };
        let base = SyntheticAgentParams {
            tasks: vec![
                dynamics("alpha", 2.0, 6.0, 9.0, 0.05),
                dynamics("beta", 2.2, 5.0, 12.0, 0.08),
                dynamics("gamma", 2.5, 5.5, 7.0, 0.03),
            ],
            transfer: vec![TransferEntry {
                source_task: "alpha".to_string(),
                source_variant: None,
                target_task: "beta".to_string(),
                target_variant: None,
                fraction: 0.3,
            }],
            noise_sd: 0.0,
            seed: 0,
        };
        let (protocol, _warnings) = build_protocol(&spec, 11, 777).unwrap();

        let aggregates = |noise_sd: f64| -> BTreeMap<String, f64> {
            let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for (i, &seed) in protocol.lifetime_seeds.iter().enumerate() {
                let mut mix = SplitMix64::new(seed);
                let mut spec_i = spec.clone();
                spec_i.seed = mix.next_u64();
                let mut params = base.clone();
                params.seed = mix.next_u64();
                params.noise_sd = noise_sd;
                let schedule = generate(&spec_i).unwrap();
                let records =
                    simulate_lifetime(&params, &schedule, &format!("run-{i:03}")).unwrap();
                let lifetime = assemble_lifetime(&records).unwrap();
                let p = preprocess(
                    &lifetime,
                    "performance",
                    &PreprocessConfig::default(),
                    &BTreeMap::new(),
                )
                .unwrap();
                for result in [
                    performance_maintenance(&p.summaries),
                    forward_transfer(&p.summaries, TransferMode::Ratio),
                    backward_transfer(&p.summaries, TransferMode::Ratio),
                ] {
                    let value = result.aggregate.expect("aggregate defined");
                    let entry = sums.entry(result.metric.to_string()).or_insert((0.0, 0));
                    entry.0 += value;
                    entry.1 += 1;
                }
            }
            sums.into_iter()
                .map(|(k, (sum, n))| (k, sum / n as f64))
                .collect()
        };

        // The noise scale is a fraction of the measure range, here the top
        // saturation minus the lowest starting skill.
        let range = 6.0 - 2.0;
        let baseline = aggregates(0.0);
        let deviations: Vec<BTreeMap<String, f64>> = [0.1, 0.01, 0.001]
            .iter()
            .map(|frac| {
                aggregates(frac * range)
                    .into_iter()
                    .map(|(k, v)| {
                        let d = (v - baseline[&k]).abs();
                        (k, d)
                    })
                    .collect()
            })
            .collect();
        for metric in ["PM", "FT", "BT"] {
            let d1 = deviations[0][metric];
            let d2 = deviations[1][metric];
            let d3 = deviations[2][metric];
            assert!(
                d1 > d2 && d2 > d3 && d3 > 0.0,
                "{metric}: deviations not shrinking with noise: {d1} {d2} {d3}"
            );
        }
    });
}
