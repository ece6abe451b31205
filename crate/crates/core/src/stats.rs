//! Statistical machinery for deciding whether metric results are reliable:
//! sample-size planning, one-tailed t and exact binomial threshold tests,
//! cross-run aggregation, Spearman correlation, and the compute-cost
//! overhead ratio.
//!
//! The special functions underneath (normal quantile, log-gamma, regularized
//! incomplete beta) are implemented here rather than pulled from a stats
//! crate so their accuracy is pinned by tests against reference values; the
//! quantile uses Wichura's rational approximation, log-gamma a Lanczos
//! series, and the incomplete beta a modified Lentz continued fraction.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{MetricName, MetricResult, TransferMode};

pub mod codes {
    pub const E_DEGENERATE: &str = "E_DEGENERATE";
    pub const E_LENGTH_MISMATCH: &str = "E_LENGTH_MISMATCH";
    pub const E_TOO_FEW: &str = "E_TOO_FEW";
    pub const E_NONPOSITIVE: &str = "E_NONPOSITIVE";
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("too few observations: {found}, need at least {needed}")]
    TooFew { found: usize, needed: usize },
    #[error("non-positive input: {0}")]
    NonPositive(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::Degenerate(_) => codes::E_DEGENERATE,
            StatsError::LengthMismatch { .. } => codes::E_LENGTH_MISMATCH,
            StatsError::TooFew { .. } => codes::E_TOO_FEW,
            StatsError::NonPositive(_) => codes::E_NONPOSITIVE,
        }
    }
}

pub mod special {
    //! Scalar special functions, accurate to well under 1e-9 relative over
    //! the ranges the statistics above exercise.

    /// Standard normal quantile by Wichura's PPND16 rational approximation.
    ///
    /// # Panics
    /// If `p` is outside (0, 1).
    pub fn norm_quantile(p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "norm_quantile requires p in (0, 1), got {p}");
        let q = p - 0.5;
        if q.abs() <= 0.425 {
            let r = 0.180625 - q * q;
            return q * rational(r, &CENTRAL_NUM, &CENTRAL_DEN);
        }
        let r = if q < 0.0 { p } else { 1.0 - p };
        let r = (-r.ln()).sqrt();
        let val = if r <= 5.0 {
            rational(r - 1.6, &TAIL_NUM, &TAIL_DEN)
        } else {
            rational(r - 5.0, &FAR_TAIL_NUM, &FAR_TAIL_DEN)
        };
        if q < 0.0 {
            -val
        } else {
            val
        }
    }

    const CENTRAL_NUM: [f64; 8] = [
        3.387_132_872_796_366_5,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_46,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const CENTRAL_DEN: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_595,
        39_307.895_800_092_71,
        28_729.085_735_721_942,
        5_226.495_278_852_545,
    ];
    const TAIL_NUM: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const TAIL_DEN: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const FAR_TAIL_NUM: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_87,
        0.026_532_189_526_576_123,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const FAR_TAIL_DEN: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_9,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_055e-4,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];

    /// Horner evaluation of num(r)/den(r), coefficients in ascending order.
    fn rational(r: f64, num: &[f64; 8], den: &[f64; 8]) -> f64 {
        let mut n = num[7];
        let mut d = den[7];
        for i in (0..7).rev() {
            n = n * r + num[i];
            d = d * r + den[i];
        }
        n / d
    }

    const LANCZOS_G: f64 = 7.0;
    const LANCZOS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];

    /// Natural log of the gamma function for positive arguments, via the
    /// Lanczos approximation with reflection below one half.
    pub fn ln_gamma(x: f64) -> f64 {
        assert!(x.is_finite(), "ln_gamma requires a finite argument, got {x}");
        if x < 0.5 {
            // Reflection; only hit for x in (0, 0.5) in this crate.
            return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln()
                - ln_gamma(1.0 - x);
        }
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }

    /// Regularized incomplete beta function I_x(a, b) by the continued
    /// fraction of Didonato and Morris as given in the usual modified Lentz
    /// form, switching to the complement for fast convergence.
    pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
        assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_cf(a, b, x) / a
        } else {
            1.0 - front * beta_cf(b, a, 1.0 - x) / b
        }
    }

    fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
        const MAX_ITER: usize = 300;
        const EPS: f64 = 1e-16;
        const TINY: f64 = 1e-300;

        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m_f = m as f64;
            let m2 = 2.0 * m_f;
            let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Upper-tail probability of Student's t with `df` degrees of freedom.
    pub fn student_t_sf(t: f64, df: f64) -> f64 {
        assert!(df > 0.0, "degrees of freedom must be positive");
        let x = df / (df + t * t);
        let half_tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
        if t >= 0.0 {
            half_tail
        } else {
            1.0 - half_tail
        }
    }
}

/// Smallest number of runs needed so that, with two-sided level `alpha` and
/// power `1 - beta`, the run mean pins the true mean to within `k` standard
/// deviations: ceil(((z_{1-alpha/2} + z_{1-beta}) / k)^2), never below 1.
///
/// # Panics
/// If `k` is not positive or `alpha`/`beta` are outside (0, 1).
pub fn required_sample_size(k: f64, alpha: f64, beta: f64) -> usize {
    assert!(k > 0.0, "k must be positive, got {k}");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1), got {alpha}");
    assert!(beta > 0.0 && beta < 1.0, "beta must be in (0, 1), got {beta}");
    let z = special::norm_quantile(1.0 - alpha / 2.0) + special::norm_quantile(1.0 - beta);
    let n = (z / k).powi(2).ceil();
    (n.max(1.0)) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: u64,
}

/// One-sample t-test of mean > threshold. Returns the statistic, the
/// upper-tail p-value, and n - 1 degrees of freedom.
pub fn one_tailed_t_test(values: &[f64], threshold: f64) -> Result<TTest, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::Degenerate(format!(
            "need at least 2 values for a t-test, got {n}"
        )));
    }
    let n_f = n as f64;
    let mean = values.iter().sum::<f64>() / n_f;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n_f - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(StatsError::Degenerate(
            "sample standard deviation is zero".to_string(),
        ));
    }
    let t = (mean - threshold) / (sd / n_f.sqrt());
    let df = n - 1;
    let p = special::student_t_sf(t, df as f64);
    Ok(TTest {
        t,
        p,
        df: df as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinarizedTest {
    pub successes: u64,
    pub n: u64,
    pub p: f64,
    pub significant: bool,
}

/// Binarizes values against the threshold and tests the success count with
/// an exact one-sided binomial tail under a 0.5 null.
pub fn binarized_threshold_test(values: &[f64], threshold: f64, alpha: f64) -> BinarizedTest {
    let n = values.len() as u64;
    let successes = values.iter().filter(|&&v| v > threshold).count() as u64;
    let p = binomial_upper_tail(n, successes);
    BinarizedTest {
        successes,
        n,
        p,
        significant: p < alpha,
    }
}

/// P(X >= k) for X ~ Binomial(n, 0.5). Exact term-by-term summation; the
/// log-space fallback only matters for n beyond any realistic run count.
fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if n <= 1000 {
        let half_n = 0.5f64.powi(n as i32);
        let mut coef = 1.0;
        for i in 1..=k {
            coef = coef * ((n - k + i) as f64) / (i as f64);
        }
        let mut terms = Vec::with_capacity((n - k + 1) as usize);
        let mut c = coef;
        for j in k..=n {
            terms.push(c * half_n);
            c = c * ((n - j) as f64) / ((j + 1) as f64);
        }
        terms.iter().rev().sum()
    } else {
        let ln_half = n as f64 * 0.5f64.ln();
        let ln_n1 = special::ln_gamma(n as f64 + 1.0);
        let mut sum = 0.0;
        for j in k..=n {
            let ln_c = ln_n1
                - special::ln_gamma(j as f64 + 1.0)
                - special::ln_gamma((n - j) as f64 + 1.0);
            sum += (ln_c + ln_half).exp();
        }
        sum.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub metric: MetricName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<TransferMode>,
    /// Runs contributing a defined aggregate.
    pub n: usize,
    /// Runs that produced no aggregate for this metric.
    pub excluded: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); absent below 2 runs.
    pub sd: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    /// Aligned plain-text rendering, one row per (metric, mode), values as
    /// mean ± sd.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8}{:<10}{:>4}{:>10}  value",
            "metric", "mode", "n", "excluded"
        );
        for row in &self.rows {
            let mode = row
                .mode
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".to_string());
            let value = match (row.mean, row.sd) {
                (Some(m), Some(s)) => format!("{m:.6} \u{b1} {s:.6}"),
                (Some(m), None) => format!("{m:.6} (single run)"),
                _ => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<8}{mode:<10}{:>4}{:>10}  {value}",
                row.metric.to_string(),
                row.n,
                row.excluded
            );
        }
        out
    }
}

/// Collects per-run metric aggregates into mean ± sd rows, one per
/// (metric, mode) pair seen anywhere. Runs without a defined aggregate for a
/// row are excluded from its statistics and counted.
pub fn aggregate_runs(runs: &[Vec<MetricResult>]) -> AggregateTable {
    let mut keys: BTreeSet<(MetricName, Option<TransferMode>)> = BTreeSet::new();
    for run in runs {
        for r in run {
            keys.insert((r.metric, r.mode));
        }
    }
    let mut rows = Vec::new();
    for (metric, mode) in keys {
        let values: Vec<f64> = runs
            .iter()
            .filter_map(|run| {
                run.iter()
                    .find(|r| r.metric == metric && r.mode == mode)
                    .and_then(|r| r.aggregate)
            })
            .collect();
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let sd = (n > 1).then(|| {
            let m = mean.expect("mean exists when n > 1");
            (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        });
        rows.push(AggregateRow {
            metric,
            mode,
            n,
            excluded: runs.len() - n,
            mean,
            sd,
            values,
        });
    }
    AggregateTable { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    pub p: f64,
}

/// Spearman rank correlation with average ranks for ties. The p-value uses
/// the t approximation with n - 2 degrees of freedom, two-sided; perfect
/// correlations fall back to the permutation bound 2/n!.
pub fn spearman_correlation(xs: &[f64], ys: &[f64]) -> Result<Spearman, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFew { found: n, needed: 3 });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let rho = pearson(&rx, &ry).ok_or_else(|| {
        StatsError::Degenerate("an input has zero rank variance (all values tied)".to_string())
    })?;
    let rho = rho.clamp(-1.0, 1.0);
    let p = if rho.abs() == 1.0 {
        two_over_factorial(n)
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        2.0 * special::student_t_sf(t.abs(), df)
    };
    Ok(Spearman { rho, p })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 averaged over the tie group.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn two_over_factorial(n: usize) -> f64 {
    if n <= 20 {
        2.0 / (1..=n as u64).product::<u64>() as f64
    } else {
        (std::f64::consts::LN_2 - special::ln_gamma(n as f64 + 1.0)).exp()
    }
}

/// Ratio of per-experience cost in the multi-task setting to the
/// single-task setting: (multi seconds per LX) / (single seconds per LX).
pub fn cost_overhead(
    raw_multi_seconds: f64,
    total_lx_multi: u64,
    raw_single_seconds: f64,
    total_lx_single: u64,
) -> Result<f64, StatsError> {
    for (name, v) in [
        ("raw_multi_seconds", raw_multi_seconds),
        ("raw_single_seconds", raw_single_seconds),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(StatsError::NonPositive(format!("{name} = {v}")));
        }
    }
    for (name, v) in [
        ("total_lx_multi", total_lx_multi),
        ("total_lx_single", total_lx_single),
    ] {
        if v == 0 {
            return Err(StatsError::NonPositive(format!("{name} = 0")));
        }
    }
    let multi_rate = raw_multi_seconds / total_lx_multi as f64;
    let single_rate = raw_single_seconds / total_lx_single as f64;
    Ok(multi_rate / single_rate)
}
