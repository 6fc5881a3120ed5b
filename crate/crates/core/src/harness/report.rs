//! Aggregation of experiment records: per-cell statistics, fitted
//! constants and pass/fail verdicts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, Preset};
use crate::error::{Error, Result};
use crate::theory::FittedConstants;

/// Statistics computed by exhaustive search or read off the graph; all
/// others are greedy or certificate surrogates.
const EXACT_STATS: [&str; 4] = ["max_degree", "mean_degree", "nsim_exact", "tau_exact"];

pub const DEGREE_STABILITY_MAX: f64 = 2.0;
pub const TAU_STABILITY_MAX: f64 = 3.0;
pub const NSIM_RATIO_MAX: f64 = 8.0;
pub const NSIM_LINEARITY_MAX: f64 = 2.0;
pub const VARIANCE_FACTOR: f64 = 4.0;
pub const VARIANCE_STD_ERRORS: f64 = 3.0;
pub const LLL_TERMINATION_MIN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub exact: bool,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    /// Sample variance (divisor `count - 1`; zero for a single value).
    pub variance: f64,
}

impl StatSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    fn of(name: &str, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (mean, variance) = mean_var(&v);
        StatSummary {
            exact: EXACT_STATS.contains(&name),
            count: v.len(),
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            mean,
            variance,
        }
    }
}

/// Linear interpolation between order statistics of sorted `v`.
fn quantile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi / lo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub preset: Preset,
    pub cell: usize,
    pub n: usize,
    pub k: usize,
    pub r_n: f64,
    pub cat_size: usize,
    pub trials: usize,
    pub errors: usize,
    /// Means over the cell's records of `Δ`, `ζ` and the admit bound.
    pub delta: f64,
    pub zeta: f64,
    pub admit_bound: f64,
    pub stats: BTreeMap<String, StatSummary>,
}

/// Groups records by (preset, cell) and summarizes every statistic.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(Preset, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.preset, r.cell)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((preset, cell), recs)| {
            let first = recs[0];
            let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in &recs {
                for (k, v) in &r.measured {
                    values.entry(k.as_str()).or_default().push(*v);
                }
            }
            let theory_mean = |f: fn(&crate::theory::BoundReport) -> f64| {
                let v: Vec<f64> = recs.iter().filter_map(|r| r.theory.as_ref().map(f)).collect();
                mean_var(&v).0
            };
            CellSummary {
                preset,
                cell,
                n: first.config.n,
                k: first.k,
                r_n: first.config.r_n,
                cat_size: first.config.categorical.cat_size(),
                trials: recs.len(),
                errors: recs.iter().filter(|r| r.error.is_some()).count(),
                delta: theory_mean(|t| t.delta),
                zeta: theory_mean(|t| t.zeta),
                admit_bound: theory_mean(|t| t.admit_bound),
                stats: values
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), StatSummary::of(k, &v)))
                    .collect(),
            }
        })
        .collect()
}

/// Constants fitted as min/max of normalized measurements, with stability
/// diagnostics: the max/min ratio of per-`n` medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub distinct_n: usize,
    /// Range of `max_degree / Δ`.
    pub degree: Option<(f64, f64)>,
    /// Range of `k τ / Δ`, with the greedy size for `τ`.
    pub tau: Option<(f64, f64)>,
    /// Range of `N_sim r^d / (k #Y)`; the lower end uses the greedy k-way
    /// size, the upper end the grid certificate.
    pub nsim: Option<(f64, f64)>,
    pub degree_stability: Option<f64>,
    pub tau_stability: Option<f64>,
    pub nsim_stability: Option<f64>,
    /// Some fitted range collapsed to a single value.
    pub degenerate: bool,
}

impl FitReport {
    /// Fitted constants, with one in place of families without data.
    pub fn constants(&self) -> FittedConstants {
        let (gamma1, gamma2) = self.degree.unwrap_or((1.0, 1.0));
        let (lambda1, lambda2) = self.tau.unwrap_or((1.0, 1.0));
        let (beta1, c_upper) = self.nsim.unwrap_or((1.0, 1.0));
        FittedConstants {
            gamma1,
            gamma2,
            lambda1,
            lambda2,
            beta1,
            c_upper,
        }
    }
}

pub fn fit_constants(records: &[ExperimentRecord]) -> Result<FitReport> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.config.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fitting needs at least 2 distinct n, got {}",
            ns.len()
        )));
    }
    let family = |f: &dyn Fn(&ExperimentRecord) -> Option<f64>| {
        let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in records {
            if let Some(v) = f(r).filter(|v| v.is_finite()) {
                by_n.entry(r.config.n).or_default().push(v);
            }
        }
        by_n
    };
    let range = |by_n: &BTreeMap<usize, Vec<f64>>| {
        let all = by_n.values().flatten().copied();
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        (lo <= hi).then_some((lo, hi))
    };
    let stability = |by_n: &BTreeMap<usize, Vec<f64>>| {
        (by_n.len() >= 2).then(|| spread(by_n.values().map(|v| median(v))))
    };
    let delta = |r: &ExperimentRecord| r.theory.map(|t| t.delta).filter(|&d| d > 0.0);
    let degree = family(&|r| Some(r.measured.get("max_degree")? / delta(r)?));
    let tau = family(&|r| Some(r.k as f64 * r.measured.get("tau_greedy")? / delta(r)?));
    let scale = |r: &ExperimentRecord| {
        libm::pow(r.config.r_n, r.config.d as f64) / (r.k as f64 * r.config.categorical.cat_size() as f64)
    };
    let nsim_lo = family(&|r| Some(r.measured.get("nsim_greedy_kway")? * scale(r)));
    let nsim_hi = family(&|r| Some(r.measured.get("nsim_upper_grid")? * scale(r)));
    let nsim = match (range(&nsim_lo), range(&nsim_hi)) {
        (Some((lo, _)), Some((_, hi))) => Some((lo, hi)),
        _ => None,
    };
    let degree_range = range(&degree);
    let tau_range = range(&tau);
    let degenerate = [degree_range, tau_range, nsim]
        .iter()
        .flatten()
        .any(|&(lo, hi)| hi - lo <= 1e-12 * hi.abs().max(1.0));
    Ok(FitReport {
        distinct_n: ns.len(),
        degree: degree_range,
        tau: tau_range,
        nsim,
        degree_stability: stability(&degree),
        tau_stability: stability(&tau),
        nsim_stability: stability(&nsim_lo),
        degenerate,
    })
}

/// Outcome of one acceptance check on aggregated records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub preset: Preset,
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} {}: value {:.4}, threshold {:.4} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.preset,
            self.check,
            self.value,
            self.threshold,
            self.detail
        )
    }
}

fn values<'a>(recs: impl IntoIterator<Item = &'a ExperimentRecord>, key: &str) -> Vec<f64> {
    recs.into_iter().filter_map(|r| r.measured.get(key).copied()).collect()
}

fn by<'a, K: Ord>(
    recs: &[&'a ExperimentRecord],
    key: impl Fn(&ExperimentRecord) -> K,
) -> BTreeMap<K, Vec<&'a ExperimentRecord>> {
    let mut out: BTreeMap<K, Vec<&ExperimentRecord>> = BTreeMap::new();
    for &r in recs {
        out.entry(key(r)).or_default().push(r);
    }
    out
}

fn fmt_list(items: impl IntoIterator<Item = (String, f64)>) -> String {
    items
        .into_iter()
        .map(|(k, v)| format!("{k}: {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks for every preset present in `records`.
pub fn verdicts(records: &[ExperimentRecord]) -> Vec<Verdict> {
    let by_preset = by(&records.iter().collect::<Vec<_>>(), |r| r.preset);
    let mut out = Vec::new();
    for (preset, recs) in by_preset {
        let mut push = |check: &str, value: f64, threshold: f64, pass: bool, detail: String| {
            out.push(Verdict {
                preset,
                check: check.to_string(),
                value,
                threshold,
                pass,
                detail,
            })
        };
        match preset {
            Preset::DegreeScaling => {
                let medians: Vec<(usize, f64)> = by(&recs, |r| r.config.n)
                    .into_iter()
                    .map(|(n, rs)| (n, median(&values(rs, "degree_ratio"))))
                    .collect();
                let s = spread(medians.iter().map(|m| m.1));
                push(
                    "stability of per-n median max_degree/Δ",
                    s,
                    DEGREE_STABILITY_MAX,
                    s < DEGREE_STABILITY_MAX,
                    fmt_list(medians.iter().map(|(n, m)| (format!("n={n}"), *m))),
                );
            }
            Preset::TauTradeoff => {
                for (n, rs) in by(&recs, |r| r.config.n) {
                    let medians: Vec<(usize, f64)> = by(&rs, |r| r.k)
                        .into_iter()
                        .map(|(k, rs)| (k, median(&values(rs, "k_tau_greedy"))))
                        .collect();
                    let s = spread(medians.iter().map(|m| m.1));
                    push(
                        &format!("stability over k of median k·τ_greedy at n={n}"),
                        s,
                        TAU_STABILITY_MAX,
                        s < TAU_STABILITY_MAX,
                        fmt_list(medians.iter().map(|(k, m)| (format!("k={k}"), *m))),
                    );
                }
            }
            Preset::NsimBracket => {
                for (n, rs) in by(&recs, |r| r.config.n) {
                    let per_k = by(&rs, |r| r.k);
                    let ratios: Vec<(usize, f64)> = per_k
                        .iter()
                        .map(|(&k, rs)| (k, median(&values(rs.iter().copied(), "nsim_ratio"))))
                        .collect();
                    let worst = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
                    push(
                        &format!("median nsim_upper_grid/nsim_greedy_kway at n={n}"),
                        worst,
                        NSIM_RATIO_MAX,
                        worst < NSIM_RATIO_MAX,
                        fmt_list(ratios.iter().map(|(k, m)| (format!("k={k}"), *m))),
                    );
                    for stat in ["nsim_greedy_kway", "nsim_upper_grid"] {
                        let per: Vec<(usize, f64)> = per_k
                            .iter()
                            .map(|(&k, rs)| (k, median(&values(rs.iter().copied(), stat)) / k as f64))
                            .collect();
                        let s = spread(per.iter().map(|m| m.1));
                        push(
                            &format!("stability over k of median {stat}/k at n={n}"),
                            s,
                            NSIM_LINEARITY_MAX,
                            s < NSIM_LINEARITY_MAX,
                            fmt_list(per.iter().map(|(k, m)| (format!("k={k}"), *m))),
                        );
                    }
                }
            }
            Preset::VarianceNsim => {
                for (cell, rs) in by(&recs, |r| r.cell) {
                    let v = values(rs.iter().copied(), "nsim_exact");
                    let m = moments(&v);
                    let threshold = VARIANCE_FACTOR * m.mean + VARIANCE_STD_ERRORS * m.se_var_minus_4mean;
                    push(
                        &format!(
                            "var(nsim_exact) <= 4 mean + 3 se at cell {cell} (n={}, k={})",
                            rs[0].config.n, rs[0].k
                        ),
                        m.variance,
                        threshold,
                        m.variance <= threshold,
                        format!("mean {:.4}, se {:.4}, trials {}", m.mean, m.se_var_minus_4mean, v.len()),
                    );
                }
            }
            Preset::VarianceTau => {
                for ((n, k), rs) in by(&recs, |r| (r.config.n, r.k)) {
                    let mut points: Vec<(f64, f64)> = by(&rs, |r| r.cell)
                        .into_values()
                        .map(|rs| {
                            let delta = mean_var(
                                &rs.iter().filter_map(|r| r.theory.map(|t| t.delta)).collect::<Vec<_>>(),
                            )
                            .0;
                            let (mean, var) = mean_var(&values(rs, "tau_exact"));
                            (delta, var / (mean * mean))
                        })
                        .collect();
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let decreasing = points.len() >= 2 && points.windows(2).all(|w| w[1].1 < w[0].1);
                    push(
                        &format!("relative variance of tau_exact decreases in Δ at n={n}, k={k}"),
                        points.last().map_or(f64::NAN, |p| p.1),
                        points.first().map_or(f64::NAN, |p| p.1),
                        decreasing,
                        fmt_list(points.iter().map(|(d, v)| (format!("Δ={d:.3}"), *v))),
                    );
                }
            }
            Preset::LllTermination => {
                let total = recs.len();
                let terminated: Vec<_> = recs
                    .iter()
                    .filter(|r| r.measured.get("lll_terminated") == Some(&1.0))
                    .collect();
                let frac = terminated.len() as f64 / total.max(1) as f64;
                push(
                    "fraction of resampling runs terminating within 50n rounds",
                    frac,
                    LLL_TERMINATION_MIN,
                    total > 0 && frac >= LLL_TERMINATION_MIN,
                    format!("{} of {total}", terminated.len()),
                );
                let invalid = terminated
                    .iter()
                    .filter(|r| r.measured.get("lll_valid") != Some(&1.0))
                    .count();
                let errors = recs.iter().filter(|r| r.error.is_some()).count();
                push(
                    "invalid resampling outputs",
                    (invalid + errors) as f64,
                    0.0,
                    invalid + errors == 0,
                    format!("{invalid} invalid, {errors} errored"),
                );
            }
        }
    }
    out
}

struct Moments {
    mean: f64,
    variance: f64,
    /// Delta-method standard error of `variance - 4 mean`.
    se_var_minus_4mean: f64,
}

fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let (mean, variance) = mean_var(v);
    let central = |p: i32| v.iter().map(|x| libm::pow(x - mean, p as f64)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let var_of_stat = (m4 - m2 * m2 - 2.0 * VARIANCE_FACTOR * m3 + VARIANCE_FACTOR * VARIANCE_FACTOR * m2) / n;
    Moments {
        mean,
        variance,
        se_var_minus_4mean: var_of_stat.max(0.0).sqrt(),
    }
}

/// Writes `summary.txt`, `summary.csv` (one row per cell and statistic)
/// and `verdicts.csv` into `out_dir`, and returns the verdicts.
pub fn report(records: &[ExperimentRecord], out_dir: &Path) -> Result<Vec<Verdict>> {
    fs::create_dir_all(out_dir)?;
    let cells = summarize(records);
    let checks = verdicts(records);

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out_dir.join("summary.csv"))?;
    w.write_record([
        "preset", "cell", "n", "k", "r_n", "cat_size", "trials", "errors", "delta", "zeta",
        "admit_bound", "statistic", "kind", "count", "median", "q1", "q3", "iqr", "mean", "variance",
    ])?;
    for c in &cells {
        for (name, s) in &c.stats {
            w.write_record([
                c.preset.name().to_string(),
                c.cell.to_string(),
                c.n.to_string(),
                c.k.to_string(),
                c.r_n.to_string(),
                c.cat_size.to_string(),
                c.trials.to_string(),
                c.errors.to_string(),
                c.delta.to_string(),
                c.zeta.to_string(),
                c.admit_bound.to_string(),
                name.clone(),
                if s.exact { "exact" } else { "surrogate" }.to_string(),
                s.count.to_string(),
                s.median.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
                s.iqr().to_string(),
                s.mean.to_string(),
                s.variance.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(out_dir.join("verdicts.csv"))?;
    w.write_record(["preset", "check", "value", "threshold", "pass", "detail"])?;
    for v in &checks {
        w.write_record([
            v.preset.name().to_string(),
            v.check.clone(),
            v.value.to_string(),
            v.threshold.to_string(),
            v.pass.to_string(),
            v.detail.clone(),
        ])?;
    }
    w.flush()?;

    fs::write(out_dir.join("summary.txt"), render_text(records, &cells, &checks))?;
    Ok(checks)
}

fn render_text(records: &[ExperimentRecord], cells: &[CellSummary], checks: &[Verdict]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "records: {}", records.len());
    let _ = writeln!(s, "cells: {}", cells.len());
    let mut current = None;
    for c in cells {
        if current != Some(c.preset) {
            current = Some(c.preset);
            let _ = writeln!(s, "\n== {} ==", c.preset);
        }
        let _ = writeln!(
            s,
            "cell {} n={} k={} r_n={:.6} #Y={} trials={} errors={} Δ={:.4} ζ={:.4} admit_bound={:.4}",
            c.cell, c.n, c.k, c.r_n, c.cat_size, c.trials, c.errors, c.delta, c.zeta, c.admit_bound
        );
        for (name, st) in &c.stats {
            let _ = writeln!(
                s,
                "  {name:<20} {:<9} median {:>12.4}  iqr {:>10.4}  mean {:>12.4}  var {:>12.4}",
                if st.exact { "exact" } else { "surrogate" },
                st.median,
                st.iqr(),
                st.mean,
                st.variance
            );
        }
    }
    let _ = writeln!(s, "\n== fitted constants ==");
    match fit_constants(records) {
        Ok(fit) => {
            let show = |r: Option<(f64, f64)>| r.map_or("n/a".to_string(), |(a, b)| format!("[{a:.4}, {b:.4}]"));
            let stab = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(s, "distinct n: {}", fit.distinct_n);
            let _ = writeln!(s, "gamma (max_degree/Δ): {} stability {}", show(fit.degree), stab(fit.degree_stability));
            let _ = writeln!(s, "lambda (k·τ/Δ): {} stability {}", show(fit.tau), stab(fit.tau_stability));
            let _ = writeln!(s, "beta1..C (N_sim r^d/(k #Y)): {} stability {}", show(fit.nsim), stab(fit.nsim_stability));
            if fit.degenerate {
                let _ = writeln!(s, "note: degenerate fit, some range collapsed to a point");
            }
        }
        Err(e) => {
            let _ = writeln!(s, "not fitted: {e}");
        }
    }
    let _ = writeln!(s, "\n== verdicts ==");
    for v in checks {
        let _ = writeln!(s, "{v}");
    }
    let _ = writeln!(
        s,
        "\nRegime guards and thresholds are finite-n stand-ins for asymptotic conditions."
    );
    s
}
