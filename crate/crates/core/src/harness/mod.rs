//! Monte Carlo experiments: parameter sweeps over the random model, one
//! record per (cell, trial), persisted as JSON lines.
//!
//! Trial seeds are `rng::trial_seed(base_seed, cell, trial)` and every
//! record carries its full generator config, so a record can be re-run on
//! its own ([`rerun`]). Records are emitted in (cell, trial) order whatever
//! the number of worker threads, which makes the JSONL output byte-identical
//! across runs with the same plan. Wall-clock timings are kept out of the
//! records and written to a separate sidecar.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate, CategoricalSpec, DensitySpec, GeneratorConfig, P0Means};
use crate::decomposition::{
    check_k_good, decompose_greedy, decompose_lll, tau_exact, tau_lower_bound, EXACT_CAP,
};
use crate::error::{Error, Result};
use crate::io::{ModelSection, RngSection};
use crate::order::Order;
use crate::rng;
use crate::similarity::{is_similar, SimilarityGraph};
use crate::subsets::{nsim_exact, nsim_greedy_direct, nsim_greedy_kway, nsim_upper_grid};
use crate::theory::{self, BoundReport, FittedConstants};

pub use report::{
    fit_constants, report, summarize, verdicts, CellSummary, FitReport, StatSummary, Verdict,
};

/// Default `theta` for the resampling runs: `8e`, the local-lemma
/// sufficiency threshold with the degree constant set to one.
pub const DEFAULT_LLL_THETA: f64 = 8.0 * std::f64::consts::E;

/// Round budget of a resampling run, per point.
pub const LLL_ROUNDS_PER_POINT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Maximum similarity degree against `Δ`.
    DegreeScaling,
    /// Greedy decomposition size across `k`.
    TauTradeoff,
    /// Greedy k-way subset size against the grid certificate.
    NsimBracket,
    /// Exact `N_sim(k)` on small instances, for its mean and variance.
    VarianceNsim,
    /// Exact `τ_k` on small instances across radii.
    VarianceTau,
    /// Termination and validity of the resampling decomposition.
    LllTermination,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::DegreeScaling,
        Preset::TauTradeoff,
        Preset::NsimBracket,
        Preset::VarianceNsim,
        Preset::VarianceTau,
        Preset::LllTermination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::DegreeScaling => "degree-scaling",
            Preset::TauTradeoff => "tau-tradeoff",
            Preset::NsimBracket => "nsim-bracket",
            Preset::VarianceNsim => "variance-nsim",
            Preset::VarianceTau => "variance-tau",
            Preset::LllTermination => "lll-termination",
        }
    }

    pub fn from_name(s: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Presets whose plans must satisfy the growth conditions of the
    /// asymptotic regime at their largest `n`.
    pub fn is_scaling(self) -> bool {
        matches!(self, Preset::DegreeScaling | Preset::TauTradeoff | Preset::NsimBracket)
    }

    fn uses_exact_search(self) -> bool {
        matches!(self, Preset::VarianceNsim | Preset::VarianceTau)
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Radius as a function of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusRule {
    /// Each value is swept as its own cell.
    Fixed { values: Vec<f64> },
    /// `r_n = n^{-beta}`.
    Power { beta: f64 },
}

impl RadiusRule {
    fn radii(&self, n: usize) -> Vec<f64> {
        match self {
            RadiusRule::Fixed { values } => values.clone(),
            RadiusRule::Power { beta } => vec![libm::pow(n as f64, -beta)],
        }
    }
}

/// Categorical law as a function of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CategoryRule {
    Fixed { spec: CategoricalSpec },
    /// `#Y = round(n^rho)` symbols; symbol 0 has probability `c n^{-theta}`
    /// and the others share the remainder equally.
    PowerScaled { rho: f64, theta: f64, c: f64 },
}

impl CategoryRule {
    pub fn at(&self, n: usize) -> CategoricalSpec {
        match *self {
            CategoryRule::Fixed { ref spec } => spec.clone(),
            CategoryRule::PowerScaled { rho, theta, c } => {
                let nf = n as f64;
                CategoricalSpec::TwoLevel {
                    cat_size: (libm::pow(nf, rho).round() as usize).max(2),
                    p_up: c * libm::pow(nf, -theta),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub preset: Preset,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub radius: RadiusRule,
    pub categories: CategoryRule,
    pub d: usize,
    pub p0: f64,
    #[serde(default)]
    pub p0_means: P0Means,
    pub density: DensitySpec,
    pub trials: usize,
    pub base_seed: u64,
    /// `theta` of the resampling runs; only used by `lll-termination`.
    pub lll_theta: f64,
}

/// One parameter combination of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n: usize,
    pub r_n: f64,
    pub k: usize,
}

impl ExperimentPlan {
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentPlan {
            preset,
            ns: vec![],
            ks: vec![1],
            radius: RadiusRule::Power { beta: 0.25 },
            categories: CategoryRule::Fixed {
                spec: CategoricalSpec::Uniform { cat_size: 4 },
            },
            d: 2,
            p0: 0.0,
            p0_means: P0Means::ProbCorrupted,
            density: DensitySpec::UniformUnitCube,
            trials: 20,
            base_seed: 1,
            lll_theta: DEFAULT_LLL_THETA,
        };
        match preset {
            Preset::DegreeScaling => ExperimentPlan {
                ns: vec![1 << 11, 1 << 13, 1 << 15],
                ..base
            },
            Preset::TauTradeoff => ExperimentPlan {
                ns: vec![1 << 14],
                ks: vec![2, 4, 8, 16],
                trials: 10,
                ..base
            },
            Preset::NsimBracket => ExperimentPlan {
                ns: vec![1 << 12, 1 << 14, 1 << 16],
                ks: vec![1, 2, 4],
                radius: RadiusRule::Power { beta: 0.3 },
                categories: CategoryRule::PowerScaled {
                    rho: 0.3,
                    theta: 0.2,
                    c: 1.0,
                },
                d: 1,
                trials: 10,
                ..base
            },
            Preset::VarianceNsim => ExperimentPlan {
                ns: vec![10],
                ks: vec![1, 2],
                radius: RadiusRule::Fixed { values: vec![0.3] },
                categories: CategoryRule::Fixed {
                    spec: CategoricalSpec::Uniform { cat_size: 2 },
                },
                trials: 2000,
                ..base
            },
            Preset::VarianceTau => ExperimentPlan {
                ns: vec![12],
                ks: vec![1],
                radius: RadiusRule::Fixed { values: vec![0.25, 0.6] },
                categories: CategoryRule::Fixed {
                    spec: CategoricalSpec::Uniform { cat_size: 1 },
                },
                trials: 500,
                ..base
            },
            Preset::LllTermination => ExperimentPlan {
                ns: vec![200],
                ks: vec![1, 2, 4, 8],
                radius: RadiusRule::Fixed { values: vec![0.1] },
                categories: CategoryRule::Fixed {
                    spec: CategoricalSpec::Uniform { cat_size: 2 },
                },
                p0: 0.1,
                trials: 50,
                ..base
            },
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n in &self.ns {
            for r_n in self.radius.radii(n) {
                for &k in &self.ks {
                    cells.push(Cell {
                        index: cells.len(),
                        n,
                        r_n,
                        k,
                    });
                }
            }
        }
        cells
    }

    pub fn generator_config(&self, n: usize, r_n: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n,
            d: self.d,
            r_n,
            p0: self.p0,
            p0_means: self.p0_means,
            density: self.density.clone(),
            categorical: self.categories.at(n),
            seed,
        }
    }

    /// Checks every cell's config and, for scaling presets, the regime
    /// guards at the largest `n`:
    ///
    /// - `Λ >= 2 ln n`,
    /// - `β < (1 - θ)/d` with `p_up = n^{-θ}` for power radii, and
    ///   `β < (1 - λ)/d` with `p_low = n^{-λ}` for `nsim-bracket`,
    /// - `ρ > θ` and `p_up >= 1/#Y` for power-scaled categories.
    ///
    /// These are finite-`n` stand-ins for conditions that are only
    /// asymptotic, so they are heuristic.
    pub fn validate(&self) -> Result<()> {
        if self.ks.contains(&0) {
            return Err(Error::invalid("every k must be >= 1"));
        }
        if !(self.lll_theta.is_finite() && self.lll_theta > 0.0) {
            return Err(Error::invalid(format!("lll_theta must be positive, got {}", self.lll_theta)));
        }
        match self.radius {
            RadiusRule::Power { beta } if !(beta.is_finite() && beta > 0.0) => {
                return Err(Error::invalid(format!("beta must be positive, got {beta}")))
            }
            _ => {}
        }
        if let CategoryRule::PowerScaled { rho, theta, c } = self.categories {
            let unit = |v: f64| v > 0.0 && v < 1.0;
            if !(unit(rho) && unit(theta) && c > 0.0) {
                return Err(Error::invalid(format!(
                    "power-scaled categories need 0 < rho, theta < 1 and c > 0, got rho = {rho}, theta = {theta}, c = {c}"
                )));
            }
            if rho <= theta {
                return Err(Error::invalid(format!(
                    "regime guard violated: rho > theta is required, got rho = {rho}, theta = {theta}"
                )));
            }
        }
        for cell in self.cells() {
            let cfg = self.generator_config(cell.n, cell.r_n, 0);
            cfg.validate().map_err(|e| {
                Error::invalid(format!("cell n = {}, r_n = {}: {e}", cell.n, cell.r_n))
            })?;
            if self.preset.uses_exact_search() && cell.n > EXACT_CAP {
                return Err(Error::invalid(format!(
                    "{} uses exact search, which supports n <= {EXACT_CAP}; got n = {}",
                    self.preset, cell.n
                )));
            }
        }
        if self.preset.is_scaling() {
            if let Some(&n) = self.ns.iter().max() {
                self.check_regime(n)?;
            }
        }
        Ok(())
    }

    fn check_regime(&self, n: usize) -> Result<()> {
        let ln_n = (n as f64).ln();
        for r_n in self.radius.radii(n) {
            let params = self.generator_config(n, r_n, 0).theory_params();
            let (_, lambda) = theory::delta_lambda(&params);
            if lambda < 2.0 * ln_n {
                return Err(Error::invalid(format!(
                    "regime guard violated: Λ = {lambda:.3} < 2 ln n = {:.3} at n = {n}, r_n = {r_n}",
                    2.0 * ln_n
                )));
            }
        }
        if let RadiusRule::Power { beta } = self.radius {
            let spec = self.categories.at(n);
            let d = self.d as f64;
            let (name, exponent) = if self.preset == Preset::NsimBracket {
                ("λ", -spec.p_low().ln() / ln_n)
            } else {
                ("θ", -spec.p_up().ln() / ln_n)
            };
            if beta >= (1.0 - exponent) / d {
                return Err(Error::invalid(format!(
                    "regime guard violated: β = {beta} >= (1 - {name})/d = {:.4} at n = {n}",
                    (1.0 - exponent) / d
                )));
            }
        }
        Ok(())
    }
}

/// One trial of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub preset: Preset,
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    /// Dataset config; its seed is the trial seed.
    pub config: GeneratorConfig,
    /// `theta` of the resampling run, when the preset makes one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lll_theta: Option<f64>,
    pub measured: BTreeMap<String, f64>,
    /// Scales and bounds for this parameter point, with unit constants.
    pub theory: Option<BoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs `plan` on `jobs` worker threads and returns the records in
/// (cell, trial) order.
pub fn run(plan: &ExperimentPlan, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    run_with(plan, jobs, |rec, _| {
        out.push(rec);
        Ok(())
    })?;
    Ok(out)
}

/// Runs `plan`, writing `records.jsonl` and `timings.jsonl` into `out_dir`.
/// Returns the number of records.
pub fn run_to_dir(plan: &ExperimentPlan, jobs: usize, out_dir: &Path) -> Result<usize> {
    fs::create_dir_all(out_dir)?;
    let mut records = BufWriter::new(fs::File::create(out_dir.join(RECORDS_FILE))?);
    let mut timings = BufWriter::new(fs::File::create(out_dir.join(TIMINGS_FILE))?);
    let mut count = 0;
    run_with(plan, jobs, |rec, ms| {
        serde_json::to_writer(&mut records, &rec)?;
        records.write_all(b"\n")?;
        let t = Timing {
            cell: rec.cell,
            trial: rec.trial,
            runtime_ms: ms,
        };
        serde_json::to_writer(&mut timings, &t)?;
        timings.write_all(b"\n")?;
        count += 1;
        Ok(())
    })?;
    records.flush()?;
    timings.flush()?;
    Ok(count)
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub cell: usize,
    pub trial: usize,
    pub runtime_ms: f64,
}

/// Executes trials cell by cell, in parallel within a cell, handing each
/// record and its runtime in milliseconds to `sink` in (cell, trial) order.
pub fn run_with(
    plan: &ExperimentPlan,
    jobs: usize,
    mut sink: impl FnMut(ExperimentRecord, f64) -> Result<()>,
) -> Result<()> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    for cell in plan.cells() {
        let batch: Vec<(ExperimentRecord, f64)> = pool.install(|| {
            (0..plan.trials)
                .into_par_iter()
                .map(|trial| {
                    let start = Instant::now();
                    let rec = run_trial(plan, &cell, trial);
                    (rec, start.elapsed().as_secs_f64() * 1e3)
                })
                .collect()
        });
        for (rec, ms) in batch {
            sink(rec, ms)?;
        }
    }
    Ok(())
}

fn run_trial(plan: &ExperimentPlan, cell: &Cell, trial: usize) -> ExperimentRecord {
    let seed = rng::trial_seed(plan.base_seed, cell.index as u64, trial as u64);
    let config = plan.generator_config(cell.n, cell.r_n, seed);
    let mut rec = ExperimentRecord {
        preset: plan.preset,
        cell: cell.index,
        trial,
        seed,
        k: cell.k,
        config,
        lll_theta: (plan.preset == Preset::LllTermination).then_some(plan.lll_theta),
        measured: BTreeMap::new(),
        theory: None,
        error: None,
    };
    evaluate(&mut rec);
    rec
}

/// Recomputes a record from its own fields.
pub fn rerun(record: &ExperimentRecord) -> ExperimentRecord {
    let mut rec = ExperimentRecord {
        measured: BTreeMap::new(),
        theory: None,
        error: None,
        ..record.clone()
    };
    evaluate(&mut rec);
    rec
}

fn evaluate(rec: &mut ExperimentRecord) {
    let cfg = &rec.config;
    rec.theory = theory::bound_report(
        &cfg.theory_params(),
        rec.k,
        cfg.density.eps_up(cfg.d),
        &cfg.categorical.probabilities(),
        &FittedConstants::unit(),
    )
    .ok();
    if let Err(e) = measure(rec) {
        rec.error = Some(e.to_string());
    }
}

fn measure(rec: &mut ExperimentRecord) -> Result<()> {
    let ds = generate(&rec.config)?;
    let g = SimilarityGraph::build(&ds, rec.config.r_n)?;
    let k = rec.k;
    let delta = rec.theory.map_or(f64::NAN, |t| t.delta);
    let m = &mut rec.measured;
    let mut put = |key: &str, v: f64| {
        m.insert(key.to_string(), v);
    };
    let max_degree = g.max_degree();
    put("max_degree", max_degree as f64);
    match rec.preset {
        Preset::DegreeScaling => {
            let stats = g.degree_stats();
            put("mean_degree", stats.mean_degree);
            if delta > 0.0 {
                put("degree_ratio", max_degree as f64 / delta);
            }
        }
        Preset::TauTradeoff => {
            let tau = decompose_greedy(&g, &ds, k, Order::Natural)?.size();
            put("tau_greedy", tau as f64);
            put("k_tau_greedy", (k * tau) as f64);
            put("tau_lower", tau_lower_bound(&g, &ds, k)? as f64);
            if delta > 0.0 {
                put("tau_ratio", (k * tau) as f64 / delta);
            }
        }
        Preset::NsimBracket => {
            let kway = nsim_greedy_kway(&g, k, rng::derive(rec.seed, 1))?.size();
            let upper = nsim_upper_grid(&ds, k, rec.config.r_n)?;
            put("nsim_greedy_kway", kway as f64);
            put("nsim_greedy_direct", nsim_greedy_direct(&g, k, Order::Natural)?.size() as f64);
            put("nsim_upper_grid", upper as f64);
            put("nsim_ratio", upper as f64 / kway as f64);
        }
        Preset::VarianceNsim => {
            put("nsim_exact", nsim_exact(&g, k, EXACT_CAP)?.size() as f64);
            put("nsim_upper_grid", nsim_upper_grid(&ds, k, rec.config.r_n)? as f64);
        }
        Preset::VarianceTau => {
            put("tau_exact", tau_exact(&g, &ds, k, EXACT_CAP)?.0 as f64);
            put("tau_lower", tau_lower_bound(&g, &ds, k)? as f64);
            put("tau_greedy", decompose_greedy(&g, &ds, k, Order::Natural)?.size() as f64);
        }
        Preset::LllTermination => {
            let base = rec.lll_theta.unwrap_or(DEFAULT_LLL_THETA);
            // Lift theta into the certified region. With max_degree < k no
            // bad event exists and the base value is kept.
            let theta = match theory::min_feasible_q(max_degree, k) {
                Ok(q) => base.max(q as f64 * k as f64 / max_degree as f64),
                Err(_) => base,
            };
            put("lll_theta", theta);
            let max_rounds = LLL_ROUNDS_PER_POINT * ds.n();
            match decompose_lll(&g, &ds, k, theta, rng::derive(rec.seed, 2), max_rounds) {
                Ok(out) => {
                    let valid = check_k_good(&g, &ds, &out.decomposition)?.valid;
                    put("lll_terminated", 1.0);
                    put("lll_valid", f64::from(u8::from(valid)));
                    put("lll_rounds", out.rounds() as f64);
                    put("lll_q", out.q as f64);
                    put("lll_batches", out.decomposition.size() as f64);
                }
                Err(Error::BudgetExhausted { rounds }) => {
                    put("lll_terminated", 0.0);
                    put("lll_rounds", rounds as f64);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSONL record file, skipping blank lines.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i as u64 + 1,
            issue: crate::error::ParseIssue::Other(e.to_string()),
        })?);
    }
    Ok(out)
}

/// Monte Carlo estimate of the probability that the last of `n` points is
/// similar to none of the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmitEstimate {
    pub trials: usize,
    pub admitted: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// `Σ_y (1 - θ(y))^{n-1} p(y)` with `θ(y) = ε_up π_d r^d p(y)`.
    pub bound: f64,
}

/// Draws `trials` datasets from `cfg` (trial seeds from `base_seed`) and
/// counts how often point `n - 1` has no similar point.
pub fn estimate_admit_probability(
    cfg: &GeneratorConfig,
    trials: usize,
    base_seed: u64,
) -> Result<AdmitEstimate> {
    cfg.validate()?;
    if cfg.n < 2 || trials == 0 {
        return Err(Error::invalid("need n >= 2 and at least one trial"));
    }
    let bound = theory::admit_probability_bound(
        cfg.n,
        cfg.d,
        cfg.r_n,
        cfg.density.eps_up(cfg.d),
        &cfg.categorical.probabilities(),
    )?;
    let hits: Result<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ds = generate(&GeneratorConfig {
                seed: rng::trial_seed(base_seed, 0, t as u64),
                ..cfg.clone()
            })?;
            let last = ds.n() - 1;
            for j in 0..last {
                if is_similar(&ds, last, j, cfg.r_n)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect();
    let admitted = hits?.into_iter().filter(|&h| h).count();
    let p = admitted as f64 / trials as f64;
    Ok(AdmitEstimate {
        trials,
        admitted,
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        bound,
    })
}

/// Optional `[plan]` section of an experiment config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub ns: Option<Vec<usize>>,
    pub ks: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub radius: Option<RadiusRule>,
    pub categories: Option<CategoryRule>,
    pub lll_theta: Option<f64>,
}

/// Experiment config file: the dataset config layout with every section
/// optional, plus `[plan]`. Given sections override the preset defaults;
/// `[model]` pins `n` and `r_n` to single values and `[rng] seed` becomes
/// the base seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub model: Option<ModelSection>,
    pub density: Option<DensitySpec>,
    pub categorical: Option<CategoricalSpec>,
    pub rng: Option<RngSection>,
    pub plan: Option<PlanSection>,
}

impl PlanFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("experiment config: {e}")))
    }

    pub fn apply(self, mut plan: ExperimentPlan) -> ExperimentPlan {
        if let Some(m) = self.model {
            plan.ns = vec![m.n];
            plan.d = m.d;
            plan.radius = RadiusRule::Fixed { values: vec![m.r_n] };
            plan.p0 = m.p0;
            plan.p0_means = m.p0_means;
        }
        if let Some(density) = self.density {
            plan.density = density;
        }
        if let Some(spec) = self.categorical {
            plan.categories = CategoryRule::Fixed { spec };
        }
        if let Some(r) = self.rng {
            plan.base_seed = r.seed;
        }
        if let Some(p) = self.plan {
            plan.ns = p.ns.unwrap_or(plan.ns);
            plan.ks = p.ks.unwrap_or(plan.ks);
            plan.trials = p.trials.unwrap_or(plan.trials);
            plan.radius = p.radius.unwrap_or(plan.radius);
            plan.categories = p.categories.unwrap_or(plan.categories);
            plan.lll_theta = p.lll_theta.unwrap_or(plan.lll_theta);
        }
        plan
    }
}
