//! k-good batch decompositions.
//!
//! A decomposition is k-good when every batch holds at least one uncorrupted
//! point and every point is similar to at most `k - 1` other members of its
//! own batch. This module checks that property and constructs
//! decompositions by greedy first fit, by local-lemma resampling of a random
//! assignment, and by exhaustive search at small `n`, plus a clique-based
//! lower bound on the minimum size.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::order::Order;
use crate::rng;
use crate::similarity::SimilarityGraph;

/// Largest `n` accepted by [`tau_exact`].
pub const EXACT_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchDecomposition {
    pub k: usize,
    pub batches: Vec<Vec<usize>>,
}

impl BatchDecomposition {
    pub fn size(&self) -> usize {
        self.batches.len()
    }

    /// Batch id of every index, or an error if the batches do not form a
    /// partition of `0..n` into non-empty sets.
    pub fn labels(&self, n: usize) -> Result<Vec<usize>> {
        let mut label = vec![usize::MAX; n];
        for (b, batch) in self.batches.iter().enumerate() {
            if batch.is_empty() {
                return Err(Error::invalid(format!("batch {b} is empty")));
            }
            for &v in batch {
                if v >= n {
                    return Err(Error::invalid(format!("batch {b} holds index {v} >= n = {n}")));
                }
                if label[v] != usize::MAX {
                    return Err(Error::invalid(format!(
                        "index {v} appears in batches {} and {b}",
                        label[v]
                    )));
                }
                label[v] = b;
            }
        }
        if let Some(v) = label.iter().position(|&l| l == usize::MAX) {
            return Err(Error::invalid(format!("index {v} is not in any batch")));
        }
        Ok(label)
    }

    /// Builds a decomposition from per-index batch labels; labels are
    /// renumbered densely in order of first appearance.
    pub fn from_labels(k: usize, labels: &[usize]) -> Self {
        let mut dense: HashMap<usize, usize> = HashMap::new();
        let mut batches: Vec<Vec<usize>> = Vec::new();
        for (v, &l) in labels.iter().enumerate() {
            let next = dense.len();
            let b = *dense.entry(l).or_insert(next);
            if b == batches.len() {
                batches.push(Vec::new());
            }
            batches[b].push(v);
        }
        BatchDecomposition { k, batches }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    NoUncorrupted,
    SimilarityBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub batch: usize,
    pub vertex: Option<usize>,
    pub observed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl std::fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "valid: {}", self.valid)?;
        writeln!(f, "violations: {}", self.violations.len())?;
        for v in &self.violations {
            let kind = match v.kind {
                ViolationKind::NoUncorrupted => "no-uncorrupted",
                ViolationKind::SimilarityBudget => "similarity-budget",
            };
            let vertex = v.vertex.map_or_else(|| "-".to_string(), |x| x.to_string());
            writeln!(
                f,
                "violation kind={kind} batch={} vertex={vertex} observed={}",
                v.batch, v.observed
            )?;
        }
        Ok(())
    }
}

fn check_instance(g: &SimilarityGraph, ds: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if g.n() != ds.n() {
        return Err(Error::invalid(format!(
            "graph has {} vertices but dataset has {} points",
            g.n(),
            ds.n()
        )));
    }
    Ok(())
}

/// Checks both k-good conditions exhaustively. Structural problems
/// (overlap, gaps, empty batches) are returned as errors, not violations.
pub fn check_k_good(
    g: &SimilarityGraph,
    ds: &Dataset,
    dec: &BatchDecomposition,
) -> Result<ValidityReport> {
    check_instance(g, ds, dec.k)?;
    let labels = dec.labels(ds.n())?;
    let within = g.labelled_degrees(&labels.iter().map(|&l| Some(l)).collect::<Vec<_>>());
    let mut violations = Vec::new();
    for (b, batch) in dec.batches.iter().enumerate() {
        if batch.iter().all(|&v| ds.is_corrupted(v)) {
            violations.push(Violation {
                kind: ViolationKind::NoUncorrupted,
                batch: b,
                vertex: None,
                observed: 0,
            });
        }
        let mut members = batch.clone();
        members.sort_unstable();
        for v in members {
            if within[v] > dec.k - 1 {
                violations.push(Violation {
                    kind: ViolationKind::SimilarityBudget,
                    batch: b,
                    vertex: Some(v),
                    observed: within[v],
                });
            }
        }
    }
    Ok(ValidityReport {
        valid: violations.is_empty(),
        violations,
    })
}

fn no_uncorrupted() -> Error {
    Error::Infeasible {
        reason: "every point is corrupted, so no batch can hold an uncorrupted point".into(),
        witness: None,
    }
}

/// Greedy first fit.
///
/// Uncorrupted points are placed first, so every batch is opened by one.
/// Each point joins the lowest batch where neither it nor any of its similar
/// batch mates would exceed `k - 1` similar mates. A corrupted point that
/// fits nowhere gets a fresh batch together with an uncorrupted point taken
/// from a batch that has another one; if no such point can be moved the
/// instance is reported infeasible with the stuck point as witness.
pub fn decompose_greedy(
    g: &SimilarityGraph,
    ds: &Dataset,
    k: usize,
    order: Order,
) -> Result<BatchDecomposition> {
    check_instance(g, ds, k)?;
    let (clean, dirty): (Vec<usize>, Vec<usize>) =
        (0..ds.n()).partition(|&v| !ds.is_corrupted(v));
    if clean.is_empty() {
        return Err(no_uncorrupted());
    }
    let mut state = GreedyState {
        g,
        k,
        batch_of: vec![None; ds.n()],
        load: vec![0; ds.n()],
        batches: Vec::new(),
        clean_in: Vec::new(),
        count: Vec::new(),
        blocked: Vec::new(),
        placed_clean: Vec::new(),
    };
    for v in order.arrange(clean, g) {
        match state.first_fit(v) {
            Some(b) => state.assign(v, b),
            None => {
                let b = state.open();
                state.assign(v, b);
            }
        }
        state.placed_clean.push(v);
    }
    for v in order.arrange(dirty, g) {
        match state.first_fit(v) {
            Some(b) => state.assign(v, b),
            None => state.steal_for(v)?,
        }
    }
    let mut batches = state.batches;
    for b in &mut batches {
        b.sort_unstable();
    }
    Ok(BatchDecomposition { k, batches })
}

struct GreedyState<'a> {
    g: &'a SimilarityGraph,
    k: usize,
    batch_of: Vec<Option<usize>>,
    /// Similar batch mates of each placed point.
    load: Vec<usize>,
    batches: Vec<Vec<usize>>,
    clean_in: Vec<usize>,
    count: Vec<usize>,
    blocked: Vec<bool>,
    placed_clean: Vec<usize>,
}

impl GreedyState<'_> {
    fn open(&mut self) -> usize {
        self.batches.push(Vec::new());
        self.clean_in.push(0);
        self.count.push(0);
        self.blocked.push(false);
        self.batches.len() - 1
    }

    fn first_fit(&mut self, v: usize) -> Option<usize> {
        let mut touched = Vec::new();
        for u in self.g.neighbors(v) {
            if let Some(b) = self.batch_of[u] {
                if self.count[b] == 0 && !self.blocked[b] {
                    touched.push(b);
                }
                self.count[b] += 1;
                if self.load[u] + 1 > self.k - 1 {
                    self.blocked[b] = true;
                }
            }
        }
        let chosen =
            (0..self.batches.len()).find(|&b| self.count[b] < self.k && !self.blocked[b]);
        for b in touched {
            self.count[b] = 0;
            self.blocked[b] = false;
        }
        chosen
    }

    fn assign(&mut self, v: usize, b: usize) {
        let mut mates = 0;
        for u in self.g.neighbors(v) {
            if self.batch_of[u] == Some(b) {
                self.load[u] += 1;
                mates += 1;
            }
        }
        self.load[v] = mates;
        self.batch_of[v] = Some(b);
        self.batches[b].push(v);
        if !self.g.is_corrupted(v) {
            self.clean_in[b] += 1;
        }
    }

    fn remove(&mut self, v: usize) {
        let b = self.batch_of[v].take().expect("placed");
        for u in self.g.neighbors(v) {
            if self.batch_of[u] == Some(b) {
                self.load[u] -= 1;
            }
        }
        self.load[v] = 0;
        self.batches[b].retain(|&w| w != v);
        if !self.g.is_corrupted(v) {
            self.clean_in[b] -= 1;
        }
    }

    /// Opens a batch for corrupted `v`, moving in an uncorrupted point whose
    /// current batch keeps another uncorrupted member. Points of another
    /// category are preferred; a same-category partner needs `k >= 2`.
    fn steal_for(&mut self, v: usize) -> Result<()> {
        let cat = self.g.category(v);
        let spare = |s: &Self, u: usize| s.clean_in[s.batch_of[u].unwrap()] >= 2;
        let pick = self
            .placed_clean
            .iter()
            .copied()
            .find(|&u| self.g.category(u) != cat && spare(self, u))
            .or_else(|| {
                (self.k >= 2)
                    .then(|| {
                        self.placed_clean
                            .iter()
                            .copied()
                            .find(|&u| self.g.category(u) == cat && spare(self, u))
                    })
                    .flatten()
            });
        let Some(u) = pick else {
            return Err(Error::Infeasible {
                reason: format!(
                    "corrupted point {v} fits in no batch and no uncorrupted point can be spared"
                ),
                witness: Some(v),
            });
        };
        self.remove(u);
        let b = self.open();
        self.assign(u, b);
        self.assign(v, b);
        Ok(())
    }
}

/// Result of [`decompose_lll`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LllOutcome {
    pub decomposition: BatchDecomposition,
    /// Number of batch ids the assignment drew from.
    pub q: usize,
    pub resamples: usize,
    pub repairs: usize,
}

impl LllOutcome {
    pub fn rounds(&self) -> usize {
        self.resamples + self.repairs
    }
}

/// `max(1, ceil(theta * max_degree / k))`.
pub fn batch_count(theta: f64, max_degree: usize, k: usize) -> usize {
    ((theta * max_degree as f64 / k as f64).ceil() as usize).max(1)
}

/// Random assignment into `q = max(1, ceil(theta · Δ̂ / k))` batches,
/// repaired by Moser–Tardos resampling.
///
/// Bad events are `(k+1)`-sets formed by a point and `k` similar mates in
/// its batch; the lowest such point and its `k` lowest similar mates get
/// fresh uniform batch ids. A non-empty batch without an uncorrupted point
/// is repaired by moving a uniformly chosen uncorrupted point into it,
/// drawing from points whose batch keeps another uncorrupted member when
/// there are any. Each resample or repair is one round.
pub fn decompose_lll(
    g: &SimilarityGraph,
    ds: &Dataset,
    k: usize,
    theta: f64,
    seed: u64,
    max_rounds: usize,
) -> Result<LllOutcome> {
    check_instance(g, ds, k)?;
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::invalid(format!("theta must be positive, got {theta}")));
    }
    let clean: Vec<usize> = (0..ds.n()).filter(|&v| !ds.is_corrupted(v)).collect();
    if clean.is_empty() {
        return Err(no_uncorrupted());
    }
    let q = batch_count(theta, g.max_degree(), k);
    let mut rng = rng::stream(seed, 0);
    let z: Vec<usize> = (0..ds.n()).map(|_| rng.random_range(0..q)).collect();
    let mut state = Resampler::new(g, k, q, z);

    let (mut resamples, mut repairs) = (0, 0);
    loop {
        if let Some(&v) = state.violating.first() {
            if resamples + repairs >= max_rounds {
                return Err(Error::BudgetExhausted {
                    rounds: resamples + repairs,
                });
            }
            let batch = state.z[v];
            let mates: Vec<usize> = g
                .neighbors(v)
                .filter(|&u| state.z[u] == batch)
                .take(k)
                .collect();
            for w in std::iter::once(v).chain(mates) {
                let to = rng.random_range(0..q);
                state.relocate(w, to);
            }
            resamples += 1;
        } else if let Some(&b) = state.bad_batches.first() {
            if resamples + repairs >= max_rounds {
                return Err(Error::BudgetExhausted {
                    rounds: resamples + repairs,
                });
            }
            let spare: Vec<usize> = clean
                .iter()
                .copied()
                .filter(|&u| state.clean_in[state.z[u]] >= 2)
                .collect();
            let pool = if spare.is_empty() { &clean } else { &spare };
            let u = pool[rng.random_range(0..pool.len())];
            state.relocate(u, b);
            repairs += 1;
        } else {
            break;
        }
    }

    let mut batches = vec![Vec::new(); q];
    for (v, &b) in state.z.iter().enumerate() {
        batches[b].push(v);
    }
    batches.retain(|b| !b.is_empty());
    Ok(LllOutcome {
        decomposition: BatchDecomposition { k, batches },
        q,
        resamples,
        repairs,
    })
}

struct Resampler<'a> {
    g: &'a SimilarityGraph,
    k: usize,
    z: Vec<usize>,
    load: Vec<usize>,
    size: Vec<usize>,
    clean_in: Vec<usize>,
    violating: BTreeSet<usize>,
    bad_batches: BTreeSet<usize>,
}

impl<'a> Resampler<'a> {
    fn new(g: &'a SimilarityGraph, k: usize, q: usize, z: Vec<usize>) -> Self {
        let load = g.labelled_degrees(&z.iter().map(|&b| Some(b)).collect::<Vec<_>>());
        let mut size = vec![0; q];
        let mut clean_in = vec![0; q];
        for (v, &b) in z.iter().enumerate() {
            size[b] += 1;
            if !g.is_corrupted(v) {
                clean_in[b] += 1;
            }
        }
        let violating = (0..z.len()).filter(|&v| load[v] >= k).collect();
        let bad_batches = (0..q).filter(|&b| size[b] > 0 && clean_in[b] == 0).collect();
        Resampler {
            g,
            k,
            z,
            load,
            size,
            clean_in,
            violating,
            bad_batches,
        }
    }

    fn refresh_vertex(&mut self, v: usize) {
        if self.load[v] >= self.k {
            self.violating.insert(v);
        } else {
            self.violating.remove(&v);
        }
    }

    fn refresh_batch(&mut self, b: usize) {
        if self.size[b] > 0 && self.clean_in[b] == 0 {
            self.bad_batches.insert(b);
        } else {
            self.bad_batches.remove(&b);
        }
    }

    fn relocate(&mut self, w: usize, to: usize) {
        let from = self.z[w];
        if from == to {
            return;
        }
        let mut mates = 0;
        for u in self.g.neighbors(w) {
            if self.z[u] == from {
                self.load[u] -= 1;
                self.refresh_vertex(u);
            } else if self.z[u] == to {
                self.load[u] += 1;
                mates += 1;
                self.refresh_vertex(u);
            }
        }
        self.z[w] = to;
        self.load[w] = mates;
        self.refresh_vertex(w);
        self.size[from] -= 1;
        self.size[to] += 1;
        if !self.g.is_corrupted(w) {
            self.clean_in[from] -= 1;
            self.clean_in[to] += 1;
        }
        self.refresh_batch(from);
        self.refresh_batch(to);
    }
}

/// Minimum size of a k-good decomposition by exhaustive search over set
/// partitions, for `n <= n_cap` (at most [`EXACT_CAP`]).
///
/// Points are assigned in index order; a new batch is always opened by the
/// lowest unassigned index, which enumerates each partition once.
pub fn tau_exact(
    g: &SimilarityGraph,
    ds: &Dataset,
    k: usize,
    n_cap: usize,
) -> Result<(usize, BatchDecomposition)> {
    check_instance(g, ds, k)?;
    let n = ds.n();
    if n > n_cap.min(EXACT_CAP) {
        return Err(Error::invalid(format!(
            "exact search supports n <= {}, got {n}",
            n_cap.min(EXACT_CAP)
        )));
    }
    let adj: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).fold(0u64, |m, u| m | (1 << u)))
        .collect();
    let clean: Vec<bool> = (0..n).map(|v| !ds.is_corrupted(v)).collect();
    let mut clean_suffix = vec![0usize; n + 1];
    for v in (0..n).rev() {
        clean_suffix[v] = clean_suffix[v + 1] + usize::from(clean[v]);
    }
    if clean_suffix[0] == 0 {
        return Err(no_uncorrupted());
    }
    let mut search = PartitionSearch {
        adj,
        clean,
        clean_suffix,
        budget: k - 1,
        batches: Vec::new(),
        batch_clean: Vec::new(),
        load: vec![0; n],
        label: vec![0; n],
        best: n + 1,
        best_label: None,
    };
    search.assign(0);
    match search.best_label {
        Some(labels) => Ok((search.best, BatchDecomposition::from_labels(k, &labels))),
        None => Err(Error::Infeasible {
            reason: format!("no {k}-good decomposition exists"),
            witness: None,
        }),
    }
}

struct PartitionSearch {
    adj: Vec<u64>,
    clean: Vec<bool>,
    clean_suffix: Vec<usize>,
    budget: usize,
    batches: Vec<u64>,
    batch_clean: Vec<usize>,
    load: Vec<usize>,
    label: Vec<usize>,
    best: usize,
    best_label: Option<Vec<usize>>,
}

impl PartitionSearch {
    fn fits(&self, v: usize, mask: u64) -> bool {
        let mates = self.adj[v] & mask;
        if mates.count_ones() as usize > self.budget {
            return false;
        }
        let mut rest = mates;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            if self.load[u] + 1 > self.budget {
                return false;
            }
            rest &= rest - 1;
        }
        true
    }

    fn place(&mut self, v: usize, b: usize, delta: isize) {
        let mask = self.batches[b] & !(1 << v);
        let mates = self.adj[v] & mask;
        let mut rest = mates;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            self.load[u] = self.load[u].wrapping_add_signed(delta);
            rest &= rest - 1;
        }
        if delta > 0 {
            self.load[v] = mates.count_ones() as usize;
            self.batches[b] |= 1 << v;
            self.batch_clean[b] += usize::from(self.clean[v]);
            self.label[v] = b;
        } else {
            self.load[v] = 0;
            self.batches[b] &= !(1 << v);
            self.batch_clean[b] -= usize::from(self.clean[v]);
        }
    }

    fn assign(&mut self, v: usize) {
        let n = self.load.len();
        let lacking = self.batch_clean.iter().filter(|&&c| c == 0).count();
        if lacking > self.clean_suffix[v] {
            return;
        }
        if v == n {
            if lacking == 0 && self.batches.len() < self.best {
                self.best = self.batches.len();
                self.best_label = Some(self.label.clone());
            }
            return;
        }
        for b in 0..self.batches.len() {
            if self.best == 1 {
                return;
            }
            if self.fits(v, self.batches[b]) {
                self.place(v, b, 1);
                self.assign(v + 1);
                self.place(v, b, -1);
            }
        }
        if self.batches.len() + 1 < self.best {
            self.batches.push(0);
            self.batch_clean.push(0);
            let b = self.batches.len() - 1;
            self.place(v, b, 1);
            self.assign(v + 1);
            self.place(v, b, -1);
            self.batches.pop();
            self.batch_clean.pop();
        }
    }
}

/// Lower bound on the minimum k-good size from pairwise-similar witness
/// sets: at most `k` points of such a set can share a batch.
///
/// For each category the witness is its corrupted points together with the
/// most populated cell of side `r_n / sqrt(4d)` among its uncorrupted points
/// (cell diameter `r_n / 2`, so same-cell points are similar). With
/// `r_n = 0` a single uncorrupted point stands in for the cell.
pub fn tau_lower_bound(g: &SimilarityGraph, ds: &Dataset, k: usize) -> Result<usize> {
    check_instance(g, ds, k)?;
    let r_n = g.r_n();
    let side = r_n / (4.0 * ds.dim() as f64).sqrt();
    let mut corrupted: HashMap<u32, usize> = HashMap::new();
    let mut cells: HashMap<(u32, Vec<i64>), usize> = HashMap::new();
    let mut best_cell: HashMap<u32, usize> = HashMap::new();
    for p in ds.points() {
        match &p.x {
            None => *corrupted.entry(p.y).or_default() += 1,
            Some(x) => {
                let count = if r_n > 0.0 {
                    let key = x.iter().map(|&c| (c / side).floor() as i64).collect();
                    let slot = cells.entry((p.y, key)).or_default();
                    *slot += 1;
                    *slot
                } else {
                    1
                };
                let best = best_cell.entry(p.y).or_default();
                *best = (*best).max(count);
            }
        }
    }
    let categories: BTreeSet<u32> = corrupted.keys().chain(best_cell.keys()).copied().collect();
    let widest = categories
        .into_iter()
        .map(|c| corrupted.get(&c).copied().unwrap_or(0) + best_cell.get(&c).copied().unwrap_or(0))
        .max()
        .unwrap_or(0);
    Ok(widest.div_ceil(k).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, GeneratorConfig};

    fn clique(n: usize) -> Dataset {
        Dataset::from_parts(2, (0..n).map(|i| (Some(vec![0.5 + 1e-3 * i as f64, 0.5]), 0)))
            .unwrap()
    }

    fn graph(ds: &Dataset, r: f64) -> SimilarityGraph {
        SimilarityGraph::build(ds, r).unwrap()
    }

    fn edgeless(n: usize) -> Dataset {
        Dataset::from_parts(1, (0..n).map(|i| (Some(vec![0.5]), i as u32))).unwrap()
    }

    #[test]
    fn singletons_are_valid() {
        let ds = clique(6);
        let g = graph(&ds, 0.5);
        let dec = BatchDecomposition {
            k: 1,
            batches: (0..6).map(|v| vec![v]).collect(),
        };
        assert!(check_k_good(&g, &ds, &dec).unwrap().valid);
    }

    #[test]
    fn similar_pair_breaks_budget_one() {
        let ds = clique(2);
        let g = graph(&ds, 0.5);
        let dec = BatchDecomposition {
            k: 1,
            batches: vec![vec![0, 1]],
        };
        let report = check_k_good(&g, &ds, &dec).unwrap();
        assert!(!report.valid);
        assert_eq!(report.violations[0].kind, ViolationKind::SimilarityBudget);
        assert_eq!(report.violations[0].observed, 1);
    }

    #[test]
    fn all_corrupted_batches_flagged() {
        let ds = Dataset::from_parts(1, (0..4).map(|i| (None, i % 2))).unwrap();
        let g = graph(&ds, 0.1);
        let dec = BatchDecomposition {
            k: 4,
            batches: vec![vec![0, 1], vec![2], vec![3]],
        };
        let report = check_k_good(&g, &ds, &dec).unwrap();
        let missing = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::NoUncorrupted)
            .count();
        assert_eq!(missing, 3);
        assert!(decompose_greedy(&g, &ds, 2, Order::Natural).is_err());
        assert!(tau_exact(&g, &ds, 2, EXACT_CAP).is_err());
    }

    #[test]
    fn structural_errors_are_not_violations() {
        let ds = clique(3);
        let g = graph(&ds, 0.5);
        for batches in [vec![vec![0, 1]], vec![vec![0, 1], vec![1, 2]], vec![vec![0, 1, 2], vec![]]] {
            let dec = BatchDecomposition { k: 3, batches };
            assert!(matches!(check_k_good(&g, &ds, &dec), Err(Error::InvalidInput(_))));
        }
    }

    #[test]
    fn greedy_on_clique() {
        let ds = clique(10);
        let g = graph(&ds, 0.5);
        let dec = decompose_greedy(&g, &ds, 3, Order::Natural).unwrap();
        let mut sizes: Vec<usize> = dec.batches.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 3, 3, 3]);
        assert!(check_k_good(&g, &ds, &dec).unwrap().valid);
    }

    #[test]
    fn greedy_trivial_cases() {
        let ds = edgeless(9);
        let g = graph(&ds, 1.0);
        assert_eq!(decompose_greedy(&g, &ds, 1, Order::Natural).unwrap().size(), 1);
        let ds = clique(7);
        let g = graph(&ds, 0.5);
        for order in [Order::Natural, Order::DegreeDesc, Order::Random { seed: 3 }] {
            assert_eq!(decompose_greedy(&g, &ds, 7, order).unwrap().size(), 1);
        }
    }

    #[test]
    fn greedy_moves_a_clean_point_for_overflowing_corrupted_ones() {
        // Two clean points of category 0 in one batch, three corrupted
        // points of category 1 that are mutually similar; k = 1.
        let ds = Dataset::from_parts(
            1,
            vec![
                (Some(vec![0.0]), 0),
                (Some(vec![0.9]), 0),
                (None, 1),
                (None, 1),
                (Some(vec![0.5]), 2),
            ],
        )
        .unwrap();
        let g = graph(&ds, 0.1);
        let dec = decompose_greedy(&g, &ds, 1, Order::Natural).unwrap();
        assert!(check_k_good(&g, &ds, &dec).unwrap().valid);
        assert_eq!(dec.size(), 2);
    }

    #[test]
    fn greedy_reports_stuck_corrupted_point() {
        let ds = Dataset::from_parts(1, vec![(Some(vec![0.0]), 0), (None, 0)]).unwrap();
        let g = graph(&ds, 0.1);
        match decompose_greedy(&g, &ds, 1, Order::Natural) {
            Err(Error::Infeasible { witness, .. }) => assert_eq!(witness, Some(1)),
            other => panic!("{other:?}"),
        }
        assert!(tau_exact(&g, &ds, 1, EXACT_CAP).is_err());
    }

    #[test]
    fn lll_edgeless() {
        let ds = edgeless(12);
        let g = graph(&ds, 1.0);
        let out = decompose_lll(&g, &ds, 1, 3.0, 9, 100).unwrap();
        assert_eq!(out.q, 1);
        assert_eq!(out.resamples, 0);
        assert!(check_k_good(&g, &ds, &out.decomposition).unwrap().valid);
    }

    #[test]
    fn lll_on_clique() {
        let ds = clique(10);
        let g = graph(&ds, 0.5);
        // max degree 9, k = 3: theta = 2 gives q = 6 >= 4.
        for seed in 0..20 {
            let out = decompose_lll(&g, &ds, 3, 2.0, seed, 10_000).unwrap();
            assert_eq!(out.q, 6);
            assert!(out.decomposition.size() <= 6);
            assert!(check_k_good(&g, &ds, &out.decomposition).unwrap().valid);
        }
    }

    #[test]
    fn lll_budget_exhaustion() {
        let ds = clique(10);
        let g = graph(&ds, 0.5);
        // q = 1 can never separate a 10-clique with k = 3.
        match decompose_lll(&g, &ds, 3, 0.1, 1, 50) {
            Err(Error::BudgetExhausted { rounds }) => assert_eq!(rounds, 50),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lll_repairs_corrupted_only_batches() {
        let cfg = GeneratorConfig::uniform(120, 2, 0.05, 6, 21).with_corruption(0.2);
        let ds = generate(&cfg).unwrap();
        let g = graph(&ds, cfg.r_n);
        let out = decompose_lll(&g, &ds, 2, 2.0, 5, 100_000).unwrap();
        assert!(check_k_good(&g, &ds, &out.decomposition).unwrap().valid);
    }

    #[test]
    fn exact_examples() {
        let ds = clique(10);
        let g = graph(&ds, 0.5);
        let (t, dec) = tau_exact(&g, &ds, 3, EXACT_CAP).unwrap();
        assert_eq!(t, 4);
        assert!(check_k_good(&g, &ds, &dec).unwrap().valid);

        let ds = edgeless(8);
        let g = graph(&ds, 1.0);
        assert_eq!(tau_exact(&g, &ds, 1, EXACT_CAP).unwrap().0, 1);

        let mut parts: Vec<_> = (0..4).map(|i| (Some(vec![0.1 + 1e-3 * i as f64]), 0)).collect();
        parts.extend((0..4).map(|i| (Some(vec![0.9 + 1e-3 * i as f64]), 0)));
        let ds = Dataset::from_parts(1, parts).unwrap();
        let g = graph(&ds, 0.1);
        assert_eq!(tau_exact(&g, &ds, 2, EXACT_CAP).unwrap().0, 2);
    }

    #[test]
    fn exact_rejects_large_n() {
        let ds = edgeless(15);
        let g = graph(&ds, 1.0);
        assert!(tau_exact(&g, &ds, 1, 20).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let ds = clique(10);
        let g = graph(&ds, 0.5);
        assert!(tau_lower_bound(&g, &ds, 3).unwrap() >= 4);

        let ds = edgeless(6);
        let g = graph(&ds, 1.0);
        assert_eq!(tau_lower_bound(&g, &ds, 1).unwrap(), 1);

        let mut parts: Vec<_> = (0..7).map(|_| (None, 0)).collect();
        parts.push((Some(vec![0.5]), 1));
        let ds = Dataset::from_parts(1, parts).unwrap();
        let g = graph(&ds, 0.1);
        assert!(tau_lower_bound(&g, &ds, 2).unwrap() >= 4);
    }

    #[test]
    fn labels_round_trip() {
        let dec = BatchDecomposition::from_labels(2, &[5, 5, 1, 7, 1]);
        assert_eq!(dec.batches, vec![vec![0, 1], vec![2, 4], vec![3]]);
        assert_eq!(dec.labels(5).unwrap(), vec![0, 0, 1, 2, 1]);
    }
}
