//! Largest subsets with similarity at most `k - 1`: every member is similar
//! to at most `k - 1` other members. For `k = 1` these are the
//! similarity-free subsets.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::order::Order;
use crate::rng;
use crate::similarity::SimilarityGraph;

/// Largest `n` accepted by [`nsim_exact`].
pub const EXACT_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetMethod {
    GreedyDirect,
    GreedyKway,
    Exact,
}

impl SubsetMethod {
    pub fn name(self) -> &'static str {
        match self {
            SubsetMethod::GreedyDirect => "greedy-direct",
            SubsetMethod::GreedyKway => "greedy-kway",
            SubsetMethod::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub k: usize,
    /// Ascending.
    pub indices: Vec<usize>,
    pub method: SubsetMethod,
}

impl SubsetResult {
    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub within_budget: bool,
    /// Largest number of similar members seen by any member.
    pub max_observed: usize,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::invalid("k must be >= 1"))
    } else {
        Ok(())
    }
}

pub fn check_similarity_budget(
    g: &SimilarityGraph,
    indices: &[usize],
    k: usize,
) -> Result<BudgetCheck> {
    check_k(k)?;
    let mut labels = vec![None; g.n()];
    for &v in indices {
        if v >= g.n() {
            return Err(Error::invalid(format!("index {v} out of range for n = {}", g.n())));
        }
        if labels[v].replace(0).is_some() {
            return Err(Error::invalid(format!("index {v} listed twice")));
        }
    }
    let max_observed = g.labelled_degrees(&labels).into_iter().max().unwrap_or(0);
    Ok(BudgetCheck {
        within_budget: max_observed < k,
        max_observed,
    })
}

/// Incremental subset that keeps every member within budget.
struct Admitted<'a> {
    g: &'a SimilarityGraph,
    k: usize,
    member: Vec<bool>,
    load: Vec<usize>,
}

impl<'a> Admitted<'a> {
    fn new(g: &'a SimilarityGraph, k: usize) -> Self {
        Admitted {
            g,
            k,
            member: vec![false; g.n()],
            load: vec![0; g.n()],
        }
    }

    /// Adds `v` when it and its similar members stay within budget and,
    /// if `free_within` is given, `v` has no similar member satisfying it.
    fn try_admit(&mut self, v: usize, free_within: Option<&dyn Fn(usize) -> bool>) -> bool {
        let mut mates = 0;
        for u in self.g.neighbors(v) {
            if self.member[u] {
                if self.load[u] + 1 > self.k - 1 {
                    return false;
                }
                if free_within.is_some_and(|same| same(u)) {
                    return false;
                }
                mates += 1;
                if mates > self.k - 1 {
                    return false;
                }
            }
        }
        for u in self.g.neighbors(v) {
            if self.member[u] {
                self.load[u] += 1;
            }
        }
        self.member[v] = true;
        self.load[v] = mates;
        true
    }

    fn indices(&self) -> Vec<usize> {
        (0..self.g.n()).filter(|&v| self.member[v]).collect()
    }
}

/// One pass in `order`, admitting each point when the subset keeps
/// similarity at most `k - 1`.
pub fn nsim_greedy_direct(g: &SimilarityGraph, k: usize, order: Order) -> Result<SubsetResult> {
    check_k(k)?;
    let mut set = Admitted::new(g, k);
    for v in order.arrange((0..g.n()).collect(), g) {
        set.try_admit(v, None);
    }
    Ok(SubsetResult {
        k,
        indices: set.indices(),
        method: SubsetMethod::GreedyDirect,
    })
}

/// Splits the indices at random into `k` groups whose sizes differ by at
/// most one, grows a similarity-free set inside each group (groups in
/// order, members by ascending index) and returns the union.
///
/// A point may be similar to several members of one other group's
/// similarity-free set, so the union alone does not bound similarity by
/// `k - 1`; each admission is therefore also checked against the union
/// built so far.
pub fn nsim_greedy_kway(g: &SimilarityGraph, k: usize, seed: u64) -> Result<SubsetResult> {
    check_k(k)?;
    if k > g.n() {
        return Err(Error::invalid(format!("k = {k} exceeds n = {}", g.n())));
    }
    let mut perm: Vec<usize> = (0..g.n()).collect();
    perm.shuffle(&mut rng::stream(seed, 0));
    let mut group = vec![0usize; g.n()];
    for (pos, &v) in perm.iter().enumerate() {
        group[v] = pos % k;
    }
    let mut set = Admitted::new(g, k);
    for j in 0..k {
        let same_group = |u: usize| group[u] == j;
        for v in (0..g.n()).filter(|&v| group[v] == j) {
            set.try_admit(v, Some(&same_group));
        }
    }
    Ok(SubsetResult {
        k,
        indices: set.indices(),
        method: SubsetMethod::GreedyKway,
    })
}

/// Counting certificate `N_sim(k) <= Σ_c [min(m_c, k) + Σ_cells min(n_{cell,c}, k)]`
/// over cells of side `r_n / sqrt(4d)`, where `m_c` counts corrupted points
/// of category `c` and `n_{cell,c}` uncorrupted ones. Each group is pairwise
/// similar, so a subset with similarity `k - 1` keeps at most `k` of it.
/// With `r_n = 0` no geometric grouping applies and every uncorrupted point
/// counts once.
pub fn nsim_upper_grid(ds: &Dataset, k: usize, r_n: f64) -> Result<usize> {
    check_k(k)?;
    if !(r_n.is_finite() && r_n >= 0.0) {
        return Err(Error::invalid(format!("r_n must be >= 0, got {r_n}")));
    }
    let side = r_n / (4.0 * ds.dim() as f64).sqrt();
    let mut corrupted: HashMap<u32, usize> = HashMap::new();
    let mut cells: HashMap<(u32, Vec<i64>), usize> = HashMap::new();
    let mut loose = 0;
    for p in ds.points() {
        match &p.x {
            None => *corrupted.entry(p.y).or_default() += 1,
            Some(x) if r_n > 0.0 => {
                let key = x.iter().map(|&c| (c / side).floor() as i64).collect();
                *cells.entry((p.y, key)).or_default() += 1;
            }
            Some(_) => loose += 1,
        }
    }
    Ok(corrupted.values().map(|&m| m.min(k)).sum::<usize>()
        + cells.values().map(|&m| m.min(k)).sum::<usize>()
        + loose)
}

/// Exact maximum by include/exclude branch and bound, for `n <= n_cap`
/// (at most [`EXACT_CAP`]). Vertices are tried in ascending degree order.
pub fn nsim_exact(g: &SimilarityGraph, k: usize, n_cap: usize) -> Result<SubsetResult> {
    check_k(k)?;
    let n = g.n();
    if n > n_cap.min(EXACT_CAP) {
        return Err(Error::invalid(format!(
            "exact search supports n <= {}, got {n}",
            n_cap.min(EXACT_CAP)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (g.degree(v), v));
    let adj: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).fold(0u64, |m, u| m | (1 << u)))
        .collect();
    let mut search = SubsetSearch {
        adj,
        order,
        budget: k - 1,
        best: 0,
        best_mask: 0,
    };
    search.descend(0, 0);
    let indices = (0..n).filter(|&v| search.best_mask >> v & 1 == 1).collect();
    Ok(SubsetResult {
        k,
        indices,
        method: SubsetMethod::Exact,
    })
}

struct SubsetSearch {
    adj: Vec<u64>,
    order: Vec<usize>,
    budget: usize,
    best: usize,
    best_mask: u64,
}

impl SubsetSearch {
    fn admissible(&self, v: usize, mask: u64) -> bool {
        let mates = self.adj[v] & mask;
        if mates.count_ones() as usize > self.budget {
            return false;
        }
        let mut rest = mates;
        while rest != 0 {
            let u = rest.trailing_zeros() as usize;
            if (self.adj[u] & mask).count_ones() as usize + 1 > self.budget {
                return false;
            }
            rest &= rest - 1;
        }
        true
    }

    fn descend(&mut self, pos: usize, mask: u64) {
        let size = mask.count_ones() as usize;
        if size > self.best {
            self.best = size;
            self.best_mask = mask;
        }
        if pos == self.order.len() || size + (self.order.len() - pos) <= self.best {
            return;
        }
        let v = self.order[pos];
        if self.admissible(v, mask) {
            self.descend(pos + 1, mask | (1 << v));
        }
        self.descend(pos + 1, mask);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, GeneratorConfig};

    fn clique(n: usize) -> (Dataset, SimilarityGraph) {
        let ds = Dataset::from_parts(2, (0..n).map(|i| (Some(vec![0.5 + 1e-3 * i as f64, 0.5]), 0)))
            .unwrap();
        let g = SimilarityGraph::build(&ds, 0.1).unwrap();
        (ds, g)
    }

    fn edgeless(n: usize) -> (Dataset, SimilarityGraph) {
        let ds = Dataset::from_parts(1, (0..n).map(|i| (Some(vec![0.5]), i as u32))).unwrap();
        let g = SimilarityGraph::build(&ds, 1.0).unwrap();
        (ds, g)
    }

    #[test]
    fn budget_check_examples() {
        let (_, g) = clique(4);
        let c = check_similarity_budget(&g, &[], 1).unwrap();
        assert_eq!((c.within_budget, c.max_observed), (true, 0));
        let c = check_similarity_budget(&g, &[0, 1, 2, 3], 3).unwrap();
        assert_eq!((c.within_budget, c.max_observed), (false, 3));
        assert!(check_similarity_budget(&g, &[0, 0], 3).is_err());
        assert!(check_similarity_budget(&g, &[9], 3).is_err());
    }

    #[test]
    fn direct_examples() {
        let (_, g) = edgeless(9);
        assert_eq!(nsim_greedy_direct(&g, 1, Order::Natural).unwrap().size(), 9);
        let (_, g) = clique(10);
        for k in 1..=12 {
            assert_eq!(nsim_greedy_direct(&g, k, Order::Natural).unwrap().size(), k.min(10));
        }
    }

    #[test]
    fn direct_k1_is_maximal() {
        let cfg = GeneratorConfig::uniform(300, 2, 0.1, 2, 77);
        let ds = generate(&cfg).unwrap();
        let g = SimilarityGraph::build(&ds, cfg.r_n).unwrap();
        let s = nsim_greedy_direct(&g, 1, Order::Natural).unwrap();
        let mut member = vec![false; g.n()];
        for &v in &s.indices {
            member[v] = true;
        }
        for v in (0..g.n()).filter(|&v| !member[v]) {
            assert!(g.neighbors(v).any(|u| member[u]), "{v} could be added");
        }
    }

    #[test]
    fn kway_examples() {
        let cfg = GeneratorConfig::uniform(300, 2, 0.08, 3, 1).with_corruption(0.05);
        let ds = generate(&cfg).unwrap();
        let g = SimilarityGraph::build(&ds, cfg.r_n).unwrap();
        assert_eq!(
            nsim_greedy_kway(&g, 1, 42).unwrap().indices,
            nsim_greedy_direct(&g, 1, Order::Natural).unwrap().indices
        );
        for k in 2..6 {
            let s = nsim_greedy_kway(&g, k, 42).unwrap();
            assert!(check_similarity_budget(&g, &s.indices, k).unwrap().within_budget);
        }
        let (_, g) = clique(10);
        assert_eq!(nsim_greedy_kway(&g, 3, 5).unwrap().size(), 3);
        assert!(nsim_greedy_kway(&g, 11, 5).is_err());
    }

    #[test]
    fn kway_union_needs_budget_check() {
        // 1 sits between 0 and 2, which are far apart from each other. A
        // split putting 1 in one group and 0, 2 in the other makes the plain
        // union give point 1 two similar members.
        let ds = Dataset::from_parts(
            1,
            vec![(Some(vec![0.0]), 0), (Some(vec![0.5]), 0), (Some(vec![1.0]), 0)],
        )
        .unwrap();
        let g = SimilarityGraph::build(&ds, 0.6).unwrap();
        for seed in 0..32 {
            let s = nsim_greedy_kway(&g, 2, seed).unwrap();
            assert!(check_similarity_budget(&g, &s.indices, 2).unwrap().within_budget);
        }
    }

    #[test]
    fn grid_examples() {
        let (ds, _) = clique(10);
        for k in 1..=12 {
            assert_eq!(nsim_upper_grid(&ds, k, 0.5).unwrap(), k.min(10));
        }
        let far = Dataset::from_parts(1, (0..6).map(|i| (Some(vec![i as f64 * 10.0]), 0))).unwrap();
        assert_eq!(nsim_upper_grid(&far, 1, 0.5).unwrap(), 6);
        let mixed = Dataset::from_parts(
            1,
            vec![(None, 0), (None, 0), (None, 0), (Some(vec![0.1]), 0), (Some(vec![0.1]), 0)],
        )
        .unwrap();
        assert_eq!(nsim_upper_grid(&mixed, 2, 0.0).unwrap(), 4);
        assert!(nsim_upper_grid(&mixed, 2, -1.0).is_err());
    }

    #[test]
    fn exact_examples() {
        let (_, g) = clique(10);
        assert_eq!(nsim_exact(&g, 3, EXACT_CAP).unwrap().size(), 3);
        let (_, g) = edgeless(8);
        for k in 1..4 {
            assert_eq!(nsim_exact(&g, k, EXACT_CAP).unwrap().size(), 8);
        }
        let mut parts: Vec<_> = (0..5).map(|i| (Some(vec![0.1 + 1e-3 * i as f64]), 0)).collect();
        parts.extend((0..7).map(|i| (Some(vec![0.9 + 1e-3 * i as f64]), 0)));
        let ds = Dataset::from_parts(1, parts).unwrap();
        let g = SimilarityGraph::build(&ds, 0.1).unwrap();
        let s = nsim_exact(&g, 2, EXACT_CAP).unwrap();
        assert_eq!(s.size(), 4);
        assert!(check_similarity_budget(&g, &s.indices, 2).unwrap().within_budget);
        let (_, g) = edgeless(15);
        assert!(nsim_exact(&g, 1, 20).is_err());
    }
}
