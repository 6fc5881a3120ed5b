//! The similarity relation and the graph it induces.
//!
//! Two points are similar when their categories agree and either one of them
//! is corrupted or both are uncorrupted at Euclidean distance strictly below
//! `r_n`. Corrupted points are therefore joined to every other point of their
//! category; those cliques are never materialized; only the geometric edges
//! between uncorrupted points are stored.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise similarity. Self-pairs are rejected.
pub fn is_similar(ds: &Dataset, i: usize, j: usize, r_n: f64) -> Result<bool> {
    if i == j {
        return Err(Error::invalid(format!("similarity of {i} with itself is undefined")));
    }
    if i >= ds.n() || j >= ds.n() {
        return Err(Error::invalid(format!("index out of range for n = {}", ds.n())));
    }
    Ok(similar_unchecked(ds, i, j, r_n * r_n))
}

fn similar_unchecked(ds: &Dataset, i: usize, j: usize, r2: f64) -> bool {
    if ds.category(i) != ds.category(j) {
        return false;
    }
    match (ds.coords(i), ds.coords(j)) {
        (Some(a), Some(b)) => squared_distance(a, b) < r2,
        _ => true,
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// Geometric edges in CSR form; corruption edges implied by category.
    Implicit {
        geo_offsets: Vec<usize>,
        geo_targets: Vec<usize>,
    },
    /// Every edge listed, as produced by the pairwise oracle.
    Explicit { adjacency: Vec<Vec<usize>> },
}

/// Immutable similarity graph over one dataset.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    n: usize,
    r_n: f64,
    category: Vec<u32>,
    corrupted: Vec<bool>,
    /// Ascending indices of each category's points.
    members: Vec<Vec<usize>>,
    /// Ascending indices of each category's corrupted points.
    corrupted_members: Vec<Vec<usize>>,
    storage: Storage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub max_degree: usize,
    pub argmax: usize,
    pub mean_degree: f64,
    /// `histogram[j]` counts vertices of degree `j`.
    pub histogram: Vec<usize>,
}

type CellKey = Vec<i64>;

fn cell_of(x: &[f64], side: f64) -> CellKey {
    x.iter().map(|&v| (v / side).floor() as i64).collect()
}

/// Offsets `{-1, 0, 1}^d`.
fn neighbor_offsets(d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect();
    }
    out
}

fn category_lists(ds: &Dataset) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let m = ds.observed_cat_size();
    let mut members = vec![Vec::new(); m];
    let mut corrupted = vec![Vec::new(); m];
    for p in ds.points() {
        members[p.y as usize].push(p.index);
        if p.corrupted() {
            corrupted[p.y as usize].push(p.index);
        }
    }
    (members, corrupted)
}

impl SimilarityGraph {
    /// Builds the graph with a uniform grid of cell side `r_n` per category,
    /// so that candidate neighbors come from the `3^d` surrounding cells.
    pub fn build(ds: &Dataset, r_n: f64) -> Result<Self> {
        check_radius(r_n)?;
        let (members, corrupted_members) = category_lists(ds);
        let n = ds.n();
        let r2 = r_n * r_n;

        let mut geo: Vec<Vec<usize>> = vec![Vec::new(); n];
        if r_n > 0.0 {
            let mut grid: HashMap<(u32, CellKey), Vec<usize>> = HashMap::new();
            for p in ds.points() {
                if let Some(x) = &p.x {
                    grid.entry((p.y, cell_of(x, r_n))).or_default().push(p.index);
                }
            }
            let offsets = neighbor_offsets(ds.dim());
            geo = (0..n)
                .into_par_iter()
                .map(|v| {
                    let Some(x) = ds.coords(v) else {
                        return Vec::new();
                    };
                    let y = ds.category(v);
                    let home = cell_of(x, r_n);
                    let mut out = Vec::new();
                    for off in &offsets {
                        let key: CellKey = home.iter().zip(off).map(|(c, o)| c + o).collect();
                        if let Some(bucket) = grid.get(&(y, key)) {
                            out.extend(bucket.iter().copied().filter(|&u| {
                                u != v && squared_distance(x, ds.coords(u).unwrap()) < r2
                            }));
                        }
                    }
                    out.sort_unstable();
                    out
                })
                .collect();
        }

        let mut geo_offsets = Vec::with_capacity(n + 1);
        geo_offsets.push(0);
        for list in &geo {
            geo_offsets.push(geo_offsets.last().unwrap() + list.len());
        }
        let geo_targets = geo.into_iter().flatten().collect();

        Ok(SimilarityGraph {
            n,
            r_n,
            category: ds.points().iter().map(|p| p.y).collect(),
            corrupted: ds.points().iter().map(|p| p.corrupted()).collect(),
            members,
            corrupted_members,
            storage: Storage::Implicit {
                geo_offsets,
                geo_targets,
            },
        })
    }

    /// Quadratic reference construction: `is_similar` on every pair.
    pub fn build_bruteforce(ds: &Dataset, r_n: f64) -> Result<Self> {
        check_radius(r_n)?;
        let (members, corrupted_members) = category_lists(ds);
        let n = ds.n();
        let mut adjacency = vec![Vec::new(); n];
        for (i, adj) in adjacency.iter_mut().enumerate() {
            for j in 0..n {
                if i != j && is_similar(ds, i, j, r_n)? {
                    adj.push(j);
                }
            }
        }
        Ok(SimilarityGraph {
            n,
            r_n,
            category: ds.points().iter().map(|p| p.y).collect(),
            corrupted: ds.points().iter().map(|p| p.corrupted()).collect(),
            members,
            corrupted_members,
            storage: Storage::Explicit { adjacency },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    pub fn category(&self, v: usize) -> u32 {
        self.category[v]
    }

    pub fn is_corrupted(&self, v: usize) -> bool {
        self.corrupted[v]
    }

    pub fn category_members(&self, c: u32) -> &[usize] {
        &self.members[c as usize]
    }

    pub fn corrupted_members(&self, c: u32) -> &[usize] {
        &self.corrupted_members[c as usize]
    }

    pub fn cat_count(&self) -> usize {
        self.members.len()
    }

    fn geometric(&self, v: usize) -> &[usize] {
        match &self.storage {
            Storage::Implicit {
                geo_offsets,
                geo_targets,
            } => &geo_targets[geo_offsets[v]..geo_offsets[v + 1]],
            Storage::Explicit { .. } => &[],
        }
    }

    /// Number of similar points. Corrupted vertices are answered from the
    /// category counts without touching edges.
    pub fn degree(&self, v: usize) -> usize {
        match &self.storage {
            Storage::Explicit { adjacency } => adjacency[v].len(),
            Storage::Implicit { .. } => {
                let c = self.category[v] as usize;
                if self.corrupted[v] {
                    self.members[c].len() - 1
                } else {
                    self.corrupted_members[c].len() + self.geometric(v).len()
                }
            }
        }
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> Neighbors<'_> {
        match &self.storage {
            Storage::Explicit { adjacency } => Neighbors::Slice(adjacency[v].iter()),
            Storage::Implicit { .. } => {
                let c = self.category[v] as usize;
                if self.corrupted[v] {
                    Neighbors::Skip {
                        inner: self.members[c].iter(),
                        skip: v,
                    }
                } else {
                    Neighbors::Merge {
                        a: self.corrupted_members[c].iter().peekable(),
                        b: self.geometric(v).iter().peekable(),
                    }
                }
            }
        }
    }

    pub fn neighbor_vec(&self, v: usize) -> Vec<usize> {
        self.neighbors(v).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<usize> = (0..self.n).map(|v| self.degree(v)).collect();
        let (argmax, max_degree) = degrees
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0), |best, (v, d)| if d > best.1 { (v, d) } else { best });
        let mut histogram = vec![0; max_degree + 1];
        for &d in &degrees {
            histogram[d] += 1;
        }
        DegreeStats {
            max_degree,
            argmax,
            mean_degree: degrees.iter().sum::<usize>() as f64 / self.n as f64,
            histogram,
        }
    }

    /// For every `v` with `labels[v] = Some(l)`, the number of neighbors that
    /// also carry label `l`; unlabelled vertices get zero.
    ///
    /// Clique contributions are counted per `(label, category)` so the cost
    /// is linear in the stored geometric edges.
    pub fn labelled_degrees(&self, labels: &[Option<usize>]) -> Vec<usize> {
        assert_eq!(labels.len(), self.n);
        match &self.storage {
            Storage::Explicit { adjacency } => (0..self.n)
                .map(|v| match labels[v] {
                    None => 0,
                    Some(l) => adjacency[v].iter().filter(|&&u| labels[u] == Some(l)).count(),
                })
                .collect(),
            Storage::Implicit { .. } => {
                let mut total: HashMap<(usize, u32), usize> = HashMap::new();
                let mut dirty: HashMap<(usize, u32), usize> = HashMap::new();
                for (v, label) in labels.iter().enumerate() {
                    if let Some(l) = *label {
                        *total.entry((l, self.category[v])).or_default() += 1;
                        if self.corrupted[v] {
                            *dirty.entry((l, self.category[v])).or_default() += 1;
                        }
                    }
                }
                (0..self.n)
                    .map(|v| {
                        let Some(l) = labels[v] else { return 0 };
                        let key = (l, self.category[v]);
                        if self.corrupted[v] {
                            total[&key] - 1
                        } else {
                            dirty.get(&key).copied().unwrap_or(0)
                                + self
                                    .geometric(v)
                                    .iter()
                                    .filter(|&&u| labels[u] == Some(l))
                                    .count()
                        }
                    })
                    .collect()
            }
        }
    }

    /// Edge list with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|u| self.neighbors(u).filter(move |&v| u < v).map(move |v| (u, v)))
            .collect()
    }
}

fn check_radius(r_n: f64) -> Result<()> {
    if r_n.is_finite() && r_n >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("r_n must be finite and >= 0, got {r_n}")))
    }
}

/// Ascending neighbor iterator.
pub enum Neighbors<'a> {
    Slice(std::slice::Iter<'a, usize>),
    Skip {
        inner: std::slice::Iter<'a, usize>,
        skip: usize,
    },
    Merge {
        a: std::iter::Peekable<std::slice::Iter<'a, usize>>,
        b: std::iter::Peekable<std::slice::Iter<'a, usize>>,
    },
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Slice(it) => it.next().copied(),
            Neighbors::Skip { inner, skip } => inner.by_ref().copied().find(|u| u != skip),
            Neighbors::Merge { a, b } => match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x <= y {
                        a.next().copied()
                    } else {
                        b.next().copied()
                    }
                }
                (Some(_), None) => a.next().copied(),
                (None, _) => b.next().copied(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, GeneratorConfig};

    fn ds(parts: Vec<(Option<Vec<f64>>, u32)>) -> Dataset {
        let d = parts
            .iter()
            .find_map(|(x, _)| x.as_ref().map(|v| v.len()))
            .unwrap_or(1);
        Dataset::from_parts(d, parts).unwrap()
    }

    fn adjacency(g: &SimilarityGraph) -> Vec<Vec<usize>> {
        (0..g.n()).map(|v| g.neighbor_vec(v)).collect()
    }

    #[test]
    fn similarity_examples() {
        let d = ds(vec![
            (Some(vec![0.5, 0.5]), 0),
            (Some(vec![0.5, 0.5]), 0),
            (None, 1),
            (None, 1),
            (Some(vec![0.5, 0.5]), 1),
        ]);
        assert!(!is_similar(&d, 0, 1, 0.0).unwrap());
        assert!(is_similar(&d, 0, 1, 1e-9).unwrap());
        assert!(is_similar(&d, 2, 3, 0.0).unwrap());
        assert!(!is_similar(&d, 0, 4, 10.0).unwrap());
        assert!(is_similar(&d, 4, 2, 0.0).unwrap());
        assert!(is_similar(&d, 0, 0, 1.0).is_err());
    }

    #[test]
    fn strict_radius() {
        let d = ds(vec![(Some(vec![0.0]), 0), (Some(vec![0.25]), 0)]);
        assert!(!is_similar(&d, 0, 1, 0.25).unwrap());
        assert!(is_similar(&d, 0, 1, 0.250001).unwrap());
        let g = SimilarityGraph::build(&d, 0.25).unwrap();
        assert_eq!(g.degree(0), 0);
    }

    #[test]
    fn pair_within_radius() {
        let d = ds(vec![(Some(vec![0.1, 0.1]), 0), (Some(vec![0.15, 0.1]), 0)]);
        let g = SimilarityGraph::build(&d, 0.1).unwrap();
        assert_eq!((g.degree(0), g.degree(1)), (1, 1));
    }

    #[test]
    fn corrupted_clique() {
        let d = ds((0..6).map(|_| (None, 0)).collect());
        let g = SimilarityGraph::build(&d, 0.3).unwrap();
        assert!((0..6).all(|v| g.degree(v) == 5));
        assert_eq!(g.neighbor_vec(2), vec![0, 1, 3, 4, 5]);
    }

    #[test]
    fn star_around_corrupted_point() {
        let mut parts: Vec<_> = (0..5).map(|i| (Some(vec![i as f64 * 10.0]), 0)).collect();
        parts.insert(2, (None, 0));
        let d = ds(parts);
        for g in [
            SimilarityGraph::build(&d, 1.0).unwrap(),
            SimilarityGraph::build_bruteforce(&d, 1.0).unwrap(),
        ] {
            assert_eq!(g.degree(2), 5);
            for v in [0, 1, 3, 4, 5] {
                assert_eq!(g.degree(v), 1);
                assert_eq!(g.neighbor_vec(v), vec![2]);
            }
        }
    }

    #[test]
    fn distinct_categories_edgeless() {
        let d = ds((0..8).map(|i| (Some(vec![0.5]), i)).collect());
        let g = SimilarityGraph::build(&d, 1.0).unwrap();
        assert_eq!(g.degree_stats().max_degree, 0);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn zero_radius_keeps_cliques() {
        let d = ds(vec![(Some(vec![0.5]), 0), (None, 0), (Some(vec![0.5]), 0)]);
        let g = SimilarityGraph::build(&d, 0.0).unwrap();
        assert_eq!(adjacency(&g), adjacency(&SimilarityGraph::build_bruteforce(&d, 0.0).unwrap()));
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(0), 1);
    }

    #[test]
    fn unbounded_coordinates() {
        let d = ds(vec![
            (Some(vec![-1e6, 3.0]), 0),
            (Some(vec![-1e6 + 0.5, 3.0]), 0),
            (Some(vec![1e9, -1e9]), 0),
        ]);
        let g = SimilarityGraph::build(&d, 1.0).unwrap();
        assert_eq!(adjacency(&g), vec![vec![1], vec![0], vec![]]);
    }

    #[test]
    fn mixed_instance_matches_oracle() {
        let cfg = GeneratorConfig::uniform(200, 2, 0.15, 3, 4).with_corruption(0.1);
        let d = generate(&cfg).unwrap();
        let g = SimilarityGraph::build(&d, cfg.r_n).unwrap();
        let o = SimilarityGraph::build_bruteforce(&d, cfg.r_n).unwrap();
        assert_eq!(adjacency(&g), adjacency(&o));
        assert_eq!(g.degree_stats(), o.degree_stats());
        for v in 0..g.n() {
            assert_eq!(g.degree(v), g.neighbor_vec(v).len());
        }
    }

    #[test]
    fn clique_law_per_category() {
        let cfg = GeneratorConfig::uniform(300, 2, 0.05, 4, 12).with_corruption(0.3);
        let d = generate(&cfg).unwrap();
        let g = SimilarityGraph::build(&d, cfg.r_n).unwrap();
        for v in (0..g.n()).filter(|&v| g.is_corrupted(v)) {
            assert_eq!(g.degree(v), g.category_members(g.category(v)).len() - 1);
        }
    }

    #[test]
    fn labelled_degrees_agree_between_storages() {
        let cfg = GeneratorConfig::uniform(150, 2, 0.2, 2, 3).with_corruption(0.2);
        let d = generate(&cfg).unwrap();
        let g = SimilarityGraph::build(&d, cfg.r_n).unwrap();
        let o = SimilarityGraph::build_bruteforce(&d, cfg.r_n).unwrap();
        let labels: Vec<Option<usize>> =
            (0..150).map(|v| if v % 7 == 0 { None } else { Some(v % 3) }).collect();
        assert_eq!(g.labelled_degrees(&labels), o.labelled_degrees(&labels));
    }

    #[test]
    fn negative_radius_rejected() {
        let d = ds(vec![(Some(vec![0.0]), 0)]);
        assert!(SimilarityGraph::build(&d, -1.0).is_err());
        assert!(SimilarityGraph::build(&d, f64::NAN).is_err());
    }
}
