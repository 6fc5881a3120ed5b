//! Shared fixtures for the benchmarks.

use dissim_core::{generate, Dataset, GeneratorConfig, SimilarityGraph};

/// Uniform unit square, four uniform categories, 5% corrupted, with
/// `r_n = n^{-1/4}`.
pub fn instance(n: usize, seed: u64) -> (Dataset, SimilarityGraph) {
    let r_n = (n as f64).powf(-0.25);
    let cfg = GeneratorConfig::uniform(n, 2, r_n, 4, seed).with_corruption(0.05);
    let ds = generate(&cfg).expect("valid config");
    let g = SimilarityGraph::build(&ds, r_n).expect("valid radius");
    (ds, g)
}
