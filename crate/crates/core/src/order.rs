use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::similarity::SimilarityGraph;

/// Processing order for the greedy constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Order {
    #[default]
    Natural,
    Random {
        seed: u64,
    },
    /// Highest degree first, ties by index.
    DegreeDesc,
}

impl Order {
    /// Reorders `items` (given in ascending index order).
    pub fn arrange(&self, mut items: Vec<usize>, g: &SimilarityGraph) -> Vec<usize> {
        match *self {
            Order::Natural => {}
            Order::Random { seed } => items.shuffle(&mut rng::stream(seed, 0)),
            Order::DegreeDesc => items.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v)),
        }
        items
    }
}
