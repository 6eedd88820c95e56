//! Random forest over the exact-split grower: bootstrap resamples plus
//! per-node uniform feature subsets.

use rand::Rng;

use crate::error::Error;
use crate::learners::tree::{grow, Node, SplitCriterion};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Feature count considered at each split, not a fraction.
    pub max_features: usize,
    pub min_samples_split: usize,
    /// Test hook; production fits always resample.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 10,
            max_depth: 7,
            max_features: 2,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub n_features: usize,
    trees: Vec<Node>,
}

pub fn train(
    x: &[Vec<f64>],
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, Error> {
    let n = x.len();
    let p = x[0].len();
    let m = params.max_features.min(p);

    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        // One stream per tree, keyed by tree index, so concurrent and
        // sequential fits agree.
        let mut rng = substream(seed, "forest_tree", t as u64);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut pick = |_rows: &[usize]| {
            if m >= p {
                // Full set, in index order: matches the plain tree exactly.
                (0..p).collect::<Vec<usize>>()
            } else {
                let mut feats = rand::seq::index::sample(&mut rng, p, m).into_vec();
                // Ascending order keeps candidate evaluation deterministic.
                feats.sort_unstable();
                feats
            }
        };
        trees.push(grow(
            x,
            y,
            rows,
            params.max_depth,
            params.min_samples_split,
            SplitCriterion::Gini,
            &mut pick,
        ));
    }

    Ok(ForestModel {
        n_features: p,
        trees,
    })
}

impl ForestModel {
    /// Mean of the member trees' leaf frequencies.
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|row| {
                self.trees.iter().map(|t| t.score(row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }
}
