use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{ExactGrower, FeatureSampler, Presorted, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{mix, stream, STREAM_FOREST};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Share of features offered to each split, rounded, at least one.
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 30, tree: TreeParams::default(), feature_fraction: 0.6, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

pub fn fit_random_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Empty("random forest needs at least one row"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if params.n_trees == 0 {
        return Err(Error::Model("random forest needs n_trees >= 1".into()));
    }
    if !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0) {
        return Err(Error::Model("feature_fraction must lie in (0, 1]".into()));
    }
    let d = x.cols();
    let per_node = ((params.feature_fraction * d as f64 + 0.5) as usize).clamp(1, d.max(1));
    let data = Presorted::new(x);
    let mut grower = ExactGrower::new(&data);
    let mut counts = vec![0u32; n];
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = stream(mix(params.seed, t as u64), STREAM_FOREST);
            let weights = if params.bootstrap {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                Some(counts.as_slice())
            } else {
                None
            };
            let sampler = (per_node < d).then(|| FeatureSampler { rng: &mut rng, per_node });
            grower.grow(y, weights, &params.tree, sampler)
        })
        .collect();
    Ok(ForestModel { params: *params, trees })
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}
