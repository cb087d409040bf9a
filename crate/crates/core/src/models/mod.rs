//! Regression models with a uniform fit/predict contract. Each fitted model
//! carries its hyperparameters and serializes to a tagged JSON object.

mod boost;
mod forest;
mod knn;
mod linear;
mod tree;

use alloc::vec::Vec;

use core::fmt;
use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

pub use boost::{
    fit_gbt, fit_light_gbt_stacked, BoostTrace, GbtModel, GbtParams, LightGbtModel, LightParams, DEFAULT_BINS,
    DEFAULT_LEARNING_RATE,
};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use knn::{fit_knn, KnnModel};
pub use linear::{fit_elasticnet, ElasticNetModel, ElasticNetParams};
pub use tree::{BinMapper, Node, Tree, TreeParams};

/// Root-mean-square error.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("rmse of zero samples"));
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sqrt(sse / y_true.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MeanBaseline,
    Elasticnet,
    Knn,
    DecisionTree,
    Gbt,
    LightGbtStacked,
    RandomForest,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::MeanBaseline,
        Family::Elasticnet,
        Family::Knn,
        Family::DecisionTree,
        Family::Gbt,
        Family::LightGbtStacked,
        Family::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::MeanBaseline => "mean_baseline",
            Family::Elasticnet => "elasticnet",
            Family::Knn => "knn",
            Family::DecisionTree => "decision_tree",
            Family::Gbt => "gbt",
            Family::LightGbtStacked => "light_gbt_stacked",
            Family::RandomForest => "random_forest",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn is_boosted(self) -> bool {
        matches!(self, Family::Gbt | Family::LightGbtStacked)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    MeanBaseline,
    Elasticnet(ElasticNetParams),
    Knn { k: usize },
    DecisionTree(TreeParams),
    Gbt(GbtParams),
    LightGbtStacked(LightParams),
    RandomForest(ForestParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::MeanBaseline => Family::MeanBaseline,
            Hyperparams::Elasticnet(_) => Family::Elasticnet,
            Hyperparams::Knn { .. } => Family::Knn,
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::Gbt(_) => Family::Gbt,
            Hyperparams::LightGbtStacked(_) => Family::LightGbtStacked,
            Hyperparams::RandomForest(_) => Family::RandomForest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub tree: Tree,
}

pub fn fit_decision_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<TreeModel> {
    if x.rows() == 0 {
        return Err(Error::Empty("decision tree needs at least one row"));
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    let data = tree::Presorted::new(x);
    Ok(TreeModel { params: *params, tree: tree::ExactGrower::new(&data).grow(y, None, params, None) })
}

/// Fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressionModel {
    MeanBaseline { mean: f64 },
    Elasticnet(ElasticNetModel),
    Knn(KnnModel),
    DecisionTree(TreeModel),
    Gbt(GbtModel),
    LightGbtStacked(LightGbtModel),
    RandomForest(ForestModel),
}

/// Training metadata common to all families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitInfo {
    /// Boosting stages or solver sweeps performed.
    pub iterations_used: usize,
    /// Retained boosting stage (argmin validation RMSE), if any.
    pub best_iteration: Option<usize>,
    pub converged: bool,
}

impl RegressionModel {
    /// Fits `hp` on `(x, y)`; boosted families early-stop on `(x_val, y_val)`.
    pub fn fit(hp: &Hyperparams, x: &Matrix, y: &[f64], x_val: &Matrix, y_val: &[f64]) -> Result<Self> {
        Ok(match hp {
            Hyperparams::MeanBaseline => {
                if y.is_empty() {
                    return Err(Error::Empty("mean baseline needs at least one row"));
                }
                RegressionModel::MeanBaseline { mean: y.iter().sum::<f64>() / y.len() as f64 }
            }
            Hyperparams::Elasticnet(p) => RegressionModel::Elasticnet(fit_elasticnet(x, y, p)?),
            Hyperparams::Knn { k } => RegressionModel::Knn(fit_knn(x, y, *k)?),
            Hyperparams::DecisionTree(p) => RegressionModel::DecisionTree(fit_decision_tree(x, y, p)?),
            Hyperparams::Gbt(p) => RegressionModel::Gbt(fit_gbt(x, y, x_val, y_val, p)?),
            Hyperparams::LightGbtStacked(p) => {
                RegressionModel::LightGbtStacked(fit_light_gbt_stacked(x, y, x_val, y_val, p)?)
            }
            Hyperparams::RandomForest(p) => RegressionModel::RandomForest(fit_random_forest(x, y, p)?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            RegressionModel::MeanBaseline { .. } => Family::MeanBaseline,
            RegressionModel::Elasticnet(_) => Family::Elasticnet,
            RegressionModel::Knn(_) => Family::Knn,
            RegressionModel::DecisionTree(_) => Family::DecisionTree,
            RegressionModel::Gbt(_) => Family::Gbt,
            RegressionModel::LightGbtStacked(_) => Family::LightGbtStacked,
            RegressionModel::RandomForest(_) => Family::RandomForest,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        match self {
            RegressionModel::MeanBaseline { .. } => Hyperparams::MeanBaseline,
            RegressionModel::Elasticnet(m) => Hyperparams::Elasticnet(m.params),
            RegressionModel::Knn(m) => Hyperparams::Knn { k: m.k },
            RegressionModel::DecisionTree(m) => Hyperparams::DecisionTree(m.params),
            RegressionModel::Gbt(m) => Hyperparams::Gbt(m.params),
            RegressionModel::LightGbtStacked(m) => Hyperparams::LightGbtStacked(m.params),
            RegressionModel::RandomForest(m) => Hyperparams::RandomForest(m.params),
        }
    }

    pub fn info(&self) -> FitInfo {
        match self {
            RegressionModel::Elasticnet(m) => {
                FitInfo { iterations_used: m.iterations, best_iteration: None, converged: m.converged }
            }
            RegressionModel::Gbt(GbtModel { trace, .. }) | RegressionModel::LightGbtStacked(LightGbtModel { trace, .. }) => {
                FitInfo {
                    iterations_used: trace.stages_fitted(),
                    best_iteration: Some(trace.best_stage),
                    converged: true,
                }
            }
            RegressionModel::RandomForest(m) => {
                FitInfo { iterations_used: m.trees.len(), best_iteration: None, converged: true }
            }
            _ => FitInfo { iterations_used: 0, best_iteration: None, converged: true },
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            RegressionModel::MeanBaseline { mean } => *mean,
            RegressionModel::Elasticnet(m) => m.predict_row(row),
            RegressionModel::Knn(m) => m.predict_row(row),
            RegressionModel::DecisionTree(m) => m.tree.predict_row(row),
            RegressionModel::Gbt(m) => m.predict_row(row),
            RegressionModel::LightGbtStacked(m) => m.predict_row(row),
            RegressionModel::RandomForest(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_data(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = stream(seed, 99);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let y = rows.iter().map(|r| r.iter().sum::<f64>() + rng.sample::<f64, _>(StandardNormal) * 0.1).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - sqrt(12.5)).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
        let y = [1.0, 4.0, 2.0, 9.0];
        let m = crate::stats::mean(&y);
        let r = rmse(&y, &[m; 4]).unwrap();
        assert!((r - crate::stats::std_dev(&y)).abs() < 1e-14);
    }

    #[test]
    fn tree_on_constant_target_is_one_leaf() {
        let (x, _) = random_data(40, 3, 1);
        let m = fit_decision_tree(&x, &[2.5; 40], &TreeParams::default()).unwrap();
        assert_eq!(m.tree.nodes, vec![Node::Leaf { value: 2.5 }]);
    }

    #[test]
    fn tree_splits_two_points() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = fit_decision_tree(&x, &[0.0, 10.0], &TreeParams { max_depth: Some(1), min_leaf: 1 }).unwrap();
        assert_eq!(rmse(&[0.0, 10.0], &m.tree.predict(&x)).unwrap(), 0.0);
        assert_eq!(m.tree.nodes[0], Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 });
    }

    #[test]
    fn tree_ties_prefer_lowest_feature() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let m = fit_decision_tree(&x, &[0.0, 10.0], &TreeParams::default()).unwrap();
        assert!(matches!(m.tree.nodes[0], Node::Split { feature: 0, .. }));
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let m = fit_decision_tree(&x, &[0.0, 5.0, 5.0, 10.0], &TreeParams { max_depth: Some(1), min_leaf: 1 }).unwrap();
        assert_eq!(m.tree.nodes[0], Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 });
    }

    #[test]
    fn unlimited_tree_memorizes() {
        let (x, y) = random_data(300, 4, 2);
        let m = fit_decision_tree(&x, &y, &TreeParams::default()).unwrap();
        assert!(rmse(&y, &m.tree.predict(&x)).unwrap() < 1e-12);
    }

    #[test]
    fn min_leaf_is_respected() {
        let (x, y) = random_data(200, 3, 3);
        let m = fit_decision_tree(&x, &y, &TreeParams { max_depth: None, min_leaf: 7 }).unwrap();
        let mut counts = vec![0usize; m.tree.nodes.len()];
        for i in 0..x.rows() {
            let mut at = 0;
            while let Node::Split { feature, threshold, left, right } = m.tree.nodes[at] {
                at = if x.get(i, feature as usize) <= threshold { left } else { right } as usize;
            }
            counts[at] += 1;
        }
        for (node, c) in m.tree.nodes.iter().zip(&counts) {
            if matches!(node, Node::Leaf { .. }) {
                assert!(*c >= 7);
            }
        }
    }

    #[test]
    fn gbt_constant_target_keeps_no_trees() {
        let (x, _) = random_data(60, 2, 4);
        let m = fit_gbt(&x, &[3.0; 60], &x, &[3.0; 60], &GbtParams { patience: 5, ..Default::default() }).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.base, 3.0);
        assert_eq!(GbtParams::default().learning_rate, 0.02);
        let bad = GbtParams { max_trees: 0, ..Default::default() };
        assert!(fit_gbt(&x, &[3.0; 60], &x, &[3.0; 60], &bad).is_err());
        assert!(fit_gbt(&x, &[3.0; 60], &Matrix::zeros(0, 2), &[], &GbtParams::default()).is_err());
    }

    #[test]
    fn gbt_stops_early_on_noise() {
        let (x, _) = random_data(400, 3, 5);
        let (xv, _) = random_data(200, 3, 6);
        let mut rng = stream(7, 1);
        let y: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let yv: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let p = GbtParams { max_trees: 2000, patience: 20, learning_rate: 0.1, ..Default::default() };
        let m = fit_gbt(&x, &y, &xv, &yv, &p).unwrap();
        assert!(m.trees.len() < 200, "retained {}", m.trees.len());
        assert!(m.trace.stages_fitted() < 2000);
    }

    #[test]
    fn gbt_trace_contracts() {
        let (x, y) = random_data(500, 3, 8);
        let (xv, yv) = random_data(200, 3, 9);
        let m = fit_gbt(&x, &y, &xv, &yv, &GbtParams { max_trees: 300, ..Default::default() }).unwrap();
        let t = &m.trace;
        let argmin = (0..t.validation_rmse.len())
            .min_by(|&a, &b| t.validation_rmse[a].total_cmp(&t.validation_rmse[b]).then(a.cmp(&b)))
            .unwrap();
        assert_eq!(argmin, t.best_stage);
        assert_eq!(m.trees.len(), t.best_stage);
        assert!(t.train_rmse[..=t.best_stage].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let replay = rmse(&yv, &m.predict(&xv)).unwrap();
        assert!((replay - t.validation_rmse[t.best_stage]).abs() < 1e-9);
        assert!(m.trees.len() > 10);
    }

    #[test]
    fn light_on_linear_target_adds_little() {
        let rows: Vec<[f64; 1]> = (0..400).map(|i| [(i as f64 * 0.618).fract() * 4.0 - 2.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let (xv, yv) = (x.select_rows(&(0..100).collect::<Vec<_>>()), y[..100].to_vec());
        let p = LightParams { linear: ElasticNetParams { l1: 1e-6, l2: 1e-6, ..Default::default() }, ..Default::default() };
        let m = fit_light_gbt_stacked(&x, &y, &xv, &yv, &p).unwrap();
        let stacked = rmse(&yv, &m.predict(&xv)).unwrap();
        let linear = rmse(&yv, &m.linear.predict(&xv)).unwrap();
        assert!(stacked <= linear * 1.01 + 1e-12);
    }

    #[test]
    fn light_with_one_bin_is_the_elasticnet() {
        let (x, y) = random_data(300, 3, 10);
        let (xv, yv) = random_data(100, 3, 11);
        let p = LightParams { n_bins: 1, ..Default::default() };
        let m = fit_light_gbt_stacked(&x, &y, &xv, &yv, &p).unwrap();
        assert!(m.trees.is_empty());
        let lin = rmse(&y, &m.linear.predict(&x)).unwrap();
        assert!(rmse(&y, &m.predict(&x)).unwrap() >= lin - 1e-12);
        assert!(fit_light_gbt_stacked(&x, &y, &xv, &yv, &LightParams { n_bins: 0, ..p }).is_err());
    }

    #[test]
    fn single_unbagged_tree_forest_is_a_tree() {
        let (x, y) = random_data(150, 4, 12);
        let tree = TreeParams { max_depth: Some(6), min_leaf: 2 };
        let f = fit_random_forest(
            &x,
            &y,
            &ForestParams { n_trees: 1, tree, feature_fraction: 1.0, bootstrap: false, seed: 5 },
        )
        .unwrap();
        let t = fit_decision_tree(&x, &y, &tree).unwrap();
        assert_eq!(f.trees[0], t.tree);
        assert_eq!(f.predict(&x), t.tree.predict(&x));
    }

    #[test]
    fn seeded_forest_is_reproducible() {
        let (x, y) = random_data(200, 4, 13);
        let p = ForestParams { n_trees: 5, seed: 77, ..Default::default() };
        assert_eq!(fit_random_forest(&x, &y, &p).unwrap(), fit_random_forest(&x, &y, &p).unwrap());
        let q = ForestParams { seed: 78, ..p };
        assert_ne!(fit_random_forest(&x, &y, &p).unwrap(), fit_random_forest(&x, &y, &q).unwrap());
    }

    #[test]
    fn all_families_fit_and_stay_finite() {
        let (x, y) = random_data(120, 3, 14);
        let (xv, yv) = random_data(40, 3, 15);
        let grid = [
            Hyperparams::MeanBaseline,
            Hyperparams::Elasticnet(ElasticNetParams::default()),
            Hyperparams::Knn { k: 5 },
            Hyperparams::DecisionTree(TreeParams::default()),
            Hyperparams::Gbt(GbtParams { max_trees: 50, ..Default::default() }),
            Hyperparams::LightGbtStacked(LightParams::default()),
            Hyperparams::RandomForest(ForestParams { n_trees: 4, ..Default::default() }),
        ];
        for hp in grid {
            let m = RegressionModel::fit(&hp, &x, &y, &xv, &yv).unwrap();
            assert_eq!(m.family(), hp.family());
            assert_eq!(m.hyperparams(), hp);
            assert!(m.predict(&x).iter().all(|v| v.is_finite()));
        }
    }
}
