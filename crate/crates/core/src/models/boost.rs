//! Least-squares gradient boosting with validation early stopping, on exact
//! trees (`gbt`) or on histogram trees stacked over an elasticnet
//! (`light_gbt_stacked`).

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linear::{fit_elasticnet, ElasticNetModel, ElasticNetParams};
use super::rmse;
use super::tree::{grow_hist, BinMapper, ExactGrower, Presorted, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.02;
pub const DEFAULT_BINS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub max_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Stages without validation improvement before stopping.
    pub patience: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { learning_rate: DEFAULT_LEARNING_RATE, max_trees: 1000, max_depth: 4, min_leaf: 5, patience: 30 }
    }
}

impl GbtParams {
    fn validate(&self) -> Result<()> {
        if self.max_trees < 1 {
            return Err(Error::Model("boosting needs max_trees >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Model(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        if self.patience < 1 {
            return Err(Error::Model("boosting needs patience >= 1".into()));
        }
        Ok(())
    }

    fn tree(&self) -> TreeParams {
        TreeParams { max_depth: Some(self.max_depth), min_leaf: self.min_leaf }
    }
}

/// Per-stage record of a boosting run. Index 0 is the initial prediction
/// before any tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostTrace {
    pub train_rmse: Vec<f64>,
    pub validation_rmse: Vec<f64>,
    /// Argmin of `validation_rmse`, first occurrence; equals the number of
    /// retained trees.
    pub best_stage: usize,
}

impl BoostTrace {
    pub fn stages_fitted(&self) -> usize {
        self.validation_rmse.len() - 1
    }
}

fn check_inputs(x: &Matrix, y: &[f64], x_val: &Matrix, y_val: &[f64]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("boosting needs training rows"));
    }
    if x_val.rows() == 0 {
        return Err(Error::Empty("boosting needs a nonempty validation set"));
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    if y_val.len() != x_val.rows() {
        return Err(Error::LengthMismatch { left: x_val.rows(), right: y_val.len() });
    }
    if x_val.cols() != x.cols() {
        return Err(Error::LengthMismatch { left: x.cols(), right: x_val.cols() });
    }
    Ok(())
}

/// Shared boosting loop. `f_train`/`f_val` hold the initial predictions and
/// are updated in place; trees are grown on the current residuals.
fn boost(
    x: &Matrix,
    y: &[f64],
    x_val: &Matrix,
    y_val: &[f64],
    mut f_train: Vec<f64>,
    mut f_val: Vec<f64>,
    params: &GbtParams,
    mut grow: impl FnMut(&[f64]) -> Tree,
) -> Result<(Vec<Tree>, BoostTrace)> {
    let lr = params.learning_rate;
    let mut trees = Vec::new();
    let mut train_rmse = alloc::vec![rmse(y, &f_train)?];
    let mut validation_rmse = alloc::vec![rmse(y_val, &f_val)?];
    let mut best_stage = 0;
    let mut residual: Vec<f64> = alloc::vec![0.0; y.len()];

    while trees.len() < params.max_trees {
        for ((r, t), f) in residual.iter_mut().zip(y).zip(&f_train) {
            *r = t - f;
        }
        let tree = grow(&residual);
        for (i, f) in f_train.iter_mut().enumerate() {
            *f += lr * tree.predict_row(x.row(i));
        }
        for (i, f) in f_val.iter_mut().enumerate() {
            *f += lr * tree.predict_row(x_val.row(i));
        }
        trees.push(tree);
        train_rmse.push(rmse(y, &f_train)?);
        let v = rmse(y_val, &f_val)?;
        validation_rmse.push(v);
        if v < validation_rmse[best_stage] {
            best_stage = trees.len();
        } else if trees.len() - best_stage >= params.patience {
            break;
        }
    }
    trees.truncate(best_stage);
    Ok((trees, BoostTrace { train_rmse, validation_rmse, best_stage }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub base: f64,
    pub trees: Vec<Tree>,
    pub trace: BoostTrace,
}

pub fn fit_gbt(x: &Matrix, y: &[f64], x_val: &Matrix, y_val: &[f64], params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    check_inputs(x, y, x_val, y_val)?;
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let data = Presorted::new(x);
    let mut grower = ExactGrower::new(&data);
    let tree_params = params.tree();
    let (trees, trace) = boost(
        x,
        y,
        x_val,
        y_val,
        alloc::vec![base; y.len()],
        alloc::vec![base; y_val.len()],
        params,
        |r| grower.grow(r, None, &tree_params, None),
    )?;
    Ok(GbtModel { params: *params, base, trees, trace })
}

impl GbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.params.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightParams {
    pub boost: GbtParams,
    pub n_bins: usize,
    pub linear: ElasticNetParams,
}

impl Default for LightParams {
    fn default() -> Self {
        Self { boost: GbtParams::default(), n_bins: DEFAULT_BINS, linear: ElasticNetParams::default() }
    }
}

/// Histogram boosting on `[x, elasticnet(x)]`, starting from the
/// elasticnet prediction rather than the target mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightGbtModel {
    pub params: LightParams,
    pub linear: ElasticNetModel,
    pub bins: BinMapper,
    pub trees: Vec<Tree>,
    pub trace: BoostTrace,
}

fn stack(x: &Matrix, linear: &ElasticNetModel) -> Result<(Matrix, Vec<f64>)> {
    let s = linear.predict(x);
    Ok((x.with_column(&s)?, s))
}

pub fn fit_light_gbt_stacked(
    x: &Matrix,
    y: &[f64],
    x_val: &Matrix,
    y_val: &[f64],
    params: &LightParams,
) -> Result<LightGbtModel> {
    params.boost.validate()?;
    if !(1..=256).contains(&params.n_bins) {
        return Err(Error::Model(format!("n_bins = {} outside 1..=256", params.n_bins)));
    }
    check_inputs(x, y, x_val, y_val)?;
    let linear = fit_elasticnet(x, y, &params.linear)?;
    let (xs, s_train) = stack(x, &linear)?;
    let (xs_val, s_val) = stack(x_val, &linear)?;
    let bins = BinMapper::fit(&xs, params.n_bins);
    let binned = bins.transform(&xs);
    let tree_params = params.boost.tree();
    let (trees, trace) = boost(&xs, y, &xs_val, y_val, s_train, s_val, &params.boost, |r| {
        grow_hist(&binned, &bins, r, &tree_params)
    })?;
    Ok(LightGbtModel { params: *params, linear, bins, trees, trace })
}

impl LightGbtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s = self.linear.predict_row(row);
        let mut stacked = Vec::with_capacity(row.len() + 1);
        stacked.extend_from_slice(row);
        stacked.push(s);
        s + self.params.boost.learning_rate * self.trees.iter().map(|t| t.predict_row(&stacked)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}
