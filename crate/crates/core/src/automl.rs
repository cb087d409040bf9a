//! Seeded random search over model families, with low-fidelity screening,
//! per-target leaderboards and a paired-bootstrap comparison of the winner
//! against the best model of another family.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataRow, Partition};
use crate::exec::{Clock, Runner};
use crate::features::FeaturePipeline;
use crate::matrix::Matrix;
use crate::models::{
    rmse, ElasticNetParams, Family, FitInfo, ForestParams, GbtParams, Hyperparams, LightParams, RegressionModel,
    TreeParams,
};
use crate::physics::PropagationConstant;
use crate::rng::{mix, stream, STREAM_BOOTSTRAP, STREAM_SCREEN, STREAM_SEARCH};
use crate::target::Target;
use crate::{Error, Result};

pub const DEFAULT_TRIALS_PER_FAMILY: usize = 16;
pub const DEFAULT_FINALISTS: usize = 4;
pub const DEFAULT_BOOTSTRAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticNetGrid {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ElasticNetGrid {
    fn default() -> Self {
        Self { l1: vec![1e-4, 1e-3, 1e-2, 1e-1], l2: vec![0.0, 1e-3, 1e-2, 1e-1], max_iter: 1000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnGrid {
    pub k: Vec<usize>,
}

impl Default for KnnGrid {
    fn default() -> Self {
        Self { k: vec![1, 2, 3, 5, 8, 12, 20, 30, 50] }
    }
}

/// Depth 0 in a grid means unlimited depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeGrid {
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
}

impl Default for TreeGrid {
    fn default() -> Self {
        Self { max_depth: vec![4, 6, 8, 10, 12, 16, 0], min_leaf: vec![1, 2, 4, 8, 16, 32] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostGrid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
    pub max_trees: usize,
    pub patience: usize,
}

impl Default for BoostGrid {
    fn default() -> Self {
        Self {
            learning_rate: vec![crate::models::DEFAULT_LEARNING_RATE],
            max_depth: vec![3, 4, 5, 6],
            min_leaf: vec![5, 10, 20, 40],
            max_trees: 800,
            patience: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightGrid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
    pub n_bins: Vec<usize>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub max_trees: usize,
    pub patience: usize,
}

impl Default for LightGrid {
    fn default() -> Self {
        Self {
            learning_rate: vec![crate::models::DEFAULT_LEARNING_RATE],
            max_depth: vec![3, 4, 5, 6],
            min_leaf: vec![10, 20],
            n_bins: vec![63, crate::models::DEFAULT_BINS],
            l1: vec![1e-3],
            l2: vec![1e-3],
            max_trees: 800,
            patience: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
    pub feature_fraction: Vec<f64>,
    pub bootstrap: bool,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![24],
            max_depth: vec![10, 14, 0],
            min_leaf: vec![1, 3, 8],
            feature_fraction: vec![0.5, 0.8, 1.0],
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub elasticnet: ElasticNetGrid,
    pub knn: KnnGrid,
    pub decision_tree: TreeGrid,
    pub gbt: BoostGrid,
    pub light_gbt_stacked: LightGrid,
    pub random_forest: ForestGrid,
}

fn depth(d: usize) -> Option<usize> {
    (d > 0).then_some(d)
}

impl Grids {
    /// Every grid point of `family`, in nested-loop order.
    pub fn enumerate(&self, family: Family) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        match family {
            Family::MeanBaseline => out.push(Hyperparams::MeanBaseline),
            Family::Elasticnet => {
                let g = &self.elasticnet;
                for &l1 in &g.l1 {
                    for &l2 in &g.l2 {
                        let p = ElasticNetParams { l1, l2, max_iter: g.max_iter, tol: g.tol };
                        out.push(Hyperparams::Elasticnet(p));
                    }
                }
            }
            Family::Knn => out.extend(self.knn.k.iter().map(|&k| Hyperparams::Knn { k })),
            Family::DecisionTree => {
                for &d in &self.decision_tree.max_depth {
                    for &min_leaf in &self.decision_tree.min_leaf {
                        out.push(Hyperparams::DecisionTree(TreeParams { max_depth: depth(d), min_leaf }));
                    }
                }
            }
            Family::Gbt => {
                let g = &self.gbt;
                for &learning_rate in &g.learning_rate {
                    for &max_depth in &g.max_depth {
                        for &min_leaf in &g.min_leaf {
                            out.push(Hyperparams::Gbt(GbtParams {
                                learning_rate,
                                max_trees: g.max_trees,
                                max_depth,
                                min_leaf,
                                patience: g.patience,
                            }));
                        }
                    }
                }
            }
            Family::LightGbtStacked => {
                let g = &self.light_gbt_stacked;
                for &learning_rate in &g.learning_rate {
                    for &max_depth in &g.max_depth {
                        for &min_leaf in &g.min_leaf {
                            for &n_bins in &g.n_bins {
                                for &l1 in &g.l1 {
                                    for &l2 in &g.l2 {
                                        let boost = GbtParams {
                                            learning_rate,
                                            max_trees: g.max_trees,
                                            max_depth,
                                            min_leaf,
                                            patience: g.patience,
                                        };
                                        let linear = ElasticNetParams { l1, l2, ..ElasticNetParams::default() };
                                        out.push(Hyperparams::LightGbtStacked(LightParams { boost, n_bins, linear }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Family::RandomForest => {
                let g = &self.random_forest;
                for &n_trees in &g.n_trees {
                    for &d in &g.max_depth {
                        for &min_leaf in &g.min_leaf {
                            for &feature_fraction in &g.feature_fraction {
                                out.push(Hyperparams::RandomForest(ForestParams {
                                    n_trees,
                                    tree: TreeParams { max_depth: depth(d), min_leaf },
                                    feature_fraction,
                                    bootstrap: g.bootstrap,
                                    seed: 0,
                                }));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub families: Vec<Family>,
    pub trials_per_family: usize,
    /// Share of training rows used by screening fits.
    pub screen_fraction: f64,
    /// Number of families whose best trial gets a holdout score.
    pub finalists: usize,
    pub n_boot: usize,
    pub grids: Grids,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            trials_per_family: DEFAULT_TRIALS_PER_FAMILY,
            screen_fraction: 0.25,
            finalists: DEFAULT_FINALISTS,
            n_boot: DEFAULT_BOOTSTRAP,
            grids: Grids::default(),
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::Config("search space lists no families".into()));
        }
        let mut sorted = self.families.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.families.len() {
            return Err(Error::Config("search space lists a family twice".into()));
        }
        if self.trials_per_family == 0 {
            return Err(Error::Config("trial budget must allow at least one trial per family".into()));
        }
        if !(self.screen_fraction > 0.0 && self.screen_fraction <= 1.0) {
            return Err(Error::Config(format!("screen fraction {} outside (0, 1]", self.screen_fraction)));
        }
        if self.finalists == 0 || self.n_boot == 0 {
            return Err(Error::Config("finalists and n_boot must be >= 1".into()));
        }
        for &f in &self.families {
            if self.grids.enumerate(f).is_empty() {
                return Err(Error::Config(format!("grid for {f} is empty")));
            }
        }
        Ok(())
    }

    /// Total trial budget.
    pub fn budget(&self) -> usize {
        self.trials_per_family * self.families.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub id: usize,
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

/// Seeded random draw (without replacement) of up to `trials_per_family`
/// grid points per family. Trial ids are dense and family-major in
/// `Family` order.
pub fn plan_trials(space: &SearchSpace, seed: u64) -> Vec<TrialSpec> {
    let mut families = space.families.clone();
    families.sort();
    let mut trials = Vec::new();
    for family in families {
        let grid = space.grids.enumerate(family);
        let picks: Vec<usize> = if grid.len() <= space.trials_per_family {
            (0..grid.len()).collect()
        } else {
            let mut rng = stream(mix(seed, family as u64), STREAM_SEARCH);
            sample(&mut rng, grid.len(), space.trials_per_family).into_vec()
        };
        for i in picks {
            let id = trials.len();
            let trial_seed = mix(seed, 0x7e1a1 + id as u64);
            let mut hyperparams = grid[i];
            if let Hyperparams::RandomForest(p) = &mut hyperparams {
                p.seed = trial_seed;
            }
            trials.push(TrialSpec { id, family, hyperparams, seed: trial_seed });
        }
    }
    trials
}

/// Design matrices of the three splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrices {
    pub train: Matrix,
    pub validation: Matrix,
    pub test: Matrix,
}

/// One target's values on the three splits, in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSplits {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub test: Vec<f64>,
}

/// Affine target scaling fit on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn fit(train: &[f64]) -> Self {
        let mean = crate::stats::mean(train);
        let std = crate::stats::std_dev(train);
        Self { mean, std: if std > 0.0 && std.is_finite() { std } else { 1.0 } }
    }

    pub fn forward(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|y| (y - self.mean) / self.std).collect()
    }

    pub fn inverse(&self, z: f64) -> f64 {
        self.mean + z * self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    ScreenedOut,
    Failed,
}

/// Trial-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub target: Target,
    pub trial_id: usize,
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub status: TrialStatus,
    pub rmse_screen: Option<f64>,
    pub rmse_validation: Option<f64>,
    pub rmse_holdout: Option<f64>,
    pub fit_seconds: f64,
    pub info: Option<FitInfo>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub trial_id: usize,
    pub family: Family,
    pub hyperparams: Hyperparams,
    pub rmse_validation: f64,
    pub rmse_holdout: Option<f64>,
    /// Wall-clock fit time; kept out of the serialized leaderboard so the
    /// file is reproducible byte for byte.
    #[serde(skip)]
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub target: Target,
    /// Ascending validation RMSE, ties by trial id.
    pub entries: Vec<LeaderboardEntry>,
    pub selected: usize,
    /// Best trial of each finalist family, in leaderboard order.
    pub finalists: Vec<usize>,
    /// Best trial of the runner-up family and the bootstrap p-value of the
    /// RMSE difference against the selected trial.
    pub runner_up: Option<usize>,
    pub p_value: Option<f64>,
}

impl Leaderboard {
    pub fn selected_entry(&self) -> &LeaderboardEntry {
        self.entries.iter().find(|e| e.trial_id == self.selected).expect("selected trial is on the board")
    }

    /// Best entry of `family`, if any trial of it completed.
    pub fn best_of(&self, family: Family) -> Option<&LeaderboardEntry> {
        self.entries.iter().find(|e| e.family == family)
    }
}

/// Model for one target, predicting in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub target: Target,
    pub trial_id: usize,
    pub scale: TargetScale,
    pub model: RegressionModel,
}

impl TargetModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.scale.inverse(self.model.predict_row(row))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

pub struct SearchOutcome {
    pub leaderboard: Leaderboard,
    pub trials: Vec<TrialRecord>,
    pub model: TargetModel,
}

/// Two-sided paired-bootstrap p-value for the difference in RMSE of two
/// residual vectors on the same rows.
pub fn compare(residuals_a: &[f64], residuals_b: &[f64], n_boot: usize, seed: u64) -> Result<f64> {
    if residuals_a.len() != residuals_b.len() {
        return Err(Error::LengthMismatch { left: residuals_a.len(), right: residuals_b.len() });
    }
    if residuals_a.is_empty() || n_boot == 0 {
        return Err(Error::Empty("bootstrap comparison needs residuals and resamples"));
    }
    let n = residuals_a.len();
    let rms = |sq: f64| libm::sqrt(sq / n as f64);
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let observed = rms(sq(residuals_a)) - rms(sq(residuals_b));
    let mut rng = stream(seed, STREAM_BOOTSTRAP);
    let mut extreme = 0usize;
    for _ in 0..n_boot {
        let (mut sa, mut sb) = (0.0, 0.0);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            sa += residuals_a[i] * residuals_a[i];
            sb += residuals_b[i] * residuals_b[i];
        }
        let d = rms(sa) - rms(sb);
        if libm::fabs(d - observed) >= libm::fabs(observed) {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (n_boot + 1) as f64)
}

struct Evaluation {
    model: RegressionModel,
    rmse_validation: f64,
    rmse_holdout: f64,
    residuals: Vec<f64>,
    info: FitInfo,
    seconds: f64,
}

fn evaluate(
    spec: &TrialSpec,
    x: &Matrix,
    y: &[f64],
    x_val: &Matrix,
    y_val: &[f64],
    test: Option<(&Matrix, &[f64])>,
    clock: &dyn Clock,
) -> core::result::Result<Evaluation, (String, f64)> {
    let start = clock.now();
    let model = RegressionModel::fit(&spec.hyperparams, x, y, x_val, y_val).map_err(|e| (e.to_string(), 0.0))?;
    let seconds = clock.now() - start;
    let pred = model.predict(x_val);
    let residuals: Vec<f64> = y_val.iter().zip(&pred).map(|(t, p)| t - p).collect();
    let rmse_validation = rmse(y_val, &pred).map_err(|e| (e.to_string(), seconds))?;
    if !rmse_validation.is_finite() {
        return Err(("non-finite validation RMSE".into(), seconds));
    }
    let rmse_holdout = match test {
        Some((xt, yt)) => rmse(yt, &model.predict(xt)).map_err(|e| (e.to_string(), seconds))?,
        None => f64::NAN,
    };
    Ok(Evaluation { info: model.info(), model, rmse_validation, rmse_holdout, residuals, seconds })
}

/// Searches one target. Targets are z-scored on the training split for
/// fitting; all reported RMSEs are in natural units.
pub fn search<R: Runner>(
    space: &SearchSpace,
    target: Target,
    x: &SplitMatrices,
    y: &TargetSplits,
    runner: &R,
    clock: &dyn Clock,
) -> Result<SearchOutcome> {
    space.validate()?;
    let seed = mix(space.seed, target as u64);
    let scale = TargetScale::fit(&y.train);
    let yt = scale.forward(&y.train);
    let yv = scale.forward(&y.validation);
    let ytest = scale.forward(&y.test);
    let trials = plan_trials(space, seed);

    let n = x.train.rows();
    let full_fidelity = space.screen_fraction >= 1.0;
    let subset: Vec<usize> = if full_fidelity {
        (0..n).collect()
    } else {
        let m = (libm::ceil(space.screen_fraction * n as f64) as usize).clamp(n.min(2), n);
        let mut idx = sample(&mut stream(seed, STREAM_SCREEN), n, m).into_vec();
        idx.sort_unstable();
        idx
    };
    let xs = x.train.select_rows(&subset);
    let ys: Vec<f64> = subset.iter().map(|&i| yt[i]).collect();
    let test = (x.test.rows() > 0).then_some((&x.test, ytest.as_slice()));

    let screened = runner.run(trials.len(), |i| {
        let t = if full_fidelity { test } else { None };
        evaluate(&trials[i], &xs, &ys, &x.validation, &yv, t, clock)
    });

    let mut records: Vec<TrialRecord> = trials
        .iter()
        .map(|t| TrialRecord {
            target,
            trial_id: t.id,
            family: t.family,
            hyperparams: t.hyperparams,
            seed: t.seed,
            status: TrialStatus::ScreenedOut,
            rmse_screen: None,
            rmse_validation: None,
            rmse_holdout: None,
            fit_seconds: 0.0,
            info: None,
            error: None,
        })
        .collect();

    let mut survivors: Vec<usize> = Vec::new();
    for &family in &space.families {
        let members: Vec<usize> = trials.iter().filter(|t| t.family == family).map(|t| t.id).collect();
        let mut ok: Vec<(f64, usize)> = Vec::new();
        for &id in &members {
            match &screened[id] {
                Ok(ev) => {
                    records[id].rmse_screen = Some(ev.rmse_validation * scale.std);
                    records[id].fit_seconds = ev.seconds;
                    records[id].info = Some(ev.info);
                    ok.push((ev.rmse_validation, id));
                }
                Err((msg, secs)) => {
                    log::warn!("trial {id} ({family}) failed during screening: {msg}");
                    records[id].status = TrialStatus::Failed;
                    records[id].error = Some(msg.clone());
                    records[id].fit_seconds = *secs;
                }
            }
        }
        ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        survivors.extend(ok.iter().take(members.len().div_ceil(2)).map(|&(_, id)| id));
    }
    survivors.sort_unstable();

    let full: Vec<core::result::Result<Evaluation, (String, f64)>> = if full_fidelity {
        let mut screened = screened;
        survivors
            .iter()
            .map(|&id| core::mem::replace(&mut screened[id], Err((String::new(), 0.0))))
            .collect()
    } else {
        drop(screened);
        runner.run(survivors.len(), |k| {
            evaluate(&trials[survivors[k]], &x.train, &yt, &x.validation, &yv, test, clock)
        })
    };

    let mut entries = Vec::new();
    let mut holdout = vec![f64::NAN; trials.len()];
    let mut residuals: Vec<Option<Vec<f64>>> = vec![None; trials.len()];
    let mut fitted: Vec<Option<RegressionModel>> = vec![None; trials.len()];
    for (&id, result) in survivors.iter().zip(full) {
        match result {
            Ok(ev) => {
                fitted[id] = Some(ev.model);
                let r = &mut records[id];
                r.status = TrialStatus::Completed;
                r.rmse_validation = Some(ev.rmse_validation * scale.std);
                r.fit_seconds = ev.seconds;
                r.info = Some(ev.info);
                holdout[id] = ev.rmse_holdout * scale.std;
                residuals[id] = Some(ev.residuals);
                entries.push(LeaderboardEntry {
                    trial_id: id,
                    family: trials[id].family,
                    hyperparams: trials[id].hyperparams,
                    rmse_validation: ev.rmse_validation * scale.std,
                    rmse_holdout: None,
                    fit_seconds: ev.seconds,
                });
            }
            Err((msg, secs)) => {
                log::warn!("trial {id} ({}) failed: {msg}", trials[id].family);
                let r = &mut records[id];
                r.status = TrialStatus::Failed;
                r.error = Some(msg);
                r.fit_seconds = secs;
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Search(format!("every trial failed for target {}", target.name())));
    }
    entries.sort_by(|a, b| a.rmse_validation.total_cmp(&b.rmse_validation).then(a.trial_id.cmp(&b.trial_id)));

    let mut finalists: Vec<usize> = Vec::new();
    let mut seen: Vec<Family> = Vec::new();
    for e in &entries {
        if !seen.contains(&e.family) {
            seen.push(e.family);
            if finalists.len() < space.finalists {
                finalists.push(e.trial_id);
            }
        }
    }
    for e in entries.iter_mut().filter(|e| finalists.contains(&e.trial_id)) {
        let h = holdout[e.trial_id];
        e.rmse_holdout = h.is_finite().then_some(h);
        records[e.trial_id].rmse_holdout = e.rmse_holdout;
    }

    let selected = entries[0].trial_id;
    let runner_up = entries.iter().find(|e| e.family != entries[0].family).map(|e| e.trial_id);
    let p_value = match runner_up {
        Some(r) => {
            let a = residuals[selected].as_deref().unwrap_or_default();
            let b = residuals[r].as_deref().unwrap_or_default();
            Some(compare(a, b, space.n_boot, seed)?)
        }
        None => None,
    };

    let model = fitted[selected].take().expect("completed trials keep their model");
    Ok(SearchOutcome {
        leaderboard: Leaderboard { target, entries, selected, finalists, runner_up, p_value },
        trials: records,
        model: TargetModel { target, trial_id: selected, scale, model },
    })
}

/// Everything produced by training: the fitted feature pipeline, one model
/// per target, leaderboards and the trial log.
pub struct TrainingRun {
    pub features: FeaturePipeline,
    pub models: Vec<TargetModel>,
    pub leaderboards: Vec<Leaderboard>,
    pub trials: Vec<TrialRecord>,
    pub splits: SplitMatrices,
}

fn observations(rows: &[DataRow], idx: &[usize]) -> Vec<PropagationConstant> {
    idx.iter()
        .map(|&i| PropagationConstant { frequency: rows[i].frequency, alpha: rows[i].alpha, beta: rows[i].beta })
        .collect()
}

/// Featurizes the partition and searches every target independently.
pub fn train<R: Runner>(
    rows: &[DataRow],
    partition: &Partition,
    space: &SearchSpace,
    max_abs_corr: f64,
    runner: &R,
    clock: &dyn Clock,
) -> Result<TrainingRun> {
    let train_obs = observations(rows, &partition.train);
    let features = FeaturePipeline::fit(&train_obs, max_abs_corr)?;
    let splits = SplitMatrices {
        train: features.transform(&train_obs)?,
        validation: features.transform(&observations(rows, &partition.validation))?,
        test: features.transform(&observations(rows, &partition.test))?,
    };
    let mut models = Vec::new();
    let mut leaderboards = Vec::new();
    let mut trials = Vec::new();
    for target in Target::ALL {
        let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].target(target)).collect::<Vec<_>>();
        let y = TargetSplits {
            train: pick(&partition.train),
            validation: pick(&partition.validation),
            test: pick(&partition.test),
        };
        let outcome = search(space, target, &splits, &y, runner, clock)?;
        log::info!(
            "{}: selected trial {} ({}) with validation RMSE {:.6e}",
            target.name(),
            outcome.leaderboard.selected,
            outcome.leaderboard.selected_entry().family,
            outcome.leaderboard.selected_entry().rmse_validation
        );
        models.push(outcome.model);
        leaderboards.push(outcome.leaderboard);
        trials.extend(outcome.trials);
    }
    Ok(TrainingRun { features, models, leaderboards, trials, splits })
}

fn table(out: &mut String, title: &str, boards: &[Leaderboard], cell: impl Fn(&Leaderboard, Family) -> String) {
    let mut families: Vec<Family> = boards.iter().flat_map(|b| b.entries.iter().map(|e| e.family)).collect();
    families.sort();
    families.dedup();
    let _ = writeln!(out, "### {title}\n");
    let mut header = String::from("| Model |");
    let mut rule = String::from("|---|");
    for b in boards {
        let _ = write!(header, " {} |", b.target.label());
        rule.push_str("---:|");
    }
    let _ = writeln!(out, "{header}\n{rule}");
    for family in families {
        let _ = write!(out, "| {family} |");
        for b in boards {
            let _ = write!(out, " {} |", cell(b, family));
        }
        out.push('\n');
    }
    out.push('\n');
}

fn fmt_rmse(v: f64, selected: bool) -> String {
    format!("{v:.4e}{}", if selected { "*" } else { "" })
}

/// Validation and holdout tables: one row per family (its best trial), one
/// column per target in leaderboard order. `*` marks the selected model;
/// holdout cells are empty for non-finalists.
pub fn report_markdown(leaderboards: &[Leaderboard]) -> String {
    let mut boards: Vec<Leaderboard> = leaderboards.to_vec();
    boards.sort_by_key(|b| b.target);
    let mut out = String::new();
    table(&mut out, "RMSE validation score", &boards, |b, f| match b.best_of(f) {
        Some(e) => fmt_rmse(e.rmse_validation, e.trial_id == b.selected),
        None => String::new(),
    });
    table(&mut out, "RMSE holdout score", &boards, |b, f| match b.best_of(f).and_then(|e| e.rmse_holdout.map(|h| (e, h))) {
        Some((e, h)) => fmt_rmse(h, e.trial_id == b.selected),
        None => String::new(),
    });
    out
}
