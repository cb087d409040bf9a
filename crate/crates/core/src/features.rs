//! Feature pipeline: creation → median imputation → correlation-based
//! selection → z-score standardization. Every statistic is fit on the
//! training rows only and then applied unchanged to other splits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{fabs, log10, sqrt};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::physics::PropagationConstant;
use crate::stats::{mean, median, pearson, std_dev};
use crate::{Error, Result};

pub const FEATURE_NAMES: [&str; 8] = [
    "freq_hz",
    "alpha_np_m",
    "beta_rad_m",
    "log10_freq",
    "alpha_over_sqrt_f",
    "beta_over_f",
    "beta_over_f_squared",
    "alpha_times_beta",
];

pub const DEFAULT_MAX_ABS_CORR: f64 = 0.98;

/// Base plus derived columns for one observation. Missing inputs (NaN)
/// propagate to the columns that depend on them.
pub fn create_features(obs: &PropagationConstant) -> Result<[f64; 8]> {
    let (f, a, b) = (obs.frequency, obs.alpha, obs.beta);
    if f <= 0.0 || f.is_infinite() {
        return Err(Error::Domain(format!("frequency must be > 0, got {f}")));
    }
    let b_over_f = b / f;
    Ok([f, a, b, log10(f), a / sqrt(f), b_over_f, b_over_f * b_over_f, a * b])
}

pub fn create_matrix(observations: &[PropagationConstant]) -> Result<Matrix> {
    let rows = observations.iter().map(create_features).collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// Per-column training medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub medians: Vec<f64>,
}

impl Imputer {
    pub fn fit(train: &Matrix) -> Result<Self> {
        let medians = (0..train.cols())
            .map(|j| {
                let m = median(&train.column(j));
                if m.is_nan() {
                    Err(Error::Missing(format!("column {j} has no observed values in the training rows")))
                } else {
                    Ok(m)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { medians })
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, &m) in out.row_mut(i).iter_mut().zip(&self.medians) {
                if v.is_nan() {
                    *v = m;
                }
            }
        }
        out
    }
}

/// Greedy correlation filter: keeps a column only if it has variance and
/// its |Pearson r| with every previously kept column is ≤ `max_abs_corr`.
pub fn select_features(train: &Matrix, max_abs_corr: f64) -> Result<Vec<usize>> {
    if !(max_abs_corr > 0.0 && max_abs_corr <= 1.0) {
        return Err(Error::Domain(format!("correlation threshold must lie in (0, 1], got {max_abs_corr}")));
    }
    let columns: Vec<Vec<f64>> = (0..train.cols()).map(|j| train.column(j)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        if !(std_dev(col) > 0.0) {
            continue;
        }
        if kept.iter().all(|&k| fabs(pearson(&columns[k], col)) <= max_abs_corr) {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// Column z-scoring with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.rows() < 2 {
            return Err(Error::Empty("standardizer needs at least two training rows"));
        }
        let (means, stds) = (0..train.cols())
            .map(|j| {
                let col = train.column(j);
                (mean(&col), std_dev(&col))
            })
            .unzip();
        Ok(Self { means, stds })
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, &m), &s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            if s > 0.0 {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub input_columns: Vec<String>,
    pub output_columns: Vec<String>,
    pub imputer: Imputer,
    pub selected: Vec<usize>,
    pub standardizer: Standardizer,
    pub max_abs_corr: f64,
    /// Frequency span seen in training, Hz.
    pub train_band: (f64, f64),
}

impl FeaturePipeline {
    pub fn fit(train: &[PropagationConstant], max_abs_corr: f64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("feature pipeline needs training rows"));
        }
        let created = create_matrix(train)?;
        let imputer = Imputer::fit(&created)?;
        let imputed = imputer.apply(&created);
        let selected = select_features(&imputed, max_abs_corr)?;
        if selected.is_empty() {
            return Err(Error::Model("feature selection kept no columns".into()));
        }
        let standardizer = Standardizer::fit(&imputed.select_columns(&selected))?;
        let freqs = train.iter().map(|o| o.frequency).filter(|f| f.is_finite());
        let train_band = freqs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
        Ok(Self {
            input_columns: FEATURE_NAMES.iter().map(|s| String::from(*s)).collect(),
            output_columns: selected.iter().map(|&j| String::from(FEATURE_NAMES[j])).collect(),
            imputer,
            selected,
            standardizer,
            max_abs_corr,
            train_band,
        })
    }

    pub fn transform(&self, observations: &[PropagationConstant]) -> Result<Matrix> {
        let created = create_matrix(observations)?;
        let imputed = self.imputer.apply(&created);
        Ok(self.standardizer.apply(&imputed.select_columns(&self.selected)))
    }

    pub fn in_band(&self, frequency: f64) -> bool {
        let (lo, hi) = self.train_band;
        let slack = 1e-9 * hi;
        frequency >= lo - slack && frequency <= hi + slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{linear_grid, sweep_curve, CpwGeometry, MaterialParams, SPEED_OF_LIGHT};
    use alloc::vec;

    fn obs(f: f64, a: f64, b: f64) -> PropagationConstant {
        PropagationConstant { frequency: f, alpha: a, beta: b }
    }

    #[test]
    fn zero_alpha_zeroes_alpha_columns() {
        let x = create_features(&obs(2e9, 0.0, 50.0)).unwrap();
        assert_eq!((x[1], x[4], x[7]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unit_frequency_columns() {
        let x = create_features(&obs(1.0, 0.7, 3.0)).unwrap();
        assert_eq!(x[3], 0.0);
        assert_eq!(x[4], 0.7);
        assert!(create_features(&obs(0.0, 0.7, 3.0)).is_err());
        assert!(create_features(&obs(-1.0, 0.7, 3.0)).is_err());
    }

    #[test]
    fn beta_over_f_tracks_effective_permittivity() {
        let mat = MaterialParams::new(3e7, 3.2, 1.81, 0.01).unwrap();
        let geom = CpwGeometry::printed_fixture();
        let curve = sweep_curve(&geom, &mat, &linear_grid(10e6, 20e9, 40).unwrap()).unwrap();
        let eps_eff = crate::physics::cpw_eeff(&geom, &mat).unwrap().eps_eff;
        let expected = 2.0 * core::f64::consts::PI / SPEED_OF_LIGHT * sqrt(eps_eff);
        for p in &curve {
            let x = create_features(p).unwrap();
            assert!(fabs(x[5] - expected) <= 1e-12 * expected);
        }
    }

    #[test]
    fn standardizer_hand_values() {
        let train = Matrix::from_rows(&[[1.0, 4.0], [2.0, 4.0], [3.0, 4.0]]).unwrap();
        let s = Standardizer::fit(&train).unwrap();
        let z = s.apply(&train);
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (i, e) in expected.iter().enumerate() {
            assert!(fabs(z.get(i, 0) - e) < 1e-12);
            assert_eq!(z.get(i, 1), 4.0);
        }
        let validation = Matrix::from_rows(&[[5.0, 4.0], [6.0, 4.0]]).unwrap();
        assert!(mean(&s.apply(&validation).column(0)) != 0.0);
        assert!(Standardizer::fit(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn median_imputation() {
        let train = Matrix::from_rows(&[[1.0, 4.0], [5.0, f64::NAN], [9.0, 6.0]]).unwrap();
        let imp = Imputer::fit(&train).unwrap();
        let out = imp.apply(&train);
        assert_eq!(out.get(1, 1), 5.0);
        assert!(out.as_slice().iter().all(|v| !v.is_nan()));
        let full = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(imp.apply(&full), full);
        let hole = Matrix::from_rows(&[[1.0, f64::NAN], [2.0, f64::NAN]]).unwrap();
        assert!(matches!(Imputer::fit(&hole), Err(Error::Missing(_))));
    }

    #[test]
    fn selection_drops_duplicates_and_constants() {
        let train = Matrix::from_rows(&[
            [1.0, 1.0, 7.0, 0.3],
            [2.0, 2.0, 7.0, -0.1],
            [3.0, 3.0, 7.0, 0.8],
            [4.0, 4.0, 7.0, 0.2],
        ])
        .unwrap();
        assert_eq!(select_features(&train, 0.98).unwrap(), vec![0, 3]);
        assert_eq!(select_features(&train, 1.0).unwrap(), vec![0, 1, 3]);
        assert!(select_features(&train, 0.0).is_err());
    }

    #[test]
    fn pipeline_is_deterministic_and_fit_on_train_only() {
        let geom = CpwGeometry::printed_fixture();
        let grid = linear_grid(10e6, 20e9, 30).unwrap();
        let a = sweep_curve(&geom, &MaterialParams::new(2e7, 3.0, 2.0, 0.01).unwrap(), &grid).unwrap();
        let b = sweep_curve(&geom, &MaterialParams::new(4e7, 4.0, 1.5, 0.02).unwrap(), &grid).unwrap();
        let p1 = FeaturePipeline::fit(&a, DEFAULT_MAX_ABS_CORR).unwrap();
        let p2 = FeaturePipeline::fit(&a, DEFAULT_MAX_ABS_CORR).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.transform(&b).unwrap(), p2.transform(&b).unwrap());
        assert_eq!(p1.transform(&b).unwrap().rows(), b.len());
        let refit = FeaturePipeline::fit(&b, DEFAULT_MAX_ABS_CORR).unwrap();
        assert_ne!(refit.standardizer, p1.standardizer);
    }
}
