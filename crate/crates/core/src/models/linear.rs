use alloc::vec;
use alloc::vec::Vec;

use libm::fabs;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticNetParams {
    pub l1: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self { l1: 1e-3, l2: 1e-3, max_iter: 1000, tol: 1e-6 }
    }
}

impl ElasticNetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1 >= 0.0 && self.l2 >= 0.0 && self.l1.is_finite() && self.l2.is_finite()) {
            return Err(Error::Model("elasticnet penalties must be finite and >= 0".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Model("elasticnet needs max_iter >= 1 and tol > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub params: ElasticNetParams,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ElasticNetModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on centered data; the intercept is recovered
/// from the column means afterwards.
pub fn fit_elasticnet(x: &Matrix, y: &[f64], params: &ElasticNetParams) -> Result<ElasticNetModel> {
    params.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::Empty("elasticnet needs at least one row"));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / nf).collect();
    let columns: Vec<Vec<f64>> =
        (0..d).map(|j| x.column(j).into_iter().map(|v| v - means[j]).collect()).collect();
    let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut w = vec![0.0; d];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let col = &columns[j];
            let rho = col.iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>() / nf + norms[j] * w[j];
            let updated = soft_threshold(rho, params.l1) / (norms[j] + params.l2);
            let delta = updated - w[j];
            if delta != 0.0 {
                for (r, a) in residual.iter_mut().zip(col) {
                    *r -= a * delta;
                }
                w[j] = updated;
                max_change = max_change.max(fabs(delta));
            }
        }
        if max_change < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("elasticnet did not converge in {} iterations", params.max_iter);
    }
    let intercept = y_mean - means.iter().zip(&w).map(|(m, wj)| m * wj).sum::<f64>();
    Ok(ElasticNetModel { params: *params, weights: w, intercept, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpenalized_fit_is_least_squares() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        let y = [1.0, 2.0, 2.5, 4.5];
        let p = ElasticNetParams { l1: 0.0, l2: 0.0, max_iter: 10_000, tol: 1e-14 };
        let m = fit_elasticnet(&x, &y, &p).unwrap();
        // Normal equations solved by hand: w = [1.25, 2.0], b = -0.25
        assert!(fabs(m.weights[0] - 1.25) < 1e-9, "{:?}", m.weights);
        assert!(fabs(m.weights[1] - 2.0) < 1e-9);
        assert!(fabs(m.intercept + 0.25) < 1e-9);
        assert!(m.converged);
    }

    #[test]
    fn huge_l1_shrinks_to_mean() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let m = fit_elasticnet(&x, &[2.0, 4.0, 9.0], &ElasticNetParams { l1: 1e6, ..Default::default() }).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        assert!(fabs(m.intercept - 5.0) < 1e-12);
    }

    #[test]
    fn recovers_line() {
        let rows: Vec<[f64; 1]> = (0..50).map(|i| [i as f64 / 10.0 - 2.5]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let p = ElasticNetParams { l1: 1e-6, l2: 1e-6, max_iter: 1000, tol: 1e-10 };
        let m = fit_elasticnet(&x, &y, &p).unwrap();
        assert!(fabs(m.weights[0] - 3.0) < 1e-3);
        assert!(fabs(m.intercept - 1.0) < 1e-3);
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.000001], [3.0, 3.0]]).unwrap();
        let p = ElasticNetParams { l1: 0.0, l2: 0.0, max_iter: 1, tol: 1e-15 };
        let m = fit_elasticnet(&x, &[1.0, 2.0, 3.0], &p).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }
}
