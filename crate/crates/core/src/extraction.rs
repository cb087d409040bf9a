//! Inverse characterization: per-frequency predictions from a measured
//! propagation constant, robust aggregation, and forward verification.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::automl::TargetModel;
use crate::features::FeaturePipeline;
use crate::netparams::GammaTrace;
use crate::physics::{CpwGeometry, CpwModel, MaterialParams};
use crate::stats::{iqr, relative_error, trimmed_mean};
use crate::target::Target;
use crate::{Error, Result};

pub const DEFAULT_TRIM: f64 = 0.10;
/// Pass threshold on max |Δα|, Np/m.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Conventionally measured parameters of the printed fixture.
pub const FIXTURE_REFERENCE: MaterialParams =
    MaterialParams { sigma_ink: 2.973e7, eps_fs: 3.2, eps_ds: 1.81, tan_delta: 0.01 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub target: Target,
    /// Prediction at each measurement frequency.
    pub trace: Vec<f64>,
    pub value: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEstimate {
    pub frequencies: Vec<f64>,
    pub parameters: Vec<ParameterEstimate>,
    pub aggregation: String,
    pub trim_fraction: f64,
    /// Measurement frequencies outside the training band.
    pub out_of_band: usize,
}

impl MaterialEstimate {
    pub fn get(&self, target: Target) -> Option<&ParameterEstimate> {
        self.parameters.iter().find(|p| p.target == target)
    }

    /// Aggregates as material parameters (unchecked; see [`verify`]).
    pub fn params(&self) -> MaterialParams {
        let mut m = MaterialParams { sigma_ink: f64::NAN, eps_fs: f64::NAN, eps_ds: f64::NAN, tan_delta: f64::NAN };
        for p in &self.parameters {
            p.target.set(&mut m, p.value);
        }
        m
    }
}

/// Symmetric trimmed mean and IQR of a trace.
pub fn aggregate(trace: &[f64], trim: f64) -> Result<(f64, f64)> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::Domain(format!("trim fraction {trim} outside [0, 0.5)")));
    }
    let value = trimmed_mean(trace, trim);
    if !value.is_finite() {
        return Err(Error::Extraction("trace has no finite predictions".into()));
    }
    Ok((value, iqr(trace)))
}

/// Predicts every target at every measurement frequency and aggregates
/// each trace with a trimmed mean.
pub fn extract(gamma: &GammaTrace, pipeline: &FeaturePipeline, models: &[TargetModel], trim: f64) -> Result<MaterialEstimate> {
    if gamma.is_empty() {
        return Err(Error::Empty("extraction needs a nonempty gamma trace"));
    }
    gamma.validate()?;
    let samples = gamma.samples();
    let out_of_band = samples.iter().filter(|s| !pipeline.in_band(s.frequency)).count();
    if out_of_band == samples.len() {
        return Err(Error::Extraction("every measurement frequency lies outside the training band".into()));
    }
    if out_of_band > 0 {
        log::warn!(
            "{out_of_band} of {} measurement frequencies lie outside the training band {:.4e}..{:.4e} Hz",
            samples.len(),
            pipeline.train_band.0,
            pipeline.train_band.1
        );
    }
    let x = pipeline.transform(&samples)?;
    let parameters = Target::ALL
        .iter()
        .map(|&target| {
            let model = models
                .iter()
                .find(|m| m.target == target)
                .ok_or_else(|| Error::Missing(format!("no model for target {}", target.name())))?;
            let trace = model.predict(&x);
            let (value, iqr) = aggregate(&trace, trim)?;
            Ok(ParameterEstimate { target, trace, value, iqr })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaterialEstimate {
        frequencies: gamma.frequencies(),
        parameters,
        aggregation: format!("trimmed_mean_{:.0}pct", trim * 100.0),
        trim_fraction: trim,
        out_of_band,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Parameters fed to the forward model, after clamping to its domain.
    pub params: MaterialParams,
    pub clamped: bool,
    pub frequencies: Vec<f64>,
    pub measured_alpha: Vec<f64>,
    pub simulated_alpha: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn clamp_to_domain(p: MaterialParams) -> (MaterialParams, bool) {
    let c = MaterialParams {
        sigma_ink: p.sigma_ink.max(1.0),
        eps_fs: p.eps_fs.max(1.0),
        eps_ds: p.eps_ds.max(1.0),
        tan_delta: p.tan_delta.max(0.0),
    };
    (c, c != p)
}

/// Re-simulates α with the aggregated parameters on the measurement grid
/// and compares it with the measured α.
pub fn verify(estimate: &MaterialEstimate, geom: &CpwGeometry, measured: &GammaTrace, threshold: f64) -> Result<VerificationReport> {
    let raw = estimate.params();
    if [raw.sigma_ink, raw.eps_fs, raw.eps_ds, raw.tan_delta].iter().any(|v| !v.is_finite()) {
        return Err(Error::Extraction("estimate has non-finite aggregates".into()));
    }
    measured.validate()?;
    let (params, clamped) = clamp_to_domain(raw);
    if clamped {
        log::warn!("aggregated parameters clamped to the physical domain before verification");
    }
    let samples = measured.samples();
    let frequencies: Vec<f64> = samples.iter().map(|s| s.frequency).collect();
    let simulated = CpwModel::new(geom)?.sweep_curve(&params, &frequencies)?;
    let measured_alpha: Vec<f64> = samples.iter().map(|s| s.alpha).collect();
    let simulated_alpha: Vec<f64> = simulated.iter().map(|s| s.alpha).collect();
    let residual: Vec<f64> = measured_alpha.iter().zip(&simulated_alpha).map(|(m, s)| libm::fabs(m - s)).collect();
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(VerificationReport {
        params,
        clamped,
        frequencies,
        measured_alpha,
        simulated_alpha,
        residual,
        max_residual,
        threshold,
        pass: max_residual <= threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub target: Target,
    pub measured: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Parameter | Measured | Predicted | Relative error |\n|---|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {:.4e} | {:.4e} | {:.2}% |",
                r.target.label(),
                r.measured,
                r.predicted,
                r.relative_error * 100.0
            );
        }
        out
    }
}

/// Measured-versus-predicted table with |pred − meas| / meas.
pub fn compare_table(estimate: &MaterialEstimate, reference: &MaterialParams) -> ComparisonTable {
    let predicted = estimate.params();
    let rows = Target::ALL
        .iter()
        .map(|&target| {
            let (measured, p) = (target.value(reference), target.value(&predicted));
            ComparisonRow { target, measured, predicted: p, relative_error: relative_error(p, measured) }
        })
        .collect();
    ComparisonTable { rows }
}
