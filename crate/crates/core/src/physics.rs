//! Quasi-TEM forward model of a coplanar waveguide printed on a flexible
//! substrate that rests on a dielectric spacer.
//!
//! The line is described by partial-capacitance conformal mapping: each
//! dielectric layer contributes a filling factor `q` to the effective
//! permittivity, conductor loss follows from a series resistance that blends
//! the dc and skin-effect regimes, and dielectric loss follows from the
//! substrate loss tangent weighted by its filling factor.

use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, expm1, fabs, pow, sinh, sqrt};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MU_0: f64 = 4.0e-7 * PI;

/// Lower edge of the measured band, Hz.
pub const BAND_MIN_HZ: f64 = 10.0e6;
/// Upper edge of the measured band, Hz.
pub const BAND_MAX_HZ: f64 = 20.0e9;

/// Exponent of the power-mean blend between dc and skin-effect resistance.
const BLEND_EXPONENT: f64 = 16.0;
/// AGM stopping tolerance, relative.
const AGM_TOLERANCE: f64 = 1e-14;

/// The four quantities the pipeline extracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Ink conductivity, S/m.
    pub sigma_ink: f64,
    /// Relative permittivity of the flexible substrate.
    pub eps_fs: f64,
    /// Relative permittivity of the dielectric spacer.
    pub eps_ds: f64,
    /// Loss tangent of the flexible substrate.
    pub tan_delta: f64,
}

impl MaterialParams {
    pub fn new(sigma_ink: f64, eps_fs: f64, eps_ds: f64, tan_delta: f64) -> Result<Self> {
        let params = Self { sigma_ink, eps_fs, eps_ds, tan_delta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ink > 0.0) {
            return Err(Error::Domain(alloc::format!("sigma_ink must be > 0, got {}", self.sigma_ink)));
        }
        if !(self.eps_fs >= 1.0) || !self.eps_fs.is_finite() {
            return Err(Error::Domain(alloc::format!("eps_fs must be >= 1, got {}", self.eps_fs)));
        }
        if !(self.eps_ds >= 1.0) || !self.eps_ds.is_finite() {
            return Err(Error::Domain(alloc::format!("eps_ds must be >= 1, got {}", self.eps_ds)));
        }
        if !(self.tan_delta >= 0.0) || !self.tan_delta.is_finite() {
            return Err(Error::Domain(alloc::format!("tan_delta must be >= 0, got {}", self.tan_delta)));
        }
        Ok(())
    }
}

/// Cross-section and line set of the printed CPW fixture. All lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpwGeometry {
    pub w_center: f64,
    pub gap: f64,
    pub w_ground: f64,
    pub t_substrate: f64,
    pub t_spacer: f64,
    pub t_metal: f64,
    pub line_lengths: Vec<f64>,
}

impl CpwGeometry {
    /// The printed fixture: 1.983 mm centre strip, 0.13 mm gaps, 1.983 mm
    /// grounds on 125 µm PET over a 5 mm spacer, 2 µm plating, six lines.
    pub fn printed_fixture() -> Self {
        Self {
            w_center: 1.983e-3,
            gap: 0.13e-3,
            w_ground: 1.983e-3,
            t_substrate: 125e-6,
            t_spacer: 5e-3,
            t_metal: 2e-6,
            line_lengths: alloc::vec![14.97e-3, 18.42e-3, 23.57e-3, 35.78e-3, 61.60e-3, 97.93e-3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("w_center", self.w_center),
            ("gap", self.gap),
            ("w_ground", self.w_ground),
            ("t_substrate", self.t_substrate),
            ("t_spacer", self.t_spacer),
            ("t_metal", self.t_metal),
        ];
        for (name, v) in dims {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(alloc::format!("{name} must be a positive length, got {v}")));
            }
        }
        if self.line_lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain("line lengths must be positive".into()));
        }
        if self.line_lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("line lengths must be strictly increasing".into()));
        }
        Ok(())
    }
}

impl Default for CpwGeometry {
    fn default() -> Self {
        Self::printed_fixture()
    }
}

/// One (frequency, α, β) observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConstant {
    /// Hz.
    pub frequency: f64,
    /// Attenuation, Np/m.
    pub alpha: f64,
    /// Phase constant, rad/m.
    pub beta: f64,
}

/// A swept observation is the same record as a single evaluation.
pub type PropagationSample = PropagationConstant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePermittivity {
    pub eps_eff: f64,
    /// Filling factor of the flexible substrate (q1).
    pub fill_substrate: f64,
    /// Filling factor of the spacer (q2).
    pub fill_spacer: f64,
    /// Characteristic impedance, Ω.
    pub z0: f64,
}

/// Arithmetic-geometric mean of two non-negative numbers.
fn agm(mut a: f64, mut b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        if fabs(a - b) <= AGM_TOLERANCE * a {
            break;
        }
        let next_a = 0.5 * (a + b);
        b = sqrt(a * b);
        a = next_a;
    }
    0.5 * (a + b)
}

/// Complementary modulus `sqrt(1 - k²)` without cancellation near k = 1.
pub fn complementary_modulus(k: f64) -> f64 {
    sqrt((1.0 - k) * (1.0 + k))
}

/// Complete elliptic integral of the first kind, K(k) = π / (2·AGM(1, k′)).
/// Returns `+inf` at k = 1.
pub fn ellipk(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(alloc::format!("elliptic modulus must lie in [0, 1], got {k}")));
    }
    let m = agm(1.0, complementary_modulus(k));
    Ok(if m == 0.0 { f64::INFINITY } else { PI / (2.0 * m) })
}

/// K(k)/K(k′) for a modulus in [0, 1).
///
/// Written as AGM(1, k)/AGM(1, k′), which needs no special case at k = 0.
pub fn ellipk_ratio(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(alloc::format!("elliptic modulus must lie in [0, 1), got {k}")));
    }
    Ok(agm(1.0, k) / agm(1.0, complementary_modulus(k)))
}

/// sinh(x)/sinh(y) for 0 < x < y, safe for large arguments.
fn sinh_ratio(x: f64, y: f64) -> f64 {
    if y > 20.0 {
        exp(x - y) * (-expm1(-2.0 * x)) / (-expm1(-2.0 * y))
    } else {
        sinh(x) / sinh(y)
    }
}

/// Geometry-only quantities of the conformal mapping, reusable across
/// materials and frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpwModel {
    geometry: CpwGeometry,
    /// q of the substrate alone (depth t_substrate).
    q_substrate: f64,
    /// q of substrate plus spacer minus the substrate share.
    q_spacer: f64,
    /// K(k0′)/K(k0) of the air-filled line.
    air_ratio: f64,
}

impl CpwModel {
    pub fn new(geometry: &CpwGeometry) -> Result<Self> {
        geometry.validate()?;
        let a = geometry.w_center;
        let b = geometry.w_center + 2.0 * geometry.gap;
        let k0 = a / b;
        let ratio_k0 = ellipk_ratio(k0)?;

        let fill = |h: f64| -> Result<f64> {
            let k = sinh_ratio(PI * a / (4.0 * h), PI * b / (4.0 * h));
            Ok(0.5 * ellipk_ratio(k)? / ratio_k0)
        };
        let q_substrate = fill(geometry.t_substrate)?;
        let q_stack = fill(geometry.t_substrate + geometry.t_spacer)?;

        Ok(Self {
            geometry: geometry.clone(),
            q_substrate,
            q_spacer: (q_stack - q_substrate).max(0.0),
            air_ratio: 1.0 / ratio_k0,
        })
    }

    pub fn geometry(&self) -> &CpwGeometry {
        &self.geometry
    }

    pub fn effective_permittivity(&self, mat: &MaterialParams) -> EffectivePermittivity {
        let eps_eff =
            1.0 + self.q_substrate * (mat.eps_fs - 1.0) + self.q_spacer * (mat.eps_ds - 1.0);
        EffectivePermittivity {
            eps_eff,
            fill_substrate: self.q_substrate,
            fill_spacer: self.q_spacer,
            z0: 30.0 * PI / sqrt(eps_eff) * self.air_ratio,
        }
    }

    /// Per-unit-length series resistance, Ω/m.
    pub fn series_resistance(&self, sigma: f64, frequency: f64) -> f64 {
        let g = &self.geometry;
        let r_dc = 1.0 / (sigma * g.t_metal * g.w_center) + 1.0 / (2.0 * sigma * g.t_metal * g.w_ground);
        let r_surface = sqrt(PI * frequency * MU_0 / sigma);
        // Both faces of the centre strip, both faces of each ground.
        let r_skin = r_surface / (2.0 * g.w_center) + r_surface / (4.0 * g.w_ground);
        let scale = r_dc.max(r_skin);
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        let p = BLEND_EXPONENT;
        scale * pow(pow(r_dc / scale, p) + pow(r_skin / scale, p), 1.0 / p)
    }

    /// Conductor and dielectric attenuation, Np/m.
    pub fn loss_components(&self, mat: &MaterialParams, frequency: f64) -> (f64, f64) {
        let eff = self.effective_permittivity(mat);
        let beta = 2.0 * PI * frequency / SPEED_OF_LIGHT * sqrt(eff.eps_eff);
        let alpha_c = self.series_resistance(mat.sigma_ink, frequency) / (2.0 * eff.z0);
        let alpha_d = 0.5 * beta * eff.fill_substrate * (mat.eps_fs / eff.eps_eff) * mat.tan_delta;
        (alpha_c, alpha_d)
    }

    pub fn propagation(&self, mat: &MaterialParams, frequency: f64) -> Result<PropagationConstant> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::Domain(alloc::format!("frequency must be > 0, got {frequency}")));
        }
        let eff = self.effective_permittivity(mat);
        let (alpha_c, alpha_d) = self.loss_components(mat, frequency);
        Ok(PropagationConstant {
            frequency,
            alpha: alpha_c + alpha_d,
            beta: 2.0 * PI * frequency / SPEED_OF_LIGHT * sqrt(eff.eps_eff),
        })
    }

    pub fn sweep_curve(&self, mat: &MaterialParams, freq_grid: &[f64]) -> Result<Vec<PropagationSample>> {
        check_grid(freq_grid)?;
        freq_grid.iter().map(|&f| self.propagation(mat, f)).collect()
    }
}

fn check_grid(freq_grid: &[f64]) -> Result<()> {
    if freq_grid.is_empty() {
        return Err(Error::Usage("frequency grid is empty".into()));
    }
    if freq_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage("frequency grid must be strictly ascending".into()));
    }
    Ok(())
}

pub fn cpw_eeff(geom: &CpwGeometry, mat: &MaterialParams) -> Result<EffectivePermittivity> {
    mat.validate()?;
    Ok(CpwModel::new(geom)?.effective_permittivity(mat))
}

pub fn propagation(geom: &CpwGeometry, mat: &MaterialParams, frequency: f64) -> Result<PropagationConstant> {
    mat.validate()?;
    CpwModel::new(geom)?.propagation(mat, frequency)
}

pub fn sweep_curve(geom: &CpwGeometry, mat: &MaterialParams, freq_grid: &[f64]) -> Result<Vec<PropagationSample>> {
    check_grid(freq_grid)?;
    mat.validate()?;
    CpwModel::new(geom)?.sweep_curve(mat, freq_grid)
}

/// `n` logarithmically spaced frequencies with exact endpoints.
pub fn log_grid(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>> {
    grid(f_min, f_max, n, true)
}

/// `n` linearly spaced frequencies with exact endpoints.
pub fn linear_grid(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>> {
    grid(f_min, f_max, n, false)
}

fn grid(f_min: f64, f_max: f64, n: usize, log: bool) -> Result<Vec<f64>> {
    if n == 0 || !(f_min > 0.0) || !(f_max >= f_min) {
        return Err(Error::Usage(alloc::format!("invalid frequency grid [{f_min}, {f_max}] x {n}")));
    }
    if n == 1 {
        return Ok(alloc::vec![f_min]);
    }
    if f_max == f_min {
        return Err(Error::Usage("multi-point grid needs f_max > f_min".into()));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                f_min
            } else if i == n - 1 {
                f_max
            } else if log {
                f_min * pow(f_max / f_min, i as f64 / last)
            } else {
                f_min + (f_max - f_min) * (i as f64 / last)
            }
        })
        .collect())
}
