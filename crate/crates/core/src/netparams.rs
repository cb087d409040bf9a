//! Two-port network algebra and multiline propagation-constant extraction.
//!
//! A line pair (i, j) with lengths l_i < l_j is reduced to the cascade
//! product `M_j · M_i⁻¹`, whose eigenvalues are `exp(∓γ·Δl)` independent of
//! the (identical) probe error boxes. Every pair yields an estimate of γ;
//! estimates are combined with weights Δl², which is the inverse-variance
//! weight when the eigenvalue noise is comparable across pairs.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{fabs, round};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::physics::{CpwModel, MaterialParams};
use crate::rng::{stream, STREAM_NOISE};
use crate::{Error, Result};

/// S-parameters of a two-port at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortRecord {
    pub frequency: f64,
    pub s11: Complex64,
    pub s12: Complex64,
    pub s21: Complex64,
    pub s22: Complex64,
}

/// Wave-cascade matrix at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeMatrix {
    pub frequency: f64,
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl CascadeMatrix {
    pub fn identity(frequency: f64) -> Self {
        let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Self { frequency, m11: one, m12: zero, m21: zero, m22: one }
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> Complex64 {
        self.m11 + self.m22
    }

    pub fn mul(&self, rhs: &CascadeMatrix) -> CascadeMatrix {
        CascadeMatrix {
            frequency: self.frequency,
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    pub fn inverse(&self) -> Result<CascadeMatrix> {
        let det = self.det();
        let scale = self.m11.norm() * self.m22.norm() + self.m12.norm() * self.m21.norm();
        if !(det.norm() > f64::EPSILON * scale) || !det.is_finite() {
            return Err(Error::SingularMatrix { frequency: self.frequency });
        }
        Ok(CascadeMatrix {
            frequency: self.frequency,
            m11: self.m22 / det,
            m12: -self.m12 / det,
            m21: -self.m21 / det,
            m22: self.m11 / det,
        })
    }
}

/// Extracted γ = α + jβ at one frequency, 1/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub frequency: f64,
    pub gamma: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GammaTrace {
    pub points: Vec<GammaPoint>,
}

impl GammaTrace {
    pub fn from_samples(samples: &[crate::physics::PropagationSample]) -> Self {
        Self {
            points: samples
                .iter()
                .map(|s| GammaPoint { frequency: s.frequency, gamma: Complex64::new(s.alpha, s.beta) })
                .collect(),
        }
    }

    pub fn samples(&self) -> Vec<crate::physics::PropagationSample> {
        self.points
            .iter()
            .map(|p| crate::physics::PropagationConstant { frequency: p.frequency, alpha: p.gamma.re, beta: p.gamma.im })
            .collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.windows(2).any(|w| !(w[1].frequency > w[0].frequency)) {
            return Err(Error::Usage("gamma trace frequencies must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// One measured line: its physical length and its swept S-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMeasurement {
    pub length: f64,
    pub records: Vec<TwoPortRecord>,
}

pub fn s_to_m(rec: &TwoPortRecord) -> Result<CascadeMatrix> {
    let scale = 1f64.max(rec.s11.norm()).max(rec.s12.norm()).max(rec.s22.norm());
    let magnitude = rec.s21.norm();
    if !(magnitude > 16.0 * f64::EPSILON * scale) || !rec.s21.is_finite() {
        return Err(Error::SingularConversion { frequency: rec.frequency, magnitude });
    }
    let inv = rec.s21.inv();
    Ok(CascadeMatrix {
        frequency: rec.frequency,
        m11: (rec.s12 * rec.s21 - rec.s11 * rec.s22) * inv,
        m12: rec.s11 * inv,
        m21: -rec.s22 * inv,
        m22: inv,
    })
}

/// Inverse of [`s_to_m`].
pub fn m_to_s(m: &CascadeMatrix) -> Result<TwoPortRecord> {
    if !(m.m22.norm() > 0.0) || !m.m22.is_finite() {
        return Err(Error::SingularMatrix { frequency: m.frequency });
    }
    let s21 = m.m22.inv();
    Ok(TwoPortRecord {
        frequency: m.frequency,
        s11: m.m12 * s21,
        s12: m.det() * s21,
        s21,
        s22: -m.m21 * s21,
    })
}

fn same_frequency(a: f64, b: f64) -> bool {
    fabs(a - b) <= 1e-9 * fabs(a).max(fabs(b)).max(1.0)
}

/// Eigenvalues of `mj · mi⁻¹` by the closed-form 2×2 root, ordered so that
/// the first has |λ| ≤ |second|.
pub fn eig_pair(mi: &CascadeMatrix, mj: &CascadeMatrix) -> Result<(Complex64, Complex64)> {
    if !same_frequency(mi.frequency, mj.frequency) {
        return Err(Error::GridMismatch(format!(
            "cascade matrices at {} Hz and {} Hz",
            mi.frequency, mj.frequency
        )));
    }
    let m = mj.mul(&mi.inverse()?);
    Ok(eigenvalues(&m))
}

fn eigenvalues(m: &CascadeMatrix) -> (Complex64, Complex64) {
    let diff = m.m11 - m.m22;
    let root = (diff * diff + 4.0 * m.m12 * m.m21).sqrt();
    let a = 0.5 * (m.trace() + root);
    let b = 0.5 * (m.trace() - root);
    if b.norm() <= a.norm() {
        (b, a)
    } else {
        (a, b)
    }
}

/// γ = −ln(λ)/Δl with the phase branch nearest `phase_hint` (radians of
/// β·Δl), or the principal branch without a hint.
pub fn gamma_from_pair(lambda: Complex64, delta_l: f64, phase_hint: Option<f64>) -> Result<Complex64> {
    if !(lambda.norm() > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("eigenvalue must be finite and nonzero, got {lambda}")));
    }
    if delta_l == 0.0 || !delta_l.is_finite() {
        return Err(Error::Domain("line-length difference must be nonzero".into()));
    }
    let log = lambda.ln();
    // -ln λ = -ln|λ| - j(φ + 2πm); pick m so the phase lands nearest the hint.
    let principal = -log.im;
    let phase = match phase_hint {
        Some(hint) => principal + 2.0 * PI * round((hint - principal) / (2.0 * PI)),
        None => principal,
    };
    Ok(Complex64::new(-log.re, phase) / delta_l)
}

/// Forward-mode γ for one pair. The eigenvalues are e^{∓γΔl}; each root
/// read as the forward one gives a candidate, and the candidate nearest the
/// reference γ wins. Without a reference the |λ| ≤ 1 root is forward. The
/// reference matters for short pairs, where |λ| ≈ 1 and noise can swap the
/// magnitude order.
fn pair_gamma(lambdas: (Complex64, Complex64), delta_l: f64, reference: Option<Complex64>) -> Result<Complex64> {
    let (small, large) = lambdas;
    let hint = reference.map(|g| g.im * delta_l);
    let forward = gamma_from_pair(small, delta_l, hint)?;
    let Some(r) = reference else {
        return Ok(forward);
    };
    let backward = gamma_from_pair(large, delta_l, hint)?;
    Ok(if (backward - r).norm() < (forward - r).norm() { backward } else { forward })
}

/// Order lines by length, tie-broken by their data, so the result does not
/// depend on the caller's ordering.
fn canonical_order(lines: &[LineMeasurement]) -> Vec<usize> {
    let key = |l: &LineMeasurement| -> Vec<u64> {
        l.records
            .iter()
            .flat_map(|r| [r.s11, r.s12, r.s21, r.s22])
            .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
            .collect()
    };
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        lines[a]
            .length
            .total_cmp(&lines[b].length)
            .then_with(|| key(&lines[a]).cmp(&key(&lines[b])))
    });
    order
}

/// Weighted multiline estimate of γ(f) from lines measured on one grid.
pub fn multiline_gamma(lines: &[LineMeasurement]) -> Result<GammaTrace> {
    if lines.len() < 2 {
        return Err(Error::Usage(format!("multiline extraction needs >= 2 lines, got {}", lines.len())));
    }
    let order = canonical_order(lines);
    let lines: Vec<&LineMeasurement> = order.iter().map(|&i| &lines[i]).collect();
    if lines.iter().any(|l| !(l.length > 0.0) || !l.length.is_finite()) {
        return Err(Error::Domain("line lengths must be positive".into()));
    }
    if lines[0].length == lines[lines.len() - 1].length {
        return Err(Error::Usage("multiline extraction needs at least two distinct line lengths".into()));
    }

    let grid: Vec<f64> = lines[0].records.iter().map(|r| r.frequency).collect();
    if grid.is_empty() {
        return Err(Error::Empty("line measurement has no frequency points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch("frequencies must be strictly increasing".into()));
    }
    for (pos, line) in lines.iter().enumerate().skip(1) {
        let matches = line.records.len() == grid.len()
            && line.records.iter().zip(&grid).all(|(r, &f)| same_frequency(r.frequency, f));
        if !matches {
            return Err(Error::GridMismatch(format!(
                "line of length {} m (input #{}) does not share the frequency grid of line #{}",
                line.length, order[pos], order[0]
            )));
        }
    }

    // All pairs with positive length difference, longest first for seeding.
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let dl = lines[j].length - lines[i].length;
            if dl > 0.0 {
                pairs.push((i, j, dl));
            }
        }
    }
    // Seeding order: longest pair first, stable among equal lengths.
    let mut seed_order: Vec<usize> = (0..pairs.len()).collect();
    seed_order.sort_by(|&a, &b| pairs[b].2.total_cmp(&pairs[a].2));

    let mut points = Vec::with_capacity(grid.len());
    let mut previous: Option<(f64, Complex64)> = None;
    for (k, &frequency) in grid.iter().enumerate() {
        let cascades: Vec<Result<CascadeMatrix>> = lines.iter().map(|l| s_to_m(&l.records[k])).collect();
        let pair_lambdas = |p: &(usize, usize, f64)| -> Result<(Complex64, Complex64)> {
            let mi = cascades[p.0].as_ref().map_err(Clone::clone)?;
            let mj = cascades[p.1].as_ref().map_err(Clone::clone)?;
            eig_pair(mi, mj)
        };

        // β scales with frequency; α is carried over unchanged.
        let reference = match previous {
            Some((f_prev, g)) => Some(Complex64::new(g.re, g.im * frequency / f_prev)),
            None => {
                // Longest surviving pair, principal branch.
                seed_order.iter().find_map(|&p| {
                    let pair = &pairs[p];
                    let lambdas = pair_lambdas(pair).ok()?;
                    pair_gamma(lambdas, pair.2, None).ok()
                })
            }
        };

        let mut weighted = Complex64::new(0.0, 0.0);
        let mut weight_sum = 0.0;
        for pair in &pairs {
            match pair_lambdas(pair).and_then(|l| pair_gamma(l, pair.2, reference)) {
                Ok(gamma) if gamma.is_finite() => {
                    let w = pair.2 * pair.2;
                    weighted += gamma * w;
                    weight_sum += w;
                }
                Ok(_) => log::warn!("dropping line pair ({}, {}) at {frequency} Hz: non-finite gamma", order[pair.0], order[pair.1]),
                Err(e) => log::warn!("dropping line pair ({}, {}) at {frequency} Hz: {e}", order[pair.0], order[pair.1]),
            }
        }
        if weight_sum == 0.0 {
            return Err(Error::NoSurvivingPair { frequency });
        }
        let gamma = weighted / weight_sum;
        previous = Some((frequency, gamma));
        points.push(GammaPoint { frequency, gamma });
    }
    Ok(GammaTrace { points })
}

/// dc conductivity σ = l / (R·A).
pub fn dc_conductivity(length: f64, resistance: f64, area: f64) -> Result<f64> {
    for (name, v) in [("length", length), ("resistance", resistance), ("area", area)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok(length / (resistance * area))
}

/// Matched, reciprocal line section: S11 = S22 = 0, S21 = S12 = e^{−γl}.
pub fn matched_line(frequency: f64, gamma: Complex64, length: f64) -> TwoPortRecord {
    let t = (-gamma * length).exp();
    let zero = Complex64::new(0.0, 0.0);
    TwoPortRecord { frequency, s11: zero, s12: t, s21: t, s22: zero }
}

/// Ideal S-parameters of every fixture line for the given materials.
pub fn synthesize_lines(model: &CpwModel, mat: &MaterialParams, grid: &[f64]) -> Result<Vec<LineMeasurement>> {
    let curve = model.sweep_curve(mat, grid)?;
    Ok(model
        .geometry()
        .line_lengths
        .iter()
        .map(|&length| LineMeasurement {
            length,
            records: curve
                .iter()
                .map(|p| matched_line(p.frequency, Complex64::new(p.alpha, p.beta), length))
                .collect(),
        })
        .collect())
}

/// Adds independent zero-mean complex Gaussian noise of standard deviation
/// `sigma` (per real and imaginary part) to every S-parameter.
pub fn add_noise(lines: &mut [LineMeasurement], sigma: f64, seed: u64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("noise level must be >= 0, got {sigma}")));
    }
    let mut rng = stream(seed, STREAM_NOISE);
    for line in lines.iter_mut() {
        for rec in line.records.iter_mut() {
            for s in [&mut rec.s11, &mut rec.s21, &mut rec.s12, &mut rec.s22] {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex64::new(sigma * re, sigma * im);
            }
        }
    }
    Ok(())
}
