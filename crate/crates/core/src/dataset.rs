//! Supervised dataset: a full-factorial sweep of the four material
//! parameters over a frequency grid, mapped through the forward model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::physics::{log_grid, CpwGeometry, CpwModel, MaterialParams, BAND_MAX_HZ, BAND_MIN_HZ};
use crate::rng::{stream, STREAM_AUGMENT, STREAM_PARTITION};
use crate::target::Target;
use crate::{Error, Result};

/// Rows produced by the default configuration.
pub const DEFAULT_GRID_ROWS: usize = 47_200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    /// Evenly spaced levels; a single level sits at `min`.
    pub fn levels(&self) -> Vec<f64> {
        if self.count == 1 {
            return alloc::vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + (self.max - self.min) * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub geometry: CpwGeometry,
    pub sigma_ink: ParamRange,
    pub eps_fs: ParamRange,
    pub eps_ds: ParamRange,
    pub tan_delta: ParamRange,
    pub freq_points: usize,
    #[serde(default = "default_freq_min")]
    pub freq_min: f64,
    #[serde(default = "default_freq_max")]
    pub freq_max: f64,
    /// When set, the grid size must equal this row count.
    #[serde(default)]
    pub declared_rows: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_freq_min() -> f64 {
    BAND_MIN_HZ
}

fn default_freq_max() -> f64 {
    BAND_MAX_HZ
}

impl Default for SweepConfig {
    /// 8 × 5 × 5 × 4 = 800 parameter combinations on 59 log-spaced
    /// frequencies: 47,200 rows.
    fn default() -> Self {
        Self {
            geometry: CpwGeometry::printed_fixture(),
            sigma_ink: ParamRange::new(1.0e7, 5.0e7, 8),
            eps_fs: ParamRange::new(2.0, 4.5, 5),
            eps_ds: ParamRange::new(1.0, 3.0, 5),
            tan_delta: ParamRange::new(0.002, 0.03, 4),
            freq_points: 59,
            freq_min: BAND_MIN_HZ,
            freq_max: BAND_MAX_HZ,
            declared_rows: Some(DEFAULT_GRID_ROWS),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn ranges(&self) -> [(Target, &ParamRange); 4] {
        [
            (Target::SigmaInk, &self.sigma_ink),
            (Target::EpsFs, &self.eps_fs),
            (Target::EpsDs, &self.eps_ds),
            (Target::TanDelta, &self.tan_delta),
        ]
    }

    pub fn combinations(&self) -> Result<usize> {
        self.ranges()
            .iter()
            .try_fold(1usize, |acc, (_, r)| acc.checked_mul(r.count))
            .ok_or_else(|| Error::Config("parameter grid size overflows".into()))
    }

    /// Number of rows `generate` will emit.
    pub fn grid_rows(&self) -> Result<usize> {
        self.combinations()?
            .checked_mul(self.freq_points)
            .ok_or_else(|| Error::Config("dataset size overflows".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate().map_err(|e| Error::Config(format!("geometry: {e}")))?;
        for (target, r) in self.ranges() {
            if r.count == 0 {
                return Err(Error::Config(format!("{target}: count must be >= 1")));
            }
            if !(r.min < r.max) || !r.min.is_finite() || !r.max.is_finite() {
                return Err(Error::Config(format!("{target}: need finite min < max, got [{}, {}]", r.min, r.max)));
            }
        }
        let lower_ok = self.sigma_ink.min > 0.0
            && self.eps_fs.min >= 1.0
            && self.eps_ds.min >= 1.0
            && self.tan_delta.min >= 0.0;
        if !lower_ok {
            return Err(Error::Config("parameter ranges leave the physical domain".into()));
        }
        if self.freq_points == 0 {
            return Err(Error::Config("freq_points must be >= 1".into()));
        }
        if !(self.freq_min > 0.0) || !(self.freq_max > self.freq_min) {
            return Err(Error::Config(format!("invalid band [{}, {}]", self.freq_min, self.freq_max)));
        }
        let rows = self.grid_rows()?;
        if let Some(declared) = self.declared_rows {
            if declared != rows {
                return Err(Error::Config(format!(
                    "grid produces {rows} rows but {declared} were declared"
                )));
            }
        }
        Ok(())
    }

    pub fn frequency_grid(&self) -> Result<Vec<f64>> {
        log_grid(self.freq_min, self.freq_max, self.freq_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Grid,
    Augmented,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Grid => "grid",
            Provenance::Augmented => "augmented",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub frequency: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_ink: f64,
    pub eps_fs: f64,
    pub eps_ds: f64,
    pub tan_delta: f64,
    pub provenance: Provenance,
}

impl DataRow {
    pub fn params(&self) -> MaterialParams {
        MaterialParams { sigma_ink: self.sigma_ink, eps_fs: self.eps_fs, eps_ds: self.eps_ds, tan_delta: self.tan_delta }
    }

    pub fn target(&self, target: Target) -> f64 {
        target.value(&self.params())
    }

    fn numeric(&self) -> [f64; 7] {
        [self.frequency, self.alpha, self.beta, self.sigma_ink, self.eps_fs, self.eps_ds, self.tan_delta]
    }

    pub fn is_finite(&self) -> bool {
        self.numeric().iter().all(|v| v.is_finite())
    }

    /// Key identifying the parameter combination the row belongs to.
    pub fn group_key(&self) -> [u64; 4] {
        [self.sigma_ink, self.eps_fs, self.eps_ds, self.tan_delta].map(canonical_bits)
    }
}

fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Full factorial sweep; row order is σ, ε_FS, ε_DS, tanδ (outer to inner),
/// then frequency.
pub fn generate(config: &SweepConfig) -> Result<Vec<DataRow>> {
    config.validate()?;
    let model = CpwModel::new(&config.geometry)?;
    let grid = config.frequency_grid()?;
    let mut rows = Vec::with_capacity(config.grid_rows()?);
    for &sigma_ink in &config.sigma_ink.levels() {
        for &eps_fs in &config.eps_fs.levels() {
            for &eps_ds in &config.eps_ds.levels() {
                for &tan_delta in &config.tan_delta.levels() {
                    let mat = MaterialParams::new(sigma_ink, eps_fs, eps_ds, tan_delta)?;
                    for p in model.sweep_curve(&mat, &grid)? {
                        rows.push(DataRow {
                            frequency: p.frequency,
                            alpha: p.alpha,
                            beta: p.beta,
                            sigma_ink,
                            eps_fs,
                            eps_ds,
                            tan_delta,
                            provenance: Provenance::Grid,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Drops rows with non-finite fields and exact numeric duplicates, keeping
/// the first occurrence.
pub fn clean(rows: &[DataRow]) -> Vec<DataRow> {
    let mut seen = BTreeSet::new();
    rows.iter()
        .filter(|r| r.is_finite() && seen.insert(r.numeric().map(canonical_bits)))
        .copied()
        .collect()
}

/// Appends `multiplier` copies of every row with α and β perturbed by
/// independent zero-mean Gaussian noise of relative std `noise_rel`.
pub fn augment(rows: &[DataRow], noise_rel: f64, multiplier: usize, seed: u64) -> Result<Vec<DataRow>> {
    if !(noise_rel >= 0.0) || !noise_rel.is_finite() {
        return Err(Error::Domain(format!("noise_rel must be >= 0, got {noise_rel}")));
    }
    let mut out = Vec::with_capacity(rows.len() * (multiplier + 1));
    out.extend_from_slice(rows);
    let mut rng = stream(seed, STREAM_AUGMENT);
    for row in rows {
        for _ in 0..multiplier {
            let na: f64 = rng.sample(StandardNormal);
            let nb: f64 = rng.sample(StandardNormal);
            out.push(DataRow {
                alpha: row.alpha * (1.0 + noise_rel * na),
                beta: row.beta * (1.0 + noise_rel * nb),
                provenance: Provenance::Augmented,
                ..*row
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// 75% train, 20% validation, 5% test.
    #[serde(rename = "p75_20_5")]
    P75_20_5,
    /// 90% train, 5% validation, 5% test.
    #[serde(rename = "p90_5_5")]
    P90_5_5,
}

impl Scheme {
    /// (train, validation) fractions; test takes the rest.
    pub fn fractions(self) -> (f64, f64) {
        match self {
            Scheme::P75_20_5 => (0.75, 0.20),
            Scheme::P90_5_5 => (0.90, 0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub scheme: Scheme,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Row indices of each parameter combination, in order of first appearance.
pub fn groups(rows: &[DataRow]) -> Vec<Vec<usize>> {
    let mut index: BTreeMap<[u64; 4], usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let next = groups.len();
        let g = *index.entry(row.group_key()).or_insert(next);
        if g == next {
            groups.push(Vec::new());
        }
        groups[g].push(i);
    }
    groups
}

/// Seeded group-wise split: every parameter combination lands in exactly
/// one of train/validation/test.
pub fn partition(rows: &[DataRow], scheme: Scheme, seed: u64) -> Result<Partition> {
    if rows.len() < 20 {
        return Err(Error::Partition(format!("need at least 20 rows, got {}", rows.len())));
    }
    let mut groups = groups(rows);
    let n = groups.len();
    let (f_train, f_val) = scheme.fractions();
    let n_train = libm::round(f_train * n as f64) as usize;
    let n_val = libm::round(f_val * n as f64) as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Partition(format!(
            "{n} parameter groups are too few for a {scheme:?} split"
        )));
    }
    groups.shuffle(&mut stream(seed, STREAM_PARTITION));
    let collect = |gs: &[Vec<usize>]| {
        let mut idx: Vec<usize> = gs.iter().flatten().copied().collect();
        idx.sort_unstable();
        idx
    };
    Ok(Partition {
        scheme,
        train: collect(&groups[..n_train]),
        validation: collect(&groups[n_train..n_train + n_val]),
        test: collect(&groups[n_train + n_val..]),
    })
}
