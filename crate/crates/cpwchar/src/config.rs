//! Run configuration (TOML). Unknown keys are rejected; every section is
//! optional and falls back to the defaults below.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cpwchar_core::automl::SearchSpace;
use cpwchar_core::dataset::{ParamRange, Scheme, SweepConfig};
use cpwchar_core::extraction::{DEFAULT_THRESHOLD, DEFAULT_TRIM, FIXTURE_REFERENCE};
use cpwchar_core::features::DEFAULT_MAX_ABS_CORR;
use cpwchar_core::{CpwGeometry, MaterialParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub sigma_ink: ParamRange,
    pub eps_fs: ParamRange,
    pub eps_ds: ParamRange,
    pub tan_delta: ParamRange,
    pub freq_points: usize,
    pub freq_min: f64,
    pub freq_max: f64,
    pub declared_rows: Option<usize>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            sigma_ink: s.sigma_ink,
            eps_fs: s.eps_fs,
            eps_ds: s.eps_ds,
            tan_delta: s.tan_delta,
            freq_points: s.freq_points,
            freq_min: s.freq_min,
            freq_max: s.freq_max,
            declared_rows: s.declared_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentBlock {
    /// Relative standard deviation of the Gaussian noise on α and β.
    pub noise_rel: f64,
    /// Noisy copies appended per grid row.
    pub multiplier: usize,
}

impl Default for AugmentBlock {
    fn default() -> Self {
        Self { noise_rel: 0.01, multiplier: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionBlock {
    pub scheme: Scheme,
}

impl Default for PartitionBlock {
    fn default() -> Self {
        Self { scheme: Scheme::P75_20_5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureBlock {
    pub max_abs_corr: f64,
}

impl Default for FeatureBlock {
    fn default() -> Self {
        Self { max_abs_corr: DEFAULT_MAX_ABS_CORR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionBlock {
    /// Pass threshold on max |Δα|, Np/m.
    pub threshold: f64,
    pub trim: f64,
    /// Conventionally measured values for the comparison table.
    pub reference: MaterialParams,
}

impl Default for ExtractionBlock {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, trim: DEFAULT_TRIM, reference: FIXTURE_REFERENCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every random stream is derived from it.
    pub seed: u64,
    /// Artifacts go to `<output_dir>/<run-id>/`.
    pub output_dir: PathBuf,
    /// Overrides the hash-derived run id.
    pub run_id: Option<String>,
    pub geometry: CpwGeometry,
    pub sweep: SweepBlock,
    pub augmentation: AugmentBlock,
    pub partition: PartitionBlock,
    pub features: FeatureBlock,
    pub search: SearchSpace,
    pub extraction: ExtractionBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            run_id: None,
            geometry: CpwGeometry::printed_fixture(),
            sweep: SweepBlock::default(),
            augmentation: AugmentBlock::default(),
            partition: PartitionBlock::default(),
            features: FeatureBlock::default(),
            search: SearchSpace::default(),
            extraction: ExtractionBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies the root seed everywhere and checks every block.
    pub fn finalize(mut self, seed_override: Option<u64>) -> Result<Self> {
        if let Some(seed) = seed_override {
            self.seed = seed;
        }
        self.search.seed = self.seed;
        self.sweep_config().validate()?;
        self.search.validate()?;
        if !(self.augmentation.noise_rel >= 0.0 && self.augmentation.noise_rel.is_finite()) {
            bail!("augmentation.noise_rel must be finite and >= 0");
        }
        if !(self.features.max_abs_corr > 0.0 && self.features.max_abs_corr <= 1.0) {
            bail!("features.max_abs_corr must lie in (0, 1]");
        }
        if !(self.extraction.threshold > 0.0) || !(0.0..0.5).contains(&self.extraction.trim) {
            bail!("extraction.threshold must be > 0 and extraction.trim in [0, 0.5)");
        }
        self.extraction.reference.validate()?;
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                bail!("run_id {id:?} is not a plain directory name");
            }
        }
        Ok(self)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            geometry: self.geometry.clone(),
            sigma_ink: self.sweep.sigma_ink,
            eps_fs: self.sweep.eps_fs,
            eps_ds: self.sweep.eps_ds,
            tan_delta: self.sweep.tan_delta,
            freq_points: self.sweep.freq_points,
            freq_min: self.sweep.freq_min,
            freq_max: self.sweep.freq_max,
            declared_rows: self.sweep.declared_rows,
            seed: self.seed,
        }
    }

    /// SHA-256 over the canonical JSON form, ignoring where artifacts go.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.run_id = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("run-{}", &self.hash()[..12]))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.run_id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn readme_example_is_the_default() {
        let readme = include_str!("../../../README.md");
        let block = readme.split("```toml\n").nth(1).and_then(|rest| rest.split("```").next()).unwrap();
        assert_eq!(RunConfig::from_toml(block).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = 3").is_err());
        assert!(RunConfig::from_toml("[sweep]\nfreq_pts = 3").is_err());
        assert!(RunConfig::from_toml("[search.grids.gbt]\nmax_trees = 10\nshrink = 1").is_err());
    }

    #[test]
    fn seed_override_changes_hash_but_not_output_dir() {
        let a = RunConfig::default().finalize(None).unwrap();
        let b = RunConfig::default().finalize(Some(7)).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.search.seed, 7);
        let c = RunConfig { output_dir: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.hash(), c.hash());
        assert!(a.run_id().starts_with("run-"));
    }

    #[test]
    fn invalid_blocks_fail_validation() {
        let bad = RunConfig::from_toml("[sweep.eps_fs]\nmin = 3.0\nmax = 2.0\ncount = 2").unwrap();
        assert!(bad.finalize(None).is_err());
        let declared = RunConfig::from_toml("[sweep]\ndeclared_rows = 5").unwrap();
        assert!(declared.finalize(None).is_err());
        let trials = RunConfig::from_toml("[search]\ntrials_per_family = 0").unwrap();
        assert!(trials.finalize(None).is_err());
    }
}
