//! Run-directory layout and JSON artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const DATASET: &str = "dataset.csv";
pub const PIPELINE: &str = "pipeline.json";
pub const MODELS_DIR: &str = "models";
pub const LEADERBOARD: &str = "leaderboard.json";
pub const REPORT_TABLES: &str = "leaderboard.md";
pub const TRIALS: &str = "trials.jsonl";
pub const GAMMA: &str = "gamma.csv";
pub const ESTIMATE: &str = "estimate.json";
pub const VERIFICATION: &str = "verification.json";
pub const COMPARISON: &str = "comparison.md";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const FIG7: &str = "fig7_predictions.csv";
pub const FIG8: &str = "fig8_attenuation.csv";
pub const REPORT: &str = "report.md";

/// JSON artifact body together with the hash of the configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub grid: usize,
    pub cleaned: usize,
    pub augmented: usize,
    pub total: usize,
}

/// Files a stage wrote, relative to the run directory, plus stage-specific
/// counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run_id: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<RowCounts>,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(run_id: &str, seed: u64, config_hash: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run_id: run_id.into(),
            seed,
            config_hash: config_hash.into(),
            rows: None,
            stages: BTreeMap::new(),
        }
    }

    /// Loads the run's manifest, or starts a new one. A manifest written
    /// under a different configuration is replaced.
    pub fn open(dir: &Path, run_id: &str, seed: u64, config_hash: &str) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if path.exists() {
            let m: Manifest = read_json(&path)?;
            if m.config_hash == config_hash && m.seed == seed {
                return Ok(m);
            }
            log::warn!("{} belongs to another configuration; starting a new manifest", path.display());
        }
        Ok(Self::new(run_id, seed, config_hash))
    }

    pub fn record(&mut self, stage: &str, record: StageRecord) {
        self.stages.insert(stage.into(), record);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }
}

pub fn model_file(target: cpwchar_core::Target) -> PathBuf {
    Path::new(MODELS_DIR).join(format!("{}.json", target.name()))
}

/// Path relative to `dir` with forward slashes, for manifests.
pub fn relative(dir: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(dir).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamped_flattens_the_body() {
        #[derive(Debug, PartialEq, Serialize, Deserialize)]
        struct Body {
            value: f64,
        }
        let s = Stamped { config_hash: "ab".into(), seed: 3, body: Body { value: 0.1 } };
        let json = to_json(&s).unwrap();
        assert!(json.contains("\"value\": 0.1"));
        assert_eq!(serde_json::from_str::<Stamped<Body>>(&json).unwrap(), s);
    }

    #[test]
    fn manifest_is_replaced_on_config_change() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("r", 0, "h1");
        m.record("generate", StageRecord { files: vec![DATASET.into()], ..Default::default() });
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::open(dir.path(), "r", 0, "h1").unwrap(), m);
        assert!(Manifest::open(dir.path(), "r", 0, "h2").unwrap().stages.is_empty());
        assert!(Manifest::open(dir.path(), "r", 1, "h1").unwrap().stages.is_empty());
    }

    #[test]
    fn relative_paths_use_forward_slashes() {
        let dir = Path::new("/tmp/run");
        assert_eq!(relative(dir, &dir.join("models").join("eps_fs.json")), "models/eps_fs.json");
    }
}
