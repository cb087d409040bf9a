use core::fmt;
use serde::{Deserialize, Serialize};

use crate::physics::MaterialParams;

/// Extraction target, in leaderboard column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    SigmaInk,
    EpsDs,
    EpsFs,
    TanDelta,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::SigmaInk, Target::EpsDs, Target::EpsFs, Target::TanDelta];

    pub fn name(self) -> &'static str {
        match self {
            Target::SigmaInk => "sigma_ink",
            Target::EpsDs => "eps_ds",
            Target::EpsFs => "eps_fs",
            Target::TanDelta => "tan_delta",
        }
    }

    /// Table header label.
    pub fn label(self) -> &'static str {
        match self {
            Target::SigmaInk => "σ_ink",
            Target::EpsDs => "ε_DS",
            Target::EpsFs => "ε_FS",
            Target::TanDelta => "tanδ",
        }
    }

    pub fn value(self, params: &MaterialParams) -> f64 {
        match self {
            Target::SigmaInk => params.sigma_ink,
            Target::EpsDs => params.eps_ds,
            Target::EpsFs => params.eps_fs,
            Target::TanDelta => params.tan_delta,
        }
    }

    pub fn set(self, params: &mut MaterialParams, value: f64) {
        match self {
            Target::SigmaInk => params.sigma_ink = value,
            Target::EpsDs => params.eps_ds = value,
            Target::EpsFs => params.eps_fs = value,
            Target::TanDelta => params.tan_delta = value,
        }
    }

    pub fn from_name(name: &str) -> Option<Target> {
        Target::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
