//! Run configuration (TOML).
//!
//! Physical units are part of every key name (`_m`, `_ns`, `_hz`, `_deg`).
//!
//! ```toml
//! seed = 42
//!
//! [scenario]
//! cluster_shadowing_std_db = 3.0
//! # ...
//!
//! [layout]
//! stationarity_user_m = 5.0
//! snapshot_spacing_m = 0.5
//!
//! [[layout.users]]
//! id = 1
//! start_m = [30.0, 0.0, 1.5]
//! heading_deg = 90.0
//! snapshots = 20
//!
//! [array]
//! elements = 64
//! spacing_m = 0.0428
//! center_m = [0.0, 0.0, 10.0]
//! axis = [0.0, 1.0, 0.0]
//! bs_stationarity_m = 0.7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{SynthesisParams, Terminal};
use crate::error::{GscmError, Result};
use crate::geometry::Position;
use crate::layout::{ArrayGeometry, Track, UserId, UserLayout};
use crate::lsp::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Binary,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub id: UserId,
    /// Explicit snapshot positions; excludes the linear-track keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_m: Option<Vec<Position>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_m: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub stationarity_user_m: f64,
    pub snapshot_spacing_m: f64,
    pub users: Vec<UserConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub bs_stationarity_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_positions_m: Option<Vec<Position>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_m: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalConfig {
    pub antennas: usize,
    pub spacing_m: f64,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        Self {
            antennas: 1,
            spacing_m: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 picks the machine default.
    #[serde(default)]
    pub workers: usize,
    pub scenario: ScenarioConfig,
    pub layout: LayoutConfig,
    pub array: ArrayConfig,
    #[serde(default)]
    pub terminal: TerminalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| GscmError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GscmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GscmError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| GscmError::Config(e.to_string()))?;
        if self.terminal.antennas == 0 {
            return Err(GscmError::Config("terminal.antennas must be at least 1".into()));
        }
        if self.layout.users.is_empty() {
            return Err(GscmError::Config("layout.users is empty".into()));
        }
        self.build_layout().map(|_| ())
    }

    fn track(&self, user: &UserConfig) -> Result<Track> {
        let spacing = self.layout.snapshot_spacing_m;
        let linear = (user.start_m, user.heading_deg, user.snapshots);
        match (&user.points_m, linear) {
            (Some(points), (None, None, None)) => Track::new(user.id, points.clone(), spacing),
            (None, (Some(start), heading, Some(n))) => {
                Track::linear(user.id, start, heading.unwrap_or(0.0), spacing, n)
            }
            _ => Err(GscmError::Config(format!(
                "user {} needs either points_m or start_m + snapshots (with optional heading_deg)",
                user.id
            ))),
        }
    }

    pub fn build_array(&self) -> Result<ArrayGeometry> {
        let a = &self.array;
        match (&a.element_positions_m, a.elements) {
            (Some(positions), None) => ArrayGeometry::new(positions.clone(), a.bs_stationarity_m),
            (None, Some(n)) => ArrayGeometry::uniform_linear(
                n,
                a.spacing_m
                    .ok_or_else(|| GscmError::Config("array.spacing_m is required with array.elements".into()))?,
                a.center_m.unwrap_or(Position::ORIGIN),
                a.axis.unwrap_or(Position::new(0.0, 1.0, 0.0)),
                a.bs_stationarity_m,
            ),
            _ => Err(GscmError::Config(
                "array needs exactly one of element_positions_m or elements".into(),
            )),
        }
    }

    /// Layout errors are reported as configuration errors.
    pub fn build_layout(&self) -> Result<UserLayout> {
        let to_config = |e: GscmError| match e {
            GscmError::Config(_) => e,
            other => GscmError::Config(other.to_string()),
        };
        let tracks = self
            .layout
            .users
            .iter()
            .map(|u| self.track(u))
            .collect::<Result<Vec<_>>>()
            .map_err(to_config)?;
        let array = self.build_array().map_err(to_config)?;
        UserLayout::new(tracks, self.layout.stationarity_user_m, array).map_err(to_config)
    }

    pub fn terminal(&self) -> Terminal {
        Terminal::linear(self.terminal.antennas, self.terminal.spacing_m)
    }

    pub fn synthesis_params(&self) -> SynthesisParams {
        SynthesisParams {
            carrier_hz: self.scenario.carrier_hz,
            seed: self.seed,
            cluster_aoa_spread_deg: self.scenario.cluster_aoa_spread_deg,
            cluster_aod_spread_deg: self.scenario.cluster_aod_spread_deg,
            terminal: self.terminal(),
            single_scatterer: false,
        }
    }
}
