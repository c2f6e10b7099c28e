//! Run configuration in TOML. Unknown keys are rejected.
//!
//! ```toml
//! [grid]
//! n = 512
//! box_multiplier = 8.0   # box side in units of the support diameter
//!
//! [time]
//! final = 0.01
//! snapshot = 0.0005
//! dt = { policy = "cfl_fraction", fraction = 0.5 }
//!
//! [init]
//! class = "generic"
//! seed = 7
//! support = 1.0          # radius used for seeded bumps
//!
//! [probe]
//! radii = [3.0, 4.0, 6.0]
//! mtheta = 512
//! components = ["u1", "u2", "speed"]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::farfield::Component;
use crate::grid::Grid;
use crate::initdata::{seeded_bumps, BumpProfile, BumpSpec, SymmetryClass};
use crate::kernels::Point2;
use crate::solver::{DtPolicy, RunOptions};

/// Probes must stay within this fraction of the box side.
pub const PROBE_WINDOW: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Absolute box side; overrides `box_multiplier`.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_len: Option<f64>,
    #[serde(default = "default_box_multiplier")]
    pub box_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "final")]
    pub final_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: DtPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpEntry {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub amp: f64,
}

impl From<BumpEntry> for BumpSpec {
    fn from(b: BumpEntry) -> Self {
        BumpSpec::new(b.cx, b.cy, b.r, b.amp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default = "default_class")]
    pub class: SymmetryClass,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub profile: BumpProfile,
    #[serde(default = "default_support")]
    pub support: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<BumpEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Multiples of the support radius.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_mtheta")]
    pub mtheta: usize,
    #[serde(default = "default_components")]
    pub components: Vec<Component>,
    /// Probe times; empty means the snapshot nearest mid-run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default = "default_init")]
    pub init: InitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSection>,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_n() -> usize {
    256
}
fn default_box_multiplier() -> f64 {
    8.0
}
fn default_dt() -> DtPolicy {
    DtPolicy::CflFraction { fraction: 0.5 }
}
fn default_class() -> SymmetryClass {
    SymmetryClass::Generic
}
fn default_support() -> f64 {
    1.0
}
fn default_radii() -> Vec<f64> {
    vec![3.0, 4.0, 6.0]
}
fn default_mtheta() -> usize {
    512
}
fn default_components() -> Vec<Component> {
    vec![Component::U1, Component::U2, Component::Speed]
}
fn default_output() -> String {
    "hexns-out".into()
}
fn default_grid() -> GridSection {
    GridSection { n: default_n(), box_len: None, box_multiplier: default_box_multiplier() }
}
fn default_init() -> InitSection {
    InitSection { class: default_class(), seed: 0, profile: BumpProfile::default(), support: default_support(), bumps: Vec::new() }
}

impl SimConfig {
    /// Bumps of the initial datum, seeded when none are listed.
    pub fn bumps(&self) -> Vec<BumpSpec> {
        if self.init.bumps.is_empty() {
            seeded_bumps(self.init.support, self.init.class, self.init.seed)
        } else {
            self.init.bumps.iter().map(|&b| b.into()).collect()
        }
    }

    /// Radius of the smallest origin-centred disk holding every bump.
    pub fn support_radius(&self) -> f64 {
        self.bumps().iter().map(|b| b.center.norm() + b.radius).fold(0.0, f64::max)
    }

    pub fn box_len(&self) -> f64 {
        self.grid.box_len.unwrap_or(self.grid.box_multiplier * 2.0 * self.support_radius())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.n, self.box_len()).expect("validated grid")
    }

    pub fn snapshot_interval(&self) -> f64 {
        self.time.snapshot.unwrap_or(self.time.final_time / 10.0)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            final_time: self.time.final_time,
            dt: self.time.dt,
            snapshot_interval: self.snapshot_interval(),
            keep_fields: self.probe.is_some(),
            checkpoint_dir: None,
        }
    }

    /// Probe radii in absolute units.
    pub fn probe_radii(&self) -> Vec<f64> {
        let s = self.support_radius();
        self.probe.as_ref().map(|p| p.radii.iter().map(|m| m * s).collect()).unwrap_or_default()
    }

    /// Probe times, defaulting to the snapshot nearest `T/2`.
    pub fn probe_times(&self) -> Vec<f64> {
        match &self.probe {
            None => Vec::new(),
            Some(p) if !p.times.is_empty() => p.times.clone(),
            Some(_) => {
                let h = self.snapshot_interval();
                vec![((0.5 * self.time.final_time / h).round().max(1.0) * h).min(self.time.final_time)]
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = self.grid.n;
        if !n.is_power_of_two() {
            return Err(invalid("grid.n", "grid.n must be a power of 2"));
        }
        if !(64..=4096).contains(&n) {
            return Err(invalid("grid.n", format!("grid.n = {n} outside [64, 4096]")));
        }
        if let Some(b) = self.grid.box_len {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("grid.box", "grid.box must be > 0"));
            }
        }
        if !(self.grid.box_multiplier > 0.0 && self.grid.box_multiplier.is_finite()) {
            return Err(invalid("grid.box_multiplier", "must be > 0"));
        }
        if !(self.init.support > 0.0 && self.init.support.is_finite()) {
            return Err(invalid("init.support", "must be > 0"));
        }
        let t = self.time.final_time;
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("time.final", "time.final must be > 0"));
        }
        let h = self.snapshot_interval();
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("time.snapshot", "must be > 0"));
        }
        match self.time.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => return Err(invalid("time.dt.dt", "must be > 0")),
            DtPolicy::CflFraction { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                return Err(invalid("time.dt.fraction", "must lie in (0, 1]"))
            }
            _ => {}
        }
        for (i, b) in self.init.bumps.iter().enumerate() {
            if !(b.r > 0.0 && b.r.is_finite()) {
                return Err(invalid(&format!("init.bumps[{i}].r"), "must be > 0"));
            }
        }
        let grid = self.grid();
        for (i, b) in self.bumps().iter().enumerate() {
            let q = grid.box_len() / 4.0;
            if b.center.x1.abs() + b.radius >= q || b.center.x2.abs() + b.radius >= q {
                return Err(invalid(&format!("init.bumps[{i}]"), "bump leaves the central quarter of the box"));
            }
        }
        if self.init.class == SymmetryClass::Radial {
            let b = self.bumps();
            if b.len() != 1 || b[0].center != Point2::ORIGIN {
                return Err(invalid("init.bumps", "radial class needs one bump at the origin"));
            }
        }
        if let Some(p) = &self.probe {
            if p.mtheta < crate::farfield::MIN_ANGLES {
                return Err(invalid("probe.mtheta", format!("must be at least {}", crate::farfield::MIN_ANGLES)));
            }
            if p.components.is_empty() {
                return Err(invalid("probe.components", "must not be empty"));
            }
            for (i, r) in self.probe_radii().iter().enumerate() {
                if !(p.radii[i] > 0.0) {
                    return Err(invalid(&format!("probe.radii[{i}]"), "must be > 0"));
                }
                if *r > PROBE_WINDOW * grid.box_len() {
                    return Err(invalid(&format!("probe.radii[{i}]"), "radius window > 0.45·box"));
                }
            }
            for (i, &pt) in self.probe_times().iter().enumerate() {
                let k = (pt / h).round();
                if !((0.0..=t).contains(&pt)) || (pt - k * h).abs() > 1e-9 * h.max(pt) {
                    return Err(invalid(&format!("probe.times[{i}]"), "must be a snapshot time in [0, time.final]"));
                }
            }
        }
        Ok(())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
