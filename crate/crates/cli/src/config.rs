//! Run configuration: one TOML file with `vehicle`, `damper`, `controller`,
//! `road`, `sim`, `sweep` and `tune` sections. Every field has a default, so
//! an empty file is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semiactive_core::road::{self, RoadProfile};
use semiactive_core::sim::AccelFeedback;
use semiactive_core::tune::{GdParams, GridParams};
use semiactive_core::{
    Actuation, BoucWenParams, ControllerKind, ControllerSpec, Error, PdGains, PlantMode, SimConfig, VehicleParams,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub damper: BoucWenParams,
    pub controller: ControllerSection,
    pub road: RoadSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub tune: TuneSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkyhookTable {
    pub c_sky: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundhookTable {
    pub c_gr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkygroundhookTable {
    pub c_sky: f64,
    pub c_gr: f64,
    #[serde(default)]
    pub c_passive: f64,
}

/// Gains for every law; `kind` picks the one used by single runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub skyhook: SkyhookTable,
    pub groundhook: GroundhookTable,
    pub skygroundhook: SkygroundhookTable,
    pub pd_skygroundhook: PdGains,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::PdSkygroundhook,
            skyhook: SkyhookTable { c_sky: 17_000.0 },
            groundhook: GroundhookTable { c_gr: 4_000.0 },
            skygroundhook: SkygroundhookTable {
                c_sky: 25_500.0,
                c_gr: 1_150.0,
                c_passive: 0.0,
            },
            pd_skygroundhook: PdGains::PUBLISHED,
        }
    }
}

impl ControllerSection {
    pub fn spec(&self, kind: ControllerKind) -> ControllerSpec {
        match kind {
            ControllerKind::Passive => ControllerSpec::Passive,
            ControllerKind::Skyhook => ControllerSpec::Skyhook { c_sky: self.skyhook.c_sky },
            ControllerKind::Groundhook => ControllerSpec::Groundhook { c_gr: self.groundhook.c_gr },
            ControllerKind::Skygroundhook => ControllerSpec::Skygroundhook {
                c_sky: self.skygroundhook.c_sky,
                c_gr: self.skygroundhook.c_gr,
                c_passive: self.skygroundhook.c_passive,
            },
            ControllerKind::PdSkygroundhook => ControllerSpec::PdSkygroundhook(self.pd_skygroundhook),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadKind {
    Flat,
    #[default]
    Bump,
    SineSweep,
    Brownian,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpTable {
    pub h_b: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Default for BumpTable {
    fn default() -> Self {
        Self { h_b: 0.05, t1: 1.0, t2: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SineSweepTable {
    pub f0: f64,
    pub f1: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl Default for SineSweepTable {
    fn default() -> Self {
        Self {
            f0: 0.5,
            f1: 15.0,
            duration: 120.0,
            amplitude: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrownianTable {
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub scale: f64,
}

impl Default for BrownianTable {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_steps: 10_000,
            seed: 1,
            scale: road::BROWNIAN_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvTable {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadSection {
    pub kind: RoadKind,
    pub bump: BumpTable,
    pub sine_sweep: SineSweepTable,
    pub brownian: BrownianTable,
    pub csv: CsvTable,
}

impl RoadSection {
    pub fn profile(&self) -> Result<RoadProfile, Error> {
        match self.kind {
            RoadKind::Flat => Ok(RoadProfile::Flat),
            RoadKind::Bump => self.bump_profile(),
            RoadKind::SineSweep => {
                let s = &self.sine_sweep;
                RoadProfile::sine_sweep(s.f0, s.f1, s.duration, s.amplitude)
            }
            RoadKind::Brownian => {
                let b = &self.brownian;
                road::brownian_road(b.dt, b.n_steps, b.seed, b.scale)
            }
            RoadKind::Csv => {
                let path = self
                    .csv
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::invalid("road.csv.path", "required when road.kind = \"csv\""))?;
                road::load_road_csv(path)
            }
        }
    }

    pub fn bump_profile(&self) -> Result<RoadProfile, Error> {
        RoadProfile::bump(self.bump.h_b, self.bump.t1, self.bump.t2)
    }
}

/// Plant variant selected on the command line or in `sim.mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bouc-Wen damper driven by the inverse-model voltage.
    #[default]
    Explicit,
    /// Ideal force actuator.
    Implicit,
    /// Bouc-Wen plant replaced by a clamped viscous damper.
    Clamp,
}

impl Mode {
    pub fn plant(self) -> (PlantMode, Actuation) {
        match self {
            Mode::Explicit => (PlantMode::Explicit, Actuation::Inversion),
            Mode::Implicit => (PlantMode::Implicit, Actuation::Inversion),
            Mode::Clamp => (PlantMode::Explicit, Actuation::Clamp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    pub mode: Mode,
    pub accel_feedback: AccelFeedback,
    pub record_stride: usize,
    pub beta: f64,
    /// Samples before this time are left out of the metrics.
    pub skip: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 5.0,
            mode: Mode::Explicit,
            accel_feedback: AccelFeedback::ModelPredicted,
            record_stride: 1,
            beta: 1.0,
            skip: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub f_start: f64,
    pub f_stop: f64,
    pub f_step: f64,
    pub amplitude: f64,
    pub cycles_settle: u32,
    pub cycles_measure: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            f_start: 0.5,
            f_stop: 15.0,
            f_step: 0.25,
            amplitude: 0.01,
            cycles_settle: 20,
            cycles_measure: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub kind: ControllerKind,
    pub seeds: Vec<u64>,
    pub road_dt: f64,
    pub n_steps: usize,
    pub scale: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    /// Plant used while searching.
    pub mode: Mode,
    /// Starting gains; the `[controller]` table for `kind` when absent.
    pub theta0: Option<Vec<f64>>,
    /// Reference gains scored alongside the result.
    pub published: Option<Vec<f64>>,
    pub gd: GdParams,
    pub grid: GridParams,
    pub validate_explicit: bool,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::PdSkygroundhook,
            seeds: (1..=12).collect(),
            road_dt: 1e-3,
            n_steps: 10_000,
            scale: road::BROWNIAN_SCALE,
            lambda_s: 1.0,
            lambda_u: 1.0,
            mode: Mode::Implicit,
            theta0: None,
            published: Some(PdGains::PUBLISHED.to_array().to_vec()),
            gd: GdParams::pd_default(),
            grid: GridParams::default(),
            validate_explicit: true,
        }
    }
}

/// Failure to produce a usable config.
#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, msg: String },
    Invalid(Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read { path, source } => write!(f, "cannot read config {}: {source}", path.display()),
            ConfigError::Parse { path, msg } => write!(f, "{}: {msg}", path.display()),
            ConfigError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError::Invalid(e)
    }
}

impl Config {
    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    /// Relative CSV road paths are resolved against the file's directory and
    /// stored absolute, so an echoed config replays from anywhere.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let parse_err = |msg: String| ConfigError::Parse { path: path.to_owned(), msg };
        let mut cfg: Config = if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        if let Some(p) = cfg.road.csv.path.as_mut() {
            if p.is_relative() {
                let joined = path.parent().unwrap_or(Path::new("")).join(&*p);
                *p = std::path::absolute(&joined).unwrap_or(joined);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.vehicle.validate()?;
        self.damper.validate()?;
        for kind in ControllerKind::ALL {
            self.controller.spec(kind).validate()?;
        }
        let s = &self.sweep;
        if !(s.f_start > 0.0) || !(s.f_stop >= s.f_start) || !(s.f_step > 0.0) {
            return Err(Error::invalid("sweep.f_step", "need 0 < f_start <= f_stop and f_step > 0"));
        }
        if !s.amplitude.is_finite() {
            return Err(Error::invalid("sweep.amplitude", "must be finite"));
        }
        if !(self.sim.skip >= 0.0) {
            return Err(Error::invalid("sim.skip", "must be >= 0"));
        }
        self.sim_config(self.controller.kind, RoadProfile::Flat).validate()
    }

    /// Simulation settings for one law on one road.
    pub fn sim_config(&self, kind: ControllerKind, road: RoadProfile) -> SimConfig {
        let (plant_mode, actuation) = self.sim.mode.plant();
        SimConfig {
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            plant_mode,
            actuation,
            controller: self.controller.spec(kind),
            vehicle: self.vehicle,
            damper: self.damper,
            road,
            record_stride: self.sim.record_stride,
            beta: self.sim.beta,
            initial: Default::default(),
            accel_feedback: self.sim.accel_feedback,
        }
    }
}
