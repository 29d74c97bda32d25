//! Scenario configuration: a TOML tree with units encoded in the key names.
//!
//! Unknown keys are rejected so typos fail loudly instead of silently running
//! defaults. The file is versioned through `schema_version`; this build reads
//! version 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::plant::DelayedSecondOrder;
use crate::safety::{BarrierField, Obstacle, TurnDirection};
use crate::vfo::Trajectory;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub sim: SimConfig,
    pub robot: RobotConfig,
    pub plant: PlantConfig,
    /// Model used by the predictors; defaults to the plant (perfect model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<PlantConfig>,
    pub servo_pi: PiConfig,
    pub angle_pi: PiConfig,
    pub vfo: VfoConfig,
    pub initial_pose: PoseConfig,
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<SafetyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub wheel_separation_m: f64,
    pub u_max_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub num1: f64,
    pub num0: f64,
    pub den1: f64,
    pub den0: f64,
    pub tau_s: f64,
}

impl From<PlantConfig> for DelayedSecondOrder {
    fn from(p: PlantConfig) -> Self {
        DelayedSecondOrder { num1: p.num1, num0: p.num0, den1: p.den1, den0: p.den0, tau_s: p.tau_s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiConfig {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfoConfig {
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Circle { radius_m: f64, omega_rad_per_s: f64 },
    Figure8 { ax_m: f64, ay_m: f64, omega_rad_per_s: f64 },
}

impl From<TrajectoryConfig> for Trajectory {
    fn from(t: TrajectoryConfig) -> Self {
        match t {
            TrajectoryConfig::Circle { radius_m, omega_rad_per_s } => {
                Trajectory::Circle { radius_m, omega_radps: omega_rad_per_s }
            }
            TrajectoryConfig::Figure8 { ax_m, ay_m, omega_rad_per_s } => {
                Trajectory::Figure8 { ax_m, ay_m, omega_radps: omega_rad_per_s }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    pub servo: bool,
    pub angle: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { servo: true, angle: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub b0: f64,
    pub turn: TurnConfig,
    pub hpf_time_constant_s: f64,
    pub obstacles: Vec<ObstacleConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnConfig {
    Left,
    Right,
}

impl From<TurnConfig> for TurnDirection {
    fn from(t: TurnConfig) -> Self {
        match t {
            TurnConfig::Left => TurnDirection::Left,
            TurnConfig::Right => TurnDirection::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleConfig {
    Circular { x_m: f64, y_m: f64, sigma_m2: f64 },
    Superellipse { x_m: f64, y_m: f64, sigma_x_m: f64, sigma_y_m: f64, n: u32 },
}

impl From<ObstacleConfig> for Obstacle {
    fn from(o: ObstacleConfig) -> Self {
        match o {
            ObstacleConfig::Circular { x_m, y_m, sigma_m2 } => Obstacle::Circular { x_m, y_m, sigma_m2 },
            ObstacleConfig::Superellipse { x_m, y_m, sigma_x_m, sigma_y_m, n } => {
                Obstacle::Superellipse { x_m, y_m, sigma_x_m, sigma_y_m, n }
            }
        }
    }
}

impl SafetyConfig {
    pub fn barrier_field(&self) -> BarrierField {
        BarrierField {
            b0: self.b0,
            alpha: self.alpha,
            obstacles: self.obstacles.iter().map(|&o| o.into()).collect(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            source: Box::new(e),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Model seen by the predictors: explicit `[nominal]` or the plant itself.
    pub fn nominal_model(&self) -> DelayedSecondOrder {
        self.nominal.unwrap_or(self.plant).into()
    }

    pub fn trajectory(&self) -> Trajectory {
        self.trajectory.into()
    }

    /// Structural checks beyond what the parser enforces. Does not build any
    /// simulation state.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        if !(self.sim.dt_s.is_finite() && self.sim.dt_s > 0.0) {
            return Err(ConfigError::invalid("sim.dt_s", "step size must be positive"));
        }
        if !(self.sim.duration_s.is_finite() && self.sim.duration_s >= 0.0) {
            return Err(ConfigError::invalid("sim.duration_s", "duration must be non-negative"));
        }
        if !(self.robot.wheel_separation_m.is_finite() && self.robot.wheel_separation_m > 0.0) {
            return Err(ConfigError::invalid("robot.wheel_separation_m", "wheel separation must be positive"));
        }
        if !(self.robot.u_max_v.is_finite() && self.robot.u_max_v > 0.0) {
            return Err(ConfigError::invalid("robot.u_max_v", "voltage limit must be positive"));
        }
        let plant: DelayedSecondOrder = self.plant.into();
        plant.validate()?;
        // The dead time must be representable at this step size; checked here
        // so `validate` catches it before a run is attempted.
        crate::plant::DiscretePlant::new(&plant, self.sim.dt_s)?;
        let nominal = self.nominal_model();
        nominal.validate()?;
        crate::plant::DiscretePlant::new(&nominal, self.sim.dt_s)?;
        for (name, pi) in [("servo_pi", &self.servo_pi), ("angle_pi", &self.angle_pi)] {
            if !(pi.kp.is_finite() && pi.ki.is_finite()) || pi.kp < 0.0 || pi.ki < 0.0 {
                return Err(ConfigError::invalid(
                    match name {
                        "servo_pi" => "servo_pi",
                        _ => "angle_pi",
                    },
                    "gains must be finite and non-negative",
                ));
            }
        }
        if !(self.vfo.gain.is_finite() && self.vfo.gain > 0.0) {
            return Err(ConfigError::invalid("vfo.gain", "convergence gain must be positive"));
        }
        if !self.initial_pose.x_m.is_finite()
            || !self.initial_pose.y_m.is_finite()
            || !self.initial_pose.theta_rad.is_finite()
        {
            return Err(ConfigError::invalid("initial_pose", "pose must be finite"));
        }
        self.trajectory().validate()?;
        if let Some(s) = &self.safety {
            if !(s.hpf_time_constant_s.is_finite() && s.hpf_time_constant_s > 0.0) {
                return Err(ConfigError::invalid("safety.hpf_time_constant_s", "time constant must be positive"));
            }
            s.barrier_field().validate()?;
        }
        Ok(())
    }
}
