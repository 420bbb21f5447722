//! Scenario files: TOML with field names mirroring the in-memory types.
//! An empty `[params]` block reproduces the standard parameter setup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cbf::CbfParams;
use crate::clf::{ClfGains, GoalSpec};
use crate::controller::{ControllerParams, Method};
use crate::dynamics::{Limits, ObstacleState, RobotGeometry, RobotState};
use crate::solver::{QpWeights, SUBQP_PAIR_CAP};
use crate::{Mat2, Vec2};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Diagonal cost weights as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightsConfig {
    pub h: [f64; 2],
    pub r: [f64; 2],
    pub p: [f64; 4],
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            h: [1.0, 1.0],
            r: [0.5, 0.5],
            p: [100.0, 100.0, 1.0, 1.0],
        }
    }
}

impl WeightsConfig {
    pub fn to_weights(self) -> QpWeights {
        QpWeights {
            h: Mat2::from_diagonal(&Vec2::new(self.h[0], self.h[1])),
            r: Mat2::from_diagonal(&Vec2::new(self.r[0], self.r[1])),
            p: self.p,
        }
    }
}

/// Simulation and controller parameters with standard defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub dt: f64,
    pub t_max: f64,
    /// Safety margin added to the robot radius when building cones.
    pub d_s: f64,
    pub sensing_radius: f64,
    pub seed: u64,
    /// Completion: center-to-goal distance below this.
    pub goal_tolerance: f64,
    /// Deadlock: center speed below `deadlock_speed` for
    /// `deadlock_duration` seconds without completing.
    pub deadlock_speed: f64,
    pub deadlock_duration: f64,
    /// Nearest-entity cap for the disjunctive pipelines.
    pub entity_cap: usize,
    /// Fallback applied on infeasible steps.
    pub recovery: crate::controller::RecoveryPolicy,
    pub gains: ClfGains,
    pub cbf: CbfParams,
    pub limits: Limits,
    pub weights: WeightsConfig,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: crate::dynamics::DEFAULT_DT,
            t_max: 40.0,
            d_s: 0.15,
            sensing_radius: 8.0,
            seed: 0,
            goal_tolerance: 0.25,
            deadlock_speed: 0.05,
            deadlock_duration: 3.0,
            entity_cap: SUBQP_PAIR_CAP,
            recovery: crate::controller::RecoveryPolicy::LeastViolation,
            gains: ClfGains::default(),
            cbf: CbfParams::default(),
            limits: Limits::default(),
            weights: WeightsConfig::default(),
        }
    }
}

impl SimParams {
    pub fn controller_params(&self, limits: Limits) -> ControllerParams {
        ControllerParams {
            gains: self.gains,
            cbf: self.cbf,
            weights: self.weights.to_weights(),
            limits,
            dt: self.dt,
            sensing_radius: self.sensing_radius,
            entity_cap: self.entity_cap,
            big_m: None,
            recovery: self.recovery,
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if !(self.dt > 0.0) {
            return Err(invalid(format!("{path}.dt"), "must be > 0"));
        }
        if !(self.t_max > self.dt) {
            return Err(invalid(format!("{path}.t_max"), "must be > dt"));
        }
        if self.d_s < 0.0 {
            return Err(invalid(format!("{path}.d_s"), "must be >= 0"));
        }
        if !(self.goal_tolerance > 0.0) {
            return Err(invalid(format!("{path}.goal_tolerance"), "must be > 0"));
        }
        self.gains
            .validate()
            .map_err(|m| invalid(format!("{path}.gains"), m))?;
        self.cbf
            .validate()
            .map_err(|m| invalid(format!("{path}.cbf"), m))?;
        self.limits
            .validate()
            .map_err(|m| invalid(format!("{path}.limits"), m))?;
        let w = self.weights.to_weights();
        w.validate()
            .map_err(|e| invalid(format!("{path}.weights"), e.to_string()))?;
        Ok(())
    }
}

/// One robot: start pose, goal pose (both rear-axle), body geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// `[x, y, theta]` of the rear axle.
    pub start: [f64; 3],
    /// `[x, y, theta]` goal pose of the rear axle.
    pub goal: [f64; 3],
    #[serde(default = "default_robot_radius")]
    pub radius: f64,
    /// Rear-axle-to-center distance.
    #[serde(default = "default_axle_offset")]
    pub l: f64,
    #[serde(default)]
    pub limits: Option<Limits>,
}

fn default_robot_radius() -> f64 {
    0.3
}
fn default_axle_offset() -> f64 {
    0.15
}

impl RobotConfig {
    pub fn initial_state(&self) -> RobotState {
        RobotState::new(self.start[0], self.start[1], self.start[2], 0.0, 0.0)
    }

    pub fn geometry(&self, d_s: f64) -> RobotGeometry {
        RobotGeometry::new(self.radius, self.l, d_s)
    }

    pub fn goal_spec(&self) -> GoalSpec {
        GoalSpec::from_rear_axle(Vec2::new(self.goal[0], self.goal[1]), self.goal[2], self.l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleConfig {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub acceleration: [f64; 2],
    pub radius: f64,
}

impl ObstacleConfig {
    pub fn state(&self) -> ObstacleState {
        ObstacleState {
            position: Vec2::new(self.position[0], self.position[1]),
            velocity: Vec2::new(self.velocity[0], self.velocity[1]),
            acceleration: Vec2::new(self.acceleration[0], self.acceleration[1]),
            radius: self.radius,
        }
    }
}

/// A whole experiment: robots, obstacles, parameters, method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleConfig>,
    #[serde(default)]
    pub params: SimParams,
}

fn default_method() -> Method {
    Method::SubQps
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ScenarioConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.robots.is_empty() {
            return Err(invalid("robots", "at least one robot is required"));
        }
        self.params.validate("params")?;
        for (i, r) in self.robots.iter().enumerate() {
            if !(r.radius > 0.0) {
                return Err(invalid(format!("robots[{i}].radius"), "must be > 0"));
            }
            if r.l < 0.0 || r.l >= r.radius {
                return Err(invalid(
                    format!("robots[{i}].l"),
                    format!("must satisfy 0 <= l < radius (got l={}, radius={})", r.l, r.radius),
                ));
            }
            if let Some(lim) = &r.limits {
                lim.validate()
                    .map_err(|m| invalid(format!("robots[{i}].limits"), m))?;
            }
            let vals = r.start.iter().chain(r.goal.iter());
            if vals.clone().any(|v| !v.is_finite()) {
                return Err(invalid(format!("robots[{i}]"), "start/goal must be finite"));
            }
        }
        for (j, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(invalid(format!("obstacles[{j}].radius"), "must be > 0"));
            }
        }
        // initial physical overlaps are configuration errors
        for (i, r) in self.robots.iter().enumerate() {
            let gi = r.geometry(self.params.d_s);
            let ci = crate::dynamics::center_position(&r.initial_state(), &gi);
            for (j, o) in self.obstacles.iter().enumerate() {
                let d = (o.state().position - ci).norm();
                if d <= r.radius + o.radius {
                    return Err(invalid(
                        format!("obstacles[{j}]"),
                        format!("initial overlap with robots[{i}] (distance {d:.3})"),
                    ));
                }
            }
            for (k, other) in self.robots.iter().enumerate().skip(i + 1) {
                let gk = other.geometry(self.params.d_s);
                let ck = crate::dynamics::center_position(&other.initial_state(), &gk);
                let d = (ck - ci).norm();
                if d <= r.radius + other.radius {
                    return Err(invalid(
                        format!("robots[{k}]"),
                        format!("initial overlap with robots[{i}] (distance {d:.3})"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_params_gives_standard_setup() {
        let text = r#"
            [[robots]]
            start = [0.0, 4.0, 0.46]
            goal = [12.0, 10.0, 0.46]

            [[obstacles]]
            position = [6.0, 7.0]
            radius = 0.5
        "#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.params.dt, 0.05);
        assert_eq!(cfg.params.limits.v_max, 4.0);
        assert_eq!(cfg.params.limits.omega_max, 0.5);
        assert_eq!(cfg.params.limits.a_max, 1.0);
        assert_eq!(cfg.params.limits.alpha_max, 0.6);
        assert_eq!(cfg.params.limits.delta_a_max, 6.0);
        assert_eq!(cfg.params.limits.delta_alpha_max, 3.0);
        assert_eq!(cfg.params.d_s, 0.15);
        assert_eq!(cfg.robots[0].radius, 0.3);
        assert_eq!(cfg.robots[0].l, 0.15);
        assert_eq!(cfg.method, Method::SubQps);
    }

    #[test]
    fn validation_reports_field_paths() {
        let text = r#"
            [[robots]]
            start = [0.0, 0.0, 0.0]
            goal = [1.0, 0.0, 0.0]
            radius = -1.0
        "#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("robots[0].radius"), "{err}");
    }

    #[test]
    fn initial_overlap_rejected() {
        let text = r#"
            [[robots]]
            start = [0.0, 0.0, 0.0]
            goal = [10.0, 0.0, 0.0]

            [[obstacles]]
            position = [0.3, 0.0]
            radius = 0.5
        "#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        assert!(cfg.validate().is_err());
    }
}
