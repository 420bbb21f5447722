//! Kinematic models, frame transforms and fixed-step integration.
//!
//! The robot is an acceleration-controlled unicycle tracked at its rear axle:
//!
//! ```text
//! d/dt [x, y, theta, v, omega] = [v cos(theta), v sin(theta), omega, a, alpha]
//! ```
//!
//! Obstacles follow double-integrator dynamics. All functions here are pure;
//! integration is explicit Euler at the simulation step.

use serde::{Deserialize, Serialize};

use crate::Vec2;

/// Default simulation step in seconds.
pub const DEFAULT_DT: f64 = 0.05;

/// Errors from the kinematic layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
}

/// Wrap an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = theta.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Rotate a vector counterclockwise by `angle` radians.
pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Rear-axle pose plus body velocities of a unicycle robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Rear-axle x position (m).
    pub x: f64,
    /// Rear-axle y position (m).
    pub y: f64,
    /// Heading (rad), wrapped to `(-pi, pi]`.
    pub theta: f64,
    /// Linear velocity (m/s).
    pub v: f64,
    /// Angular velocity (rad/s).
    pub omega: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v,
            omega,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.theta.is_finite()
            && self.v.is_finite()
            && self.omega.is_finite()
    }

    /// Rear-axle position.
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Linear and angular acceleration commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear acceleration (m/s^2).
    pub a: f64,
    /// Angular acceleration (rad/s^2).
    pub alpha: f64,
}

impl ControlInput {
    pub const ZERO: Self = Self { a: 0.0, alpha: 0.0 };

    pub fn new(a: f64, alpha: f64) -> Self {
        Self { a, alpha }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.alpha.is_finite()
    }
}

/// Circular obstacle with double-integrator dynamics.
///
/// Acceleration is zero for the constant-velocity obstacles used in the
/// standard scenarios, but the field is carried so the obstacle drift term of
/// time-varying barriers generalizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
    /// Radius (m), must be positive.
    pub radius: f64,
}

impl ObstacleState {
    pub fn at_rest(position: Vec2, radius: f64) -> Self {
        Self {
            position,
            velocity: Vec2::zeros(),
            acceleration: Vec2::zeros(),
            radius,
        }
    }

    pub fn moving(position: Vec2, velocity: Vec2, radius: f64) -> Self {
        Self {
            position,
            velocity,
            acceleration: Vec2::zeros(),
            radius,
        }
    }
}

/// Fixed body geometry of a robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    /// Body radius (m).
    pub radius: f64,
    /// Distance from the rear axle to the body center (m); less than `radius`.
    pub axle_offset: f64,
    /// Safety margin added to the body radius when building avoidance cones (m).
    pub safe_margin: f64,
}

impl RobotGeometry {
    pub fn new(radius: f64, axle_offset: f64, safe_margin: f64) -> Self {
        Self {
            radius,
            axle_offset,
            safe_margin,
        }
    }

    /// Inflated radius used for cone construction: body radius plus margin.
    pub fn inflated_radius(&self) -> f64 {
        self.radius + self.safe_margin
    }
}

impl Default for RobotGeometry {
    fn default() -> Self {
        // r = 0.3 m, l = 0.15 m, d_s = 0.15 m
        Self::new(0.3, 0.15, 0.15)
    }
}

/// State and input limits of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    /// Angular velocity bound; omega is limited to `[-omega_max, omega_max]`.
    pub omega_max: f64,
    pub a_max: f64,
    pub alpha_max: f64,
    /// Maximum change rate of linear acceleration (m/s^3).
    pub delta_a_max: f64,
    /// Maximum change rate of angular acceleration (rad/s^3).
    pub delta_alpha_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 4.0,
            omega_max: 0.5,
            a_max: 1.0,
            alpha_max: 0.6,
            delta_a_max: 6.0,
            delta_alpha_max: 3.0,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_min < self.v_max) {
            return Err(format!("v_min ({}) must be < v_max ({})", self.v_min, self.v_max));
        }
        for (name, v) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("a_max", self.a_max),
            ("alpha_max", self.alpha_max),
            ("delta_a_max", self.delta_a_max),
            ("delta_alpha_max", self.delta_alpha_max),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Body-center position: the rear axle shifted by `l` along the heading.
pub fn center_position(s: &RobotState, g: &RobotGeometry) -> Vec2 {
    let (sin_t, cos_t) = s.theta.sin_cos();
    Vec2::new(s.x + g.axle_offset * cos_t, s.y + g.axle_offset * sin_t)
}

/// Time derivative of the body-center position.
pub fn center_velocity(s: &RobotState, g: &RobotGeometry) -> Vec2 {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;
    Vec2::new(
        s.v * cos_t - l * sin_t * s.omega,
        s.v * sin_t + l * cos_t * s.omega,
    )
}

/// Express a world point in the robot's local frame (origin at the body
/// center, x-axis along the heading).
pub fn to_local_frame(s: &RobotState, g: &RobotGeometry, world_point: Vec2) -> Vec2 {
    rotate(world_point - center_position(s, g), -s.theta)
}

/// Express a world-frame free vector (velocity, direction) in the robot frame.
pub fn to_local_vector(s: &RobotState, world_vec: Vec2) -> Vec2 {
    rotate(world_vec, -s.theta)
}

/// One explicit Euler step of the unicycle model; derivatives evaluated at `s`.
pub fn step_robot(s: &RobotState, u: &ControlInput, dt: f64) -> Result<RobotState, DynamicsError> {
    if !s.is_finite() {
        return Err(DynamicsError::NonFinite("robot state"));
    }
    if !u.is_finite() {
        return Err(DynamicsError::NonFinite("control input"));
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::NonPositiveDt(dt));
    }
    let (sin_t, cos_t) = s.theta.sin_cos();
    Ok(RobotState {
        x: s.x + dt * s.v * cos_t,
        y: s.y + dt * s.v * sin_t,
        theta: wrap_angle(s.theta + dt * s.omega),
        v: s.v + dt * u.a,
        omega: s.omega + dt * u.alpha,
    })
}

/// One explicit Euler step of the obstacle's double integrator.
pub fn step_obstacle(o: &ObstacleState, dt: f64) -> ObstacleState {
    ObstacleState {
        position: o.position + dt * o.velocity,
        velocity: o.velocity + dt * o.acceleration,
        acceleration: o.acceleration,
        radius: o.radius,
    }
}
