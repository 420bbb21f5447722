//! Control Lyapunov functions for navigation and their relaxed constraint rows.
//!
//! Four CLFs steer the robot: a state-feedback distance CLF `V_d` and heading
//! CLF `V_theta` do the navigation, while `V_v` (speed tracking) and `V_omega`
//! (turn-rate damping) play auxiliary roles. Acceleration inputs do not appear
//! in the derivative of a plain squared-distance function, so `V_d` and
//! `V_theta` are built on state-feedback errors that mix a state with its own
//! rate, bringing the relative degree down to one.
//!
//! Each CLF emits the relaxed row
//! `L_f V + L_g V . u + gamma * V - delta <= 0`.

use serde::{Deserialize, Serialize};

use crate::affine::{AffineRow, RelaxSlot};
use crate::dynamics::{center_position, center_velocity, wrap_angle, Limits, RobotGeometry, RobotState};
use crate::Vec2;

/// Goal of a robot, stored as the body-center target plus desired heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    /// Body-center goal position.
    pub center: Vec2,
    /// Goal heading (rad). Not stabilized; only shifts the center target
    /// relative to a rear-axle goal pose.
    pub heading: f64,
}

impl GoalSpec {
    /// Build from a rear-axle goal pose: the center goal sits `l` ahead of the
    /// rear axle along the goal heading.
    pub fn from_rear_axle(rear: Vec2, heading: f64, axle_offset: f64) -> Self {
        let (s, c) = heading.sin_cos();
        Self {
            center: Vec2::new(rear.x + axle_offset * c, rear.y + axle_offset * s),
            heading,
        }
    }
}

/// Gains and class-K slopes of the CLF stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClfGains {
    /// Weights of the x/y error terms in `V_d` (>= 0).
    pub c1: f64,
    pub c2: f64,
    /// State-feedback rate gains in `V_d` (> 0).
    pub k1: f64,
    pub k2: f64,
    /// State-feedback rate gain in `V_theta` (> 0).
    pub k_theta: f64,
    /// Desired speed per meter of goal distance (1/s).
    pub v_d_gain: f64,
    /// Cap on the desired speed (m/s).
    pub v_d_cap: f64,
    /// Linear class-K slopes, one per CLF.
    pub gamma_d: f64,
    pub gamma_theta: f64,
    pub gamma_v: f64,
    pub gamma_omega: f64,
    /// Within this distance of the goal center the heading CLF row is dropped
    /// (the bearing is ill-conditioned there).
    pub goal_drop_radius: f64,
}

impl Default for ClfGains {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            k1: 1.0,
            k2: 1.0,
            k_theta: 1.0,
            v_d_gain: 0.5,
            v_d_cap: 4.0,
            gamma_d: 1.0,
            gamma_theta: 1.0,
            gamma_v: 1.0,
            gamma_omega: 1.0,
            goal_drop_radius: 0.2,
        }
    }
}

impl ClfGains {
    pub fn validate(&self) -> Result<(), String> {
        if self.c1 < 0.0 || self.c2 < 0.0 {
            return Err("c1, c2 must be >= 0".into());
        }
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k_theta", self.k_theta),
            ("v_d_gain", self.v_d_gain),
            ("gamma_d", self.gamma_d),
            ("gamma_theta", self.gamma_theta),
            ("gamma_v", self.gamma_v),
            ("gamma_omega", self.gamma_omega),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Value and Lie derivatives of one CLF: `dV/dt = lf + lg . u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieTerms {
    pub value: f64,
    pub lf: f64,
    pub lg: [f64; 2],
}

/// Desired speed law: proportional to goal distance, capped.
pub fn desired_speed(dist: f64, gains: &ClfGains, limits: &Limits) -> f64 {
    (gains.v_d_gain * dist).min(gains.v_d_cap).min(limits.v_max)
}

/// Center acceleration split: returns the drift part (u = 0) of the body
/// center's acceleration; the input enters as `a*[cos,sin] + alpha*l*[-sin,cos]`.
fn center_accel_drift(s: &RobotState, g: &RobotGeometry) -> Vec2 {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;
    Vec2::new(
        -s.v * s.omega * sin_t - l * s.omega * s.omega * cos_t,
        s.v * s.omega * cos_t - l * s.omega * s.omega * sin_t,
    )
}

/// Distance CLF `V_d` with its Lie derivatives.
///
/// `V_d = c1 (e_x + k1 xc_dot)^2 + c2 (e_y + k2 yc_dot)^2` where `e` is the
/// center-to-goal error. The rear-axle construction keeps the alpha column of
/// `L_g V_d` nonzero, so the controller can steer as well as accelerate.
pub fn vd_terms(s: &RobotState, g: &RobotGeometry, goal: &GoalSpec, gains: &ClfGains) -> LieTerms {
    let c = center_position(s, g);
    let cv = center_velocity(s, g);
    let w = center_accel_drift(s, g);
    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;

    let e1 = c.x - goal.center.x + gains.k1 * cv.x;
    let e2 = c.y - goal.center.y + gains.k2 * cv.y;
    let value = gains.c1 * e1 * e1 + gains.c2 * e2 * e2;

    let lf = 2.0 * gains.c1 * e1 * (cv.x + gains.k1 * w.x)
        + 2.0 * gains.c2 * e2 * (cv.y + gains.k2 * w.y);
    let lg_a = 2.0 * gains.c1 * e1 * gains.k1 * cos_t + 2.0 * gains.c2 * e2 * gains.k2 * sin_t;
    let lg_alpha =
        l * (-2.0 * gains.c1 * e1 * gains.k1 * sin_t + 2.0 * gains.c2 * e2 * gains.k2 * cos_t);
    LieTerms {
        value,
        lf,
        lg: [lg_a, lg_alpha],
    }
}

/// Rate of the wrapped heading-to-bearing error (`omega` minus the bearing
/// rate), or `None` near the goal center where the bearing degenerates.
pub fn bearing_error_rate(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
) -> Option<f64> {
    let c = center_position(s, g);
    let d = goal.center - c;
    let dist2 = d.norm_squared();
    if dist2.sqrt() < gains.goal_drop_radius {
        return None;
    }
    let cv = center_velocity(s, g);
    Some(s.omega - (d.y * cv.x - d.x * cv.y) / dist2)
}

/// Heading CLF `V_theta` with its Lie derivatives, or `None` when the center
/// is within `goal_drop_radius` of the goal (bearing ill-conditioned).
///
/// `V_theta = (dtheta + k_theta * q_theta)^2` with `dtheta` the wrapped
/// heading-to-bearing error and `q_theta` its analytic time derivative
/// (`omega` minus the bearing rate).
pub fn vtheta_terms(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
) -> Option<LieTerms> {
    let c = center_position(s, g);
    let d = goal.center - c;
    let dist2 = d.norm_squared();
    if dist2.sqrt() < gains.goal_drop_radius {
        return None;
    }
    let cv = center_velocity(s, g);
    let w = center_accel_drift(s, g);
    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;

    let bearing = d.y.atan2(d.x);
    let dtheta = wrap_angle(s.theta - bearing);

    // bearing rate and its derivative (quotient rule on atan2)
    let numer = d.y * cv.x - d.x * cv.y;
    let bearing_rate = numer / dist2;
    let q_theta = s.omega - bearing_rate;

    let e = dtheta + gains.k_theta * q_theta;
    let value = e * e;

    // d/dt numer = d_y * xc_ddot - d_x * yc_ddot (the cv terms cancel)
    let numer_dot_drift = d.y * w.x - d.x * w.y;
    let dist2_dot = -2.0 * d.dot(&cv);
    let bearing_acc_drift = numer_dot_drift / dist2 - numer * dist2_dot / (dist2 * dist2);
    // input columns of the bearing acceleration
    let bearing_acc_a = (d.y * cos_t - d.x * sin_t) / dist2;
    let bearing_acc_alpha = l * (-d.y * sin_t - d.x * cos_t) / dist2;

    // dV/dt = 2 e (q_theta + k_theta * (alpha - bearing_acc))
    let lf = 2.0 * e * (q_theta - gains.k_theta * bearing_acc_drift);
    let lg = [
        -2.0 * e * gains.k_theta * bearing_acc_a,
        2.0 * e * gains.k_theta * (1.0 - bearing_acc_alpha),
    ];
    Some(LieTerms { value, lf, lg })
}

/// Speed CLF `V_v = (v - v_d)^2`; the drift term carries the motion of the
/// desired-speed setpoint when it is unsaturated.
pub fn vv_terms(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
    limits: &Limits,
) -> LieTerms {
    let c = center_position(s, g);
    let d = goal.center - c;
    let dist = d.norm();
    let v_d = desired_speed(dist, gains, limits);
    let err = s.v - v_d;
    let value = err * err;

    let raw = gains.v_d_gain * dist;
    let v_d_rate = if raw < gains.v_d_cap.min(limits.v_max) && dist > 1e-9 {
        let cv = center_velocity(s, g);
        gains.v_d_gain * (-d.dot(&cv)) / dist
    } else {
        0.0
    };
    LieTerms {
        value,
        lf: -2.0 * err * v_d_rate,
        lg: [2.0 * err, 0.0],
    }
}

/// Turn-rate CLF `V_omega = omega^2`.
pub fn vomega_terms(s: &RobotState) -> LieTerms {
    LieTerms {
        value: s.omega * s.omega,
        lf: 0.0,
        lg: [0.0, 2.0 * s.omega],
    }
}

pub fn eval_vd(s: &RobotState, g: &RobotGeometry, goal: &GoalSpec, gains: &ClfGains) -> f64 {
    vd_terms(s, g, goal, gains).value
}

pub fn eval_vtheta(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
) -> Option<f64> {
    vtheta_terms(s, g, goal, gains).map(|t| t.value)
}

pub fn eval_vv(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
    limits: &Limits,
) -> f64 {
    vv_terms(s, g, goal, gains, limits).value
}

pub fn eval_vomega(s: &RobotState) -> f64 {
    vomega_terms(s).value
}

fn relaxed_row(terms: &LieTerms, gamma: f64, slot: RelaxSlot) -> AffineRow {
    AffineRow::relaxed(terms.lg, terms.lf + gamma * terms.value, slot)
}

/// Relaxed constraint rows of the four CLFs. The heading row is omitted near
/// the goal center; the other three are always present.
pub fn clf_rows(
    s: &RobotState,
    g: &RobotGeometry,
    goal: &GoalSpec,
    gains: &ClfGains,
    limits: &Limits,
) -> Vec<AffineRow> {
    let mut rows = Vec::with_capacity(4);
    rows.push(relaxed_row(&vd_terms(s, g, goal, gains), gains.gamma_d, RelaxSlot::Distance));
    if let Some(t) = vtheta_terms(s, g, goal, gains) {
        rows.push(relaxed_row(&t, gains.gamma_theta, RelaxSlot::Heading));
    }
    rows.push(relaxed_row(
        &vv_terms(s, g, goal, gains, limits),
        gains.gamma_v,
        RelaxSlot::Speed,
    ));
    rows.push(relaxed_row(&vomega_terms(s), gains.gamma_omega, RelaxSlot::TurnRate));
    rows
}
