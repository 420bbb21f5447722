//! Control barrier functions: velocity-obstacle cones, the VOCBF pair per
//! obstacle, the distance-based high-order baseline, and state-limit CBFs.
//!
//! For a robot/obstacle pair with relative center position `p` and relative
//! center velocity `v`, the collision cone has half-angle
//! `alpha = asin(r_sum / |p|)`. Its tangent directions come from rotating `p`
//! by `+/-alpha`, and rotating those tangents by `-/+ pi/2` gives the two
//! outer normals `N1, N2`. The barrier pair is simply
//!
//! ```text
//! h1 = v . N1 = v . R(alpha - pi/2) p,    h2 = v . N2 = v . R(pi/2 - alpha) p,
//! ```
//!
//! and the relative velocity stays outside the open collision cone iff
//! `h1 >= 0` or `h2 >= 0`. Both have relative degree one in the acceleration
//! inputs, so no high-order construction is needed. Time derivatives carry an
//! obstacle drift term (position and velocity of the obstacle move the cone),
//! which vanishes exactly for static obstacles.

use serde::{Deserialize, Serialize};

use crate::affine::AffineRow;
use crate::dynamics::{
    center_position, center_velocity, rotate, Limits, ObstacleState, RobotGeometry, RobotState,
};
use crate::Vec2;

/// Half-angle clamp: `sin(alpha)` is kept strictly below one so the cone
/// stays differentiable at the tangency boundary.
const SIN_ALPHA_MAX: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CbfError {
    /// Centers closer than the inflated radius sum: the cone is undefined and
    /// the caller records the step as a collision event.
    #[error("bodies overlap: center distance {distance:.4} <= inflated radius sum {r_sum:.4}")]
    Overlap { distance: f64, r_sum: f64 },
}

/// Which side of the obstacle a constraint lets the robot pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// First cone normal (`k = 1`).
    Left,
    /// Second cone normal (`k = 2`).
    Right,
}

/// Class-K slopes for the barrier constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbfParams {
    /// Linear slope for VOCBF and state-limit rows.
    pub mu: f64,
    /// First-level slope of the high-order distance chain.
    pub mu1: f64,
    /// Second-level slope of the high-order distance chain.
    pub mu2: f64,
}

impl Default for CbfParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            mu1: 0.75,
            mu2: 0.65,
        }
    }
}

impl CbfParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("mu", self.mu), ("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Velocity-obstacle cone of one robot/obstacle pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeGeometry {
    /// Relative center position (robot minus obstacle).
    pub p_rel: Vec2,
    /// Relative center velocity.
    pub v_rel: Vec2,
    /// Inflated radius sum: robot radius + safe margin + obstacle radius.
    pub r_sum: f64,
    /// Cone half-angle in `(0, pi/2)`.
    pub half_angle: f64,
    /// Tangent directions of the cone.
    pub t1: Vec2,
    pub t2: Vec2,
    /// Outer normals of the two half-spaces (`|n_k| = |p_rel|`).
    pub n1: Vec2,
    pub n2: Vec2,
}

/// Build the collision-cone geometry. Errors when the centers are within the
/// inflated radius sum.
pub fn vo_cone(p_rel: Vec2, v_rel: Vec2, r_sum: f64) -> Result<ConeGeometry, CbfError> {
    let dist = p_rel.norm();
    if dist <= r_sum {
        return Err(CbfError::Overlap { distance: dist, r_sum });
    }
    let sin_a = (r_sum / dist).min(SIN_ALPHA_MAX);
    let half_angle = sin_a.asin();
    let t1 = rotate(p_rel, half_angle);
    let t2 = rotate(p_rel, -half_angle);
    let n1 = rotate(t1, -std::f64::consts::FRAC_PI_2);
    let n2 = rotate(t2, std::f64::consts::FRAC_PI_2);
    Ok(ConeGeometry {
        p_rel,
        v_rel,
        r_sum,
        half_angle,
        t1,
        t2,
        n1,
        n2,
    })
}

/// The two barrier values `(h1, h2) = (v_rel . n1, v_rel . n2)`.
///
/// `h1 >= 0 || h2 >= 0` iff the relative velocity lies outside the open
/// collision cone.
pub fn vocbf_values(cone: &ConeGeometry) -> (f64, f64) {
    (cone.v_rel.dot(&cone.n1), cone.v_rel.dot(&cone.n2))
}

/// Barrier value with its exact derivative decomposition:
/// `dh/dt = lf + lg . u + drift`, where `drift` collects the obstacle's own
/// motion and is exactly zero for static obstacles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierTerms {
    pub h: f64,
    pub lf: f64,
    pub lg: [f64; 2],
    pub drift: f64,
}

fn obstacle_view_terms(
    s: &RobotState,
    g: &RobotGeometry,
    o: &ObstacleState,
    side: Side,
) -> Result<BarrierTerms, CbfError> {
    let p = center_position(s, g) - o.position;
    let v = center_velocity(s, g) - o.velocity;
    let r_sum = g.inflated_radius() + o.radius;
    let dist = p.norm();
    if dist <= r_sum {
        return Err(CbfError::Overlap { distance: dist, r_sum });
    }

    let sin_a = (r_sum / dist).min(SIN_ALPHA_MAX);
    let cos_a = (1.0 - sin_a * sin_a).sqrt();
    let alpha = sin_a.asin();

    // rotation to the chosen normal and its derivative in the half-angle
    let (rot_angle, rot_deriv_angle, deriv_sign) = match side {
        Side::Left => (alpha - std::f64::consts::FRAC_PI_2, alpha, 1.0),
        Side::Right => (
            std::f64::consts::FRAC_PI_2 - alpha,
            std::f64::consts::PI - alpha,
            -1.0,
        ),
    };
    let n = rotate(p, rot_angle);
    let h = v.dot(&n);

    // gradient pieces: h = v . R(p), R depends on p through alpha
    let dn_dalpha = deriv_sign * rotate(p, rot_deriv_angle);
    let dalpha_drho = -r_sum / (dist * dist * cos_a);
    // d h / d p = R^T v + (v . dR/dalpha p) * dalpha/dp
    let rt_v = rotate(v, -rot_angle);
    let grad_p = rt_v + v.dot(&dn_dalpha) * dalpha_drho / dist * p;
    let grad_v = n;

    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;
    let e_v = Vec2::new(cos_t, sin_t);
    let e_w = Vec2::new(-l * sin_t, l * cos_t);
    // robot-state partials: dp/dtheta = e_w, dv/dtheta as below
    let dv_dtheta = Vec2::new(
        -s.v * sin_t - l * s.omega * cos_t,
        s.v * cos_t - l * s.omega * sin_t,
    );

    let lf = grad_p.x * s.v * cos_t
        + grad_p.y * s.v * sin_t
        + (grad_p.dot(&e_w) + grad_v.dot(&dv_dtheta)) * s.omega;
    let lg = [grad_v.dot(&e_v), grad_v.dot(&e_w)];
    let drift = -grad_p.dot(&o.velocity) - grad_v.dot(&o.acceleration);

    Ok(BarrierTerms { h, lf, lg, drift })
}

/// Lie-derivative terms of one VOCBF of the pair.
pub fn vocbf_terms(
    s: &RobotState,
    g: &RobotGeometry,
    o: &ObstacleState,
    side: Side,
) -> Result<BarrierTerms, CbfError> {
    obstacle_view_terms(s, g, o, side)
}

fn barrier_row(t: &BarrierTerms, mu: f64) -> AffineRow {
    AffineRow::barrier(t.lg, t.lf + t.drift + mu * t.h)
}

/// The VOCBF constraint pair for one obstacle:
/// `L_f h_k + L_g h_k . u + drift_k + mu h_k >= 0`, `k in {1, 2}`, plus the
/// current barrier values.
pub fn vocbf_rows(
    s: &RobotState,
    g: &RobotGeometry,
    o: &ObstacleState,
    params: &CbfParams,
) -> Result<([AffineRow; 2], (f64, f64)), CbfError> {
    let left = vocbf_terms(s, g, o, Side::Left)?;
    let right = vocbf_terms(s, g, o, Side::Right)?;
    Ok((
        [barrier_row(&left, params.mu), barrier_row(&right, params.mu)],
        (left.h, right.h),
    ))
}

/// Reciprocal variant for robot/robot pairs.
///
/// With the cone apex at the velocity average, the barrier values are exactly
/// half the velocity-obstacle ones (`h_rvo = v . n - n . (v_i + v_j)/2 =
/// 0.5 v_rel . n`), so the rows are positive scalings of the VO rows and cut
/// out the same control half-spaces.
pub fn rvo_rows(
    s_i: &RobotState,
    g_i: &RobotGeometry,
    s_j: &RobotState,
    g_j: &RobotGeometry,
    params: &CbfParams,
) -> Result<([AffineRow; 2], (f64, f64)), CbfError> {
    let view = ObstacleState {
        position: center_position(s_j, g_j),
        velocity: center_velocity(s_j, g_j),
        acceleration: Vec2::zeros(),
        radius: g_j.radius,
    };
    let (rows, (h1, h2)) = vocbf_rows(s_i, g_i, &view, params)?;
    Ok((
        [rows[0].scaled(0.5), rows[1].scaled(0.5)],
        (0.5 * h1, 0.5 * h2),
    ))
}

/// Distance-based high-order barrier (comparison baseline).
///
/// `h = |p|^2 - r_sum^2` has relative degree two, so the chained constraint
/// `psi1 = dh/dt + mu1 h`, `dpsi1/dt + mu2 psi1 >= 0` is enforced instead.
/// Returns the row plus `(h, psi1)`.
pub fn hocbf_rows(
    s: &RobotState,
    g: &RobotGeometry,
    o: &ObstacleState,
    params: &CbfParams,
) -> (AffineRow, f64, f64) {
    let p = center_position(s, g) - o.position;
    let v = center_velocity(s, g) - o.velocity;
    let r_sum = g.inflated_radius() + o.radius;

    let h = p.norm_squared() - r_sum * r_sum;
    let h_dot = 2.0 * p.dot(&v);
    let psi1 = h_dot + params.mu1 * h;

    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = g.axle_offset;
    let e_v = Vec2::new(cos_t, sin_t);
    let e_w = Vec2::new(-l * sin_t, l * cos_t);
    // drift part of the center acceleration (u = 0)
    let w = Vec2::new(
        -s.v * s.omega * sin_t - l * s.omega * s.omega * cos_t,
        s.v * s.omega * cos_t - l * s.omega * s.omega * sin_t,
    );

    let lg = [2.0 * p.dot(&e_v), 2.0 * p.dot(&e_w)];
    let constant = 2.0 * v.norm_squared() + 2.0 * p.dot(&(w - o.acceleration))
        + params.mu1 * h_dot
        + params.mu2 * psi1;
    (AffineRow::barrier(lg, constant), h, psi1)
}

/// Barrier rows keeping `v` and `omega` inside their boxes:
/// `[v - v_min, v_max - v, omega + omega_max, omega_max - omega]`, each with
/// `dh/dt + mu h >= 0`.
pub fn state_limit_rows(s: &RobotState, limits: &Limits, params: &CbfParams) -> [AffineRow; 4] {
    let mu = params.mu;
    [
        AffineRow::barrier([1.0, 0.0], mu * (s.v - limits.v_min)),
        AffineRow::barrier([-1.0, 0.0], mu * (limits.v_max - s.v)),
        AffineRow::barrier([0.0, 1.0], mu * (s.omega + limits.omega_max)),
        AffineRow::barrier([0.0, -1.0], mu * (limits.omega_max - s.omega)),
    ]
}
