//! Per-step closed-loop controller: gathers CLF/CBF rows for a world
//! snapshot, dispatches to one of the solver pipelines, and applies the
//! braking fallback on infeasible steps.

use std::time::Instant;

use crate::affine::AffineRow;
use crate::cbf::{self, CbfError, CbfParams};
use crate::clf::{self, ClfGains, GoalSpec};
use crate::decision::{extract_features, DecisionNet};
use crate::dynamics::{
    center_position, center_velocity, wrap_angle, ControlInput, Limits, ObstacleState,
    RobotGeometry, RobotState,
};
use crate::solver::{
    enumerate_subqps, solve_assignment, solve_miqp, solve_qp, DirectionAssignment, QpProblem,
    QpSolution, QpWeights, SolverError, SUBQP_PAIR_CAP,
};
use crate::Vec2;

/// Solver pipeline used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Big-M mixed-integer QP solved by branch and bound.
    Miqp,
    /// Enumerate the `3^M` sub-QPs with an LP feasibility prescreen.
    #[serde(rename = "qps")]
    SubQps,
    /// Decision network picks the direction, then a single QP.
    #[serde(rename = "decnet")]
    DecNetQp,
    /// Distance-based high-order CBF baseline.
    Hocbf,
    /// Sampling velocity-obstacle baseline.
    #[serde(rename = "vo")]
    ClassicVo,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Miqp => "miqp",
            Method::SubQps => "qps",
            Method::DecNetQp => "decnet",
            Method::Hocbf => "hocbf",
            Method::ClassicVo => "vo",
        }
    }

    pub fn needs_net(self) -> bool {
        matches!(self, Method::DecNetQp)
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "miqp" => Ok(Method::Miqp),
            "qps" | "subqps" => Ok(Method::SubQps),
            "decnet" => Ok(Method::DecNetQp),
            "hocbf" => Ok(Method::Hocbf),
            "vo" => Ok(Method::ClassicVo),
            other => Err(format!(
                "unknown method '{other}' (expected miqp|qps|decnet|hocbf|vo)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// What an infeasible step falls back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryPolicy {
    /// Maximal braking of both rates inside the input boxes.
    Braking,
    /// Minimize the violation of the hard rows (steer-and-brake escape).
    LeastViolation,
}

/// Controller configuration shared across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub gains: ClfGains,
    pub cbf: CbfParams,
    pub weights: QpWeights,
    pub limits: Limits,
    pub dt: f64,
    /// Obstacles beyond this surface-to-surface distance are ignored.
    pub sensing_radius: f64,
    /// At most this many avoidance entities per step (nearest first).
    pub entity_cap: usize,
    /// Big-M override for the mixed-integer pipeline.
    pub big_m: Option<f64>,
    pub recovery: RecoveryPolicy,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            gains: ClfGains::default(),
            cbf: CbfParams::default(),
            weights: QpWeights::default(),
            limits: Limits::default(),
            dt: crate::dynamics::DEFAULT_DT,
            sensing_radius: 8.0,
            entity_cap: SUBQP_PAIR_CAP,
            big_m: None,
            recovery: RecoveryPolicy::LeastViolation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    /// Physical overlap with another body; the run records a collision.
    #[error("collision: center distance {distance:.4} below physical radius sum {radius_sum:.4}")]
    Collision { distance: f64, radius_sum: f64 },
    #[error("method 'decnet' requires decision network weights")]
    MissingNet,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Everything a step produced, for logging and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub u: ControlInput,
    pub method: Method,
    pub assignment: Option<DirectionAssignment>,
    pub objective: Option<f64>,
    /// False when the step fell back to braking.
    pub feasible: bool,
    /// Per-entity barrier values: `(h1, h2)` for cone pairs, `(h, psi1)` for
    /// the distance chain.
    pub h_values: Vec<(f64, f64)>,
    pub delta: [f64; 4],
    pub solve_seconds: f64,
    /// Entities skipped this step because the inflated margin was violated
    /// (cone undefined). Soft safety breach, counted but survivable.
    pub margin_breaches: usize,
    /// Velocity sample chosen by the classic VO baseline.
    pub chosen_velocity: Option<Vec2>,
}

/// Center-disc view of every avoidance entity near the robot: true obstacles
/// first, then neighbor robots (reciprocal pairs), nearest first, capped.
/// Range is measured surface-to-surface so large bodies are seen as early as
/// small ones.
pub fn select_entity_views(
    s: &RobotState,
    geom: &RobotGeometry,
    obstacles: &[ObstacleState],
    neighbors: &[(RobotState, RobotGeometry)],
    params: &ControllerParams,
) -> Vec<(ObstacleState, bool)> {
    let center = center_position(s, geom);
    let mut views: Vec<(f64, usize, ObstacleState, bool)> = Vec::new();
    for (i, o) in obstacles.iter().enumerate() {
        let gap = (o.position - center).norm() - geom.inflated_radius() - o.radius;
        if gap <= params.sensing_radius {
            views.push((gap, i, *o, false));
        }
    }
    for (i, (ns, ng)) in neighbors.iter().enumerate() {
        let view = ObstacleState {
            position: center_position(ns, ng),
            velocity: center_velocity(ns, ng),
            acceleration: Vec2::zeros(),
            radius: ng.radius,
        };
        let gap = (view.position - center).norm() - geom.inflated_radius() - view.radius;
        if gap <= params.sensing_radius {
            views.push((gap, obstacles.len() + i, view, true));
        }
    }
    views.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    views.truncate(params.entity_cap);
    views.into_iter().map(|(_, _, v, rec)| (v, rec)).collect()
}

fn control_box(params: &ControllerParams, u_pre: ControlInput) -> ([f64; 2], [f64; 2]) {
    let du = [
        params.limits.delta_a_max * params.dt,
        params.limits.delta_alpha_max * params.dt,
    ];
    let lo = [
        (-params.limits.a_max).max(u_pre.a - du[0]),
        (-params.limits.alpha_max).max(u_pre.alpha - du[1]),
    ];
    let hi = [
        params.limits.a_max.min(u_pre.a + du[0]),
        params.limits.alpha_max.min(u_pre.alpha + du[1]),
    ];
    (lo, hi)
}

/// Maximal braking inside the input and rate boxes; used when a step is
/// infeasible. Both rates are braked: leaving the turn rate untouched would
/// let a stopped robot pivot its body center into contact.
pub fn braking_fallback(s: &RobotState, params: &ControllerParams, u_pre: ControlInput) -> ControlInput {
    let (lo, hi) = control_box(params, u_pre);
    ControlInput::new(
        (-s.v / params.dt).clamp(lo[0], hi[0].max(lo[0])),
        (-s.omega / params.dt).clamp(lo[1], hi[1].max(lo[1])),
    )
}

fn base_problem(
    s: &RobotState,
    geom: &RobotGeometry,
    goal: &GoalSpec,
    params: &ControllerParams,
    u_pre: ControlInput,
    extra_rows: Vec<AffineRow>,
) -> Result<QpProblem, SolverError> {
    let mut rows = clf::clf_rows(s, geom, goal, &params.gains, &params.limits);
    rows.extend(cbf::state_limit_rows(s, &params.limits, &params.cbf));
    rows.extend(extra_rows);
    QpProblem::new(
        params.weights,
        u_pre,
        rows,
        [-params.limits.a_max, -params.limits.alpha_max],
        [params.limits.a_max, params.limits.alpha_max],
        [
            params.limits.delta_a_max * params.dt,
            params.limits.delta_alpha_max * params.dt,
        ],
    )
}

/// Build the cone pairs for the selected entities. An entity inside the
/// inflated margin has no cone; its pair is replaced by a hard distance-chain
/// row that drives the separation back out, and the step is flagged.
/// Physical overlap aborts the step as a collision.
fn cone_pairs(
    s: &RobotState,
    geom: &RobotGeometry,
    views: &[(ObstacleState, bool)],
    params: &ControllerParams,
) -> Result<(Vec<[AffineRow; 2]>, Vec<AffineRow>, Vec<(f64, f64)>, usize), ControlError> {
    let mut pairs = Vec::with_capacity(views.len());
    let mut recovery_rows = Vec::new();
    let mut h_values = Vec::with_capacity(views.len());
    let mut breaches = 0usize;
    for (view, reciprocal) in views {
        let result = cbf::vocbf_rows(s, geom, view, &params.cbf);
        match result {
            Ok((rows, h)) => {
                if *reciprocal {
                    pairs.push([rows[0].scaled(0.5), rows[1].scaled(0.5)]);
                    h_values.push((0.5 * h.0, 0.5 * h.1));
                } else {
                    pairs.push(rows);
                    h_values.push(h);
                }
            }
            Err(CbfError::Overlap { distance, .. }) => {
                let physical = geom.radius + view.radius;
                if distance <= physical {
                    return Err(ControlError::Collision {
                        distance,
                        radius_sum: physical,
                    });
                }
                let (row, h, psi1) = cbf::hocbf_rows(s, geom, view, &params.cbf);
                recovery_rows.push(row);
                h_values.push((h, psi1));
                breaches += 1;
            }
        }
    }
    Ok((pairs, recovery_rows, h_values, breaches))
}

/// Recovery action for an infeasible step. Under the least-violation policy
/// the violations of the hard rows are minimized (picking the less-violated
/// side of each cone pair) inside the input box; navigation rows are dropped
/// for the step. Under the braking policy both rates are simply braked.
fn recovery_input(
    s: &RobotState,
    params: &ControllerParams,
    u_pre: ControlInput,
    problem: &QpProblem,
    pairs: &[[AffineRow; 2]],
    h_values: &[(f64, f64)],
) -> ControlInput {
    match params.recovery {
        RecoveryPolicy::Braking => braking_fallback(s, params, u_pre),
        RecoveryPolicy::LeastViolation => {
            let mut hard: Vec<&AffineRow> = problem.rows.iter().filter(|r| r.is_hard()).collect();
            for (pair, h) in pairs.iter().zip(h_values) {
                hard.push(if h.0 >= h.1 { &pair[0] } else { &pair[1] });
            }
            crate::solver::solve_least_violation(problem, &hard)
        }
    }
}

fn report_from_solution(
    method: Method,
    sol: Option<(QpSolution, Option<DirectionAssignment>)>,
    fallback: impl FnOnce() -> ControlInput,
    h_values: Vec<(f64, f64)>,
    breaches: usize,
    started: Instant,
) -> StepReport {
    match sol {
        Some((s, assignment)) => StepReport {
            u: s.u,
            method,
            assignment,
            objective: Some(s.objective),
            feasible: true,
            h_values,
            delta: s.delta,
            solve_seconds: started.elapsed().as_secs_f64(),
            margin_breaches: breaches,
            chosen_velocity: None,
        },
        None => StepReport {
            u: fallback(),
            method,
            assignment: None,
            objective: None,
            feasible: false,
            h_values,
            delta: [0.0; 4],
            solve_seconds: started.elapsed().as_secs_f64(),
            margin_breaches: breaches,
            chosen_velocity: None,
        },
    }
}

/// One controller step on a world snapshot.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    s: &RobotState,
    geom: &RobotGeometry,
    goal: &GoalSpec,
    obstacles: &[ObstacleState],
    neighbors: &[(RobotState, RobotGeometry)],
    method: Method,
    params: &ControllerParams,
    u_pre: ControlInput,
    net: Option<&DecisionNet>,
) -> Result<StepReport, ControlError> {
    if method == Method::ClassicVo {
        return Ok(classic_vo_step(s, geom, goal, obstacles, neighbors, params, u_pre));
    }
    let started = Instant::now();
    let views = select_entity_views(s, geom, obstacles, neighbors, params);

    if method == Method::Hocbf {
        let mut h_values = Vec::with_capacity(views.len());
        let mut rows = Vec::with_capacity(views.len());
        for (view, _) in &views {
            let (row, h, psi1) = cbf::hocbf_rows(s, geom, view, &params.cbf);
            rows.push(row);
            h_values.push((h, psi1));
        }
        let problem = base_problem(s, geom, goal, params, u_pre, rows)?;
        let sol = solve_qp(&problem).optimal().map(|s| (s, None));
        let fallback = || recovery_input(s, params, u_pre, &problem, &[], &[]);
        return Ok(report_from_solution(method, sol, fallback, h_values, 0, started));
    }

    let (pairs, recovery_rows, h_values, breaches) = cone_pairs(s, geom, &views, params)?;
    let problem = base_problem(s, geom, goal, params, u_pre, recovery_rows)?;

    let sol = match method {
        Method::Miqp => solve_miqp(&problem, &pairs, params.big_m)?
            .best
            .map(|(s, a)| (s, Some(a))),
        Method::SubQps => enumerate_subqps(&problem, &pairs, true)?
            .best
            .map(|(s, a)| (s, Some(a))),
        Method::DecNetQp => {
            let net = net.ok_or(ControlError::MissingNet)?;
            // features must describe the same entities the rows came from,
            // including margin-breached ones being skipped
            let usable: Vec<ObstacleState> = views
                .iter()
                .filter(|(v, _)| {
                    (v.position - center_position(s, geom)).norm()
                        > geom.inflated_radius() + v.radius
                })
                .map(|(v, _)| *v)
                .collect();
            let features = extract_features(s, geom, goal, &usable);
            let assignment = net.decide(&features);
            debug_assert_eq!(assignment.0.len(), pairs.len());
            solve_assignment(&problem, &pairs, &assignment)
                .optimal()
                .map(|s| (s, Some(assignment)))
        }
        Method::Hocbf | Method::ClassicVo => unreachable!("handled above"),
    };
    let fallback = || recovery_input(s, params, u_pre, &problem, &pairs, &h_values);
    Ok(report_from_solution(method, sol, fallback, h_values.clone(), breaches, started))
}

// sampling grid of the classic VO baseline
const VO_SPEED_SAMPLES: usize = 9;
const VO_HEADING_SAMPLES: usize = 15;
const VO_SPEED_HORIZON: f64 = 1.0;
const VO_HEADING_SPAN: f64 = 1.0;
const VO_TRACK_GAIN_A: f64 = 2.0;
const VO_TRACK_GAIN_H: f64 = 2.0;
const VO_TRACK_DAMP_W: f64 = 1.0;

/// Sampling velocity-obstacle baseline: pick the reachable center velocity
/// closest to the preferred one that lies outside every cone, then track it
/// with proportional acceleration and steering.
pub fn classic_vo_step(
    s: &RobotState,
    geom: &RobotGeometry,
    goal: &GoalSpec,
    obstacles: &[ObstacleState],
    neighbors: &[(RobotState, RobotGeometry)],
    params: &ControllerParams,
    u_pre: ControlInput,
) -> StepReport {
    let started = Instant::now();
    let views = select_entity_views(s, geom, obstacles, neighbors, params);
    let center = center_position(s, geom);

    let to_goal = goal.center - center;
    let dist = to_goal.norm();
    let pref_speed = clf::desired_speed(dist, &params.gains, &params.limits);
    let pref = if dist > 1e-9 {
        to_goal / dist * pref_speed
    } else {
        Vec2::zeros()
    };

    // current barrier values for the log
    let mut h_values = Vec::with_capacity(views.len());
    let current_vel = center_velocity(s, geom);
    for (view, _) in &views {
        let r_sum = geom.inflated_radius() + view.radius;
        if let Ok(cone) = cbf::vo_cone(center - view.position, current_vel - view.velocity, r_sum) {
            h_values.push(cbf::vocbf_values(&cone));
        }
    }

    let is_safe = |vel: Vec2| -> bool {
        for (view, _) in &views {
            let r_sum = geom.inflated_radius() + view.radius;
            match cbf::vo_cone(center - view.position, vel - view.velocity, r_sum) {
                Ok(cone) => {
                    let (h1, h2) = cbf::vocbf_values(&cone);
                    if h1 < 0.0 && h2 < 0.0 {
                        return false;
                    }
                }
                Err(_) => continue, // inside margin: cone undefined, no veto
            }
        }
        true
    };

    let v_lo = params.limits.v_min.max(s.v - params.limits.a_max * VO_SPEED_HORIZON);
    let v_hi = params.limits.v_max.min(s.v + params.limits.a_max * VO_SPEED_HORIZON);
    let span = VO_HEADING_SPAN.min(std::f64::consts::PI);

    let mut best: Option<(f64, f64, f64, Vec2)> = None; // (score, speed, heading, vel)
    for i in 0..VO_SPEED_SAMPLES {
        let speed = v_lo + (v_hi - v_lo) * i as f64 / (VO_SPEED_SAMPLES - 1) as f64;
        for j in 0..VO_HEADING_SAMPLES {
            let heading =
                s.theta - span + 2.0 * span * j as f64 / (VO_HEADING_SAMPLES - 1) as f64;
            let vel = Vec2::new(speed * heading.cos(), speed * heading.sin());
            if !is_safe(vel) {
                continue;
            }
            let score = (vel - pref).norm_squared();
            if best.map_or(true, |(b, _, _, _)| score < b - 1e-12) {
                best = Some((score, speed, heading, vel));
            }
        }
    }

    let (lo, hi) = control_box(params, u_pre);
    let (u, feasible, chosen) = match best {
        Some((_, speed, heading, vel)) => {
            let a = (VO_TRACK_GAIN_A * (speed - s.v)).clamp(lo[0], hi[0].max(lo[0]));
            let alpha = (VO_TRACK_GAIN_H * wrap_angle(heading - s.theta)
                - VO_TRACK_DAMP_W * s.omega)
                .clamp(lo[1], hi[1].max(lo[1]));
            (ControlInput::new(a, alpha), true, Some(vel))
        }
        None => {
            // no safe sample: keep heading and decelerate
            let a = (-params.limits.a_max).clamp(lo[0], hi[0].max(lo[0]));
            let alpha = (-VO_TRACK_DAMP_W * s.omega).clamp(lo[1], hi[1].max(lo[1]));
            (ControlInput::new(a, alpha), false, None)
        }
    };

    StepReport {
        u,
        method: Method::ClassicVo,
        assignment: None,
        objective: None,
        feasible,
        h_values,
        delta: [0.0; 4],
        solve_seconds: started.elapsed().as_secs_f64(),
        margin_breaches: 0,
        chosen_velocity: chosen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (RobotState, RobotGeometry, GoalSpec, ControllerParams) {
        let s = RobotState::new(0.0, 0.0, 0.0, 1.0, 0.0);
        let geom = RobotGeometry::default();
        let goal = GoalSpec::from_rear_axle(Vec2::new(10.0, 0.0), 0.0, geom.axle_offset);
        (s, geom, goal, ControllerParams::default())
    }

    #[test]
    fn empty_world_methods_agree() {
        let (s, geom, goal, params) = setup();
        let miqp = control_step(&s, &geom, &goal, &[], &[], Method::Miqp, &params, ControlInput::ZERO, None)
            .unwrap();
        let qps = control_step(&s, &geom, &goal, &[], &[], Method::SubQps, &params, ControlInput::ZERO, None)
            .unwrap();
        assert!(miqp.feasible && qps.feasible);
        assert_eq!(miqp.u, qps.u);
        assert_relative_eq!(miqp.objective.unwrap(), qps.objective.unwrap(), epsilon = 1e-12);
        assert!(miqp.assignment.as_ref().unwrap().0.is_empty());
    }

    #[test]
    fn input_respects_boxes() {
        let (s, geom, goal, params) = setup();
        let mut u_pre = ControlInput::ZERO;
        let o = ObstacleState::moving(Vec2::new(4.0, 0.2), Vec2::new(-0.5, 0.0), 0.5);
        for _ in 0..50 {
            let r = control_step(&s, &geom, &goal, &[o], &[], Method::SubQps, &params, u_pre, None)
                .unwrap();
            assert!(r.u.a.abs() <= params.limits.a_max + 1e-9);
            assert!(r.u.alpha.abs() <= params.limits.alpha_max + 1e-9);
            assert!((r.u.a - u_pre.a).abs() <= params.limits.delta_a_max * params.dt + 1e-9);
            assert!(
                (r.u.alpha - u_pre.alpha).abs()
                    <= params.limits.delta_alpha_max * params.dt + 1e-9
            );
            u_pre = r.u;
        }
    }

    #[test]
    fn physical_overlap_is_collision() {
        let (s, geom, goal, params) = setup();
        let o = ObstacleState::at_rest(center_position(&s, &geom) + Vec2::new(0.5, 0.0), 0.4);
        let err = control_step(&s, &geom, &goal, &[o], &[], Method::SubQps, &params, ControlInput::ZERO, None)
            .unwrap_err();
        assert!(matches!(err, ControlError::Collision { .. }));
    }

    #[test]
    fn margin_breach_is_flagged_not_fatal() {
        let (s, geom, goal, params) = setup();
        // inside inflated margin (0.3 + 0.15 + 0.4 = 0.85) but beyond the
        // physical sum (0.7)
        let o = ObstacleState::at_rest(center_position(&s, &geom) + Vec2::new(0.8, 0.0), 0.4);
        let r = control_step(&s, &geom, &goal, &[o], &[], Method::SubQps, &params, ControlInput::ZERO, None)
            .unwrap();
        assert_eq!(r.margin_breaches, 1);
        // the entity is constrained by the distance chain instead of a cone
        assert_eq!(r.h_values.len(), 1);
        assert!(r.h_values[0].0 < 0.0, "inside the margin h must be negative");
        assert!(r.assignment.unwrap().0.is_empty());
    }

    #[test]
    fn sensing_radius_filters_entities() {
        let (s, geom, goal, params) = setup();
        let far = ObstacleState::at_rest(Vec2::new(100.0, 0.0), 1.0);
        let r = control_step(&s, &geom, &goal, &[far], &[], Method::SubQps, &params, ControlInput::ZERO, None)
            .unwrap();
        assert!(r.h_values.is_empty());
        assert!(r.assignment.unwrap().0.is_empty());
    }

    #[test]
    fn classic_vo_no_obstacles_tracks_goal() {
        let (s, geom, goal, params) = setup();
        let r = classic_vo_step(&s, &geom, &goal, &[], &[], &params, ControlInput::ZERO);
        assert!(r.feasible);
        // goal straight ahead, below desired speed: accelerate
        assert!(r.u.a > 0.0);
        let v = r.chosen_velocity.unwrap();
        assert!(v.x > 0.0);
    }

    #[test]
    fn classic_vo_head_on_sample_is_safe() {
        let (s, geom, goal, params) = setup();
        let o = ObstacleState::moving(Vec2::new(4.0, 0.0), Vec2::new(-1.0, 0.0), 0.5);
        let r = classic_vo_step(&s, &geom, &goal, &[o], &[], &params, ControlInput::ZERO);
        let vel = r.chosen_velocity.expect("head-on scene should have a safe sample");
        let center = center_position(&s, &geom);
        let cone = cbf::vo_cone(
            center - o.position,
            vel - o.velocity,
            geom.inflated_radius() + o.radius,
        )
        .unwrap();
        let (h1, h2) = cbf::vocbf_values(&cone);
        assert!(h1 >= 0.0 || h2 >= 0.0);
    }
}
