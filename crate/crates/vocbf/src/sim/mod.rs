//! Closed-loop simulation: scenario runs, the circle exchange, seeded random
//! batches and method comparisons.
//!
//! Each step applies every robot's controller to the same pre-step snapshot
//! (synchronous, decision-decoupled), then integrates robots and obstacles by
//! one Euler step. Runs are fully deterministic given the configuration.

mod batch;
mod config;
mod log;

pub use batch::{
    random_scene, run_batch, scenario_seed, BatchBucket, BatchMetrics, BatchRanges, BatchResult,
    RandomScene,
};
pub use config::{ConfigError, ObstacleConfig, RobotConfig, ScenarioConfig, SimParams, WeightsConfig};
pub use log::{summary_text, RobotRecord, StepRecord, TrajectoryLog};

use crate::clf::GoalSpec;
use crate::controller::{control_step, ControlError, ControllerParams, Method};
use crate::decision::DecisionNet;
use crate::dynamics::{
    center_position, center_velocity, step_obstacle, step_robot, ControlInput, DynamicsError,
    ObstacleState, RobotGeometry, RobotState,
};
use crate::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Terminal classification of one robot's run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Completed,
    Deadlock,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotOutcome {
    pub kind: OutcomeKind,
    /// Time of first goal entry, when completed.
    pub reach_time: Option<f64>,
    /// Smallest center distance minus physical radius sum over the run.
    pub min_clearance: f64,
    pub infeasible_steps: usize,
    pub margin_breach_steps: usize,
    pub first_collision: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcomes: Vec<RobotOutcome>,
    pub log: TrajectoryLog,
}

struct RobotRun {
    state: RobotState,
    geom: RobotGeometry,
    goal: GoalSpec,
    params: ControllerParams,
    u_pre: ControlInput,
    completed_at: Option<f64>,
    collided_at: Option<f64>,
    still_since: Option<f64>,
    longest_still: f64,
    min_clearance: f64,
    infeasible_steps: usize,
    margin_breach_steps: usize,
}

/// Run one scenario to termination.
pub fn run_scenario(cfg: &ScenarioConfig, net: Option<&DecisionNet>) -> Result<RunResult, SimError> {
    cfg.validate()?;
    if cfg.method.needs_net() && net.is_none() {
        return Err(ControlError::MissingNet.into());
    }
    let params = &cfg.params;
    let mut robots: Vec<RobotRun> = cfg
        .robots
        .iter()
        .map(|r| RobotRun {
            state: r.initial_state(),
            geom: r.geometry(params.d_s),
            goal: r.goal_spec(),
            params: params.controller_params(r.limits.unwrap_or(params.limits)),
            u_pre: ControlInput::ZERO,
            completed_at: None,
            collided_at: None,
            still_since: None,
            longest_still: 0.0,
            min_clearance: f64::INFINITY,
            infeasible_steps: 0,
            margin_breach_steps: 0,
        })
        .collect();
    let mut obstacles: Vec<ObstacleState> = cfg.obstacles.iter().map(|o| o.state()).collect();

    let n_steps = (params.t_max / params.dt).ceil() as usize;
    let mut log = TrajectoryLog {
        dt: params.dt,
        steps: Vec::with_capacity(n_steps.min(4096)),
    };

    // clearance of the initial configuration
    scan_clearances(&mut robots, &obstacles, 0.0);

    for step in 0..n_steps {
        let t = step as f64 * params.dt;
        let snapshot: Vec<(RobotState, RobotGeometry)> =
            robots.iter().map(|r| (r.state, r.geom)).collect();

        let mut records = Vec::with_capacity(robots.len());
        let mut controls = Vec::with_capacity(robots.len());
        for (i, robot) in robots.iter_mut().enumerate() {
            if robot.collided_at.is_some() {
                // crashed robots stay put
                controls.push(None);
                records.push(RobotRecord {
                    state: robot.state,
                    u: ControlInput::ZERO,
                    feasible: false,
                    objective: None,
                    assignment: None,
                    min_h: None,
                    delta: [0.0; 4],
                    solve_seconds: 0.0,
                    margin_breaches: 0,
                });
                continue;
            }
            let neighbors: Vec<(RobotState, RobotGeometry)> = snapshot
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .collect();
            match control_step(
                &robot.state,
                &robot.geom,
                &robot.goal,
                &obstacles,
                &neighbors,
                cfg.method,
                &robot.params,
                robot.u_pre,
                net,
            ) {
                Ok(report) => {
                    if !report.feasible {
                        robot.infeasible_steps += 1;
                    }
                    robot.margin_breach_steps += (report.margin_breaches > 0) as usize;
                    let min_h = report
                        .h_values
                        .iter()
                        .map(|(a, b)| a.max(*b))
                        .fold(f64::INFINITY, f64::min);
                    records.push(RobotRecord {
                        state: robot.state,
                        u: report.u,
                        feasible: report.feasible,
                        objective: report.objective,
                        assignment: report.assignment.as_ref().map(|a| a.to_string()),
                        min_h: min_h.is_finite().then_some(min_h),
                        delta: report.delta,
                        solve_seconds: report.solve_seconds,
                        margin_breaches: report.margin_breaches,
                    });
                    controls.push(Some(report.u));
                    robot.u_pre = report.u;
                }
                Err(ControlError::Collision { .. }) => {
                    robot.collided_at = Some(t);
                    controls.push(None);
                    records.push(RobotRecord {
                        state: robot.state,
                        u: ControlInput::ZERO,
                        feasible: false,
                        objective: None,
                        assignment: None,
                        min_h: None,
                        delta: [0.0; 4],
                        solve_seconds: 0.0,
                        margin_breaches: 0,
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }

        let pre_clearance = clearance_now(&robots, &obstacles);
        log.steps.push(StepRecord {
            step,
            time: t,
            robots: records,
            obstacles: obstacles.clone(),
            min_clearance: pre_clearance,
        });

        // integrate
        for (robot, u) in robots.iter_mut().zip(&controls) {
            if let Some(u) = u {
                robot.state = step_robot(&robot.state, u, params.dt)?;
            }
        }
        for o in obstacles.iter_mut() {
            *o = step_obstacle(o, params.dt);
        }
        let t_next = (step + 1) as f64 * params.dt;

        // collisions on the post-step configuration
        scan_collisions(&mut robots, &obstacles, t_next);
        scan_clearances(&mut robots, &obstacles, t_next);

        // completion and stillness
        for robot in robots.iter_mut() {
            if robot.collided_at.is_some() {
                continue;
            }
            let center = center_position(&robot.state, &robot.geom);
            if robot.completed_at.is_none()
                && (robot.goal.center - center).norm() < params.goal_tolerance
            {
                robot.completed_at = Some(t_next);
            }
            if robot.completed_at.is_none() {
                let speed = center_velocity(&robot.state, &robot.geom).norm();
                if speed < params.deadlock_speed {
                    let since = *robot.still_since.get_or_insert(t_next - params.dt);
                    robot.longest_still = robot.longest_still.max(t_next - since);
                } else {
                    robot.still_since = None;
                }
            }
        }

        if robots
            .iter()
            .all(|r| r.completed_at.is_some() || r.collided_at.is_some())
        {
            break;
        }
    }

    let outcomes = robots
        .iter()
        .map(|r| {
            let kind = if r.collided_at.is_some() {
                OutcomeKind::Collision
            } else if r.completed_at.is_some() {
                OutcomeKind::Completed
            } else if r.longest_still >= params.deadlock_duration {
                OutcomeKind::Deadlock
            } else {
                OutcomeKind::Timeout
            };
            RobotOutcome {
                kind,
                reach_time: r.completed_at,
                min_clearance: r.min_clearance,
                infeasible_steps: r.infeasible_steps,
                margin_breach_steps: r.margin_breach_steps,
                first_collision: r.collided_at,
            }
        })
        .collect();
    Ok(RunResult { outcomes, log })
}

fn clearance_now(robots: &[RobotRun], obstacles: &[ObstacleState]) -> f64 {
    let mut min = f64::INFINITY;
    for (i, r) in robots.iter().enumerate() {
        let c = center_position(&r.state, &r.geom);
        for o in obstacles {
            min = min.min((o.position - c).norm() - r.geom.radius - o.radius);
        }
        for other in robots.iter().skip(i + 1) {
            let co = center_position(&other.state, &other.geom);
            min = min.min((co - c).norm() - r.geom.radius - other.geom.radius);
        }
    }
    min
}

fn scan_clearances(robots: &mut [RobotRun], obstacles: &[ObstacleState], _t: f64) {
    for i in 0..robots.len() {
        let c = center_position(&robots[i].state, &robots[i].geom);
        let mut min = robots[i].min_clearance;
        for o in obstacles {
            min = min.min((o.position - c).norm() - robots[i].geom.radius - o.radius);
        }
        for (j, other) in robots.iter().enumerate() {
            if j == i {
                continue;
            }
            let co = center_position(&other.state, &other.geom);
            min = min.min((co - c).norm() - robots[i].geom.radius - other.geom.radius);
        }
        robots[i].min_clearance = min;
    }
}

fn scan_collisions(robots: &mut [RobotRun], obstacles: &[ObstacleState], t: f64) {
    let centers: Vec<Vec2> = robots
        .iter()
        .map(|r| center_position(&r.state, &r.geom))
        .collect();
    for i in 0..robots.len() {
        if robots[i].collided_at.is_some() {
            continue;
        }
        let mut hit = false;
        for o in obstacles {
            if (o.position - centers[i]).norm() <= robots[i].geom.radius + o.radius {
                hit = true;
                break;
            }
        }
        if !hit {
            for j in 0..robots.len() {
                if j != i
                    && (centers[j] - centers[i]).norm()
                        <= robots[i].geom.radius + robots[j].geom.radius
                {
                    hit = true;
                    break;
                }
            }
        }
        if hit {
            robots[i].collided_at = Some(t);
        }
    }
}

/// Robots evenly spaced on a circle exchanging to antipodal goals.
pub fn circle_config(
    n_robots: usize,
    radius: f64,
    center: [f64; 2],
    method: Method,
    params: SimParams,
) -> ScenarioConfig {
    let robots = (0..n_robots)
        .map(|i| {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / n_robots as f64;
            let (sin, cos) = ang.sin_cos();
            let start = [center[0] + radius * cos, center[1] + radius * sin];
            let goal = [center[0] - radius * cos, center[1] - radius * sin];
            let inward = crate::dynamics::wrap_angle(ang + std::f64::consts::PI);
            RobotConfig {
                start: [start[0], start[1], inward],
                goal: [goal[0], goal[1], inward],
                radius: 0.3,
                l: 0.15,
                limits: None,
            }
        })
        .collect();
    ScenarioConfig {
        method,
        robots,
        obstacles: Vec::new(),
        params,
    }
}

/// Run the circle exchange.
pub fn run_circle(
    n_robots: usize,
    radius: f64,
    center: [f64; 2],
    method: Method,
    params: SimParams,
    net: Option<&DecisionNet>,
) -> Result<RunResult, SimError> {
    run_scenario(&circle_config(n_robots, radius, center, method, params), net)
}

/// Side-by-side summary of several methods on the same scenario.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub outcome: OutcomeKind,
    pub reach_time: Option<f64>,
    pub min_clearance: f64,
    pub mean_solve_ms: f64,
    pub median_solve_ms: f64,
    pub infeasible_steps: usize,
}

pub fn compare_methods(
    cfg: &ScenarioConfig,
    methods: &[Method],
    net: Option<&DecisionNet>,
) -> Result<Vec<MethodSummary>, SimError> {
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut c = cfg.clone();
        c.method = method;
        let result = run_scenario(&c, net)?;
        let first = &result.outcomes[0];
        out.push(MethodSummary {
            method,
            outcome: first.kind,
            reach_time: first.reach_time,
            min_clearance: first.min_clearance,
            mean_solve_ms: result.log.mean_solve_seconds(0) * 1e3,
            median_solve_ms: result.log.median_solve_seconds(0) * 1e3,
            infeasible_steps: first.infeasible_steps,
        });
    }
    Ok(out)
}

pub fn comparison_table(rows: &[MethodSummary]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<10} {:>10} {:>14} {:>14} {:>12} {:>11}",
        "method", "outcome", "reach_s", "min_clear_m", "mean_solve_ms", "median_ms", "infeasible"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:>10} {:>14} {:>14.3} {:>12.3} {:>11}",
            r.method.label(),
            r.outcome.label(),
            r.reach_time.map_or("-".into(), |t| format!("{t:.2}")),
            if r.min_clearance.is_finite() {
                format!("{:.3}", r.min_clearance)
            } else {
                "-".into()
            },
            r.mean_solve_ms,
            r.median_solve_ms,
            r.infeasible_steps,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial_config() -> ScenarioConfig {
        ScenarioConfig {
            method: Method::SubQps,
            robots: vec![RobotConfig {
                start: [0.0, 0.0, 0.0],
                goal: [1.0, 0.0, 0.0],
                radius: 0.3,
                l: 0.15,
                limits: None,
            }],
            obstacles: vec![],
            params: SimParams::default(),
        }
    }

    #[test]
    fn near_goal_completes_quickly() {
        let result = run_scenario(&trivial_config(), None).unwrap();
        assert_eq!(result.outcomes[0].kind, OutcomeKind::Completed);
        assert!(result.outcomes[0].reach_time.unwrap() < 5.0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        // modulo wall-clock solve timings, which are measurement metadata
        let a = run_scenario(&trivial_config(), None).unwrap();
        let b = run_scenario(&trivial_config(), None).unwrap();
        assert_eq!(a.log.without_timings().steps, b.log.without_timings().steps);
        assert_eq!(
            a.log.without_timings().trajectory_csv(),
            b.log.without_timings().trajectory_csv()
        );
    }

    #[test]
    fn decnet_without_weights_fails() {
        let mut cfg = trivial_config();
        cfg.method = Method::DecNetQp;
        assert!(run_scenario(&cfg, None).is_err());
    }

    #[test]
    fn two_robots_head_on_complete() {
        let mut cfg = trivial_config();
        cfg.robots = vec![
            RobotConfig {
                start: [0.0, 0.0, 0.0],
                goal: [8.0, 0.0, 0.0],
                radius: 0.3,
                l: 0.15,
                limits: None,
            },
            RobotConfig {
                start: [8.0, 0.05, std::f64::consts::PI],
                goal: [0.0, 0.05, std::f64::consts::PI],
                radius: 0.3,
                l: 0.15,
                limits: None,
            },
        ];
        let result = run_scenario(&cfg, None).unwrap();
        for o in &result.outcomes {
            assert_eq!(o.kind, OutcomeKind::Completed, "outcome {o:?}");
            assert!(o.min_clearance > 0.0);
        }
    }

    #[test]
    fn timeout_when_goal_unreachable() {
        let mut cfg = trivial_config();
        // goal buried inside a big static obstacle; robot will stall outside
        cfg.robots[0].goal = [10.0, 0.0, 0.0];
        cfg.obstacles = vec![ObstacleConfig {
            position: [10.15, 0.0],
            velocity: [0.0, 0.0],
            acceleration: [0.0, 0.0],
            radius: 2.0,
        }];
        cfg.params.t_max = 20.0;
        let result = run_scenario(&cfg, None).unwrap();
        let kind = result.outcomes[0].kind;
        assert!(
            kind == OutcomeKind::Deadlock || kind == OutcomeKind::Timeout,
            "unexpected outcome {kind:?}"
        );
    }
}
