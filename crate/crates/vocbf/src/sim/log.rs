//! Trajectory logging and the text outputs: per-step CSV, obstacle CSV and a
//! run summary document.

use std::fmt::Write as _;

use crate::dynamics::{ControlInput, ObstacleState, RobotState};

use super::{OutcomeKind, RobotOutcome};

/// Everything logged for one robot at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotRecord {
    pub state: RobotState,
    pub u: ControlInput,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub assignment: Option<String>,
    /// Smallest barrier value over the robot's entities this step.
    pub min_h: Option<f64>,
    pub delta: [f64; 4],
    pub solve_seconds: f64,
    pub margin_breaches: usize,
}

/// One simulation step: states before stepping, the controls applied, and
/// the tightest pairwise clearance (center distance minus physical radii).
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub robots: Vec<RobotRecord>,
    pub obstacles: Vec<ObstacleState>,
    pub min_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub steps: Vec<StepRecord>,
}

impl TrajectoryLog {
    /// Robot rows: one line per (step, robot).
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "step,time,robot,x,y,theta,v,omega,a,alpha,feasible,objective,assignment,min_h,\
             delta_d,delta_theta,delta_v,delta_omega,solve_ms,margin_breaches,min_clearance\n",
        );
        for rec in &self.steps {
            for (i, r) in rec.robots.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    rec.step,
                    rec.time,
                    i,
                    r.state.x,
                    r.state.y,
                    r.state.theta,
                    r.state.v,
                    r.state.omega,
                    r.u.a,
                    r.u.alpha,
                    r.feasible as u8,
                    r.objective.map_or(String::new(), |v| v.to_string()),
                    r.assignment.clone().unwrap_or_default(),
                    r.min_h.map_or(String::new(), |v| v.to_string()),
                    r.delta[0],
                    r.delta[1],
                    r.delta[2],
                    r.delta[3],
                    r.solve_seconds * 1e3,
                    r.margin_breaches,
                    rec.min_clearance,
                );
            }
        }
        out
    }

    /// Obstacle rows: one line per (step, obstacle).
    pub fn obstacles_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("step,time,obstacle,x,y,vx,vy,ax,ay,radius\n");
        for rec in &self.steps {
            for (j, o) in rec.obstacles.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    rec.step,
                    rec.time,
                    j,
                    o.position.x,
                    o.position.y,
                    o.velocity.x,
                    o.velocity.y,
                    o.acceleration.x,
                    o.acceleration.y,
                    o.radius,
                );
            }
        }
        out
    }

    /// Median per-step solve time of one robot, in seconds.
    pub fn median_solve_seconds(&self, robot: usize) -> f64 {
        let mut times: Vec<f64> = self
            .steps
            .iter()
            .filter_map(|s| s.robots.get(robot).map(|r| r.solve_seconds))
            .collect();
        if times.is_empty() {
            return 0.0;
        }
        times.sort_by(f64::total_cmp);
        times[times.len() / 2]
    }

    pub fn mean_solve_seconds(&self, robot: usize) -> f64 {
        let times: Vec<f64> = self
            .steps
            .iter()
            .filter_map(|s| s.robots.get(robot).map(|r| r.solve_seconds))
            .collect();
        if times.is_empty() {
            return 0.0;
        }
        times.iter().sum::<f64>() / times.len() as f64
    }

    /// Copy with solve timings zeroed: everything else in a run is
    /// deterministic given the configuration, timing is wall-clock
    /// measurement.
    pub fn without_timings(&self) -> TrajectoryLog {
        let mut log = self.clone();
        for step in log.steps.iter_mut() {
            for r in step.robots.iter_mut() {
                r.solve_seconds = 0.0;
            }
        }
        log
    }

    /// Smallest clearance seen in any logged step.
    pub fn min_clearance(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.min_clearance)
            .fold(f64::INFINITY, f64::min)
    }
}

impl OutcomeKind {
    pub fn label(self) -> &'static str {
        match self {
            OutcomeKind::Completed => "completed",
            OutcomeKind::Deadlock => "deadlock",
            OutcomeKind::Collision => "collision",
            OutcomeKind::Timeout => "timeout",
        }
    }
}

/// Key/value summary document for one run.
pub fn summary_text(outcomes: &[RobotOutcome], log: &TrajectoryLog) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "robots {}", outcomes.len());
    let _ = writeln!(out, "steps {}", log.steps.len());
    for (i, o) in outcomes.iter().enumerate() {
        let _ = writeln!(out, "robot {} outcome {}", i, o.kind.label());
        if let Some(t) = o.reach_time {
            let _ = writeln!(out, "robot {} reach_time {}", i, t);
        }
        if o.min_clearance.is_finite() {
            let _ = writeln!(out, "robot {} min_clearance {}", i, o.min_clearance);
        }
        let _ = writeln!(out, "robot {} infeasible_steps {}", i, o.infeasible_steps);
        let _ = writeln!(out, "robot {} margin_breach_steps {}", i, o.margin_breach_steps);
    }
    out
}
