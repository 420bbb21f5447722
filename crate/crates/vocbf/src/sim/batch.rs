//! Seeded random scenario generation and batch evaluation.
//!
//! Scenes follow the standard randomized protocol: a 15 m x 15 m arena, a
//! robot with radius drawn from [0.2, 0.7] m, two moving obstacles with radii
//! in [0.1, 1.5] m and velocity components in [-1, 1] m/s, start-goal
//! distance at least 6 m, and no initial overlaps (including the goal disc).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::Method;
use crate::decision::DecisionNet;
use crate::dynamics::wrap_angle;

use super::{
    run_scenario, ObstacleConfig, OutcomeKind, RobotConfig, RobotOutcome, ScenarioConfig,
    SimError, SimParams,
};

/// Randomization ranges of the batch protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRanges {
    pub arena: [f64; 2],
    pub robot_radius: [f64; 2],
    pub obstacle_radius: [f64; 2],
    pub obstacle_speed: [f64; 2],
    pub n_obstacles: usize,
    pub min_start_goal: f64,
}

impl Default for BatchRanges {
    fn default() -> Self {
        Self {
            arena: [15.0, 15.0],
            robot_radius: [0.2, 0.7],
            obstacle_radius: [0.1, 1.5],
            obstacle_speed: [-1.0, 1.0],
            n_obstacles: 2,
            min_start_goal: 6.0,
        }
    }
}

/// One randomized scene (single robot).
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScene {
    pub robot: RobotConfig,
    pub obstacles: Vec<ObstacleConfig>,
}

/// Per-scenario seed derived from the batch seed (splitmix-style mixing).
pub fn scenario_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw one scene; `d_s` is needed to keep spawns outside the cone margin.
pub fn random_scene(rng: &mut ChaCha8Rng, ranges: &BatchRanges, d_s: f64) -> RandomScene {
    let [w, h] = ranges.arena;
    let robot_radius = rng.random_range(ranges.robot_radius[0]..=ranges.robot_radius[1]);
    let l = 0.15_f64.min(0.9 * robot_radius);

    let start = [
        rng.random_range(robot_radius..w - robot_radius),
        rng.random_range(robot_radius..h - robot_radius),
    ];
    let heading = wrap_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));

    let goal = loop {
        let g = [
            rng.random_range(robot_radius..w - robot_radius),
            rng.random_range(robot_radius..h - robot_radius),
        ];
        let d = ((g[0] - start[0]).powi(2) + (g[1] - start[1]).powi(2)).sqrt();
        if d >= ranges.min_start_goal {
            break g;
        }
    };
    let goal_heading = (goal[1] - start[1]).atan2(goal[0] - start[0]);

    let mut obstacles: Vec<ObstacleConfig> = Vec::with_capacity(ranges.n_obstacles);
    while obstacles.len() < ranges.n_obstacles {
        let radius = rng.random_range(ranges.obstacle_radius[0]..=ranges.obstacle_radius[1]);
        let pos = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
        let vel = [
            rng.random_range(ranges.obstacle_speed[0]..=ranges.obstacle_speed[1]),
            rng.random_range(ranges.obstacle_speed[0]..=ranges.obstacle_speed[1]),
        ];
        // keep spawns clear of the start (inflated, so the first cone exists)
        // and of the goal disc
        let margin = robot_radius + d_s + radius + 0.05;
        let d_start = ((pos[0] - start[0]).powi(2) + (pos[1] - start[1]).powi(2)).sqrt();
        let d_goal = ((pos[0] - goal[0]).powi(2) + (pos[1] - goal[1]).powi(2)).sqrt();
        if d_start <= margin || d_goal <= margin {
            continue;
        }
        if obstacles.iter().any(|o| {
            let d = ((pos[0] - o.position[0]).powi(2) + (pos[1] - o.position[1]).powi(2)).sqrt();
            d <= radius + o.radius
        }) {
            continue;
        }
        obstacles.push(ObstacleConfig {
            position: pos,
            velocity: vel,
            acceleration: [0.0, 0.0],
            radius,
        });
    }

    RandomScene {
        robot: RobotConfig {
            start: [start[0], start[1], heading],
            goal: [goal[0], goal[1], goal_heading],
            radius: robot_radius,
            l,
            limits: None,
        },
        obstacles,
    }
}

impl RandomScene {
    pub fn into_config(self, method: Method, params: SimParams) -> ScenarioConfig {
        ScenarioConfig {
            method,
            robots: vec![self.robot],
            obstacles: self.obstacles,
            params,
        }
    }
}

/// Metric bucket of one run. Non-completed runs that hit an infeasible step
/// are attributed to infeasibility; the buckets partition the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchBucket {
    Completed,
    Infeasible,
    Deadlock,
    Collision,
    Timeout,
}

pub fn classify(outcome: &RobotOutcome) -> BatchBucket {
    match outcome.kind {
        OutcomeKind::Completed => BatchBucket::Completed,
        _ if outcome.infeasible_steps > 0 => BatchBucket::Infeasible,
        OutcomeKind::Deadlock => BatchBucket::Deadlock,
        OutcomeKind::Collision => BatchBucket::Collision,
        OutcomeKind::Timeout => BatchBucket::Timeout,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMetrics {
    pub method: Method,
    pub seed: u64,
    pub n: usize,
    pub completed: usize,
    pub deadlock: usize,
    pub collision: usize,
    pub timeout: usize,
    pub infeasible: usize,
}

impl BatchMetrics {
    pub fn completion_rate(&self) -> f64 {
        100.0 * self.completed as f64 / self.n.max(1) as f64
    }
    pub fn deadlock_rate(&self) -> f64 {
        100.0 * self.deadlock as f64 / self.n.max(1) as f64
    }
    pub fn infeasible_rate(&self) -> f64 {
        100.0 * self.infeasible as f64 / self.n.max(1) as f64
    }
    pub fn collision_rate(&self) -> f64 {
        100.0 * self.collision as f64 / self.n.max(1) as f64
    }

    /// Deterministic text table (no timings, so identical seeds produce
    /// byte-identical files).
    pub fn table(&self) -> String {
        format!(
            "method {}\nseed {}\nscenarios {}\ncompleted {} {:.2}%\ndeadlock {} {:.2}%\n\
             collision {} {:.2}%\ntimeout {} {:.2}%\ninfeasible {} {:.2}%\n",
            self.method.label(),
            self.seed,
            self.n,
            self.completed,
            self.completion_rate(),
            self.deadlock,
            self.deadlock_rate(),
            self.collision,
            self.collision_rate(),
            self.timeout,
            100.0 * self.timeout as f64 / self.n.max(1) as f64,
            self.infeasible,
            self.infeasible_rate(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub metrics: BatchMetrics,
    /// Per-scenario outcomes, in scenario order.
    pub outcomes: Vec<(usize, BatchBucket, RobotOutcome)>,
}

impl BatchResult {
    /// Per-scenario outcomes as CSV.
    pub fn outcomes_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(
            "scenario,bucket,outcome,reach_time,min_clearance,infeasible_steps,margin_breach_steps\n",
        );
        for (i, bucket, o) in &self.outcomes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i,
                match bucket {
                    BatchBucket::Completed => "completed",
                    BatchBucket::Infeasible => "infeasible",
                    BatchBucket::Deadlock => "deadlock",
                    BatchBucket::Collision => "collision",
                    BatchBucket::Timeout => "timeout",
                },
                o.kind.label(),
                o.reach_time.map_or(String::new(), |t| t.to_string()),
                if o.min_clearance.is_finite() {
                    o.min_clearance.to_string()
                } else {
                    String::new()
                },
                o.infeasible_steps,
                o.margin_breach_steps,
            );
        }
        out
    }
}

/// Run `n` seeded random scenarios with one method.
pub fn run_batch(
    n: usize,
    seed: u64,
    method: Method,
    params: &SimParams,
    ranges: &BatchRanges,
    net: Option<&DecisionNet>,
) -> Result<BatchResult, SimError> {
    let mut outcomes = Vec::with_capacity(n);
    let mut metrics = BatchMetrics {
        method,
        seed,
        n,
        completed: 0,
        deadlock: 0,
        collision: 0,
        timeout: 0,
        infeasible: 0,
    };
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(seed, i as u64));
        let scene = random_scene(&mut rng, ranges, params.d_s);
        let cfg = scene.into_config(method, params.clone());
        let result = run_scenario(&cfg, net)?;
        let outcome = result.outcomes[0];
        let bucket = classify(&outcome);
        match bucket {
            BatchBucket::Completed => metrics.completed += 1,
            BatchBucket::Infeasible => metrics.infeasible += 1,
            BatchBucket::Deadlock => metrics.deadlock += 1,
            BatchBucket::Collision => metrics.collision += 1,
            BatchBucket::Timeout => metrics.timeout += 1,
        }
        outcomes.push((i, bucket, outcome));
    }
    Ok(BatchResult { metrics, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(scenario_seed(7, 3));
        let mut b = ChaCha8Rng::seed_from_u64(scenario_seed(7, 3));
        let ranges = BatchRanges::default();
        assert_eq!(random_scene(&mut a, &ranges, 0.15), random_scene(&mut b, &ranges, 0.15));
    }

    #[test]
    fn scenes_respect_ranges() {
        let ranges = BatchRanges::default();
        for i in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(1, i));
            let scene = random_scene(&mut rng, &ranges, 0.15);
            let r = &scene.robot;
            assert!(r.radius >= 0.2 && r.radius <= 0.7);
            let d = ((r.goal[0] - r.start[0]).powi(2) + (r.goal[1] - r.start[1]).powi(2)).sqrt();
            assert!(d >= 6.0);
            assert_eq!(scene.obstacles.len(), 2);
            for o in &scene.obstacles {
                assert!(o.radius >= 0.1 && o.radius <= 1.5);
                assert!(o.velocity[0].abs() <= 1.0 && o.velocity[1].abs() <= 1.0);
            }
            // valid as a scenario config
            scene
                .into_config(Method::SubQps, SimParams::default())
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn buckets_partition() {
        let params = SimParams {
            t_max: 15.0,
            ..SimParams::default()
        };
        let res = run_batch(6, 11, Method::SubQps, &params, &BatchRanges::default(), None).unwrap();
        let m = &res.metrics;
        assert_eq!(
            m.completed + m.deadlock + m.collision + m.timeout + m.infeasible,
            m.n
        );
        assert_eq!(res.outcomes.len(), m.n);
    }
}
