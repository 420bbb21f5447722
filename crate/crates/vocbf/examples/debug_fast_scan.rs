use vocbf::controller::Method;
use vocbf::sim::*;

fn scene3(stat: [f64; 2], ob2: [f64; 2], vel: f64, r2: f64) -> ScenarioConfig {
    ScenarioConfig {
        method: Method::SubQps,
        robots: vec![RobotConfig {
            start: [0.0, 4.0, 0.0],
            goal: [12.0, 4.0, 0.0],
            radius: 0.3,
            l: 0.15,
            limits: None,
        }],
        obstacles: vec![
            ObstacleConfig { position: stat, velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.8 },
            ObstacleConfig { position: ob2, velocity: [vel, 0.0], acceleration: [0.0, 0.0], radius: r2 },
        ],
        params: SimParams::default(),
    }
}

fn run(cfg: &ScenarioConfig, m: Method) -> (String, Option<f64>, usize) {
    let mut c = cfg.clone();
    c.method = m;
    let r = run_scenario(&c, None).unwrap();
    let o = &r.outcomes[0];
    (o.kind.label().to_string(), o.reach_time, o.infeasible_steps)
}

fn main() {
    for r2 in [0.6, 0.8] {
        for x in [15.5, 16.0, 16.5] {
            for y in [3.9, 4.1, 4.3] {
                let sy = 3.4;
                let fast = scene3([8.0, sy], [x, y], -0.6, r2);
                let (q_kind, q_reach, _) = run(&fast, Method::SubQps);
                let (h_kind, _, h_inf) = run(&fast, Method::Hocbf);
                let slow = scene3([8.0, sy], [x, y], -0.05, r2);
                let (qs_kind, qs_reach, _) = run(&slow, Method::SubQps);
                let (hs_kind, hs_reach, _) = run(&slow, Method::Hocbf);
                let good_fast = q_kind == "completed" && h_kind != "completed";
                let good_slow = qs_kind == "completed"
                    && hs_kind == "completed"
                    && qs_reach.unwrap_or(99.0) < hs_reach.unwrap_or(0.0);
                println!(
                    "r2=({:3.1}) ob2=({x:4.1},{y:3.1}) fast: qps={q_kind:<9}({:5.2}) hocbf={h_kind:<9}(inf {h_inf:3}) | slow: qps={qs_kind:<9}({:5.2}) hocbf={hs_kind:<9}({:5.2}) {}{}",
                    r2,
                    q_reach.unwrap_or(-1.0),
                    qs_reach.unwrap_or(-1.0),
                    hs_reach.unwrap_or(-1.0),
                    if good_fast { "FAST-OK " } else { "" },
                    if good_slow { "SLOW-OK" } else { "" },
                );
            }
        }
    }
}
