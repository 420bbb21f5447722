use vocbf::controller::Method;
use vocbf::sim::*;

fn scene(obstacles: Vec<ObstacleConfig>) -> ScenarioConfig {
    let angle = (6.0f64).atan2(12.0);
    ScenarioConfig {
        method: Method::SubQps,
        robots: vec![RobotConfig {
            start: [0.0, 4.0, angle],
            goal: [12.0, 10.0, angle],
            radius: 0.3,
            l: 0.15,
            limits: None,
        }],
        obstacles,
        params: SimParams::default(),
    }
}

fn report(name: &str, cfg: &ScenarioConfig) {
    for m in [Method::Miqp, Method::SubQps, Method::Hocbf, Method::ClassicVo] {
        let mut c = cfg.clone();
        c.method = m;
        let t0 = std::time::Instant::now();
        let r = run_scenario(&c, None).unwrap();
        let o = &r.outcomes[0];
        println!(
            "{name:<14} {:<6} -> {:<9} reach={:<6} minclr={:+.3} infeas={} breach={} wall={:.2}s",
            m.label(),
            o.kind.label(),
            o.reach_time.map_or("-".into(), |t| format!("{t:.2}")),
            o.min_clearance,
            o.infeasible_steps,
            o.margin_breach_steps,
            t0.elapsed().as_secs_f64(),
        );
    }
    println!();
}

fn main() {
    let fig_static = scene(vec![
        ObstacleConfig { position: [4.0, 6.0], velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
        ObstacleConfig { position: [8.0, 8.0], velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
    ]);
    report("fig-static", &fig_static);

    let fig_dynamic = scene(vec![
        ObstacleConfig { position: [8.0, 6.0], velocity: [-0.5, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
        ObstacleConfig { position: [13.0, 9.0], velocity: [-0.5, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
    ]);
    report("fig-dynamic", &fig_dynamic);

    let slow = scene(vec![
        ObstacleConfig { position: [5.0, 6.3], velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
        ObstacleConfig { position: [11.0, 8.5], velocity: [-0.05, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
    ]);
    report("tablev-slow", &slow);

    let fast = scene(vec![
        ObstacleConfig { position: [5.0, 6.3], velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
        ObstacleConfig { position: [11.0, 8.5], velocity: [-0.6, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
    ]);
    report("tablev-fast", &fast);
}
