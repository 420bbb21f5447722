use vocbf::controller::Method;
use vocbf::sim::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let method: Method = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(Method::SubQps);
    let cfg = ScenarioConfig {
        method,
        robots: vec![RobotConfig {
            start: [0.0, 4.0, 0.0],
            goal: [12.0, 4.0, 0.0],
            radius: 0.3,
            l: 0.15,
            limits: None,
        }],
        obstacles: vec![
            ObstacleConfig { position: [5.0, 4.5], velocity: [0.0, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
            ObstacleConfig { position: [10.0, 4.0], velocity: [-0.6, 0.0], acceleration: [0.0, 0.0], radius: 0.5 },
        ],
        params: SimParams::default(),
    };
    let r = run_scenario(&cfg, None).unwrap();
    println!("outcome {:?}", r.outcomes[0]);
    for rec in r.log.steps.iter().step_by(4) {
        let rb = &rec.robots[0];
        println!(
            "t={:5.2} x={:5.2} y={:5.2} th={:+5.2} v={:4.2} w={:+5.2} | a={:+5.2} al={:+5.2} feas={} brch={} minh={:+7.3} clr={:+6.3} asg={}",
            rec.time, rb.state.x, rb.state.y, rb.state.theta, rb.state.v, rb.state.omega,
            rb.u.a, rb.u.alpha, rb.feasible as u8, rb.margin_breaches,
            rb.min_h.unwrap_or(f64::NAN), rec.min_clearance,
            rb.assignment.clone().unwrap_or("-".into())
        );
    }
}
