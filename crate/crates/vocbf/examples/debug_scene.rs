use vocbf::sim::*;
use vocbf::controller::Method;

fn main() {
    let cfg = ScenarioConfig {
        method: Method::SubQps,
        robots: vec![RobotConfig {
            start: [0.0, 0.0, 0.0],
            goal: [10.0, 0.0, 0.0],
            radius: 0.3,
            l: 0.15,
            limits: None,
        }],
        obstacles: vec![ObstacleConfig {
            position: [10.15, 0.0],
            velocity: [0.0, 0.0],
            acceleration: [0.0, 0.0],
            radius: 2.0,
        }],
        params: SimParams { t_max: 20.0, ..SimParams::default() },
    };
    let result = run_scenario(&cfg, None).unwrap();
    println!("outcome: {:?}", result.outcomes[0]);
    for rec in result.log.steps.iter().step_by(10) {
        let r = &rec.robots[0];
        println!(
            "t={:5.2} x={:6.2} y={:6.2} th={:5.2} v={:5.2} w={:5.2} a={:6.2} al={:6.2} feas={} minh={:?} clr={:6.3} asg={:?}",
            rec.time, r.state.x, r.state.y, r.state.theta, r.state.v, r.state.omega,
            r.u.a, r.u.alpha, r.feasible as u8, r.min_h, rec.min_clearance, r.assignment
        );
    }
    let last = result.log.steps.last().unwrap();
    let r = &last.robots[0];
    println!("last: t={:.2} v={:.2} clr={:.3} feas={}", last.time, r.state.v, last.min_clearance, r.feasible as u8);
}
