use vocbf::controller::{Method, RecoveryPolicy};
use vocbf::sim::*;

fn main() {
    for recovery in [RecoveryPolicy::LeastViolation, RecoveryPolicy::Braking] {
        for n in [6, 8] {
            let params = SimParams { recovery, ..SimParams::default() };
            let t0 = std::time::Instant::now();
            let r = run_circle(n, 5.0, [7.0, 7.0], Method::SubQps, params, None).unwrap();
            let completed = r.outcomes.iter().filter(|o| o.kind == OutcomeKind::Completed).count();
            let collided = r.outcomes.iter().filter(|o| o.kind == OutcomeKind::Collision).count();
            let min_clr = r.outcomes.iter().map(|o| o.min_clearance).fold(f64::INFINITY, f64::min);
            let max_reach = r.outcomes.iter().filter_map(|o| o.reach_time).fold(0.0, f64::max);
            let infeas: usize = r.outcomes.iter().map(|o| o.infeasible_steps).sum();
            println!(
                "{recovery:?} n={n}: completed {completed}/{n} collided {collided} min_clr {min_clr:.3} last_reach {max_reach:.1}s infeas {infeas} wall {:.1}s",
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
