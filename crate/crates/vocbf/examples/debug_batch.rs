use vocbf::controller::{Method, RecoveryPolicy};
use vocbf::sim::*;

fn main() {
    let n = 60;
    for recovery in [RecoveryPolicy::LeastViolation, RecoveryPolicy::Braking] {
        for method in [Method::SubQps, Method::Hocbf] {
            let params = SimParams { recovery, ..SimParams::default() };
            let t0 = std::time::Instant::now();
            let res = run_batch(n, 7, method, &params, &BatchRanges::default(), None).unwrap();
            let m = &res.metrics;
            println!(
                "{:?} {:<6}: completed {} deadlock {} collision {} timeout {} infeasible {}  ({:.1}s)",
                recovery, method.label(), m.completed, m.deadlock, m.collision, m.timeout, m.infeasible,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
