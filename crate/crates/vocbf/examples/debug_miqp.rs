use rand::Rng;
use vocbf::affine::AffineRow;
use vocbf::cbf::{state_limit_rows, vocbf_rows, CbfParams};
use vocbf::clf::{clf_rows, ClfGains, GoalSpec};
use vocbf::controller::ControllerParams;
use vocbf::dynamics::{center_position, Limits, RobotGeometry};
use vocbf::solver::{enumerate_subqps, solve_miqp, QpProblem};
use vocbf::Vec2;

fn random_state(rng: &mut rand_chacha::ChaCha8Rng) -> vocbf::dynamics::RobotState {
    vocbf::dynamics::RobotState::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(0.0..4.0),
        rng.random_range(-0.5..0.5),
    )
}
fn random_input(rng: &mut rand_chacha::ChaCha8Rng) -> vocbf::dynamics::ControlInput {
    vocbf::dynamics::ControlInput::new(rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6))
}
fn random_obstacle(rng: &mut rand_chacha::ChaCha8Rng, center: Vec2, min_gap: f64) -> vocbf::dynamics::ObstacleState {
    let radius = rng.random_range(0.1..1.5);
    let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let r_sum_max = 0.45 + radius;
    let dist = r_sum_max + min_gap + rng.random_range(0.0..8.0);
    vocbf::dynamics::ObstacleState {
        position: center + dist * Vec2::new(dir.cos(), dir.sin()),
        velocity: Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        acceleration: if rng.random_bool(0.5) {
            Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
        } else {
            Vec2::zeros()
        },
        radius,
    }
}

fn controller_instance(
    rng: &mut rand_chacha::ChaCha8Rng,
    m: usize,
) -> Option<(QpProblem, Vec<[AffineRow; 2]>)> {
    let geom = RobotGeometry::default();
    let gains = ClfGains::default();
    let limits = Limits::default();
    let cbf = CbfParams::default();
    let params = ControllerParams::default();
    let s = random_state(rng);
    let goal = GoalSpec {
        center: Vec2::new(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0)),
        heading: 0.0,
    };
    let mut rows = clf_rows(&s, &geom, &goal, &gains, &limits);
    rows.extend(state_limit_rows(&s, &limits, &cbf));
    let center = center_position(&s, &geom);
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let o = random_obstacle(rng, center, 0.05);
        let (pair, _) = vocbf_rows(&s, &geom, &o, &cbf).ok()?;
        pairs.push(pair);
    }
    let u_pre = random_input(rng);
    let problem = QpProblem::new(
        params.weights, u_pre, rows,
        [-limits.a_max, -limits.alpha_max],
        [limits.a_max, limits.alpha_max],
        [limits.delta_a_max * params.dt, limits.delta_alpha_max * params.dt],
    ).unwrap();
    Some((problem, pairs))
}

fn main() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(401);
    for case in 0..3000 {
        let m = rng.random_range(1..=3usize);
        let Some((problem, pairs)) = controller_instance(&mut rng, m) else { continue };
        let mi = solve_miqp(&problem, &pairs, None).unwrap();
        let en = enumerate_subqps(&problem, &pairs, true).unwrap();
        // also stress an extreme explicit big-M
        let mi_big = solve_miqp(&problem, &pairs, Some(1e6)).unwrap();
        let big_mismatch = match (&mi_big.best, &en.best) {
            (Some((ms, _)), Some((es, _))) => (ms.objective - es.objective).abs() > 1e-6 * (1.0 + es.objective.abs()),
            (None, None) => false,
            _ => true,
        };
        if big_mismatch {
            println!("case {case} m={m} BIG-M 1e6 mismatch: {:?} vs {:?}", mi_big.best.as_ref().map(|b| b.0.objective), en.best.as_ref().map(|b| b.0.objective));
        }
        let mismatch = match (&mi.best, &en.best) {
            (Some((ms, _)), Some((es, _))) => (ms.objective - es.objective).abs() > 1e-6 * (1.0 + es.objective.abs()),
            (None, None) => false,
            _ => true,
        };
        if mismatch {
            println!("case {case} m={m}: miqp {:?} enum {:?}", mi.best.as_ref().map(|b| b.0.objective), en.best.as_ref().map(|b| b.0.objective));
            println!("nodes_solved {}", mi.nodes_solved);
            // sensitivity to big-M
            for g in [1e2, 1e3, 1e4, 1e5, 1e6] {
                let r = solve_miqp(&problem, &pairs, Some(g)).unwrap();
                println!("  big_m {:>9.0}: {:?} nodes {}", g, r.best.as_ref().map(|b| b.0.objective), r.nodes_solved);
            }
            println!("pairs:");
            for p in &pairs { println!("  L {:?}", p[0]); println!("  R {:?}", p[1]); }
            println!("rows:");
            for r in &problem.rows { println!("  {r:?}"); }
            println!("u_pre {:?} box {:?}", problem.u_pre, problem.control_box());
            return;
        }
    }
    println!("no default-G mismatch in 3000 cases");
}
