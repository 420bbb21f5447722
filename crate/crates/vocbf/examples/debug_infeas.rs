use vocbf::cbf::{state_limit_rows, vocbf_rows, CbfParams};
use vocbf::clf::{clf_rows, ClfGains, GoalSpec};
use vocbf::controller::ControllerParams;
use vocbf::dynamics::{ControlInput, Limits, ObstacleState, RobotGeometry, RobotState};
use vocbf::solver::*;
use vocbf::Vec2;

fn main() {
    let geom = RobotGeometry::default();
    let gains = ClfGains::default();
    let limits = Limits::default();
    let cbf = CbfParams::default();
    let params = ControllerParams::default();
    let s = RobotState::new(0.0, 0.0, 0.0, 1.0, 0.0);
    let goal = GoalSpec { center: Vec2::new(12.0, 0.0), heading: 0.0 };
    let o = ObstacleState::moving(Vec2::new(5.0, 0.35), Vec2::new(0.0, 0.0), 0.5);

    let mut rows = clf_rows(&s, &geom, &goal, &gains, &limits);
    rows.extend(state_limit_rows(&s, &limits, &cbf));
    for r in &rows { println!("base row: {r:?}"); }
    let (pair, h) = vocbf_rows(&s, &geom, &o, &cbf).unwrap();
    println!("h = {h:?}");
    println!("left  row: {:?}", pair[0]);
    println!("right row: {:?}", pair[1]);

    let problem = QpProblem::new(
        params.weights, ControlInput::ZERO, rows,
        [-limits.a_max, -limits.alpha_max],
        [limits.a_max, limits.alpha_max],
        [limits.delta_a_max * params.dt, limits.delta_alpha_max * params.dt],
    ).unwrap();
    println!("box: {:?}", problem.control_box());

    for (name, d) in [("L", Direction::Left), ("R", Direction::Right), ("B", Direction::Backward)] {
        let a = DirectionAssignment(vec![d]);
        let mut hard: Vec<_> = problem.rows.iter().filter(|r| r.is_hard()).cloned().collect();
        hard.extend(a.selected_rows(std::slice::from_ref(&pair)).cloned());
        let (lo, hi) = problem.control_box();
        let lp = lp_feasible(&hard, lo, hi);
        let sol = solve_assignment(&problem, std::slice::from_ref(&pair), &a);
        println!("{name}: lp={lp} sol={:?}", sol.optimal().map(|s| (s.u, s.objective)));
    }
}
