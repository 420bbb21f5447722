//! Gradient checking of the decision network's backprop against central
//! finite differences, parameter by parameter, plus oracle-label sanity on
//! constructed scenes.

mod common;

use common::*;
use vocbf::clf::GoalSpec;
use vocbf::controller::ControllerParams;
use vocbf::decision::{
    batch_loss, flat_grads, flat_params_mut, loss_and_grads, oracle_label, DecisionNet,
    LabeledSample,
};
use vocbf::dynamics::{ControlInput, ObstacleState, RobotState};
use vocbf::solver::Direction;
use vocbf::Vec2;

fn check_samples() -> Vec<LabeledSample> {
    vec![
        LabeledSample {
            target: [2.0, 0.5, 2.06],
            obstacles: vec![[1.0, 0.4, -0.5, 0.0, 0.8], [2.0, -1.0, 0.0, 0.3, 1.2]],
            labels: vec![Direction::Left, Direction::Right],
        },
        LabeledSample {
            target: [1.5, -0.5, 1.58],
            obstacles: vec![[0.8, -0.6, 0.2, 0.1, 0.9], [1.4, 1.2, -0.2, -0.4, 1.0]],
            labels: vec![Direction::Backward, Direction::Left],
        },
        LabeledSample {
            target: [-1.0, 2.0, 2.24],
            obstacles: vec![[0.5, 1.5, 0.3, -0.2, 1.1]],
            labels: vec![Direction::Right],
        },
    ]
}

#[test]
fn analytic_gradients_match_finite_differences_everywhere() {
    let samples = check_samples();
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut net = DecisionNet::with_hidden(6, 12345);
    let (_, grads) = loss_and_grads(&net, &samples, &idx).unwrap();
    let flat = flat_grads(&grads);
    let n_params = flat.len();

    let eps = 1e-6;
    let mut worst_rel: f64 = 0.0;
    for k in 0..n_params {
        let orig = *flat_params_mut(&mut net)[k];
        *flat_params_mut(&mut net)[k] = orig + eps;
        let up = batch_loss(&net, &samples);
        *flat_params_mut(&mut net)[k] = orig - eps;
        let dn = batch_loss(&net, &samples);
        *flat_params_mut(&mut net)[k] = orig;
        let fd = (up - dn) / (2.0 * eps);
        let denom = fd.abs().max(flat[k].abs()).max(1e-8);
        let rel = (fd - flat[k]).abs() / denom;
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 1e-4,
            "parameter {k}: analytic {} vs fd {fd} (rel {rel})",
            flat[k]
        );
    }
    // should be far below the tolerance in practice
    assert!(worst_rel < 1e-4, "worst relative error {worst_rel}");
}

#[test]
fn oracle_prefers_left_on_inactive_tie() {
    // obstacle far behind, goal ahead: both cone rows inactive, so the
    // lexicographic tie-break picks the first assignment
    let params = ControllerParams::default();
    let geom = vocbf::dynamics::RobotGeometry::default();
    let s = RobotState::new(0.0, 0.0, 0.0, 1.0, 0.0);
    let goal = GoalSpec {
        center: Vec2::new(6.0, 0.0),
        heading: 0.0,
    };
    let behind = ObstacleState::at_rest(Vec2::new(-5.0, 0.0), 0.4);
    let label = oracle_label(&s, &geom, &goal, &[behind], &[], &params, ControlInput::ZERO)
        .unwrap()
        .expect("feasible");
    assert_eq!(label.0, vec![Direction::Left]);
}

#[test]
fn oracle_dodges_right_of_obstacle_left_of_line() {
    // obstacle slightly left of the robot-goal line, closing head-on: the
    // cheaper dodge passes on its right (and mirrored for the other side)
    let params = ControllerParams::default();
    let geom = vocbf::dynamics::RobotGeometry::default();
    let s = RobotState::new(0.0, 0.0, 0.0, 0.3, 0.0);
    let goal = GoalSpec {
        center: Vec2::new(12.0, 0.0),
        heading: 0.0,
    };
    let left_of_line = ObstacleState::moving(Vec2::new(6.0, 0.35), Vec2::new(-0.2, 0.0), 0.5);
    let label = oracle_label(&s, &geom, &goal, &[left_of_line], &[], &params, ControlInput::ZERO)
        .unwrap()
        .expect("feasible");
    assert_eq!(label.0, vec![Direction::Right]);

    let right_of_line = ObstacleState::moving(Vec2::new(6.0, -0.35), Vec2::new(-0.2, 0.0), 0.5);
    let label = oracle_label(&s, &geom, &goal, &[right_of_line], &[], &params, ControlInput::ZERO)
        .unwrap()
        .expect("feasible");
    assert_eq!(label.0, vec![Direction::Left]);
}

#[test]
fn oracle_assignment_length_matches_entities() {
    let params = ControllerParams::default();
    let geom = vocbf::dynamics::RobotGeometry::default();
    let s = RobotState::new(0.0, 0.0, 0.0, 1.0, 0.0);
    let goal = GoalSpec {
        center: Vec2::new(10.0, 0.0),
        heading: 0.0,
    };
    let obstacles = [
        ObstacleState::at_rest(Vec2::new(4.0, 1.0), 0.5),
        ObstacleState::at_rest(Vec2::new(6.0, -1.0), 0.6),
    ];
    let label = oracle_label(&s, &geom, &goal, &obstacles, &[], &params, ControlInput::ZERO)
        .unwrap()
        .expect("feasible");
    assert_eq!(label.0.len(), 2);
}

#[test]
fn trained_net_tracks_oracle_on_small_data() {
    let mut rng = rng(77);
    let _ = &mut rng;
    let cfg = vocbf::decision::DatasetGenConfig {
        n_scenarios: 60,
        seed: 9,
        ..Default::default()
    };
    let data = vocbf::decision::gen_dataset(&cfg);
    assert!(data.len() >= 60, "dataset too small: {}", data.len());
    let mut net = DecisionNet::with_hidden(32, 4);
    let report = vocbf::decision::train(
        &mut net,
        &data,
        &vocbf::decision::TrainConfig {
            epochs: 120,
            lr: 3e-3,
            ..Default::default()
        },
    )
    .unwrap();
    let baseline = (3.0f64).ln();
    let last = *report.loss_history.last().unwrap();
    assert!(
        last <= 0.5 * baseline,
        "training loss {last} did not halve the uniform baseline {baseline}"
    );
}
