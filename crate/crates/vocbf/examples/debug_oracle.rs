use vocbf::clf::GoalSpec;
use vocbf::controller::ControllerParams;
use vocbf::decision::oracle_label;
use vocbf::dynamics::{ControlInput, ObstacleState, RobotGeometry, RobotState};
use vocbf::Vec2;

fn main() {
    let params = ControllerParams::default();
    let geom = RobotGeometry::default();
    let goal = GoalSpec { center: Vec2::new(12.0, 0.0), heading: 0.0 };
    for v in [0.3, 0.5] {
        for offset in [-0.5, -0.35, 0.0, 0.35, 0.5] {
            for vel in [0.0, -0.1, -0.2] {
                let s = RobotState::new(0.0, 0.0, 0.0, v, 0.0);
                let o = ObstacleState::moving(Vec2::new(6.0, offset), Vec2::new(vel, 0.0), 0.5);
                let lab = oracle_label(&s, &geom, &goal, &[o], &[], &params, ControlInput::ZERO).unwrap();
                println!("v={v} offset={offset:+} ovel={vel:+}: {:?}", lab.map(|a| a.0));
            }
        }
        println!();
    }
}
