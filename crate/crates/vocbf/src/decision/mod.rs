//! Direction selection: robot-local features, the decision network, and the
//! oracle-labeled training pipeline.
//!
//! The network maps the states of `M` nearby obstacles plus the goal (all in
//! the robot's local frame) to three probabilities per obstacle: pass left,
//! pass right, or back away. Per-obstacle encodings are average-pooled into a
//! global context vector so the output is invariant to obstacle order; the
//! head scores each obstacle from its own encoding, the pooled context and
//! the goal features. Five weight blocks in total: two encoder layers, the
//! pooled-context layer and a two-layer head.

mod dataset;
mod net;
mod train;

pub use dataset::{
    gen_dataset, load_dataset, oracle_label, save_dataset, DatasetError, DatasetGenConfig,
    LabeledSample,
};
pub use net::{DecisionNet, Linear, NetIoError, HIDDEN_WIDTH, N_DIRECTIONS, OBSTACLE_FEATURES, TARGET_FEATURES};
pub use train::{
    batch_loss, flat_grads, flat_params_mut, loss_and_grads, train, NetGrads, TrainConfig,
    TrainError, TrainReport,
};

use crate::clf::GoalSpec;
use crate::dynamics::{center_position, center_velocity, to_local_vector, ObstacleState, RobotGeometry, RobotState};
use crate::solver::DirectionAssignment;

/// Robot-local inputs of the decision network.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFeatures {
    /// Goal: local-frame position and distance.
    pub target: [f64; TARGET_FEATURES],
    /// Per obstacle: local-frame position, local-frame relative velocity and
    /// the inflated radius sum.
    pub obstacles: Vec<[f64; OBSTACLE_FEATURES]>,
}

/// Express a world snapshot in the robot's local frame. Velocities are
/// relative (entity minus robot center velocity) so the features are
/// invariant under rigid motions of the whole scene.
pub fn extract_features(
    s: &RobotState,
    geom: &RobotGeometry,
    goal: &GoalSpec,
    entities: &[ObstacleState],
) -> DecisionFeatures {
    let center = center_position(s, geom);
    let own_vel = center_velocity(s, geom);
    let local_goal = to_local_vector(s, goal.center - center);
    let target = [local_goal.x, local_goal.y, local_goal.norm()];
    let obstacles = entities
        .iter()
        .map(|o| {
            let p = to_local_vector(s, o.position - center);
            let v = to_local_vector(s, o.velocity - own_vel);
            [p.x, p.y, v.x, v.y, geom.inflated_radius() + o.radius]
        })
        .collect();
    DecisionFeatures { target, obstacles }
}

impl DecisionNet {
    /// Argmax direction per obstacle; exact ties keep the lower index
    /// (left < right < backward).
    pub fn decide(&self, features: &DecisionFeatures) -> DirectionAssignment {
        use crate::solver::Direction;
        let probs = self.forward(features);
        let dirs = probs
            .iter()
            .map(|p| {
                let mut best = 0usize;
                for k in 1..N_DIRECTIONS {
                    if p[k] > p[best] {
                        best = k;
                    }
                }
                Direction::ALL[best]
            })
            .collect();
        DirectionAssignment(dirs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rotate;
    use crate::solver::Direction;
    use crate::Vec2;
    use approx::assert_relative_eq;

    #[test]
    fn features_are_rigid_motion_invariant() {
        let geom = RobotGeometry::default();
        let s = RobotState::new(1.0, 2.0, 0.7, 1.5, 0.2);
        let goal = GoalSpec {
            center: Vec2::new(8.0, 5.0),
            heading: 0.0,
        };
        let o = ObstacleState::moving(Vec2::new(4.0, 3.0), Vec2::new(-0.4, 0.3), 0.6);
        let f0 = extract_features(&s, &geom, &goal, &[o]);

        // rotate and translate the whole world
        let ang = 1.3;
        let shift = Vec2::new(-3.0, 7.0);
        let map = |p: Vec2| rotate(p, ang) + shift;
        let s2 = RobotState::new(
            map(s.position()).x,
            map(s.position()).y,
            s.theta + ang,
            s.v,
            s.omega,
        );
        let goal2 = GoalSpec {
            center: map(goal.center),
            heading: goal.heading + ang,
        };
        let o2 = ObstacleState::moving(map(o.position), rotate(o.velocity, ang), o.radius);
        let f1 = extract_features(&s2, &geom, &goal2, &[o2]);

        for k in 0..TARGET_FEATURES {
            assert_relative_eq!(f0.target[k], f1.target[k], epsilon = 1e-9);
        }
        for k in 0..OBSTACLE_FEATURES {
            assert_relative_eq!(f0.obstacles[0][k], f1.obstacles[0][k], epsilon = 1e-9);
        }
    }

    #[test]
    fn zeroed_net_is_uniform() {
        let net = DecisionNet::zeroed(8);
        let features = DecisionFeatures {
            target: [1.0, 2.0, 3.0],
            obstacles: vec![[1.0, 0.5, -0.2, 0.1, 0.9], [0.0, 2.0, 0.3, 0.0, 1.1]],
        };
        let probs = net.forward(&features);
        for row in probs {
            for p in row {
                assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = DecisionNet::with_hidden(16, 42);
        let features = DecisionFeatures {
            target: [3.0, -1.0, 3.2],
            obstacles: vec![[1.0, 0.5, -0.2, 0.1, 0.9], [0.2, -2.0, 0.4, 0.6, 1.4]],
        };
        for row in net.forward(&features) {
            let s: f64 = row.iter().sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let net = DecisionNet::with_hidden(16, 7);
        let a = [1.0, 0.5, -0.2, 0.1, 0.9];
        let b = [0.2, -2.0, 0.4, 0.6, 1.4];
        let c = [-1.0, 1.0, 0.0, -0.3, 1.0];
        let f_abc = DecisionFeatures {
            target: [3.0, -1.0, 3.2],
            obstacles: vec![a, b, c],
        };
        let f_cab = DecisionFeatures {
            target: [3.0, -1.0, 3.2],
            obstacles: vec![c, a, b],
        };
        let p_abc = net.forward(&f_abc);
        let p_cab = net.forward(&f_cab);
        for k in 0..3 {
            assert_relative_eq!(p_abc[0][k], p_cab[1][k], epsilon = 1e-10);
            assert_relative_eq!(p_abc[1][k], p_cab[2][k], epsilon = 1e-10);
            assert_relative_eq!(p_abc[2][k], p_cab[0][k], epsilon = 1e-10);
        }
    }

    #[test]
    fn decide_tie_break_prefers_lowest() {
        let net = DecisionNet::zeroed(8);
        let features = DecisionFeatures {
            target: [1.0, 0.0, 1.0],
            obstacles: vec![[1.0, 0.0, 0.0, 0.0, 1.0]],
        };
        let assignment = net.decide(&features);
        assert_eq!(assignment.0, vec![Direction::Left]);
    }
}
