//! Navigation and collision avoidance for acceleration-controlled unicycle robots.
//!
//! The controller keeps a robot safe by constraining its linear and angular
//! accelerations with control barrier functions built in velocity space: each
//! robot/obstacle pair induces a velocity-obstacle cone, and the two cone
//! half-spaces yield a pair of barrier functions of relative degree one. At
//! least one of the pair must stay non-negative, which turns the pointwise
//! CLF-CBF program into a disjunctive problem. Three solution pipelines are
//! provided:
//!
//! * [`controller::Method::Miqp`] — big-M mixed-integer QP solved by branch
//!   and bound,
//! * [`controller::Method::SubQps`] — enumeration of the `3^M` sub-QPs with an
//!   LP feasibility prescreen,
//! * [`controller::Method::DecNetQp`] — a small decision network picks the
//!   pass side per obstacle so a single QP remains.
//!
//! Distance-based high-order CBFs ([`controller::Method::Hocbf`]) and a
//! sampling velocity-obstacle controller ([`controller::Method::ClassicVo`])
//! are included as baselines. The [`sim`] module runs closed-loop scenarios,
//! batch evaluations and multi-robot circle exchanges.

pub mod affine;
pub mod cbf;
pub mod clf;
pub mod controller;
pub mod decision;
pub mod dynamics;
pub mod sim;
pub mod solver;

/// 2-D vector in world or robot-local coordinates.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 matrix (rotations, cost weights).
pub type Mat2 = nalgebra::Matrix2<f64>;
