//! Shared helpers for the oracle test suites: random state sampling, joint
//! robot/obstacle finite differencing, and an exhaustive KKT-enumeration QP
//! oracle kept independent of the solver under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vocbf::affine::{AffineRow, Sense};
use vocbf::dynamics::{wrap_angle, ControlInput, ObstacleState, RobotState};
use vocbf::solver::{QpProblem, QpWeights};
use vocbf::{Mat2, Vec2};

pub fn rng(seed: u64) -> ChaCha8Rng {
    <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed)
}

pub fn random_state(rng: &mut ChaCha8Rng) -> RobotState {
    RobotState::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(0.0..4.0),
        rng.random_range(-0.5..0.5),
    )
}

pub fn random_input(rng: &mut ChaCha8Rng) -> ControlInput {
    ControlInput::new(rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6))
}

/// Obstacle at a random direction/distance from the given center, optionally
/// accelerating.
pub fn random_obstacle(rng: &mut ChaCha8Rng, center: Vec2, min_gap: f64) -> ObstacleState {
    let radius = rng.random_range(0.1..1.5);
    let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let r_sum_max = 0.45 + radius; // default robot geometry
    let dist = r_sum_max + min_gap + rng.random_range(0.0..8.0);
    ObstacleState {
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

/// Euler step that also accepts negative dt (for central differences).
pub fn euler_robot(s: &RobotState, u: &ControlInput, dt: f64) -> RobotState {
    let (sin_t, cos_t) = s.theta.sin_cos();
    RobotState {
        x: s.x + dt * s.v * cos_t,
        y: s.y + dt * s.v * sin_t,
        theta: wrap_angle(s.theta + dt * s.omega),
        v: s.v + dt * u.a,
        omega: s.omega + dt * u.alpha,
    }
}

pub fn euler_obstacle(o: &ObstacleState, dt: f64) -> ObstacleState {
    ObstacleState {
        position: o.position + dt * o.velocity,
        velocity: o.velocity + dt * o.acceleration,
        acceleration: o.acceleration,
        radius: o.radius,
    }
}

/// Central difference of a scalar function along the joint robot/obstacle
/// flow under input `u`.
pub fn central_diff(
    s: &RobotState,
    u: &ControlInput,
    o: &ObstacleState,
    eps: f64,
    f: impl Fn(&RobotState, &ObstacleState) -> f64,
) -> f64 {
    let sp = euler_robot(s, u, eps);
    let sm = euler_robot(s, u, -eps);
    let op = euler_obstacle(o, eps);
    let om = euler_obstacle(o, -eps);
    (f(&sp, &op) - f(&sm, &om)) / (2.0 * eps)
}

/// `|a - b| <= floor + rel * max(|a|, |b|)`
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= floor + rel * a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// Exhaustive active-set oracle for the per-step QP
// ---------------------------------------------------------------------------

/// Normalized `a . z >= b` rows of a problem, including the control box; this
/// mirrors the problem definition, not the solver's path.
pub fn oracle_rows(p: &QpProblem) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut normals = Vec::new();
    let mut rhs = Vec::new();
    let (lo, hi) = p.control_box();
    for i in 0..2 {
        let mut up = vec![0.0; 6];
        up[i] = 1.0;
        normals.push(up);
        rhs.push(lo[i]);
        let mut dn = vec![0.0; 6];
        dn[i] = -1.0;
        normals.push(dn);
        rhs.push(-hi[i]);
    }
    for row in &p.rows {
        let (a, b) = row.as_geq();
        normals.push(a.to_vec());
        rhs.push(b);
    }
    (normals, rhs)
}

fn objective_matrices(p: &QpProblem) -> (DMatrix<f64>, Vec<f64>) {
    let mut g = DMatrix::zeros(6, 6);
    let hr = p.weights.h + p.weights.r;
    g[(0, 0)] = hr.m11;
    g[(0, 1)] = hr.m12;
    g[(1, 0)] = hr.m21;
    g[(1, 1)] = hr.m22;
    for i in 0..4 {
        g[(2 + i, 2 + i)] = 2.0 * p.weights.p[i];
    }
    let ru = p.weights.r * Vec2::new(p.u_pre.a, p.u_pre.alpha);
    let mut c = vec![0.0; 6];
    c[0] = -ru.x;
    c[1] = -ru.y;
    (g, c)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal { z: Vec<f64>, objective: f64 },
    Infeasible,
}

/// Brute force: try every active subset of rows (size <= 6), solve the KKT
/// equality system, and keep the best candidate that is primal feasible with
/// nonnegative duals.
pub fn brute_force_qp(p: &QpProblem) -> OracleOutcome {
    let (normals, rhs) = oracle_rows(p);
    let (g, c) = objective_matrices(p);
    let n = 6usize;
    let q = rhs.len();
    let feas_tol = 1e-7;
    let dual_tol = -1e-7;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = Vec::new();

    fn visit(
        start: usize,
        subset: &mut Vec<usize>,
        q: usize,
        n: usize,
        check: &mut dyn FnMut(&[usize]),
    ) {
        check(subset);
        if subset.len() == n {
            return;
        }
        for i in start..q {
            subset.push(i);
            visit(i + 1, subset, q, n, check);
            subset.pop();
        }
    }

    let mut check = |active: &[usize]| {
        let m = active.len();
        let dim = n + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&g);
        for (k, &i) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + k)] = -normals[i][j];
                kkt[(n + k, j)] = normals[i][j];
            }
        }
        let mut b = DMatrix::zeros(dim, 1);
        for j in 0..n {
            b[(j, 0)] = -c[j];
        }
        for (k, &i) in active.iter().enumerate() {
            b[(n + k, 0)] = rhs[i];
        }
        let lu = kkt.lu();
        let Some(sol) = lu.solve(&b) else { return };
        let z: Vec<f64> = (0..n).map(|j| sol[(j, 0)]).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return;
        }
        // dual feasibility on the active set
        for k in 0..m {
            if sol[(n + k, 0)] < dual_tol {
                return;
            }
        }
        // primal feasibility everywhere
        for i in 0..q {
            let lhs: f64 = normals[i].iter().zip(&z).map(|(a, x)| a * x).sum();
            if lhs < rhs[i] - feas_tol {
                return;
            }
        }
        let mut obj = 0.0;
        for i in 0..n {
            for j in 0..n {
                obj += 0.5 * z[i] * g[(i, j)] * z[j];
            }
            obj += c[i] * z[i];
        }
        if best.as_ref().map_or(true, |(b0, _)| obj < *b0) {
            best = Some((obj, z));
        }
    };
    visit(0, &mut subset, q, n, &mut check);

    match best {
        Some((objective, z)) => OracleOutcome::Optimal { z, objective },
        None => OracleOutcome::Infeasible,
    }
}

/// Dense grid search over the control box checking the hard rows only; used
/// to confirm infeasibility claims. Returns true when some grid point
/// strictly satisfies every hard row.
pub fn grid_has_feasible_point(p: &QpProblem, extra: &[AffineRow], steps: usize) -> bool {
    let (lo, hi) = p.control_box();
    let hard: Vec<&AffineRow> = p
        .rows
        .iter()
        .chain(extra.iter())
        .filter(|r| r.is_hard())
        .collect();
    for i in 0..=steps {
        let a = lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64;
        for j in 0..=steps {
            let al = lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64;
            let u = Vec2::new(a, al);
            let ok = hard.iter().all(|row| {
                let v = row.eval(u, &[0.0; 4]);
                match row.sense {
                    Sense::GeqZero => v > 1e-9,
                    Sense::LeqZero => v < -1e-9,
                }
            });
            if ok {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Random problem generators
// ---------------------------------------------------------------------------

pub fn random_weights(rng: &mut ChaCha8Rng) -> QpWeights {
    let a = Mat2::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let h = a * a.transpose() + Mat2::identity() * rng.random_range(0.2..1.5);
    let r = if rng.random_bool(0.3) {
        Mat2::zeros()
    } else {
        let b = Mat2::new(
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
        );
        b * b.transpose()
    };
    QpWeights {
        h,
        r,
        p: [
            rng.random_range(0.5..100.0),
            rng.random_range(0.5..100.0),
            rng.random_range(0.5..100.0),
            rng.random_range(0.5..100.0),
        ],
    }
}

pub fn random_row(rng: &mut ChaCha8Rng) -> AffineRow {
    let coeff = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    let constant = rng.random_range(-1.5..1.5);
    if rng.random_bool(0.35) {
        let slot = match rng.random_range(0..4) {
            0 => vocbf::affine::RelaxSlot::Distance,
            1 => vocbf::affine::RelaxSlot::Heading,
            2 => vocbf::affine::RelaxSlot::Speed,
            _ => vocbf::affine::RelaxSlot::TurnRate,
        };
        AffineRow::relaxed(coeff, constant, slot)
    } else {
        AffineRow::barrier(coeff, constant)
    }
}

pub fn random_problem(rng: &mut ChaCha8Rng, max_rows: usize) -> QpProblem {
    let n_rows = rng.random_range(0..=max_rows);
    let rows = (0..n_rows).map(|_| random_row(rng)).collect();
    let u_pre = ControlInput::new(rng.random_range(-0.8..0.8), rng.random_range(-0.5..0.5));
    QpProblem::new(
        random_weights(rng),
        u_pre,
        rows,
        [-1.0, -0.6],
        [1.0, 0.6],
        [rng.random_range(0.2..12.0), rng.random_range(0.1..12.0)],
    )
    .unwrap()
}
