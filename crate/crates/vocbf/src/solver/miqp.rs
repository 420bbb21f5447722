//! Big-M mixed-integer formulation of the disjunctive program, solved by
//! best-first branch and bound on QP relaxations.
//!
//! Each obstacle pair gets binaries `z_1, z_2` with `z_1 + z_2 >= 1`; row `k`
//! is deactivated through `row_k(u) + G (1 - z_k) >= 0` with `G` large enough
//! that a zeroed row can never bind inside the control box. Leaves therefore
//! agree exactly with the sub-QP enumeration, and integral candidates are
//! re-solved without the binaries so reported objectives carry no relaxation
//! artifacts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::affine::AffineRow;

use super::dense::{solve_dense, DenseError, DenseOutcome};
use super::{
    assemble_objective, box_rows, solve_assignment, Direction, DirectionAssignment, QpOutcome,
    QpProblem, QpSolution, SolverError, N_VARS, SUBQP_PAIR_CAP, TIE_TOL,
};

/// Tiny quadratic weight on relaxed binaries (the kernel needs strict
/// convexity); node bounds are corrected by its maximum contribution, so the
/// value only trades conditioning against pruning strength.
const BIN_EPS: f64 = 1e-3;
/// Binaries within this distance of an integer count as integral.
const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bin {
    Free,
    Zero,
    One,
}

#[derive(Debug, Clone)]
struct Node {
    fixed: Vec<[Bin; 2]>,
    bound: f64,
    /// Relaxed values of the free binaries, in (pair, side) order.
    zvals: Vec<f64>,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the lowest bound pops first,
        // oldest node winning ties.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of the branch-and-bound search.
#[derive(Debug, Clone)]
pub struct MiqpResult {
    pub best: Option<(QpSolution, DirectionAssignment)>,
    /// QP relaxations solved (a proxy for work done).
    pub nodes_solved: usize,
}

fn default_big_m(base: &QpProblem, pairs: &[[AffineRow; 2]]) -> f64 {
    let (lo, hi) = base.control_box();
    let m0 = lo[0].abs().max(hi[0].abs());
    let m1 = lo[1].abs().max(hi[1].abs());
    let mut worst: f64 = 1.0;
    for pair in pairs {
        for row in pair {
            let reach = row.constant.abs() + row.coeff_u[0].abs() * m0 + row.coeff_u[1].abs() * m1;
            worst = worst.max(reach);
        }
    }
    1e4 * worst
}

enum Relaxation {
    Infeasible,
    Solved { bound: f64, zvals: Vec<f64> },
}

/// Solve one node's QP relaxation over `[u, delta, free binaries]`.
fn solve_relaxation(
    base: &QpProblem,
    pairs: &[[AffineRow; 2]],
    fixed: &[[Bin; 2]],
    big_m: f64,
) -> Relaxation {
    let (lo, hi) = base.control_box();
    if lo[0] > hi[0] + 1e-9 || lo[1] > hi[1] + 1e-9 {
        return Relaxation::Infeasible;
    }

    // variable layout: [u(2), delta(4), free binaries...]
    let mut bin_index = vec![[usize::MAX; 2]; pairs.len()];
    let mut n_free = 0usize;
    for (j, states) in fixed.iter().enumerate() {
        for k in 0..2 {
            if states[k] == Bin::Free {
                bin_index[j][k] = N_VARS + n_free;
                n_free += 1;
            }
        }
    }
    let n = N_VARS + n_free;

    let (g6, c6) = assemble_objective(base);
    let mut gmat = vec![0.0; n * n];
    for i in 0..N_VARS {
        for j in 0..N_VARS {
            gmat[i * n + j] = g6[i * N_VARS + j];
        }
    }
    for i in N_VARS..n {
        gmat[i * n + i] = 2.0 * BIN_EPS;
    }
    let mut c = vec![0.0; n];
    c[..N_VARS].copy_from_slice(&c6);

    let (mut normals, mut rhs) = box_rows(lo, hi, n);
    let mut push_row = |a: Vec<f64>, b: f64| {
        normals.push(a);
        rhs.push(b);
    };

    for row in &base.rows {
        let (a6, b) = row.as_geq();
        let mut a = vec![0.0; n];
        a[..N_VARS].copy_from_slice(&a6);
        push_row(a, b);
    }

    for (j, pair) in pairs.iter().enumerate() {
        for k in 0..2 {
            match fixed[j][k] {
                Bin::Zero => {} // row dropped: big-M slack always covers it
                Bin::One => {
                    let (a6, b) = pair[k].as_geq();
                    let mut a = vec![0.0; n];
                    a[..N_VARS].copy_from_slice(&a6);
                    push_row(a, b);
                }
                Bin::Free => {
                    // row(u) + G (1 - z) >= 0, plus 0 <= z <= 1
                    let (a6, b) = pair[k].as_geq();
                    let zi = bin_index[j][k];
                    let mut a = vec![0.0; n];
                    a[..N_VARS].copy_from_slice(&a6);
                    a[zi] = -big_m;
                    push_row(a, b - big_m);
                    let mut up = vec![0.0; n];
                    up[zi] = 1.0;
                    push_row(up, 0.0);
                    let mut dn = vec![0.0; n];
                    dn[zi] = -1.0;
                    push_row(dn, -1.0);
                }
            }
        }
        // at least one active side per pair
        let ones = fixed[j].iter().filter(|&&s| s == Bin::One).count();
        if ones == 0 {
            let free: Vec<usize> = (0..2).filter(|&k| fixed[j][k] == Bin::Free).collect();
            if free.is_empty() {
                return Relaxation::Infeasible; // both sides fixed off
            }
            let mut a = vec![0.0; n];
            for k in free {
                a[bin_index[j][k]] = 1.0;
            }
            push_row(a, 1.0);
        }
    }

    match solve_dense(&gmat, &c, &normals, &rhs) {
        Ok(DenseOutcome::Optimal { z, objective }) => {
            let mut zvals = Vec::with_capacity(n_free);
            for (j, states) in fixed.iter().enumerate() {
                for k in 0..2 {
                    if states[k] == Bin::Free {
                        zvals.push(z[bin_index[j][k]]);
                    }
                }
            }
            // convert to the true objective scale and strip the binary
            // penalty so the bound stays valid for every descendant leaf
            let bound = objective + base.objective_offset() - BIN_EPS * n_free as f64;
            Relaxation::Solved { bound, zvals }
        }
        Ok(DenseOutcome::Infeasible) => Relaxation::Infeasible,
        Err(DenseError::NotPositiveDefinite) => {
            panic!("relaxation objective not positive definite")
        }
        Err(DenseError::Stalled) => {
            debug_assert!(false, "dense QP solver stalled in relaxation");
            Relaxation::Infeasible
        }
    }
}

fn assignment_of(fixed: &[[Bin; 2]]) -> Option<DirectionAssignment> {
    let mut dirs = Vec::with_capacity(fixed.len());
    for states in fixed {
        let d = match (states[0], states[1]) {
            (Bin::One, Bin::Zero) => Direction::Left,
            (Bin::Zero, Bin::One) => Direction::Right,
            (Bin::One, Bin::One) => Direction::Backward,
            _ => return None,
        };
        dirs.push(d);
    }
    Some(DirectionAssignment(dirs))
}

/// Round an integral node's free binaries into the fixed states.
fn integral_fix(fixed: &[[Bin; 2]], zvals: &[f64]) -> Option<Vec<[Bin; 2]>> {
    let mut out = fixed.to_vec();
    let mut it = zvals.iter();
    for states in out.iter_mut() {
        for k in 0..2 {
            if states[k] == Bin::Free {
                let z = *it.next().unwrap();
                if (z - z.round()).abs() > INT_TOL {
                    return None;
                }
                states[k] = if z.round() >= 1.0 { Bin::One } else { Bin::Zero };
            }
        }
        if states.iter().all(|&s| s == Bin::Zero) {
            return None; // violates the at-least-one row; not integral-valid
        }
    }
    Some(out)
}

/// Solve the disjunctive program exactly over binary side selectors.
///
/// `big_m` defaults to `1e4` scaled by the largest row magnitude reachable
/// inside the control box. Returns the incumbent (minimum-objective leaf,
/// re-solved cleanly) or `None` when every assignment is infeasible.
pub fn solve_miqp(
    base: &QpProblem,
    pairs: &[[AffineRow; 2]],
    big_m: Option<f64>,
) -> Result<MiqpResult, SolverError> {
    let m = pairs.len();
    if m > SUBQP_PAIR_CAP {
        return Err(SolverError::TooManyPairs(m, SUBQP_PAIR_CAP));
    }
    if m == 0 {
        let best = super::solve_qp(base)
            .optimal()
            .map(|s| (s, DirectionAssignment(Vec::new())));
        return Ok(MiqpResult { best, nodes_solved: 1 });
    }
    let big_m = big_m.unwrap_or_else(|| default_big_m(base, pairs));

    let mut nodes_solved = 0usize;
    let mut next_id = 0usize;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut best: Option<(QpSolution, DirectionAssignment)> = None;
    let mut best_obj = f64::INFINITY;

    let root_fixed = vec![[Bin::Free; 2]; m];
    nodes_solved += 1;
    match solve_relaxation(base, pairs, &root_fixed, big_m) {
        Relaxation::Infeasible => {
            return Ok(MiqpResult { best: None, nodes_solved });
        }
        Relaxation::Solved { bound, zvals } => {
            heap.push(Node {
                fixed: root_fixed,
                bound,
                zvals,
                id: next_id,
            });
            next_id += 1;
        }
    }

    while let Some(node) = heap.pop() {
        if node.bound >= best_obj - 1e-12 {
            break; // best-first: nothing better remains
        }

        if let Some(fix) = integral_fix(&node.fixed, &node.zvals) {
            let assignment = assignment_of(&fix).expect("integral node has a valid assignment");
            if let QpOutcome::Optimal(sol) = solve_assignment(base, pairs, &assignment) {
                nodes_solved += 1;
                if sol.objective < best_obj - TIE_TOL {
                    best_obj = sol.objective;
                    best = Some((sol, assignment));
                }
            } else {
                nodes_solved += 1;
            }
            continue;
        }

        // branch on the most fractional free binary (ties keep the lowest index)
        let mut pick = 0usize;
        let mut frac_best = -1.0;
        for (i, z) in node.zvals.iter().enumerate() {
            let dist = (z - z.round()).abs();
            if dist > frac_best {
                frac_best = dist;
                pick = i;
            }
        }
        // translate flat index back to (pair, side)
        let mut flat = 0usize;
        let mut target = (0usize, 0usize);
        'outer: for (j, states) in node.fixed.iter().enumerate() {
            for k in 0..2 {
                if states[k] == Bin::Free {
                    if flat == pick {
                        target = (j, k);
                        break 'outer;
                    }
                    flat += 1;
                }
            }
        }

        for state in [Bin::One, Bin::Zero] {
            let mut child = node.fixed.clone();
            child[target.0][target.1] = state;
            if child[target.0].iter().all(|&s| s == Bin::Zero) {
                continue; // would disable both sides of a pair
            }
            // zeroing one side forces the sibling on (the pair needs at least
            // one active side), removing a pinned binary from the relaxation
            if state == Bin::Zero && child[target.0][1 - target.1] == Bin::Free {
                child[target.0][1 - target.1] = Bin::One;
            }
            nodes_solved += 1;
            if let Relaxation::Solved { bound, zvals } =
                solve_relaxation(base, pairs, &child, big_m)
            {
                if bound < best_obj - 1e-12 {
                    heap.push(Node {
                        fixed: child,
                        bound,
                        zvals,
                        id: next_id,
                    });
                    next_id += 1;
                }
            }
        }
    }

    Ok(MiqpResult { best, nodes_solved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlInput;
    use crate::solver::{enumerate_subqps, QpWeights};
    use approx::assert_relative_eq;

    fn base() -> QpProblem {
        QpProblem::new(
            QpWeights::default(),
            ControlInput::ZERO,
            vec![],
            [-1.0, -0.6],
            [1.0, 0.6],
            [10.0, 10.0],
        )
        .unwrap()
    }

    #[test]
    fn forced_branch_matches_single_row_qp() {
        // left side satisfiable, right side conflicts with the box
        let pairs = [[
            AffineRow::barrier([1.0, 0.0], -0.4), // a >= 0.4
            AffineRow::barrier([1.0, 0.0], -5.0), // a >= 5 (impossible)
        ]];
        let res = solve_miqp(&base(), &pairs, None).unwrap();
        let (sol, assignment) = res.best.unwrap();
        assert_eq!(assignment.0, vec![Direction::Left]);
        assert_relative_eq!(sol.u.a, 0.4, epsilon = 1e-8);

        let direct = solve_assignment(&base(), &pairs, &assignment).optimal().unwrap();
        assert_relative_eq!(sol.objective, direct.objective, epsilon = 1e-9);
    }

    #[test]
    fn all_leaves_infeasible() {
        let pairs = [[
            AffineRow::barrier([1.0, 0.0], -5.0),
            AffineRow::barrier([-1.0, 0.0], -5.0),
        ]];
        let res = solve_miqp(&base(), &pairs, None).unwrap();
        assert!(res.best.is_none());
    }

    #[test]
    fn matches_enumeration_on_two_pairs() {
        let pairs = [
            [
                AffineRow::barrier([1.0, 0.2], -0.3),
                AffineRow::barrier([-1.0, 0.1], -0.2),
            ],
            [
                AffineRow::barrier([0.3, 1.0], -0.25),
                AffineRow::barrier([0.1, -1.0], -0.15),
            ],
        ];
        let mi = solve_miqp(&base(), &pairs, None).unwrap().best.unwrap();
        let en = enumerate_subqps(&base(), &pairs, true).unwrap().best.unwrap();
        assert_relative_eq!(mi.0.objective, en.0.objective, epsilon = 1e-6);
        assert_eq!(mi.1, en.1);
    }

    #[test]
    fn zero_pairs_reduces_to_plain_qp() {
        let res = solve_miqp(&base(), &[], None).unwrap();
        let (sol, assignment) = res.best.unwrap();
        assert!(assignment.0.is_empty());
        assert_relative_eq!(sol.u.a, 0.0, epsilon = 1e-10);
        assert_relative_eq!(sol.u.alpha, 0.0, epsilon = 1e-10);
    }
}
