//! Solver validation against an exhaustive active-set enumeration oracle:
//! every subset of constraints is tried as an equality system and checked for
//! primal/dual feasibility, fully independent of the dual active-set path.

mod common;

use common::*;
use vocbf::affine::AffineRow;
use vocbf::solver::{lp_feasible, solve_qp, QpOutcome};
use vocbf::Vec2;

#[test]
fn matches_brute_force_on_random_problems() {
    let mut rng = rng(301);
    let mut optimal = 0;
    let mut infeasible = 0;
    for case in 0..300 {
        let p = random_problem(&mut rng, 8);
        let got = solve_qp(&p);
        let want = brute_force_qp(&p);
        match (&got, &want) {
            (QpOutcome::Optimal(sol), OracleOutcome::Optimal { objective, z }) => {
                optimal += 1;
                let tol = 1e-6 * (1.0 + objective.abs());
                // compare in the oracle's objective convention (offset by the
                // constant smoothing term)
                let pre = Vec2::new(p.u_pre.a, p.u_pre.alpha);
                let offset = 0.5 * pre.dot(&(p.weights.r * pre));
                assert!(
                    (sol.objective - (objective + offset)).abs() < tol,
                    "case {case}: objective {} vs oracle {} (offset {offset})\nz_oracle {z:?}\nsol {sol:?}",
                    sol.objective,
                    objective + offset,
                );
            }
            (QpOutcome::Infeasible, OracleOutcome::Infeasible) => {
                infeasible += 1;
                // confirmed empty by grid search over the control box
                assert!(
                    !grid_has_feasible_point(&p, &[], 400),
                    "case {case}: declared infeasible but grid found a point"
                );
            }
            _ => panic!("case {case}: solver {got:?} oracle {want:?}"),
        }
    }
    assert!(optimal > 100, "too few optimal cases ({optimal})");
    assert!(infeasible > 10, "too few infeasible cases ({infeasible})");
}

#[test]
fn solutions_satisfy_rows_and_bounds() {
    let mut rng = rng(302);
    for _ in 0..300 {
        let p = random_problem(&mut rng, 8);
        if let QpOutcome::Optimal(sol) = solve_qp(&p) {
            let (lo, hi) = p.control_box();
            assert!(sol.u.a >= lo[0] - 1e-12 && sol.u.a <= hi[0] + 1e-12);
            assert!(sol.u.alpha >= lo[1] - 1e-12 && sol.u.alpha <= hi[1] + 1e-12);
            let u = Vec2::new(sol.u.a, sol.u.alpha);
            for row in &p.rows {
                assert!(
                    row.holds(u, &sol.delta, 1e-8),
                    "row {row:?} violated: {}",
                    row.eval(u, &sol.delta)
                );
            }
        }
    }
}

#[test]
fn prescreen_is_sound_against_grid() {
    // false => no grid point strictly satisfies all hard rows;
    // true => the QP restricted to those rows is solvable
    let mut rng = rng(303);
    for _ in 0..150 {
        let p = random_problem(&mut rng, 6);
        let hard: Vec<AffineRow> = p.rows.iter().filter(|r| r.is_hard()).cloned().collect();
        let (lo, hi) = p.control_box();
        let feasible = lp_feasible(&hard, lo, hi);
        if !feasible {
            assert!(
                !grid_has_feasible_point(&p, &[], 1200),
                "prescreen said empty but grid found a strict point"
            );
        } else {
            // CLF rows are always satisfiable through their relaxations, so
            // hard-row feasibility decides the whole program
            assert!(
                solve_qp(&p).is_optimal(),
                "prescreen said feasible but the QP is infeasible"
            );
        }
    }
}
