//! Feasibility test for the hard constraint set of a sub-problem.
//!
//! The hard rows (barrier and input-rate constraints) involve only the two
//! control variables, so emptiness of the region is decided exactly by
//! clipping the control box against each half-plane. CLF rows are excluded by
//! the caller: they are always satisfiable through their relaxation
//! variables.

use crate::affine::AffineRow;

/// Relative slack kept when clipping, so marginally feasible regions are
/// never discarded (a skipped sub-problem must be truly infeasible).
const CLIP_TOL: f64 = 1e-9;

/// True iff some `u` in the box satisfies every hard row.
pub fn lp_feasible(rows: &[AffineRow], lower: [f64; 2], upper: [f64; 2]) -> bool {
    debug_assert!(rows.iter().all(|r| r.is_hard()), "CLF rows must be excluded");
    if lower[0] > upper[0] || lower[1] > upper[1] {
        return false;
    }
    let mut poly = vec![
        (lower[0], lower[1]),
        (upper[0], lower[1]),
        (upper[0], upper[1]),
        (lower[0], upper[1]),
    ];
    for row in rows {
        let (a, b) = row.as_geq();
        let g = (a[0], a[1]);
        poly = clip_halfplane(&poly, g, b);
        if poly.is_empty() {
            return false;
        }
    }
    true
}

/// Keep the part of the polygon with `g . u >= b` (within tolerance).
fn clip_halfplane(poly: &[(f64, f64)], g: (f64, f64), b: f64) -> Vec<(f64, f64)> {
    let tol = CLIP_TOL * (1.0 + g.0.abs() + g.1.abs() + b.abs());
    let value = |p: &(f64, f64)| g.0 * p.0 + g.1 * p.1 - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let vc = value(&cur);
        let vn = value(&next);
        let keep_cur = vc >= -tol;
        let keep_next = vn >= -tol;
        if keep_cur {
            out.push(cur);
        }
        if keep_cur != keep_next && (vc - vn).abs() > 0.0 {
            let t = vc / (vc - vn);
            if t.is_finite() && (0.0..=1.0).contains(&t) {
                out.push((cur.0 + t * (next.0 - cur.0), cur.1 + t * (next.1 - cur.1)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_row_set_is_feasible() {
        assert!(lp_feasible(&[], [-1.0, -1.0], [1.0, 1.0]));
    }

    #[test]
    fn bound_conflict_is_infeasible() {
        // a >= 2 with a <= 1
        let rows = [AffineRow::barrier([1.0, 0.0], -2.0)];
        assert!(!lp_feasible(&rows, [-1.0, -0.6], [1.0, 0.6]));
    }

    #[test]
    fn corner_sliver_is_feasible() {
        // a + alpha >= 1.59 leaves a sliver near the (1, 0.6) corner
        let rows = [AffineRow::barrier([1.0, 1.0], -1.59)];
        assert!(lp_feasible(&rows, [-1.0, -0.6], [1.0, 0.6]));
        // push it past the corner
        let rows = [AffineRow::barrier([1.0, 1.0], -1.61)];
        assert!(!lp_feasible(&rows, [-1.0, -0.6], [1.0, 0.6]));
    }

    #[test]
    fn opposing_halfplanes() {
        let rows = [
            AffineRow::barrier([1.0, 0.0], -0.5),  // a >= 0.5
            AffineRow::barrier([-1.0, 0.0], 0.5),  // a <= 0.5
        ];
        assert!(lp_feasible(&rows, [-1.0, -1.0], [1.0, 1.0]));
        let rows = [
            AffineRow::barrier([1.0, 0.0], -0.6),  // a >= 0.6
            AffineRow::barrier([-1.0, 0.0], 0.5),  // a <= 0.5
        ];
        assert!(!lp_feasible(&rows, [-1.0, -1.0], [1.0, 1.0]));
    }

    #[test]
    fn degenerate_point_box() {
        let rows = [AffineRow::barrier([1.0, 1.0], -0.2)];
        assert!(lp_feasible(&rows, [0.1, 0.1], [0.1, 0.1]));
        let rows = [AffineRow::barrier([1.0, 1.0], -0.3)];
        assert!(!lp_feasible(&rows, [0.1, 0.1], [0.1, 0.1]));
    }
}
