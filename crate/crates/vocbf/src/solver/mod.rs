//! Dense QP solving over affine rows, LP feasibility prescreening, sub-QP
//! enumeration and the big-M mixed-integer formulation.
//!
//! Every control step minimizes
//!
//! ```text
//! 1/2 u' H u + 1/2 (u - u_pre)' R (u - u_pre) + delta' P delta
//! ```
//!
//! over the relaxed CLF rows, the hard barrier rows and box/rate bounds on
//! `u`. Each obstacle contributes a *pair* of barrier rows of which at least
//! one must hold, giving the disjunctive structure handled by
//! [`solve_miqp`], [`enumerate_subqps`] or an up-front direction choice.

mod dense;
mod lp;
mod miqp;

pub use lp::lp_feasible;
pub use miqp::{solve_miqp, MiqpResult};

use crate::affine::{AffineRow, N_RELAX};
use crate::dynamics::ControlInput;
use crate::Mat2;

use dense::{solve_dense, DenseError, DenseOutcome};

/// Enumerating more than `3^SUBQP_PAIR_CAP` sub-problems is refused.
pub const SUBQP_PAIR_CAP: usize = 6;

/// Objective tie tolerance: a candidate must beat the incumbent by more than
/// this to replace it, so the lowest assignment index wins ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    BadProblem(String),
    #[error("{0} constraint pairs exceed the enumeration cap of {1}")]
    TooManyPairs(usize, usize),
}

/// Cost matrices of the per-step program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpWeights {
    /// Input energy weight (positive definite).
    pub h: Mat2,
    /// Input smoothing weight versus the previous input (positive
    /// semidefinite).
    pub r: Mat2,
    /// Diagonal relaxation weights; the distance/heading slots outrank the
    /// speed/turn-rate slots.
    pub p: [f64; N_RELAX],
}

impl Default for QpWeights {
    fn default() -> Self {
        Self {
            h: Mat2::identity(),
            r: Mat2::identity() * 0.5,
            p: [100.0, 100.0, 1.0, 1.0],
        }
    }
}

impl QpWeights {
    pub fn validate(&self) -> Result<(), SolverError> {
        let h = &self.h;
        if (h.m12 - h.m21).abs() > 1e-12 || h.m11 <= 0.0 || h.m11 * h.m22 - h.m12 * h.m21 <= 0.0 {
            return Err(SolverError::BadProblem("H must be symmetric positive definite".into()));
        }
        let r = &self.r;
        if (r.m12 - r.m21).abs() > 1e-12
            || r.m11 < 0.0
            || r.m22 < 0.0
            || r.m11 * r.m22 - r.m12 * r.m21 < -1e-12
        {
            return Err(SolverError::BadProblem("R must be symmetric positive semidefinite".into()));
        }
        if self.p.iter().any(|&v| !(v > 0.0)) {
            return Err(SolverError::BadProblem("P entries must be > 0".into()));
        }
        Ok(())
    }
}

/// One per-step program: weights, rows and input bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub weights: QpWeights,
    pub u_pre: ControlInput,
    pub rows: Vec<AffineRow>,
    /// Absolute input box.
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    /// Per-step bound on `|u - u_pre|` (rate limit times the step).
    pub du_max: [f64; 2],
}

impl QpProblem {
    pub fn new(
        weights: QpWeights,
        u_pre: ControlInput,
        rows: Vec<AffineRow>,
        u_min: [f64; 2],
        u_max: [f64; 2],
        du_max: [f64; 2],
    ) -> Result<Self, SolverError> {
        weights.validate()?;
        if !u_pre.is_finite() {
            return Err(SolverError::BadProblem("u_pre must be finite".into()));
        }
        for i in 0..2 {
            if !(u_min[i] <= u_max[i]) {
                return Err(SolverError::BadProblem(format!(
                    "u bounds inconsistent in dim {i}: [{}, {}]",
                    u_min[i], u_max[i]
                )));
            }
            if !(du_max[i] >= 0.0) {
                return Err(SolverError::BadProblem(format!("du_max[{i}] must be >= 0")));
            }
        }
        if let Some(row) = rows.iter().find(|r| !r.is_finite()) {
            return Err(SolverError::BadProblem(format!("non-finite row: {row:?}")));
        }
        Ok(Self {
            weights,
            u_pre,
            rows,
            u_min,
            u_max,
            du_max,
        })
    }

    /// Effective control box: absolute bounds intersected with the rate
    /// window around the previous input.
    pub fn control_box(&self) -> ([f64; 2], [f64; 2]) {
        let pre = [self.u_pre.a, self.u_pre.alpha];
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for i in 0..2 {
            lo[i] = self.u_min[i].max(pre[i] - self.du_max[i]);
            hi[i] = self.u_max[i].min(pre[i] + self.du_max[i]);
        }
        (lo, hi)
    }

    /// True objective value at a candidate point.
    pub fn objective(&self, u: ControlInput, delta: &[f64; N_RELAX]) -> f64 {
        let uv = crate::Vec2::new(u.a, u.alpha);
        let du = crate::Vec2::new(u.a - self.u_pre.a, u.alpha - self.u_pre.alpha);
        let mut obj = 0.5 * uv.dot(&(self.weights.h * uv)) + 0.5 * du.dot(&(self.weights.r * du));
        for (w, d) in self.weights.p.iter().zip(delta) {
            obj += w * d * d;
        }
        obj
    }

    /// Constant objective offset between the solver's internal quadratic and
    /// [`Self::objective`] (from expanding the smoothing term).
    fn objective_offset(&self) -> f64 {
        let pre = crate::Vec2::new(self.u_pre.a, self.u_pre.alpha);
        0.5 * pre.dot(&(self.weights.r * pre))
    }
}

/// Point solution of a feasible program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub u: ControlInput,
    pub delta: [f64; N_RELAX],
    pub objective: f64,
}

/// Solve status: either an optimal point or a certificate that the hard rows
/// conflict with the input bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    Infeasible,
}

impl QpOutcome {
    pub fn optimal(self) -> Option<QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            QpOutcome::Infeasible => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, QpOutcome::Optimal(_))
    }
}

/// Number of decision variables of the point program.
pub(crate) const N_VARS: usize = 2 + N_RELAX;

/// Assemble the objective blocks shared by all per-step programs.
pub(crate) fn assemble_objective(p: &QpProblem) -> (Vec<f64>, Vec<f64>) {
    let mut gmat = vec![0.0; N_VARS * N_VARS];
    let hr = p.weights.h + p.weights.r;
    gmat[0] = hr.m11;
    gmat[1] = hr.m12;
    gmat[N_VARS] = hr.m21;
    gmat[N_VARS + 1] = hr.m22;
    for i in 0..N_RELAX {
        gmat[(2 + i) * N_VARS + 2 + i] = 2.0 * p.weights.p[i];
    }
    let mut c = vec![0.0; N_VARS];
    let ru = p.weights.r * crate::Vec2::new(p.u_pre.a, p.u_pre.alpha);
    c[0] = -ru.x;
    c[1] = -ru.y;
    (gmat, c)
}

/// Append the control-box rows for the effective box.
pub(crate) fn box_rows(lo: [f64; 2], hi: [f64; 2], n_vars: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut normals = Vec::with_capacity(4);
    let mut rhs = Vec::with_capacity(4);
    for i in 0..2 {
        let mut up = vec![0.0; n_vars];
        up[i] = 1.0;
        normals.push(up);
        rhs.push(lo[i]);
        let mut dn = vec![0.0; n_vars];
        dn[i] = -1.0;
        normals.push(dn);
        rhs.push(-hi[i]);
    }
    (normals, rhs)
}

fn solve_with_rows<'a>(
    p: &'a QpProblem,
    extra: impl Iterator<Item = &'a AffineRow>,
) -> QpOutcome {
    let (lo, hi) = p.control_box();
    if lo[0] > hi[0] + 1e-9 || lo[1] > hi[1] + 1e-9 {
        return QpOutcome::Infeasible;
    }
    let lo = [lo[0].min(hi[0]), lo[1].min(hi[1])];

    let (gmat, c) = assemble_objective(p);
    let (mut normals, mut rhs) = box_rows(lo, hi, N_VARS);
    for row in p.rows.iter().chain(extra) {
        let (a, b) = row.as_geq();
        normals.push(a.to_vec());
        rhs.push(b);
    }

    match solve_dense(&gmat, &c, &normals, &rhs) {
        Ok(DenseOutcome::Optimal { z, .. }) => {
            let u = ControlInput::new(z[0].clamp(lo[0], hi[0]), z[1].clamp(lo[1], hi[1]));
            let mut delta = [0.0; N_RELAX];
            delta.copy_from_slice(&z[2..N_VARS]);
            let objective = p.objective(u, &delta);
            QpOutcome::Optimal(QpSolution { u, delta, objective })
        }
        Ok(DenseOutcome::Infeasible) => QpOutcome::Infeasible,
        Err(DenseError::NotPositiveDefinite) => {
            panic!("objective matrix not positive definite; validate weights at construction")
        }
        Err(DenseError::Stalled) => {
            debug_assert!(false, "dense QP solver stalled");
            QpOutcome::Infeasible
        }
    }
}

/// Solve the per-step program over its rows and bounds.
pub fn solve_qp(p: &QpProblem) -> QpOutcome {
    solve_with_rows(p, std::iter::empty())
}

/// Least-violation recovery: when the hard rows conflict with the input
/// bounds, minimize the weighted squared violations of the given hard rows
/// subject to the input box alone. CLF rows are ignored (navigation yields in
/// an emergency). Always solvable; used as the infeasible-step fallback.
pub fn solve_least_violation(p: &QpProblem, hard_rows: &[&AffineRow]) -> ControlInput {
    const SLACK_WEIGHT: f64 = 1e3;
    let (lo, hi) = p.control_box();
    if lo[0] > hi[0] + 1e-9 || lo[1] > hi[1] + 1e-9 {
        return ControlInput::new(
            p.u_pre.a.clamp(lo[0].min(hi[0]), hi[0].max(lo[0])),
            p.u_pre.alpha.clamp(lo[1].min(hi[1]), hi[1].max(lo[1])),
        );
    }
    let n_slack = hard_rows.len();
    let n = 2 + n_slack;

    let mut gmat = vec![0.0; n * n];
    let hr = p.weights.h + p.weights.r;
    gmat[0] = hr.m11;
    gmat[1] = hr.m12;
    gmat[n] = hr.m21;
    gmat[n + 1] = hr.m22;
    for i in 2..n {
        gmat[i * n + i] = 2.0 * SLACK_WEIGHT;
    }
    let mut c = vec![0.0; n];
    let ru = p.weights.r * crate::Vec2::new(p.u_pre.a, p.u_pre.alpha);
    c[0] = -ru.x;
    c[1] = -ru.y;

    let (mut normals, mut rhs) = box_rows(lo, hi, n);
    for (k, row) in hard_rows.iter().enumerate() {
        debug_assert!(row.is_hard());
        let (a6, b) = row.as_geq();
        let mut a = vec![0.0; n];
        a[0] = a6[0];
        a[1] = a6[1];
        a[2 + k] = 1.0; // row + slack >= b
        normals.push(a);
        rhs.push(b);
        let mut s_pos = vec![0.0; n];
        s_pos[2 + k] = 1.0;
        normals.push(s_pos);
        rhs.push(0.0);
    }

    match solve_dense(&gmat, &c, &normals, &rhs) {
        Ok(DenseOutcome::Optimal { z, .. }) => ControlInput::new(
            z[0].clamp(lo[0], hi[0]),
            z[1].clamp(lo[1], hi[1]),
        ),
        _ => {
            debug_assert!(false, "least-violation program must be solvable");
            ControlInput::new(
                p.u_pre.a.clamp(lo[0], hi[0]),
                p.u_pre.alpha.clamp(lo[1], hi[1]),
            )
        }
    }
}

/// Per-obstacle pass choice; the order gives the tie-break preference.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Keep only the first cone constraint.
    Left,
    /// Keep only the second cone constraint.
    Right,
    /// Keep both (back away from the obstacle).
    Backward,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Left, Direction::Right, Direction::Backward];

    /// Which of the pair's rows are active.
    pub fn active_sides(self) -> [bool; 2] {
        match self {
            Direction::Left => [true, false],
            Direction::Right => [false, true],
            Direction::Backward => [true, true],
        }
    }

    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
            Direction::Backward => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Backward => "backward",
        }
    }
}

/// One direction per obstacle pair, in pair order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionAssignment(pub Vec<Direction>);

impl DirectionAssignment {
    /// Lexicographic rank with the first pair most significant.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, d| acc * 3 + d.index())
    }

    /// Rows selected by this assignment from the per-pair row pairs.
    pub fn selected_rows<'a>(
        &self,
        pairs: &'a [[AffineRow; 2]],
    ) -> impl Iterator<Item = &'a AffineRow> + 'a {
        let picks: Vec<(usize, [bool; 2])> = self
            .0
            .iter()
            .enumerate()
            .map(|(j, d)| (j, d.active_sides()))
            .collect();
        picks.into_iter().flat_map(move |(j, sides)| {
            (0..2).filter_map(move |k| if sides[k] { Some(&pairs[j][k]) } else { None })
        })
    }
}

impl std::fmt::Display for DirectionAssignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let labels: Vec<&str> = self.0.iter().map(|d| d.label()).collect();
        write!(f, "{}", labels.join("+"))
    }
}

/// Solve the program restricted to one direction assignment.
pub fn solve_assignment(
    base: &QpProblem,
    pairs: &[[AffineRow; 2]],
    assignment: &DirectionAssignment,
) -> QpOutcome {
    debug_assert_eq!(assignment.0.len(), pairs.len());
    solve_with_rows(base, assignment.selected_rows(pairs))
}

/// Result of enumerating the `3^M` direction assignments.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    /// Minimum-objective solution, if any assignment was feasible.
    pub best: Option<(QpSolution, DirectionAssignment)>,
    /// Sub-problems actually solved.
    pub solved: usize,
    /// Sub-problems skipped by the feasibility prescreen.
    pub skipped: usize,
}

fn decode_assignment(mut idx: usize, m: usize) -> DirectionAssignment {
    let mut digits = vec![Direction::Left; m];
    for j in (0..m).rev() {
        digits[j] = Direction::ALL[idx % 3];
        idx /= 3;
    }
    DirectionAssignment(digits)
}

/// Solve every direction assignment's sub-QP (optionally prescreening each
/// hard-row set with [`lp_feasible`]) and keep the minimum objective.
/// Assignments are visited in lexicographic order and ties within [`TIE_TOL`]
/// keep the earlier assignment.
pub fn enumerate_subqps(
    base: &QpProblem,
    pairs: &[[AffineRow; 2]],
    use_lp_prescreen: bool,
) -> Result<EnumerationResult, SolverError> {
    let m = pairs.len();
    if m > SUBQP_PAIR_CAP {
        return Err(SolverError::TooManyPairs(m, SUBQP_PAIR_CAP));
    }
    let total = 3usize.pow(m as u32);
    let (lo, hi) = base.control_box();
    let base_hard: Vec<&AffineRow> = base.rows.iter().filter(|r| r.is_hard()).collect();

    let mut best: Option<(QpSolution, DirectionAssignment)> = None;
    let mut solved = 0usize;
    let mut skipped = 0usize;
    let mut hard_scratch: Vec<AffineRow> = Vec::new();

    for idx in 0..total {
        let assignment = decode_assignment(idx, m);
        if use_lp_prescreen {
            hard_scratch.clear();
            hard_scratch.extend(base_hard.iter().map(|r| (*r).clone()));
            hard_scratch.extend(assignment.selected_rows(pairs).cloned());
            if !lp_feasible(&hard_scratch, lo, hi) {
                skipped += 1;
                continue;
            }
        }
        solved += 1;
        if let QpOutcome::Optimal(sol) = solve_assignment(base, pairs, &assignment) {
            let better = match &best {
                None => true,
                Some((b, _)) => sol.objective < b.objective - TIE_TOL,
            };
            if better {
                best = Some((sol, assignment));
            }
        }
    }
    Ok(EnumerationResult { best, solved, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::RelaxSlot;
    use approx::assert_relative_eq;

    fn plain_problem(rows: Vec<AffineRow>) -> QpProblem {
        QpProblem::new(
            QpWeights::default(),
            ControlInput::ZERO,
            rows,
            [-1.0, -0.6],
            [1.0, 0.6],
            [10.0, 10.0],
        )
        .unwrap()
    }

    #[test]
    fn simple_bound_active() {
        // min weighted u^2 s.t. a >= 0.5
        let p = plain_problem(vec![AffineRow::barrier([1.0, 0.0], -0.5)]);
        let sol = solve_qp(&p).optimal().unwrap();
        assert_relative_eq!(sol.u.a, 0.5, epsilon = 1e-9);
        assert_relative_eq!(sol.u.alpha, 0.0, epsilon = 1e-9);
        // objective = 1/2 H a^2 + 1/2 R a^2 = 0.5*1.5*0.25
        assert_relative_eq!(sol.objective, 0.75 * 0.25, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_bound_conflict() {
        // a >= 3 with a <= 1
        let p = plain_problem(vec![AffineRow::barrier([1.0, 0.0], -3.0)]);
        assert_eq!(solve_qp(&p), QpOutcome::Infeasible);
    }

    #[test]
    fn relaxed_row_uses_delta() {
        // CLF row: 5 - delta_d <= 0 forces delta_d = 5
        let p = plain_problem(vec![AffineRow::relaxed([0.0, 0.0], 5.0, RelaxSlot::Distance)]);
        let sol = solve_qp(&p).optimal().unwrap();
        assert_relative_eq!(sol.delta[0], 5.0, epsilon = 1e-8);
        assert_relative_eq!(sol.u.a, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rate_limit_window_applies() {
        let p = QpProblem::new(
            QpWeights::default(),
            ControlInput::new(0.8, 0.0),
            vec![AffineRow::barrier([1.0, 0.0], -2.0)], // wants a >= 2
            [-1.0, -0.6],
            [1.0, 0.6],
            [0.3, 0.15],
        )
        .unwrap();
        // box is [0.5, 1.0]: infeasible against a >= 2
        assert_eq!(solve_qp(&p), QpOutcome::Infeasible);
    }

    #[test]
    fn construction_rejects_bad_weights() {
        let mut w = QpWeights::default();
        w.h = Mat2::new(1.0, 0.0, 0.0, -1.0);
        assert!(QpProblem::new(w, ControlInput::ZERO, vec![], [-1.0, -1.0], [1.0, 1.0], [1.0, 1.0])
            .is_err());
        let w = QpWeights::default();
        assert!(QpProblem::new(w, ControlInput::ZERO, vec![], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0])
            .is_err());
    }

    #[test]
    fn enumeration_zero_pairs_is_single_qp() {
        let p = plain_problem(vec![]);
        let res = enumerate_subqps(&p, &[], true).unwrap();
        assert_eq!(res.solved, 1);
        let (sol, assignment) = res.best.unwrap();
        assert!(assignment.0.is_empty());
        assert_relative_eq!(sol.u.a, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn enumeration_one_pair_solves_three() {
        let p = plain_problem(vec![]);
        let pairs = [[
            AffineRow::barrier([1.0, 0.0], -0.2),
            AffineRow::barrier([-1.0, 0.0], -0.2),
        ]];
        let res = enumerate_subqps(&p, &pairs, false).unwrap();
        assert_eq!(res.solved, 3);
        // backward (both rows) is infeasible here; left and right tie in
        // structure but left has lower index
        let (_, assignment) = res.best.unwrap();
        assert_eq!(assignment.0, vec![Direction::Left]);
    }

    #[test]
    fn assignment_index_is_lexicographic() {
        let a = DirectionAssignment(vec![Direction::Left, Direction::Backward]);
        assert_eq!(a.index(), 2);
        let b = DirectionAssignment(vec![Direction::Right, Direction::Left]);
        assert_eq!(b.index(), 3);
        assert_eq!(decode_assignment(3, 2), b);
    }
}
