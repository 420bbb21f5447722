//! Affine constraint rows — the common currency between the CLF/CBF builders
//! and the solvers.
//!
//! A row states `coeff_u . u + coeff_delta . delta + constant (<= | >=) 0`
//! over the control `u = [a, alpha]` and the four CLF relaxation variables
//! `delta = [delta_d, delta_theta, delta_v, delta_omega]`. Barrier rows have
//! zero relaxation coefficients; CLF rows carry `-1` in their own slot.

use crate::Vec2;

/// Number of control variables (`a`, `alpha`).
pub const N_CONTROLS: usize = 2;
/// Number of CLF relaxation variables.
pub const N_RELAX: usize = 4;

/// Inequality direction of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr <= 0`
    LeqZero,
    /// `expr >= 0`
    GeqZero,
}

/// Relaxation slot owned by each CLF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxSlot {
    Distance = 0,
    Heading = 1,
    Speed = 2,
    TurnRate = 3,
}

/// One constraint affine in the decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    /// Coefficients on `[a, alpha]`.
    pub coeff_u: [f64; N_CONTROLS],
    /// Coefficients on the relaxation variables.
    pub coeff_delta: [f64; N_RELAX],
    pub constant: f64,
    pub sense: Sense,
}

impl AffineRow {
    /// Hard barrier row `coeff_u . u + constant >= 0`.
    pub fn barrier(coeff_u: [f64; 2], constant: f64) -> Self {
        Self {
            coeff_u,
            coeff_delta: [0.0; N_RELAX],
            constant,
            sense: Sense::GeqZero,
        }
    }

    /// Relaxed CLF row `coeff_u . u + constant - delta_slot <= 0`.
    pub fn relaxed(coeff_u: [f64; 2], constant: f64, slot: RelaxSlot) -> Self {
        let mut coeff_delta = [0.0; N_RELAX];
        coeff_delta[slot as usize] = -1.0;
        Self {
            coeff_u,
            coeff_delta,
            constant,
            sense: Sense::LeqZero,
        }
    }

    /// Whether the row touches only the control variables.
    pub fn is_hard(&self) -> bool {
        self.coeff_delta.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeff_u.iter().all(|c| c.is_finite())
            && self.coeff_delta.iter().all(|c| c.is_finite())
            && self.constant.is_finite()
    }

    /// Signed left-hand side at `(u, delta)`.
    pub fn eval(&self, u: Vec2, delta: &[f64; N_RELAX]) -> f64 {
        self.coeff_u[0] * u.x
            + self.coeff_u[1] * u.y
            + self
                .coeff_delta
                .iter()
                .zip(delta)
                .map(|(c, d)| c * d)
                .sum::<f64>()
            + self.constant
    }

    /// Whether the row holds at `(u, delta)` within `tol`.
    pub fn holds(&self, u: Vec2, delta: &[f64; N_RELAX], tol: f64) -> bool {
        let v = self.eval(u, delta);
        match self.sense {
            Sense::LeqZero => v <= tol,
            Sense::GeqZero => v >= -tol,
        }
    }

    /// The row in normalized `a . z >= b` form over `z = [u, delta]`.
    pub fn as_geq(&self) -> ([f64; N_CONTROLS + N_RELAX], f64) {
        let sign = match self.sense {
            Sense::GeqZero => 1.0,
            Sense::LeqZero => -1.0,
        };
        let mut normal = [0.0; N_CONTROLS + N_RELAX];
        normal[0] = sign * self.coeff_u[0];
        normal[1] = sign * self.coeff_u[1];
        for (i, c) in self.coeff_delta.iter().enumerate() {
            normal[N_CONTROLS + i] = sign * c;
        }
        (normal, -sign * self.constant)
    }

    /// Scale the whole row by `factor > 0` (preserves the feasible set).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeff_u: [self.coeff_u[0] * factor, self.coeff_u[1] * factor],
            coeff_delta: self.coeff_delta.map(|c| c * factor),
            constant: self.constant * factor,
            sense: self.sense,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geq_normalization_flips_leq_rows() {
        let row = AffineRow::relaxed([2.0, -1.0], 3.0, RelaxSlot::Heading);
        let (a, b) = row.as_geq();
        assert_eq!(a[0], -2.0);
        assert_eq!(a[1], 1.0);
        assert_eq!(a[3], 1.0); // heading slot, flipped from -1
        assert_eq!(b, 3.0);

        let row = AffineRow::barrier([1.0, 0.0], -0.5);
        let (a, b) = row.as_geq();
        assert_eq!(a[0], 1.0);
        assert_eq!(b, 0.5);
    }

    #[test]
    fn holds_respects_sense() {
        let row = AffineRow::barrier([1.0, 0.0], 0.0); // a >= 0
        assert!(row.holds(Vec2::new(0.5, 0.0), &[0.0; 4], 1e-12));
        assert!(!row.holds(Vec2::new(-0.5, 0.0), &[0.0; 4], 1e-12));

        let row = AffineRow::relaxed([1.0, 0.0], 0.0, RelaxSlot::Speed); // a - delta_v <= 0
        assert!(row.holds(Vec2::new(0.5, 0.0), &[0.0, 0.0, 1.0, 0.0], 1e-12));
        assert!(!row.holds(Vec2::new(0.5, 0.0), &[0.0; 4], 1e-12));
    }
}
