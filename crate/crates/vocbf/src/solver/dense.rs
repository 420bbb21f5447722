//! Dense strictly-convex QP kernel (dual active-set method of Goldfarb and
//! Idnani).
//!
//! Solves `min 1/2 z' G z + c' z  s.t.  a_i . z >= b_i` for positive-definite
//! `G`. The method starts from the unconstrained minimum and adds violated
//! constraints one at a time, maintaining a QR factorization of the active
//! normals in the metric of `G^-1`. Infeasibility is detected exactly: a
//! violated constraint whose normal lies in the span of the active set with no
//! droppable dual has an empty feasible region.
//!
//! Matrices are stored column-major; `R` is packed upper-triangular by
//! columns.

#[derive(Debug, Clone, PartialEq)]
pub enum DenseOutcome {
    Optimal { z: Vec<f64>, objective: f64 },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DenseError {
    #[error("objective matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("active-set iteration failed to converge")]
    Stalled,
}

/// Normalized violation below which a constraint counts as satisfied.
const FEAS_TOL: f64 = 1e-10;

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// In-place upper Cholesky factor: `G = R' R` with `R` upper triangular,
/// column-major. Fails if `G` is not positive definite.
fn cholesky_upper(mat: &mut [f64], n: usize) -> Result<(), DenseError> {
    for j in 0..n {
        for k in 0..j {
            let s = dot(&mat[k * n..k * n + k], &mat[j * n..j * n + k]);
            mat[k + j * n] = (mat[k + j * n] - s) / mat[k + k * n];
        }
        let s = mat[j + j * n] - dot(&mat[j * n..j * n + j], &mat[j * n..j * n + j]);
        if s <= 0.0 {
            return Err(DenseError::NotPositiveDefinite);
        }
        mat[j + j * n] = s.sqrt();
    }
    Ok(())
}

/// Solve `R x = b` in place (upper triangular, column-major).
fn solve_upper(mat: &[f64], n: usize, vec: &mut [f64]) {
    for k in (0..n).rev() {
        vec[k] /= mat[k + k * n];
        let vk = vec[k];
        axpy(-vk, &mat[k * n..k * n + k], &mut vec[..k]);
    }
}

/// Solve `R' x = b` in place.
fn solve_upper_transpose(mat: &[f64], n: usize, vec: &mut [f64]) {
    for k in 0..n {
        vec[k] -= dot(&mat[k * n..k * n + k], &vec[..k]);
        vec[k] /= mat[k + k * n];
    }
}

/// Invert an upper-triangular matrix in place.
fn invert_upper(mat: &mut [f64], n: usize) {
    for k in 0..n {
        mat[k + k * n] = 1.0 / mat[k + k * n];
        let d = -mat[k + k * n];
        for v in mat[k * n..k * n + k].iter_mut() {
            *v *= d;
        }
        let (left, right) = mat.split_at_mut(n + k * n);
        for j in 0..n - k - 1 {
            let f = right[k + j * n];
            axpy(f, &left[k * n..k * n + k], &mut right[j * n..j * n + k]);
            right[k + j * n] *= left[k + k * n];
        }
    }
}

/// Neighboring column pair `(col-1, col)` of a column-major matrix.
fn column_pair(mat: &mut [f64], col: usize, n: usize) -> (&mut [f64], &mut [f64]) {
    let (left, right) = mat.split_at_mut(col * n);
    (&mut left[(col - 1) * n..], &mut right[..n])
}

/// Apply Givens rotations to zero `vec[r..]` into `vec[r-1]`, applying the
/// same rotations to the columns of `jmat`.
fn qr_insert(r: usize, vec: &mut [f64], jmat: &mut [f64], n: usize) {
    for i in (r..n).rev() {
        if vec[i] == 0.0 {
            continue;
        }
        let (left, right) = column_pair(jmat, i, n);
        if vec[i - 1] == 0.0 {
            vec[i - 1] = vec[i];
            left.swap_with_slice(right);
        } else {
            let h = f64::hypot(vec[i - 1], vec[i]).copysign(vec[i - 1]);
            let gc = vec[i - 1] / h;
            let gs = vec[i] / h;
            let nu = vec[i] / (vec[i - 1] + h);
            vec[i - 1] = h;
            for (li, ri) in left.iter_mut().zip(right.iter_mut()) {
                let t = gc * *li + gs * *ri;
                *ri = nu * (*li + t) - *ri;
                *li = t;
            }
        }
    }
}

/// Remove column `col` (1-indexed) from the packed triangular `rmat` holding
/// `r_cols` columns, restoring triangularity; the rotations are mirrored on
/// the columns of `jmat`.
fn qr_delete(col: usize, r_cols: usize, jmat: &mut [f64], rmat: &mut [f64], n: usize) {
    for i in col..r_cols {
        let di = i * (i + 1) / 2;
        let l = di + i;
        if rmat[l] == 0.0 {
            // still shift the remaining part of this column left
            let (left, right) = {
                let (a, b) = rmat.split_at_mut(di);
                (&mut a[di - i..], &mut b[..i])
            };
            left.swap_with_slice(right);
            continue;
        }
        let (jl, jr) = column_pair(jmat, i, n);
        if rmat[l - 1] == 0.0 {
            let mut ind = l;
            for j in i + 1..=r_cols {
                rmat.swap(ind - 1, ind);
                ind += j;
            }
            jl.swap_with_slice(jr);
        } else {
            let h = f64::hypot(rmat[l - 1], rmat[l]).copysign(rmat[l - 1]);
            let gc = rmat[l - 1] / h;
            let gs = rmat[l] / h;
            let nu = rmat[l] / (rmat[l - 1] + h);
            let mut ind = l;
            for j in i + 1..=r_cols {
                let t = gc * rmat[ind - 1] + gs * rmat[ind];
                rmat[ind] = nu * (rmat[ind - 1] + t) - rmat[ind];
                rmat[ind - 1] = t;
                ind += j;
            }
            for (li, ri) in jl.iter_mut().zip(jr.iter_mut()) {
                let t = gc * *li + gs * *ri;
                *ri = nu * (*li + t) - *ri;
                *li = t;
            }
        }
        let (left, right) = {
            let (a, b) = rmat.split_at_mut(di);
            (&mut a[di - i..], &mut b[..i])
        };
        left.swap_with_slice(right);
    }
}

/// Solve the QP. `gmat` is the symmetric positive-definite objective matrix
/// (dense `n x n`), `c` the linear term; each `normals[i] . z >= rhs[i]`.
pub fn solve_dense(
    gmat: &[f64],
    c: &[f64],
    normals: &[Vec<f64>],
    rhs: &[f64],
) -> Result<DenseOutcome, DenseError> {
    let n = c.len();
    let q = rhs.len();
    debug_assert_eq!(gmat.len(), n * n);
    debug_assert!(normals.iter().all(|a| a.len() == n));

    // factorize and get the unconstrained minimum
    let mut jmat = gmat.to_vec();
    cholesky_upper(&mut jmat, n)?;
    let mut z: Vec<f64> = c.iter().map(|v| -v).collect();
    solve_upper_transpose(&jmat, n, &mut z);
    solve_upper(&jmat, n, &mut z);
    invert_upper(&mut jmat, n);
    for j in 0..n {
        for i in j + 1..n {
            jmat[i + j * n] = 0.0;
        }
    }

    // normalize each row to unit norm: mixing big-M rows with unit box rows
    // would otherwise strain the QR updates
    let mut normals: Vec<Vec<f64>> = normals.to_vec();
    let mut rhs: Vec<f64> = rhs.to_vec();
    for (a, b) in normals.iter_mut().zip(rhs.iter_mut()) {
        let n = dot(a, a).sqrt();
        if n > 1e-300 {
            for v in a.iter_mut() {
                *v /= n;
            }
            *b /= n;
        }
    }

    let r_cap = n.min(q);
    let mut rmat = vec![0.0; r_cap * (r_cap + 1) / 2];
    let mut active: Vec<usize> = Vec::with_capacity(r_cap);
    let mut duals: Vec<f64> = Vec::with_capacity(r_cap);
    let mut dvec = vec![0.0; n];
    let mut zdir = vec![0.0; n];
    let mut rstep = vec![0.0; r_cap];

    let max_iter = 100 * (q + n) + 100;
    let mut iter = 0usize;

    loop {
        // most-violated constraint (rows are unit-norm)
        let mut pick = q;
        let mut worst = -FEAS_TOL;
        for i in 0..q {
            if active.contains(&i) {
                continue;
            }
            let s = dot(&normals[i], &z) - rhs[i];
            if s < worst {
                worst = s;
                pick = i;
            }
        }
        if pick == q {
            let mut obj = dot(c, &z);
            for i in 0..n {
                let row = &gmat[i * n..(i + 1) * n];
                obj += 0.5 * z[i] * dot(row, &z);
            }
            return Ok(DenseOutcome::Optimal { z, objective: obj });
        }

        let a_new = &normals[pick];
        let mut slack = dot(a_new, &z) - rhs[pick];
        let mut u_new = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(DenseError::Stalled);
            }

            // d = J' a, step directions in primal and dual space
            for (i, d) in dvec.iter_mut().enumerate() {
                *d = dot(&jmat[i * n..(i + 1) * n], a_new);
            }
            zdir.fill(0.0);
            for i in active.len()..n {
                axpy(dvec[i], &jmat[i * n..(i + 1) * n], &mut zdir);
            }
            let na = active.len();
            rstep[..na].copy_from_slice(&dvec[..na]);
            for i in (0..na).rev() {
                let start = i * (i + 1) / 2;
                rstep[i] /= rmat[start + i];
                let ri = rstep[i];
                for k in 0..i {
                    rstep[k] -= ri * rmat[start + k];
                }
            }

            // longest dual step before an active constraint's multiplier hits zero
            let mut t1 = f64::INFINITY;
            let mut drop_idx = usize::MAX;
            for k in 0..na {
                if rstep[k] > 0.0 {
                    let t = duals[k] / rstep[k];
                    if t < t1 {
                        t1 = t;
                        drop_idx = k;
                    }
                }
            }

            // primal step to make the new constraint tight
            let d_sq = dot(&dvec, &dvec);
            let ztn = dot(&zdir, a_new);
            let t2 = if ztn <= f64::EPSILON * (1.0 + d_sq) {
                f64::INFINITY
            } else {
                -slack / ztn
            };

            if t1 == f64::INFINITY && t2 == f64::INFINITY {
                return Ok(DenseOutcome::Infeasible);
            }
            let t = t1.min(t2);

            if t2.is_finite() {
                axpy(t, &zdir, &mut z);
            }
            for k in 0..na {
                duals[k] -= t * rstep[k];
            }
            u_new += t;

            if t2 <= t1 {
                // full step: add the constraint to the active set
                active.push(pick);
                duals.push(u_new);
                qr_insert(active.len(), &mut dvec, &mut jmat, n);
                let start = active.len() * (active.len() - 1) / 2;
                rmat[start..start + active.len()].copy_from_slice(&dvec[..active.len()]);
                break;
            }
            // partial step: drop the blocking constraint and retry
            qr_delete(drop_idx + 1, na, &mut jmat, &mut rmat, n);
            active.remove(drop_idx);
            duals.remove(drop_idx);
            slack = dot(a_new, &z) - rhs[pick];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_minimum() {
        let g = vec![2.0, 0.0, 0.0, 2.0];
        let c = vec![-2.0, -4.0];
        let out = solve_dense(&g, &c, &[], &[]).unwrap();
        match out {
            DenseOutcome::Optimal { z, objective } => {
                assert_relative_eq!(z[0], 1.0, epsilon = 1e-12);
                assert_relative_eq!(z[1], 2.0, epsilon = 1e-12);
                assert_relative_eq!(objective, -5.0, epsilon = 1e-12);
            }
            _ => panic!("expected optimal"),
        }
    }

    #[test]
    fn single_active_constraint() {
        // min 1/2(x^2 + y^2) s.t. x + y >= 2 -> (1, 1)
        let g = vec![1.0, 0.0, 0.0, 1.0];
        let c = vec![0.0, 0.0];
        let out = solve_dense(&g, &c, &[vec![1.0, 1.0]], &[2.0]).unwrap();
        match out {
            DenseOutcome::Optimal { z, objective } => {
                assert_relative_eq!(z[0], 1.0, epsilon = 1e-10);
                assert_relative_eq!(z[1], 1.0, epsilon = 1e-10);
                assert_relative_eq!(objective, 1.0, epsilon = 1e-10);
            }
            _ => panic!("expected optimal"),
        }
    }

    #[test]
    fn reference_three_variable_problem() {
        // min 1/2 z'z - [0,5,0].z  s.t. -4x-3y >= -8, 2x+y >= 2, -2y+z >= 0
        let g = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let c = vec![0.0, -5.0, 0.0];
        let normals = vec![vec![-4.0, -3.0, 0.0], vec![2.0, 1.0, 0.0], vec![0.0, -2.0, 1.0]];
        let rhs = vec![-8.0, 2.0, 0.0];
        match solve_dense(&g, &c, &normals, &rhs).unwrap() {
            DenseOutcome::Optimal { z, objective } => {
                assert_relative_eq!(z[0], 0.476190476190476, epsilon = 1e-9);
                assert_relative_eq!(z[1], 1.04761904761905, epsilon = 1e-9);
                assert_relative_eq!(z[2], 2.0952380952381, epsilon = 1e-9);
                assert_relative_eq!(objective, -2.38095238095238, epsilon = 1e-9);
            }
            _ => panic!("expected optimal"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // x >= 3 and -x >= -2 cannot both hold
        let g = vec![1.0];
        let c = vec![0.0];
        let out = solve_dense(&g, &c, &[vec![1.0], vec![-1.0]], &[3.0, -2.0]).unwrap();
        assert_eq!(out, DenseOutcome::Infeasible);
    }

    #[test]
    fn cycles_through_drops() {
        // box-constrained with a conflicting preference: forces constraint swaps
        let g = vec![1.0, 0.9, 0.9, 1.0];
        let c = vec![-10.0, 10.0];
        let normals = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let rhs = vec![-1.0, -1.0, -1.0, -1.0];
        match solve_dense(&g, &c, &normals, &rhs).unwrap() {
            DenseOutcome::Optimal { z, .. } => {
                assert_relative_eq!(z[0], 1.0, epsilon = 1e-10);
                assert_relative_eq!(z[1], -1.0, epsilon = 1e-10);
            }
            _ => panic!("expected optimal"),
        }
    }

    #[test]
    fn rejects_indefinite() {
        let g = vec![1.0, 0.0, 0.0, -1.0];
        let c = vec![0.0, 0.0];
        assert!(matches!(
            solve_dense(&g, &c, &[], &[]),
            Err(DenseError::NotPositiveDefinite)
        ));
    }
}
