//! Thin singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! The working matrix is oriented so it has at least as many rows as
//! columns; column pairs are rotated until every pair is orthogonal to a
//! relative tolerance. Column norms are then the singular values.

use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

const ROTATION_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// `m = U · diag(S) · Vᵀ` with `U` (rows×k), `V` (cols×k), `k = min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn left_vector(&self, r: usize) -> Vec<f64> {
        self.u.column(r)
    }

    pub fn right_vector(&self, r: usize) -> Vec<f64> {
        self.v.column(r)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, &s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul_t(&self.v).expect("consistent svd factor shapes")
    }
}

pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::Unsupported("svd of a matrix with non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

/// Singular values only, sorted non-increasing.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.s)
}

fn jacobi_tall(a: &DenseMatrix) -> Result<SvdResult> {
    let (rows, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns below this squared norm are numerically zero: rotating them
    // against others only shuffles rounding noise.
    let frob_sq: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let tol = rows.max(n) as f64 * f64::EPSILON;
    let negligible = tol * tol * frob_sq;
    let mut converged = n < 2;
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        residual = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || alpha <= negligible || beta <= negligible {
                    continue;
                }
                let rel = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                residual = residual.max(rel);
                if rel < ROTATION_TOL {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = DenseMatrix::zeros(rows, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut null_columns = Vec::new();
    let null_norm = negligible.sqrt().max(f64::MIN_POSITIVE * 1e10);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s.push(sigma);
        v.set_column(dst, &vcols[src]);
        // Numerically zero columns carry no direction information.
        if sigma > null_norm {
            let unit: Vec<f64> = cols[src].iter().map(|x| x / sigma).collect();
            u.set_column(dst, &unit);
        } else {
            null_columns.push(dst);
        }
    }
    complete_orthonormal(&mut u, &null_columns);
    Ok(SvdResult { u, s, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, using Gram–Schmidt (applied twice) on coordinate vectors.
fn complete_orthonormal(u: &mut DenseMatrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let rows = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|j| !missing.contains(j)).collect();
    for &target in missing {
        let basis: Vec<Vec<f64>> = filled.iter().map(|&j| u.column(j)).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..rows {
            let mut e = vec![0.0; rows];
            e[i] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(&e, b);
                    for (x, y) in e.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let n = dot(&e, &e).sqrt();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, e));
            }
        }
        let (n, e) = best.expect("at least one row");
        let unit: Vec<f64> = e.iter().map(|x| x / n).collect();
        u.set_column(target, &unit);
        filled.push(target);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, Rng};

    fn orthonormality_error(m: &DenseMatrix) -> f64 {
        let g = m.t_matmul(m).unwrap();
        g.sub(&DenseMatrix::identity(m.cols())).unwrap().max_abs()
    }

    fn check(m: &DenseMatrix) {
        let r = svd(m).unwrap();
        let k = m.rows().min(m.cols());
        assert_eq!(r.s.len(), k);
        assert_eq!(r.u.shape(), (m.rows(), k));
        assert_eq!(r.v.shape(), (m.cols(), k));
        assert!(orthonormality_error(&r.u) < 1e-10, "U not orthonormal");
        assert!(orthonormality_error(&r.v) < 1e-10, "V not orthonormal");
        assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
        let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
        let err = r.reconstruct().sub(m).unwrap().frobenius_norm();
        assert!(err / scale < 1e-10, "reconstruction error {err}");
    }

    #[test]
    fn diagonal_input() {
        let r = svd(&DenseMatrix::diag(&[3.0, 1.0])).unwrap();
        assert_eq!(r.s, vec![3.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((r.u[(i, j)].abs() - expected).abs() < 1e-15);
                assert!((r.v[(i, j)].abs() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_matrix() {
        let z = DenseMatrix::zeros(4, 4);
        let r = svd(&z).unwrap();
        assert_eq!(r.s, vec![0.0; 4]);
        assert!(orthonormality_error(&r.u) < 1e-12);
    }

    #[test]
    fn random_square_reconstructs() {
        let m = gaussian_matrix(&mut Rng::new(6), 6, 6, 1.0);
        check(&m);
    }

    #[test]
    fn rank_deficient_and_wide() {
        let mut rng = Rng::new(12);
        let a = gaussian_matrix(&mut rng, 7, 2, 1.0);
        let b = gaussian_matrix(&mut rng, 2, 5, 1.0);
        check(&a.matmul(&b).unwrap());
        check(&b);
        check(&a.matmul(&b).unwrap().transpose());
    }

    #[test]
    fn two_hundred_random_shapes() {
        let mut rng = Rng::new(99);
        for _ in 0..200 {
            let r = 2 + (rng.next_u64() % 15) as usize;
            let c = 2 + (rng.next_u64() % 15) as usize;
            check(&gaussian_matrix(&mut rng, r, c, 1.0));
        }
    }

    #[test]
    fn repeated_columns_converge() {
        let mut rng = Rng::new(5);
        let levels: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
        let blocky = DenseMatrix::from_fn(32, 32, |i, j| levels[(i / 8 + j / 11) % 4]);
        check(&blocky);
        check(&DenseMatrix::filled(9, 9, 0.7));
        let s = singular_values(&DenseMatrix::filled(9, 9, 0.7)).unwrap();
        assert!((s[0] - 6.3).abs() < 1e-12);
        assert!(s[1..].iter().all(|&x| x < 1e-13));
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DenseMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(svd(&m).is_err());
    }
}
