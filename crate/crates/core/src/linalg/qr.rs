use super::{gaussian_matrix, DenseMatrix, Rng};

/// Householder QR of a square or tall matrix, returning the thin factors
/// `(Q, R)` with `R` upper triangular and a non-negative diagonal.
pub fn qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    assert!(m >= n, "qr expects rows >= cols");
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);

    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = super::norm(&v);
        if alpha == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = super::norm(&v);
        for x in &mut v {
            *x /= vnorm;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            for i in k..m {
                r[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        reflectors.push(v);
    }

    // Accumulate Q = H_0 H_1 ... H_{n-1} applied to the first n unit columns.
    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..n {
            let s: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
    }

    let mut r_thin = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r_thin[(i, j)] = r[(i, j)];
        }
    }
    for i in 0..n {
        if r_thin[(i, i)] < 0.0 {
            for j in i..n {
                r_thin[(i, j)] = -r_thin[(i, j)];
            }
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    (q, r_thin)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs fixed so that `R` has a positive diagonal.
pub fn random_orthogonal(rng: &mut Rng, n: usize) -> DenseMatrix {
    let g = gaussian_matrix(rng, n, n, 1.0);
    qr(&g).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let mut rng = Rng::new(8);
        for &(m, n) in &[(5, 5), (7, 3), (1, 1)] {
            let a = gaussian_matrix(&mut rng, m, n, 1.0);
            let (q, r) = qr(&a);
            let back = q.matmul(&r).unwrap();
            assert!(back.sub(&a).unwrap().frobenius_norm() < 1e-12);
            let qtq = q.t_matmul(&q).unwrap();
            assert!(qtq.sub(&DenseMatrix::identity(n)).unwrap().frobenius_norm() < 1e-12);
            for i in 0..n {
                assert!(r[(i, i)] >= 0.0);
            }
        }
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let q = random_orthogonal(&mut Rng::new(1), 9);
        let qqt = q.matmul_t(&q).unwrap();
        assert!(qqt.sub(&DenseMatrix::identity(9)).unwrap().frobenius_norm() < 1e-12);
    }
}
