use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthogonal, svd, DenseMatrix, Rng};
use crate::model::{ActivationKind, FactorModel};

/// Default initialization standard deviation: `N(0, 1e-3)` read as a
/// variance of 1e-3.
pub const DEFAULT_INIT_STD: f64 = 0.031_622_776_601_683_79;

/// Weights i.i.d. `N(0, std²)` drawn layer by layer in row-major order;
/// biases (if any) start at zero.
pub fn init_gaussian(
    dims: &[usize],
    activation: ActivationKind,
    use_bias: bool,
    seed: u64,
    std: f64,
) -> Result<FactorModel> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::Config(format!("init std must be finite and >= 0, got {std}")));
    }
    let mut model = FactorModel::zeros(dims.to_vec(), activation, use_bias)?;
    let mut rng = Rng::new(seed);
    for w in model.weights_mut() {
        *w = gaussian_matrix(&mut rng, w.rows(), w.cols(), std);
    }
    Ok(model)
}

/// Balanced linear factors whose product is a random `d×d` target with
/// i.i.d. `N(0, scale²/d)` entries (so its singular values are O(scale)).
pub fn init_balanced(dims: &[usize], seed: u64, scale: f64) -> Result<FactorModel> {
    let d = *dims.first().ok_or_else(|| Error::shape("init_balanced", "empty dims"))?;
    if dims.len() < 2 || dims.iter().any(|&m| m != d) {
        return Err(Error::Unsupported(format!(
            "balanced initialization needs equal square dims, got {dims:?}"
        )));
    }
    let mut rng = Rng::new(seed);
    let target = gaussian_matrix(&mut rng, d, d, scale / (d as f64).sqrt());
    init_balanced_from_target(&target, dims.len() - 1, &mut rng)
}

/// Factors `W_{L-1} = U S^{1/L} R_{L-1}ᵀ`, `W_l = R_{l+1} S^{1/L} R_lᵀ`,
/// `W_0 = R_1 S^{1/L} Vᵀ` from the SVD `target = U S Vᵀ` and random
/// orthogonal `R_l`. They satisfy `W_{l+1}ᵀ W_{l+1} = W_l W_lᵀ` and
/// multiply out to `target`.
pub fn init_balanced_from_target(
    target: &DenseMatrix,
    depth: usize,
    rng: &mut Rng,
) -> Result<FactorModel> {
    if !target.is_square() {
        return Err(Error::Unsupported("balanced initialization needs a square target".into()));
    }
    if depth < 1 {
        return Err(Error::shape("init_balanced", "depth must be at least 1"));
    }
    let d = target.rows();
    let dec = svd(target)?;
    let root = DenseMatrix::diag(
        &dec.s
            .iter()
            .map(|s| s.powf(1.0 / depth as f64))
            .collect::<Vec<_>>(),
    );
    // rotations[l] = R_l for l = 1..L-1; the outer ends use V and U.
    let rotations: Vec<DenseMatrix> = (1..depth).map(|_| random_orthogonal(rng, d)).collect();
    let left = |l: usize| -> &DenseMatrix {
        // R_{l+1}, or U for the last layer
        if l + 1 == depth {
            &dec.u
        } else {
            &rotations[l]
        }
    };
    let right = |l: usize| -> &DenseMatrix {
        // R_l, or V for the first layer
        if l == 0 {
            &dec.v
        } else {
            &rotations[l - 1]
        }
    };
    let weights = (0..depth)
        .map(|l| left(l).matmul(&root)?.matmul_t(right(l)))
        .collect::<Result<Vec<_>>>()?;
    FactorModel::new(vec![d; depth + 1], weights, None, ActivationKind::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_model() {
        let mut m = init_gaussian(&[3, 4, 3], ActivationKind::Sigmoid, true, 1, 0.0).unwrap();
        assert!(m.forward().as_slice().iter().all(|&v| v == 0.5));
        let mut m = init_gaussian(&[3, 4, 3], ActivationKind::Linear, false, 1, 0.0).unwrap();
        assert_eq!(m.forward().max_abs(), 0.0);
    }

    #[test]
    fn gaussian_init_is_seeded() {
        let a = init_gaussian(&[5, 6, 5], ActivationKind::Linear, false, 9, 0.1).unwrap();
        let b = init_gaussian(&[5, 6, 5], ActivationKind::Linear, false, 9, 0.1).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn gaussian_init_sample_std() {
        let m = init_gaussian(&[240, 240, 240], ActivationKind::Linear, false, 3, DEFAULT_INIT_STD).unwrap();
        let w = m.weights()[0].as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / 0.03162 - 1.0).abs() < 0.03);
    }

    #[test]
    fn scalar_balanced_square_root() {
        let target = DenseMatrix::from_rows(&[[4.0]]);
        let m = init_balanced_from_target(&target, 2, &mut Rng::new(0)).unwrap();
        assert!((m.weights()[0][(0, 0)].abs() - 2.0).abs() < 1e-15);
        assert!((m.weights()[1][(0, 0)].abs() - 2.0).abs() < 1e-15);
        assert!(m.balancedness_residual() < 1e-14);
    }

    #[test]
    fn balanced_and_reconstructs() {
        for depth in [2, 3, 4] {
            let mut rng = Rng::new(depth as u64);
            let target = gaussian_matrix(&mut rng, 8, 8, 0.5);
            let m = init_balanced_from_target(&target, depth, &mut rng).unwrap();
            assert!(m.balancedness_residual() < 1e-10, "depth {depth}");
            let err = m.product_matrix().unwrap().sub(&target).unwrap().frobenius_norm();
            assert!(err < 1e-8 * target.frobenius_norm());
        }
        let m = init_balanced(&[6, 6, 6, 6], 4, 1.0).unwrap();
        assert!(m.balancedness_residual() < 1e-10);
        assert!(init_balanced(&[6, 5, 6], 4, 1.0).is_err());
    }
}
