//! Restoration quality (NMAE on the unobserved entries) and the effective
//! rank of a restored matrix.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::ActivationKind;
use crate::objective::{MaskMatrix, RegularizerKind};

pub use crate::linalg::singular_values;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Mean absolute error over the unobserved entries, normalized by the
/// dynamic range `max(X) − min(X)` of the ground truth.
pub fn nmae(x: &DenseMatrix, xhat: &DenseMatrix, mask: &MaskMatrix) -> Result<f64> {
    if x.shape() != xhat.shape() || x.shape() != mask.shape() {
        return Err(Error::shape(
            "nmae",
            format!("{:?} / {:?} / mask {:?}", x.shape(), xhat.shape(), mask.shape()),
        ));
    }
    let missing = mask.missing_count();
    if missing == 0 {
        return Err(Error::UndefinedMetric("nmae needs at least one unobserved entry"));
    }
    let (lo, hi) = x.min_max();
    if !(hi > lo) {
        return Err(Error::UndefinedMetric("nmae needs a non-constant ground truth"));
    }
    let abs_err: f64 = x
        .as_slice()
        .iter()
        .zip(xhat.as_slice())
        .zip(mask.as_matrix().as_slice())
        .filter(|(_, &m)| m == 0.0)
        .map(|((a, b), _)| (a - b).abs())
        .sum();
    Ok(abs_err / ((hi - lo) * missing as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveRank {
    pub value: f64,
    /// Set when the input had no nonzero singular value; `value` is then 0.
    pub zero_matrix: bool,
}

/// `exp(−Σ p_k ln p_k)` with `p_k = σ_k / Σ σ_j`.
pub fn effective_rank(m: &DenseMatrix) -> Result<EffectiveRank> {
    Ok(effective_rank_of_spectrum(&singular_values(m)?))
}

pub fn effective_rank_of_spectrum(sigma: &[f64]) -> EffectiveRank {
    let max = sigma.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if max == 0.0 {
        return EffectiveRank {
            value: 0.0,
            zero_matrix: true,
        };
    }
    let kept: Vec<f64> = sigma
        .iter()
        .map(|s| s.abs())
        .filter(|&s| s > RANK_CUTOFF * max)
        .collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    EffectiveRank {
        value: entropy.exp(),
        zero_matrix: false,
    }
}

/// One row of an experiment table.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub missing_pct: f64,
    pub activation: ActivationKind,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub nmae: f64,
    pub effective_rank: f64,
    pub iters: usize,
    pub final_loss: f64,
    pub wall_time_s: f64,
}

impl MetricRecord {
    pub fn depth(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    /// Width of hidden layer `k` (1-based), if the model has one.
    pub fn hidden_width(&self, k: usize) -> Option<usize> {
        (k >= 1 && k < self.depth()).then(|| self.dims[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthogonal, Rng};

    #[test]
    fn nmae_examples() {
        let x = DenseMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]);
        let mask = MaskMatrix::new(DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]])).unwrap();
        assert_eq!(nmae(&x, &x, &mask).unwrap(), 0.0);
        let mut xh = x.clone();
        xh[(0, 0)] = 0.3;
        assert!((nmae(&x, &xh, &mask).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn nmae_undefined_cases() {
        let x = DenseMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0]]);
        assert!(matches!(
            nmae(&x, &x, &MaskMatrix::full(2, 2)),
            Err(Error::UndefinedMetric(_))
        ));
        let c = DenseMatrix::filled(2, 2, 1.0);
        assert!(nmae(&c, &c, &MaskMatrix::empty(2, 2)).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        assert!((effective_rank(&DenseMatrix::identity(5)).unwrap().value - 5.0).abs() < 1e-10);
        let u = DenseMatrix::column_vector(&[1.0, -2.0, 0.5]);
        let v = DenseMatrix::column_vector(&[3.0, 1.0, 1.0, 2.0]);
        let outer = u.matmul_t(&v).unwrap();
        assert!((effective_rank(&outer).unwrap().value - 1.0).abs() < 1e-10);
        let d = DenseMatrix::diag(&[1.0, 1.0, 0.0, 0.0]);
        assert!((effective_rank(&d).unwrap().value - 2.0).abs() < 1e-10);
        let z = effective_rank(&DenseMatrix::zeros(3, 3)).unwrap();
        assert!(z.zero_matrix);
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn singular_value_examples() {
        let s = singular_values(&DenseMatrix::diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(s, vec![3.0, 2.0, 1.0]);
        let q = random_orthogonal(&mut Rng::new(4), 4);
        for s in singular_values(&q).unwrap() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_rank_scale_invariant() {
        let m = gaussian_matrix(&mut Rng::new(3), 6, 4, 1.0);
        let base = effective_rank(&m).unwrap().value;
        for c in [-3.0, 1e-3, 250.0] {
            let scaled = effective_rank(&m.scale(c)).unwrap().value;
            assert!((scaled - base).abs() < 1e-10);
        }
    }
}
