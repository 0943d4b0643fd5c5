#![allow(dead_code)]

use rdmf::linalg::{gaussian_matrix, DenseMatrix, Rng};
use rdmf::model::{ActivationKind, FactorModel};
use rdmf::objective::{MaskMatrix, Objective, Regularizer, RegularizerKind};

pub const ACTIVATIONS: [ActivationKind; 4] = [
    ActivationKind::Linear,
    ActivationKind::ReLU,
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
];

pub const REGULARIZERS: [RegularizerKind; 4] = [
    RegularizerKind::None,
    RegularizerKind::TvL1,
    RegularizerKind::TvL2,
    RegularizerKind::TvQuad,
];

/// Random model with widths in 2..=8; biases whenever the activation is nonlinear.
pub fn random_model(rng: &mut Rng, depth: usize, d: usize, d_out: usize, act: ActivationKind) -> FactorModel {
    let mut dims = vec![d];
    for _ in 1..depth {
        dims.push(2 + (rng.next_u64() % 7) as usize);
    }
    dims.push(d_out);
    let weights = (0..depth)
        .map(|l| gaussian_matrix(rng, dims[l + 1], dims[l], 0.7))
        .collect();
    let biases = (act != ActivationKind::Linear).then(|| {
        (0..depth)
            .map(|l| gaussian_matrix(rng, dims[l + 1], d, 0.3))
            .collect()
    });
    FactorModel::new(dims, weights, biases, act).unwrap()
}

/// TV smoothing used by the gradient checks; see [`gradient_error`].
pub const CHECK_TV_EPS: f64 = 1e-4;

pub fn random_objective(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    reg: RegularizerKind,
    lambda: f64,
    tv_eps: f64,
) -> Objective {
    let data = DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform());
    let mask = MaskMatrix::random(rows, cols, 0.4, rng).unwrap();
    let lambda = if reg == RegularizerKind::None { 0.0 } else { lambda };
    Objective::new(data, mask, Regularizer::with_eps(reg, tv_eps), lambda).unwrap()
}

/// Largest `|a − n| / max(|a|, |n|, 1e-4)` between backprop and central
/// differences (step 1e-5) of the full loss, over every weight and bias entry.
///
/// At the objective's default eps = 1e-8 the smoothed `|D|` bends on a 1e-4
/// scale, and ReLU outputs produce exact zero differences right at that bend;
/// no single step is then both below the bend and above roundoff. Checks
/// involving ReLU and TV therefore use [`CHECK_TV_EPS`].
pub fn gradient_error(model: &FactorModel, obj: &Objective) -> f64 {
    let mut m = model.clone();
    let (_, upstream) = obj.total_loss(&m.forward()).unwrap();
    let grads = m.backward(&upstream).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.as_slice().to_vec()).collect();

    let h = 1e-5;
    let loss = |m: &FactorModel| obj.value(&m.evaluate()).unwrap();
    let mut numeric = Vec::with_capacity(analytic.len());
    let n_params: Vec<usize> = model.params().map(|p| p.as_slice().len()).collect();
    for (pi, &len) in n_params.iter().enumerate() {
        for k in 0..len {
            let mut plus = model.clone();
            plus.params_mut().nth(pi).unwrap().as_mut_slice()[k] += h;
            let mut minus = model.clone();
            minus.params_mut().nth(pi).unwrap().as_mut_slice()[k] -= h;
            numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
    }
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

/// Singular values from the eigenvalues of `MᵀM` or `MMᵀ` (cyclic Jacobi), descending.
pub fn gram_singular_values(m: &DenseMatrix) -> Vec<f64> {
    // use the smaller Gram matrix so no eigenvalue is a pure roundoff zero
    let (n, inner) = (m.rows().min(m.cols()), m.rows().max(m.cols()));
    let at = |k: usize, i: usize| if m.rows() >= m.cols() { m[(k, i)] } else { m[(i, k)] };
    let mut g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..inner).map(|k| at(k, i) * at(k, j)).sum()).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| g[i][j] * g[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if g[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (g[q][q] - g[p][p]) / (2.0 * g[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (gkp, gkq) = (g[k][p], g[k][q]);
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let (gpk, gqk) = (g[p][k], g[q][k]);
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
        }
    }
    let mut s: Vec<f64> = (0..n).map(|i| g[i][i].max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `exp(H)` of the normalized spectrum, written out directly.
pub fn entropy_rank(sigma: &[f64]) -> f64 {
    let max = sigma.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<f64> = sigma.iter().cloned().filter(|&s| s > 1e-12 * max).collect();
    let total: f64 = kept.iter().sum();
    let mut h = 0.0;
    for s in kept {
        let p = s / total;
        h -= p * p.ln();
    }
    h.exp()
}

/// NMAE by explicit double loop.
pub fn brute_nmae(x: &DenseMatrix, xhat: &DenseMatrix, mask: &MaskMatrix) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            lo = lo.min(x[(i, j)]);
            hi = hi.max(x[(i, j)]);
        }
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if !mask.is_observed(i, j) {
                sum += (x[(i, j)] - xhat[(i, j)]).abs();
                count += 1;
            }
        }
    }
    sum / (count as f64 * (hi - lo))
}
