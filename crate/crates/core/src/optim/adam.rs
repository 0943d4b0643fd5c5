use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{FactorModel, GradientSet};

/// Adam moments for every parameter matrix of one model, in
/// [`FactorModel::params_mut`] order.
#[derive(Clone, Debug)]
pub struct AdamState {
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
    step_count: u64,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &FactorModel, eta: f64) -> Self {
        let zeros: Vec<DenseMatrix> = model
            .params()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            second: zeros.clone(),
            first: zeros,
            step_count: 0,
            eta,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, model: &mut FactorModel, grads: &GradientSet) -> Result<()> {
        let n_grads = grads.iter().count();
        if n_grads != self.first.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{n_grads} gradients for {} parameters", self.first.len()),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eta, eps) = (self.beta1, self.beta2, self.eta, self.eps);
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grads.iter())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam_step", "gradient/parameter shape mismatch"));
            }
            for (((p, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= eta * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Plain gradient descent, `θ ← θ − η g`.
pub fn gd_step(model: &mut FactorModel, grads: &GradientSet, eta: f64) -> Result<()> {
    for (p, g) in model.params_mut().zip(grads.iter()) {
        p.axpy(-eta, g)?;
    }
    Ok(())
}
