//! wasm-bindgen bindings behind `www/index.html`.
//!
//! Two operations are exposed: [`Completion`], which trains a model on a
//! masked synthetic image a few iterations at a time so the page can animate
//! it, and [`probe_flow`], which integrates the singular-value flow of a deep
//! linear factorization and returns the measured and predicted curves.

use rdmf::io::{synthetic_image, SyntheticKind};
use rdmf::linalg::{singular_values, DenseMatrix, Rng};
use rdmf::metrics::{effective_rank, nmae};
use rdmf::model::{ActivationKind, FactorModel};
use rdmf::objective::{MaskMatrix, Objective, Regularizer, RegularizerKind};
use rdmf::optim::{AdamState, TrainConfig};
use rdmf::probe::{run_flow_probe, FlowProbeConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_gray(m: &DenseMatrix) -> Vec<u8> {
    m.as_slice()
        .iter()
        .map(|&v| {
            let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            (v * 255.0 + 0.5).floor() as u8
        })
        .collect()
}

/// A training run that advances on demand.
#[wasm_bindgen]
pub struct Completion {
    objective: Objective,
    model: FactorModel,
    adam: AdamState,
    output: DenseMatrix,
    losses: Vec<f64>,
}

#[wasm_bindgen]
impl Completion {
    /// `kind` is `blocks`, `text` or `scene`; `regularizer` is `none`, `tvl1`,
    /// `tvl2` or `tvquad`; `activation` is any activation name the core
    /// library accepts.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: &str,
        size: usize,
        missing_pct: f64,
        regularizer: &str,
        lambda: f64,
        depth: usize,
        activation: &str,
        eta: f64,
        seed: u32,
    ) -> Result<Completion, JsError> {
        let kind: SyntheticKind = kind.parse().map_err(js_err)?;
        let reg: RegularizerKind = regularizer.parse().map_err(js_err)?;
        let act: ActivationKind = activation.parse().map_err(js_err)?;
        let seed = u64::from(seed);
        let image = synthetic_image(kind, size, seed).map_err(js_err)?;
        let mask = MaskMatrix::random(size, size, missing_pct, &mut Rng::new(seed)).map_err(js_err)?;
        let lambda = if reg == RegularizerKind::None { 0.0 } else { lambda };
        let objective = Objective::new(image, mask, Regularizer::new(reg), lambda).map_err(js_err)?;
        let mut cfg = TrainConfig::for_shape(size, size)
            .with_architecture(depth, size)
            .with_activation(act);
        cfg.eta = eta;
        cfg.seed = seed;
        let model = cfg.build_model().map_err(js_err)?;
        let adam = AdamState::new(&model, eta);
        let output = model.evaluate();
        Ok(Completion {
            objective,
            model,
            adam,
            output,
            losses: Vec::new(),
        })
    }

    /// Runs `n` Adam updates and returns the loss before the last one.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        for _ in 0..n {
            self.output = self.model.forward();
            let (loss, upstream) = self.objective.total_loss(&self.output).map_err(js_err)?;
            if !loss.is_finite() {
                return Err(JsError::new("training diverged; lower the step size"));
            }
            self.losses.push(loss);
            let grads = self.model.backward(&upstream).map_err(js_err)?;
            self.adam.step(&mut self.model, &grads).map_err(js_err)?;
        }
        self.output = self.model.evaluate();
        Ok(self.losses.last().copied().unwrap_or(f64::NAN))
    }

    pub fn iterations(&self) -> usize {
        self.losses.len()
    }

    pub fn size(&self) -> usize {
        self.objective.shape().0
    }

    pub fn original(&self) -> Vec<u8> {
        to_gray(&self.objective.data)
    }

    /// Observed pixels as gray levels, missing pixels as 0.
    pub fn observed(&self) -> Vec<u8> {
        let (rows, cols) = self.objective.shape();
        let m = DenseMatrix::from_fn(rows, cols, |i, j| {
            if self.objective.mask.is_observed(i, j) {
                self.objective.data[(i, j)]
            } else {
                0.0
            }
        });
        to_gray(&m)
    }

    pub fn restored(&self) -> Vec<u8> {
        to_gray(&self.output)
    }

    /// Error on the missing pixels; NaN when it is undefined.
    pub fn nmae(&self) -> f64 {
        nmae(&self.objective.data, &self.output, &self.objective.mask).unwrap_or(f64::NAN)
    }

    pub fn effective_rank(&self) -> f64 {
        effective_rank(&self.output).map_or(f64::NAN, |r| r.value)
    }

    /// Singular values of the current output, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        singular_values(&self.output).unwrap_or_default()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }
}

/// Singular-value trajectories from [`probe_flow`], stored step-major:
/// entry `k * d + r` belongs to step `k` and singular value `r`.
#[wasm_bindgen]
pub struct ProbeCurves {
    d: usize,
    t: Vec<f64>,
    sigma: Vec<f64>,
    measured: Vec<f64>,
    predicted: Vec<f64>,
    max_residual: f64,
    max_scaled_error: f64,
}

#[wasm_bindgen]
impl ProbeCurves {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.sigma.clone()
    }

    pub fn measured(&self) -> Vec<f64> {
        self.measured.clone()
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.predicted.clone()
    }

    /// Largest relative velocity residual away from crossings and stationary points.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Largest absolute residual divided by the largest measured velocity.
    pub fn max_scaled_error(&self) -> f64 {
        self.max_scaled_error
    }
}

/// Runs the gradient-flow probe on a random `d × d` instance. With
/// `lambda > 0` the quadratic TV penalty is added and the predictions include
/// its term.
#[wasm_bindgen]
pub fn probe_flow(
    d: usize,
    depth: usize,
    steps: usize,
    dt: f64,
    lambda: f64,
    mask_density: f64,
    seed: u32,
) -> Result<ProbeCurves, JsError> {
    let cfg = FlowProbeConfig {
        d,
        depth,
        dt,
        steps,
        lambda,
        use_tvquad: lambda > 0.0,
        mask_density,
        seed: u64::from(seed),
        ..FlowProbeConfig::default()
    };
    let run = run_flow_probe(&cfg).map_err(js_err)?;
    let mut curves = ProbeCurves {
        d,
        t: Vec::with_capacity(run.records.len()),
        sigma: Vec::new(),
        measured: Vec::new(),
        predicted: Vec::new(),
        max_residual: run.max_cor1_residual(),
        max_scaled_error: run.max_scaled_cor1_error(),
    };
    for rec in &run.records {
        curves.t.push(rec.t);
        curves.sigma.extend_from_slice(&rec.svd.sigma);
        curves.measured.extend_from_slice(&rec.measured);
        curves.predicted.extend_from_slice(&rec.predicted_cor1);
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_steps_reduce_loss() {
        let mut c = Completion::new("blocks", 16, 0.5, "tvl2", 0.01, 3, "linear", 1e-2, 1)
            .unwrap_or_else(|_| panic!("construct"));
        let first = c.step(1).unwrap_or(f64::NAN);
        let later = c.step(200).unwrap_or(f64::NAN);
        assert!(later < first, "{first} -> {later}");
        assert_eq!(c.iterations(), 201);
        assert_eq!(c.restored().len(), 256);
        assert!(c.nmae().is_finite());
    }

    #[test]
    fn probe_curves_have_step_major_layout() {
        let curves = probe_flow(6, 2, 40, 1e-3, 0.1, 0.5, 3).unwrap_or_else(|_| panic!("probe"));
        assert_eq!(curves.t().len(), 40);
        assert_eq!(curves.sigma().len(), 40 * 6);
        assert_eq!(curves.predicted().len(), curves.measured().len());
    }
}
