//! Gradient-flow probe for deep linear factorizations.
//!
//! Integrates `Ẇ_l = −∂R/∂W_l` by explicit Euler from a balanced start and
//! compares the measured velocity of every signed singular value of the
//! product `W = W_{L-1} ··· W_0` against the closed-form laws
//!
//! ```text
//! σ̇_r = −L (σ_r²)^{1−1/L} ⟨∇_W R_Ω, u_r v_rᵀ⟩                       (fidelity only)
//! σ̇_r = −L (σ_r²)^{1−1/L} ⟨∇_W R_Ω, u_r v_rᵀ⟩ − 2Lλ σ_r (σ_r²)^{1−1/L} γ_r
//! ```
//!
//! where the second form holds for `R = R_Ω + λ(‖AW‖² + ‖WAᵀ‖²)` and
//! `γ_r = ‖A u_r‖² + ‖A v_r‖²`.

mod rank_trend;
mod tracking;

pub use rank_trend::{rank_trend_experiment, RankTrendGrid, RankTrendRow};
pub use tracking::{track_signed_svd, SignedSvd, AMBIGUITY_MARGIN, CROSSING_GAP};

use crate::error::{Error, Result};
use crate::linalg::{difference_matrix, gaussian_matrix, DenseMatrix, Rng};
use crate::model::{ActivationKind, FactorModel};
use crate::objective::{fidelity_grad, MaskMatrix, Objective, Regularizer, RegularizerKind};
use crate::optim::init_balanced;

/// Floor added to `|measured|` in relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// A velocity is treated as passing through zero when it would reach zero
/// within this many steps at its current rate of change.
pub const STATIONARY_STEPS: f64 = 100.0;

/// One explicit-Euler step `W_l ← W_l − dt·∂R/∂W_l`, all layers at once,
/// with every gradient taken at the pre-step parameters.
pub fn flow_step(model: &mut FactorModel, obj: &Objective, dt: f64) -> Result<()> {
    if model.activation() != ActivationKind::Linear || model.use_bias() {
        return Err(Error::Unsupported(
            "gradient flow is defined for linear bias-free models".into(),
        ));
    }
    let out = model.forward();
    let (loss, upstream) = obj.total_loss(&out)?;
    let grads = model.backward(&upstream)?;
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            last_finite: None,
        });
    }
    for (w, g) in model.weights_mut().iter_mut().zip(&grads.d_weights) {
        w.axpy(-dt, g)?;
    }
    if model.weights().iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            last_finite: Some(loss),
        });
    }
    Ok(())
}

/// `‖A u‖² + ‖A v‖²`.
pub fn gamma(u: &[f64], v: &[f64], a: &DenseMatrix) -> Result<f64> {
    let au = a.matvec(u)?;
    let av = a.matvec(v)?;
    Ok(au.iter().chain(&av).map(|x| x * x).sum())
}

/// Fidelity-driven velocity `−L (σ²)^{1−1/L} p` with `p = u_rᵀ ∇R_Ω v_r`.
pub fn prop1_velocity(sigma: f64, projection: f64, depth: usize) -> f64 {
    let l = depth as f64;
    -l * (sigma * sigma).powf(1.0 - 1.0 / l) * projection
}

/// Regularizer-driven velocity `−2Lλ σ (σ²)^{1−1/L} γ`. For `σ ≥ 0` this is
/// `−2Lλ (σ²)^{3/2−1/L} γ`; carrying the sign of `σ` keeps it valid for
/// negative signed singular values.
pub fn regularizer_velocity(sigma: f64, gamma: f64, depth: usize, lambda: f64) -> f64 {
    let l = depth as f64;
    -2.0 * l * lambda * sigma * (sigma * sigma).powf(1.0 - 1.0 / l) * gamma
}

pub fn corollary1_velocity(
    sigma: f64,
    projection: f64,
    gamma: f64,
    depth: usize,
    lambda: f64,
) -> f64 {
    prop1_velocity(sigma, projection, depth) + regularizer_velocity(sigma, gamma, depth, lambda)
}

pub fn relative_residual(measured: f64, predicted: f64) -> f64 {
    (measured - predicted).abs() / (measured.abs() + RESIDUAL_FLOOR)
}

fn projections(record: &SignedSvd, grad: &DenseMatrix) -> Result<Vec<f64>> {
    (0..record.len())
        .map(|r| grad.bilinear(&record.u_col(r), &record.v_col(r)))
        .collect()
}

fn check_len(record: &SignedSvd, measured: &[f64]) -> Result<()> {
    if measured.len() != record.len() {
        return Err(Error::shape(
            "residual",
            format!("{} measured velocities for {} singular values", measured.len(), record.len()),
        ));
    }
    Ok(())
}

/// Per-`r` relative residual of the measured velocities against the
/// fidelity-only law; `grad` is `∇_W R_Ω` at the recorded state.
pub fn prop1_residual(
    record: &SignedSvd,
    measured: &[f64],
    grad: &DenseMatrix,
    depth: usize,
) -> Result<Vec<f64>> {
    check_len(record, measured)?;
    let p = projections(record, grad)?;
    Ok((0..record.len())
        .map(|r| relative_residual(measured[r], prop1_velocity(record.sigma[r], p[r], depth)))
        .collect())
}

/// As [`prop1_residual`], against the two-term law with the quadratic TV
/// surrogate built on the difference matrix `a`.
pub fn corollary1_residual(
    record: &SignedSvd,
    measured: &[f64],
    grad: &DenseMatrix,
    depth: usize,
    lambda: f64,
    a: &DenseMatrix,
) -> Result<Vec<f64>> {
    check_len(record, measured)?;
    let p = projections(record, grad)?;
    (0..record.len())
        .map(|r| {
            let g = gamma(&record.u_col(r), &record.v_col(r), a)?;
            let pred = corollary1_velocity(record.sigma[r], p[r], g, depth, lambda);
            Ok(relative_residual(measured[r], pred))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowProbeConfig {
    pub d: usize,
    pub depth: usize,
    pub dt: f64,
    /// Number of recorded steps; the flow runs `steps + 1` Euler steps so
    /// every record has a central difference.
    pub steps: usize,
    pub lambda: f64,
    pub use_tvquad: bool,
    /// Fraction of observed entries in the random mask.
    pub mask_density: f64,
    pub seed: u64,
    /// Scale of the balanced initial product (its singular values are O(scale)).
    pub init_scale: f64,
    /// Standard deviation of the entries of the random target.
    pub target_std: f64,
}

impl Default for FlowProbeConfig {
    fn default() -> Self {
        Self {
            d: 10,
            depth: 2,
            dt: 1e-4,
            steps: 500,
            lambda: 0.0,
            use_tvquad: false,
            mask_density: 0.5,
            seed: 0,
            init_scale: 0.3,
            target_std: 0.3,
        }
    }
}

impl FlowProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 2 {
            return bad(format!("probe d must be at least 2, got {}", self.d));
        }
        if !(1..=16).contains(&self.depth) {
            return bad(format!("probe depth must be in 1..=16, got {}", self.depth));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return bad(format!("probe dt must be finite and >= 0, got {}", self.dt));
        }
        if !(self.dt * self.steps as f64 <= 100.0) {
            return bad("probe dt·steps must not exceed 100".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("probe lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mask_density) {
            return bad(format!("mask density must lie in [0, 1], got {}", self.mask_density));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init scale must be positive, got {}", self.init_scale));
        }
        if !(self.target_std >= 0.0 && self.target_std.is_finite()) {
            return bad(format!("target std must be >= 0, got {}", self.target_std));
        }
        Ok(())
    }

    /// The objective and balanced starting model this configuration describes.
    pub fn build(&self) -> Result<(Objective, FactorModel)> {
        self.validate()?;
        let d = self.d;
        let mut rng = Rng::new(self.seed);
        let mask = MaskMatrix::random(d, d, 1.0 - self.mask_density, &mut rng)?;
        let target = gaussian_matrix(&mut rng, d, d, self.target_std);
        let (kind, lambda) = if self.use_tvquad {
            (RegularizerKind::TvQuad, self.lambda)
        } else {
            (RegularizerKind::None, 0.0)
        };
        let obj = Objective::new(target, mask, Regularizer::new(kind), lambda)?;
        let model = init_balanced(&vec![d; self.depth + 1], self.seed ^ 0x9e37_79b9, self.init_scale)?;
        Ok((obj, model))
    }

    fn effective_lambda(&self) -> f64 {
        if self.use_tvquad {
            self.lambda
        } else {
            0.0
        }
    }
}

/// The state of the flow at one recorded step.
#[derive(Clone, Debug)]
pub struct FlowProbeRecord {
    pub step: usize,
    pub t: f64,
    pub svd: SignedSvd,
    /// `(σ_r(t+dt) − σ_r(t−dt)) / 2dt`
    pub measured: Vec<f64>,
    pub predicted_prop1: Vec<f64>,
    pub predicted_cor1: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Residual checks for `r` are unreliable: a crossing or an ambiguous
    /// match at this step or a neighbour.
    pub flagged: Vec<bool>,
    /// `σ̇_r` is near one of its zeros (`|σ̇_r| < STATIONARY_STEPS·dt·|σ̈_r|`),
    /// where a relative residual measures only the integrator's O(dt) bias.
    pub stationary: Vec<bool>,
}

impl FlowProbeRecord {
    pub fn prop1_residuals(&self) -> Vec<f64> {
        self.measured
            .iter()
            .zip(&self.predicted_prop1)
            .map(|(&m, &p)| relative_residual(m, p))
            .collect()
    }

    pub fn cor1_residuals(&self) -> Vec<f64> {
        self.measured
            .iter()
            .zip(&self.predicted_cor1)
            .map(|(&m, &p)| relative_residual(m, p))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FlowProbeRun {
    pub config: FlowProbeConfig,
    pub records: Vec<FlowProbeRecord>,
    pub initial_balancedness: f64,
    pub final_balancedness: f64,
}

impl FlowProbeRun {
    fn max_over(&self, pick: impl Fn(&FlowProbeRecord) -> Vec<f64>) -> f64 {
        self.records
            .iter()
            .flat_map(|rec| {
                pick(rec)
                    .into_iter()
                    .enumerate()
                    .filter(|&(r, _)| !rec.flagged[r] && !rec.stationary[r])
                    .map(|(_, v)| v)
            })
            .fold(0.0, f64::max)
    }

    fn max_scaled_over(&self, pick: impl Fn(&FlowProbeRecord) -> &[f64]) -> f64 {
        let scale = self.velocity_scale();
        self.records
            .iter()
            .flat_map(|rec| {
                rec.measured
                    .iter()
                    .zip(pick(rec))
                    .enumerate()
                    .filter(|&(r, _)| !rec.flagged[r])
                    .map(|(_, (m, p))| (m - p).abs() / (scale + RESIDUAL_FLOOR))
            })
            .fold(0.0, f64::max)
    }

    /// `max |σ̇_r|` over the whole run.
    pub fn velocity_scale(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.measured.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|measured − predicted| / max|σ̇|` against the fidelity-only
    /// law, stationary points included.
    pub fn max_scaled_prop1_error(&self) -> f64 {
        self.max_scaled_over(|r| &r.predicted_prop1)
    }

    pub fn max_scaled_cor1_error(&self) -> f64 {
        self.max_scaled_over(|r| &r.predicted_cor1)
    }

    pub fn stationary_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.stationary.iter().filter(|&&f| f).count())
            .sum()
    }

    /// Largest unflagged residual against the fidelity-only law.
    pub fn max_prop1_residual(&self) -> f64 {
        self.max_over(FlowProbeRecord::prop1_residuals)
    }

    /// Largest unflagged residual against the two-term law.
    pub fn max_cor1_residual(&self) -> f64 {
        self.max_over(FlowProbeRecord::cor1_residuals)
    }

    pub fn flagged_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.flagged.iter().filter(|&&f| f).count())
            .sum()
    }
}

/// Runs the flow described by `cfg` and records every step that has both
/// neighbours.
pub fn run_flow_probe(cfg: &FlowProbeConfig) -> Result<FlowProbeRun> {
    let (obj, model) = cfg.build()?;
    run_flow_probe_from(cfg, &obj, model)
}

/// As [`run_flow_probe`] with a caller-supplied objective and start.
pub fn run_flow_probe_from(
    cfg: &FlowProbeConfig,
    obj: &Objective,
    mut model: FactorModel,
) -> Result<FlowProbeRun> {
    cfg.validate()?;
    let depth = model.depth();
    let lambda = cfg.effective_lambda();
    let a = difference_matrix(obj.shape().0)?;
    let initial_balancedness = model.balancedness_residual();

    struct State {
        svd: SignedSvd,
        grad: DenseMatrix,
    }
    let observe = |model: &FactorModel, prev: Option<&SignedSvd>| -> Result<State> {
        let w = model.product_matrix()?;
        let svd = track_signed_svd(prev, &w)?;
        let grad = fidelity_grad(&obj.data, &w, &obj.mask)?;
        Ok(State { svd, grad })
    };

    let mut records = Vec::with_capacity(cfg.steps);
    let mut older: Option<State> = None;
    let mut middle = observe(&model, None)?;
    for k in 1..=cfg.steps + 1 {
        flow_step(&mut model, obj, cfg.dt).map_err(|e| match e {
            Error::NonFinite { last_finite, .. } => Error::NonFinite {
                iteration: k - 1,
                last_finite,
            },
            other => other,
        })?;
        let newer = observe(&model, Some(&middle.svd))?;
        if let Some(old) = &older {
            let rank = middle.svd.len();
            let mut rec = FlowProbeRecord {
                step: k - 1,
                t: (k - 1) as f64 * cfg.dt,
                svd: middle.svd.clone(),
                measured: Vec::with_capacity(rank),
                predicted_prop1: Vec::with_capacity(rank),
                predicted_cor1: Vec::with_capacity(rank),
                gamma: Vec::with_capacity(rank),
                flagged: Vec::with_capacity(rank),
                stationary: vec![false; rank],
            };
            let ambiguous = middle.svd.ambiguous || newer.svd.ambiguous;
            for r in 0..rank {
                let sigma = middle.svd.sigma[r];
                let u = middle.svd.u_col(r);
                let v = middle.svd.v_col(r);
                let p = middle.grad.bilinear(&u, &v)?;
                let g = gamma(&u, &v, &a)?;
                rec.measured.push(if cfg.dt > 0.0 {
                    (newer.svd.sigma[r] - old.svd.sigma[r]) / (2.0 * cfg.dt)
                } else {
                    0.0
                });
                rec.predicted_prop1.push(prop1_velocity(sigma, p, depth));
                rec.predicted_cor1.push(corollary1_velocity(sigma, p, g, depth, lambda));
                rec.gamma.push(g);
                rec.flagged.push(
                    ambiguous
                        || old.svd.crossing[r]
                        || middle.svd.crossing[r]
                        || newer.svd.crossing[r],
                );
            }
            records.push(rec);
        }
        older = Some(std::mem::replace(&mut middle, newer));
    }
    mark_stationary(&mut records, cfg.dt);
    Ok(FlowProbeRun {
        config: cfg.clone(),
        records,
        initial_balancedness,
        final_balancedness: model.balancedness_residual(),
    })
}

fn mark_stationary(records: &mut [FlowProbeRecord], dt: f64) {
    let n = records.len();
    if n < 2 || dt == 0.0 {
        return;
    }
    for i in 0..n {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let span = (hi - lo) as f64 * dt;
        for r in 0..records[i].measured.len() {
            let accel = (records[hi].measured[r] - records[lo].measured[r]) / span;
            records[i].stationary[r] = records[i].measured[r].abs() < STATIONARY_STEPS * dt * accel.abs();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_model(weights: Vec<DenseMatrix>) -> FactorModel {
        let mut dims = vec![weights[0].cols()];
        dims.extend(weights.iter().map(|w| w.rows()));
        FactorModel::new(dims, weights, None, ActivationKind::Linear).unwrap()
    }

    fn distance(a: &FactorModel, b: &FactorModel) -> f64 {
        a.weights()
            .iter()
            .zip(b.weights())
            .map(|(x, y)| x.sub(y).unwrap().frobenius_norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn flow_step_trivial_cases() {
        // Perfect fit: X = W_1 W_0 fully observed.
        let w0 = DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        let w1 = DenseMatrix::from_rows(&[[0.5, 0.0], [1.0, -1.0]]);
        let mut model = linear_model(vec![w0, w1]);
        let x = model.product_matrix().unwrap();
        let obj = Objective::new(x, MaskMatrix::full(2, 2), Regularizer::new(RegularizerKind::None), 0.0)
            .unwrap();
        let before = model.clone();
        flow_step(&mut model, &obj, 1e-2).unwrap();
        assert_eq!(distance(&before, &model), 0.0);

        let (obj, mut model) = FlowProbeConfig::default().build().unwrap();
        let before = model.clone();
        flow_step(&mut model, &obj, 0.0).unwrap();
        assert_eq!(distance(&before, &model), 0.0);
    }

    #[test]
    fn flow_step_rejects_nonlinear_and_nan() {
        let mut model = FactorModel::zeros(vec![2, 2, 2], ActivationKind::Tanh, false).unwrap();
        let obj = Objective::new(
            DenseMatrix::zeros(2, 2),
            MaskMatrix::full(2, 2),
            Regularizer::new(RegularizerKind::None),
            0.0,
        )
        .unwrap();
        assert!(matches!(flow_step(&mut model, &obj, 1e-3), Err(Error::Unsupported(_))));

        let mut model = linear_model(vec![DenseMatrix::identity(2), DenseMatrix::identity(2)]);
        let mut data = DenseMatrix::zeros(2, 2);
        data.as_mut_slice()[0] = f64::NAN;
        let obj = Objective::new(data, MaskMatrix::full(2, 2), Regularizer::new(RegularizerKind::None), 0.0)
            .unwrap();
        assert!(matches!(flow_step(&mut model, &obj, 1e-3), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn euler_step_halving_ratio_is_about_four() {
        let cfg = FlowProbeConfig {
            depth: 3,
            ..FlowProbeConfig::default()
        };
        let (obj, start) = cfg.build().unwrap();
        let discrepancy = |dt: f64| {
            let mut one = start.clone();
            flow_step(&mut one, &obj, dt).unwrap();
            let mut two = start.clone();
            flow_step(&mut two, &obj, dt / 2.0).unwrap();
            flow_step(&mut two, &obj, dt / 2.0).unwrap();
            distance(&one, &two)
        };
        for dt in [1e-2, 1e-3] {
            let ratio = discrepancy(dt) / discrepancy(dt / 2.0);
            assert!((ratio - 4.0).abs() < 0.8, "dt {dt}: ratio {ratio}");
        }
    }

    #[test]
    fn gamma_examples() {
        let a2 = difference_matrix(2).unwrap();
        assert!((gamma(&[1.0, 0.0], &[1.0, 0.0], &a2).unwrap() - 4.0).abs() < 1e-15);
        let d = 7;
        let a = difference_matrix(d).unwrap();
        let ones = vec![1.0 / (d as f64).sqrt(); d];
        assert!(gamma(&ones, &ones, &a).unwrap().abs() < 1e-15);
        let mut rng = Rng::new(2);
        for _ in 0..20 {
            let u: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            assert!(gamma(&u, &v, &a).unwrap() >= 0.0);
        }
    }

    #[test]
    fn critical_point_has_zero_velocity() {
        let w = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 0.5]]);
        let svd = track_signed_svd(None, &w).unwrap();
        let grad = DenseMatrix::zeros(2, 2);
        for depth in [2, 3] {
            let res = prop1_residual(&svd, &[0.0, 0.0], &grad, depth).unwrap();
            assert_eq!(res, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn corollary_with_zero_lambda_matches_prop1() {
        let mut rng = Rng::new(11);
        let w = gaussian_matrix(&mut rng, 6, 6, 1.0);
        let grad = gaussian_matrix(&mut rng, 6, 6, 1.0);
        let svd = track_signed_svd(None, &w).unwrap();
        let measured: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let a = difference_matrix(6).unwrap();
        for depth in [2, 3, 4] {
            assert_eq!(
                prop1_residual(&svd, &measured, &grad, depth).unwrap(),
                corollary1_residual(&svd, &measured, &grad, depth, 0.0, &a).unwrap()
            );
        }
    }

    #[test]
    fn regularizer_to_fidelity_ratio_scales_with_sigma() {
        for depth in [2, 3, 4] {
            let ratio = |s: f64| regularizer_velocity(s, 1.0, depth, 1.0) / prop1_velocity(s, 1.0, depth);
            let shrink = ratio(0.1) / ratio(0.01);
            assert!((shrink - 10.0).abs() < 1e-9, "depth {depth}: {shrink}");
        }
    }

    #[test]
    fn records_cover_requested_steps() {
        let cfg = FlowProbeConfig {
            steps: 20,
            ..FlowProbeConfig::default()
        };
        let run = run_flow_probe(&cfg).unwrap();
        assert_eq!(run.records.len(), 20);
        assert_eq!(run.records[0].step, 1);
        assert!(run.initial_balancedness < 1e-10, "{}", run.initial_balancedness);
        for rec in &run.records {
            assert_eq!(rec.measured.len(), 10);
        }
    }

    #[test]
    fn euler_flow_nearly_conserves_balancedness() {
        let cfg = FlowProbeConfig {
            d: 8,
            depth: 3,
            init_scale: 0.1,
            target_std: 0.1,
            ..FlowProbeConfig::default()
        };
        let (obj, mut model) = cfg.build().unwrap();
        let start = model.balancedness_residual();
        for _ in 0..1000 {
            flow_step(&mut model, &obj, 1e-4).unwrap();
        }
        let growth = model.balancedness_residual() - start;
        assert!(growth < 1e-6, "growth {growth:e}");
    }

    #[test]
    fn larger_lambda_decays_small_values_faster() {
        let rate = |lambda: f64| {
            let cfg = FlowProbeConfig {
                steps: 3,
                use_tvquad: true,
                lambda,
                mask_density: 0.0,
                seed: 4,
                ..FlowProbeConfig::default()
            };
            let run = run_flow_probe(&cfg).unwrap();
            let rec = &run.records[0];
            let smallest = (0..rec.svd.len())
                .min_by(|&a, &b| rec.svd.sigma[a].abs().total_cmp(&rec.svd.sigma[b].abs()))
                .unwrap();
            (rec.measured[smallest].abs(), rec.predicted_cor1[smallest].abs())
        };
        let rates: Vec<_> = [0.05, 0.1, 0.2, 0.4].into_iter().map(rate).collect();
        for pair in rates.windows(2) {
            assert!(pair[1].0 > pair[0].0, "{rates:?}");
            assert!(pair[1].1 > pair[0].1, "{rates:?}");
        }
    }

    #[test]
    fn single_seed_laws_hold() {
        let fid = run_flow_probe(&FlowProbeConfig::default()).unwrap();
        assert!(fid.max_prop1_residual() < 0.02, "{}", fid.max_prop1_residual());
        let pure = run_flow_probe(&FlowProbeConfig {
            use_tvquad: true,
            lambda: 0.1,
            mask_density: 0.0,
            ..FlowProbeConfig::default()
        })
        .unwrap();
        assert_eq!(pure.stationary_count(), 0);
        assert!(pure.max_cor1_residual() < 0.02, "{}", pure.max_cor1_residual());
    }

    #[test]
    fn config_validation() {
        let bad = [
            FlowProbeConfig { d: 1, ..Default::default() },
            FlowProbeConfig { dt: -1.0, ..Default::default() },
            FlowProbeConfig { mask_density: 1.5, ..Default::default() },
            FlowProbeConfig { lambda: f64::NAN, ..Default::default() },
            FlowProbeConfig { dt: 1.0, steps: 1000, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}
