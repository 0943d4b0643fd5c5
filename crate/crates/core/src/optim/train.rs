use super::{gd_step, init_balanced, init_gaussian, AdamState, DEFAULT_INIT_STD};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, DenseMatrix};
use crate::metrics::nmae;
use crate::model::{ActivationKind, FactorModel};
use crate::objective::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// i.i.d. `N(0, std²)` weights, zero biases.
    Gaussian { std: f64 },
    /// Balanced linear factors of a random target with singular values O(scale).
    Balanced { scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    GradientDescent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// `[m_0, ..., m_L]`, with `m_0` the number of columns and `m_L` the
    /// number of rows of the data matrix.
    pub dims: Vec<usize>,
    pub activation: ActivationKind,
    pub use_bias: bool,
    pub init: InitScheme,
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once two consecutive losses differ by less than this.
    pub loss_delta_tol: f64,
    pub seed: u64,
    /// Record the output spectrum every this many iterations (0 = never).
    pub record_singular_values_every: usize,
    /// Record NMAE against `Objective::data` every this many iterations (0 = never).
    pub record_nmae_every: usize,
}

impl TrainConfig {
    /// Defaults for a `rows × cols` matrix: depth 3 with hidden widths equal
    /// to `cols`, linear activation, Adam at 1e-3, at most 10000 iterations.
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        Self {
            dims: vec![cols, cols, cols, rows],
            activation: ActivationKind::Linear,
            use_bias: false,
            init: InitScheme::Gaussian {
                std: DEFAULT_INIT_STD,
            },
            optimizer: OptimizerKind::Adam,
            eta: 1e-3,
            max_iters: 10_000,
            loss_delta_tol: 1e-3,
            seed: 0,
            record_singular_values_every: 0,
            record_nmae_every: 0,
        }
    }

    /// Depth `depth` with every hidden layer of width `width`.
    pub fn with_architecture(mut self, depth: usize, width: usize) -> Self {
        let (cols, rows) = (self.dims[0], self.dims[self.dims.len() - 1]);
        let mut dims = vec![width; depth + 1];
        dims[0] = cols;
        dims[depth] = rows;
        self.dims = dims;
        self
    }

    /// Sets the activation; nonlinear activations get biases.
    pub fn with_activation(mut self, activation: ActivationKind) -> Self {
        self.activation = activation;
        self.use_bias = activation != ActivationKind::Linear;
        self
    }

    fn validate(&self, shape: (usize, usize)) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        if self.dims[0] != shape.1 || self.dims[self.dims.len() - 1] != shape.0 {
            return Err(Error::Config(format!(
                "dims {:?} do not match a {}x{} data matrix",
                self.dims, shape.0, shape.1
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.loss_delta_tol >= 0.0) {
            return Err(Error::Config("loss_delta_tol must be >= 0".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<FactorModel> {
        match self.init {
            InitScheme::Gaussian { std } => {
                init_gaussian(&self.dims, self.activation, self.use_bias, self.seed, std)
            }
            InitScheme::Balanced { scale } => {
                if self.activation != ActivationKind::Linear || self.use_bias {
                    return Err(Error::Config(
                        "balanced initialization needs a linear bias-free model".into(),
                    ));
                }
                init_balanced(&self.dims, self.seed, scale)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model: FactorModel,
    /// Network output at the last evaluated iterate.
    pub restored: DenseMatrix,
    /// Objective value at every evaluated iterate, index = iteration.
    pub losses: Vec<f64>,
    pub nmae: Vec<(usize, f64)>,
    pub singular_values: Vec<(usize, Vec<f64>)>,
    /// Number of parameter updates performed.
    pub iterations_run: usize,
    pub stopped_early: bool,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one evaluation")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// Parameters were updated.
    Updated,
    /// Loss change fell below the tolerance.
    Converged,
    /// The iteration budget is exhausted.
    BudgetExhausted,
}

/// Step-by-step training loop: evaluate, check the stopping rule, update.
///
/// Each call to [`step`](Self::step) evaluates the objective at the current
/// parameters. The loop stops before updating when the loss moved less than
/// `loss_delta_tol` since the previous evaluation or when `max_iters`
/// updates have been made.
pub struct Trainer<'a> {
    objective: &'a Objective,
    config: TrainConfig,
    model: FactorModel,
    adam: AdamState,
    report_losses: Vec<f64>,
    nmae: Vec<(usize, f64)>,
    spectra: Vec<(usize, Vec<f64>)>,
    updates: usize,
    finished: Option<StepOutcome>,
    last_output: Option<DenseMatrix>,
    clock: Clock,
}

impl<'a> Trainer<'a> {
    pub fn new(objective: &'a Objective, config: TrainConfig) -> Result<Self> {
        config.validate(objective.shape())?;
        let model = config.build_model()?;
        Ok(Self::with_model(objective, config, model))
    }

    /// Trains a caller-provided model instead of initializing one.
    pub fn with_model(objective: &'a Objective, config: TrainConfig, model: FactorModel) -> Self {
        let adam = AdamState::new(&model, config.eta);
        Self {
            objective,
            config,
            model,
            adam,
            report_losses: Vec::new(),
            nmae: Vec::new(),
            spectra: Vec::new(),
            updates: 0,
            finished: None,
            last_output: None,
            clock: Clock::start(),
        }
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn iterations(&self) -> usize {
        self.updates
    }

    pub fn losses(&self) -> &[f64] {
        &self.report_losses
    }

    pub fn last_output(&self) -> Option<&DenseMatrix> {
        self.last_output.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished.is_some()
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        if let Some(outcome) = self.finished {
            return Ok(outcome);
        }
        let output = self.model.forward();
        let (loss, upstream) = self.objective.total_loss(&output)?;
        if !loss.is_finite() || !output.is_finite() {
            return Err(Error::NonFinite {
                iteration: self.updates,
                last_finite: self.report_losses.last().copied(),
            });
        }
        let it = self.updates;
        let every_sv = self.config.record_singular_values_every;
        if every_sv > 0 && it % every_sv == 0 {
            self.spectra.push((it, singular_values(&output)?));
        }
        let every_nmae = self.config.record_nmae_every;
        if every_nmae > 0 && it % every_nmae == 0 {
            // Undefined NMAE (nothing missing, or constant data) is simply not recorded.
            if let Ok(v) = nmae(&self.objective.data, &output, &self.objective.mask) {
                self.nmae.push((it, v));
            }
        }
        let previous = self.report_losses.last().copied();
        self.report_losses.push(loss);
        self.last_output = Some(output);

        if let Some(prev) = previous {
            if (prev - loss).abs() < self.config.loss_delta_tol {
                self.finished = Some(StepOutcome::Converged);
                return Ok(StepOutcome::Converged);
            }
        }
        if self.updates >= self.config.max_iters {
            self.finished = Some(StepOutcome::BudgetExhausted);
            return Ok(StepOutcome::BudgetExhausted);
        }
        let grads = self.model.backward(&upstream)?;
        match self.config.optimizer {
            OptimizerKind::Adam => self.adam.step(&mut self.model, &grads)?,
            OptimizerKind::GradientDescent => gd_step(&mut self.model, &grads, self.config.eta)?,
        }
        self.updates += 1;
        Ok(StepOutcome::Updated)
    }

    pub fn run(mut self) -> Result<TrainReport> {
        while self.step()? == StepOutcome::Updated {}
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainReport {
        let restored = self.last_output.unwrap_or_else(|| self.model.evaluate());
        let losses = if self.report_losses.is_empty() {
            vec![self.objective.value(&restored).unwrap_or(f64::NAN)]
        } else {
            self.report_losses
        };
        TrainReport {
            model: self.model,
            restored,
            losses,
            nmae: self.nmae,
            singular_values: self.spectra,
            iterations_run: self.updates,
            stopped_early: self.finished == Some(StepOutcome::Converged),
            wall_time_s: self.clock.elapsed_s(),
        }
    }
}

/// Runs the training loop to completion.
pub fn train(objective: &Objective, config: &TrainConfig) -> Result<TrainReport> {
    Trainer::new(objective, config.clone())?.run()
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }

    fn elapsed_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// std::time::Instant panics on wasm32-unknown-unknown.
#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }

    fn elapsed_s(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, Rng};
    use crate::objective::{fidelity, tvquad_value_stencil, MaskMatrix, Regularizer, RegularizerKind};

    fn small_config(rows: usize, cols: usize) -> TrainConfig {
        TrainConfig {
            init: InitScheme::Gaussian { std: 0.3 },
            ..TrainConfig::for_shape(rows, cols)
        }
    }

    #[test]
    fn full_mask_fits_small_target() {
        let target = gaussian_matrix(&mut Rng::new(4), 4, 4, 0.5);
        let obj = Objective::new(target.clone(), MaskMatrix::full(4, 4), Regularizer::new(RegularizerKind::None), 0.0).unwrap();
        let cfg = TrainConfig {
            eta: 0.01,
            loss_delta_tol: 0.0,
            ..small_config(4, 4).with_architecture(2, 4)
        };
        let report = train(&obj, &cfg).unwrap();
        let fid = fidelity(&target, &report.restored, &obj.mask).unwrap();
        assert!(fid < 1e-4, "fidelity {fid}");
        assert!(report.iterations_run <= 10_000);
    }

    #[test]
    fn empty_mask_stops_after_one_update() {
        let obj = Objective::new(DenseMatrix::filled(3, 3, 0.5), MaskMatrix::empty(3, 3), Regularizer::new(RegularizerKind::None), 0.0).unwrap();
        let report = train(&obj, &small_config(3, 3)).unwrap();
        assert_eq!(report.iterations_run, 1);
        assert!(report.stopped_early);
        assert_eq!(report.losses, vec![0.0, 0.0]);
    }

    #[test]
    fn heavy_quadratic_tv_flattens_output() {
        let target = gaussian_matrix(&mut Rng::new(10), 6, 6, 1.0);
        let mask = MaskMatrix::new(DenseMatrix::from_fn(6, 6, |i, j| ((i + j) % 2) as f64)).unwrap();
        let obj = Objective::new(target, mask, Regularizer::new(RegularizerKind::TvQuad), 1e3).unwrap();
        let cfg = TrainConfig {
            loss_delta_tol: 0.0,
            max_iters: 3000,
            eta: 0.01,
            ..small_config(6, 6)
        };
        let mut start = cfg.build_model().unwrap();
        let initial = tvquad_value_stencil(&start.forward());
        let report = train(&obj, &cfg).unwrap();
        let last = tvquad_value_stencil(&report.restored);
        assert!(last < 1e-3 * initial, "{last} vs {initial}");
    }

    #[test]
    fn deterministic_trajectories() {
        let target = gaussian_matrix(&mut Rng::new(1), 5, 5, 1.0);
        let mask = MaskMatrix::new(DenseMatrix::from_fn(5, 5, |i, j| ((i * 3 + j) % 4 != 0) as u8 as f64)).unwrap();
        let obj = Objective::new(target, mask, Regularizer::default(), 0.1).unwrap();
        let cfg = TrainConfig {
            max_iters: 200,
            record_singular_values_every: 50,
            record_nmae_every: 10,
            ..small_config(5, 5).with_activation(ActivationKind::Tanh)
        };
        let a = train(&obj, &cfg).unwrap();
        let b = train(&obj, &cfg).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.singular_values, b.singular_values);
        assert_eq!(a.nmae, b.nmae);
        assert_eq!(a.restored, b.restored);
    }

    #[test]
    fn stopping_rule_holds() {
        let target = gaussian_matrix(&mut Rng::new(2), 4, 4, 1.0);
        let obj = Objective::new(target, MaskMatrix::full(4, 4), Regularizer::default(), 0.01).unwrap();
        let cfg = TrainConfig {
            max_iters: 5000,
            loss_delta_tol: 1e-4,
            ..small_config(4, 4)
        };
        let r = train(&obj, &cfg).unwrap();
        assert!(r.iterations_run <= cfg.max_iters);
        assert_eq!(r.losses.len(), r.iterations_run + 1);
        if r.stopped_early {
            let n = r.losses.len();
            assert!((r.losses[n - 1] - r.losses[n - 2]).abs() < cfg.loss_delta_tol);
        }
    }

    #[test]
    fn non_finite_loss_aborts() {
        let target = gaussian_matrix(&mut Rng::new(2), 4, 4, 1.0);
        let obj = Objective::new(target, MaskMatrix::full(4, 4), Regularizer::new(RegularizerKind::None), 0.0).unwrap();
        let cfg = TrainConfig {
            optimizer: OptimizerKind::GradientDescent,
            eta: 1e3,
            loss_delta_tol: 0.0,
            init: InitScheme::Gaussian { std: 1.0 },
            ..TrainConfig::for_shape(4, 4)
        };
        match train(&obj, &cfg) {
            Err(Error::NonFinite { iteration, last_finite }) => {
                assert!(iteration > 0);
                assert!(last_finite.unwrap().is_finite());
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let obj = Objective::new(DenseMatrix::zeros(3, 4), MaskMatrix::full(3, 4), Regularizer::default(), 0.0).unwrap();
        assert!(matches!(
            train(&obj, &TrainConfig::for_shape(4, 3)),
            Err(Error::Config(_))
        ));
    }
}
