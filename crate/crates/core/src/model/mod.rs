//! The L-layer factorization network evaluated on the identity input, and
//! its reverse-mode gradient.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Linear,
    ReLU,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Linear,
        ActivationKind::ReLU,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
    ];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Linear => z,
            ActivationKind::ReLU => z.max(0.0),
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Tanh => z.tanh(),
        }
    }

    /// Derivative at `z`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Linear => 1.0,
            ActivationKind::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            ActivationKind::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Linear => "linear",
            ActivationKind::ReLU => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ActivationKind::Linear => 0,
            ActivationKind::ReLU => 1,
            ActivationKind::Sigmoid => 2,
            ActivationKind::Tanh => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "identity" => Ok(ActivationKind::Linear),
            "relu" => Ok(ActivationKind::ReLU),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Per-layer values saved by [`FactorModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
struct ForwardCache {
    /// `H_l` for l = 1..L-1; `H_0` is the identity and is never stored.
    inputs: Vec<DenseMatrix>,
    /// `Z_l = W_l H_l + b_l` for l = 0..L-1.
    pre_activations: Vec<DenseMatrix>,
}

/// Gradients with the same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub d_weights: Vec<DenseMatrix>,
    pub d_biases: Option<Vec<DenseMatrix>>,
}

impl GradientSet {
    /// Weight gradients followed by bias gradients, matching
    /// [`FactorModel::params_mut`].
    pub fn iter(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter().flat_map(|b| b.iter()))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.max_abs()))
    }
}

#[derive(Clone, Debug)]
pub struct FactorModel {
    dims: Vec<usize>,
    weights: Vec<DenseMatrix>,
    biases: Option<Vec<DenseMatrix>>,
    activation: ActivationKind,
    cache: Option<ForwardCache>,
}

impl FactorModel {
    /// `dims = [m_0, m_1, ..., m_L]` with `m_0 = d` (columns of the output)
    /// and `m_L = d_o` (rows). `weights[l]` is `m_{l+1} × m_l` and
    /// `biases[l]` is `m_{l+1} × m_0`.
    pub fn new(
        dims: Vec<usize>,
        weights: Vec<DenseMatrix>,
        biases: Option<Vec<DenseMatrix>>,
        activation: ActivationKind,
    ) -> Result<Self> {
        validate_dims(&dims)?;
        let depth = dims.len() - 1;
        if weights.len() != depth {
            return Err(Error::shape(
                "FactorModel::new",
                format!("{} weight matrices for depth {depth}", weights.len()),
            ));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.shape() != (dims[l + 1], dims[l]) {
                return Err(Error::shape(
                    "FactorModel::new",
                    format!(
                        "weight {l} is {}x{}, expected {}x{}",
                        w.rows(),
                        w.cols(),
                        dims[l + 1],
                        dims[l]
                    ),
                ));
            }
        }
        if let Some(biases) = &biases {
            if biases.len() != depth {
                return Err(Error::shape(
                    "FactorModel::new",
                    format!("{} bias matrices for depth {depth}", biases.len()),
                ));
            }
            for (l, b) in biases.iter().enumerate() {
                if b.shape() != (dims[l + 1], dims[0]) {
                    return Err(Error::shape(
                        "FactorModel::new",
                        format!(
                            "bias {l} is {}x{}, expected {}x{}",
                            b.rows(),
                            b.cols(),
                            dims[l + 1],
                            dims[0]
                        ),
                    ));
                }
            }
        }
        Ok(Self {
            dims,
            weights,
            biases,
            activation,
            cache: None,
        })
    }

    pub fn zeros(dims: Vec<usize>, activation: ActivationKind, use_bias: bool) -> Result<Self> {
        validate_dims(&dims)?;
        let weights = dims
            .windows(2)
            .map(|w| DenseMatrix::zeros(w[1], w[0]))
            .collect();
        let biases = use_bias.then(|| {
            dims[1..]
                .iter()
                .map(|&m| DenseMatrix::zeros(m, dims[0]))
                .collect()
        });
        Self::new(dims, weights, biases, activation)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Shape `(d_o, d)` of the network output.
    pub fn output_shape(&self) -> (usize, usize) {
        (self.dims[self.dims.len() - 1], self.dims[0])
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn use_bias(&self) -> bool {
        self.biases.is_some()
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn biases(&self) -> Option<&[DenseMatrix]> {
        self.biases.as_deref()
    }

    /// Mutable access to the weights; drops the forward cache.
    pub fn weights_mut(&mut self) -> &mut [DenseMatrix] {
        self.cache = None;
        &mut self.weights
    }

    /// All parameters, weights first then biases; drops the forward cache.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix> {
        self.cache = None;
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut().flat_map(|b| b.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.weights
            .iter()
            .chain(self.biases.iter().flat_map(|b| b.iter()))
    }

    pub fn parameter_count(&self) -> usize {
        self.params().map(|p| p.rows() * p.cols()).sum()
    }

    /// Zero gradient with this model's layout.
    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet {
            d_weights: self
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            d_biases: self.biases.as_ref().map(|bs| {
                bs.iter()
                    .map(|b| DenseMatrix::zeros(b.rows(), b.cols()))
                    .collect()
            }),
        }
    }

    /// Evaluates `f_θ(I_d)` and caches the per-layer values needed by
    /// [`backward`](Self::backward). The activation is applied after every
    /// layer, the outermost included.
    pub fn forward(&mut self) -> DenseMatrix {
        let (output, cache) = self.run_forward(true);
        self.cache = cache;
        output
    }

    /// Evaluates `f_θ(I_d)` without touching the cache.
    pub fn evaluate(&self) -> DenseMatrix {
        self.run_forward(false).0
    }

    fn run_forward(&self, keep: bool) -> (DenseMatrix, Option<ForwardCache>) {
        let act = self.activation;
        let mut inputs = Vec::with_capacity(self.depth().saturating_sub(1));
        let mut pre_activations = Vec::with_capacity(self.depth());
        let mut h: Option<DenseMatrix> = None;
        for (l, w) in self.weights.iter().enumerate() {
            // The first layer acts on I_d, so W_0 · I_d = W_0.
            let mut z = match &h {
                None => w.clone(),
                Some(h) => w.matmul(h).expect("validated layer shapes"),
            };
            if let Some(biases) = &self.biases {
                z.axpy(1.0, &biases[l]).expect("validated bias shapes");
            }
            let out = if act == ActivationKind::Linear {
                z.clone()
            } else {
                z.map(|v| act.apply(v))
            };
            if keep {
                pre_activations.push(z);
                if let Some(prev) = h.take() {
                    inputs.push(prev);
                }
            }
            h = Some(out);
        }
        let output = h.expect("depth >= 1");
        let cache = keep.then_some(ForwardCache {
            inputs,
            pre_activations,
        });
        (output, cache)
    }

    /// Reverse-mode gradient of a scalar loss with respect to every weight
    /// and bias, given `upstream = ∂loss/∂f_θ(I_d)`. Requires a preceding
    /// [`forward`](Self::forward) on the current parameters.
    pub fn backward(&self, upstream: &DenseMatrix) -> Result<GradientSet> {
        let cache = self
            .cache
            .as_ref()
            .ok_or(Error::State("backward called before forward on current parameters"))?;
        if upstream.shape() != self.output_shape() {
            return Err(Error::shape(
                "backward",
                format!(
                    "upstream is {}x{}, output is {}x{}",
                    upstream.rows(),
                    upstream.cols(),
                    self.output_shape().0,
                    self.output_shape().1
                ),
            ));
        }
        let act = self.activation;
        let depth = self.depth();
        let mut d_weights = vec![DenseMatrix::zeros(0, 0); depth];
        let mut d_biases = self.biases.as_ref().map(|_| vec![DenseMatrix::zeros(0, 0); depth]);
        let mut grad = upstream.clone();
        for l in (0..depth).rev() {
            let dz = if act == ActivationKind::Linear {
                grad
            } else {
                grad.zip_with(&cache.pre_activations[l], "backward", |g, z| {
                    g * act.derivative(z)
                })?
            };
            if let Some(db) = d_biases.as_mut() {
                db[l] = dz.clone();
            }
            if l == 0 {
                d_weights[0] = dz;
                break;
            }
            d_weights[l] = dz.matmul_t(&cache.inputs[l - 1])?;
            grad = self.weights[l].t_matmul(&dz)?;
        }
        Ok(GradientSet {
            d_weights,
            d_biases,
        })
    }

    /// The end-to-end product `W_{L-1} ··· W_0`; only defined for linear,
    /// bias-free models.
    pub fn product_matrix(&self) -> Result<DenseMatrix> {
        if self.activation != ActivationKind::Linear || self.use_bias() {
            return Err(Error::Unsupported(
                "product_matrix requires a linear bias-free model".into(),
            ));
        }
        let mut p = self.weights[0].clone();
        for w in &self.weights[1..] {
            p = w.matmul(&p)?;
        }
        Ok(p)
    }

    /// `max_l ‖W_{l+1}ᵀ W_{l+1} − W_l W_lᵀ‖_F`; zero for balanced factors.
    pub fn balancedness_residual(&self) -> f64 {
        self.weights
            .windows(2)
            .map(|pair| {
                let upper = pair[1].t_matmul(&pair[1]).expect("chained shapes");
                let lower = pair[0].matmul_t(&pair[0]).expect("chained shapes");
                upper.sub(&lower).expect("same shape").frobenius_norm()
            })
            .fold(0.0, f64::max)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::shape(
            "FactorModel",
            format!("need at least one layer, got dims {dims:?}"),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::shape("FactorModel", format!("zero dimension in {dims:?}")));
    }
    Ok(())
}
