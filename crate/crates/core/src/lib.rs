//! Deep matrix factorization with total-variation regularization for
//! completing partially observed images, plus numerical probes of the
//! singular-value dynamics of deep linear factorizations under gradient
//! flow.
//!
//! The recovered matrix is the output of an L-layer network evaluated on
//! the identity, `X̂ = σ(W_{L-1} ··· σ(W_0 I + b_0) ··· + b_{L-1})`, trained
//! by Adam on masked squared error plus `λ` times a TV penalty.

pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optim;
pub mod probe;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
