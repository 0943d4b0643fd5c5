//! Dense matrices, seeded random generation, QR and SVD.

mod matrix;
mod qr;
mod rng;
mod svd;

pub use matrix::{difference_matrix, dot, norm, DenseMatrix};
pub use qr::{qr, random_orthogonal};
pub use rng::{gaussian_matrix, Rng};
pub use svd::{singular_values, svd, SvdResult};
