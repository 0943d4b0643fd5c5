//! Loss assembly: masked squared error plus a total-variation penalty.
//!
//! All TV variants use circulant (wrap-around) forward differences
//! `D_x W(i,j) = W(i+1,j) − W(i,j)` along rows and
//! `D_y W(i,j) = W(i,j+1) − W(i,j)` along columns, the same stencil the
//! difference matrix `A` applies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Rng};

pub const DEFAULT_TV_EPS: f64 = 1e-8;
pub const DEFAULT_LAMBDA: f64 = 1.0 / 240.0;

/// Observation mask with entries in {0, 1}; 1 marks an observed entry.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    entries: DenseMatrix,
    observed: usize,
}

impl MaskMatrix {
    pub fn new(entries: DenseMatrix) -> Result<Self> {
        let mut observed = 0;
        for &v in entries.as_slice() {
            if v == 1.0 {
                observed += 1;
            } else if v != 0.0 {
                return Err(Error::Config(format!("mask entry {v} is not 0 or 1")));
            }
        }
        Ok(Self { entries, observed })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            entries: DenseMatrix::filled(rows, cols, 1.0),
            observed: rows * cols,
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            entries: DenseMatrix::zeros(rows, cols),
            observed: 0,
        }
    }

    /// Exactly `round(missing_pct · rows · cols)` missing entries, placed by
    /// a seeded shuffle of the flat indices.
    pub fn random(rows: usize, cols: usize, missing_pct: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&missing_pct) {
            return Err(Error::Config(format!(
                "missing_pct must lie in [0, 1], got {missing_pct}"
            )));
        }
        let n = rows * cols;
        let missing = (missing_pct * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut entries = DenseMatrix::filled(rows, cols, 1.0);
        for &idx in &order[..missing] {
            entries.as_mut_slice()[idx] = 0.0;
        }
        Ok(Self {
            entries,
            observed: n - missing,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.entries[(i, j)] == 1.0
    }

    pub fn observed_count(&self) -> usize {
        self.observed
    }

    pub fn missing_count(&self) -> usize {
        self.entries.rows() * self.entries.cols() - self.observed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegularizerKind {
    None,
    /// Anisotropic TV, `Σ |D_x| + |D_y|`.
    TvL1,
    /// Isotropic TV, `Σ sqrt(D_x² + D_y²)`.
    TvL2,
    /// Quadratic surrogate `‖AW‖_F² + ‖WAᵀ‖_F²`.
    TvQuad,
}

impl RegularizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::TvL1 => "tvl1",
            RegularizerKind::TvL2 => "tvl2",
            RegularizerKind::TvQuad => "tvquad",
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(RegularizerKind::None),
            "tvl1" | "tv1" => Ok(RegularizerKind::TvL1),
            "tvl2" | "tv2" | "tv" => Ok(RegularizerKind::TvL2),
            "tvquad" => Ok(RegularizerKind::TvQuad),
            other => Err(Error::Config(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// Regularizer choice plus the smoothing constant used by the TV norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub eps: f64,
}

impl Regularizer {
    pub fn new(kind: RegularizerKind) -> Self {
        Self {
            kind,
            eps: DEFAULT_TV_EPS,
        }
    }

    pub fn with_eps(kind: RegularizerKind, eps: f64) -> Self {
        Self { kind, eps }
    }
}

impl Default for Regularizer {
    fn default() -> Self {
        Self::new(RegularizerKind::TvL2)
    }
}

fn check_pair(x: &DenseMatrix, xhat: &DenseMatrix, mask: &MaskMatrix, op: &'static str) -> Result<()> {
    if x.shape() != xhat.shape() || x.shape() != mask.shape() {
        return Err(Error::shape(
            op,
            format!(
                "data {:?}, estimate {:?}, mask {:?}",
                x.shape(),
                xhat.shape(),
                mask.shape()
            ),
        ));
    }
    Ok(())
}

/// `‖Ω ⊙ (X − X̂)‖_F²`
pub fn fidelity(x: &DenseMatrix, xhat: &DenseMatrix, mask: &MaskMatrix) -> Result<f64> {
    check_pair(x, xhat, mask, "fidelity")?;
    Ok(x.as_slice()
        .iter()
        .zip(xhat.as_slice())
        .zip(mask.as_matrix().as_slice())
        .map(|((a, b), m)| {
            let r = m * (a - b);
            r * r
        })
        .sum())
}

/// Gradient of [`fidelity`] with respect to `X̂`: `−2 Ω ⊙ (X − X̂)`.
pub fn fidelity_grad(x: &DenseMatrix, xhat: &DenseMatrix, mask: &MaskMatrix) -> Result<DenseMatrix> {
    check_pair(x, xhat, mask, "fidelity_grad")?;
    let diff = x.sub(xhat)?;
    Ok(diff.zip_with(mask.as_matrix(), "fidelity_grad", |r, m| -2.0 * m * r)?)
}

#[inline]
fn dx(w: &DenseMatrix, i: usize, j: usize) -> f64 {
    w[((i + 1) % w.rows(), j)] - w[(i, j)]
}

#[inline]
fn dy(w: &DenseMatrix, i: usize, j: usize) -> f64 {
    w[(i, (j + 1) % w.cols())] - w[(i, j)]
}

fn require_tv(kind: RegularizerKind, op: &str) -> Result<()> {
    match kind {
        RegularizerKind::TvL1 | RegularizerKind::TvL2 => Ok(()),
        other => Err(Error::Unsupported(format!("{op} is not defined for {other}"))),
    }
}

/// TV norm of `w`. TV-L1 is the exact `Σ |D_x| + |D_y|`; TV-L2 is
/// `Σ sqrt(D_x² + D_y² + eps)`.
pub fn tv_value(w: &DenseMatrix, reg: &Regularizer) -> Result<f64> {
    require_tv(reg.kind, "tv_value")?;
    let mut total = 0.0;
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let (a, b) = (dx(w, i, j), dy(w, i, j));
            total += match reg.kind {
                RegularizerKind::TvL1 => a.abs() + b.abs(),
                _ => (a * a + b * b + reg.eps).sqrt(),
            };
        }
    }
    Ok(total)
}

/// The differentiable TV used by the objective: TV-L1 with each
/// `|D|` replaced by `sqrt(D² + eps)`; TV-L2 as in [`tv_value`].
pub fn tv_value_smoothed(w: &DenseMatrix, reg: &Regularizer) -> Result<f64> {
    require_tv(reg.kind, "tv_value_smoothed")?;
    let mut total = 0.0;
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let (a, b) = (dx(w, i, j), dy(w, i, j));
            total += match reg.kind {
                RegularizerKind::TvL1 => (a * a + reg.eps).sqrt() + (b * b + reg.eps).sqrt(),
                _ => (a * a + b * b + reg.eps).sqrt(),
            };
        }
    }
    Ok(total)
}

/// Gradient of [`tv_value_smoothed`] with respect to `w`.
pub fn tv_grad(w: &DenseMatrix, reg: &Regularizer) -> Result<DenseMatrix> {
    require_tv(reg.kind, "tv_grad")?;
    let (r, c) = w.shape();
    // gx, gy: partial derivative of the per-pixel term w.r.t. D_x and D_y.
    let mut gx = DenseMatrix::zeros(r, c);
    let mut gy = DenseMatrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let (a, b) = (dx(w, i, j), dy(w, i, j));
            match reg.kind {
                RegularizerKind::TvL1 => {
                    gx[(i, j)] = a / (a * a + reg.eps).sqrt();
                    gy[(i, j)] = b / (b * b + reg.eps).sqrt();
                }
                _ => {
                    let n = (a * a + b * b + reg.eps).sqrt();
                    gx[(i, j)] = a / n;
                    gy[(i, j)] = b / n;
                }
            }
        }
    }
    Ok(adjoint_difference(&gx, &gy))
}

/// Applies the adjoint of `(D_x, D_y)`: returns `D_xᵀ gx + D_yᵀ gy`.
fn adjoint_difference(gx: &DenseMatrix, gy: &DenseMatrix) -> DenseMatrix {
    let (r, c) = gx.shape();
    DenseMatrix::from_fn(r, c, |i, j| {
        let up = (i + r - 1) % r;
        let left = (j + c - 1) % c;
        gx[(up, j)] - gx[(i, j)] + gy[(i, left)] - gy[(i, j)]
    })
}

fn check_quad(w: &DenseMatrix, a: &DenseMatrix, op: &'static str) -> Result<()> {
    if !w.is_square() {
        return Err(Error::shape(
            op,
            format!("quadratic TV needs a square matrix, got {}x{}", w.rows(), w.cols()),
        ));
    }
    if a.shape() != w.shape() {
        return Err(Error::shape(
            op,
            format!("difference matrix {:?} for a {:?} input", a.shape(), w.shape()),
        ));
    }
    Ok(())
}

/// `‖AW‖_F² + ‖WAᵀ‖_F²`
pub fn tvquad_value(w: &DenseMatrix, a: &DenseMatrix) -> Result<f64> {
    check_quad(w, a, "tvquad_value")?;
    Ok(a.matmul(w)?.frobenius_norm_sq() + w.matmul_t(a)?.frobenius_norm_sq())
}

/// `2 W AᵀA + 2 AᵀA W`
pub fn tvquad_grad(w: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    check_quad(w, a, "tvquad_grad")?;
    let ata = a.t_matmul(a)?;
    let mut g = w.matmul(&ata)?.scale(2.0);
    g.axpy(2.0, &ata.matmul(w)?)?;
    Ok(g)
}

/// Quadratic TV via the difference stencil, `Σ D_x² + D_y²`; equal to
/// [`tvquad_value`] with `A = difference_matrix(d)` but O(d²).
pub fn tvquad_value_stencil(w: &DenseMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let (a, b) = (dx(w, i, j), dy(w, i, j));
            total += a * a + b * b;
        }
    }
    total
}

/// Gradient of [`tvquad_value_stencil`].
pub fn tvquad_grad_stencil(w: &DenseMatrix) -> DenseMatrix {
    let (r, c) = w.shape();
    let gx = DenseMatrix::from_fn(r, c, |i, j| 2.0 * dx(w, i, j));
    let gy = DenseMatrix::from_fn(r, c, |i, j| 2.0 * dy(w, i, j));
    adjoint_difference(&gx, &gy)
}

/// `R = ‖Ω ⊙ (X − X̂)‖_F² + λ · R_reg(X̂)`.
///
/// `data` may hold the complete ground truth: entries outside the mask
/// never enter the loss.
#[derive(Clone, Debug)]
pub struct Objective {
    pub data: DenseMatrix,
    pub mask: MaskMatrix,
    pub reg: Regularizer,
    pub lambda: f64,
}

impl Objective {
    pub fn new(data: DenseMatrix, mask: MaskMatrix, reg: Regularizer, lambda: f64) -> Result<Self> {
        if data.shape() != mask.shape() {
            return Err(Error::shape(
                "Objective::new",
                format!("data {:?} vs mask {:?}", data.shape(), mask.shape()),
            ));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if reg.kind == RegularizerKind::TvQuad && !data.is_square() {
            return Err(Error::shape(
                "Objective::new",
                "quadratic TV needs a square matrix".to_string(),
            ));
        }
        Ok(Self {
            data,
            mask,
            reg,
            lambda,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn regularizer_value(&self, xhat: &DenseMatrix) -> Result<f64> {
        match self.reg.kind {
            RegularizerKind::None => Ok(0.0),
            RegularizerKind::TvL1 | RegularizerKind::TvL2 => tv_value_smoothed(xhat, &self.reg),
            RegularizerKind::TvQuad => {
                check_square(xhat)?;
                Ok(tvquad_value_stencil(xhat))
            }
        }
    }

    fn regularizer_grad(&self, xhat: &DenseMatrix) -> Result<Option<DenseMatrix>> {
        match self.reg.kind {
            RegularizerKind::None => Ok(None),
            RegularizerKind::TvL1 | RegularizerKind::TvL2 => tv_grad(xhat, &self.reg).map(Some),
            RegularizerKind::TvQuad => {
                check_square(xhat)?;
                Ok(Some(tvquad_grad_stencil(xhat)))
            }
        }
    }

    pub fn value(&self, xhat: &DenseMatrix) -> Result<f64> {
        let fid = fidelity(&self.data, xhat, &self.mask)?;
        if self.lambda == 0.0 {
            return Ok(fid);
        }
        Ok(fid + self.lambda * self.regularizer_value(xhat)?)
    }

    /// Objective value and its gradient with respect to `X̂`.
    pub fn total_loss(&self, xhat: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        let fid = fidelity(&self.data, xhat, &self.mask)?;
        let mut grad = fidelity_grad(&self.data, xhat, &self.mask)?;
        if self.lambda == 0.0 {
            return Ok((fid, grad));
        }
        let reg = self.regularizer_value(xhat)?;
        if let Some(g) = self.regularizer_grad(xhat)? {
            grad.axpy(self.lambda, &g)?;
        }
        Ok((fid + self.lambda * reg, grad))
    }
}

fn check_square(xhat: &DenseMatrix) -> Result<()> {
    if !xhat.is_square() {
        return Err(Error::shape(
            "total_loss",
            format!("quadratic TV needs a square matrix, got {:?}", xhat.shape()),
        ));
    }
    Ok(())
}
