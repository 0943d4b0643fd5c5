use crate::error::Result;
use crate::linalg::{dot, svd, DenseMatrix};

/// Singular values closer than this are treated as a crossing.
pub const CROSSING_GAP: f64 = 1e-6;
/// Two match candidates whose overlaps differ by less than this are ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 1e-6;

/// SVD whose columns follow a continuous path: ordering and signs are
/// chosen to match the previous decomposition, so the diagonal may hold
/// negative (signed) singular values.
#[derive(Clone, Debug)]
pub struct SignedSvd {
    pub sigma: Vec<f64>,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    /// `crossing[r]`: another singular value lies within [`CROSSING_GAP`] of `|σ_r|`.
    pub crossing: Vec<bool>,
    /// The column matching against the previous step was not clear-cut.
    pub ambiguous: bool,
}

impl SignedSvd {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn u_col(&self, r: usize) -> Vec<f64> {
        self.u.column(r)
    }

    pub fn v_col(&self, r: usize) -> Vec<f64> {
        self.v.column(r)
    }
}

fn crossing_flags(sigma: &[f64]) -> Vec<bool> {
    (0..sigma.len())
        .map(|r| {
            (0..sigma.len())
                .any(|s| s != r && (sigma[r].abs() - sigma[s].abs()).abs() < CROSSING_GAP)
        })
        .collect()
}

/// Decomposes `m` and aligns the result with `prev`.
///
/// Each previous column pair `(u_r, v_r)` is matched to the current pair
/// with the largest `|⟨u_r, u_c⟩| + |⟨v_r, v_c⟩|` (greedy, best pairs first);
/// `u` and `v` are then flipped to have positive overlap with their
/// predecessors and the flips are absorbed into the sign of `σ_r`.
pub fn track_signed_svd(prev: Option<&SignedSvd>, m: &DenseMatrix) -> Result<SignedSvd> {
    let dec = svd(m)?;
    let k = dec.s.len();
    let Some(prev) = prev.filter(|p| p.len() == k) else {
        return Ok(SignedSvd {
            crossing: crossing_flags(&dec.s),
            sigma: dec.s,
            u: dec.u,
            v: dec.v,
            ambiguous: false,
        });
    };

    let prev_u: Vec<Vec<f64>> = (0..k).map(|r| prev.u_col(r)).collect();
    let prev_v: Vec<Vec<f64>> = (0..k).map(|r| prev.v_col(r)).collect();
    let cur_u: Vec<Vec<f64>> = (0..k).map(|c| dec.u.column(c)).collect();
    let cur_v: Vec<Vec<f64>> = (0..k).map(|c| dec.v.column(c)).collect();
    let score: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            (0..k)
                .map(|c| dot(&prev_u[r], &cur_u[c]).abs() + dot(&prev_v[r], &cur_v[c]).abs())
                .collect()
        })
        .collect();

    let mut assigned_prev = vec![false; k];
    let mut assigned_cur = vec![false; k];
    let mut matching = vec![0usize; k];
    let mut ambiguous = false;
    for _ in 0..k {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for r in (0..k).filter(|&r| !assigned_prev[r]) {
            for c in (0..k).filter(|&c| !assigned_cur[c]) {
                if score[r][c] > best.0 {
                    best = (score[r][c], r, c);
                }
            }
        }
        let (top, r, c) = best;
        let runner_up = (0..k)
            .filter(|&c2| c2 != c && !assigned_cur[c2])
            .map(|c2| score[r][c2])
            .fold(f64::NEG_INFINITY, f64::max);
        if top - runner_up < AMBIGUITY_MARGIN {
            ambiguous = true;
        }
        assigned_prev[r] = true;
        assigned_cur[c] = true;
        matching[r] = c;
    }

    let rows_u = dec.u.rows();
    let rows_v = dec.v.rows();
    let mut u = DenseMatrix::zeros(rows_u, k);
    let mut v = DenseMatrix::zeros(rows_v, k);
    let mut sigma = Vec::with_capacity(k);
    for r in 0..k {
        let c = matching[r];
        let su = if dot(&prev_u[r], &cur_u[c]) < 0.0 { -1.0 } else { 1.0 };
        let sv = if dot(&prev_v[r], &cur_v[c]) < 0.0 { -1.0 } else { 1.0 };
        u.set_column(r, &cur_u[c].iter().map(|x| su * x).collect::<Vec<_>>());
        v.set_column(r, &cur_v[c].iter().map(|x| sv * x).collect::<Vec<_>>());
        sigma.push(su * sv * dec.s[c]);
    }
    Ok(SignedSvd {
        crossing: crossing_flags(&sigma),
        sigma,
        u,
        v,
        ambiguous,
    })
}
