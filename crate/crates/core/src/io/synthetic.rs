//! Deterministic test images.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Random grid of constant blocks.
    Blocks,
    /// Dark glyphs on a light background.
    Text,
    /// Gradient background with a disk and a few rectangles.
    Scene,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Blocks => "blocks",
            SyntheticKind::Text => "text",
            SyntheticKind::Scene => "scene",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blocks" => Ok(SyntheticKind::Blocks),
            "text" => Ok(SyntheticKind::Text),
            "scene" => Ok(SyntheticKind::Scene),
            other => Err(Error::Config(format!(
                "unknown synthetic image '{other}' (expected blocks, text or scene)"
            ))),
        }
    }
}

pub fn synthetic_image(kind: SyntheticKind, size: usize, seed: u64) -> Result<DenseMatrix> {
    if size < 4 {
        return Err(Error::Config(format!("synthetic image size must be at least 4, got {size}")));
    }
    Ok(match kind {
        SyntheticKind::Blocks => blocks(size, seed),
        SyntheticKind::Text => text_raster(size, size, (size / 20).max(1), seed),
        SyntheticKind::Scene => scene(size, seed),
    })
}

fn cuts(rng: &mut Rng, n: usize, pieces: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..pieces - 1)
        .map(|_| 1 + (rng.uniform() * (n - 1) as f64) as usize)
        .collect();
    c.push(0);
    c.push(n);
    c.sort_unstable();
    c.dedup();
    c
}

/// Piecewise-constant image: rows and columns are cut at 3–5 random
/// positions each and every block gets its own gray level.
pub fn blocks(size: usize, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    let row_pieces = 3 + (rng.next_u64() % 3) as usize;
    let col_pieces = 3 + (rng.next_u64() % 3) as usize;
    let rc = cuts(&mut rng, size, row_pieces);
    let cc = cuts(&mut rng, size, col_pieces);
    let levels: Vec<Vec<f64>> = (0..rc.len())
        .map(|_| (0..cc.len()).map(|_| 0.1 + 0.8 * rng.uniform()).collect())
        .collect();
    let band = |c: &[usize], x: usize| c.iter().rposition(|&b| b <= x).unwrap_or(0);
    DenseMatrix::from_fn(size, size, |i, j| levels[band(&rc, i)][band(&cc, j)])
}

const GLYPHS: [[&str; 7]; 10] = [
    ["01110", "10001", "10001", "11111", "10001", "10001", "10001"],
    ["11111", "10000", "10000", "11110", "10000", "10000", "11111"],
    ["10001", "10001", "10001", "11111", "10001", "10001", "10001"],
    ["10000", "10000", "10000", "10000", "10000", "10000", "11111"],
    ["10001", "11011", "10101", "10101", "10001", "10001", "10001"],
    ["10001", "11001", "10101", "10011", "10001", "10001", "10001"],
    ["01110", "10001", "10001", "10001", "10001", "10001", "01110"],
    ["11110", "10001", "10001", "11110", "10100", "10010", "10001"],
    ["11111", "00100", "00100", "00100", "00100", "00100", "00100"],
    ["10001", "10001", "01010", "00100", "01010", "10001", "10001"],
];

/// Lines of random 5×7 capitals (ink 0.1 on background 0.9), each glyph
/// pixel drawn as a `scale × scale` block, one glyph pixel of letter spacing
/// and two of line spacing.
pub fn text_raster(width: usize, height: usize, scale: usize, seed: u64) -> DenseMatrix {
    let s = scale.max(1);
    let mut rng = Rng::new(seed);
    let mut img = DenseMatrix::filled(height, width, 0.9);
    let (pitch_x, pitch_y) = (6 * s, 9 * s);
    let mut top = s;
    while top + 7 * s <= height {
        let mut left = s;
        while left + 5 * s <= width {
            let u = rng.uniform();
            if u >= 0.15 {
                let g = &GLYPHS[(rng.next_u64() % GLYPHS.len() as u64) as usize];
                for (di, row) in g.iter().enumerate() {
                    for (dj, bit) in row.bytes().enumerate() {
                        if bit == b'1' {
                            for i in 0..s {
                                let r = img.row_mut(top + di * s + i);
                                r[left + dj * s..left + (dj + 1) * s].fill(0.1);
                            }
                        }
                    }
                }
            }
            left += pitch_x;
        }
        top += pitch_y;
    }
    img
}

/// A piecewise-smooth stand-in for a natural photograph.
pub fn scene(size: usize, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    let n = size as f64;
    let (cy, cx) = (n * (0.3 + 0.4 * rng.uniform()), n * (0.3 + 0.4 * rng.uniform()));
    let radius = n * (0.12 + 0.12 * rng.uniform());
    let disk_level = 0.1 + 0.3 * rng.uniform();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let (y0, x0) = (n * rng.uniform(), n * rng.uniform());
            let (h, w) = (n * (0.1 + 0.3 * rng.uniform()), n * (0.05 + 0.2 * rng.uniform()));
            (y0, x0, y0 + h, x0 + w, 0.5 + 0.45 * rng.uniform())
        })
        .collect();
    DenseMatrix::from_fn(size, size, |i, j| {
        let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
        let mut v = 0.35 + 0.4 * y / n;
        for &(y0, x0, y1, x1, level) in &rects {
            if y >= y0 && y < y1 && x >= x0 && x < x1 {
                v = level;
            }
        }
        if (y - cy).powi(2) + (x - cx).powi(2) <= radius * radius {
            v = disk_level;
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::effective_rank;

    #[test]
    fn images_are_deterministic_and_in_range() {
        for kind in [SyntheticKind::Blocks, SyntheticKind::Text, SyntheticKind::Scene] {
            let a = synthetic_image(kind, 32, 9).unwrap();
            let b = synthetic_image(kind, 32, 9).unwrap();
            assert_eq!(a, b);
            let (lo, hi) = a.min_max();
            assert!(lo >= 0.0 && hi <= 1.0 && hi > lo, "{kind}");
        }
        assert!(synthetic_image(SyntheticKind::Blocks, 2, 0).is_err());
    }

    #[test]
    fn blocks_are_low_rank() {
        let img = blocks(32, 3);
        let er = effective_rank(&img).unwrap().value;
        assert!(er <= 5.0, "{er}");
    }

    #[test]
    fn text_has_ink() {
        let img = text_raster(64, 64, 1, 1);
        let ink = img.as_slice().iter().filter(|&&v| v < 0.5).count();
        assert!(ink > 200 && ink < 64 * 64 / 2, "{ink}");
    }

    #[test]
    fn scaled_text_uses_whole_blocks() {
        let img = text_raster(64, 64, 2, 1);
        for i in (0..64).step_by(2) {
            for j in (0..64).step_by(2) {
                let v = img[(i, j)];
                assert_eq!((img[(i + 1, j)], img[(i, j + 1)], img[(i + 1, j + 1)]), (v, v, v));
            }
        }
    }
}
