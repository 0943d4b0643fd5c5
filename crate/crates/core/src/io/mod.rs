//! Files in and out: PGM images, masks, run configuration, CSV reports,
//! and the drivers behind each command-line subcommand.

mod config;
mod csv;
mod pgm;
mod run;
mod synthetic;

pub use config::{ImageSource, InitKind, MaskSource, RunConfig, SweepSpec};
pub use csv::{
    metrics_csv, metrics_row, probe_csv, strip_wall_time, trajectory_csv, METRICS_HEADER,
    PROBE_HEADER, TRAJECTORY_HEADER,
};
pub use pgm::{decode_pgm, encode_pgm, encode_pgm_ascii, read_pgm, write_pgm, GrayImage};
pub use run::{
    load_image, load_mask, run_mask, run_metrics, run_probe, run_single, run_sweep, sweep_cells,
    CellFailure, MetricsOutcome, RunOutcome, SweepOutcome,
};
pub use synthetic::{blocks, scene, synthetic_image, text_raster, SyntheticKind};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Rng};
use crate::objective::MaskMatrix;

/// Exactly `round(missing_pct · rows · cols)` zeros, placed by a shuffle
/// seeded with `seed`.
pub fn generate_mask(rows: usize, cols: usize, missing_pct: f64, seed: u64) -> Result<MaskMatrix> {
    MaskMatrix::random(rows, cols, missing_pct, &mut Rng::new(seed))
}

/// Observed entries become white (255), missing ones black (0).
pub fn mask_to_image(mask: &MaskMatrix) -> Result<GrayImage> {
    GrayImage::from_matrix(mask.as_matrix())
}

/// Inverse of [`mask_to_image`]; any gray level other than 0 or 255 is an error.
pub fn mask_from_image(img: &GrayImage) -> Result<MaskMatrix> {
    if let Some(pos) = img.pixels().iter().position(|&p| p != 0.0 && p != 1.0) {
        return Err(Error::Parse {
            offset: pos,
            message: format!(
                "mask pixel {pos} has gray level {}; masks must be 0 or 255",
                (img.pixels()[pos] * 255.0).round()
            ),
        });
    }
    MaskMatrix::new(DenseMatrix::from_vec(img.height(), img.width(), img.pixels().to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        assert_eq!(generate_mask(4, 5, 0.0, 1).unwrap().observed_count(), 20);
        assert_eq!(generate_mask(4, 5, 1.0, 1).unwrap().observed_count(), 0);
        assert_eq!(generate_mask(240, 240, 0.9, 7).unwrap().observed_count(), 5760);
    }

    #[test]
    fn mask_image_round_trip() {
        let mask = generate_mask(6, 9, 0.4, 3).unwrap();
        let img = mask_to_image(&mask).unwrap();
        assert!(img.to_bytes().iter().all(|&b| b == 0 || b == 255));
        let back = mask_from_image(&decode_pgm(&encode_pgm(&img)).unwrap()).unwrap();
        assert_eq!(back, mask);
        let gray = GrayImage::new(2, 1, vec![1.0, 0.5]).unwrap();
        assert!(matches!(mask_from_image(&gray), Err(Error::Parse { offset: 1, .. })));
    }
}
