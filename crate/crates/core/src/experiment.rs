//! Single completion runs and grids of them.

use crate::error::Result;
use crate::linalg::{DenseMatrix, Rng};
use crate::metrics::{effective_rank, nmae, MetricRecord};
use crate::model::ActivationKind;
use crate::objective::{MaskMatrix, Objective, Regularizer, RegularizerKind};
use crate::optim::{train, TrainConfig, TrainReport};

/// One point of an experiment grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentCell {
    pub missing_pct: f64,
    pub activation: ActivationKind,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
}

impl ExperimentCell {
    /// The weight actually applied to the regularizer (0 without one).
    pub fn effective_lambda(&self) -> f64 {
        if self.regularizer == RegularizerKind::None {
            0.0
        } else {
            self.lambda
        }
    }

    /// Mask for this cell; the seed fixes both the mask and the model init,
    /// so cells differing only in the regularizer are paired.
    pub fn mask(&self, rows: usize, cols: usize) -> Result<MaskMatrix> {
        MaskMatrix::random(rows, cols, self.missing_pct, &mut Rng::new(self.seed))
    }

    pub fn objective(&self, image: &DenseMatrix, mask: MaskMatrix, tv_eps: f64) -> Result<Objective> {
        Objective::new(
            image.clone(),
            mask,
            Regularizer::with_eps(self.regularizer, tv_eps),
            self.effective_lambda(),
        )
    }

    pub fn train_config(&self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base
            .clone()
            .with_architecture(self.depth, self.width)
            .with_activation(self.activation);
        cfg.seed = self.seed;
        cfg
    }
}

/// Outcome of [`run_cell`]: the table row plus the full training report.
#[derive(Clone, Debug)]
pub struct CellRun {
    pub record: MetricRecord,
    pub mask: MaskMatrix,
    pub report: TrainReport,
}

/// Masks `image`, trains, and scores the restored matrix.
pub fn run_cell(
    image: &DenseMatrix,
    cell: &ExperimentCell,
    base: &TrainConfig,
    tv_eps: f64,
) -> Result<CellRun> {
    let (rows, cols) = image.shape();
    let mask = cell.mask(rows, cols)?;
    let obj = cell.objective(image, mask, tv_eps)?;
    let cfg = cell.train_config(base);
    let report = train(&obj, &cfg)?;
    let record = MetricRecord {
        missing_pct: cell.missing_pct,
        activation: cell.activation,
        regularizer: cell.regularizer,
        lambda: cell.effective_lambda(),
        dims: cfg.dims.clone(),
        seed: cell.seed,
        nmae: nmae(image, &report.restored, &obj.mask)?,
        effective_rank: effective_rank(&report.restored)?.value,
        iters: report.iterations_run,
        final_loss: report.final_loss(),
        wall_time_s: report.wall_time_s,
    };
    Ok(CellRun {
        record,
        mask: obj.mask,
        report,
    })
}

/// Maps `f` over `items`, concurrently when the `parallel` feature is on.
/// Output order always matches input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::DEFAULT_TV_EPS;

    #[test]
    fn paired_cells_share_mask() {
        let a = ExperimentCell {
            missing_pct: 0.5,
            activation: ActivationKind::Linear,
            regularizer: RegularizerKind::TvL2,
            lambda: 0.1,
            depth: 3,
            width: 8,
            seed: 5,
        };
        let b = ExperimentCell {
            regularizer: RegularizerKind::None,
            ..a.clone()
        };
        assert_eq!(a.mask(8, 8).unwrap(), b.mask(8, 8).unwrap());
        assert_eq!(b.effective_lambda(), 0.0);
    }

    #[test]
    fn run_cell_scores_restoration() {
        let image = DenseMatrix::from_fn(8, 8, |i, j| if i < 4 && j < 5 { 0.8 } else { 0.2 });
        let cell = ExperimentCell {
            missing_pct: 0.3,
            activation: ActivationKind::Linear,
            regularizer: RegularizerKind::TvL2,
            lambda: 0.01,
            depth: 3,
            width: 8,
            seed: 1,
        };
        let mut base = TrainConfig::for_shape(8, 8);
        base.max_iters = 300;
        base.eta = 1e-2;
        let run = run_cell(&image, &cell, &base, DEFAULT_TV_EPS).unwrap();
        assert_eq!(run.record.dims, vec![8, 8, 8, 8]);
        assert_eq!(run.mask.missing_count(), 19);
        assert!(run.record.nmae.is_finite());
        assert!(run.record.effective_rank >= 1.0);
    }

    #[test]
    fn par_map_preserves_order() {
        let xs: Vec<u32> = (0..50).collect();
        assert_eq!(par_map(&xs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
