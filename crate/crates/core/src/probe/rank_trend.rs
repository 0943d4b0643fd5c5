use crate::error::Result;
use crate::experiment::{par_map, run_cell, ExperimentCell};
use crate::linalg::DenseMatrix;
use crate::model::ActivationKind;
use crate::objective::{RegularizerKind, DEFAULT_TV_EPS};
use crate::optim::TrainConfig;

/// Cartesian grid over depth, λ and regularizer for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTrendGrid {
    pub depths: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub regularizers: Vec<RegularizerKind>,
    pub seeds: Vec<u64>,
    pub activation: ActivationKind,
    pub missing_pct: f64,
    pub width: usize,
}

impl RankTrendGrid {
    pub fn cells(&self) -> Vec<ExperimentCell> {
        let mut cells = Vec::new();
        for &depth in &self.depths {
            for &lambda in &self.lambdas {
                for &regularizer in &self.regularizers {
                    for &seed in &self.seeds {
                        cells.push(ExperimentCell {
                            missing_pct: self.missing_pct,
                            activation: self.activation,
                            regularizer,
                            lambda,
                            depth,
                            width: self.width,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankTrendRow {
    pub depth: usize,
    pub lambda: f64,
    pub regularizer: RegularizerKind,
    pub seed: u64,
    pub effective_rank: f64,
    pub nmae: f64,
}

/// Trains every grid cell on `image` and reports the effective rank of each
/// restored matrix, in grid order.
pub fn rank_trend_experiment(
    image: &DenseMatrix,
    grid: &RankTrendGrid,
    base: &TrainConfig,
) -> Result<Vec<RankTrendRow>> {
    let cells = grid.cells();
    par_map(&cells, |cell| {
        let run = run_cell(image, cell, base, DEFAULT_TV_EPS)?;
        Ok(RankTrendRow {
            depth: cell.depth,
            lambda: cell.effective_lambda(),
            regularizer: cell.regularizer,
            seed: cell.seed,
            effective_rank: run.record.effective_rank,
            nmae: run.record.nmae,
        })
    })
    .into_iter()
    .collect()
}
