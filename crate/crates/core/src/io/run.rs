use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use super::config::{ImageSource, MaskSource, RunConfig};
use super::csv::{metrics_csv, probe_csv, trajectory_csv};
use super::pgm::{read_pgm, write_pgm, GrayImage};
use super::synthetic::synthetic_image;
use super::{generate_mask, mask_from_image, mask_to_image};
use crate::error::{Error, Result};
use crate::experiment::{par_map, run_cell, ExperimentCell};
use crate::linalg::DenseMatrix;
use crate::metrics::{effective_rank, nmae, MetricRecord};
use crate::model::write_checkpoint;
use crate::objective::{MaskMatrix, Objective, Regularizer, RegularizerKind};
use crate::optim::{StepOutcome, TrainReport, Trainer};
use crate::probe::{run_flow_probe, FlowProbeRun};

pub fn load_image(cfg: &RunConfig) -> Result<DenseMatrix> {
    match &cfg.image {
        ImageSource::File(p) => Ok(read_pgm(p)?.to_matrix()),
        ImageSource::Synthetic { kind, size, seed } => synthetic_image(*kind, *size, *seed),
    }
}

pub fn load_mask(cfg: &RunConfig, rows: usize, cols: usize) -> Result<MaskMatrix> {
    let mask = match &cfg.mask {
        MaskSource::File(p) => mask_from_image(&read_pgm(p)?)?,
        MaskSource::Generate { missing_pct, seed } => generate_mask(rows, cols, *missing_pct, *seed)?,
    };
    if mask.shape() != (rows, cols) {
        return Err(Error::shape(
            "load_mask",
            format!("mask is {:?}, image is {:?}", mask.shape(), (rows, cols)),
        ));
    }
    Ok(mask)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn snapshot_path(restored: &Path, iter: usize) -> PathBuf {
    let stem = restored.file_stem().and_then(|s| s.to_str()).unwrap_or("restored");
    restored.with_file_name(format!("{stem}_{iter:06}.pgm"))
}

/// Builds and saves the mask described by `cfg` (to `output.mask` if set).
pub fn run_mask(cfg: &RunConfig) -> Result<MaskMatrix> {
    cfg.validate()?;
    let image = load_image(cfg).map_err(|e| e.in_stage("load"))?;
    let mask = load_mask(cfg, image.rows(), image.cols()).map_err(|e| e.in_stage("mask"))?;
    if let Some(p) = &cfg.mask_path {
        write_pgm(&mask_to_image(&mask)?, p).map_err(|e| e.in_stage("write"))?;
    }
    Ok(mask)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: MetricRecord,
    pub mask: MaskMatrix,
    pub report: TrainReport,
    pub run_hash: String,
}

/// Loads the image, builds the mask, trains, and writes every configured output.
pub fn run_single(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let image = load_image(cfg).map_err(|e| e.in_stage("load"))?;
    let (rows, cols) = image.shape();
    let mask = load_mask(cfg, rows, cols).map_err(|e| e.in_stage("mask"))?;
    let lambda = if cfg.regularizer == RegularizerKind::None {
        0.0
    } else {
        cfg.lambda
    };
    let mut tc = cfg.train_config(rows, cols)?;
    if cfg.trajectory_path.is_some() {
        tc.record_nmae_every = 1;
    }
    let obj = Objective::new(
        image.clone(),
        mask,
        Regularizer::with_eps(cfg.regularizer, cfg.tv_eps),
        lambda,
    )
    .map_err(|e| e.in_stage("objective"))?;

    let train_stage = |e: Error| e.in_stage("train");
    let mut trainer = Trainer::new(&obj, tc.clone()).map_err(train_stage)?;
    loop {
        let outcome = trainer.step().map_err(train_stage)?;
        if let (Some(p), true) = (&cfg.restored_path, cfg.snapshot_every > 0) {
            let it = trainer.iterations();
            if outcome == StepOutcome::Updated && it % cfg.snapshot_every == 0 {
                let out = trainer.model().evaluate();
                write_pgm(&GrayImage::from_matrix(&out)?, snapshot_path(p, it))
                    .map_err(|e| e.in_stage("write"))?;
            }
        }
        if outcome != StepOutcome::Updated {
            break;
        }
    }
    let report = trainer.finish();

    // a mask read from file only has its realized fraction
    let missing_pct = match cfg.mask {
        MaskSource::Generate { missing_pct, .. } => missing_pct,
        MaskSource::File(_) => obj.mask.missing_count() as f64 / (rows * cols) as f64,
    };
    let record = MetricRecord {
        missing_pct,
        activation: cfg.activation,
        regularizer: cfg.regularizer,
        lambda,
        dims: tc.dims.clone(),
        seed: cfg.seed,
        nmae: nmae(&image, &report.restored, &obj.mask).map_err(|e| e.in_stage("metrics"))?,
        effective_rank: effective_rank(&report.restored)
            .map_err(|e| e.in_stage("metrics"))?
            .value,
        iters: report.iterations_run,
        final_loss: report.final_loss(),
        wall_time_s: report.wall_time_s,
    };

    let write = |e: Error| e.in_stage("write");
    if let Some(p) = &cfg.restored_path {
        write_pgm(&GrayImage::from_matrix(&report.restored)?, p).map_err(write)?;
    }
    if let Some(p) = &cfg.metrics_path {
        write_text(p, &metrics_csv(std::slice::from_ref(&record))).map_err(write)?;
    }
    if let Some(p) = &cfg.trajectory_path {
        write_text(p, &trajectory_csv(&report)).map_err(write)?;
    }
    if let Some(p) = &cfg.mask_path {
        write_pgm(&mask_to_image(&obj.mask)?, p).map_err(write)?;
    }
    if let Some(p) = &cfg.checkpoint_path {
        let file = std::fs::File::create(p).map_err(|e| Error::io(p, e)).map_err(write)?;
        write_checkpoint(&report.model, std::io::BufWriter::new(file))
            .map_err(|e| Error::io(p, e))
            .map_err(write)?;
    }
    Ok(RunOutcome {
        record,
        mask: obj.mask,
        report,
        run_hash: cfg.run_hash(),
    })
}

/// The grid described by the `sweep.*` keys, sorted by
/// `(missing_pct, activation, regularizer, λ, L, width, seed)`.
pub fn sweep_cells(cfg: &RunConfig, cols: usize) -> Vec<ExperimentCell> {
    let s = &cfg.sweep;
    let base_missing = match cfg.mask {
        MaskSource::Generate { missing_pct, .. } => missing_pct,
        MaskSource::File(_) => 0.5,
    };
    let missing = s.missing_pct.clone().unwrap_or_else(|| vec![base_missing]);
    let activations = s.activation.clone().unwrap_or_else(|| vec![cfg.activation]);
    let regularizers = s.regularizer.clone().unwrap_or_else(|| vec![cfg.regularizer]);
    let lambdas = s.lambda.clone().unwrap_or_else(|| vec![cfg.lambda]);
    let depths = s.depth.clone().unwrap_or_else(|| vec![cfg.depth]);
    let widths = s
        .width
        .clone()
        .unwrap_or_else(|| vec![cfg.width.unwrap_or(cols)]);
    let seeds = s.seed.clone().unwrap_or_else(|| vec![cfg.seed]);

    let mut cells = Vec::new();
    for &missing_pct in &missing {
        for &activation in &activations {
            for &regularizer in &regularizers {
                for &lambda in &lambdas {
                    for &depth in &depths {
                        for &width in &widths {
                            for &seed in &seeds {
                                cells.push(ExperimentCell {
                                    missing_pct,
                                    activation,
                                    regularizer,
                                    lambda,
                                    depth,
                                    width,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells.sort_by(|a, b| {
        a.missing_pct
            .total_cmp(&b.missing_pct)
            .then(a.activation.code().cmp(&b.activation.code()))
            .then(a.regularizer.cmp(&b.regularizer))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.depth.cmp(&b.depth))
            .then(a.width.cmp(&b.width))
            .then(a.seed.cmp(&b.seed))
    });
    cells.dedup_by(|a, b| {
        a.missing_pct.total_cmp(&b.missing_pct) == Ordering::Equal
            && a.activation == b.activation
            && a.regularizer == b.regularizer
            && a.lambda.total_cmp(&b.lambda) == Ordering::Equal
            && a.depth == b.depth
            && a.width == b.width
            && a.seed == b.seed
    });
    cells
}

#[derive(Debug)]
pub struct CellFailure {
    pub cell: ExperimentCell,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub records: Vec<MetricRecord>,
    pub failures: Vec<CellFailure>,
}

impl SweepOutcome {
    pub fn csv(&self) -> String {
        metrics_csv(&self.records)
    }
}

/// Runs every grid cell (concurrently with the `parallel` feature). A failing
/// cell is recorded and the sweep goes on. The CSV, sorted by grid key, goes
/// to `output.metrics` when set.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let image = load_image(cfg).map_err(|e| e.in_stage("load"))?;
    let base = cfg.train_config(image.rows(), image.cols())?;
    if let Some(bias) = cfg.use_bias {
        if bias != base.use_bias {
            return Err(Error::Config(
                "sweeps derive model.use_bias from the activation; leave it at auto".into(),
            ));
        }
    }
    if cfg.dims.is_some() {
        return Err(Error::Config(
            "sweeps build dims from depth and width; use sweep.depth/sweep.width instead of model.dims"
                .into(),
        ));
    }
    if matches!(cfg.mask, MaskSource::File(_)) {
        return Err(Error::Config(
            "sweeps generate masks from sweep.missing_pct and sweep.seed; remove mask.path".into(),
        ));
    }
    let cells = sweep_cells(cfg, image.cols());
    let results = par_map(&cells, |cell| {
        run_cell(&image, cell, &base, cfg.tv_eps).map(|run| run.record)
    });
    let mut outcome = SweepOutcome::default();
    for (cell, res) in cells.into_iter().zip(results) {
        match res {
            Ok(record) => outcome.records.push(record),
            Err(error) => outcome.failures.push(CellFailure { cell, error }),
        }
    }
    if let Some(p) = &cfg.metrics_path {
        write_text(p, &outcome.csv()).map_err(|e| e.in_stage("write"))?;
    }
    Ok(outcome)
}

/// Scores an existing restoration against the configured reference image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsOutcome {
    pub nmae: f64,
    pub effective_rank: f64,
    pub missing: usize,
}

pub fn run_metrics(cfg: &RunConfig) -> Result<MetricsOutcome> {
    cfg.validate()?;
    let reference = load_image(cfg).map_err(|e| e.in_stage("load"))?;
    let restored_path = cfg
        .metrics_restored
        .as_ref()
        .ok_or_else(|| Error::Config("metrics.restored must name the restored image".into()))?;
    let restored = read_pgm(restored_path)
        .map_err(|e| e.in_stage("load"))?
        .to_matrix();
    if restored.shape() != reference.shape() {
        return Err(Error::shape(
            "metrics",
            format!("restored {:?} vs reference {:?}", restored.shape(), reference.shape()),
        ));
    }
    let mask = load_mask(cfg, reference.rows(), reference.cols()).map_err(|e| e.in_stage("mask"))?;
    let out = MetricsOutcome {
        nmae: nmae(&reference, &restored, &mask)?,
        effective_rank: effective_rank(&restored)?.value,
        missing: mask.missing_count(),
    };
    if let Some(p) = &cfg.metrics_path {
        let text = format!(
            "nmae,effective_rank,missing\n{},{},{}\n",
            out.nmae, out.effective_rank, out.missing
        );
        write_text(p, &text).map_err(|e| e.in_stage("write"))?;
    }
    Ok(out)
}

/// Runs the gradient-flow probe and writes its trajectory CSV to
/// `output.trajectory` when set.
pub fn run_probe(cfg: &RunConfig) -> Result<FlowProbeRun> {
    let run = run_flow_probe(&cfg.probe).map_err(|e| e.in_stage("probe"))?;
    if let Some(p) = &cfg.trajectory_path {
        write_text(p, &probe_csv(&run)).map_err(|e| e.in_stage("write"))?;
    }
    Ok(run)
}
