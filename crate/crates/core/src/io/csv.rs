use std::fmt::Write as _;

use crate::metrics::MetricRecord;
use crate::optim::TrainReport;
use crate::probe::FlowProbeRun;

pub const METRICS_HEADER: &str =
    "missing_pct,activation,regularizer,lambda,L,m1,m2,seed,nmae,effective_rank,iters,final_loss,wall_time_s";

pub const PROBE_HEADER: &str = "step,t,r,sigma_signed,sigma_dot_measured,sigma_dot_pred_prop1,sigma_dot_pred_cor1,gamma_r,crossing_flag";

pub const TRAJECTORY_HEADER: &str = "iter,loss,nmae";

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV line (no trailing newline). Floats use the shortest form that
/// round-trips; `m1`/`m2` are the first two hidden widths, empty when the
/// model has fewer hidden layers.
pub fn metrics_row(r: &MetricRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
        r.missing_pct,
        r.activation,
        r.regularizer,
        r.lambda,
        r.depth(),
        opt(r.hidden_width(1)),
        opt(r.hidden_width(2)),
        r.seed,
        r.nmae,
        r.effective_rank,
        r.iters,
        r.final_loss,
        r.wall_time_s
    )
}

pub fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&metrics_row(r));
        out.push('\n');
    }
    out
}

/// Drops the trailing `wall_time_s` column from every line.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

pub fn probe_csv(run: &FlowProbeRun) -> String {
    let mut out = String::from(PROBE_HEADER);
    out.push('\n');
    for rec in &run.records {
        for r in 0..rec.measured.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                rec.step,
                rec.t,
                r,
                rec.svd.sigma[r],
                rec.measured[r],
                rec.predicted_prop1[r],
                rec.predicted_cor1[r],
                rec.gamma[r],
                rec.flagged[r] as u8
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn trajectory_csv(report: &TrainReport) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let mut nmae = report.nmae.iter().peekable();
    for (it, loss) in report.losses.iter().enumerate() {
        let v = match nmae.peek() {
            Some(&&(i, v)) if i == it => {
                nmae.next();
                v.to_string()
            }
            _ => String::new(),
        };
        writeln!(out, "{it},{loss},{v}").expect("writing to a String");
    }
    out
}
