use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, SweepCell, SweepRow, SweepSummary};
use crate::error::{Error, Result};
use crate::neuralnet::TrainingTrace;
use crate::numfmt::sig17;

pub const REPORT_HEADER: [&str; 15] = [
    "samples_per_axis",
    "n",
    "seed",
    "mean_err_mm",
    "std_err_mm",
    "est_bound_mm",
    "spacing_mm",
    "err_to_spacing",
    "gamma",
    "w_bar",
    "epochs_run",
    "final_train_loss",
    "final_val_loss",
    "path_kind",
    "split_sizes",
];

/// Marker written in the `path_kind` column of a failed cell.
const FAILED: &str = "error";

#[derive(Serialize)]
struct Failure {
    samples_per_axis: usize,
    seed: u64,
    error: String,
}

#[derive(Serialize)]
struct Metadata {
    axis_counts: Vec<usize>,
    seeds: Vec<u64>,
    repeats: usize,
    links_mm: [f64; 3],
    box_min_mm: [f64; 3],
    box_max_mm: [f64; 3],
    hidden: usize,
    learning_rate: f64,
    batch_size: usize,
    max_epochs: usize,
    patience: usize,
    min_delta: f64,
    val_fraction: f64,
    test_fraction: f64,
    early_stopping: bool,
    split_rounding: &'static str,
    path_kind: String,
    path_points: usize,
    rectangle: [f64; 3],
    rectangle_points_per_edge: usize,
    heart_center_scale_z: [f64; 4],
    heart_points: usize,
    bound_scale_mm: f64,
    w_bar_override: Option<f64>,
    across_seed_std: &'static str,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    metadata: Metadata,
    summary: &'a SweepSummary,
    failures: Vec<Failure>,
}

fn summary_path(report: &Path) -> PathBuf {
    let mut name = report.file_stem().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    report.with_file_name(name)
}

fn row_record(r: &SweepRow) -> Vec<String> {
    let (a, b, c) = r.split_sizes;
    vec![
        r.samples_per_axis.to_string(),
        r.n.to_string(),
        r.seed.to_string(),
        sig17(r.mean_err_mm),
        sig17(r.std_err_mm),
        sig17(r.est_bound_mm),
        sig17(r.spacing_mm),
        sig17(r.err_to_spacing),
        sig17(r.gamma),
        sig17(r.w_bar),
        r.epochs_run.to_string(),
        sig17(r.final_train_loss),
        sig17(r.final_val_loss),
        r.path_kind.clone(),
        format!("{a}/{b}/{c}"),
    ]
}

/// Writes the sweep CSV to `path` and its summary and run metadata to `<stem>.summary.json` beside it.
pub fn emit_report(
    cells: &[SweepCell],
    summary: &SweepSummary,
    config: &ExperimentConfig,
    path: &Path,
) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(REPORT_HEADER).map_err(to_err)?;
    let mut failures = Vec::new();
    for cell in cells {
        match &cell.outcome {
            Ok(run) => w.write_record(row_record(&run.row)).map_err(to_err)?,
            Err(e) => {
                let k = cell.samples_per_axis;
                let mut rec = vec![String::new(); REPORT_HEADER.len()];
                rec[0] = k.to_string();
                rec[1] = k.pow(3).to_string();
                rec[2] = cell.seed.to_string();
                rec[13] = FAILED.into();
                w.write_record(&rec).map_err(to_err)?;
                failures.push(Failure {
                    samples_per_axis: k,
                    seed: cell.seed,
                    error: e.to_string(),
                });
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let mut axis_counts: Vec<usize> = cells.iter().map(|c| c.samples_per_axis).collect();
    axis_counts.dedup();
    let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let t = &config.training;
    let g = &config.geometry;
    let path_points = config.trajectory().map(|p| p.points.len()).unwrap_or(0);
    let metadata = Metadata {
        repeats: seeds.len(),
        axis_counts,
        seeds,
        links_mm: [g.l1, g.l2, g.l3],
        box_min_mm: config.workspace.min,
        box_max_mm: config.workspace.max,
        hidden: t.hidden,
        learning_rate: t.learning_rate,
        batch_size: t.batch_size,
        max_epochs: t.max_epochs,
        patience: t.patience,
        min_delta: t.min_delta,
        val_fraction: t.val_fraction,
        test_fraction: t.test_fraction,
        early_stopping: t.early_stopping,
        split_rounding: "round-half-up, at least 1 sample per non-zero fraction",
        path_kind: config.path.to_string(),
        path_points,
        rectangle: [
            config.rectangle.z_low,
            config.rectangle.z_high,
            config.rectangle.margin,
        ],
        rectangle_points_per_edge: config.rectangle.points_per_edge,
        heart_center_scale_z: [
            config.heart.center.x1,
            config.heart.center.x2,
            config.heart.scale,
            config.heart.z,
        ],
        heart_points: config.heart.n_points,
        bound_scale_mm: config.bound_scale(),
        w_bar_override: config.w_bar_override,
        across_seed_std: "sample standard deviation of per-run mean errors",
    };
    let file = SummaryFile {
        metadata,
        summary,
        failures,
    };
    let json = serde_json::to_string_pretty(&file).expect("summary serializes");
    let sp = summary_path(path);
    std::fs::write(&sp, json + "\n").map_err(|e| Error::io(sp, e))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec.get(i)
        .ok_or_else(|| Error::Format {
            what: "report csv",
            reason: format!("missing column {}", REPORT_HEADER[i]),
        })?
        .parse()
        .map_err(|e: T::Err| Error::Format {
            what: "report csv",
            reason: format!("{}: {e}", REPORT_HEADER[i]),
        })
}

/// Reads back the successful rows of a report written by [`emit_report`].
pub fn load_report(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = r.headers().map_err(|e| Error::io(path, e.into()))?;
    if header.iter().ne(REPORT_HEADER) {
        return Err(Error::Format {
            what: "report csv",
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::io(path, e.into()))?;
        if rec.get(13) == Some(FAILED) {
            continue;
        }
        let split: Vec<usize> = rec
            .get(14)
            .unwrap_or_default()
            .split('/')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Format {
                what: "report csv",
                reason: format!("split_sizes: {e}"),
            })?;
        let [a, b, c] = split[..] else {
            return Err(Error::Format {
                what: "report csv",
                reason: "split_sizes needs three parts".into(),
            });
        };
        rows.push(SweepRow {
            samples_per_axis: parse_field(&rec, 0)?,
            n: parse_field(&rec, 1)?,
            seed: parse_field(&rec, 2)?,
            mean_err_mm: parse_field(&rec, 3)?,
            std_err_mm: parse_field(&rec, 4)?,
            est_bound_mm: parse_field(&rec, 5)?,
            spacing_mm: parse_field(&rec, 6)?,
            err_to_spacing: parse_field(&rec, 7)?,
            gamma: parse_field(&rec, 8)?,
            w_bar: parse_field(&rec, 9)?,
            epochs_run: parse_field(&rec, 10)?,
            final_train_loss: parse_field(&rec, 11)?,
            final_val_loss: parse_field(&rec, 12)?,
            path_kind: parse_field(&rec, 13)?,
            split_sizes: (a, b, c),
        });
    }
    Ok(rows)
}

/// Per-epoch losses of one run.
pub fn write_curve_csv(trace: &TrainingTrace, path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["epoch", "train_loss", "val_loss"])
        .map_err(to_err)?;
    for (i, (t, v)) in trace.train_loss.iter().zip(&trace.val_loss).enumerate() {
        w.write_record([(i + 1).to_string(), sig17(*t), sig17(*v)])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_sits_next_to_report() {
        assert_eq!(
            summary_path(Path::new("/tmp/out/report.csv")),
            PathBuf::from("/tmp/out/report.summary.json")
        );
    }
}
