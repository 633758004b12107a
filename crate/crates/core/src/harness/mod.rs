//! Experiment orchestration: one training/evaluation run per `(k, seed)` cell,
//! sweeps over many cells, and the summaries derived from them.

mod report;

pub use report::{emit_report, load_report, write_curve_csv, REPORT_HEADER};

use rayon::prelude::*;
use serde::Serialize;

use crate::bound::BoundReport;
use crate::error::{Error, Result};
use crate::kinematics::RobotGeometry;
use crate::neuralnet::{train, NetworkParams, TrainingConfig, TrainingTrace};
use crate::sampler::{generate_grid, spacing_mm, WorkspaceBox};
use crate::trajectory::{
    error_to_spacing, evaluate_tracking, make_heart_path, make_rectangle_path, EvalReport,
    HeartParams, NetworkModel, PathKind, RectangleParams, TrajectorySpec,
};

pub const MIN_SAMPLES_PER_AXIS: usize = 2;
pub const MAX_SAMPLES_PER_AXIS: usize = 12;

/// Relative per-step improvement below which the error is considered saturated.
pub const SATURATION_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: RobotGeometry,
    pub workspace: WorkspaceBox,
    /// The seed field is overwritten by each run's seed. Sweeps train for the
    /// full epoch budget unless early stopping is switched back on here.
    pub training: TrainingConfig,
    pub path: PathKind,
    pub rectangle: RectangleParams,
    pub heart: HeartParams,
    /// Millimetre scale for the normalized bound; defaults to the mean box span.
    pub bound_scale_mm: Option<f64>,
    /// Pins the averaged output weight used by the estimate.
    pub w_bar_override: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: RobotGeometry::default(),
            workspace: WorkspaceBox::default(),
            training: TrainingConfig {
                early_stopping: false,
                ..TrainingConfig::default()
            },
            path: PathKind::DoubleRectangle,
            rectangle: RectangleParams::default(),
            heart: HeartParams::default(),
            bound_scale_mm: None,
            w_bar_override: None,
        }
    }
}

impl ExperimentConfig {
    pub fn bound_scale(&self) -> f64 {
        self.bound_scale_mm
            .unwrap_or_else(|| self.workspace.mean_span())
    }

    pub fn trajectory(&self) -> Result<TrajectorySpec> {
        match self.path {
            PathKind::DoubleRectangle => make_rectangle_path(&self.workspace, &self.rectangle),
            PathKind::Heart => make_heart_path(&self.heart),
            PathKind::Custom => Err(Error::invalid("sweeps run on the rectangle or heart path")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.workspace.check_reachable(&self.geometry)?;
        if let Some(s) = self.bound_scale_mm {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("bound scale must be positive"));
            }
        }
        if let Some(w) = self.w_bar_override {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid("pinned w_bar must be >= 0"));
            }
        }
        self.trajectory().map(|_| ())
    }
}

/// One line of the sweep report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub samples_per_axis: usize,
    pub n: usize,
    pub seed: u64,
    pub mean_err_mm: f64,
    /// Spread over path points within this run.
    pub std_err_mm: f64,
    pub est_bound_mm: f64,
    pub spacing_mm: f64,
    pub err_to_spacing: f64,
    pub gamma: f64,
    pub w_bar: f64,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub path_kind: String,
    pub split_sizes: (usize, usize, usize),
}

impl SweepRow {
    /// Re-checks the row's internal relations; `scale_mm` is the bound rescale factor used.
    pub fn validate(&self, scale_mm: f64) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::Format {
                what: "sweep row",
                reason,
            })
        };
        if self.n != self.samples_per_axis.pow(3) {
            return fail(format!(
                "n = {} is not k^3 for k = {}",
                self.n, self.samples_per_axis
            ));
        }
        let ratio = self.mean_err_mm / self.spacing_mm;
        if (ratio - self.err_to_spacing).abs() > 1e-12 * ratio.abs().max(f64::MIN_POSITIVE) {
            return fail(format!(
                "err_to_spacing {} != {}",
                self.err_to_spacing, ratio
            ));
        }
        let est =
            crate::bound::rescale_to_mm(crate::bound::sample_bound(self.n, self.w_bar)?, scale_mm);
        if (est - self.est_bound_mm).abs() > 1e-12 * est.abs() {
            return fail(format!("est_bound_mm {} != {}", self.est_bound_mm, est));
        }
        let (a, b, c) = self.split_sizes;
        if a + b + c != self.n {
            return fail(format!(
                "split sizes {:?} do not sum to {}",
                self.split_sizes, self.n
            ));
        }
        Ok(())
    }
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub row: SweepRow,
    pub params: NetworkParams,
    pub trace: TrainingTrace,
    pub eval: EvalReport,
    pub bound: BoundReport,
}

fn check_axis_count(k: usize) -> Result<()> {
    if !(MIN_SAMPLES_PER_AXIS..=MAX_SAMPLES_PER_AXIS).contains(&k) {
        return Err(Error::invalid(format!(
            "samples per axis must be in [{MIN_SAMPLES_PER_AXIS}, {MAX_SAMPLES_PER_AXIS}], got {k}"
        )));
    }
    Ok(())
}

pub fn run_experiment(k: usize, seed: u64, config: &ExperimentConfig) -> Result<ExperimentRun> {
    check_axis_count(k)?;
    let ds = generate_grid(&config.workspace, k, &config.geometry)?;
    let training = TrainingConfig {
        seed,
        ..config.training.clone()
    };
    let outcome = train(&ds, &training)?;
    let traj = config.trajectory()?;
    let model = NetworkModel {
        params: &outcome.params,
        input_bounds: &config.workspace,
    };
    let eval = evaluate_tracking(&model, &traj, &config.geometry, &config.workspace);
    let n = ds.len();
    let bound = BoundReport::compute(
        &outcome.params,
        n,
        config.bound_scale(),
        config.w_bar_override,
    )?;
    let d = spacing_mm(&config.workspace, k);
    let (final_train_loss, final_val_loss) = outcome.trace.final_losses();
    let row = SweepRow {
        samples_per_axis: k,
        n,
        seed,
        mean_err_mm: eval.mean_mm,
        std_err_mm: eval.std_mm,
        est_bound_mm: bound.e_est_mm,
        spacing_mm: d,
        err_to_spacing: error_to_spacing(eval.mean_mm, d),
        gamma: bound.gamma,
        w_bar: bound.w_bar,
        epochs_run: outcome.trace.epochs_run,
        final_train_loss,
        final_val_loss,
        path_kind: traj.kind.to_string(),
        split_sizes: outcome.split.sizes(),
    };
    log::info!(
        "k={k} seed={seed}: {} epochs, mean error {:.3} mm",
        row.epochs_run,
        row.mean_err_mm
    );
    Ok(ExperimentRun {
        row,
        params: outcome.params,
        trace: outcome.trace,
        eval,
        bound,
    })
}

/// A sweep cell: the run, or the error that stopped it.
#[derive(Debug)]
pub struct SweepCell {
    pub samples_per_axis: usize,
    pub seed: u64,
    pub outcome: Result<ExperimentRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSummary {
    pub samples_per_axis: usize,
    pub n: usize,
    pub runs: usize,
    pub mean_err_mm: f64,
    /// Sample standard deviation of per-run mean errors across seeds.
    pub std_err_mm: f64,
    pub mean_est_bound_mm: f64,
    pub spacing_mm: f64,
    pub err_to_spacing: f64,
    pub mean_w_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub per_k: Vec<KSummary>,
    pub alpha: Option<f64>,
    pub saturation_k: Option<usize>,
}

#[derive(Debug)]
pub struct Sweep {
    pub cells: Vec<SweepCell>,
    pub summary: SweepSummary,
}

impl Sweep {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.runs().map(|r| r.row.clone()).collect()
    }

    pub fn runs(&self) -> impl Iterator<Item = &ExperimentRun> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().ok())
    }
}

/// Runs every `(k, seed)` pair on the rayon pool; cells come back in `(k, seed)` order.
pub fn run_sweep(ks: &[usize], seeds: &[u64], config: &ExperimentConfig) -> Result<Sweep> {
    if ks.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one k and one seed"));
    }
    config.validate()?;
    ks.iter().try_for_each(|&k| check_axis_count(k))?;
    let mut jobs: Vec<(usize, u64)> = ks
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.sort_unstable();
    jobs.dedup();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(k, seed)| SweepCell {
            samples_per_axis: k,
            seed,
            outcome: run_experiment(k, seed, config),
        })
        .collect();
    for c in &cells {
        if let Err(e) = &c.outcome {
            log::error!("cell k={} seed={} failed: {e}", c.samples_per_axis, c.seed);
        }
    }
    let rows: Vec<SweepRow> = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|r| r.row.clone()))
        .collect();
    let summary = summarize(&rows);
    Ok(Sweep { cells, summary })
}

pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mut ks: Vec<usize> = rows.iter().map(|r| r.samples_per_axis).collect();
    ks.sort_unstable();
    ks.dedup();
    let per_k: Vec<KSummary> = ks
        .iter()
        .map(|&k| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.samples_per_axis == k).collect();
            let errs: Vec<f64> = group.iter().map(|r| r.mean_err_mm).collect();
            let mean = |f: fn(&SweepRow) -> f64| {
                group.iter().map(|r| f(r)).sum::<f64>() / group.len() as f64
            };
            let mean_err = mean(|r| r.mean_err_mm);
            let spacing = group[0].spacing_mm;
            KSummary {
                samples_per_axis: k,
                n: k.pow(3),
                runs: group.len(),
                mean_err_mm: mean_err,
                std_err_mm: sample_std(&errs),
                mean_est_bound_mm: mean(|r| r.est_bound_mm),
                spacing_mm: spacing,
                err_to_spacing: error_to_spacing(mean_err, spacing),
                mean_w_bar: mean(|r| r.w_bar),
            }
        })
        .collect();
    let alpha = fit_convergence_rate(rows).ok();
    let saturation_k = saturation_k(&per_k);
    SweepSummary {
        per_k,
        alpha,
        saturation_k,
    }
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Relative decrease of the mean error between consecutive k values.
pub fn relative_improvements(per_k: &[KSummary]) -> Vec<(usize, f64)> {
    per_k
        .windows(2)
        .map(|w| {
            (
                w[1].samples_per_axis,
                (w[0].mean_err_mm - w[1].mean_err_mm) / w[0].mean_err_mm,
            )
        })
        .collect()
}

/// Smallest k after which every further step improves the error by less than
/// [`SATURATION_THRESHOLD`]. `None` when the last step still improves by more.
pub fn saturation_k(per_k: &[KSummary]) -> Option<usize> {
    let steps = relative_improvements(per_k);
    let mut first_saturated = None;
    for (i, (_, imp)) in steps.iter().enumerate().rev() {
        if *imp < SATURATION_THRESHOLD {
            first_saturated = Some(per_k[i].samples_per_axis);
        } else {
            break;
        }
    }
    first_saturated
}

/// Least-squares power law `err ~ n^-alpha` over `(n, err)` points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<f64> {
    let mut distinct: Vec<u64> = points.iter().map(|(n, _)| n.to_bits()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need >= 3 distinct sample counts, got {}",
            distinct.len()
        )));
    }
    if points
        .iter()
        .any(|&(n, e)| !(n > 0.0 && e > 0.0 && e.is_finite()))
    {
        return Err(Error::InsufficientData(
            "errors and counts must be positive".into(),
        ));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    Ok(-sxy / sxx)
}

pub fn fit_convergence_rate(rows: &[SweepRow]) -> Result<f64> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_err_mm)).collect();
    fit_power_law(&points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(k: usize, err: f64) -> SweepRow {
        SweepRow {
            samples_per_axis: k,
            n: k.pow(3),
            seed: 0,
            mean_err_mm: err,
            std_err_mm: 0.0,
            est_bound_mm: 0.0,
            spacing_mm: 60.0 / (k - 1) as f64,
            err_to_spacing: err * (k - 1) as f64 / 60.0,
            gamma: 0.0,
            w_bar: 0.0,
            epochs_run: 1,
            final_train_loss: 0.0,
            final_val_loss: 0.0,
            path_kind: "rectangle".into(),
            split_sizes: (k.pow(3), 0, 0),
        }
    }

    #[test]
    fn exact_power_law() {
        let rows: Vec<SweepRow> = (2..=8)
            .map(|k| synthetic(k, (k.pow(3) as f64).powf(-2.0 / 3.0)))
            .collect();
        assert!((fit_convergence_rate(&rows).unwrap() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_error_has_zero_rate() {
        let rows: Vec<SweepRow> = (2..=6).map(|k| synthetic(k, 3.5)).collect();
        assert!(fit_convergence_rate(&rows).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reference_points_rate() {
        // Frozen from an independent numpy.polyfit on these (n, error) points.
        let reference = [
            (8.0, 19.31),
            (27.0, 5.31),
            (64.0, 2.73),
            (125.0, 2.17),
            (216.0, 1.85),
            (343.0, 1.52),
            (512.0, 1.23),
        ];
        let alpha = fit_power_law(&reference).unwrap();
        assert!((alpha - 0.622_265_958_691_245_1).abs() < 1e-9, "{alpha}");
    }

    #[test]
    fn rate_needs_three_counts() {
        let rows = vec![synthetic(2, 1.0), synthetic(3, 0.5), synthetic(3, 0.4)];
        assert!(matches!(
            fit_convergence_rate(&rows),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn saturation_detection() {
        let rows: Vec<SweepRow> = [(2, 20.0), (3, 5.0), (4, 2.7), (5, 2.4), (6, 2.2), (7, 2.0)]
            .iter()
            .map(|&(k, e)| synthetic(k, e))
            .collect();
        let s = summarize(&rows);
        // 4->5 improves 11%, every later step < 15%
        assert_eq!(s.saturation_k, Some(4));
        let rows: Vec<SweepRow> = [(2, 20.0), (3, 10.0), (4, 5.0)]
            .iter()
            .map(|&(k, e)| synthetic(k, e))
            .collect();
        assert_eq!(summarize(&rows).saturation_k, None);
    }

    #[test]
    fn summary_aggregates() {
        let mut rows = vec![synthetic(3, 4.0), synthetic(3, 6.0), synthetic(4, 2.0)];
        rows[1].seed = 1;
        let s = summarize(&rows);
        assert_eq!(s.per_k.len(), 2);
        assert_eq!(s.per_k[0].runs, 2);
        assert_eq!(s.per_k[0].mean_err_mm, 5.0);
        assert!((s.per_k[0].std_err_mm - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.per_k[1].std_err_mm, 0.0);
        assert!(s.alpha.is_none());
    }

    #[test]
    fn experiment_rejects_k_out_of_range() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(
            run_experiment(1, 0, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            run_experiment(13, 0, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn experiment_row_is_consistent() {
        let cfg = ExperimentConfig::default();
        let run = run_experiment(3, 7, &cfg).unwrap();
        run.row.validate(cfg.bound_scale()).unwrap();
        assert_eq!(run.row.n, 27);
        assert_eq!(run.row.spacing_mm, 30.0);
        assert_eq!(run.row.split_sizes, (25, 1, 1));
        assert_eq!(run.row.path_kind, "rectangle");
    }

    #[test]
    fn unreachable_box_is_a_config_error() {
        let cfg = ExperimentConfig {
            workspace: WorkspaceBox::new([20.0, 20.0, 0.0], [300.0, 300.0, 300.0]).unwrap(),
            ..Default::default()
        };
        assert!(matches!(
            run_sweep(&[2], &[1], &cfg),
            Err(Error::InvalidConfig(_))
        ));
        // A single run reports the offending grid point instead.
        assert!(matches!(
            run_experiment(2, 1, &cfg),
            Err(Error::UnreachableGridPoint { .. })
        ));
    }
}
