use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ikann::bound::BoundReport;
use ikann::harness::{emit_report, run_sweep, write_curve_csv, ExperimentConfig};
use ikann::neuralnet::{load_model, save_model, train, ModelFile, ModelMeta, TrainingConfig};
use ikann::sampler::{generate_grid, write_dataset_csv, WorkspaceBox};
use ikann::trajectory::{evaluate_tracking, write_trajectory_csv, NetworkModel, PathKind};
use ikann::{Error, Result, RobotGeometry};

#[derive(Parser)]
#[command(
    name = "ikann",
    version,
    about = "Neural-network inverse kinematics and sample-count error bounds"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Workspace box in mm: x1min,x1max,x2min,x2max,x3min,x3max
    #[arg(long = "box", global = true, value_delimiter = ',', num_args = 6)]
    workspace: Option<Vec<f64>>,

    /// Link lengths in mm: l1,l2,l3
    #[arg(long, global = true, value_delimiter = ',', num_args = 3)]
    links: Option<Vec<f64>>,

    /// Run seed (train) or first seed of the sweep
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Rectangle,
    Heart,
}

impl From<PathArg> for PathKind {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Rectangle => PathKind::DoubleRectangle,
            PathArg::Heart => PathKind::Heart,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one network on a k x k x k grid and save it
    Train {
        #[arg(long)]
        samples_per_axis: usize,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_early_stop: bool,
    },
    /// Track a reference path with a saved model
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "rectangle")]
        path: PathArg,
        /// Per-point trajectory CSV
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Print the Lipschitz constant and sample-count estimate of a saved model
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bound_scale_mm: Option<f64>,
    },
    /// Train and evaluate over grid sizes and seeds
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8")]
        axis_counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: u64,
        #[arg(long)]
        report: PathBuf,
        /// Directory for per-run training curves
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rectangle")]
        path: PathArg,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long)]
        bound_scale_mm: Option<f64>,
        /// Pin the averaged output weight used by the estimate
        #[arg(long)]
        w_bar: Option<f64>,
        /// Stop each run early on stalled validation loss
        #[arg(long)]
        early_stop: bool,
        /// Also write the rows as JSON next to the report
        #[arg(long)]
        json: bool,
    },
    /// Write the labelled training grid as CSV
    Dataset {
        #[arg(long)]
        samples_per_axis: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl GlobalOpts {
    fn geometry(&self) -> Result<RobotGeometry> {
        match &self.links {
            Some(l) => RobotGeometry::new(l[0], l[1], l[2]),
            None => Ok(RobotGeometry::default()),
        }
    }

    fn workspace(&self) -> Result<WorkspaceBox> {
        match &self.workspace {
            Some(b) => WorkspaceBox::new([b[0], b[2], b[4]], [b[1], b[3], b[5]]),
            None => Ok(WorkspaceBox::default()),
        }
    }
}

fn print_json(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn run(cli: Cli) -> Result<()> {
    let geometry = cli.global.geometry()?;
    let workspace = cli.global.workspace()?;
    match cli.command {
        Command::Train {
            samples_per_axis,
            hidden,
            epochs,
            out,
            no_early_stop,
        } => {
            workspace.check_reachable(&geometry)?;
            let seed = cli.global.seed.unwrap_or(42);
            let cfg = TrainingConfig {
                hidden,
                max_epochs: epochs,
                seed,
                early_stopping: !no_early_stop,
                ..Default::default()
            };
            let ds = generate_grid(&workspace, samples_per_axis, &geometry)?;
            let outcome = train(&ds, &cfg)?;
            let (final_train_loss, final_val_loss) = outcome.trace.final_losses();
            let model = ModelFile {
                params: outcome.params,
                input_bounds: workspace,
                meta: ModelMeta {
                    samples_per_axis,
                    seed,
                    epochs_run: outcome.trace.epochs_run,
                    final_train_loss,
                    final_val_loss,
                },
            };
            save_model(&model, &out)?;
            eprintln!(
                "trained n={} for {} epochs: train {:.3e} val {:.3e} -> {}",
                ds.len(),
                outcome.trace.epochs_run,
                final_train_loss,
                final_val_loss,
                out.display()
            );
        }
        Command::Eval { model, path, emit } => {
            let model = load_model(&model)?;
            let cfg = ExperimentConfig {
                geometry,
                workspace: model.input_bounds,
                path: path.into(),
                ..Default::default()
            };
            let traj = cfg.trajectory()?;
            let net = NetworkModel {
                params: &model.params,
                input_bounds: &model.input_bounds,
            };
            let report = evaluate_tracking(&net, &traj, &geometry, &model.input_bounds);
            if let Some(p) = emit {
                write_trajectory_csv(&report, &p)?;
            }
            #[derive(Serialize)]
            struct Summary {
                path: String,
                n_points: usize,
                mean_mm: f64,
                std_mm: f64,
                max_mm: f64,
                points_outside_box: usize,
            }
            print_json(&Summary {
                path: report.kind.to_string(),
                n_points: report.n_points,
                mean_mm: report.mean_mm,
                std_mm: report.std_mm,
                max_mm: report.max_mm,
                points_outside_box: report.outside_box.len(),
            });
        }
        Command::Bound {
            model,
            bound_scale_mm,
        } => {
            let model = load_model(&model)?;
            let n = model.meta.samples_per_axis.pow(3);
            let scale = bound_scale_mm.unwrap_or_else(|| model.input_bounds.mean_span());
            print_json(&BoundReport::compute(&model.params, n, scale, None)?);
        }
        Command::Sweep {
            axis_counts,
            repeats,
            report,
            curves,
            path,
            hidden,
            epochs,
            bound_scale_mm,
            w_bar,
            early_stop,
            json,
        } => {
            if repeats == 0 {
                return Err(Error::InvalidConfig("--repeats must be >= 1".into()));
            }
            let first = cli.global.seed.unwrap_or(1);
            let seeds: Vec<u64> = (first..first + repeats).collect();
            let cfg = ExperimentConfig {
                geometry,
                workspace,
                training: TrainingConfig {
                    hidden,
                    max_epochs: epochs,
                    early_stopping: early_stop,
                    ..Default::default()
                },
                path: path.into(),
                bound_scale_mm,
                w_bar_override: w_bar,
                ..Default::default()
            };
            let sweep = run_sweep(&axis_counts, &seeds, &cfg)?;
            emit_report(&sweep.cells, &sweep.summary, &cfg, &report)?;
            if let Some(dir) = curves {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                for run in sweep.runs() {
                    let name = format!(
                        "curve_k{}_seed{}.csv",
                        run.row.samples_per_axis, run.row.seed
                    );
                    write_curve_csv(&run.trace, &dir.join(name))?;
                }
            }
            if json {
                let p = report.with_extension("json");
                let text = serde_json::to_string_pretty(&sweep.rows()).expect("rows serialize");
                std::fs::write(&p, text + "\n").map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
            for k in &sweep.summary.per_k {
                eprintln!(
                    "n={:>4}  err {:7.3} ± {:6.3} mm  est {:7.3} mm  e/d {:.3}",
                    k.n, k.mean_err_mm, k.std_err_mm, k.mean_est_bound_mm, k.err_to_spacing
                );
            }
            let failed = sweep.cells.iter().filter(|c| c.outcome.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see {}", summary_hint(&report));
            }
        }
        Command::Dataset {
            samples_per_axis,
            out,
        } => {
            workspace.check_reachable(&geometry)?;
            let ds = generate_grid(&workspace, samples_per_axis, &geometry)?;
            write_dataset_csv(&ds, &out)?;
        }
    }
    Ok(())
}

fn summary_hint(report: &Path) -> String {
    let stem = report.file_stem().unwrap_or_default().to_string_lossy();
    report
        .with_file_name(format!("{stem}.summary.json"))
        .display()
        .to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
