use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cauchy_bench::datagen::{Noise, Synthetic};
use cauchy_bench::harness::{self, ExperimentConfig, ExperimentResults, Metric};
use cauchy_bench::report::{self, TableFormat};
use cauchy_bench::{Dataset64, Error, LossSpec};

/// Default directory for `run` output when `--out` is not given.
const OUT_DIR_ENV: &str = "CAUCHY_BENCH_OUT_DIR";

#[derive(Parser)]
#[command(name = "cauchy-bench", version, about = "MSE vs Cauchy-loss regression benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a preset or a JSON config and write results JSON.
    Run {
        #[arg(long, conflicts_with = "config", required_unless_present_any = ["config", "list"])]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the preset names and exit.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Data file for Seoul bike presets.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a results file as a "mean (std)" table, lowest mean flagged with '*'.
    Table {
        results: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Print the Kruskal-Wallis and pairwise rank-sum tests of a results file.
    Compare {
        results: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
    },
    /// Write influence curves as CSV over the residual grid 0, 1/steps, ..., rmax.
    Influence {
        #[arg(long = "loss", value_enum, required = true)]
        losses: Vec<LossArg>,
        /// Cauchy constants; one curve per constant.
        #[arg(long = "c", value_delimiter = ',')]
        c: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        rmax: f64,
        /// Grid points per unit residual.
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a synthetic dataset, optionally with noise, as CSV.
    Gen {
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, conflicts_with = "sigma")]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot series (CSV) of mean scores across results from one noise sweep.
    Plot {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::Mae)]
        metric: MetricArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Mae,
    Rmse,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mae => Metric::Mae,
            MetricArg::Rmse => Metric::Rmse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum LossArg {
    Mse,
    Clf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Hc2,
    Hc8,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn metrics(m: Option<MetricArg>) -> Vec<Metric> {
    m.map_or_else(|| vec![Metric::Mae, Metric::Rmse], |m| vec![m.into()])
}

fn read_results(path: &Path) -> Result<ExperimentResults, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    ExperimentResults::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            list: true, ..
        } => {
            for name in harness::preset_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run {
            preset,
            config,
            seed,
            replicates,
            folds,
            epochs,
            data,
            out,
            ..
        } => {
            let mut cfg = match (&preset, &config) {
                (Some(name), _) => harness::preset(name)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                    ExperimentConfig::from_json(&text)?
                }
                (None, None) => return Err(usage("either --preset or --config is required")),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(f) = folds {
                cfg.folds = f;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(d) = data {
                match &mut cfg.dataset {
                    harness::DatasetSource::SeoulBike { path, .. } | harness::DatasetSource::Csv { path, .. } => *path = d,
                    harness::DatasetSource::Synthetic { .. } => return Err(usage("--data only applies to file datasets")),
                }
            }
            cfg.validate()?;
            let out = match out {
                Some(p) => p,
                None => match std::env::var_os(OUT_DIR_ENV) {
                    Some(dir) => {
                        let stem = if cfg.name.is_empty() { "results" } else { cfg.name.as_str() };
                        PathBuf::from(dir).join(format!("{stem}.json"))
                    }
                    None => return Err(usage(format!("--out is required when {OUT_DIR_ENV} is unset"))),
                },
            };
            let results = harness::run_experiment(&cfg)?;
            let json = results.to_json()?;
            std::fs::write(&out, json).map_err(|e| usage(format!("{}: {e}", out.display())))?;
            eprintln!(
                "wrote {} ({} models x {} replicates, {:.1}s)",
                out.display(),
                results.table.models.len(),
                cfg.replicates,
                results.metadata.elapsed_secs
            );
            Ok(())
        }
        Command::Table {
            results,
            metric,
            format,
        } => {
            let r = read_results(&results)?;
            let format = match format {
                FormatArg::Text => TableFormat::Text,
                FormatArg::Csv => TableFormat::Csv,
            };
            print!("{}", report::render_table(&r.table, &metrics(metric), format));
            Ok(())
        }
        Command::Compare { results, metric } => {
            let r = read_results(&results)?;
            for m in metrics(metric) {
                let c = harness::compare_models(&r.table, m)?;
                print!("{}", report::render_comparison(&c));
            }
            Ok(())
        }
        Command::Influence {
            losses,
            c,
            rmax,
            steps,
            out,
        } => {
            let mut specs = Vec::new();
            for l in &losses {
                match l {
                    LossArg::Mse => specs.push(LossSpec::mse()),
                    LossArg::Clf => {
                        if c.is_empty() {
                            return Err(usage("--loss clf needs at least one --c"));
                        }
                        for &k in &c {
                            specs.push(LossSpec::clf(k)?);
                        }
                    }
                }
            }
            let grid = report::residual_grid(rmax, steps)?;
            emit(out.as_deref(), &report::influence_csv(&specs, &grid)?)
        }
        Command::Gen {
            dataset,
            n,
            seed,
            sigma,
            tau,
            out,
        } => {
            let generator = match dataset {
                DatasetArg::Hc2 => Synthetic::Hc2,
                DatasetArg::Hc8 => Synthetic::Hc8,
            };
            let clean: Dataset64 = generator.generate(n, seed)?;
            let noise = match (sigma, tau) {
                (Some(sigma), _) => Noise::Gaussian { sigma },
                (_, Some(tau)) => Noise::Cauchy { x0: 0.0, tau },
                _ => Noise::None,
            };
            let ds = noise.apply(&clean, cauchy_bench::seed::child_seed(seed, "noise"))?;
            ds.save_csv(&out)?;
            Ok(())
        }
        Command::Plot { results, metric, out } => {
            let all = results.iter().map(|p| read_results(p)).collect::<Result<Vec<_>, _>>()?;
            let series = report::emit_plot_series(&all, metric.into())?;
            emit(out.as_deref(), &report::series_csv(&series)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
