use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geodecomp_core::harness::io::{
    back_map, load_series, read_json, write_csv_file, write_decomposition_csvs, write_json, write_points_csv,
    write_rows_csv, BackMap, SeriesKind,
};
use geodecomp_core::harness::{
    choose_bandwidth, evaluate_models, evaluate_simulation, fit_model, init_thread_pool, EvalConfig, EvalReport,
};
use geodecomp_core::{decompose, simulate, Error, ErrorClass, FittedModel, ModelKind, SimConfig};
use std::io::Write;

#[derive(Parser)]
#[command(name = "geodecomp", version, about = "Decompose and forecast sphere-valued time series")]
struct Cli {
    /// JSON file overriding evaluation, cross-validation and decomposition settings
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Input {
    /// Series CSV with header `t,c1..cG` or `t,bin1..binG`
    #[arg(long)]
    input: PathBuf,
    /// sphere, composition or histogram
    #[arg(long, default_value = "sphere")]
    kind: SeriesKind,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic series and its ground truth
    Simulate {
        /// SimConfig JSON; defaults apply to missing keys
        #[arg(long)]
        sim: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Split a series into trend, periodic component and residuals
    Decompose {
        #[command(flatten)]
        input: Input,
        /// Trend bandwidth; chosen by cross-validation when omitted
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for plot-ready CSV curves
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Fit a forecasting model
    Fit {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "tpsar")]
        model: ModelKind,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast from a fitted model
    Forecast {
        /// Model JSON written by `fit`
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        /// sphere, composition or density
        #[arg(long, default_value = "sphere")]
        back_map: BackMap,
    },
    /// Multi-horizon forecast comparison on a series or simulated replicates
    Evaluate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "sphere")]
        kind: SeriesKind,
        /// Evaluate on simulated replicates instead of an input series
        #[arg(long, conflicts_with = "input")]
        simulate: bool,
        #[arg(long)]
        sim: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-horizon error table
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<EvalConfig, Error> {
    match &cli.config {
        Some(p) => read_json(p),
        None => Ok(EvalConfig::default()),
    }
}

fn load_sim(path: &Option<PathBuf>, seed: u64) -> Result<SimConfig, Error> {
    let mut sim: SimConfig = match path {
        Some(p) => read_json(p)?,
        None => SimConfig::default(),
    };
    sim.seed = seed;
    sim.validate()?;
    Ok(sim)
}

fn write_report_csv(path: &PathBuf, report: &EvalReport) -> Result<(), Error> {
    write_csv_file(path, |mut w| {
        let kinds: Vec<&ModelKind> = report.errors.keys().collect();
        let mut header = String::from("horizon");
        for k in &kinds {
            header.push(',');
            header.push_str(k.name());
        }
        writeln!(w, "{header}")?;
        for (i, m) in report.horizons.iter().enumerate() {
            let mut line = m.to_string();
            for k in &kinds {
                line.push(',');
                line.push_str(&geodecomp_core::harness::io::fmt_sig(report.errors[*k][i]));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    init_thread_pool()?;
    let mut config = load_config(&cli)?;
    match cli.cmd {
        Command::Simulate { sim, out, truth } => {
            let bundle = simulate(&load_sim(&sim, cli.seed)?)?;
            write_csv_file(&out, |w| write_points_csv(w, 1, bundle.y.points()))?;
            if let Some(t) = truth {
                write_json(&t, &bundle.truth())?;
            }
        }
        Command::Decompose {
            input,
            bandwidth,
            out,
            csv_dir,
        } => {
            let series = load_series(&input.input, input.kind)?;
            if bandwidth.is_some() {
                config.cv.bandwidth = bandwidth;
            }
            let h = choose_bandwidth(&series, &config)?;
            let d = decompose(&series, h, &config.decompose)?;
            write_json(&out, &d)?;
            if let Some(dir) = csv_dir {
                write_decomposition_csvs(&dir, &d)?;
            }
        }
        Command::Fit {
            input,
            model,
            bandwidth,
            order,
            out,
        } => {
            let series = load_series(&input.input, input.kind)?;
            if bandwidth.is_some() {
                config.cv.bandwidth = bandwidth;
            }
            if order.is_some() {
                config.cv.order = order;
            }
            let (fitted, _) = fit_model(&series, model, &config)?;
            write_json(&out, &fitted)?;
        }
        Command::Forecast {
            model,
            steps,
            out,
            back_map: how,
        } => {
            let fitted: FittedModel = read_json(&model)?;
            let start = fitted.ar().logseries.len()
                + match fitted {
                    FittedModel::Dsar(_) => 2,
                    _ => 1,
                };
            let points = fitted.forecast(steps)?;
            let rows = back_map(&points, how)?;
            let prefix = match how {
                BackMap::Sphere | BackMap::Composition => "c",
                BackMap::Density => "bin",
            };
            write_csv_file(&out, |w| write_rows_csv(w, prefix, start, &rows))?;
        }
        Command::Evaluate {
            input,
            kind,
            simulate: use_sim,
            sim,
            replicates,
            out,
            csv,
        } => {
            let report = if use_sim {
                evaluate_simulation(&load_sim(&sim, cli.seed)?, replicates, &config)?
            } else {
                let path = input.ok_or_else(|| Error::invalid("evaluate needs --input or --simulate"))?;
                evaluate_models(&load_series(&path, kind)?, &config)?
            };
            write_json(&out, &report)?;
            if let Some(c) = csv {
                write_report_csv(&c, &report)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.class() {
                ErrorClass::Validation => ExitCode::from(1),
                ErrorClass::Numerical => ExitCode::from(2),
            }
        }
    }
}
