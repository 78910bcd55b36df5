use clap::{Parser, Subcommand, ValueEnum};
use ddlab::harness::config::ExperimentConfig;
use ddlab::harness::output::{emit_outputs, plot_l1_error, read_sweep_csv, write_sweep_csv, Format};
use ddlab::harness::{compute_reference, run_experiment, sweep, Coupling, HarnessError};
use ddlab::io::{fmt17, write_state_csv};
use ddlab::models::verify_assumptions;
use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ddlab", version, about = "Viscous-dispersive conservation law experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    #[value(name = "41")]
    T41,
    #[value(name = "42")]
    T42,
    #[value(name = "43")]
    T43,
    Free,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its summary row.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an epsilon sweep along delta = C * epsilon^p.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        theorem: TheoremArg,
        /// Exponent p for `--theorem free`.
        #[arg(long)]
        exponent: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        coupling_constant: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated subset of csv,svg.
        #[arg(long, value_delimiter = ',', default_value = "csv,svg")]
        formats: Vec<String>,
    },
    /// Compute the entropy-solution reference at the final time.
    Reference {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample the flux and viscosity assumptions.
    VerifyAssumptions { config: PathBuf },
    /// Plot l1_error against epsilon from a sweep CSV.
    Plot {
        result: PathBuf,
        /// Defaults to the CSV path with an .svg extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path, output: Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if output.is_some() {
        cfg.output_dir = output;
    }
    Ok(cfg)
}

fn print_rows(rows: &[ddlab::harness::SweepRow]) -> Result<(), HarnessError> {
    write_sweep_csv(rows, io::stdout().lock())
}

fn parse_formats(names: &[String]) -> Result<BTreeSet<Format>, HarnessError> {
    names
        .iter()
        .map(|n| match n.trim() {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(HarnessError::Validation(format!("unknown format {other:?}"))),
        })
        .collect()
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { config, output } => {
            let cfg = load(&config, output)?;
            let report = run_experiment(&cfg)?;
            print_rows(&[report.row])?;
            if report.seam_contaminated {
                eprintln!("warning: solution reached the outer 5% of the domain");
            }
        }
        Command::Sweep { config, theorem, exponent, coupling_constant, epsilons, workers, output, formats } => {
            let mut cfg = load(&config, output)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let coupling = match (theorem, exponent) {
                (TheoremArg::Free, Some(p)) => Coupling::Free(p),
                (TheoremArg::Free, None) => {
                    return Err(HarnessError::Validation("--theorem free needs --exponent".into()))
                }
                (_, Some(_)) => {
                    return Err(HarnessError::Validation("--exponent only applies to --theorem free".into()))
                }
                (TheoremArg::T41, None) => Coupling::Thm41,
                (TheoremArg::T42, None) => Coupling::Thm42,
                (TheoremArg::T43, None) => Coupling::Thm43,
            };
            let formats = parse_formats(&formats)?;
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("ddlab-out"));
            cfg.output_dir = Some(dir.clone());
            match sweep(&cfg, coupling, coupling_constant, &epsilons) {
                Ok(result) => {
                    print_rows(&result.rows)?;
                    for p in emit_outputs(&result, &formats, &dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                    eprintln!(
                        "exponent p = {}; l1_error strictly decreasing: {}",
                        fmt17(result.exponent),
                        result.l1_decreasing
                    );
                }
                Err(failure) => {
                    if !failure.partial.rows.is_empty() {
                        print_rows(&failure.partial.rows)?;
                        emit_outputs(&failure.partial, &formats, &dir)?;
                    }
                    eprintln!("sweep stopped at epsilon = {}", failure.epsilon);
                    return Err(failure.source);
                }
            }
        }
        Command::Reference { config, output } => {
            let cfg = load(&config, output)?;
            cfg.validate()?;
            let reference = compute_reference(&cfg)?;
            let state = reference.as_state();
            match &cfg.output_dir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    let path = dir.join("reference.csv");
                    let mut w = BufWriter::new(File::create(&path)?);
                    write_state_csv(&state, &mut w)?;
                    w.flush()?;
                    eprintln!("wrote {}", path.display());
                }
                None => write_state_csv(&state, io::stdout().lock())?,
            }
            eprintln!("scheme {:?}, t = {}, cells = {}", reference.scheme, reference.t, reference.grid.cells());
        }
        Command::VerifyAssumptions { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (flux, visc) = (cfg.flux_model()?, cfg.viscosity_model()?);
            let range = cfg.assumptions.range;
            let report = verify_assumptions(&flux, &visc, (-range, range), cfg.assumptions.samples, Some(cfg.seed))?;
            let mut out = io::stdout().lock();
            for v in &report.verdicts {
                let witness = v.witness.map_or(String::new(), |w| format!(" witness {}", fmt17(w)));
                writeln!(out, "{:?}: {}{} {}", v.assumption, if v.passed { "pass" } else { "FAIL" }, witness, v.note)?;
            }
            let f = report.fitted;
            writeln!(out, "fitted C1 = {} C2 = {} C3 = {} C4 = {} C5 = {}", f.c1, f.c2, f.c3, f.c4, f.c5)?;
            if !report.all_passed() {
                return Err(HarnessError::Validation("assumptions violated".into()));
            }
        }
        Command::Plot { result, output } => {
            let rows = read_sweep_csv(&fs::read_to_string(&result)?)?;
            if rows.is_empty() {
                return Err(HarnessError::Validation("no rows to plot".into()));
            }
            let path = output.unwrap_or_else(|| result.with_extension("svg"));
            plot_l1_error(&rows, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
