use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phasecert::benchmark::{self, BenchmarkOptions};
use phasecert::certify::{log_grid, Margins};
use phasecert::cli::{self, AnalysisConfig};
use phasecert::error::{Error, Result};
use phasecert::indices::{PsiLowerOptions, DEFAULT_RESTARTS};
use phasecert::structure::BlockDims;

#[derive(Parser)]
#[command(name = "phasecert", version, about = "Phase-based robust stability analysis")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sectoriality and phases of a complex matrix.
    Phases {
        /// Matrix file (JSON, or TOML with a `matrix` key).
        file: PathBuf,
        /// Also print N support points of the numerical range boundary.
        #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "64")]
        emit_boundary: Option<usize>,
    },
    /// Structured phase, gain and passivity indices of a matrix.
    Indices {
        file: PathBuf,
        /// Block structure, e.g. "((2), (1, 1))", "full:3" or "diag:3".
        #[arg(long)]
        structure: BlockDims,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Certify a feedback loop over a frequency grid.
    ///
    /// Exit status: 0 certified, 2 not certified, 1 error.
    Analyze {
        config: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-frequency CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reproduce the rotating-body benchmark.
    Benchmark {
        #[arg(long, value_enum, default_value_t = Family::RotatingBody)]
        family: Family,
        /// "default" for 60 log-spaced poles over [0.05, 100], or "lo:hi:points".
        #[arg(long, default_value = "default")]
        b_grid: String,
        /// Calibrate `a` against the reference instability interval.
        #[arg(long, conflicts_with = "a")]
        calibrate_a: bool,
        /// Use this `a` instead of calibrating.
        #[arg(long)]
        a: Option<f64>,
        /// Frequency grid points between 1e-2 and 1e3 (plus 0 and inf).
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Directory for manifest.json, table.csv and series.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Include the lower phase bound in series.csv.
        #[arg(long)]
        lower_bound: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    RotatingBody,
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_b_grid(text: &str) -> Result<Vec<f64>> {
    if text == "default" {
        return Ok(benchmark::default_b_grid());
    }
    let bad = || {
        Error::Config(format!(
            "--b-grid: expected \"default\" or \"lo:hi:points\", got \"{text}\""
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
    let n: usize = n.parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo < hi && hi.is_finite() && n >= 2) {
        return Err(bad());
    }
    Ok(benchmark::logspace(lo, hi, n))
}

fn run(args: Args) -> Result<u8> {
    match args.command {
        Command::Phases { file, emit_boundary } => {
            let a = cli::load_matrix(&file)?;
            print!("{}", cli::phases_command(&a, emit_boundary)?);
            Ok(0)
        }
        Command::Indices {
            file,
            structure,
            restarts,
            seed,
            json,
        } => {
            let a = cli::load_matrix(&file)?;
            let opts = PsiLowerOptions {
                restarts,
                seed,
                ..PsiLowerOptions::default()
            };
            let s = cli::indices_summary(&a, &structure, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            } else {
                print!("{}", s.text());
            }
            Ok(0)
        }
        Command::Analyze { config, out, csv } => {
            let cfg = AnalysisConfig::load(&config)?;
            let result = cli::analyze(&cfg)?;
            if let Some(path) = out {
                write(&path, &result.json())?;
            }
            if let Some(path) = csv {
                write(&path, &result.report.to_csv())?;
            }
            print!("{}", result.summary());
            Ok(cli::verdict_code(result.report.verdict))
        }
        Command::Benchmark {
            family: Family::RotatingBody,
            b_grid,
            calibrate_a,
            a,
            points,
            out_dir,
            lower_bound,
        } => {
            if points < 2 {
                return Err(Error::Config("--points must be at least 2".into()));
            }
            let opts = BenchmarkOptions {
                a: if calibrate_a { None } else { a },
                b_grid: parse_b_grid(&b_grid)?,
                grid: log_grid(1e-2, 1e3, points),
                margins: Margins::default(),
                lower_bound: lower_bound.then(PsiLowerOptions::default),
            };
            let outcome = benchmark::run(&opts)?;
            let m = &outcome.manifest;
            println!(
                "a = {:.12} ({})",
                m.a,
                if m.calibrated { "calibrated" } else { "given" }
            );
            match m.instability_interval {
                Some((lo, hi)) => println!("oracle instability interval: b in ({lo:.4}, {hi:.4})"),
                None => println!("oracle instability interval: none"),
            }
            print!("{}", outcome.table_text());
            for (k, (name, _)) in benchmark::CRITERIA_SETS.iter().enumerate() {
                println!(
                    "{name}: {} of {} certified",
                    outcome.certified_count(k),
                    outcome.rows.len()
                );
            }
            let violations = outcome.soundness_violations();
            if !violations.is_empty() {
                println!("SOUNDNESS VIOLATION at b = {violations:?}");
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
                let manifest = serde_json::to_string_pretty(m).expect("manifest serializes");
                write(&dir.join("manifest.json"), &manifest)?;
                write(&dir.join("table.csv"), &outcome.table_csv())?;
                write(&dir.join("series.csv"), &outcome.series_csv())?;
            }
            Ok(if violations.is_empty() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
