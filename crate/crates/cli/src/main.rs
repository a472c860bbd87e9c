use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use pucci_lab_cli::output::{summarize, write_report};
use pucci_lab_cli::run::{coverage_warnings, run_scenario};
use pucci_lab_cli::{parse_scenario, ConfigError, Scenario, Status};

#[derive(Parser)]
#[command(name = "pucci-lab", version, about = "Run parabolic Pucci equation experiments from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or every `*.toml` in a directory.
    Run {
        config: PathBuf,
        #[arg(long, env = "PUCCI_LAB_OUT", default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
    /// Run a scenario with a given number of refinement levels.
    Refine {
        config: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long, env = "PUCCI_LAB_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pretty-print `report.json` files under a directory.
    Report { dir: PathBuf },
}

fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let s = parse_scenario(path)?;
    let warnings = coverage_warnings(&s);
    if warnings.is_empty() {
        Ok(s)
    } else {
        Err(ConfigError::Invalid(warnings.join("; ")))
    }
}

fn config_paths(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "toml"))
            .collect();
        v.sort();
        Ok(v)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn run_one(mut s: Scenario, out: &Path, seed: Option<u64>) -> Status {
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let report = run_scenario(&s);
    let dir = out.join(&s.name);
    if let Err(e) = write_report(&dir, &report) {
        eprintln!("{}: cannot write {}: {e}", s.name, dir.display());
        return Status::NumericalError;
    }
    let status = report.status();
    let label = match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        _ => "ERROR",
    };
    println!("{label} {} ({}): {}", s.name, s.kind, report.verdict.witness);
    status
}

fn run_many(config: &Path, out: &Path, seed: Option<u64>, jobs: usize, levels: Option<usize>) -> Status {
    let paths = match config_paths(config) {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => {
            eprintln!("no scenario files in {}", config.display());
            return Status::ConfigError;
        }
        Err(e) => {
            eprintln!("cannot read {}: {e}", config.display());
            return Status::ConfigError;
        }
    };
    let mut scenarios = Vec::new();
    let mut worst = Status::Pass;
    for p in &paths {
        match load(p) {
            Ok(mut s) => {
                if let Some(l) = levels {
                    s.refinement_levels = l;
                }
                if scenarios.iter().any(|o: &Scenario| o.name == s.name) {
                    eprintln!("{}: duplicate scenario name {:?}", p.display(), s.name);
                    worst = worst.max(Status::ConfigError);
                } else {
                    scenarios.push(s);
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", p.display());
                worst = worst.max(Status::ConfigError);
            }
        }
    }
    let statuses: Vec<Status> = if jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| scenarios.into_par_iter().map(|s| run_one(s, out, seed)).collect()),
            Err(e) => {
                eprintln!("cannot start {jobs} workers: {e}");
                return Status::NumericalError;
            }
        }
    } else {
        scenarios.into_iter().map(|s| run_one(s, out, seed)).collect()
    };
    statuses.into_iter().fold(worst, Status::max)
}

fn report(dir: &Path) -> Status {
    let files: Vec<PathBuf> = if dir.join("report.json").is_file() {
        vec![dir.join("report.json")]
    } else {
        let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
            .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path().join("report.json"))).filter(|p| p.is_file()).collect())
            .unwrap_or_default();
        v.sort();
        v
    };
    if files.is_empty() {
        eprintln!("no report.json under {}", dir.display());
        return Status::ConfigError;
    }
    let mut worst = Status::Pass;
    for f in files {
        let parsed = std::fs::read_to_string(&f).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(v) => print!("{}", summarize(&v)),
            Err(e) => {
                eprintln!("{}: {e}", f.display());
                worst = Status::ConfigError;
            }
        }
    }
    worst
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run { config, out, seed, jobs } => run_many(&config, &out, seed, jobs, None),
        Command::Refine { config, levels, out, seed } => {
            if !(1..=5).contains(&levels) {
                eprintln!("--levels must be in 1..=5");
                Status::ConfigError
            } else {
                run_many(&config, &out, seed, 1, Some(levels))
            }
        }
        Command::Validate { config } => match load(&config) {
            Ok(s) => {
                println!("ok: {} ({}, n = {}, {} level(s))", s.name, s.kind, s.dimension, s.refinement_levels);
                Status::Pass
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                Status::ConfigError
            }
        },
        Command::Report { dir } => report(&dir),
    };
    ExitCode::from(status.exit_code() as u8)
}
