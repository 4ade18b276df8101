//! `khessian`: experiments on radial k-Hessian problems with a Matukuma weight.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use khessian::Error;

use config::{Exponent, FileConfig, RunConfig};

#[derive(Parser)]
#[command(name = "khessian", version, about = "Radial k-Hessian problems with a Matukuma-type weight")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Exponent q, a number or a fraction such as 13/9.
    #[arg(long, global = true)]
    q: Option<String>,
    /// Weight exponent mu, a number or a fraction.
    #[arg(long, global = true)]
    mu: Option<String>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with any of the settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct Opts {
    #[arg(long)]
    lambda: Option<f64>,
    /// Load as a multiple of lambda_tilde.
    #[arg(long)]
    lambda_frac: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t1: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    /// Relative difference below which a point carries no sign (intersect).
    #[arg(long)]
    zero_tol: Option<f64>,
    #[arg(long)]
    iter_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents, regime and the lower bound for lambda*.
    Exponents,
    /// Singular solution: lambda_tilde and the profile.
    Singular(Opts),
    /// Bifurcation map Lambda(alpha) on a log grid.
    Sweep(Opts),
    /// Number of solutions for a given load.
    Count(Opts),
    /// Intersections of the singular and a regular profile on [r_min, 1].
    Intersect(Opts),
    /// Phase-plane orbit, events and critical points.
    Phase(Opts),
    /// Maximal solution by monotone iteration.
    Maximal(Opts),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Transform(_) => 2,
        Error::Regime(_) => 3,
        Error::Io(_) => 1,
        _ => 4,
    }
}

/// Writes every file under a temporary name first, then renames them into place.
fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), Error> {
    if files.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push(tmp);
    }
    for ((name, _), tmp) in files.iter().zip(&staged) {
        fs::rename(tmp, dir.join(name))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let o = match &cli.command {
        Command::Exponents => None,
        Command::Singular(o)
        | Command::Sweep(o)
        | Command::Count(o)
        | Command::Intersect(o)
        | Command::Phase(o)
        | Command::Maximal(o) => Some(o),
    };
    let d = Opts::default();
    let o = o.unwrap_or(&d);
    let flags = FileConfig {
        n: g.n,
        k: g.k,
        q: g.q.map(Exponent::Text),
        mu: g.mu.map(Exponent::Text),
        tol: g.tol,
        out: g.out,
        lambda: o.lambda,
        lambda_frac: o.lambda_frac,
        alpha: o.alpha,
        alpha_min: o.alpha_min,
        alpha_max: o.alpha_max,
        samples: o.samples,
        t0: o.t0,
        t1: o.t1,
        x0: o.x0,
        y0: o.y0,
        r_min: o.r_min,
        zero_tol: o.zero_tol,
        iter_cap: o.iter_cap,
    };
    let cfg = RunConfig::resolve(file.overlay(flags))?;
    let report = match cli.command {
        Command::Exponents => commands::exponents(&cfg)?,
        Command::Singular(_) => commands::singular(&cfg)?,
        Command::Sweep(_) => commands::sweep(&cfg)?,
        Command::Count(_) => commands::count(&cfg)?,
        Command::Intersect(_) => commands::intersect(&cfg)?,
        Command::Phase(_) => commands::phase(&cfg)?,
        Command::Maximal(_) => commands::maximal(&cfg)?,
    };
    write_outputs(&cfg.out, &report.files)?;
    let mut text = serde_json::to_string_pretty(&report.json)?;
    text.push('\n');
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
