use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anisoeq_core::cli::*;
use anisoeq_core::Error;
use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "anisoeq", version, about = "Minimisers of anisotropic interaction energies")]
struct Cli {
    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the minimiser and write a report.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Euler-Lagrange conditions for a given shape.
    Verify {
        config: PathBuf,
        /// Shape JSON, or a solve report.
        shape: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy of a candidate measure.
    Energy {
        config: PathBuf,
        measure: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate a p function as CSV.
    ScanP {
        #[arg(value_enum)]
        variant: Variant,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha2: f64,
        /// Quadrature order.
        #[arg(long, default_value_t = 64)]
        order: usize,
        /// Geometric instead of uniform spacing.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the transform coefficients and positivity scans of a profile.
    Fourier {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Quartic,
    Quadratic,
}

fn emit<T: Serialize>(doc: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(path) => {
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?
        }
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn out_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| cfg.output.report.clone())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let quiet = cli.quiet;
    let note = |msg: String| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_solve(&cfg)?;
            emit(&report, out_path(out, &cfg).as_deref())?;
            note(format!(
                "{:?} semiaxes={:?} el_residual={:.3e} energy={:.9}",
                report.classification, report.shape.semiaxes, report.el_residual, report.energy.value
            ));
            Ok(EXIT_OK)
        }
        Command::Verify { config, shape, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_verify(&cfg, &load_shape(&shape)?)?;
            emit(&report, out_path(out, &cfg).as_deref())?;
            let v = &report.verification;
            note(format!(
                "verify {} constancy={:.3e} exterior_min={:.3e}",
                if v.passed { "passed" } else { "failed" },
                v.details.constancy_residual,
                v.details.exterior_min
            ));
            Ok(if v.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Energy { config, measure, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_energy(&cfg, &load_measure(&measure)?)?;
            emit(&report, out_path(out, &cfg).as_deref())?;
            Ok(EXIT_OK)
        }
        Command::ScanP { variant, t_min, t_max, steps, alpha1, alpha2, order, log, csv } => {
            let spec = ScanSpec {
                variant: match variant {
                    Variant::Quartic => PVariant::Quartic,
                    Variant::Quadratic => PVariant::Quadratic,
                },
                t_min,
                t_max,
                steps,
                alpha: [alpha1, alpha2],
                order,
                log_spacing: log,
            };
            let rows = cmd_scan_p(&spec)?;
            match csv {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(file);
                    write_csv(&mut w, &rows)?;
                    w.flush()?;
                    note(format!("wrote {} rows to {}", rows.len(), path.display()));
                }
                None => write_csv(io::stdout().lock(), &rows)?,
            }
            Ok(EXIT_OK)
        }
        Command::Fourier { config, out } => {
            let cfg = RunConfig::load(&config)?;
            emit(&cmd_fourier(&cfg)?, out.as_deref())?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            // downstream reader closed early, e.g. `| head`
            if err
                .downcast_ref::<std::io::Error>()
                .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
            {
                return ExitCode::SUCCESS;
            }
            let (code, kind) = match err.downcast_ref::<Error>() {
                Some(e) => (exit_code(e), error_kind(e)),
                None => (EXIT_OTHER, "io"),
            };
            let detail = format!("{err:#}").replace('"', "'");
            eprintln!("error code={code} kind={kind} detail=\"{detail}\"");
            ExitCode::from(code as u8)
        }
    }
}
