use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qgate::orchestrator::{analyze_pulse, collect_summaries, report, run, Preset, RunConfig, Scheme};
use qgate::parallel::configure_threads_from_env;
use qgate::pulse::ControlField;
use qgate::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

/// Optimal control of a two-transmon geometric phase gate.
#[derive(Debug, Parser)]
#[command(name = "qgate-opt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scheme and write a run directory.
    Run {
        config: PathBuf,
        /// propagate, direct-sm, direct-geo, simplex, hybrid-sm or hybrid-geo
        #[arg(long)]
        scheme: Option<String>,
        /// reduced or full
        #[arg(long)]
        preset: Option<String>,
        /// Parent directory for the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate finished runs.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Where to write the CSV version of the table.
        #[arg(long, default_value = "report.csv")]
        csv: PathBuf,
    },
    /// Propagate a pulse file and print its gate metrics as JSON.
    Analyze { pulse: PathBuf, config: PathBuf },
}

fn load_config(path: &std::path::Path, preset: Option<&str>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(p) = preset {
        cfg.apply_preset(p.parse::<Preset>()?);
    } else if let Some(p) = cfg.preset {
        cfg.apply_preset(p);
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, scheme, preset, out } => {
            let mut cfg = load_config(&config, preset.as_deref())?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let scheme = cfg.resolve_scheme(scheme.as_deref().map(str::parse::<Scheme>).transpose()?)?;
            cfg.validate(scheme)?;
            let outcome = run(&cfg, scheme)?;
            let s = &outcome.summary;
            println!("{}", outcome.dir.display());
            println!(
                "{}: T = {:.1} ns, propagations = {}, eps_C = {:.3e}, eps_pop = {:.3e}, eps_avg = {:.3e}",
                s.scheme, s.duration_ns, s.total_propagations, s.eps_c, s.eps_pop, s.eps_avg
            );
        }
        Command::Report { dirs, csv } => {
            let summaries = collect_summaries(&dirs)?;
            let (table, csv_text) = report(&summaries)?;
            print!("{table}");
            std::fs::write(&csv, csv_text)?;
        }
        Command::Analyze { pulse, config } => {
            let cfg = load_config(&config, None)?;
            cfg.system.validate().map_err(|e| Error::Config(format!("system: {e}")))?;
            let field = ControlField::read(&pulse)?;
            let (metrics, peak) = analyze_pulse(&cfg, &field)?;
            let mut value = serde_json::to_value(&metrics)?;
            value["duration_ns"] = field.duration().into();
            value["peak_cavity_population"] = peak.into();
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        _ => EXIT_STAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = configure_threads_from_env() {
        log::debug!("thread cap {n}");
    }
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
