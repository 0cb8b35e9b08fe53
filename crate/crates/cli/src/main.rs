//! `hsnoc` command-line front end.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 for bad
//! input data or failed I/O.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use hsnoc::allocator::{enumerate_oracle, ga_allocate, greedy_allocate, CircuitPlan, ORACLE_PAIR_LIMIT};
use hsnoc::orchestrator::{
    compare_reports, injection_sweep, run_experiment, subnet_count_sweep, write_outputs, write_summary_csv,
    ExperimentConfig, ExperimentError, RunReport,
};
use hsnoc::sim::{write_sweep_csv, SweepParams};
use hsnoc::traffic::{ingest, profile, write_trace, TrafficProfile};

#[derive(Parser)]
#[command(name = "hsnoc", version, about = "Hybrid circuit/packet switched NoC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write the outputs its config names.
    Run {
        config: PathBuf,
        /// Overrides `output.report`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides `output.summary`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Injection-rate or subnet-count sweeps.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Build a plan file from a profile file.
    Allocate {
        /// Profile file (`src,dst,flit_count,hop_count` lines).
        #[arg(long)]
        profile: PathBuf,
        /// Mesh, granularity and GA settings; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "greedy")]
        allocator: Allocator,
        /// CS subnets; defaults to the config layout's.
        #[arg(long)]
        subnets: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalize run reports against the baseline among them.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the configured synthetic traffic as a trace file.
    Generate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Profile a trace (or the configured traffic) without simulating it.
    Profile {
        config: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SweepKind {
    /// Latency against offered load for the VC and circuit-only fabrics.
    Injection {
        config: PathBuf,
        /// Comma-separated ascending rates in flits/node/cycle.
        #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5])]
        rates: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        cycles: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The configured experiment once per subnet count.
    Subnets {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8])]
        counts: Vec<u32>,
        /// Directory for one report per count.
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Allocator {
    Greedy,
    Ga,
    Oracle,
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Input {
        context: path.display().to_string(),
        message: e.to_string(),
    }
}

fn output_err(path: Option<&Path>, e: io::Error) -> ExperimentError {
    ExperimentError::Output {
        path: path.map_or("stdout".into(), |p| p.display().to_string()),
        message: e.to_string(),
    }
}

/// Runs `body` against `path`, or stdout when no path is given.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), ExperimentError> {
    let result = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => body(&mut io::stdout().lock()),
    };
    result.map_err(|e| output_err(path, e))?;
    if let Some(p) = path {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn load_or_default(path: Option<&Path>) -> Result<ExperimentConfig, ExperimentError> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run { config, report, summary } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.output.report = report.or(cfg.output.report);
            cfg.output.summary = summary.or(cfg.output.summary);
            let exp = run_experiment(&cfg)?;
            write_outputs(&cfg, &exp)?;
            let s = &exp.report.summary;
            println!(
                "{}: {} packets, {:.1}% flits in circuits, mean packet latency {}, energy/flit {}",
                exp.report.name,
                s.packets_ejected,
                100.0 * s.in_circuit_fraction,
                s.mean_packet_latency.map_or("n/a".into(), |v| format!("{v:.2}")),
                s.energy_per_flit.map_or("n/a".into(), |v| format!("{v:.3}")),
            );
            if let Some(r) = exp.report.energy.as_ref().and_then(|e| e.normalized_to_baseline) {
                println!("normalized energy per flit {r:.4}");
            }
            if cfg.output.report.is_none() {
                print!("{}", exp.report.to_toml());
            }
            Ok(())
        }
        Command::Sweep {
            kind: SweepKind::Injection { config, rates, cycles, out },
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let params = SweepParams {
                cycles,
                drain_cycles: cycles,
                ..SweepParams::default()
            };
            let tables = injection_sweep(&cfg, &rates, &params)?;
            emit(out.as_deref(), |w| write_sweep_csv(w, &tables))?;
            for (label, t) in &tables {
                eprintln!(
                    "{label}: unloaded latency {:.2}, saturation {}",
                    t.unloaded_latency,
                    t.saturation_rate().map_or("beyond the swept range".into(), |r| r.to_string())
                );
            }
            Ok(())
        }
        Command::Sweep {
            kind: SweepKind::Subnets { config, counts, reports, out },
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let runs = subnet_count_sweep(&cfg, &counts)?;
            if let Some(dir) = &reports {
                std::fs::create_dir_all(dir).map_err(|e| output_err(Some(dir), e))?;
                for r in &runs {
                    let path = dir.join(format!("{}.toml", r.name));
                    emit(Some(&path), |w| w.write_all(r.to_toml().as_bytes()))?;
                }
            }
            let rows = compare_reports(&runs)?;
            emit(out.as_deref(), |w| write_summary_csv(w, &rows))
        }
        Command::Allocate {
            profile: profile_path,
            config,
            allocator,
            subnets,
            out,
        } => {
            let cfg = load_or_default(config.as_deref())?;
            let mesh = cfg.mesh.build()?;
            let f = File::open(&profile_path).map_err(|e| input_err(&profile_path, e))?;
            let prof = TrafficProfile::read_from(BufReader::new(f), &mesh, cfg.experiment.granularity)
                .map_err(|e| input_err(&profile_path, e))?;
            let k = subnets.unwrap_or(cfg.layout.cs_subnets());
            let plan: CircuitPlan = match allocator {
                Allocator::Greedy => greedy_allocate(&prof, &mesh, k)?,
                Allocator::Ga => ga_allocate(&prof, &mesh, k, &cfg.ga)?,
                Allocator::Oracle => enumerate_oracle(&prof, &mesh, k, ORACLE_PAIR_LIMIT)?,
            };
            eprintln!("{} circuits on {k} subnets", plan.circuit_count());
            emit(out.as_deref(), |w| plan.write_to(w))
        }
        Command::Compare { reports, out } => {
            let mut parsed = Vec::new();
            for path in &reports {
                let text = std::fs::read_to_string(path).map_err(|e| input_err(path, e))?;
                parsed.push(RunReport::from_toml(&text).map_err(|e| input_err(path, e))?);
            }
            let rows = compare_reports(&parsed)?;
            emit(out.as_deref(), |w| write_summary_csv(w, &rows))
        }
        Command::Generate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let mesh = cfg.mesh.build()?;
            let (events, _) = cfg.load_traffic(&mesh)?;
            eprintln!("{} packets", events.len());
            emit(out.as_deref(), |w| write_trace(w, &events))
        }
        Command::Profile { config, trace, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let mesh = cfg.mesh.build()?;
            let events = match &trace {
                Some(path) => {
                    let f = File::open(path).map_err(|e| input_err(path, e))?;
                    ingest(BufReader::new(f), &mesh, cfg.traffic.synthetic.sizes)
                        .map_err(|e| input_err(path, e))?
                        .events
                }
                None => cfg.load_traffic(&mesh)?.0,
            };
            let prof = profile(&events, &mesh, cfg.experiment.granularity, cfg.layout.total_width_bits)
                .map_err(|e| ExperimentError::Input {
                    context: "profile".into(),
                    message: e.to_string(),
                })?;
            emit(out.as_deref(), |w| prof.write_to(w))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
