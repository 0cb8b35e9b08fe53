//! Whole experiments: the full-width VC baseline, static and adaptive hybrid
//! runs, sweeps, and the normalized comparison between them.

mod config;
mod report;
mod runs;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::allocator::{AllocError, CircuitPlan};
use crate::sim::{sweep_injection, write_flit_dump, Fabric, FlitRecord, SimError, SubnetLayout, SweepParams, SweepTable};
use crate::traffic::TrafficProfile;

pub use config::{
    AllocatorKind, ExperimentConfig, ExperimentSection, MeshPreset, MeshSection, Mode, OutputSection, TrafficSection,
    TrafficSource,
};
pub use report::{compare, compare_reports, write_summary_csv, EpochReport, PlanRecord, RunReport, RunSummary, SummaryRow};
pub use runs::{
    allocate, run_adaptive, run_baseline, run_static, AdaptiveOutcome, EpochResult, Prepared, RunResult, StaticOutcome,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {message}")]
    Input { context: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl ExperimentError {
    pub(crate) fn input(path: &Path, e: impl Display) -> Self {
        ExperimentError::Input {
            context: path.display().to_string(),
            message: e.to_string(),
        }
    }

    fn output(path: &Path, e: impl Display) -> Self {
        ExperimentError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 1 for configuration errors, 2 for bad input data or failed I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Layout(_) | SimError::VcConfig(_) | SimError::Sweep(_) => ExperimentError::Config(e.to_string()),
            _ => ExperimentError::Input {
                context: "simulation".into(),
                message: e.to_string(),
            },
        }
    }
}

impl From<AllocError> for ExperimentError {
    fn from(e: AllocError) -> Self {
        match e {
            AllocError::InvalidParams(_) | AllocError::NoSubnets => ExperimentError::Config(e.to_string()),
            _ => ExperimentError::Input {
                context: "allocation".into(),
                message: e.to_string(),
            },
        }
    }
}

/// Result of one configured experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: RunReport,
    /// Static mode: the allocated plan. Adaptive mode: the last epoch's.
    pub plan: Option<CircuitPlan>,
    pub profile: Option<TrafficProfile>,
    pub flit_records: Vec<FlitRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, ExperimentError> {
    let mut p = Prepared::new(cfg)?;
    execute(&mut p, None)
}

/// Runs `p`. A supplied baseline is used instead of running one.
pub fn execute(p: &mut Prepared, baseline: Option<&RunResult>) -> Result<Experiment, ExperimentError> {
    let mode = p.cfg.experiment.mode;
    let mut own_baseline = None;
    let mut profile_run = None;
    let mut profile = None;
    let mut epochs = Vec::new();
    let main = match runs::run_mode(p)? {
        runs::ModeOutcome::Baseline(r) => r,
        runs::ModeOutcome::Static(s) => {
            let s = *s;
            profile_run = Some(RunSummary::new(&s.profile_run.stats, s.profile_run.energy.as_ref()));
            profile = Some(s.profile);
            own_baseline = Some(s.profile_run);
            s.production
        }
        runs::ModeOutcome::Adaptive(a) => {
            epochs = a
                .epochs
                .iter()
                .map(|e| EpochReport {
                    index: e.index,
                    start_cycle: e.start_cycle,
                    plan_active_from: e.plan_active_from,
                    summary: RunSummary::new(&e.stats, e.energy.as_ref()),
                    plan: PlanRecord::from(&e.plan),
                    energy: e.energy.clone(),
                })
                .collect();
            profile = a.epochs.last().map(|e| e.profile.clone());
            a.total
        }
    };
    let base = match (mode, baseline, p.cfg.experiment.compare_baseline) {
        (Mode::BaselineVc, _, _) | (_, None, false) => None,
        (_, Some(b), _) => Some(b.clone()),
        (_, None, true) => match own_baseline {
            Some(b) => Some(b),
            None => Some(run_baseline(p)?),
        },
    };
    let energy = match (&main.energy, base.as_ref().and_then(|b| b.energy.as_ref())) {
        (Some(e), Some(b)) => Some(e.clone().against(b).map_err(|e| ExperimentError::Input {
            context: "energy".into(),
            message: e.to_string(),
        })?),
        (e, _) => e.clone(),
    };
    let ex = &p.cfg.experiment;
    let report = RunReport {
        name: p.cfg.name.clone(),
        mode: mode.as_str().into(),
        allocator: (mode != Mode::BaselineVc).then(|| ex.allocator.as_str().into()),
        granularity: ex.granularity,
        layout: main.layout,
        seed: ex.seed,
        notes: p.notes.clone(),
        summary: RunSummary::new(&main.stats, main.energy.as_ref()),
        baseline: base.as_ref().map(|b| RunSummary::new(&b.stats, b.energy.as_ref())),
        profile_run,
        plan: (mode != Mode::BaselineVc).then(|| PlanRecord::from(&main.plan)),
        energy,
        stats: main.stats,
        epochs,
    };
    Ok(Experiment {
        report,
        plan: (mode != Mode::BaselineVc).then_some(main.plan),
        profile,
        flit_records: main.flit_records,
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::output(path, e))?;
    }
    let f = File::create(path).map_err(|e| ExperimentError::output(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| ExperimentError::output(path, e))
}

/// Writes the outputs named in `cfg.output`.
pub fn write_outputs(cfg: &ExperimentConfig, exp: &Experiment) -> Result<(), ExperimentError> {
    let out = &cfg.output;
    if let Some(path) = &out.report {
        write_file(path, |w| w.write_all(exp.report.to_toml().as_bytes()))?;
    }
    if let (Some(path), Some(plan)) = (&out.plan, &exp.plan) {
        write_file(path, |w| plan.write_to(w))?;
    }
    if let (Some(path), Some(profile)) = (&out.profile, &exp.profile) {
        write_file(path, |w| profile.write_to(w))?;
    }
    if let Some(path) = &out.flit_dump {
        write_file(path, |w| write_flit_dump(w, &exp.flit_records))?;
    }
    if let Some(path) = &out.summary {
        let rows = compare_reports(std::slice::from_ref(&exp.report))?;
        write_file(path, |w| write_summary_csv(w, &rows))?;
    }
    Ok(())
}

/// Runs `cfg` once per subnet count, concurrently, against one shared
/// baseline. Report names get a `-<n>subnets` suffix.
pub fn subnet_count_sweep(cfg: &ExperimentConfig, counts: &[u32]) -> Result<Vec<RunReport>, ExperimentError> {
    let prepared = Prepared::new(cfg)?;
    let baseline = run_baseline(&prepared)?;
    counts
        .par_iter()
        .map(|&n| {
            let mut p = prepared.clone();
            p.cfg.layout = SubnetLayout::new(cfg.layout.total_width_bits, n)?;
            p.cfg.name = format!("{}-{n}subnets", cfg.name);
            p.cfg.validate()?;
            Ok(execute(&mut p, Some(&baseline))?.report)
        })
        .collect()
}

/// Latency versus injection rate of the full-width VC network and of the
/// circuit-only fabric, on the configured mesh and traffic pattern.
pub fn injection_sweep(
    cfg: &ExperimentConfig,
    rates: &[f64],
    params: &SweepParams,
) -> Result<Vec<(String, SweepTable)>, ExperimentError> {
    cfg.validate()?;
    let mesh = cfg.mesh.build()?;
    let width = cfg.layout.total_width_bits;
    let fabrics = [
        (
            "vc",
            Fabric::Network {
                layout: SubnetLayout::new(width, 1)?,
                plan: CircuitPlan::empty(cfg.experiment.granularity, 0),
            },
        ),
        ("circuit", Fabric::CircuitOnly { width_bits: width }),
    ];
    fabrics
        .into_iter()
        .map(|(label, fabric)| {
            let t = sweep_injection(&mesh, &fabric, cfg.vc, &cfg.traffic.synthetic, rates, cfg.experiment.seed, params)?;
            Ok((label.to_string(), t))
        })
        .collect()
}
