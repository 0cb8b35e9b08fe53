use std::fs::File;
use std::io::BufReader;

use log::warn;

use super::{AllocatorKind, ExperimentConfig, ExperimentError, Mode};
use crate::allocator::{enumerate_oracle, ga_allocate, greedy_allocate, CircuitPlan, ORACLE_PAIR_LIMIT};
use crate::energy::{account, EnergyCoefficients, EnergyReport};
use crate::sim::{run, Delivery, FlitRecord, SimParams, SimStats, Simulator, SubnetLayout};
use crate::topology::MeshConfig;
use crate::traffic::{profile, TrafficEvent, TrafficProfile};

/// A validated config together with its mesh, traffic and coefficients.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub mesh: MeshConfig,
    pub trace: Vec<TrafficEvent>,
    pub coeffs: EnergyCoefficients,
    /// Warnings collected while preparing and running.
    pub notes: Vec<String>,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let mesh = cfg.mesh.build()?;
        let (trace, notes) = cfg.load_traffic(&mesh)?;
        Ok(Self {
            coeffs: cfg.coefficients()?,
            cfg: cfg.clone(),
            mesh,
            trace,
            notes,
        })
    }

    /// Uses `trace` instead of the configured traffic source.
    pub fn with_trace(cfg: &ExperimentConfig, trace: Vec<TrafficEvent>) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        Ok(Self {
            coeffs: cfg.coefficients()?,
            mesh: cfg.mesh.build()?,
            cfg: cfg.clone(),
            trace,
            notes: Vec::new(),
        })
    }

    fn note(&mut self, text: String) {
        warn!("{text}");
        self.notes.push(text);
    }

    fn energy(&self, stats: &SimStats, layout: &SubnetLayout) -> Option<EnergyReport> {
        account(stats, layout, self.mesh.router_count(), &self.coeffs).ok()
    }

    fn profile_of(&self, events: &[TrafficEvent]) -> Result<TrafficProfile, ExperimentError> {
        profile(
            events,
            &self.mesh,
            self.cfg.experiment.granularity,
            self.cfg.layout.total_width_bits,
        )
        .map_err(|e| ExperimentError::Input {
            context: "profile".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub layout: SubnetLayout,
    pub plan: CircuitPlan,
    pub stats: SimStats,
    pub energy: Option<EnergyReport>,
    pub flit_records: Vec<FlitRecord>,
}

fn finish(p: &Prepared, sim: &Simulator, layout: SubnetLayout, plan: CircuitPlan) -> RunResult {
    let stats = sim.stats();
    RunResult {
        energy: p.energy(&stats, &layout),
        layout,
        plan,
        stats,
        flit_records: sim.flit_records().to_vec(),
    }
}

fn delivered_events(deliveries: &[Delivery]) -> Vec<TrafficEvent> {
    deliveries.iter().map(|d| d.event).collect()
}

/// Full-width pure VC network, whatever the configured subnet count.
pub fn run_baseline(p: &Prepared) -> Result<RunResult, ExperimentError> {
    Ok(baseline_with_deliveries(p)?.0)
}

fn baseline_with_deliveries(p: &Prepared) -> Result<(RunResult, Vec<Delivery>), ExperimentError> {
    let layout = SubnetLayout::new(p.cfg.layout.total_width_bits, 1)?;
    let plan = CircuitPlan::empty(p.cfg.experiment.granularity, 0);
    let params = SimParams {
        log_deliveries: true,
        ..p.cfg.sim_params()
    };
    let mut sim = run(&p.mesh, layout, p.cfg.vc, &p.trace, &plan, &params)?;
    let deliveries = sim.take_deliveries();
    Ok((finish(p, &sim, layout, plan), deliveries))
}

/// Plan for `k` CS subnets from `profile` with the configured allocator.
pub fn allocate(p: &mut Prepared, profile: &TrafficProfile, k: usize) -> Result<CircuitPlan, ExperimentError> {
    let ex = &p.cfg.experiment;
    let plan = match ex.allocator {
        AllocatorKind::Greedy => greedy_allocate(profile, &p.mesh, k)?,
        AllocatorKind::Ga => ga_allocate(profile, &p.mesh, k, &p.cfg.ga)?,
        AllocatorKind::Oracle => {
            let top = profile.top_pairs(ORACLE_PAIR_LIMIT);
            if top.len() < profile.len() {
                p.note(format!(
                    "oracle searched the {} heaviest of {} profiled pairs",
                    top.len(),
                    profile.len()
                ));
            }
            enumerate_oracle(&top, &p.mesh, k, ORACLE_PAIR_LIMIT)?
        }
        AllocatorKind::PlanFile => {
            let path = ex.plan_path.as_ref().expect("validated");
            let f = File::open(path).map_err(|e| ExperimentError::input(path, e))?;
            let plan = CircuitPlan::read_from(BufReader::new(f)).map_err(|e| ExperimentError::input(path, e))?;
            if plan.granularity != ex.granularity {
                return Err(ExperimentError::input(
                    path,
                    format!("plan is {} but the experiment is {}", plan.granularity, ex.granularity),
                ));
            }
            plan.validate(&p.mesh).map_err(|e| ExperimentError::input(path, e))?;
            plan
        }
    };
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct StaticOutcome {
    /// Pass 1: full-width pure VC.
    pub profile_run: RunResult,
    pub profile: TrafficProfile,
    /// Pass 2: the hybrid network with the allocated plan.
    pub production: RunResult,
}

/// Profiles the traffic on the VC baseline, allocates once, and re-runs the
/// same traffic on the hybrid network.
pub fn run_static(p: &mut Prepared) -> Result<StaticOutcome, ExperimentError> {
    if p.cfg.experiment.allocator == AllocatorKind::Ga && p.cfg.experiment.allocation_budget_cycles.is_some() {
        p.note("static allocation runs offline, allocation_budget_cycles is not enforced for ga".into());
    }
    let (profile_run, deliveries) = baseline_with_deliveries(p)?;
    let profile = p.profile_of(&delivered_events(&deliveries))?;
    let layout = p.cfg.layout;
    let plan = allocate(p, &profile, layout.cs_subnets())?;
    let sim = run(&p.mesh, layout, p.cfg.vc, &p.trace, &plan, &p.cfg.sim_params())?;
    Ok(StaticOutcome {
        production: finish(p, &sim, layout, plan),
        profile_run,
        profile,
    })
}

#[derive(Debug, Clone)]
pub struct EpochResult {
    pub index: usize,
    pub start_cycle: u64,
    /// Plan computed from the previous epoch; empty for epoch 0.
    pub plan: CircuitPlan,
    pub plan_active_from: u64,
    /// Counters accumulated during the epoch.
    pub stats: SimStats,
    pub energy: Option<EnergyReport>,
    /// Every packet delivered during the epoch, both route classes.
    pub profile: TrafficProfile,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub epochs: Vec<EpochResult>,
    pub total: RunResult,
}

/// Epoch loop: epoch `i` runs the plan allocated from the packets delivered
/// in epoch `i - 1`, switched in `config_period` cycles into the epoch.
/// The last epoch also drains the network.
pub fn run_adaptive(p: &mut Prepared) -> Result<AdaptiveOutcome, ExperimentError> {
    let epoch = p.cfg.experiment.epoch_cycles;
    let period = p.cfg.config_period();
    let horizon = p.trace.last().map_or(0, |e| e.inject_cycle + 1);
    if horizon < epoch {
        p.note(format!(
            "traffic spans {horizon} cycles, less than one epoch of {epoch}: ran a single static epoch instead"
        ));
        let s = run_static(p)?;
        let r = &s.production;
        return Ok(AdaptiveOutcome {
            epochs: vec![EpochResult {
                index: 0,
                start_cycle: 0,
                plan: r.plan.clone(),
                plan_active_from: 0,
                stats: r.stats.clone(),
                energy: r.energy.clone(),
                profile: s.profile,
            }],
            total: s.production,
        });
    }
    if p.cfg.experiment.allocator == AllocatorKind::Ga {
        p.note("ga allocation in adaptive mode is for comparison only, its run time exceeds any configuration period".into());
    }
    let layout = p.cfg.layout;
    let k = layout.cs_subnets();
    let params = SimParams {
        log_deliveries: true,
        ..p.cfg.sim_params()
    };
    let mut plan = CircuitPlan::empty(p.cfg.experiment.granularity, k);
    let mut sim = Simulator::new(&p.mesh, layout, p.cfg.vc, &plan, params.clone())?;
    sim.add_traffic(&p.trace)?;

    let count = horizon.div_ceil(epoch) as usize;
    let mut epochs = Vec::with_capacity(count);
    let mut before = sim.stats();
    let mut active_from = 0;
    for i in 0..count {
        let end = (i as u64 + 1) * epoch;
        if i + 1 == count {
            sim.run_until_drained(sim.last_injection() + params.drain_cap_cycles);
        } else {
            sim.run_until(end);
        }
        let after = sim.stats();
        let stats = &after - &before;
        let profile = p.profile_of(&delivered_events(&sim.take_deliveries()))?;
        let next = if i + 1 < count {
            let next = allocate(p, &profile, k)?;
            sim.schedule_plan(&next, end + period)?;
            Some(next)
        } else {
            None
        };
        epochs.push(EpochResult {
            index: i,
            start_cycle: i as u64 * epoch,
            plan: plan.clone(),
            plan_active_from: active_from,
            energy: p.energy(&stats, &layout),
            stats,
            profile,
        });
        if let Some(next) = next {
            plan = next;
            active_from = end + period;
        }
        before = after;
    }
    Ok(AdaptiveOutcome {
        total: finish(p, &sim, layout, plan),
        epochs,
    })
}

/// Mode-independent entry point used by [`super::run_experiment`].
pub(crate) fn run_mode(p: &mut Prepared) -> Result<ModeOutcome, ExperimentError> {
    Ok(match p.cfg.experiment.mode {
        Mode::BaselineVc => ModeOutcome::Baseline(run_baseline(p)?),
        Mode::StaticHybrid => ModeOutcome::Static(Box::new(run_static(p)?)),
        Mode::AdaptiveHybrid => ModeOutcome::Adaptive(run_adaptive(p)?),
    })
}

pub(crate) enum ModeOutcome {
    Baseline(RunResult),
    Static(Box<StaticOutcome>),
    Adaptive(AdaptiveOutcome),
}
