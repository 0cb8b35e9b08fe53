use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::allocator::GaParams;
use crate::energy::EnergyCoefficients;
use crate::sim::{SimParams, SubnetLayout, VcConfig};
use crate::topology::{Granularity, MeshConfig};
use crate::traffic::{generate, ingest, SyntheticSpec, TrafficEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    BaselineVc,
    StaticHybrid,
    AdaptiveHybrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::BaselineVc => "baseline_vc",
            Mode::StaticHybrid => "static_hybrid",
            Mode::AdaptiveHybrid => "adaptive_hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    Greedy,
    Ga,
    Oracle,
    PlanFile,
}

impl AllocatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::Greedy => "greedy",
            AllocatorKind::Ga => "ga",
            AllocatorKind::Oracle => "oracle",
            AllocatorKind::PlanFile => "plan_file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshPreset {
    /// One NI per router.
    Uniform,
    /// See [`MeshConfig::cmp16_51ni`].
    Cmp16_51ni,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub width: u32,
    pub height: u32,
    /// Overrides `preset` when given.
    pub ni_per_router: Option<Vec<u32>>,
    pub preset: MeshPreset,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            ni_per_router: None,
            preset: MeshPreset::Uniform,
        }
    }
}

impl MeshSection {
    pub fn build(&self) -> Result<MeshConfig, ExperimentError> {
        let mesh = match (&self.ni_per_router, self.preset) {
            (Some(nis), _) => MeshConfig::new(self.width, self.height, nis.clone()),
            (None, MeshPreset::Uniform) => MeshConfig::uniform(self.width, self.height),
            (None, MeshPreset::Cmp16_51ni) => {
                if (self.width, self.height) != (4, 4) {
                    return Err(ExperimentError::Config("preset cmp16_51ni needs a 4x4 mesh".into()));
                }
                Ok(MeshConfig::cmp16_51ni())
            }
        };
        mesh.map_err(|e| ExperimentError::Config(format!("mesh: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficSource {
    Synthetic,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub source: TrafficSource,
    pub trace_path: Option<PathBuf>,
    /// Cycles of synthetic traffic.
    pub cycles: u64,
    /// Generator parameters; its packet sizes also apply to traces.
    pub synthetic: SyntheticSpec,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            source: TrafficSource::Synthetic,
            trace_path: None,
            cycles: 100_000,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub allocator: AllocatorKind,
    pub granularity: Granularity,
    pub plan_path: Option<PathBuf>,
    pub epoch_cycles: u64,
    /// Defaults to `epoch_cycles / 200`.
    pub config_period_cycles: Option<u64>,
    /// Time the allocator is allowed at run time. Only annotated: allocation
    /// itself is not timed.
    pub allocation_budget_cycles: Option<u64>,
    pub seed: u64,
    pub gating: bool,
    pub warmup_cycles: u64,
    pub drain_cap_cycles: u64,
    /// Also run the full-width VC baseline on the same traffic and report
    /// normalized figures.
    pub compare_baseline: bool,
    /// Key=value coefficients file; replaces the `[energy]` table.
    pub energy_coefficients_file: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            mode: Mode::StaticHybrid,
            allocator: AllocatorKind::Greedy,
            granularity: Granularity::EndToEnd,
            plan_path: None,
            epoch_cycles: 100_000,
            config_period_cycles: None,
            allocation_budget_cycles: None,
            seed: 1,
            gating: true,
            warmup_cycles: 0,
            drain_cap_cycles: 1_000_000,
            compare_baseline: true,
            energy_coefficients_file: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub flit_dump: Option<PathBuf>,
}

/// One experiment, as read from a TOML file. Every table is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mesh: MeshSection,
    pub layout: SubnetLayout,
    pub vc: VcConfig,
    pub traffic: TrafficSection,
    pub experiment: ExperimentSection,
    pub ga: GaParams,
    pub energy: EnergyCoefficients,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            mesh: MeshSection::default(),
            layout: SubnetLayout::default(),
            vc: VcConfig::default(),
            traffic: TrafficSection::default(),
            experiment: ExperimentSection::default(),
            ga: GaParams::default(),
            energy: EnergyCoefficients::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        };
        fix(&mut self.traffic.trace_path);
        fix(&mut self.experiment.plan_path);
        fix(&mut self.experiment.energy_coefficients_file);
        fix(&mut self.output.report);
        fix(&mut self.output.plan);
        fix(&mut self.output.profile);
        fix(&mut self.output.summary);
        fix(&mut self.output.flit_dump);
    }

    pub fn config_period(&self) -> u64 {
        self.experiment
            .config_period_cycles
            .unwrap_or(self.experiment.epoch_cycles / 200)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        self.mesh.build()?;
        self.layout.validate().or_else(|e| bad(e.to_string()))?;
        self.vc.validate().or_else(|e| bad(e.to_string()))?;
        self.ga.validate().or_else(|e| bad(e.to_string()))?;
        self.energy.validate().or_else(|e| bad(e.to_string()))?;
        self.traffic.synthetic.validate().or_else(|e| bad(e.to_string()))?;
        let ex = &self.experiment;
        if ex.mode != Mode::BaselineVc && self.layout.cs_subnets() == 0 {
            return bad(format!("{} needs layout.subnet_count >= 2", ex.mode.as_str()));
        }
        if ex.allocator == AllocatorKind::PlanFile && ex.plan_path.is_none() {
            return bad("allocator = plan_file needs experiment.plan_path".into());
        }
        if self.traffic.source == TrafficSource::Trace && self.traffic.trace_path.is_none() {
            return bad("traffic.source = trace needs traffic.trace_path".into());
        }
        if self.traffic.source == TrafficSource::Synthetic && self.traffic.cycles == 0 {
            return bad("traffic.cycles must be positive".into());
        }
        if ex.mode == Mode::AdaptiveHybrid && ex.epoch_cycles == 0 {
            return bad("experiment.epoch_cycles must be positive".into());
        }
        if ex.mode == Mode::AdaptiveHybrid && self.config_period() >= ex.epoch_cycles {
            return bad(format!(
                "config_period_cycles ({}) must be shorter than epoch_cycles ({})",
                self.config_period(),
                ex.epoch_cycles
            ));
        }
        Ok(())
    }

    /// Coefficients from the file named in the config, or the `[energy]` table.
    pub fn coefficients(&self) -> Result<EnergyCoefficients, ExperimentError> {
        match &self.experiment.energy_coefficients_file {
            Some(path) => {
                let f = File::open(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
                EnergyCoefficients::read_from(BufReader::new(f))
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(self.energy),
        }
    }

    /// The traffic the experiment runs, plus ingestion warnings.
    pub fn load_traffic(&self, mesh: &MeshConfig) -> Result<(Vec<TrafficEvent>, Vec<String>), ExperimentError> {
        match self.traffic.source {
            TrafficSource::Synthetic => {
                let events = generate(&self.traffic.synthetic, mesh, self.experiment.seed, self.traffic.cycles)
                    .map_err(|e| ExperimentError::Config(format!("traffic: {e}")))?;
                Ok((events, Vec::new()))
            }
            TrafficSource::Trace => {
                let path = self.traffic.trace_path.as_ref().expect("validated");
                let f = File::open(path).map_err(|e| ExperimentError::input(path, e))?;
                let got = ingest(BufReader::new(f), mesh, self.traffic.synthetic.sizes)
                    .map_err(|e| ExperimentError::input(path, e))?;
                Ok((got.events, got.warnings))
            }
        }
    }

    pub(crate) fn sim_params(&self) -> SimParams {
        SimParams {
            seed: self.experiment.seed,
            drain_cap_cycles: self.experiment.drain_cap_cycles,
            gating: self.experiment.gating,
            warmup_cycles: self.experiment.warmup_cycles,
            record_flits: self.output.flit_dump.is_some(),
            ..SimParams::default()
        }
    }
}
