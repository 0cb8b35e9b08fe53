use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::allocator::{Circuit, CircuitPlan, Provenance};
use crate::energy::EnergyReport;
use crate::sim::{SimStats, SubnetLayout};
use crate::topology::Granularity;

/// A circuit plan in report form: `[cs_subnet, src, dst]` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub granularity: Granularity,
    pub provenance: Provenance,
    pub subnets: usize,
    pub circuits: Vec<[u32; 3]>,
}

impl From<&CircuitPlan> for PlanRecord {
    fn from(p: &CircuitPlan) -> Self {
        Self {
            granularity: p.granularity,
            provenance: p.provenance,
            subnets: p.subnets.len(),
            circuits: p.circuits().map(|(s, c)| [s as u32, c.src, c.dst]).collect(),
        }
    }
}

impl PlanRecord {
    pub fn to_plan(&self) -> CircuitPlan {
        let mut plan = CircuitPlan::empty(self.granularity, self.subnets);
        plan.provenance = self.provenance;
        for &[s, src, dst] in &self.circuits {
            if let Some(slot) = plan.subnets.get_mut(s as usize) {
                slot.push(Circuit { src, dst });
            }
        }
        plan
    }
}

/// The figures a comparison needs from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cycles: u64,
    pub packets_ejected: u64,
    pub flits_injected: u64,
    pub flits_ejected: u64,
    pub in_circuit_fraction: f64,
    pub mean_packet_latency: Option<f64>,
    pub mean_flit_latency: Option<f64>,
    pub energy_per_flit: Option<f64>,
}

impl RunSummary {
    pub fn new(stats: &SimStats, energy: Option<&EnergyReport>) -> Self {
        let all = stats.overall();
        Self {
            cycles: stats.cycles_simulated,
            packets_ejected: stats.packets_ejected,
            flits_injected: stats.flits_injected,
            flits_ejected: stats.flits_ejected,
            in_circuit_fraction: stats.in_circuit_fraction(),
            mean_packet_latency: all.packet.mean(),
            mean_flit_latency: all.flit.mean(),
            energy_per_flit: energy.map(|e| e.energy_per_flit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub index: usize,
    pub start_cycle: u64,
    pub plan_active_from: u64,
    pub summary: RunSummary,
    pub plan: PlanRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport>,
}

/// Everything one `run` produces, written as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocator: Option<String>,
    pub granularity: Granularity,
    pub layout: SubnetLayout,
    pub seed: u64,
    pub notes: Vec<String>,
    pub summary: RunSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_run: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport>,
    pub stats: SimStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epochs: Vec<EpochReport>,
}

impl RunReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Input {
            context: "run report".into(),
            message: e.to_string(),
        })
    }

    pub fn is_baseline(&self) -> bool {
        self.mode == super::Mode::BaselineVc.as_str()
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config: String,
    pub percent_in_circuit: f64,
    pub norm_latency: f64,
    pub norm_energy: f64,
}

fn ratio(value: Option<f64>, base: Option<f64>, what: &str) -> Result<f64, ExperimentError> {
    match (value, base) {
        (Some(v), Some(b)) if b > 0.0 => Ok(v / b),
        (None, _) => Ok(f64::NAN),
        _ => Err(ExperimentError::Input {
            context: "compare".into(),
            message: format!("baseline has no {what}"),
        }),
    }
}

/// Normalizes each run against `baseline`. Latency is mean packet latency,
/// energy is energy per flit.
pub fn compare(runs: &[(String, RunSummary)], baseline: &RunSummary) -> Result<Vec<SummaryRow>, ExperimentError> {
    runs.iter()
        .map(|(name, s)| {
            Ok(SummaryRow {
                config: name.clone(),
                percent_in_circuit: 100.0 * s.in_circuit_fraction,
                norm_latency: ratio(s.mean_packet_latency, baseline.mean_packet_latency, "delivered packets")?,
                norm_energy: ratio(s.energy_per_flit, baseline.energy_per_flit, "energy per flit")?,
            })
        })
        .collect()
}

/// Compares reports against the baseline among them, or the baseline
/// summaries they carry.
pub fn compare_reports(reports: &[RunReport]) -> Result<Vec<SummaryRow>, ExperimentError> {
    let shared = reports.iter().find(|r| r.is_baseline()).map(|r| r.summary.clone());
    let mut rows = Vec::new();
    for r in reports {
        let base = shared.as_ref().or(r.baseline.as_ref()).ok_or_else(|| ExperimentError::Input {
            context: "compare".into(),
            message: format!("no baseline_vc report given and `{}` carries no baseline", r.name),
        })?;
        rows.extend(compare(&[(r.name.clone(), r.summary.clone())], base)?);
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(w, "config,percent_in_circuit,norm_latency,norm_energy")?;
    for r in rows {
        writeln!(w, "{},{:.3},{:.4},{:.4}", r.config, r.percent_in_circuit, r.norm_latency, r.norm_energy)?;
    }
    Ok(())
}
