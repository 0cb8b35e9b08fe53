//! Latency versus offered load.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, simulate_circuit_only, SimError, SimParams, SimStats, SubnetLayout, VcConfig};
use crate::allocator::CircuitPlan;
use crate::topology::MeshConfig;
use crate::traffic::{generate, SyntheticSpec};

/// Network under test.
#[derive(Debug, Clone)]
pub enum Fabric {
    /// The hybrid (or, with one subnet, pure VC) network running `plan`.
    Network { layout: SubnetLayout, plan: CircuitPlan },
    /// Every packet on its own end-to-end circuit, see
    /// [`simulate_circuit_only`].
    CircuitOnly { width_bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    /// Cycles of generated traffic per point.
    pub cycles: u64,
    pub warmup_fraction: f64,
    /// Extra cycles allowed for the network to drain after the traffic ends.
    pub drain_cycles: u64,
    /// A point saturates once its mean latency exceeds this multiple of the
    /// unloaded latency.
    pub saturation_factor: f64,
    pub probe_packets: usize,
    pub probe_gap: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            cycles: 20_000,
            warmup_fraction: 0.1,
            drain_cycles: 20_000,
            saturation_factor: 10.0,
            probe_packets: 256,
            probe_gap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate: f64,
    /// Mean packet latency, creation to tail ejection, of delivered packets
    /// created after warm-up.
    pub mean_latency: f64,
    pub p99_latency: u64,
    pub mean_flit_latency: f64,
    /// Share of the measured packets delivered before the drain window closed.
    pub delivered_fraction: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub unloaded_latency: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    /// Lowest swept rate that saturates.
    pub fn saturation_rate(&self) -> Option<f64> {
        self.points.iter().find(|p| p.saturated).map(|p| p.rate)
    }
}

/// One CSV with a row per point of every `(label, table)`.
pub fn write_sweep_csv<W: Write>(mut w: W, tables: &[(String, SweepTable)]) -> std::io::Result<()> {
    writeln!(w, "fabric,rate,mean_latency,p99_latency,mean_flit_latency,delivered_fraction,saturated")?;
    for (label, t) in tables {
        for p in &t.points {
            writeln!(
                w,
                "{label},{},{:.3},{},{:.3},{:.4},{}",
                p.rate, p.mean_latency, p.p99_latency, p.mean_flit_latency, p.delivered_fraction, p.saturated
            )?;
        }
    }
    Ok(())
}

fn run_fabric(
    mesh: &MeshConfig,
    fabric: &Fabric,
    vc_cfg: VcConfig,
    trace: &[crate::traffic::TrafficEvent],
    params: &SimParams,
) -> Result<SimStats, SimError> {
    match fabric {
        Fabric::Network { layout, plan } => simulate(mesh, *layout, vc_cfg, trace, plan, params),
        Fabric::CircuitOnly { width_bits } => simulate_circuit_only(mesh, *width_bits, vc_cfg, trace, params),
    }
}

/// Mean packet latency of isolated packets drawn from `spec`'s pattern.
pub fn unloaded_latency(
    mesh: &MeshConfig,
    fabric: &Fabric,
    vc_cfg: VcConfig,
    spec: &SyntheticSpec,
    seed: u64,
    params: &SweepParams,
) -> Result<f64, SimError> {
    let probe_spec = SyntheticSpec {
        injection_rate: 0.05,
        ..spec.clone()
    };
    let mut cycles = 1000;
    let mut pool = generate(&probe_spec, mesh, seed, cycles)?;
    while pool.len() < params.probe_packets && cycles < 1 << 24 {
        cycles *= 4;
        pool = generate(&probe_spec, mesh, seed, cycles)?;
    }
    let probes: Vec<_> = pool
        .into_iter()
        .take(params.probe_packets)
        .enumerate()
        .map(|(i, mut e)| {
            e.inject_cycle = i as u64 * params.probe_gap;
            e
        })
        .collect();
    let stats = run_fabric(mesh, fabric, vc_cfg, &probes, &SimParams { seed, ..SimParams::default() })?;
    stats
        .overall()
        .packet
        .mean()
        .ok_or_else(|| SimError::Sweep("probe traffic delivered no packets".into()))
}

/// One run per rate, in parallel. Rates must be ascending.
pub fn sweep_injection(
    mesh: &MeshConfig,
    fabric: &Fabric,
    vc_cfg: VcConfig,
    spec: &SyntheticSpec,
    rates: &[f64],
    seed: u64,
    params: &SweepParams,
) -> Result<SweepTable, SimError> {
    if rates.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::Sweep("rates must be ascending".into()));
    }
    if !(0.0..1.0).contains(&params.warmup_fraction) || params.cycles == 0 {
        return Err(SimError::Sweep("need cycles > 0 and warmup_fraction in [0, 1)".into()));
    }
    let unloaded = unloaded_latency(mesh, fabric, vc_cfg, spec, seed, params)?;
    let warmup = (params.cycles as f64 * params.warmup_fraction) as u64;
    let points = rates
        .par_iter()
        .map(|&rate| {
            let point_spec = SyntheticSpec {
                injection_rate: rate,
                ..spec.clone()
            };
            let trace = generate(&point_spec, mesh, seed, params.cycles)?;
            let measured = trace.iter().filter(|e| e.inject_cycle >= warmup).count() as u64;
            let sim = SimParams {
                seed,
                cycles_limit: Some(params.cycles + params.drain_cycles),
                warmup_cycles: warmup,
                ..SimParams::default()
            };
            let stats = run_fabric(mesh, fabric, vc_cfg, &trace, &sim)?;
            let all = stats.overall();
            let mean = all.packet.mean().unwrap_or(f64::INFINITY);
            let delivered = if measured == 0 {
                1.0
            } else {
                all.packet.count() as f64 / measured as f64
            };
            Ok(SweepPoint {
                rate,
                mean_latency: mean,
                p99_latency: all.packet.percentile(0.99).unwrap_or(0),
                mean_flit_latency: all.flit.mean().unwrap_or(f64::INFINITY),
                delivered_fraction: delivered,
                saturated: mean > params.saturation_factor * unloaded || delivered < 1.0,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepTable {
        unloaded_latency: unloaded,
        points,
    })
}
