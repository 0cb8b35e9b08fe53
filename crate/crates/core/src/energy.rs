//! Event-based energy accounting.
//!
//! Dynamic energy is event count times a per-event coefficient; static energy
//! is charged per powered buffer and per router for every simulated cycle.
//! Buffer, crossbar and static buffer coefficients describe a full-width
//! (undivided) datapath and scale with the width of the subnet that incurred
//! them; allocation is control logic and does not scale; link energy is per
//! wire. Units are arbitrary, only ratios between runs are meaningful.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{SimStats, SubnetLayout};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("no flits were delivered, energy per flit is undefined")]
    NoFlits,
    #[error("the baseline energy per flit is zero")]
    ZeroBaseline,
    #[error("coefficient {name} = {value} must be finite and non-negative")]
    InvalidCoefficient { name: String, value: f64 },
    #[error("coefficients line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyCoefficients {
    pub e_buffer_write: f64,
    pub e_buffer_read: f64,
    pub e_vc_alloc: f64,
    pub e_sw_alloc: f64,
    pub e_crossbar: f64,
    pub e_link_per_bit: f64,
    /// Per VC buffer per cycle.
    pub p_buffer_static: f64,
    /// Per router per cycle, everything except buffers.
    pub p_router_other: f64,
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        Self {
            e_buffer_write: 1.0,
            e_buffer_read: 1.0,
            e_vc_alloc: 0.5,
            e_sw_alloc: 0.5,
            e_crossbar: 1.0,
            e_link_per_bit: 0.01,
            p_buffer_static: 0.1,
            p_router_other: 0.5,
        }
    }
}

impl EnergyCoefficients {
    pub fn zero() -> Self {
        Self {
            e_buffer_write: 0.0,
            e_buffer_read: 0.0,
            e_vc_alloc: 0.0,
            e_sw_alloc: 0.0,
            e_crossbar: 0.0,
            e_link_per_bit: 0.0,
            p_buffer_static: 0.0,
            p_router_other: 0.0,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("e_buffer_write", self.e_buffer_write),
            ("e_buffer_read", self.e_buffer_read),
            ("e_vc_alloc", self.e_vc_alloc),
            ("e_sw_alloc", self.e_sw_alloc),
            ("e_crossbar", self.e_crossbar),
            ("e_link_per_bit", self.e_link_per_bit),
            ("p_buffer_static", self.p_buffer_static),
            ("p_router_other", self.p_router_other),
        ]
    }

    fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "e_buffer_write" => &mut self.e_buffer_write,
            "e_buffer_read" => &mut self.e_buffer_read,
            "e_vc_alloc" => &mut self.e_vc_alloc,
            "e_sw_alloc" => &mut self.e_sw_alloc,
            "e_crossbar" => &mut self.e_crossbar,
            "e_link_per_bit" => &mut self.e_link_per_bit,
            "p_buffer_static" => &mut self.p_buffer_static,
            "p_router_other" => &mut self.p_router_other,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, value) in self.fields() {
            if !value.is_finite() || value < 0.0 {
                return Err(EnergyError::InvalidCoefficient {
                    name: name.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, EnergyError> {
        let mut c = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let parse = |message: String| EnergyError::Parse { line: i + 1, message };
            let line = line.map_err(|e| parse(e.to_string()))?;
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| parse("expected key = value".into()))?;
            let slot = c
                .field_mut(key.trim())
                .ok_or_else(|| parse(format!("unknown coefficient `{}`", key.trim())))?;
            *slot = value
                .trim()
                .parse()
                .map_err(|_| parse(format!("`{}` is not a number", value.trim())))?;
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for EnergyCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in self.fields() {
            writeln!(f, "{name} = {value}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub buffer_dynamic: f64,
    pub allocation: f64,
    pub crossbar: f64,
    pub link: f64,
    pub static_energy: f64,
    /// Static energy the gated buffers would have drawn. Not part of the total.
    pub gated_savings: f64,
}

impl EnergyBreakdown {
    pub fn dynamic(&self) -> f64 {
        self.buffer_dynamic + self.allocation + self.crossbar + self.link
    }

    pub fn total(&self) -> f64 {
        self.dynamic() + self.static_energy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total_energy: f64,
    /// Total over delivered flits counted at full link width.
    pub energy_per_flit: f64,
    pub full_width_flits: f64,
    pub breakdown: EnergyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_to_baseline: Option<f64>,
}

impl EnergyReport {
    /// Fills in `normalized_to_baseline`.
    pub fn against(mut self, baseline: &EnergyReport) -> Result<Self, EnergyError> {
        self.normalized_to_baseline = Some(normalize(&self, baseline)?);
        Ok(self)
    }
}

/// Energy breakdown of a run without the per-flit figure, so it is defined
/// for runs that delivered nothing.
pub fn breakdown(stats: &SimStats, layout: &SubnetLayout, routers: usize, c: &EnergyCoefficients) -> EnergyBreakdown {
    let full = layout.total_width_bits as f64;
    let mut b = EnergyBreakdown::default();
    for s in &stats.subnets {
        let f = s.width_bits as f64 / full;
        b.buffer_dynamic += f
            * (c.e_buffer_write * (s.buffer_writes + s.endpoint_buffer_writes) as f64
                + c.e_buffer_read * (s.buffer_reads + s.endpoint_buffer_reads) as f64);
        b.allocation += c.e_vc_alloc * s.vc_allocations as f64 + c.e_sw_alloc * s.sw_allocations as f64;
        b.crossbar += f * c.e_crossbar * s.crossbar_traversals as f64;
        b.link += c.e_link_per_bit * s.width_bits as f64 * s.link_traversals as f64;
        b.static_energy += f * c.p_buffer_static * s.buffer_cycles as f64;
        b.gated_savings += f * c.p_buffer_static * s.gated_buffer_cycles as f64;
    }
    b.static_energy += c.p_router_other * stats.cycles_simulated as f64 * routers as f64;
    b
}

pub fn account(
    stats: &SimStats,
    layout: &SubnetLayout,
    routers: usize,
    coeffs: &EnergyCoefficients,
) -> Result<EnergyReport, EnergyError> {
    coeffs.validate()?;
    let flits = stats.full_width_flits(layout.total_width_bits);
    if stats.flits_ejected == 0 || flits <= 0.0 {
        return Err(EnergyError::NoFlits);
    }
    let b = breakdown(stats, layout, routers, coeffs);
    let total = b.total();
    Ok(EnergyReport {
        total_energy: total,
        energy_per_flit: total / flits,
        full_width_flits: flits,
        breakdown: b,
        normalized_to_baseline: None,
    })
}

/// Energy per flit of `report` relative to `baseline`.
pub fn normalize(report: &EnergyReport, baseline: &EnergyReport) -> Result<f64, EnergyError> {
    if baseline.energy_per_flit <= 0.0 || baseline.full_width_flits <= 0.0 {
        return Err(EnergyError::ZeroBaseline);
    }
    Ok(report.energy_per_flit / baseline.energy_per_flit)
}
