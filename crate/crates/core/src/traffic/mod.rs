//! Packet traffic: synthetic generators, trace files and per-pair profiles.

mod profile;
mod synthetic;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{NodeId, TopologyError};

pub use profile::{profile, PairStats, TrafficProfile};
pub use synthetic::{append_shifted, designated_pairs, generate, Pattern, SyntheticSpec};
pub use trace::{ingest, write_trace, Ingested};

/// Full link width of the reference (undivided) network.
pub const FULL_LINK_WIDTH_BITS: u32 = 128;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("injection rate {0} is outside [0, 1] flits/node/cycle")]
    InvalidRate(f64),
    #[error("{name} = {value} is outside [0, 1]")]
    InvalidFraction { name: &'static str, value: f64 },
    #[error("cycle count must be at least 1")]
    NoCycles,
    #[error("channel width must be positive")]
    ZeroWidth,
    #[error("the mesh needs at least two network interfaces to carry traffic")]
    TooFewNodes,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: source and destination are both {node}")]
    SameEndpoints { line: usize, node: u32 },
    #[error("line {line}: {source}")]
    Topology {
        line: usize,
        #[source]
        source: TopologyError,
    },
    #[error(transparent)]
    Mesh(#[from] TopologyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    Control,
    Data,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Control => "control",
            PacketKind::Data => "data",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PacketKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "control" => Ok(PacketKind::Control),
            "data" => Ok(PacketKind::Data),
            other => Err(format!("unknown packet class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketClass {
    pub kind: PacketKind,
    pub payload_bits: u32,
}

/// Payload size of each packet kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacketSizes {
    pub control_bits: u32,
    pub data_bits: u32,
}

impl Default for PacketSizes {
    fn default() -> Self {
        Self {
            control_bits: 128,
            data_bits: 640,
        }
    }
}

impl PacketSizes {
    pub fn class(&self, kind: PacketKind) -> PacketClass {
        let payload_bits = match kind {
            PacketKind::Control => self.control_bits,
            PacketKind::Data => self.data_bits,
        };
        PacketClass { kind, payload_bits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficEvent {
    pub inject_cycle: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub class: PacketClass,
    pub packet_id: u64,
}

/// Number of flits a packet occupies on a channel `channel_width_bits` wide.
pub fn flits_for_packet(class: PacketClass, channel_width_bits: u32) -> Result<u32, TrafficError> {
    if channel_width_bits == 0 {
        return Err(TrafficError::ZeroWidth);
    }
    Ok(class.payload_bits.div_ceil(channel_width_bits).max(1))
}

/// Total flits of `events` when serialized at `channel_width_bits`.
pub fn total_flits(events: &[TrafficEvent], channel_width_bits: u32) -> Result<u64, TrafficError> {
    events.iter().try_fold(0u64, |acc, e| {
        Ok(acc + flits_for_packet(e.class, channel_width_bits)? as u64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flit_counts() {
        let sizes = PacketSizes::default();
        let data = sizes.class(PacketKind::Data);
        let control = sizes.class(PacketKind::Control);
        assert_eq!(flits_for_packet(data, 128).unwrap(), 5);
        assert_eq!(flits_for_packet(data, 64).unwrap(), 10);
        assert_eq!(flits_for_packet(data, 16).unwrap(), 40);
        assert_eq!(flits_for_packet(control, 16).unwrap(), 8);
        assert_eq!(flits_for_packet(control, 128).unwrap(), 1);
        assert!(matches!(
            flits_for_packet(control, 0),
            Err(TrafficError::ZeroWidth)
        ));
    }

    #[test]
    fn partial_flit_rounds_up() {
        let odd = PacketClass {
            kind: PacketKind::Data,
            payload_bits: 100,
        };
        assert_eq!(flits_for_packet(odd, 64).unwrap(), 2);
    }
}
