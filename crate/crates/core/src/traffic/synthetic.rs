use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flits_for_packet, PacketKind, PacketSizes, TrafficError, TrafficEvent};
use crate::topology::{MeshConfig, NodeId};

// Keeps the designated-pair stream independent of the injection stream.
const PAIR_STREAM: u64 = 0x5eed_0f_9a1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    UniformRandom,
    Permutation,
    Hotspot,
    RegularMix,
}

/// Parameters of a synthetic traffic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub pattern: Pattern,
    /// Offered load in flits per NI per cycle, counted at `reference_width_bits`.
    pub injection_rate: f64,
    /// Probability that a packet is a control packet.
    pub control_fraction: f64,
    /// `RegularMix` only: probability that a packet uses a designated pair.
    pub regularity: f64,
    /// `RegularMix` only: size of the designated pair set.
    pub designated_pairs: usize,
    /// `Hotspot` only: probability that a packet targets the hotspot NI.
    pub hotspot_fraction: f64,
    pub sizes: PacketSizes,
    pub reference_width_bits: u32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pattern: Pattern::UniformRandom,
            injection_rate: 0.05,
            control_fraction: 0.5,
            regularity: 0.8,
            designated_pairs: 8,
            hotspot_fraction: 0.2,
            sizes: PacketSizes::default(),
            reference_width_bits: super::FULL_LINK_WIDTH_BITS,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(0.0..=1.0).contains(&self.injection_rate) {
            return Err(TrafficError::InvalidRate(self.injection_rate));
        }
        for (name, value) in [
            ("control_fraction", self.control_fraction),
            ("regularity", self.regularity),
            ("hotspot_fraction", self.hotspot_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(TrafficError::InvalidFraction { name, value });
            }
        }
        if self.reference_width_bits == 0 {
            return Err(TrafficError::ZeroWidth);
        }
        Ok(())
    }

    /// Expected flits per packet at the reference width.
    pub fn mean_flits_per_packet(&self) -> Result<f64, TrafficError> {
        let c = flits_for_packet(self.sizes.class(PacketKind::Control), self.reference_width_bits)?;
        let d = flits_for_packet(self.sizes.class(PacketKind::Data), self.reference_width_bits)?;
        Ok(self.control_fraction * c as f64 + (1.0 - self.control_fraction) * d as f64)
    }
}

/// The seed-chosen hot pairs used by `Pattern::RegularMix`.
pub fn designated_pairs(mesh: &MeshConfig, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let n = mesh.ni_count();
    if n < 2 {
        return Vec::new();
    }
    let space = n * (n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PAIR_STREAM);
    rand::seq::index::sample(&mut rng, space, count.min(space))
        .into_iter()
        .map(|i| {
            let src = i / (n - 1);
            let mut dst = i % (n - 1);
            if dst >= src {
                dst += 1;
            }
            (NodeId(src as u32), NodeId(dst as u32))
        })
        .collect()
}

fn uniform_other(rng: &mut ChaCha8Rng, n: usize, src: usize) -> usize {
    let d = rng.gen_range(0..n - 1);
    if d >= src {
        d + 1
    } else {
        d
    }
}

fn derangement(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Bernoulli packet injection at every NI on every cycle, with destinations
/// drawn from `spec.pattern`. Events are ordered by `(cycle, source NI)`.
pub fn generate(
    spec: &SyntheticSpec,
    mesh: &MeshConfig,
    seed: u64,
    cycles: u64,
) -> Result<Vec<TrafficEvent>, TrafficError> {
    spec.validate()?;
    if cycles == 0 {
        return Err(TrafficError::NoCycles);
    }
    let n = mesh.ni_count();
    if spec.injection_rate == 0.0 {
        return Ok(Vec::new());
    }
    if n < 2 {
        return Err(TrafficError::TooFewNodes);
    }
    let p_packet = (spec.injection_rate / spec.mean_flits_per_packet()?).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let permutation = match spec.pattern {
        Pattern::Permutation => derangement(&mut rng, n),
        _ => Vec::new(),
    };
    let hotspot = rng.gen_range(0..n);
    let pairs = match spec.pattern {
        Pattern::RegularMix => designated_pairs(mesh, spec.designated_pairs, seed),
        _ => Vec::new(),
    };

    let mut events = Vec::new();
    for cycle in 0..cycles {
        for src in 0..n {
            if !rng.gen_bool(p_packet) {
                continue;
            }
            let (s, d) = match spec.pattern {
                Pattern::UniformRandom => (src, uniform_other(&mut rng, n, src)),
                Pattern::Permutation => (src, permutation[src]),
                Pattern::Hotspot => {
                    if src != hotspot && rng.gen_bool(spec.hotspot_fraction) {
                        (src, hotspot)
                    } else {
                        (src, uniform_other(&mut rng, n, src))
                    }
                }
                Pattern::RegularMix => {
                    if !pairs.is_empty() && rng.gen_bool(spec.regularity) {
                        let (a, b) = pairs[rng.gen_range(0..pairs.len())];
                        (a.index(), b.index())
                    } else {
                        (src, uniform_other(&mut rng, n, src))
                    }
                }
            };
            let kind = if rng.gen_bool(spec.control_fraction) {
                PacketKind::Control
            } else {
                PacketKind::Data
            };
            events.push(TrafficEvent {
                inject_cycle: cycle,
                src: NodeId(s as u32),
                dst: NodeId(d as u32),
                class: spec.sizes.class(kind),
                packet_id: events.len() as u64,
            });
        }
    }
    Ok(events)
}

/// Appends `tail` to `base`, delaying it by `offset` cycles and renumbering
/// packet ids so they stay unique.
pub fn append_shifted(base: &mut Vec<TrafficEvent>, tail: &[TrafficEvent], offset: u64) {
    let next_id = base.iter().map(|e| e.packet_id + 1).max().unwrap_or(0);
    base.extend(tail.iter().enumerate().map(|(i, e)| TrafficEvent {
        inject_cycle: e.inject_cycle + offset,
        packet_id: next_id + i as u64,
        ..*e
    }));
    base.sort_by_key(|e| e.inject_cycle);
}
