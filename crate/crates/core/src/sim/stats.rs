use std::collections::BTreeMap;
use std::ops::Sub;

use serde::{Deserialize, Serialize};

/// Which flow control a subnet runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubnetKind {
    Vc,
    Cs,
}

/// Event counters of one subnet.
///
/// Transit buffer events of CS subnets stay at zero. Router-to-router circuits
/// are buffered at their first and last routers; those accesses are kept apart
/// in the `endpoint_buffer_*` counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubnetCounters {
    pub index: usize,
    pub kind: SubnetKind,
    pub width_bits: u32,
    pub flits_injected: u64,
    pub flits_ejected: u64,
    pub buffer_writes: u64,
    pub buffer_reads: u64,
    pub endpoint_buffer_writes: u64,
    pub endpoint_buffer_reads: u64,
    pub vc_allocations: u64,
    pub sw_allocations: u64,
    pub crossbar_traversals: u64,
    pub link_traversals: u64,
    /// Powered VC buffers summed over cycles.
    pub buffer_cycles: u64,
    /// Power-gated VC buffers summed over cycles.
    pub gated_buffer_cycles: u64,
}

impl SubnetCounters {
    pub fn new(index: usize, kind: SubnetKind, width_bits: u32) -> Self {
        Self {
            index,
            kind,
            width_bits,
            flits_injected: 0,
            flits_ejected: 0,
            buffer_writes: 0,
            buffer_reads: 0,
            endpoint_buffer_writes: 0,
            endpoint_buffer_reads: 0,
            vc_allocations: 0,
            sw_allocations: 0,
            crossbar_traversals: 0,
            link_traversals: 0,
            buffer_cycles: 0,
            gated_buffer_cycles: 0,
        }
    }

    fn delta(&self, earlier: &Self) -> Self {
        Self {
            index: self.index,
            kind: self.kind,
            width_bits: self.width_bits,
            flits_injected: self.flits_injected - earlier.flits_injected,
            flits_ejected: self.flits_ejected - earlier.flits_ejected,
            buffer_writes: self.buffer_writes - earlier.buffer_writes,
            buffer_reads: self.buffer_reads - earlier.buffer_reads,
            endpoint_buffer_writes: self.endpoint_buffer_writes - earlier.endpoint_buffer_writes,
            endpoint_buffer_reads: self.endpoint_buffer_reads - earlier.endpoint_buffer_reads,
            vc_allocations: self.vc_allocations - earlier.vc_allocations,
            sw_allocations: self.sw_allocations - earlier.sw_allocations,
            crossbar_traversals: self.crossbar_traversals - earlier.crossbar_traversals,
            link_traversals: self.link_traversals - earlier.link_traversals,
            buffer_cycles: self.buffer_cycles - earlier.buffer_cycles,
            gated_buffer_cycles: self.gated_buffer_cycles - earlier.gated_buffer_cycles,
        }
    }
}

/// Latency distribution with an exact histogram.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "LatencySummary", into = "LatencySummary")]
pub struct LatencyStats {
    count: u64,
    sum: u64,
    hist: BTreeMap<u64, u64>,
    /// Figures read back from a report, where no histogram survives.
    restored: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LatencySummary {
    count: u64,
    sum: u64,
    mean: f64,
    p99: u64,
    max: u64,
}

impl From<LatencyStats> for LatencySummary {
    fn from(s: LatencyStats) -> Self {
        LatencySummary {
            count: s.count,
            sum: s.sum,
            mean: s.mean().unwrap_or(0.0),
            p99: s.percentile(0.99).unwrap_or(0),
            max: s.max().unwrap_or(0),
        }
    }
}

impl From<LatencySummary> for LatencyStats {
    fn from(s: LatencySummary) -> Self {
        LatencyStats {
            count: s.count,
            sum: s.sum,
            hist: BTreeMap::new(),
            restored: Some((s.p99, s.max)),
        }
    }
}

impl LatencyStats {
    pub fn record(&mut self, latency: u64) {
        self.count += 1;
        self.sum += latency;
        *self.hist.entry(latency).or_insert(0) += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }

    pub fn min(&self) -> Option<u64> {
        self.hist.keys().next().copied()
    }

    pub fn max(&self) -> Option<u64> {
        match self.restored {
            Some((_, max)) if self.hist.is_empty() && self.count > 0 => Some(max),
            _ => self.hist.keys().next_back().copied(),
        }
    }

    /// Smallest recorded latency with at least a `q` fraction of samples at or
    /// below it.
    pub fn percentile(&self, q: f64) -> Option<u64> {
        if self.count == 0 {
            return None;
        }
        if self.hist.is_empty() {
            return self.restored.map(|(p99, _)| p99);
        }
        let target = ((q * self.count as f64).ceil() as u64).clamp(1, self.count);
        let mut seen = 0;
        for (&lat, &n) in &self.hist {
            seen += n;
            if seen >= target {
                return Some(lat);
            }
        }
        self.max()
    }

    pub fn merge(&mut self, other: &LatencyStats) {
        self.count += other.count;
        self.sum += other.sum;
        for (&lat, &n) in &other.hist {
            *self.hist.entry(lat).or_insert(0) += n;
        }
    }

    fn delta(&self, earlier: &LatencyStats) -> LatencyStats {
        let mut hist = self.hist.clone();
        for (lat, n) in &earlier.hist {
            if let Some(v) = hist.get_mut(lat) {
                *v -= n;
                if *v == 0 {
                    hist.remove(lat);
                }
            }
        }
        LatencyStats {
            count: self.count - earlier.count,
            sum: self.sum - earlier.sum,
            hist,
            restored: None,
        }
    }
}

/// Latencies of one route class.
///
/// Flit latency runs from the cycle a flit enters its first router to the
/// cycle it leaves the destination router. Packet latency runs from packet
/// creation at the source NI to the ejection of its tail flit, so it also
/// includes source queueing and serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassLatency {
    pub flit: LatencyStats,
    pub packet: LatencyStats,
}

impl ClassLatency {
    fn delta(&self, earlier: &Self) -> Self {
        Self {
            flit: self.flit.delta(&earlier.flit),
            packet: self.packet.delta(&earlier.packet),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub cycles_simulated: u64,
    pub packets_created: u64,
    pub packets_ejected: u64,
    pub flits_injected: u64,
    pub flits_ejected: u64,
    /// Flits inside the network when the snapshot was taken.
    pub flits_in_flight: u64,
    /// Flits injected onto circuits.
    pub in_circuit_flits: u64,
    pub vc_latency: ClassLatency,
    pub cs_latency: ClassLatency,
    pub subnets: Vec<SubnetCounters>,
    /// Highest number of flits ever held by one VC buffer.
    pub max_vc_occupancy: u32,
    /// Flits that left the network ahead of an earlier flit of their packet.
    pub order_violations: u64,
    pub plan_switches: u64,
    /// VC packets moved onto a circuit by a plan activated while they waited.
    #[serde(default)]
    pub packets_reclassified: u64,
}

impl SimStats {
    pub fn new(subnets: Vec<SubnetCounters>) -> Self {
        Self {
            cycles_simulated: 0,
            packets_created: 0,
            packets_ejected: 0,
            flits_injected: 0,
            flits_ejected: 0,
            flits_in_flight: 0,
            in_circuit_flits: 0,
            vc_latency: ClassLatency::default(),
            cs_latency: ClassLatency::default(),
            subnets,
            max_vc_occupancy: 0,
            order_violations: 0,
            plan_switches: 0,
            packets_reclassified: 0,
        }
    }

    /// Fraction of injected flits that travelled on circuits.
    pub fn in_circuit_fraction(&self) -> f64 {
        if self.flits_injected == 0 {
            0.0
        } else {
            self.in_circuit_flits as f64 / self.flits_injected as f64
        }
    }

    /// Latency over both route classes.
    pub fn overall(&self) -> ClassLatency {
        let mut all = self.vc_latency.clone();
        all.flit.merge(&self.cs_latency.flit);
        all.packet.merge(&self.cs_latency.packet);
        all
    }

    /// Ejected flits expressed in flits of `full_width_bits`.
    pub fn full_width_flits(&self, full_width_bits: u32) -> f64 {
        self.subnets
            .iter()
            .map(|s| s.flits_ejected as f64 * s.width_bits as f64 / full_width_bits as f64)
            .sum()
    }

    pub fn buffer_events_on_cs_subnets(&self) -> u64 {
        self.subnets
            .iter()
            .filter(|s| s.kind == SubnetKind::Cs)
            .map(|s| s.buffer_reads + s.buffer_writes)
            .sum()
    }
}

impl Sub for &SimStats {
    type Output = SimStats;

    /// Counters accumulated between two snapshots of one simulation. The
    /// in-flight count and occupancy peak are those of the later snapshot.
    fn sub(self, earlier: &SimStats) -> SimStats {
        SimStats {
            cycles_simulated: self.cycles_simulated - earlier.cycles_simulated,
            packets_created: self.packets_created - earlier.packets_created,
            packets_ejected: self.packets_ejected - earlier.packets_ejected,
            flits_injected: self.flits_injected - earlier.flits_injected,
            flits_ejected: self.flits_ejected - earlier.flits_ejected,
            flits_in_flight: self.flits_in_flight,
            in_circuit_flits: self.in_circuit_flits - earlier.in_circuit_flits,
            vc_latency: self.vc_latency.delta(&earlier.vc_latency),
            cs_latency: self.cs_latency.delta(&earlier.cs_latency),
            subnets: self
                .subnets
                .iter()
                .zip(&earlier.subnets)
                .map(|(a, b)| a.delta(b))
                .collect(),
            max_vc_occupancy: self.max_vc_occupancy,
            order_violations: self.order_violations - earlier.order_violations,
            plan_switches: self.plan_switches - earlier.plan_switches,
            packets_reclassified: self.packets_reclassified - earlier.packets_reclassified,
        }
    }
}
