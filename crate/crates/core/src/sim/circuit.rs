//! Bufferless circuit-switched subnets.
//!
//! A configured circuit is a fixed pipeline: each flit leaves the destination
//! router a constant number of cycles after entering the source router, so a
//! circuit only needs a queue of waiting packets and the flits still in the
//! pipe. One packet streams at a time, one flit per cycle. Router-to-router
//! circuits meeting at one router share its NIs' injection and ejection
//! ports, one flit per NI per cycle on each.

use std::collections::{BTreeMap, VecDeque};

use super::stats::SimStats;
use super::Ejection;

#[derive(Debug, Clone, Copy)]
pub(crate) struct CsPacket {
    pub pkt: u32,
    pub id: u64,
    pub created: u64,
    pub src: u32,
    pub dst: u32,
    pub flits: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct CircuitSpec {
    pub hops: u32,
    /// Cycles from entering the first router to leaving the last one.
    pub latency: u64,
    /// Router-to-router circuits buffer and arbitrate at both end routers.
    pub endpoint_buffered: bool,
    /// One queue per NI that may feed the circuit.
    pub sources: u32,
}

#[derive(Debug)]
struct Live {
    spec: CircuitSpec,
    queues: Vec<VecDeque<CsPacket>>,
    rr: usize,
    streaming: Option<(CsPacket, u32)>,
    pipe: VecDeque<(u32, Ejection)>,
    enabled_at: u64,
    sent_at: Option<u64>,
}

impl Live {
    fn new(spec: CircuitSpec, enabled_at: u64) -> Self {
        Self {
            queues: (0..spec.sources).map(|_| VecDeque::new()).collect(),
            spec,
            rr: 0,
            streaming: None,
            pipe: VecDeque::new(),
            enabled_at,
            sent_at: None,
        }
    }

    fn drained(&self) -> bool {
        self.streaming.is_none() && self.pipe.is_empty()
    }

    fn idle(&self) -> bool {
        self.drained() && self.queues.iter().all(VecDeque::is_empty)
    }

    fn eject(&mut self, now: u64, out: &mut Vec<(u32, Ejection)>) {
        while self.pipe.front().is_some_and(|(_, e)| e.at <= now) {
            out.push(self.pipe.pop_front().expect("checked"));
        }
    }

    /// Picks the next packet, skipping sources already sending this cycle.
    fn start(&mut self, now: u64, sending: &[u32]) {
        if self.streaming.is_some() || now < self.enabled_at || self.sent_at == Some(now) {
            return;
        }
        let n = self.queues.len();
        let ready = |q: &VecDeque<CsPacket>| q.front().is_some_and(|p| !sending.contains(&p.src));
        if let Some(q) = (0..n).map(|k| (self.rr + k) % n).find(|&q| ready(&self.queues[q])) {
            let p = self.queues[q].pop_front().expect("non-empty");
            self.streaming = Some((p, 0));
            self.rr = (q + 1) % n;
        }
    }

    fn send(&mut self, now: u64, stats_index: usize, stats: &mut SimStats, sending: &mut Vec<u32>) {
        let Some((p, idx)) = self.streaming else { return };
        self.sent_at = Some(now);
        sending.push(p.src);
        self.pipe.push_back((
            p.dst,
            Ejection {
                pkt: p.pkt,
                flit: idx,
                entry: now,
                at: now + self.spec.latency,
            },
        ));
        self.streaming = (idx + 1 < p.flits).then_some((p, idx + 1));

        let h = self.spec.hops as u64;
        stats.flits_injected += 1;
        stats.in_circuit_flits += 1;
        let c = &mut stats.subnets[stats_index];
        c.flits_injected += 1;
        c.crossbar_traversals += h + 1;
        c.link_traversals += h;
        if self.spec.endpoint_buffered {
            c.endpoint_buffer_writes += 2;
            c.endpoint_buffer_reads += 2;
            c.sw_allocations += 2;
        }
    }
}

#[derive(Debug)]
pub(crate) struct CsSubnet {
    stats_index: usize,
    circuits: Vec<Live>,
    /// Decommissioned circuits finishing the packet they were streaming.
    draining: Vec<Live>,
    /// Flits waiting for a shared ejection port, by destination NI.
    ejecting: BTreeMap<u32, VecDeque<Ejection>>,
    arrived: Vec<(u32, Ejection)>,
    /// NIs that have put a flit on this subnet in the current cycle.
    sending: Vec<u32>,
}

impl CsSubnet {
    pub fn new(stats_index: usize) -> Self {
        Self {
            stats_index,
            circuits: Vec::new(),
            draining: Vec::new(),
            ejecting: BTreeMap::new(),
            arrived: Vec::new(),
            sending: Vec::new(),
        }
    }

    /// Replaces the configured circuits. Packets still waiting on the old
    /// circuits are returned; the new circuits start once the old ones have
    /// emptied their pipes.
    pub fn install(&mut self, specs: Vec<CircuitSpec>, now: u64) -> Vec<CsPacket> {
        let mut orphans = Vec::new();
        for mut old in self.circuits.drain(..) {
            for q in &mut old.queues {
                orphans.extend(q.drain(..));
            }
            if !old.drained() {
                self.draining.push(old);
            }
        }
        let start = if self.draining.is_empty() { now } else { u64::MAX };
        self.circuits = specs.into_iter().map(|s| Live::new(s, start)).collect();
        orphans
    }

    pub fn enqueue(&mut self, circuit: usize, source: usize, p: CsPacket) {
        self.circuits[circuit].queues[source].push_back(p);
    }

    pub fn step(&mut self, now: u64, stats: &mut SimStats, out: &mut Vec<Ejection>) {
        let mut arrived = std::mem::take(&mut self.arrived);
        for c in self.draining.iter_mut().chain(self.circuits.iter_mut()) {
            let shared = c.spec.endpoint_buffered;
            c.eject(now, &mut arrived);
            for (dst, e) in arrived.drain(..) {
                if shared {
                    self.ejecting.entry(dst).or_default().push_back(e);
                } else {
                    out.push(e);
                }
            }
        }
        // Packets already streaming keep their NI; new ones take what is left.
        let mut sending = std::mem::take(&mut self.sending);
        for c in self.draining.iter_mut().chain(self.circuits.iter_mut()) {
            if c.streaming.is_some() {
                c.send(now, self.stats_index, stats, &mut sending);
            }
        }
        for c in self.draining.iter_mut().chain(self.circuits.iter_mut()) {
            if c.streaming.is_none() {
                c.start(now, &sending);
                c.send(now, self.stats_index, stats, &mut sending);
            }
        }
        sending.clear();
        self.sending = sending;
        self.arrived = arrived;
        self.ejecting.retain(|_, q| {
            let mut e = q.pop_front().expect("non-empty");
            e.at = now;
            out.push(e);
            !q.is_empty()
        });
        if !self.draining.is_empty() {
            self.draining.retain(|c| !c.drained());
            if self.draining.is_empty() {
                for c in &mut self.circuits {
                    c.enabled_at = now + 1;
                }
            }
        }
    }

    pub fn is_idle(&self) -> bool {
        self.draining.is_empty() && self.ejecting.is_empty() && self.circuits.iter().all(Live::idle)
    }

    pub fn flits_in_network(&self) -> u64 {
        self.draining
            .iter()
            .chain(&self.circuits)
            .map(|c| c.pipe.len() as u64)
            .sum::<u64>()
            + self.ejecting.values().map(|q| q.len() as u64).sum::<u64>()
    }

    pub fn circuit_count(&self) -> usize {
        self.circuits.len()
    }
}
