//! Cycle-driven flit-level model of the hybrid network.
//!
//! Subnet 0 is the buffered VC subnet; subnets `1..=k` are circuit-switched.
//! All subnets share one global clock but have independent datapaths. Each
//! packet is classified once, when it is created: if its endpoints match a
//! configured circuit it travels whole on that circuit, otherwise on the VC
//! subnet.

mod circuit;
mod reserved;
mod stats;
mod sweep;
mod vc;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{AllocError, Circuit, CircuitPlan};
use crate::topology::{endpoint_routers, xy_route, Direction, Granularity, MeshConfig, NodeId, TopologyError};
use crate::traffic::{flits_for_packet, PacketKind, TrafficError, TrafficEvent, FULL_LINK_WIDTH_BITS};

use circuit::{CircuitSpec, CsPacket, CsSubnet};
use vc::{VcNet, VcPacket};

pub use reserved::simulate_circuit_only;
pub use stats::{ClassLatency, LatencyStats, SimStats, SubnetCounters, SubnetKind};
pub use sweep::{sweep_injection, unloaded_latency, write_sweep_csv, Fabric, SweepParams, SweepPoint, SweepTable};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid subnet layout: {0}")]
    Layout(String),
    #[error("invalid VC configuration: {0}")]
    VcConfig(String),
    #[error("plan does not fit the network: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Plan(#[from] AllocError),
    #[error("packet {packet_id} refers to node {node}, outside the mesh")]
    NodeOutOfRange { packet_id: u64, node: u32 },
    #[error("packet {packet_id} is injected at cycle {cycle}, before the current cycle {now}")]
    PastEvent { packet_id: u64, cycle: u64, now: u64 },
    #[error("plan activation at cycle {at} is before the current cycle {now}")]
    PastActivation { at: u64, now: u64 },
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

/// Division of every physical link into equal-width subnets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubnetLayout {
    pub total_width_bits: u32,
    /// One VC subnet plus `subnet_count - 1` CS subnets; 1 means pure VC.
    pub subnet_count: u32,
}

impl Default for SubnetLayout {
    fn default() -> Self {
        Self {
            total_width_bits: FULL_LINK_WIDTH_BITS,
            subnet_count: 2,
        }
    }
}

impl SubnetLayout {
    pub fn new(total_width_bits: u32, subnet_count: u32) -> Result<Self, SimError> {
        let l = Self {
            total_width_bits,
            subnet_count,
        };
        l.validate()?;
        Ok(l)
    }

    /// The undivided link used by the pure-VC baseline.
    pub fn full_width() -> Self {
        Self {
            total_width_bits: FULL_LINK_WIDTH_BITS,
            subnet_count: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.total_width_bits == 0 || self.subnet_count == 0 {
            return Err(SimError::Layout("width and subnet count must be positive".into()));
        }
        if self.total_width_bits % self.subnet_count != 0 {
            return Err(SimError::Layout(format!(
                "{} subnets do not divide a {}-bit link",
                self.subnet_count, self.total_width_bits
            )));
        }
        Ok(())
    }

    pub fn subnet_width(&self) -> u32 {
        self.total_width_bits / self.subnet_count
    }

    pub fn cs_subnets(&self) -> usize {
        self.subnet_count as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VcConfig {
    pub vcs_per_vnet: u32,
    pub vnets: u32,
    pub buffer_depth_flits: u32,
    /// Router pipeline depth; the last three stages are VC allocation,
    /// switch allocation and switch traversal, the rest route computation.
    pub pipeline_stages: u32,
    pub link_cycles: u32,
}

impl Default for VcConfig {
    fn default() -> Self {
        Self {
            vcs_per_vnet: 4,
            vnets: 3,
            buffer_depth_flits: 4,
            pipeline_stages: 4,
            link_cycles: 1,
        }
    }
}

impl VcConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::VcConfig(m.to_string()));
        if self.vcs_per_vnet == 0 || self.vnets == 0 || self.buffer_depth_flits == 0 || self.link_cycles == 0 {
            return bad("all fields must be positive");
        }
        if self.pipeline_stages < 3 {
            return bad("the router needs at least three pipeline stages");
        }
        Ok(())
    }

    pub fn vcs_per_router_port(&self) -> usize {
        (self.vcs_per_vnet * self.vnets) as usize
    }

    /// Control packets use the first virtual network, data the last.
    pub fn vnet_of(&self, kind: PacketKind) -> usize {
        match kind {
            PacketKind::Control => 0,
            PacketKind::Data => self.vnets as usize - 1,
        }
    }

    /// Unloaded cycles from entering the first router to leaving the last one
    /// on an `h`-hop route.
    pub fn unloaded_latency(&self, hops: u32) -> u64 {
        let (s, l) = (self.pipeline_stages as u64, self.link_cycles as u64);
        (hops as u64 + 1) * s + hops as u64 * l
    }

    /// The same figure for a circuit.
    pub fn circuit_latency(&self, hops: u32, granularity: Granularity) -> u64 {
        let (h, l) = (hops as u64, self.link_cycles as u64);
        match granularity {
            Granularity::EndToEnd => (h + 1) + h * l,
            Granularity::RouterToRouter => 2 * self.pipeline_stages as u64 + (h - 1) + h * l,
        }
    }
}

/// Subnet a packet travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteClass {
    Vc,
    /// Index into the plan's CS subnets.
    Cs(usize),
}

impl fmt::Display for RouteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteClass::Vc => f.write_str("vc"),
            RouteClass::Cs(s) => write!(f, "cs{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub seed: u64,
    /// Stop at this cycle even with flits in flight. `None` runs until every
    /// packet has been delivered or `drain_cap_cycles` after the last one.
    pub cycles_limit: Option<u64>,
    pub drain_cap_cycles: u64,
    /// Power-gate the buffers of ports configured as circuits.
    pub gating: bool,
    /// Packets created before this cycle are left out of latency statistics.
    pub warmup_cycles: u64,
    pub record_flits: bool,
    /// Keep a log of delivered packets for profiling.
    pub log_deliveries: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            seed: 0,
            cycles_limit: None,
            drain_cap_cycles: 1_000_000,
            gating: true,
            warmup_cycles: 0,
            record_flits: false,
            log_deliveries: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlitRecord {
    pub packet_id: u64,
    pub flit_index: u32,
    pub route_class: RouteClass,
    /// Cycle the flit entered its first router.
    pub inject_cycle: u64,
    pub eject_cycle: u64,
    pub hops: u32,
}

pub fn write_flit_dump<W: Write>(mut w: W, records: &[FlitRecord]) -> std::io::Result<()> {
    writeln!(w, "packet_id,flit_index,route_class,inject_cycle,eject_cycle")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.packet_id, r.flit_index, r.route_class, r.inject_cycle, r.eject_cycle
        )?;
    }
    Ok(())
}

/// A packet whose tail has left the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub event: TrafficEvent,
    pub route: RouteClass,
    pub eject_cycle: u64,
}

/// Route class of `event` under `plan`: the CS subnet of the circuit whose
/// endpoints match, else the VC subnet.
pub fn classify_packet(event: &TrafficEvent, plan: &CircuitPlan, mesh: &MeshConfig) -> Result<RouteClass, SimError> {
    let key = match plan.granularity {
        Granularity::EndToEnd => (event.src.0, event.dst.0),
        Granularity::RouterToRouter => (mesh.router_of(event.src)?.0, mesh.router_of(event.dst)?.0),
    };
    Ok(plan
        .circuits()
        .find(|(_, c)| (c.src, c.dst) == key)
        .map_or(RouteClass::Vc, |(s, _)| RouteClass::Cs(s)))
}

/// One flit leaving the network.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ejection {
    pub pkt: u32,
    pub flit: u32,
    pub entry: u64,
    pub at: u64,
}

#[derive(Debug)]
struct PacketState {
    event: TrafficEvent,
    route: RouteClass,
    flits: u32,
    ejected: u32,
    hops: u32,
    measured: bool,
}

/// A validated plan with per-subnet circuit specs and lookup keys.
#[derive(Debug, Clone)]
struct Installed {
    plan: CircuitPlan,
    specs: Vec<Vec<CircuitSpec>>,
    lookup: HashMap<(u32, u32), (usize, usize)>,
    gated_ports: Vec<usize>,
}

pub struct Simulator {
    mesh: MeshConfig,
    layout: SubnetLayout,
    vc_cfg: VcConfig,
    params: SimParams,
    now: u64,
    trace: Vec<TrafficEvent>,
    cursor: usize,
    packets: Vec<PacketState>,
    outstanding: usize,
    vc: VcNet,
    cs: Vec<CsSubnet>,
    active: Installed,
    scheduled: Vec<(u64, Installed)>,
    stats: SimStats,
    buffers_per_subnet: u64,
    ejections: Vec<Ejection>,
    flit_log: Vec<FlitRecord>,
    deliveries: Vec<Delivery>,
}

impl Simulator {
    pub fn new(
        mesh: &MeshConfig,
        layout: SubnetLayout,
        vc_cfg: VcConfig,
        plan: &CircuitPlan,
        params: SimParams,
    ) -> Result<Self, SimError> {
        layout.validate()?;
        vc_cfg.validate()?;
        let width = layout.subnet_width();
        let mut subnets = vec![SubnetCounters::new(0, SubnetKind::Vc, width)];
        subnets.extend((1..layout.subnet_count as usize).map(|i| SubnetCounters::new(i, SubnetKind::Cs, width)));
        let ports: u64 = (0..mesh.router_count())
            .map(|r| {
                let rid = crate::topology::RouterId(r as u32);
                let links = Direction::ALL.iter().filter(|&&d| mesh.neighbor(rid, d).is_some()).count();
                (links + mesh.ni_per_router()[r] as usize) as u64
            })
            .sum();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let vc = VcNet::new(mesh, vc_cfg, 0, &mut rng);
        let mut sim = Self {
            mesh: mesh.clone(),
            layout,
            vc_cfg,
            now: 0,
            trace: Vec::new(),
            cursor: 0,
            packets: Vec::new(),
            outstanding: 0,
            vc,
            cs: (1..layout.subnet_count as usize).map(CsSubnet::new).collect(),
            active: Installed {
                plan: CircuitPlan::empty(plan.granularity, layout.cs_subnets()),
                specs: vec![Vec::new(); layout.cs_subnets()],
                lookup: HashMap::new(),
                gated_ports: vec![0; layout.cs_subnets()],
            },
            scheduled: Vec::new(),
            stats: SimStats::new(subnets),
            buffers_per_subnet: ports * vc_cfg.vcs_per_router_port() as u64,
            ejections: Vec::new(),
            flit_log: Vec::new(),
            deliveries: Vec::new(),
            params,
        };
        let first = sim.install_check(plan)?;
        sim.apply(first);
        sim.stats.plan_switches = 0;
        Ok(sim)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn active_plan(&self) -> &CircuitPlan {
        &self.active.plan
    }

    /// Adds packets to be created at their injection cycles.
    pub fn add_traffic(&mut self, events: &[TrafficEvent]) -> Result<(), SimError> {
        let n = self.mesh.ni_count() as u32;
        for e in events {
            for node in [e.src, e.dst] {
                if node.0 >= n {
                    return Err(SimError::NodeOutOfRange {
                        packet_id: e.packet_id,
                        node: node.0,
                    });
                }
            }
            if e.inject_cycle < self.now {
                return Err(SimError::PastEvent {
                    packet_id: e.packet_id,
                    cycle: e.inject_cycle,
                    now: self.now,
                });
            }
        }
        self.trace.drain(..self.cursor);
        self.cursor = 0;
        self.trace.extend_from_slice(events);
        self.trace.sort_by_key(|e| (e.inject_cycle, e.packet_id));
        Ok(())
    }

    /// Switches to `plan` at cycle `at`. Only subnets whose circuits change
    /// are reconfigured: their waiting packets fall back to the VC subnet and
    /// their new circuits start once the old ones have drained.
    pub fn schedule_plan(&mut self, plan: &CircuitPlan, at: u64) -> Result<(), SimError> {
        if at < self.now {
            return Err(SimError::PastActivation { at, now: self.now });
        }
        let inst = self.install_check(plan)?;
        let pos = self.scheduled.partition_point(|(t, _)| *t <= at);
        self.scheduled.insert(pos, (at, inst));
        Ok(())
    }

    fn install_check(&self, plan: &CircuitPlan) -> Result<Installed, SimError> {
        let k = self.layout.cs_subnets();
        if plan.subnets.len() > k && plan.subnets[k..].iter().any(|s| !s.is_empty()) {
            return Err(SimError::PlanMismatch(format!(
                "plan uses {} CS subnets but the layout has {k}",
                plan.subnets.len()
            )));
        }
        plan.validate(&self.mesh)?;
        let mut plan = plan.clone();
        plan.subnets.resize(k, Vec::new());
        let mut specs = vec![Vec::new(); k];
        let mut lookup = HashMap::new();
        let mut gated_ports = vec![0; k];
        for (s, circuits) in plan.subnets.iter().enumerate() {
            let mut ports = HashSet::new();
            for (i, c) in circuits.iter().enumerate() {
                let (spec, gated) = self.circuit_spec(plan.granularity, *c)?;
                ports.extend(gated);
                specs[s].push(spec);
                lookup.insert((c.src, c.dst), (s, i));
            }
            gated_ports[s] = ports.len();
        }
        Ok(Installed {
            plan,
            specs,
            lookup,
            gated_ports,
        })
    }

    /// Timing of a circuit and the input ports whose buffers it gates.
    fn circuit_spec(&self, g: Granularity, c: Circuit) -> Result<(CircuitSpec, Vec<(u32, usize)>), SimError> {
        let (rs, rd) = endpoint_routers(&self.mesh, g, c.src, c.dst)?;
        let path = xy_route(rs, rd, &self.mesh)?;
        let hops = path.hops() as u32;
        let input_port = |l: &crate::topology::DirectedLink| (l.to.0, l.direction.opposite().index());
        let (gated, sources): (Vec<_>, u32) = match g {
            Granularity::EndToEnd => {
                let local = 4 + self.mesh.local_index(NodeId(c.src))?;
                let mut ports = vec![(rs.0, local)];
                ports.extend(path.links.iter().map(input_port));
                (ports, 1)
            }
            Granularity::RouterToRouter => (
                path.links[..path.links.len() - 1].iter().map(input_port).collect(),
                self.mesh.ni_per_router()[rs.index()].max(1),
            ),
        };
        Ok((
            CircuitSpec {
                hops,
                latency: self.vc_cfg.circuit_latency(hops, g),
                endpoint_buffered: g == Granularity::RouterToRouter,
                sources,
            },
            gated,
        ))
    }

    fn apply(&mut self, next: Installed) {
        let waiting = self.take_circuit_bound(&next);
        let granularity_changed = next.plan.granularity != self.active.plan.granularity;
        for s in 0..self.cs.len() {
            if !granularity_changed && next.plan.subnets[s] == self.active.plan.subnets[s] {
                continue;
            }
            let orphans = self.cs[s].install(next.specs[s].clone(), self.now);
            for p in orphans {
                self.fall_back_to_vc(p);
            }
        }
        self.active = next;
        self.stats.plan_switches += 1;
        for (src, p) in waiting {
            self.enqueue_circuit(src, p);
        }
    }

    /// VC packets still waiting at their NI whose pair has a circuit in `next`.
    fn take_circuit_bound(&mut self, next: &Installed) -> Vec<(usize, VcPacket)> {
        if next.lookup.is_empty() {
            return Vec::new();
        }
        let (mesh, packets) = (&self.mesh, &self.packets);
        self.vc.take_waiting(|_, p| {
            let e = &packets[p.pkt as usize].event;
            next.lookup.contains_key(&pair_key(mesh, next.plan.granularity, e))
        })
    }

    fn enqueue_circuit(&mut self, src: usize, p: VcPacket) {
        let st = &mut self.packets[p.pkt as usize];
        let (s, i) = self.active.lookup[&pair_key(&self.mesh, self.active.plan.granularity, &st.event)];
        let source = match self.active.plan.granularity {
            Granularity::EndToEnd => 0,
            Granularity::RouterToRouter => self.mesh.local_index(st.event.src).expect("checked"),
        };
        st.route = RouteClass::Cs(s);
        st.hops = self.active.specs[s][i].hops;
        self.stats.packets_reclassified += 1;
        self.cs[s].enqueue(
            i,
            source,
            CsPacket {
                pkt: p.pkt,
                id: p.id,
                created: p.created,
                src: src as u32,
                dst: p.dst,
                flits: p.flits,
            },
        );
    }

    fn fall_back_to_vc(&mut self, p: CsPacket) {
        let width = self.layout.subnet_width();
        let st = &mut self.packets[p.pkt as usize];
        st.route = RouteClass::Vc;
        st.flits = flits_for_packet(st.event.class, width).expect("validated width");
        st.hops = self
            .mesh
            .manhattan(self.mesh.router_of(st.event.src).expect("checked"), self.mesh.router_of(st.event.dst).expect("checked"));
        let vp = VcPacket {
            pkt: p.pkt,
            id: p.id,
            created: p.created,
            dst: st.event.dst.0,
            flits: st.flits,
            vnet: self.vc_cfg.vnet_of(st.event.class.kind),
        };
        self.vc.enqueue_in_order(p.src as usize, vp);
    }

    fn create(&mut self, e: TrafficEvent) {
        let mesh = &self.mesh;
        let rs = mesh.router_of(e.src).expect("checked on add");
        let rd = mesh.router_of(e.dst).expect("checked on add");
        let key = pair_key(mesh, self.active.plan.granularity, &e);
        let width = self.layout.subnet_width();
        let flits = flits_for_packet(e.class, width).expect("validated width");
        let pkt = self.packets.len() as u32;
        let (route, hops) = match self.active.lookup.get(&key) {
            Some(&(s, i)) => {
                let source = match self.active.plan.granularity {
                    Granularity::EndToEnd => 0,
                    Granularity::RouterToRouter => mesh.local_index(e.src).expect("checked"),
                };
                self.cs[s].enqueue(
                    i,
                    source,
                    CsPacket {
                        pkt,
                        id: e.packet_id,
                        created: e.inject_cycle,
                        src: e.src.0,
                        dst: e.dst.0,
                        flits,
                    },
                );
                (RouteClass::Cs(s), self.active.specs[s][i].hops)
            }
            None => {
                self.vc.enqueue(
                    e.src.index(),
                    VcPacket {
                        pkt,
                        id: e.packet_id,
                        created: e.inject_cycle,
                        dst: e.dst.0,
                        flits,
                        vnet: self.vc_cfg.vnet_of(e.class.kind),
                    },
                );
                (RouteClass::Vc, mesh.manhattan(rs, rd))
            }
        };
        self.packets.push(PacketState {
            event: e,
            route,
            flits,
            ejected: 0,
            hops,
            measured: e.inject_cycle >= self.params.warmup_cycles,
        });
        self.outstanding += 1;
        self.stats.packets_created += 1;
    }

    fn deliver(&mut self, ej: Ejection) {
        let st = &mut self.packets[ej.pkt as usize];
        if ej.flit != st.ejected {
            self.stats.order_violations += 1;
        }
        st.ejected += 1;
        self.stats.flits_ejected += 1;
        let subnet = match st.route {
            RouteClass::Vc => 0,
            RouteClass::Cs(s) => s + 1,
        };
        self.stats.subnets[subnet].flits_ejected += 1;
        let lat = match st.route {
            RouteClass::Vc => &mut self.stats.vc_latency,
            RouteClass::Cs(_) => &mut self.stats.cs_latency,
        };
        if st.measured {
            lat.flit.record(ej.at - ej.entry);
        }
        if self.params.record_flits {
            self.flit_log.push(FlitRecord {
                packet_id: st.event.packet_id,
                flit_index: ej.flit,
                route_class: st.route,
                inject_cycle: ej.entry,
                eject_cycle: ej.at,
                hops: st.hops,
            });
        }
        if st.ejected == st.flits {
            self.stats.packets_ejected += 1;
            self.outstanding -= 1;
            if st.measured {
                lat.packet.record(ej.at - st.event.inject_cycle);
            }
            if self.params.log_deliveries {
                self.deliveries.push(Delivery {
                    event: st.event,
                    route: st.route,
                    eject_cycle: ej.at,
                });
            }
        }
    }

    fn account_buffers(&mut self, cycles: u64) {
        let total = self.buffers_per_subnet;
        let per_port = self.vc_cfg.vcs_per_router_port() as u64;
        self.stats.subnets[0].buffer_cycles += total * cycles;
        for s in 0..self.cs.len() {
            let gated = if self.params.gating {
                self.active.gated_ports[s] as u64 * per_port
            } else {
                0
            };
            let c = &mut self.stats.subnets[s + 1];
            c.buffer_cycles += (total - gated) * cycles;
            c.gated_buffer_cycles += gated * cycles;
        }
    }

    fn step(&mut self) {
        while self.scheduled.first().is_some_and(|(t, _)| *t <= self.now) {
            let (_, inst) = self.scheduled.remove(0);
            self.apply(inst);
        }
        while let Some(&e) = self.trace.get(self.cursor) {
            if e.inject_cycle > self.now {
                break;
            }
            self.cursor += 1;
            self.create(e);
        }
        let mut ejections = std::mem::take(&mut self.ejections);
        self.vc.step(self.now, &self.mesh, &mut self.stats, &mut ejections);
        for cs in &mut self.cs {
            cs.step(self.now, &mut self.stats, &mut ejections);
        }
        for ej in ejections.drain(..) {
            self.deliver(ej);
        }
        self.ejections = ejections;
        self.account_buffers(1);
        self.now += 1;
    }

    fn network_idle(&self) -> bool {
        self.vc.is_idle() && self.cs.iter().all(CsSubnet::is_idle)
    }

    /// Next cycle at which anything is due while the network is idle.
    fn next_wakeup(&self) -> Option<u64> {
        let trace = self.trace.get(self.cursor).map(|e| e.inject_cycle);
        let plan = self.scheduled.first().map(|(t, _)| *t);
        match (trace, plan) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Simulates every cycle before `end`.
    pub fn run_until(&mut self, end: u64) {
        while self.now < end {
            if self.network_idle() {
                let wake = self.next_wakeup().unwrap_or(end).min(end);
                if wake > self.now {
                    self.account_buffers(wake - self.now);
                    self.now = wake;
                    continue;
                }
            }
            self.step();
        }
    }

    /// Runs until all added traffic has been delivered and every scheduled
    /// plan applied, or until `limit`. Returns whether everything drained.
    pub fn run_until_drained(&mut self, limit: u64) -> bool {
        loop {
            let done = self.cursor == self.trace.len() && self.outstanding == 0 && self.scheduled.is_empty();
            if done {
                return true;
            }
            if self.now >= limit {
                return false;
            }
            if self.network_idle() {
                if let Some(wake) = self.next_wakeup() {
                    if wake > self.now {
                        let wake = wake.min(limit);
                        self.account_buffers(wake - self.now);
                        self.now = wake;
                        continue;
                    }
                }
            }
            self.step();
        }
    }

    /// Last injection cycle of the added traffic.
    pub fn last_injection(&self) -> u64 {
        self.trace.last().map_or(self.now, |e| e.inject_cycle.max(self.now))
    }

    /// Counter snapshot; `flits_in_flight` is counted from the network state.
    pub fn stats(&self) -> SimStats {
        let mut s = self.stats.clone();
        s.cycles_simulated = self.now;
        s.flits_in_flight = self.vc.flits_in_network() + self.cs.iter().map(CsSubnet::flits_in_network).sum::<u64>();
        s.max_vc_occupancy = self.vc.max_occupancy();
        s
    }

    pub fn flit_records(&self) -> &[FlitRecord] {
        &self.flit_log
    }

    /// Packets delivered since the last call, when delivery logging is on.
    pub fn take_deliveries(&mut self) -> Vec<Delivery> {
        std::mem::take(&mut self.deliveries)
    }

    pub fn packets_outstanding(&self) -> usize {
        self.outstanding
    }

    /// Circuits configured on each CS subnet right now.
    pub fn configured_circuits(&self) -> Vec<usize> {
        self.cs.iter().map(CsSubnet::circuit_count).collect()
    }
}

fn pair_key(mesh: &MeshConfig, g: Granularity, e: &TrafficEvent) -> (u32, u32) {
    match g {
        Granularity::EndToEnd => (e.src.0, e.dst.0),
        Granularity::RouterToRouter => (
            mesh.router_of(e.src).expect("checked on add").0,
            mesh.router_of(e.dst).expect("checked on add").0,
        ),
    }
}

/// Runs `trace` over the hybrid network configured with `plan`.
pub fn simulate(
    mesh: &MeshConfig,
    layout: SubnetLayout,
    vc_cfg: VcConfig,
    trace: &[TrafficEvent],
    plan: &CircuitPlan,
    params: &SimParams,
) -> Result<SimStats, SimError> {
    Ok(run(mesh, layout, vc_cfg, trace, plan, params)?.stats())
}

/// Like [`simulate`] but hands back the simulator for flit records and
/// delivery logs.
pub fn run(
    mesh: &MeshConfig,
    layout: SubnetLayout,
    vc_cfg: VcConfig,
    trace: &[TrafficEvent],
    plan: &CircuitPlan,
    params: &SimParams,
) -> Result<Simulator, SimError> {
    let mut sim = Simulator::new(mesh, layout, vc_cfg, plan, params.clone())?;
    sim.add_traffic(trace)?;
    match params.cycles_limit {
        Some(end) => sim.run_until(end),
        None => {
            let limit = sim.last_injection() + params.drain_cap_cycles;
            sim.run_until_drained(limit);
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests;
