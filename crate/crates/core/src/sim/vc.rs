//! The buffered virtual-channel subnet: wormhole switching with credit flow
//! control and a pipelined input-queued router.
//!
//! A flit written into an input buffer at cycle `t` moves through route
//! computation, VC allocation (head flits only), switch allocation and switch
//! traversal, one stage per cycle, so it wins the switch no earlier than
//! `t + S - 2` and leaves on the link at `t + S`. With `L` link cycles it is
//! written into the next router's buffer at `t + S + L`. Ejection at the
//! destination router completes the cycle after switch traversal.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::stats::SimStats;
use super::{Ejection, VcConfig};
use crate::topology::{Direction, MeshConfig, NodeId, RouterId};

const LOCAL: usize = 4;

#[derive(Debug, Clone, Copy)]
pub(crate) struct VcPacket {
    pub pkt: u32,
    pub id: u64,
    pub created: u64,
    pub dst: u32,
    pub flits: u32,
    pub vnet: usize,
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    pkt: u32,
    idx: u32,
    tail: bool,
    dst: u32,
    entry: u64,
    ready: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VcState {
    Idle,
    Routing,
    Active,
}

#[derive(Debug)]
struct InputVc {
    buf: VecDeque<Flit>,
    state: VcState,
    out_port: usize,
    out_vc: usize,
    route_ready: u64,
}

#[derive(Debug)]
struct Router {
    ports: usize,
    neighbor: [Option<usize>; 4],
    input: Vec<InputVc>,
    /// Downstream VC ownership and credits of the four mesh output ports.
    out_alloc: Vec<bool>,
    credits: Vec<u32>,
    va_rr: usize,
    sa_in_rr: Vec<usize>,
    sa_out_rr: Vec<usize>,
    buffered: u32,
}

#[derive(Debug)]
struct Injector {
    router: usize,
    port: usize,
    queue: VecDeque<VcPacket>,
    current: Option<(VcPacket, u32, usize)>,
    rr: usize,
}

#[derive(Debug)]
enum Event {
    Arrive { router: usize, port: usize, vc: usize, flit: Flit },
    Credit { router: usize, port: usize, vc: usize, free: bool },
    Eject(Flit),
}

#[derive(Debug)]
pub(crate) struct VcNet {
    cfg: VcConfig,
    nvc: usize,
    stats_index: usize,
    routers: Vec<Router>,
    nis: Vec<Injector>,
    ni_router: Vec<usize>,
    wheel: Vec<Vec<Event>>,
    pending_events: usize,
    max_occupancy: u32,
}

impl VcNet {
    pub fn new(mesh: &MeshConfig, cfg: VcConfig, stats_index: usize, rng: &mut ChaCha8Rng) -> Self {
        let nvc = cfg.vcs_per_router_port();
        let depth = cfg.buffer_depth_flits;
        let routers = (0..mesh.router_count())
            .map(|r| {
                let rid = RouterId(r as u32);
                let ports = LOCAL + mesh.ni_per_router()[r] as usize;
                let mut neighbor = [None; 4];
                for d in Direction::ALL {
                    neighbor[d.index()] = mesh.neighbor(rid, d).map(RouterId::index);
                }
                Router {
                    ports,
                    neighbor,
                    input: (0..ports * nvc)
                        .map(|_| InputVc {
                            buf: VecDeque::with_capacity(depth as usize),
                            state: VcState::Idle,
                            out_port: 0,
                            out_vc: 0,
                            route_ready: 0,
                        })
                        .collect(),
                    out_alloc: vec![false; LOCAL * nvc],
                    credits: vec![depth; LOCAL * nvc],
                    va_rr: rng.gen_range(0..ports * nvc),
                    sa_in_rr: (0..ports).map(|_| rng.gen_range(0..nvc)).collect(),
                    sa_out_rr: (0..ports).map(|_| rng.gen_range(0..ports)).collect(),
                    buffered: 0,
                }
            })
            .collect();
        let ni_router: Vec<usize> = (0..mesh.ni_count())
            .map(|n| mesh.router_of(NodeId(n as u32)).expect("ni in range").index())
            .collect();
        let nis = (0..mesh.ni_count())
            .map(|n| Injector {
                router: ni_router[n],
                port: LOCAL + mesh.local_index(NodeId(n as u32)).expect("ni in range"),
                queue: VecDeque::new(),
                current: None,
                rr: rng.gen_range(0..cfg.vcs_per_vnet as usize),
            })
            .collect();
        let slots = 3 + cfg.link_cycles as usize;
        Self {
            cfg,
            nvc,
            stats_index,
            routers,
            nis,
            ni_router,
            wheel: (0..slots).map(|_| Vec::new()).collect(),
            pending_events: 0,
            max_occupancy: 0,
        }
    }

    pub fn enqueue(&mut self, src: usize, p: VcPacket) {
        self.nis[src].queue.push_back(p);
    }

    /// Queues a packet behind every packet of its source created earlier.
    pub fn enqueue_in_order(&mut self, src: usize, p: VcPacket) {
        let q = &mut self.nis[src].queue;
        let at = q.partition_point(|o| (o.created, o.id) <= (p.created, p.id));
        q.insert(at, p);
    }

    /// Removes queued packets that have not started injecting and match
    /// `take`, in queue order per source.
    pub fn take_waiting(&mut self, mut take: impl FnMut(usize, &VcPacket) -> bool) -> Vec<(usize, VcPacket)> {
        let mut out = Vec::new();
        for (src, ni) in self.nis.iter_mut().enumerate() {
            ni.queue.retain(|p| {
                let hit = take(src, p);
                if hit {
                    out.push((src, *p));
                }
                !hit
            });
        }
        out
    }

    pub fn max_occupancy(&self) -> u32 {
        self.max_occupancy
    }

    pub fn is_idle(&self) -> bool {
        self.pending_events == 0
            && self.routers.iter().all(|r| r.buffered == 0)
            && self.nis.iter().all(|n| n.queue.is_empty() && n.current.is_none())
    }

    /// Flits in buffers, on links or in the ejection stage, found by walking
    /// the structures rather than from the counters.
    pub fn flits_in_network(&self) -> u64 {
        let buffered: u64 = self
            .routers
            .iter()
            .flat_map(|r| r.input.iter())
            .map(|v| v.buf.len() as u64)
            .sum();
        let moving = self
            .wheel
            .iter()
            .flatten()
            .filter(|e| !matches!(e, Event::Credit { .. }))
            .count() as u64;
        buffered + moving
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        let slot = (at % self.wheel.len() as u64) as usize;
        self.wheel[slot].push(ev);
        self.pending_events += 1;
    }

    fn route(&self, router: usize, dst: u32, mesh: &MeshConfig) -> usize {
        let dr = self.ni_router[dst as usize];
        if dr == router {
            LOCAL + mesh.local_index(NodeId(dst)).expect("ni in range")
        } else {
            mesh.xy_next(RouterId(router as u32), RouterId(dr as u32))
                .expect("distinct routers")
                .index()
        }
    }

    /// Writes `flit` into an input VC; heads start route computation.
    fn write(&mut self, now: u64, router: usize, port: usize, vc: usize, mut flit: Flit, mesh: &MeshConfig, stats: &mut SimStats) {
        let s = self.cfg.pipeline_stages as u64;
        flit.ready = now + s - 2;
        let out = if flit.idx == 0 { self.route(router, flit.dst, mesh) } else { 0 };
        let nvc = self.nvc;
        let r = &mut self.routers[router];
        let ivc = &mut r.input[port * nvc + vc];
        if flit.idx == 0 {
            debug_assert_eq!(ivc.state, VcState::Idle);
            ivc.state = VcState::Routing;
            ivc.route_ready = now + s - 3;
            ivc.out_port = out;
        }
        ivc.buf.push_back(flit);
        self.max_occupancy = self.max_occupancy.max(ivc.buf.len() as u32);
        r.buffered += 1;
        stats.subnets[self.stats_index].buffer_writes += 1;
    }

    pub fn step(&mut self, now: u64, mesh: &MeshConfig, stats: &mut SimStats, out: &mut Vec<Ejection>) {
        let slot = (now % self.wheel.len() as u64) as usize;
        let mut events = std::mem::take(&mut self.wheel[slot]);
        self.pending_events -= events.len();
        for ev in events.drain(..) {
            match ev {
                Event::Arrive { router, port, vc, flit } => self.write(now, router, port, vc, flit, mesh, stats),
                Event::Credit { router, port, vc, free } => {
                    let r = &mut self.routers[router];
                    r.credits[port * self.nvc + vc] += 1;
                    if free {
                        r.out_alloc[port * self.nvc + vc] = false;
                    }
                }
                Event::Eject(f) => out.push(Ejection {
                    pkt: f.pkt,
                    flit: f.idx,
                    entry: f.entry,
                    at: now,
                }),
            }
        }
        self.wheel[slot] = events;

        self.inject(now, mesh, stats);
        for r in 0..self.routers.len() {
            if self.routers[r].buffered > 0 {
                self.allocate_vcs(r, now, stats);
            }
        }
        for r in 0..self.routers.len() {
            if self.routers[r].buffered > 0 {
                self.allocate_switch(r, now, stats);
            }
        }
    }

    fn inject(&mut self, now: u64, mesh: &MeshConfig, stats: &mut SimStats) {
        let (nvc, vpv, depth) = (self.nvc, self.cfg.vcs_per_vnet as usize, self.cfg.buffer_depth_flits as usize);
        for n in 0..self.nis.len() {
            let ni = &self.nis[n];
            let (router, port) = (ni.router, ni.port);
            let (p, idx, vc) = match ni.current {
                Some((p, next, vc)) => {
                    if self.routers[router].input[port * nvc + vc].buf.len() >= depth {
                        continue;
                    }
                    (p, next, vc)
                }
                None => {
                    let Some(&p) = ni.queue.front() else { continue };
                    let base = p.vnet * vpv;
                    let inputs = &self.routers[router].input;
                    let free = (0..vpv)
                        .map(|k| base + (ni.rr + k) % vpv)
                        .find(|&v| inputs[port * nvc + v].state == VcState::Idle && inputs[port * nvc + v].buf.is_empty());
                    let Some(vc) = free else { continue };
                    let ni = &mut self.nis[n];
                    ni.queue.pop_front();
                    ni.rr = (vc - base + 1) % vpv;
                    (p, 0, vc)
                }
            };
            let tail = idx + 1 == p.flits;
            self.nis[n].current = (!tail).then_some((p, idx + 1, vc));
            let flit = Flit {
                pkt: p.pkt,
                idx,
                tail,
                dst: p.dst,
                entry: now,
                ready: 0,
            };
            self.write(now, router, port, vc, flit, mesh, stats);
            stats.flits_injected += 1;
            stats.subnets[self.stats_index].flits_injected += 1;
        }
    }

    fn allocate_vcs(&mut self, router: usize, now: u64, stats: &mut SimStats) {
        let (nvc, vpv) = (self.nvc, self.cfg.vcs_per_vnet as usize);
        let r = &mut self.routers[router];
        let n = r.input.len();
        let start = r.va_rr;
        r.va_rr = (r.va_rr + 1) % n;
        for k in 0..n {
            let i = (start + k) % n;
            let ivc = &r.input[i];
            if ivc.state != VcState::Routing || ivc.route_ready > now {
                continue;
            }
            let o = ivc.out_port;
            let out_vc = if o >= LOCAL {
                0
            } else {
                let base = o * nvc + (i % nvc) / vpv * vpv;
                match (base..base + vpv).find(|&j| !r.out_alloc[j]) {
                    Some(j) => {
                        r.out_alloc[j] = true;
                        j - o * nvc
                    }
                    None => continue,
                }
            };
            let ivc = &mut r.input[i];
            ivc.state = VcState::Active;
            ivc.out_vc = out_vc;
            if let Some(head) = ivc.buf.front_mut() {
                head.ready = head.ready.max(now + 1);
            }
            stats.subnets[self.stats_index].vc_allocations += 1;
        }
    }

    fn allocate_switch(&mut self, router: usize, now: u64, stats: &mut SimStats) {
        let nvc = self.nvc;
        let link = self.cfg.link_cycles as u64;
        let r = &mut self.routers[router];
        let ports = r.ports;

        let mut requests: Vec<Option<(usize, usize)>> = vec![None; ports];
        for (p, req) in requests.iter_mut().enumerate() {
            let start = r.sa_in_rr[p];
            for k in 0..nvc {
                let v = (start + k) % nvc;
                let ivc = &r.input[p * nvc + v];
                if ivc.state != VcState::Active {
                    continue;
                }
                let Some(head) = ivc.buf.front() else { continue };
                if head.ready > now {
                    continue;
                }
                let o = ivc.out_port;
                if o < LOCAL && r.credits[o * nvc + ivc.out_vc] == 0 {
                    continue;
                }
                *req = Some((v, o));
                break;
            }
        }

        let mut grants = Vec::new();
        for o in 0..ports {
            let start = r.sa_out_rr[o];
            if let Some(p) = (0..ports)
                .map(|k| (start + k) % ports)
                .find(|&p| matches!(requests[p], Some((_, out)) if out == o))
            {
                grants.push((p, requests[p].expect("requested").0, o));
                r.sa_out_rr[o] = (p + 1) % ports;
            }
        }

        let counters = &mut stats.subnets[self.stats_index];
        let mut scheduled = Vec::with_capacity(grants.len() * 2);
        for (p, v, o) in grants {
            r.sa_in_rr[p] = (v + 1) % nvc;
            let ivc = &mut r.input[p * nvc + v];
            let flit = ivc.buf.pop_front().expect("granted VC holds a flit");
            let out_vc = ivc.out_vc;
            if flit.tail {
                ivc.state = VcState::Idle;
            }
            r.buffered -= 1;
            counters.buffer_reads += 1;
            counters.sw_allocations += 1;
            counters.crossbar_traversals += 1;
            if o >= LOCAL {
                scheduled.push((now + 2, Event::Eject(flit)));
            } else {
                r.credits[o * nvc + out_vc] -= 1;
                counters.link_traversals += 1;
                let next = r.neighbor[o].expect("X-Y route stays in the mesh");
                let port = Direction::ALL[o].opposite().index();
                scheduled.push((now + 2 + link, Event::Arrive { router: next, port, vc: out_vc, flit }));
            }
            if p < LOCAL {
                let up = r.neighbor[p].expect("flit came from a neighbour");
                let port = Direction::ALL[p].opposite().index();
                scheduled.push((now + link, Event::Credit { router: up, port, vc: v, free: flit.tail }));
            }
        }
        for (at, ev) in scheduled {
            self.schedule(at, ev);
        }
    }
}
