//! An idealized all-circuit fabric: every packet reserves its whole X-Y path
//! at full link width, with no set-up cost, and holds it until its tail
//! flit has left. Used as the pure circuit-switching reference in injection
//! sweeps.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stats::{SimStats, SubnetCounters, SubnetKind};
use super::{SimError, SimParams, VcConfig};
use crate::topology::{xy_route, MeshConfig};
use crate::traffic::{flits_for_packet, TrafficEvent};

struct Transfer {
    created: u64,
    start: u64,
    flits: u32,
    latency: u64,
    hops: u64,
    measured: bool,
}

pub fn simulate_circuit_only(
    mesh: &MeshConfig,
    width_bits: u32,
    vc_cfg: VcConfig,
    trace: &[TrafficEvent],
    params: &SimParams,
) -> Result<SimStats, SimError> {
    vc_cfg.validate()?;
    let nis = mesh.ni_count();
    for e in trace {
        for node in [e.src, e.dst] {
            if node.index() >= nis {
                return Err(SimError::NodeOutOfRange {
                    packet_id: e.packet_id,
                    node: node.0,
                });
            }
        }
    }
    let mut trace = trace.to_vec();
    trace.sort_by_key(|e| (e.inject_cycle, e.packet_id));

    let mut stats = SimStats::new(vec![SubnetCounters::new(0, SubnetKind::Cs, width_bits)]);
    let mut queues: Vec<VecDeque<TrafficEvent>> = vec![VecDeque::new(); nis];
    let mut link_free = vec![0u64; mesh.link_slots()];
    let mut src_free = vec![0u64; nis];
    let mut dst_free = vec![0u64; nis];
    let mut active: Vec<Transfer> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let offset = rng.gen_range(0..nis.max(1));
    let link = vc_cfg.link_cycles as u64;

    let limit = params
        .cycles_limit
        .unwrap_or_else(|| trace.last().map_or(0, |e| e.inject_cycle) + params.drain_cap_cycles);
    let mut cursor = 0;
    let mut queued = 0usize;
    let mut now = 0u64;
    while now < limit {
        if active.is_empty() && queued == 0 {
            match trace.get(cursor) {
                Some(e) if e.inject_cycle > now => now = e.inject_cycle.min(limit),
                Some(_) => {}
                None if params.cycles_limit.is_some() => now = limit,
                None => break,
            }
            if now >= limit {
                break;
            }
        }
        while cursor < trace.len() && trace[cursor].inject_cycle <= now {
            let e = trace[cursor];
            queues[e.src.index()].push_back(e);
            queued += 1;
            stats.packets_created += 1;
            cursor += 1;
        }

        for k in 0..nis {
            let n = (offset + now as usize + k) % nis;
            let Some(&e) = queues[n].front() else { continue };
            let d = e.dst.index();
            if src_free[n] > now || dst_free[d] > now {
                continue;
            }
            let rs = mesh.router_of(e.src)?;
            let rd = mesh.router_of(e.dst)?;
            let slots: Vec<usize> = if rs == rd {
                Vec::new()
            } else {
                xy_route(rs, rd, mesh)?.links.iter().map(|l| l.slot()).collect()
            };
            if slots.iter().any(|&s| link_free[s] > now) {
                continue;
            }
            queues[n].pop_front();
            queued -= 1;
            let flits = flits_for_packet(e.class, width_bits)?;
            let hops = slots.len() as u64;
            let latency = (hops + 1) + hops * link;
            let release = now + flits as u64 - 1 + latency;
            for &s in &slots {
                link_free[s] = release;
            }
            src_free[n] = release;
            dst_free[d] = release;
            active.push(Transfer {
                created: e.inject_cycle,
                start: now,
                flits,
                latency,
                hops,
                measured: e.inject_cycle >= params.warmup_cycles,
            });
        }

        active.retain(|t| {
            let c = &mut stats.subnets[0];
            let sent = now - t.start;
            if sent < t.flits as u64 {
                stats.flits_injected += 1;
                stats.in_circuit_flits += 1;
                c.flits_injected += 1;
                c.crossbar_traversals += t.hops + 1;
                c.link_traversals += t.hops;
            }
            if now >= t.start + t.latency {
                let idx = now - t.start - t.latency;
                if idx < t.flits as u64 {
                    stats.flits_ejected += 1;
                    c.flits_ejected += 1;
                    if t.measured {
                        stats.cs_latency.flit.record(t.latency);
                    }
                    if idx + 1 == t.flits as u64 {
                        stats.packets_ejected += 1;
                        if t.measured {
                            stats.cs_latency.packet.record(now - t.created);
                        }
                        return false;
                    }
                }
            }
            true
        });
        now += 1;
    }

    stats.cycles_simulated = now;
    stats.flits_in_flight = active
        .iter()
        .map(|t| {
            let sent = (now - t.start).min(t.flits as u64);
            let out = (now.saturating_sub(t.start + t.latency)).min(t.flits as u64);
            sent - out
        })
        .sum();
    Ok(stats)
}
