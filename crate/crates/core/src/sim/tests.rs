use proptest::prelude::*;

use super::*;
use crate::allocator::Provenance;
use crate::topology::RouterId;
use crate::traffic::{generate, PacketSizes, Pattern, SyntheticSpec};

fn packet(id: u64, at: u64, src: u32, dst: u32, kind: PacketKind) -> TrafficEvent {
    TrafficEvent {
        inject_cycle: at,
        src: NodeId(src),
        dst: NodeId(dst),
        class: PacketSizes::default().class(kind),
        packet_id: id,
    }
}

fn plan(g: Granularity, k: usize, circuits: &[(usize, u32, u32)]) -> CircuitPlan {
    let mut p = CircuitPlan::empty(g, k);
    for &(s, src, dst) in circuits {
        p.subnets[s].push(Circuit { src, dst });
    }
    p.provenance = Provenance::Manual;
    p
}

fn recorded(params: SimParams) -> SimParams {
    SimParams {
        record_flits: true,
        ..params
    }
}

fn mesh4() -> MeshConfig {
    MeshConfig::uniform(4, 4).unwrap()
}

/// Router `hops` steps east then north of router 0 on a 4x4 mesh.
fn dest(hops: u32) -> u32 {
    let x = hops.min(3);
    let y = hops - x;
    y * 4 + x
}

#[test]
fn vc_single_flit_unloaded_latency() {
    let mesh = mesh4();
    for h in 0..=6 {
        let trace = [packet(0, 5, 0, dest(h), PacketKind::Control)];
        let sim = run(&mesh, SubnetLayout::full_width(), VcConfig::default(), &trace, &CircuitPlan::empty(Granularity::EndToEnd, 0), &recorded(SimParams::default())).unwrap();
        let f = sim.flit_records();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].inject_cycle, 5);
        assert_eq!(f[0].eject_cycle - f[0].inject_cycle, 5 * h as u64 + 4, "h={h}");
    }
}

#[test]
fn vc_latency_follows_pipeline_depth_and_link_delay() {
    let mesh = mesh4();
    let cfg = VcConfig {
        pipeline_stages: 5,
        link_cycles: 2,
        ..VcConfig::default()
    };
    let trace = [packet(0, 0, 0, 15, PacketKind::Control)];
    let sim = run(&mesh, SubnetLayout::full_width(), cfg, &trace, &CircuitPlan::empty(Granularity::EndToEnd, 0), &recorded(SimParams::default())).unwrap();
    let f = sim.flit_records()[0];
    assert_eq!(f.eject_cycle - f.inject_cycle, 7 * 5 + 6 * 2);
    assert_eq!(cfg.unloaded_latency(6), 47);
}

#[test]
fn e2e_circuit_latency_is_2h_plus_1() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    for h in 1..=6 {
        let d = dest(h);
        let p = plan(Granularity::EndToEnd, 1, &[(0, 0, d)]);
        let trace = [packet(0, 3, 0, d, PacketKind::Data)];
        let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
        let f = sim.flit_records();
        assert_eq!(f.len(), 10);
        for (i, r) in f.iter().enumerate() {
            assert_eq!(r.route_class, RouteClass::Cs(0));
            assert_eq!(r.flit_index, i as u32);
            assert_eq!(r.inject_cycle, 3 + i as u64);
            assert_eq!(r.eject_cycle - r.inject_cycle, 2 * h as u64 + 1);
        }
    }
}

#[test]
fn r2r_circuit_latency_is_2h_plus_7() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::RouterToRouter, 1, &[(0, 0, 3)]);
    let trace = [packet(0, 0, 0, 3, PacketKind::Control)];
    let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
    let f = sim.flit_records()[0];
    assert_eq!(f.eject_cycle - f.inject_cycle, 13);
    let s = sim.stats();
    // A 128-bit control packet is two flits on a 64-bit subnet.
    assert_eq!(s.subnets[1].endpoint_buffer_writes, 2 * 2);
    assert_eq!(s.subnets[1].buffer_writes, 0);
}

#[test]
fn r2r_circuits_into_one_router_share_its_ejection_port() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::RouterToRouter, 1, &[(0, 4, 5), (0, 6, 5)]);
    let trace = [packet(0, 0, 4, 5, PacketKind::Control), packet(1, 0, 6, 5, PacketKind::Control)];
    let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
    let mut ejects: Vec<u64> = sim.flit_records().iter().map(|r| r.eject_cycle).collect();
    ejects.sort();
    assert_eq!(ejects, vec![9, 10, 11, 12]);
    assert_eq!(sim.stats().order_violations, 0);
}

#[test]
fn one_ni_feeds_one_circuit_at_a_time() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::RouterToRouter, 1, &[(0, 5, 4), (0, 5, 6)]);
    let trace = [packet(0, 0, 5, 4, PacketKind::Control), packet(1, 0, 5, 6, PacketKind::Control)];
    let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
    let mut starts: Vec<(u64, u64)> = sim.flit_records().iter().map(|r| (r.inject_cycle, r.packet_id)).collect();
    starts.sort();
    assert_eq!(starts, vec![(0, 0), (1, 0), (2, 1), (3, 1)]);
}

#[test]
fn second_packet_waits_for_the_circuit() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::EndToEnd, 1, &[(0, 0, 3)]);
    let trace = [packet(0, 0, 0, 3, PacketKind::Data), packet(1, 0, 0, 3, PacketKind::Control)];
    let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
    let second: Vec<_> = sim.flit_records().iter().filter(|r| r.packet_id == 1).collect();
    assert_eq!(second[0].inject_cycle, 10);
    assert_eq!(second[0].eject_cycle - second[0].inject_cycle, 7);
}

#[test]
fn r2r_circuit_serves_every_ni_of_its_router() {
    let mesh = MeshConfig::cmp16_51ni();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::RouterToRouter, 1, &[(0, 1, 6)]);
    let src: Vec<u32> = mesh.nodes_of(RouterId(1)).collect();
    let dst: Vec<u32> = mesh.nodes_of(RouterId(6)).collect();
    let mut trace = Vec::new();
    for (i, &s) in src.iter().enumerate() {
        trace.push(packet(i as u64, 0, s, dst[i % dst.len()], PacketKind::Control));
    }
    for e in &trace {
        assert_eq!(classify_packet(e, &p, &mesh).unwrap(), RouteClass::Cs(0));
    }
    let sim = run(&mesh, layout, VcConfig::default(), &trace, &p, &recorded(SimParams::default())).unwrap();
    let mut starts: Vec<u64> = sim.flit_records().iter().map(|r| r.inject_cycle).collect();
    starts.sort();
    let flits = 2 * src.len() as u64;
    assert_eq!(starts, (0..flits).collect::<Vec<_>>());
    assert_eq!(sim.stats().in_circuit_flits, flits);
}

#[test]
fn classification_examples() {
    let mesh = mesh4();
    assert_eq!(
        classify_packet(&packet(0, 0, 3, 7, PacketKind::Data), &CircuitPlan::empty(Granularity::EndToEnd, 3), &mesh).unwrap(),
        RouteClass::Vc
    );
    let p = plan(Granularity::EndToEnd, 3, &[(2, 3, 7)]);
    assert_eq!(classify_packet(&packet(0, 0, 3, 7, PacketKind::Data), &p, &mesh).unwrap(), RouteClass::Cs(2));
    assert_eq!(classify_packet(&packet(0, 0, 7, 3, PacketKind::Data), &p, &mesh).unwrap(), RouteClass::Vc);
}

#[test]
fn plan_must_fit_the_layout() {
    let mesh = mesh4();
    let p = plan(Granularity::EndToEnd, 2, &[(1, 0, 3)]);
    let err = Simulator::new(&mesh, SubnetLayout::new(128, 2).unwrap(), VcConfig::default(), &p, SimParams::default());
    assert!(matches!(err, Err(SimError::PlanMismatch(_))));
    let clash = plan(Granularity::EndToEnd, 1, &[(0, 0, 3), (0, 1, 2)]);
    let err = Simulator::new(&mesh, SubnetLayout::new(128, 2).unwrap(), VcConfig::default(), &clash, SimParams::default());
    assert!(matches!(err, Err(SimError::Plan(_))));
    assert!(SubnetLayout::new(128, 3).is_err());
}

#[test]
fn out_of_range_nodes_are_rejected() {
    let mesh = mesh4();
    let mut sim = Simulator::new(&mesh, SubnetLayout::full_width(), VcConfig::default(), &CircuitPlan::empty(Granularity::EndToEnd, 0), SimParams::default()).unwrap();
    assert!(matches!(
        sim.add_traffic(&[packet(9, 0, 0, 16, PacketKind::Data)]),
        Err(SimError::NodeOutOfRange { packet_id: 9, node: 16 })
    ));
}

#[test]
fn gated_buffers_follow_circuit_ports() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let nvc = VcConfig::default().vcs_per_router_port() as u64;
    for (g, gated_ports) in [(Granularity::EndToEnd, 4), (Granularity::RouterToRouter, 2)] {
        let p = plan(g, 1, &[(0, 0, 3)]);
        let mut sim = Simulator::new(&mesh, layout, VcConfig::default(), &p, SimParams::default()).unwrap();
        sim.run_until(100);
        let s = sim.stats();
        assert_eq!(s.subnets[1].gated_buffer_cycles, gated_ports * nvc * 100);
        assert_eq!(s.subnets[0].gated_buffer_cycles, 0);
        assert_eq!(s.subnets[0].buffer_cycles, s.subnets[1].buffer_cycles + s.subnets[1].gated_buffer_cycles);

        let mut open = Simulator::new(&mesh, layout, VcConfig::default(), &p, SimParams { gating: false, ..SimParams::default() }).unwrap();
        open.run_until(100);
        assert_eq!(open.stats().subnets[1].gated_buffer_cycles, 0);
    }
}

#[test]
fn scheduled_plan_takes_over_at_its_cycle() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let empty = CircuitPlan::empty(Granularity::EndToEnd, 1);
    let p = plan(Granularity::EndToEnd, 1, &[(0, 0, 3)]);
    let mut sim = Simulator::new(&mesh, layout, VcConfig::default(), &empty, recorded(SimParams::default())).unwrap();
    sim.schedule_plan(&p, 50).unwrap();
    sim.add_traffic(&[packet(0, 49, 0, 3, PacketKind::Control), packet(1, 50, 0, 3, PacketKind::Control)]).unwrap();
    assert!(sim.run_until_drained(10_000));
    let classes: Vec<_> = sim.flit_records().iter().map(|r| (r.packet_id, r.route_class)).collect();
    assert!(classes.contains(&(0, RouteClass::Vc)));
    assert!(classes.contains(&(1, RouteClass::Cs(0))));
    assert_eq!(sim.stats().plan_switches, 1);
}

#[test]
fn decommissioned_circuit_hands_waiting_packets_to_vc() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let p = plan(Granularity::EndToEnd, 1, &[(0, 0, 3)]);
    let mut sim = Simulator::new(&mesh, layout, VcConfig::default(), &p, recorded(SimParams::default())).unwrap();
    let burst: Vec<_> = (0..6).map(|i| packet(i, 0, 0, 3, PacketKind::Data)).collect();
    sim.add_traffic(&burst).unwrap();
    sim.schedule_plan(&CircuitPlan::empty(Granularity::EndToEnd, 1), 15).unwrap();
    assert!(sim.run_until_drained(100_000));
    let s = sim.stats();
    assert_eq!(s.packets_ejected, 6);
    assert_eq!(s.order_violations, 0);
    // Packet 0 finished, packet 1 was streaming at the switch; the rest fell back.
    let on_circuit: std::collections::BTreeSet<_> = sim
        .flit_records()
        .iter()
        .filter(|r| r.route_class == RouteClass::Cs(0))
        .map(|r| r.packet_id)
        .collect();
    assert_eq!(on_circuit.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(sim.configured_circuits(), vec![0]);
}

#[test]
fn waiting_vc_packets_move_onto_a_new_circuit() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let empty = CircuitPlan::empty(Granularity::EndToEnd, 1);
    let mut sim = Simulator::new(&mesh, layout, VcConfig::default(), &empty, recorded(SimParams::default())).unwrap();
    let burst: Vec<_> = (0..6).map(|i| packet(i, 0, 0, 3, PacketKind::Data)).collect();
    sim.add_traffic(&burst).unwrap();
    sim.schedule_plan(&plan(Granularity::EndToEnd, 1, &[(0, 0, 3)]), 4).unwrap();
    assert!(sim.run_until_drained(10_000));
    let s = sim.stats();
    assert_eq!(s.packets_ejected, 6);
    assert_eq!(s.order_violations, 0);
    let class_of = |id| sim.flit_records().iter().find(|r| r.packet_id == id).unwrap().route_class;
    assert_eq!(class_of(0), RouteClass::Vc);
    assert_eq!(class_of(5), RouteClass::Cs(0));
    let moved = (0..6).filter(|&i| class_of(i) == RouteClass::Cs(0)).count() as u64;
    assert_eq!(s.packets_reclassified, moved);
    for id in 0..6 {
        let classes: std::collections::HashSet<_> = sim.flit_records().iter().filter(|r| r.packet_id == id).map(|r| r.route_class).collect();
        assert_eq!(classes.len(), 1, "packet {id} split across route classes");
    }
}

#[test]
fn new_circuits_wait_for_the_old_ones_to_drain() {
    let mesh = mesh4();
    let layout = SubnetLayout::new(128, 2).unwrap();
    let old = plan(Granularity::EndToEnd, 1, &[(0, 0, 3)]);
    let new = plan(Granularity::EndToEnd, 1, &[(0, 4, 7)]);
    let mut sim = Simulator::new(&mesh, layout, VcConfig::default(), &old, recorded(SimParams::default())).unwrap();
    sim.add_traffic(&[packet(0, 0, 0, 3, PacketKind::Data), packet(1, 2, 4, 7, PacketKind::Data)]).unwrap();
    sim.schedule_plan(&new, 2).unwrap();
    assert!(sim.run_until_drained(10_000));
    let r = sim.flit_records();
    let last_old = r.iter().filter(|x| x.packet_id == 0).map(|x| x.eject_cycle).max().unwrap();
    let first_new = r.iter().filter(|x| x.packet_id == 1).map(|x| x.inject_cycle).min().unwrap();
    assert!(r.iter().filter(|x| x.packet_id == 1).all(|x| x.route_class == RouteClass::Cs(0)));
    assert!(first_new > last_old, "{first_new} <= {last_old}");
}

fn uniform_trace(mesh: &MeshConfig, rate: f64, seed: u64, cycles: u64) -> Vec<TrafficEvent> {
    let spec = SyntheticSpec {
        pattern: Pattern::UniformRandom,
        injection_rate: rate,
        ..SyntheticSpec::default()
    };
    generate(&spec, mesh, seed, cycles).unwrap()
}

#[test]
fn heavy_load_respects_credits_and_ordering() {
    let mesh = mesh4();
    let trace = uniform_trace(&mesh, 0.6, 3, 2000);
    let s = simulate(&mesh, SubnetLayout::new(128, 4).unwrap(), VcConfig::default(), &trace, &CircuitPlan::empty(Granularity::EndToEnd, 3), &SimParams::default()).unwrap();
    assert!(s.max_vc_occupancy <= 4);
    assert_eq!(s.max_vc_occupancy, 4);
    assert_eq!(s.order_violations, 0);
    assert_eq!(s.packets_ejected, trace.len() as u64);
    assert_eq!(s.flits_in_flight, 0);
}

#[test]
fn cut_off_run_conserves_flits() {
    let mesh = MeshConfig::cmp16_51ni();
    let trace = uniform_trace(&mesh, 0.3, 1, 3000);
    let p = crate::allocator::greedy_allocate(
        &crate::traffic::profile(&trace, &mesh, Granularity::EndToEnd, 128).unwrap(),
        &mesh,
        3,
    )
    .unwrap();
    let params = SimParams {
        cycles_limit: Some(1500),
        ..SimParams::default()
    };
    let s = simulate(&mesh, SubnetLayout::new(128, 4).unwrap(), VcConfig::default(), &trace, &p, &params).unwrap();
    assert!(s.flits_in_flight > 0);
    assert!(s.in_circuit_flits > 0);
    assert_eq!(s.flits_injected, s.flits_ejected + s.flits_in_flight);
    assert_eq!(s.buffer_events_on_cs_subnets(), 0);
    assert_eq!(s.cycles_simulated, 1500);
}

#[test]
fn idle_gaps_are_skipped_but_counted() {
    let mesh = mesh4();
    let trace = [packet(0, 0, 0, 1, PacketKind::Control), packet(1, 1_000_000, 1, 0, PacketKind::Control)];
    let s = simulate(&mesh, SubnetLayout::full_width(), VcConfig::default(), &trace, &CircuitPlan::empty(Granularity::EndToEnd, 0), &SimParams::default()).unwrap();
    assert_eq!(s.packets_ejected, 2);
    assert_eq!(s.cycles_simulated, 1_000_000 + 9 + 1);
    assert_eq!(s.subnets[0].buffer_cycles, s.cycles_simulated * 64 * 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_and_determinism(seed in 0u64..1000, rate in 0.02f64..0.5, subnets in prop::sample::select(vec![1u32, 2, 4, 8]), limit in 200u64..3000, r2r in any::<bool>()) {
        let mesh = mesh4();
        let trace = uniform_trace(&mesh, rate, seed, 2000);
        let layout = SubnetLayout::new(128, subnets).unwrap();
        let g = if r2r { Granularity::RouterToRouter } else { Granularity::EndToEnd };
        let prof = crate::traffic::profile(&trace, &mesh, g, 128).unwrap();
        let p = if subnets > 1 {
            crate::allocator::greedy_allocate(&prof, &mesh, layout.cs_subnets()).unwrap()
        } else {
            CircuitPlan::empty(g, 0)
        };
        let params = SimParams { seed, cycles_limit: Some(limit), ..SimParams::default() };
        let a = simulate(&mesh, layout, VcConfig::default(), &trace, &p, &params).unwrap();
        let b = simulate(&mesh, layout, VcConfig::default(), &trace, &p, &params).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.flits_injected, a.flits_ejected + a.flits_in_flight);
        prop_assert_eq!(a.buffer_events_on_cs_subnets(), 0);
        prop_assert!(a.max_vc_occupancy <= 4);
        prop_assert_eq!(a.order_violations, 0);
        prop_assert!(a.in_circuit_flits <= a.flits_injected);
    }
}
