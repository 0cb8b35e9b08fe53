//! Acceptance criteria 1-9. Runs as a plain binary so every criterion prints
//! its PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hsnoc::allocator::{
    enumerate_oracle, ga_search, greedy_allocate, plan_weight, CandidateSet, Circuit, CircuitPlan, GaParams,
    ORACLE_PAIR_LIMIT,
};
use hsnoc::orchestrator::{
    run_adaptive, run_experiment, run_static, AllocatorKind, ExperimentConfig, MeshPreset, Mode, Prepared,
    TrafficSource,
};
use hsnoc::sim::{
    run, simulate, sweep_injection, Fabric, SimParams, SubnetLayout, SweepParams, VcConfig,
};
use hsnoc::topology::{enumerate_pairs, Granularity, MeshConfig, NodeId};
use hsnoc::traffic::{
    append_shifted, designated_pairs, generate, PacketKind, PacketSizes, Pattern, SyntheticSpec, TrafficEvent,
    TrafficProfile,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn circuit_timing() -> Outcome {
    let start = Instant::now();
    let mesh = MeshConfig::uniform(4, 4).unwrap();
    let layout = SubnetLayout::default();
    let mut seen = Vec::new();
    let mut ok = true;
    for h in 1..=6u32 {
        let x = h.min(3);
        let dst = mesh.router_at(x, h - x).0;
        let mut plan = CircuitPlan::empty(Granularity::EndToEnd, 1);
        plan.subnets[0].push(Circuit { src: 0, dst });
        let ev = TrafficEvent {
            inject_cycle: 0,
            src: NodeId(0),
            dst: NodeId(dst),
            class: PacketSizes::default().class(PacketKind::Data),
            packet_id: 0,
        };
        let params = SimParams {
            record_flits: true,
            ..SimParams::default()
        };
        let sim = run(&mesh, layout, VcConfig::default(), &[ev], &plan, &params).unwrap();
        let recs = sim.flit_records();
        let want = 2 * h as u64 + 1;
        let all_exact = !recs.is_empty()
            && recs.iter().all(|r| r.eject_cycle - r.inject_cycle == want && r.hops == h)
            && recs.iter().map(|r| r.eject_cycle).min() == Some(want);
        ok &= all_exact && sim.stats().in_circuit_flits == recs.len() as u64;
        seen.push(recs.iter().map(|r| r.eject_cycle - r.inject_cycle).max().unwrap_or(0));
    }
    let elapsed = start.elapsed();
    ok &= seen[2] == 7 && elapsed < Duration::from_secs(1);
    outcome(ok, format!("latencies for h=1..6: {seen:?} (want 2h+1), {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 2, 9

struct Instance {
    greedy: u64,
    ga: u64,
    oracle: u64,
    trace_monotone: bool,
}

fn random_router_profile(rng: &mut ChaCha8Rng, mesh: &MeshConfig) -> TrafficProfile {
    let mut pairs = enumerate_pairs(mesh, Granularity::RouterToRouter);
    pairs.shuffle(rng);
    let used = rng.gen_range(pairs.len() / 2..=pairs.len());
    let mut p = TrafficProfile::new(Granularity::RouterToRouter);
    for &(s, d) in &pairs[..used] {
        let hops = mesh.manhattan(hsnoc::topology::RouterId(s), hsnoc::topology::RouterId(d));
        p.add(s, d, rng.gen_range(1..200), hops);
    }
    p.top_pairs(16)
}

fn battery() -> &'static Vec<Instance> {
    static CELL: OnceLock<Vec<Instance>> = OnceLock::new();
    CELL.get_or_init(|| {
        (0..50u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(0xACCE + i);
                let mesh = if i % 2 == 0 {
                    MeshConfig::uniform(2, 2).unwrap()
                } else {
                    MeshConfig::uniform(2, 3).unwrap()
                };
                let profile = random_router_profile(&mut rng, &mesh);
                let k = 1 + (i as usize / 2) % 2;
                let greedy = plan_weight(&greedy_allocate(&profile, &mesh, k).unwrap(), &profile).unwrap();
                let oracle = plan_weight(
                    &enumerate_oracle(&profile, &mesh, k, ORACLE_PAIR_LIMIT).unwrap(),
                    &profile,
                )
                .unwrap();
                let set = CandidateSet::from_profile(&profile, &mesh).unwrap();
                let params = GaParams {
                    generations: 500,
                    seed: i,
                    ..GaParams::default()
                };
                let out = ga_search(&set, k, &params).unwrap();
                let ga = plan_weight(&out.plan, &profile).unwrap();
                assert_eq!(ga, out.best_fitness());
                Instance {
                    greedy,
                    ga,
                    oracle,
                    trace_monotone: out.best_fitness_trace.windows(2).all(|w| w[0] <= w[1])
                        && out.best_fitness_trace.len() == 501,
                }
            })
            .collect()
    })
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let b = battery();
    let ordered = b.iter().filter(|r| r.greedy <= r.ga && r.ga <= r.oracle).count();
    let optimal = b.iter().filter(|r| r.ga == r.oracle).count();
    let elapsed = start.elapsed();
    outcome(
        ordered == b.len() && optimal * 100 >= 80 * b.len() && elapsed < Duration::from_secs(300),
        format!(
            "greedy <= GA <= oracle in {ordered}/{}, GA optimal in {optimal}/{} ({elapsed:.2?})",
            b.len(),
            b.len()
        ),
    )
}

fn ga_monotone() -> Outcome {
    let b = battery();
    let monotone = b.iter().filter(|r| r.trace_monotone).count();
    outcome(
        monotone == b.len(),
        format!("non-decreasing best-fitness trace in {monotone}/{} GA runs", b.len()),
    )
}

// ---------------------------------------------------------------- 3

/// One row of five routers: A = 0->2, B = 1->3, C = 2->4, two hops each.
/// B shares a link with both A and C.
fn abc(weights: [u64; 3]) -> (MeshConfig, TrafficProfile) {
    let mesh = MeshConfig::uniform(5, 1).unwrap();
    let mut p = TrafficProfile::new(Granularity::RouterToRouter);
    for ((s, d), w) in [(0, 2), (1, 3), (2, 4)].into_iter().zip(weights) {
        p.add(s, d, w, 2);
    }
    (mesh, p)
}

fn weights(profile: &TrafficProfile, mesh: &MeshConfig, k: usize) -> (u64, u64, CircuitPlan) {
    let g = greedy_allocate(profile, mesh, k).unwrap();
    let o = enumerate_oracle(profile, mesh, k, ORACLE_PAIR_LIMIT).unwrap();
    (plan_weight(&g, profile).unwrap(), plan_weight(&o, profile).unwrap(), o)
}

fn greedy_witness() -> Outcome {
    // Flit counts are half the weights since every pair spans two hops.
    let (mesh, p) = abc([15, 10, 5]);
    let (g, o, plan) = weights(&p, &mesh, 1);
    let a_c: BTreeSet<_> = [(0, 0, 2), (0, 2, 4)].into_iter().collect();
    let mut ok = g == 40 && o == 40 && plan.assignments() == a_c;
    let mut detail = format!("A/B/C k=1: greedy {g}, oracle {o}");

    let (mesh, p) = abc([25, 20, 10]);
    let (g2, o2, _) = weights(&p, &mesh, 1);
    ok &= g2 <= o2;
    detail += &format!("; doubled variant A=50,B=40,C=20: greedy {g2}, oracle {o2}");

    let mut mid = TrafficProfile::new(Granularity::RouterToRouter);
    mid.add(1, 3, 15, 2);
    mid.add(0, 2, 10, 2);
    mid.add(2, 4, 10, 2);
    let (g3, o3, _) = weights(&mid, &mesh, 1);
    ok &= g3 == 30 && o3 == 40;
    detail += &format!("; middle-heavy: greedy {g3} < oracle {o3}");

    let mut worse = 0;
    let mut never_above = true;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3171 + i);
        let mesh = MeshConfig::uniform(2, 3).unwrap();
        let profile = random_router_profile(&mut rng, &mesh);
        let (g, o, _) = weights(&profile, &mesh, 1);
        never_above &= g <= o;
        worse += (g < o) as usize;
    }
    ok &= worse >= 1 && never_above;
    detail += &format!("; random battery: greedy < oracle in {worse}/50");
    outcome(ok, detail)
}

// ---------------------------------------------------------------- 4

fn fig1_shape() -> Outcome {
    let start = Instant::now();
    let mesh = MeshConfig::uniform(4, 4).unwrap();
    let spec = SyntheticSpec {
        pattern: Pattern::UniformRandom,
        ..SyntheticSpec::default()
    };
    let rates = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let params = SweepParams {
        cycles: 10_000,
        drain_cycles: 10_000,
        ..SweepParams::default()
    };
    let vc_fabric = Fabric::Network {
        layout: SubnetLayout::full_width(),
        plan: CircuitPlan::empty(Granularity::EndToEnd, 0),
    };
    let cs_fabric = Fabric::CircuitOnly { width_bits: 128 };
    let vc = sweep_injection(&mesh, &vc_fabric, VcConfig::default(), &spec, &rates, 7, &params).unwrap();
    let cs = sweep_injection(&mesh, &cs_fabric, VcConfig::default(), &spec, &rates, 7, &params).unwrap();
    let vc_sat = vc.saturation_rate().unwrap_or(f64::INFINITY);
    let cs_sat = cs.saturation_rate().unwrap_or(f64::INFINITY);
    let cs_low = cs.points[0].mean_latency;
    let elapsed = start.elapsed();
    outcome(
        cs_sat < vc_sat && cs_low < vc.unloaded_latency && elapsed < Duration::from_secs(600),
        format!(
            "saturation: circuit {cs_sat}, VC {vc_sat}; circuit latency at {} = {cs_low:.2} vs VC unloaded {:.2} ({elapsed:.2?})",
            rates[0], vc.unloaded_latency
        ),
    )
}

// ---------------------------------------------------------------- 5

fn regular_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.seed = seed;
    cfg.traffic.cycles = 20_000;
    cfg.traffic.synthetic = SyntheticSpec {
        pattern: Pattern::RegularMix,
        regularity: 0.9,
        designated_pairs: 8,
        injection_rate: 0.05,
        ..SyntheticSpec::default()
    };
    cfg
}

fn energy_direction() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in 1..=3 {
        let mut frac = Vec::new();
        let mut norm4 = f64::NAN;
        for n in [2u32, 4, 8] {
            let mut cfg = regular_config(seed);
            cfg.layout.subnet_count = n;
            let exp = run_experiment(&cfg).unwrap();
            frac.push(exp.report.summary.in_circuit_fraction);
            if n == 4 {
                norm4 = exp.report.energy.unwrap().normalized_to_baseline.unwrap();
            }
        }
        ok &= norm4 < 1.0 && frac[2] > frac[0];
        detail.push(format!(
            "seed {seed}: 4-subnet energy {norm4:.3}, in-circuit 2/8 subnets {:.1}%/{:.1}%",
            100.0 * frac[0],
            100.0 * frac[2]
        ));
    }
    outcome(ok, detail.join("; "))
}

// ---------------------------------------------------------------- 6

fn r2r_coverage() -> Outcome {
    let results: Vec<(u64, u64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = regular_config(100 + seed);
            cfg.mesh.preset = MeshPreset::Cmp16_51ni;
            cfg.traffic.cycles = 5_000;
            cfg.traffic.synthetic.regularity = 0.7;
            cfg.traffic.synthetic.designated_pairs = 16;
            cfg.experiment.compare_baseline = false;
            let base = Prepared::new(&cfg).unwrap();
            let mut counts = [0u64; 2];
            for (slot, g) in [Granularity::EndToEnd, Granularity::RouterToRouter].into_iter().enumerate() {
                let mut p = base.clone();
                p.cfg.experiment.granularity = g;
                counts[slot] = run_static(&mut p).unwrap().production.stats.in_circuit_flits;
            }
            (counts[0], counts[1])
        })
        .collect();
    let held = results.iter().filter(|(e, r)| r >= e).count();
    let strict = results.iter().filter(|(e, r)| r > e).count();
    let (e, r): (u64, u64) = results.iter().fold((0, 0), |a, x| (a.0 + x.0, a.1 + x.1));
    outcome(
        held == results.len(),
        format!("r2r >= e2e on {held}/20 seeds ({strict} strictly), in-circuit flits e2e {e} vs r2r {r}"),
    )
}

// ---------------------------------------------------------------- 7

fn random_config(rng: &mut ChaCha8Rng) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.mesh.width = rng.gen_range(2..=5);
    cfg.mesh.height = rng.gen_range(1..=4);
    if rng.gen_bool(0.3) {
        let routers = (cfg.mesh.width * cfg.mesh.height) as usize;
        cfg.mesh.ni_per_router = Some((0..routers).map(|_| rng.gen_range(1..=3)).collect());
    }
    cfg.layout.subnet_count = *[1u32, 2, 4, 8].choose(rng).unwrap();
    cfg.vc = VcConfig {
        vcs_per_vnet: rng.gen_range(1..=4),
        vnets: rng.gen_range(1..=3),
        buffer_depth_flits: rng.gen_range(1..=5),
        pipeline_stages: rng.gen_range(3..=5),
        link_cycles: rng.gen_range(1..=2),
    };
    cfg.experiment.mode = if cfg.layout.subnet_count == 1 {
        Mode::BaselineVc
    } else if rng.gen_bool(0.3) {
        Mode::AdaptiveHybrid
    } else {
        Mode::StaticHybrid
    };
    cfg.experiment.granularity = if rng.gen_bool(0.5) {
        Granularity::EndToEnd
    } else {
        Granularity::RouterToRouter
    };
    cfg.experiment.allocator = if rng.gen_bool(0.8) { AllocatorKind::Greedy } else { AllocatorKind::Ga };
    cfg.ga.generations = 30;
    cfg.ga.seed = rng.gen();
    cfg.experiment.seed = rng.gen();
    cfg.experiment.epoch_cycles = 500;
    cfg.experiment.config_period_cycles = Some(rng.gen_range(0..100));
    cfg.experiment.gating = rng.gen_bool(0.8);
    cfg.traffic.source = TrafficSource::Synthetic;
    cfg.traffic.cycles = rng.gen_range(200..1500);
    cfg.traffic.synthetic = SyntheticSpec {
        pattern: *[Pattern::UniformRandom, Pattern::Permutation, Pattern::Hotspot, Pattern::RegularMix]
            .choose(rng)
            .unwrap(),
        injection_rate: rng.gen_range(0.01..0.4),
        regularity: rng.gen_range(0.0..=1.0),
        designated_pairs: rng.gen_range(1..12),
        ..SyntheticSpec::default()
    };
    cfg
}

fn conservation_and_determinism() -> Outcome {
    let start = Instant::now();
    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC0_5E + i);
            let cfg = random_config(&mut rng);
            if cfg.mesh.build().unwrap().ni_count() < 2 {
                return None;
            }
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            let s = &a.report.stats;
            let mut problems = Vec::new();
            if a.report.to_toml() != b.report.to_toml() {
                problems.push("reports differ");
            }
            if s.flits_injected != s.flits_ejected + s.flits_in_flight {
                problems.push("drained run does not conserve flits");
            }
            if s.buffer_events_on_cs_subnets() != 0 {
                problems.push("buffer events on a CS subnet");
            }
            // Cut the hybrid run short so flits are still in flight.
            let mesh = cfg.mesh.build().unwrap();
            let trace = cfg.load_traffic(&mesh).unwrap().0;
            let plan = a
                .plan
                .clone()
                .unwrap_or_else(|| CircuitPlan::empty(cfg.experiment.granularity, cfg.layout.cs_subnets()));
            let params = SimParams {
                seed: cfg.experiment.seed,
                cycles_limit: Some(cfg.traffic.cycles / 2 + 1),
                gating: cfg.experiment.gating,
                ..SimParams::default()
            };
            let cut = simulate(&mesh, cfg.layout, cfg.vc, &trace, &plan, &params).unwrap();
            if cut.flits_injected != cut.flits_ejected + cut.flits_in_flight {
                problems.push("cut-off run does not conserve flits");
            }
            if cut.buffer_events_on_cs_subnets() != 0 {
                problems.push("buffer events on a CS subnet (cut-off run)");
            }
            if cut != simulate(&mesh, cfg.layout, cfg.vc, &trace, &plan, &params).unwrap() {
                problems.push("cut-off stats differ between equal seeds");
            }
            (!problems.is_empty()).then(|| format!("config {i}: {}", problems.join(", ")))
        })
        .collect();
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(600),
        if failures.is_empty() {
            format!("100 random configs conserve flits, keep CS subnets bufferless, repeat bit for bit ({elapsed:.2?})")
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 8

fn adaptive_recovery() -> Outcome {
    const EPOCH: u64 = 10_000;
    let mesh = MeshConfig::uniform(4, 4).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, b) in [(11u64, 12u64), (21, 22), (31, 32), (41, 42), (51, 52)] {
        let spec = SyntheticSpec {
            pattern: Pattern::RegularMix,
            regularity: 0.9,
            designated_pairs: 6,
            injection_rate: 0.08,
            ..SyntheticSpec::default()
        };
        let old: BTreeSet<_> = designated_pairs(&mesh, 6, a).into_iter().map(|(s, d)| (s.0, d.0)).collect();
        let new: BTreeSet<_> = designated_pairs(&mesh, 6, b).into_iter().map(|(s, d)| (s.0, d.0)).collect();
        let fresh: Vec<_> = new.difference(&old).copied().collect();
        let mut trace = generate(&spec, &mesh, a, 3 * EPOCH).unwrap();
        append_shifted(&mut trace, &generate(&spec, &mesh, b, 3 * EPOCH).unwrap(), 3 * EPOCH);

        let mut cfg = ExperimentConfig::default();
        cfg.experiment.mode = Mode::AdaptiveHybrid;
        cfg.experiment.epoch_cycles = EPOCH;
        cfg.layout.subnet_count = 4;
        let mut p = Prepared::with_trace(&cfg, trace).unwrap();
        let out = run_adaptive(&mut p).unwrap();
        let f: Vec<f64> = out.epochs.iter().map(|e| e.stats.in_circuit_fraction()).collect();
        // Epoch 3 starts with the flip; epoch 4 is the first planned from post-flip traffic.
        let post_plan = &out.epochs[4].plan;
        let hit = fresh.iter().filter(|&&(s, d)| post_plan.contains_pair(s, d)).count();
        let recovered = f[4] >= 0.8 * f[2];
        ok &= out.epochs.len() == 6 && hit > 0 && recovered;
        detail.push(format!(
            "seeds {a}/{b}: {hit}/{} new hot pairs in the post-flip plan, in-circuit {:.1}% -> {:.1}% -> {:.1}%",
            fresh.len(),
            100.0 * f[2],
            100.0 * f[3],
            100.0 * f[4]
        ));
    }
    outcome(ok, detail.join("; "))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("circuit timing", circuit_timing),
        ("allocator oracle equivalence", oracle_equivalence),
        ("greedy suboptimality witness", greedy_witness),
        ("latency-injection shape", fig1_shape),
        ("directional energy", energy_direction),
        ("r2r coverage >= e2e", r2r_coverage),
        ("conservation and determinism", conservation_and_determinism),
        ("adaptive correctness", adaptive_recovery),
        ("GA monotonicity", ga_monotone),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += !result.pass as usize;
        println!("{verdict} criterion {n} ({name}, {:.1?}): {}", start.elapsed(), result.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
