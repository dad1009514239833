mod common;

use common::conv_oracle;
use ina_noc::analytic::{self, LayerShape, MeshShape, PeMemory, Precision};
use ina_noc::dataflow::{
    gen_os_trace, gen_ws_trace, read_trace, split_weights, synthetic_chain, trace_volume, write_trace, EventKind,
    GenOptions, Mode, Schedule,
};
use ina_noc::exec::execute;
use ina_noc::noc::{NocConfig, PacketClass};
use ina_noc::workload;
use proptest::prelude::*;

fn mesh(n: u32, e: u32) -> MeshShape {
    MeshShape::new(n, e).unwrap()
}

fn small_opts(n: u32, e: u32, capacity_words: u64) -> GenOptions {
    let q = Precision::default();
    let mut o = GenOptions::new(mesh(n, e));
    o.mem = PeMemory::new(capacity_words * q.bits() as u64, q).unwrap();
    o
}

fn cfg(n: u32) -> NocConfig {
    NocConfig::default().with_n(n as u16)
}

fn count(s: &Schedule, kind: EventKind, class: PacketClass) -> usize {
    s.events().filter(|e| e.kind == kind && e.class == class).count()
}

#[test]
fn toy_two_filter_layer() {
    let layer = LayerShape::new("toy", 1, 6, 2, 1);
    let opts = small_opts(4, 1, 4);
    let s = gen_ws_trace(&layer, &opts, true).unwrap();
    assert_eq!(s.parts, 2);
    assert_eq!(s.rounds.len(), 1);
    assert_eq!(count(&s, EventKind::Psum, PacketClass::InaChain), 2);
    assert_eq!(count(&s, EventKind::Gather, PacketClass::Gather), 1);
    let res = execute(&s, &cfg(4), false).unwrap();
    assert_eq!(res.outputs, conv_oracle(&layer, opts.seed));
}

#[test]
fn alexnet_conv2_round_count() {
    let alex = workload::bundled("alexnet").unwrap();
    let conv2 = alex.layers.iter().find(|l| l.name == "CONV2").unwrap();
    let s = gen_ws_trace(conv2, &GenOptions::new(mesh(8, 1)), true).unwrap();
    assert_eq!(s.total_rounds, 4374);
    assert_eq!(s.rounds.len(), 4374);
}

#[test]
fn round_totals_match_analytic_model() {
    let q = Precision::default();
    let mem = PeMemory::default();
    for name in ["alexnet", "vgg16", "resnet50"] {
        for layer in workload::bundled(name).unwrap().layers {
            if !analytic::requires_ina(&layer, q, mem) {
                continue;
            }
            for e in [1, 2, 4, 8] {
                let m = mesh(8, e);
                let opts = GenOptions::new(m).with_cap(Some(1));
                match analytic::ina_rounds_multi_pe(&layer, m, q, mem) {
                    Ok(plan) => {
                        let s = gen_ws_trace(&layer, &opts, true).unwrap();
                        assert_eq!(Some(s.total_rounds), plan.rounds.count(), "{name} {} E={e}", layer.name);
                    }
                    Err(_) => assert!(gen_ws_trace(&layer, &opts, true).is_err()),
                }
            }
        }
    }
}

#[test]
fn single_part_layer_has_no_chains() {
    let layer = LayerShape::new("small", 3, 16, 10, 4);
    let opts = GenOptions::new(mesh(4, 2));
    let with = gen_ws_trace(&layer, &opts, true).unwrap();
    let without = gen_ws_trace(&layer, &opts, false).unwrap();
    assert_eq!(with.parts, 1);
    assert_eq!(count(&with, EventKind::Psum, PacketClass::InaChain), 0);
    assert_eq!(with.rounds, without.rounds);
    assert_eq!(trace_volume(&with), trace_volume(&without));
}

#[test]
fn partition_ten_elements() {
    let layer = LayerShape::new("ten", 1, 10, 1, 1);
    let opts = small_opts(4, 1, 4);
    let plan = split_weights(&layer, opts.q, opts.mem, opts.mesh).unwrap();
    // Brute force: greedily fill PEs of capacity 4.
    let mut expect = Vec::new();
    let mut lo = 0;
    while lo < 10 {
        let hi = (lo + 4).min(10);
        expect.push((lo, hi));
        lo = hi;
    }
    assert_eq!(plan.ranges, expect);
    let too_wide = LayerShape::new("wide", 1, 40, 1, 1);
    assert!(split_weights(&too_wide, opts.q, opts.mem, opts.mesh).is_err());
}

#[test]
fn os_toy_layer() {
    let layer = LayerShape::new("os", 1, 3, 1, 2);
    let opts = GenOptions::new(mesh(2, 1));
    let s = gen_os_trace(&layer, &opts).unwrap();
    assert_eq!(s.rounds.len(), 1);
    let pes: Vec<_> = s.events().filter(|e| e.kind == EventKind::Operand).map(|e| e.src).collect();
    assert_eq!(pes.len(), 4);
    let res = execute(&s, &cfg(2), false).unwrap();
    assert_eq!(res.outputs, conv_oracle(&layer, opts.seed));
}

#[test]
fn os_capped_has_no_chain_traffic() {
    let alex = workload::bundled("alexnet").unwrap();
    let conv5 = alex.layers.iter().find(|l| l.name == "CONV5").unwrap();
    let s = gen_os_trace(conv5, &GenOptions::new(mesh(8, 1)).with_cap(Some(10))).unwrap();
    assert_eq!(s.rounds.len(), 10);
    assert_eq!(trace_volume(&s).class(PacketClass::InaChain).packets, 0);
    for r in &s.rounds {
        assert!(r.events.iter().any(|e| e.kind == EventKind::Weight));
        assert!(r.events.iter().any(|e| e.kind == EventKind::Input));
    }
}

#[test]
fn weight_volume_independent_of_output_size() {
    let opts = GenOptions::new(mesh(4, 2));
    let words = |o| {
        let layer = LayerShape::new("w", 3, 200, 8, o);
        let s = gen_ws_trace(&layer, &opts, true).unwrap();
        s.events().filter(|e| e.kind == EventKind::Weight).map(|e| e.words as u64).sum::<u64>()
    };
    assert_eq!(words(4), words(9));
    // Two groups of rows, each loading all 8 filters once.
    let layer = LayerShape::new("w", 3, 200, 8, 4);
    let plan = split_weights(&layer, opts.q, opts.mem, opts.mesh).unwrap();
    assert_eq!(plan.parts(), 2);
    assert_eq!(words(4), 2 * 8 * plan.elements as u64);
}

#[test]
fn plain_mode_injects_more() {
    let layer = LayerShape::new("l", 3, 256, 12, 3);
    let opts = GenOptions::new(mesh(8, 1)).with_cap(Some(3));
    let ina = trace_volume(&gen_ws_trace(&layer, &opts, true).unwrap());
    let plain = trace_volume(&gen_ws_trace(&layer, &opts, false).unwrap());
    assert!(plain.ni_injects > ina.ni_injects);
    assert!(plain.ni_ejects > ina.ni_ejects);
}

#[test]
fn empty_schedule_volume_is_zero() {
    let mut s = gen_os_trace(&LayerShape::new("e", 1, 1, 1, 1), &GenOptions::new(mesh(2, 1))).unwrap();
    s.rounds.clear();
    let v = trace_volume(&s);
    assert_eq!(v.total(), Default::default());
    assert_eq!((v.ni_injects, v.ni_ejects), (0, 0));
}

#[test]
fn trace_file_round_trip() {
    let layer = LayerShape::new("rt", 3, 200, 9, 3);
    let opts = GenOptions::new(mesh(4, 2)).with_cap(Some(2)).with_stream_scale(8);
    for s in [
        gen_ws_trace(&layer, &opts, true).unwrap(),
        gen_ws_trace(&layer, &opts, false).unwrap(),
        gen_os_trace(&layer, &opts).unwrap(),
    ] {
        let mut buf = Vec::new();
        write_trace(&s, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains(&format!("# mode={}", s.mode)));
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}

#[test]
fn synthetic_chain_sums_operands() {
    let ops = [5u32, 7, u32::MAX, 11, 13];
    for ina in [true, false] {
        let s = synthetic_chain(4, &ops, mesh(8, 1), 128, ina).unwrap();
        let res = execute(&s, &cfg(8), false).unwrap();
        let expect = ops.iter().fold(0u32, |a, &b| a.wrapping_add(b));
        assert_eq!(res.chain_outputs.len(), 1);
        assert_eq!(res.chain_outputs[0].1, vec![expect]);
        let injects = res.stats.total.ni_inject;
        assert_eq!(injects, if ina { 1 } else { 5 });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Gathered outputs equal the direct convolution in every mode.
    #[test]
    fn modes_agree_with_convolution(
        r in 1u32..=3, c in 1u32..=6, f in 1u32..=9, o in 1u32..=4,
        n in 2u32..=4, e in 1u32..=3, cap in 2u64..=8, seed in any::<u64>(),
    ) {
        let layer = LayerShape::new("p", r, c, f, o);
        let mut opts = small_opts(n, e, cap).with_seed(seed);
        opts.stream_scale = 4;
        let oracle = conv_oracle(&layer, seed);
        let os = execute(&gen_os_trace(&layer, &opts).unwrap(), &cfg(n), false).unwrap();
        prop_assert_eq!(&os.outputs, &oracle);
        for mode in [Mode::WsIna, Mode::WsPlain] {
            match gen_ws_trace(&layer, &opts, mode.ina()) {
                Ok(s) => {
                    let res = execute(&s, &cfg(n), false).unwrap();
                    prop_assert_eq!(&res.outputs, &oracle, "{}", mode);
                }
                Err(_) => prop_assert!(analytic::pe_count(&layer, opts.q, opts.mem) > n as u64),
            }
        }
    }
}

/// Each plain hop ejects the packet (link into the NI, then the NI), adds in
/// the PE, and re-injects it through the NI and the local input pipeline.
/// In-network accumulation skips all of that. Holds for pipelines of four or
/// more stages; with three the in-router add no longer hides inside the
/// pipeline and costs the accumulating path one cycle.
#[test]
fn chain_savings_per_node() {
    for (ej, inj, router) in [(2, 2, 4), (3, 1, 4), (1, 4, 5), (1, 1, 6)] {
        let cfg =
            NocConfig { ni_eject_latency: ej, ni_inject_latency: inj, router_latency: router, ..Default::default() };
        let per_node = (ej + inj + router + 1) as u64 + ina_noc::exec::PE_ADD_LATENCY;
        for k in [1u32, 2, 4, 6] {
            let ops: Vec<u32> = (0..=k).collect();
            let run = |ina| execute(&synthetic_chain(k, &ops, mesh(8, 1), 128, ina).unwrap(), &cfg, false).unwrap();
            let saved = run(false).cycles - run(true).cycles;
            assert_eq!(saved, k as u64 * per_node, "k={k} eject={ej} inject={inj} router={router}");
        }
    }
}

/// In-network accumulation saves one NI inject and eject per accumulating
/// node and spends one add there, so it wins whenever the NI pair costs more
/// than the add. It also skips the re-injected packet's router work, so with
/// router events priced it wins beyond that bound too.
#[test]
fn chain_energy_follows_coefficients() {
    use ina_noc::power::{tally, EnergyCoefficients, RunMeta};
    let cfg = cfg(8);
    let ops = [3u32, 4, 5, 6];
    let with = execute(&synthetic_chain(3, &ops, mesh(8, 1), 128, true).unwrap(), &cfg, false).unwrap();
    let without = execute(&synthetic_chain(3, &ops, mesh(8, 1), 128, false).unwrap(), &cfg, false).unwrap();
    let e = |r: &ina_noc::exec::ExecResult, c: &EnergyCoefficients| tally(&r.stats, c, RunMeta::default()).total;
    let zero = EnergyCoefficients::default().scaled(0.0);
    for (ni, add) in [(2.0, 0.8), (1.0, 1.5), (0.5, 1.2), (0.3, 0.5), (0.5, 1.0)] {
        let only = EnergyCoefficients { ni_inject: ni, ni_eject: ni, ina_add: add, ..zero };
        assert_eq!(e(&with, &only) < e(&without, &only), 2.0 * ni > add, "ni={ni} add={add}");
        let full = EnergyCoefficients { ni_inject: ni, ni_eject: ni, ina_add: add, ..Default::default() };
        if 2.0 * ni > add {
            assert!(e(&with, &full) < e(&without, &full), "ni={ni} add={add}");
        }
    }
}
