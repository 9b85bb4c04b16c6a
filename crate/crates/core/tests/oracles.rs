// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{HashMap, HashSet};

use camoforge::device::DeviceConfig;
use camoforge::simulate::{eval, PackedVectors, Simulator};
use camoforge::timing::{path_delay, DelayTable, StaticTiming};
use camoforge::{GateKind, Key, KeyBits, Netlist, VectorSet};
use common::{all_paths, load, random_netlist, vector_of, Oracle};
use num_rational::Rational64;

fn key_map(key: &Key) -> HashMap<String, bool> {
    key.block_ids
        .iter()
        .cloned()
        .zip(key.bits.0.iter().copied())
        .collect()
}

fn check_exhaustive(nl: &Netlist, key: &Key) {
    let oracle = Oracle::new(nl);
    let map = key_map(key);
    let sim = Simulator::with_key(nl, key, &DeviceConfig::default()).unwrap();
    let width = nl.inputs().len();
    for idx in 0..1u64 << width {
        let v = vector_of(idx, width);
        assert_eq!(sim.eval(&v).unwrap(), oracle.eval(&map, &v), "vector {idx}");
    }
}

#[test]
fn c17_matches_truth_table() {
    let nl = load("c17");
    check_exhaustive(&nl, &Key::default());
    // Hand-derived rows: 22 = NAND(NAND(1,3), NAND(2, NAND(3,6))).
    let o = |bits: [bool; 5]| eval(&nl, &Key::default(), &bits).unwrap();
    assert_eq!(o([false; 5]), [false, false]);
    assert_eq!(o([true; 5]), [true, false]);
    assert_eq!(o([true, false, true, false, false]), [true, false]);
}

#[test]
fn random_keyed_netlists_match_oracle() {
    for seed in 0..50 {
        let n_pi = 1 + (seed as usize % 10);
        let nl = random_netlist(seed, n_pi, 8, true);
        let n_blocks = nl.camo_gates().len();
        for key_seed in 0..3u64 {
            let bits = KeyBits(
                (0..n_blocks)
                    .map(|i| (key_seed >> (i % 2)) & 1 == 1 || i as u64 == key_seed)
                    .collect(),
            );
            let key = Key::in_netlist_order(&nl, bits).unwrap();
            check_exhaustive(&nl, &key);
        }
    }
}

#[test]
fn exhaustive_packing_uses_msb_first_order() {
    let packed = PackedVectors::generate(VectorSet::Exhaustive, 6).unwrap();
    assert_eq!(packed.count, 64);
    for idx in [0usize, 1, 5, 32, 63] {
        assert_eq!(packed.vector(idx), vector_of(idx as u64, 6));
    }
}

fn oracle_delay<T: camoforge::scalar::Delay>(
    nl: &Netlist,
    t: &DelayTable<T>,
    path: &[String],
) -> T {
    path.iter().fold(T::zero(), |acc, n| {
        let k = nl.kind(nl.id(n).unwrap());
        if k == GateKind::Input {
            acc
        } else {
            acc + t.raw(k).unwrap() * t.scale()
        }
    })
}

fn check_top_k<T: camoforge::scalar::Delay + std::fmt::Debug>(
    nl: &Netlist,
    t: &DelayTable<T>,
    k: usize,
) {
    let paths = all_paths(nl);
    let mut delays: Vec<T> = paths.iter().map(|p| oracle_delay(nl, t, p)).collect();
    delays.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let report = StaticTiming::new(nl, t).unwrap().top_k(k).unwrap();
    let want = k.min(paths.len());
    assert_eq!(report.paths.len(), want);
    assert_eq!(report.critical_delay, delays[0]);
    let got: Vec<T> = report.paths.iter().map(|p| p.delay).collect();
    assert_eq!(got, delays[..want]);
    let all: HashSet<&Vec<String>> = paths.iter().collect();
    let mut seen = HashSet::new();
    for p in &report.paths {
        assert!(
            all.contains(&p.nets),
            "not an input-to-output path: {:?}",
            p.nets
        );
        assert!(seen.insert(p.nets.clone()), "duplicate path");
        assert_eq!(oracle_delay(nl, t, &p.nets), p.delay);
    }
    let sum = got.into_iter().fold(T::zero(), |a, b| a + b);
    assert_eq!(report.topk_sum, sum);
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn random_exact_table(seed: u64) -> DelayTable<Rational64> {
    let mut t = DelayTable::new(r(3), Rational64::new(7, 5));
    for (i, k) in GateKind::LOGIC.iter().enumerate() {
        if *k != GateKind::Camo {
            t.set(
                *k,
                Rational64::new(1 + ((seed + i as u64 * 7) % 11) as i64, 1 + (i as i64 % 3)),
            );
        }
    }
    t
}

#[test]
fn c17_top_100_is_every_path() {
    let nl = load("c17");
    assert_eq!(all_paths(&nl).len(), 11);
    check_top_k(&nl, &DelayTable::<f64>::standard(), 100);
    check_top_k(&nl, &random_exact_table(3), 100);
    check_top_k(&nl, &random_exact_table(3), 4);
}

#[test]
fn random_netlists_top_k_match_enumeration() {
    for seed in 0..40 {
        let nl = random_netlist(1000 + seed, 2 + seed as usize % 6, 12, false);
        let t = random_exact_table(seed);
        for k in [1, 3, 10, 1000] {
            check_top_k(&nl, &t, k);
        }
    }
}

#[test]
fn small_benchmarks_top_k_match_enumeration() {
    for name in [
        "c17", "c432", "c499", "c880", "c1355", "c1908", "c2670", "c3540", "c5315", "c7552",
    ] {
        let nl = load(name);
        if camoforge::netlist::count_io_paths(&nl) > 10_000 {
            continue;
        }
        check_top_k(&nl, &DelayTable::<Rational64>::standard(), 100);
    }
}

#[test]
fn uniform_scaling_scales_every_delay() {
    let nl = load("c880");
    let base = DelayTable::<Rational64>::standard();
    let c = Rational64::new(9, 4);
    let scaled = base.clone().with_scale(base.scale() * c);
    let a = StaticTiming::new(&nl, &base).unwrap().top_k(50).unwrap();
    let b = StaticTiming::new(&nl, &scaled).unwrap().top_k(50).unwrap();
    assert_eq!(b.critical_delay, a.critical_delay * c);
    assert_eq!(b.topk_sum, a.topk_sum * c);
    for (x, y) in a.paths.iter().zip(&b.paths) {
        assert_eq!(y.delay, x.delay * c);
    }
}

#[test]
fn path_delay_is_the_sum_of_gate_delays() {
    let nl = load("c432");
    let t = random_exact_table(11);
    for p in all_paths(&nl).iter().step_by(997) {
        assert_eq!(path_delay(&nl, &t, p).unwrap(), oracle_delay(&nl, &t, p));
    }
}
