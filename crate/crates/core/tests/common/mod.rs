// SPDX-License-Identifier: Apache-2.0

//! Independent reference models shared by the integration tests.
//!
//! Everything here works from the owned gate list and net names only, never
//! from the simulator's or timer's internal arrays.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use camoforge::netlist::Gate;
use camoforge::{parse_bench, GateKind, Netlist};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALL_BENCHMARKS: [&str; 11] = [
    "c17", "c432", "c499", "c880", "c1355", "c1908", "c2670", "c3540", "c5315", "c6288", "c7552",
];
pub const SWEEP_SET: [&str; 7] = ["c432", "c499", "c880", "c1908", "c2670", "c5315", "c7552"];

pub fn bench_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/iscas85")
}

pub fn load(name: &str) -> Netlist {
    let text = std::fs::read_to_string(bench_dir().join(format!("{name}.bench"))).unwrap();
    parse_bench(&text).unwrap()
}

const KINDS: [GateKind; 8] = [
    GateKind::And,
    GateKind::Nand,
    GateKind::Or,
    GateKind::Nor,
    GateKind::Xor,
    GateKind::Xnor,
    GateKind::Not,
    GateKind::Buff,
];

/// Random DAG with `n_pi` inputs and `n_gates` gates. With `camo`, about a
/// fifth of the gates are keyed blocks. The last gate is always an output
/// and every other net is an output with probability 1/4.
pub fn random_netlist(seed: u64, n_pi: usize, n_gates: usize, camo: bool) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<String> = (0..n_pi).map(|i| format!("i{i}")).collect();
    let mut nets = inputs.clone();
    let mut gates = Vec::with_capacity(n_gates);
    for g in 0..n_gates {
        let kind = if camo && rng.random_bool(0.2) {
            GateKind::Camo
        } else {
            *KINDS.choose(&mut rng).unwrap()
        };
        let arity = match kind {
            GateKind::Not | GateKind::Buff | GateKind::Camo => 1,
            GateKind::Xor | GateKind::Xnor => 2,
            _ => rng.random_range(2..=3),
        };
        let fanins: Vec<&str> = (0..arity)
            .map(|_| nets[rng.random_range(0..nets.len())].as_str())
            .collect();
        let id = format!("g{g}");
        gates.push(Gate::new(id.clone(), kind, &fanins));
        nets.push(id);
    }
    let mut outputs: Vec<String> = nets[..nets.len() - 1]
        .iter()
        .filter(|_| rng.random_bool(0.25))
        .cloned()
        .collect();
    outputs.push(nets.last().unwrap().clone());
    Netlist::new(inputs, outputs, gates).unwrap()
}

/// Recursive, memoized evaluation by net name. `key` maps block names to
/// their bit (true = inverter).
pub struct Oracle {
    gates: HashMap<String, Gate>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Oracle {
    pub fn new(nl: &Netlist) -> Self {
        Oracle {
            gates: nl.gates().into_iter().map(|g| (g.id.clone(), g)).collect(),
            inputs: nl.input_names().into_iter().map(String::from).collect(),
            outputs: nl.output_names().into_iter().map(String::from).collect(),
        }
    }

    pub fn eval(&self, key: &HashMap<String, bool>, vector: &[bool]) -> Vec<bool> {
        let mut memo: HashMap<&str, bool> = self
            .inputs
            .iter()
            .map(String::as_str)
            .zip(vector.iter().copied())
            .collect();
        self.outputs
            .iter()
            .map(|o| self.net(o, key, &mut memo))
            .collect()
    }

    fn net<'a>(
        &'a self,
        name: &'a str,
        key: &HashMap<String, bool>,
        memo: &mut HashMap<&'a str, bool>,
    ) -> bool {
        if let Some(&v) = memo.get(name) {
            return v;
        }
        let g = &self.gates[name];
        let ins: Vec<bool> = g.fanins.iter().map(|f| self.net(f, key, memo)).collect();
        let v = match g.kind {
            GateKind::And => ins.iter().all(|&b| b),
            GateKind::Nand => !ins.iter().all(|&b| b),
            GateKind::Or => ins.iter().any(|&b| b),
            GateKind::Nor => !ins.iter().any(|&b| b),
            GateKind::Xor => ins.iter().filter(|&&b| b).count() % 2 == 1,
            GateKind::Xnor => ins.iter().filter(|&&b| b).count() % 2 == 0,
            GateKind::Not => !ins[0],
            GateKind::Buff => ins[0],
            GateKind::Camo => ins[0] ^ key[name],
            k => panic!("unexpected {k}"),
        };
        memo.insert(name, v);
        v
    }
}

/// Input vector `idx` of an exhaustive enumeration, first input as MSB.
pub fn vector_of(idx: u64, width: usize) -> Vec<bool> {
    (0..width)
        .map(|i| idx >> (width - 1 - i) & 1 == 1)
        .collect()
}

/// Every input-to-output path as a name sequence, by depth-first search.
/// A path may stop at an output that also drives further logic.
pub fn all_paths(nl: &Netlist) -> Vec<Vec<String>> {
    let gates = nl.gates();
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for g in &gates {
        let mut seen = Vec::new();
        for f in &g.fanins {
            if !seen.contains(&f.as_str()) {
                seen.push(f.as_str());
                succ.entry(f.as_str()).or_default().push(g.id.as_str());
            }
        }
    }
    let outputs: Vec<&str> = nl.output_names();
    let mut paths = Vec::new();
    fn dfs<'a>(
        n: &'a str,
        stack: &mut Vec<&'a str>,
        succ: &HashMap<&'a str, Vec<&'a str>>,
        outputs: &[&str],
        paths: &mut Vec<Vec<String>>,
    ) {
        stack.push(n);
        if outputs.contains(&n) {
            paths.push(stack.iter().map(|s| s.to_string()).collect());
        }
        for &s in succ.get(n).map_or(&[][..], Vec::as_slice) {
            dfs(s, stack, succ, outputs, paths);
        }
        stack.pop();
    }
    for i in nl.input_names() {
        dfs(i, &mut Vec::new(), &succ, &outputs, &mut paths);
    }
    paths
}
