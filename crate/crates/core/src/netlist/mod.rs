// SPDX-License-Identifier: Apache-2.0

//! Combinational gate-level netlists.
//!
//! A [`Netlist`] is immutable once built. Nets are numbered in topological
//! order: primary inputs first (in declaration order), then gates such that
//! every fanin has a smaller [`NetId`] than the gate it feeds. Analyses can
//! therefore run a single forward (or reverse) sweep over `0..len()`.

mod bench;
mod json;
mod levels;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{parse_bench, write_bench};
pub use json::NetlistDump;
pub use levels::{count_io_paths, enumerate_paths, levelize, LevelMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("duplicate net `{name}`{}", fmt_line(*.line))]
    DuplicateNet { name: String, line: Option<usize> },
    #[error("net `{name}` used by `{user}` is never driven")]
    UndefinedNet { name: String, user: String },
    #[error("{kind} gate `{gate}` has {got} fanins")]
    Arity {
        gate: String,
        kind: GateKind,
        got: usize,
    },
    #[error("netlist is cyclic through `{net}`")]
    Cycle { net: String },
    #[error("invalid net name `{0}`")]
    InvalidName(String),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" on line {l}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Input,
    Output,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
    /// Keyed buffer/inverter block. Carries no mode; the mode lives in the key.
    Camo,
}

impl GateKind {
    pub const LOGIC: [GateKind; 9] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buff,
        GateKind::Camo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::Input => "INPUT",
            GateKind::Output => "OUTPUT",
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buff => "BUFF",
            GateKind::Camo => "CAMO",
        }
    }

    pub fn is_logic(self) -> bool {
        !matches!(self, GateKind::Input | GateKind::Output)
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buff | GateKind::Camo => n == 1,
            GateKind::Xor | GateKind::Xnor => n == 2,
            GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => n >= 2,
            GateKind::Input | GateKind::Output => false,
        }
    }

    /// Evaluates the gate on 64 packed patterns at once. `Camo` is not a
    /// fixed function and must be resolved by the caller.
    #[inline]
    pub fn eval_words(self, ins: &[u64]) -> u64 {
        match self {
            GateKind::And => ins.iter().fold(!0, |a, &b| a & b),
            GateKind::Nand => !ins.iter().fold(!0, |a, &b| a & b),
            GateKind::Or => ins.iter().fold(0, |a, &b| a | b),
            GateKind::Nor => !ins.iter().fold(0, |a, &b| a | b),
            GateKind::Xor => ins.iter().fold(0, |a, &b| a ^ b),
            GateKind::Xnor => !ins.iter().fold(0, |a, &b| a ^ b),
            GateKind::Not => !ins[0],
            GateKind::Buff => ins[0],
            GateKind::Camo | GateKind::Input | GateKind::Output => {
                panic!("{self} has no fixed boolean function")
            }
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "INPUT" => GateKind::Input,
            "OUTPUT" => GateKind::Output,
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUFF" | "BUF" => GateKind::Buff,
            "CAMO" => GateKind::Camo,
            other => return Err(format!("unknown gate type `{other}`")),
        })
    }
}

/// Index of a net inside one [`Netlist`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub u32);

impl NetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Owned gate description, the unit of netlist construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: String,
    pub kind: GateKind,
    pub fanins: Vec<String>,
}

impl Gate {
    pub fn new(id: impl Into<String>, kind: GateKind, fanins: &[&str]) -> Self {
        Gate {
            id: id.into(),
            kind,
            fanins: fanins.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub(crate) fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    names: Vec<String>,
    kinds: Vec<GateKind>,
    fanins: Vec<Vec<NetId>>,
    fanouts: Vec<Vec<(NetId, usize)>>,
    succ: Vec<Vec<NetId>>,
    index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    is_output: Vec<bool>,
}

impl Netlist {
    /// Builds and validates a netlist. Gates may be given in any order.
    pub fn new(
        inputs: Vec<String>,
        outputs: Vec<String>,
        gates: Vec<Gate>,
    ) -> Result<Netlist, NetlistError> {
        let mut declared: HashMap<&str, usize> = HashMap::new();
        for name in inputs.iter().chain(gates.iter().map(|g| &g.id)) {
            if !valid_name(name) {
                return Err(NetlistError::InvalidName(name.clone()));
            }
            if declared.insert(name.as_str(), declared.len()).is_some() {
                return Err(NetlistError::DuplicateNet {
                    name: name.clone(),
                    line: None,
                });
            }
        }
        for gate in &gates {
            if !gate.kind.arity_ok(gate.fanins.len()) {
                return Err(NetlistError::Arity {
                    gate: gate.id.clone(),
                    kind: gate.kind,
                    got: gate.fanins.len(),
                });
            }
            for f in &gate.fanins {
                if !declared.contains_key(f.as_str()) {
                    return Err(NetlistError::UndefinedNet {
                        name: f.clone(),
                        user: gate.id.clone(),
                    });
                }
            }
        }
        let mut seen_outputs = HashMap::new();
        for o in &outputs {
            if !declared.contains_key(o.as_str()) {
                return Err(NetlistError::UndefinedNet {
                    name: o.clone(),
                    user: "OUTPUT".into(),
                });
            }
            if seen_outputs.insert(o.as_str(), ()).is_some() {
                return Err(NetlistError::DuplicateNet {
                    name: o.clone(),
                    line: None,
                });
            }
        }

        // Kahn's algorithm; ties resolved by declaration order so the
        // numbering is a pure function of the input.
        let n_in = inputs.len();
        let gate_slot = |name: &str| declared[name];
        let mut pending: Vec<usize> = gates
            .iter()
            .map(|g| g.fanins.iter().filter(|f| gate_slot(f) >= n_in).count())
            .collect();
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
        for (gi, g) in gates.iter().enumerate() {
            for f in &g.fanins {
                let s = gate_slot(f);
                if s >= n_in {
                    users[s - n_in].push(gi);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..gates.len()).filter(|&g| pending[g] == 0).collect();
        let mut order = Vec::with_capacity(gates.len());
        while let Some(g) = ready.pop_first() {
            order.push(g);
            for &u in &users[g] {
                pending[u] -= 1;
                if pending[u] == 0 {
                    ready.insert(u);
                }
            }
        }
        if order.len() != gates.len() {
            let stuck = (0..gates.len()).find(|&g| pending[g] > 0).unwrap();
            return Err(NetlistError::Cycle {
                net: gates[stuck].id.clone(),
            });
        }

        let total = n_in + gates.len();
        let mut names = Vec::with_capacity(total);
        let mut kinds = Vec::with_capacity(total);
        names.extend(inputs.iter().cloned());
        kinds.extend(std::iter::repeat_n(GateKind::Input, n_in));
        for &g in &order {
            names.push(gates[g].id.clone());
            kinds.push(gates[g].kind);
        }
        let index: HashMap<String, NetId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NetId(i as u32)))
            .collect();
        let mut fanins = vec![Vec::new(); n_in];
        for &g in &order {
            fanins.push(gates[g].fanins.iter().map(|f| index[f]).collect());
        }
        let mut fanouts = vec![Vec::new(); total];
        for (sink, fi) in fanins.iter().enumerate() {
            for (pin, &d) in fi.iter().enumerate() {
                fanouts[d.index()].push((NetId(sink as u32), pin));
            }
        }
        let succ = fanouts
            .iter()
            .map(|fo| {
                let mut v: Vec<NetId> = fo.iter().map(|&(s, _)| s).collect();
                v.dedup();
                v
            })
            .collect();
        let inputs: Vec<NetId> = (0..n_in).map(|i| NetId(i as u32)).collect();
        let outputs: Vec<NetId> = outputs.iter().map(|o| index[o]).collect();
        let mut is_output = vec![false; total];
        for o in &outputs {
            is_output[o.index()] = true;
        }

        let nl = Netlist {
            names,
            kinds,
            fanins,
            fanouts,
            succ,
            index,
            inputs,
            outputs,
            is_output,
        };
        for d in nl.dangling_nets() {
            log::warn!("net `{}` does not reach any primary output", nl.name(d));
        }
        Ok(nl)
    }

    pub fn empty() -> Netlist {
        Netlist::new(Vec::new(), Vec::new(), Vec::new()).expect("empty netlist is valid")
    }

    /// Number of nets (primary inputs plus gates).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn gate_count(&self) -> usize {
        self.names.len() - self.inputs.len()
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|&i| self.name(i)).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|&i| self.name(i)).collect()
    }

    pub fn name(&self, id: NetId) -> &str {
        &self.names[id.index()]
    }

    pub fn kind(&self, id: NetId) -> GateKind {
        self.kinds[id.index()]
    }

    pub fn fanins(&self, id: NetId) -> &[NetId] {
        &self.fanins[id.index()]
    }

    /// Consumers of a net as `(sink gate, fanin pin)`.
    pub fn fanouts(&self, id: NetId) -> &[(NetId, usize)] {
        &self.fanouts[id.index()]
    }

    /// Distinct sink gates of a net, in increasing [`NetId`] order.
    pub fn successors(&self, id: NetId) -> &[NetId] {
        &self.succ[id.index()]
    }

    pub fn id(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<NetId, NetlistError> {
        self.id(name)
            .ok_or_else(|| NetlistError::UnknownNet(name.to_string()))
    }

    pub fn is_input(&self, id: NetId) -> bool {
        id.index() < self.inputs.len()
    }

    pub fn is_output(&self, id: NetId) -> bool {
        self.is_output[id.index()]
    }

    pub fn net_ids(&self) -> impl DoubleEndedIterator<Item = NetId> + ExactSizeIterator {
        (0..self.names.len() as u32).map(NetId)
    }

    /// Gate nets in topological order.
    pub fn gate_ids(&self) -> impl DoubleEndedIterator<Item = NetId> + ExactSizeIterator {
        (self.inputs.len() as u32..self.names.len() as u32).map(NetId)
    }

    /// `CAMO` gates in topological order.
    pub fn camo_gates(&self) -> Vec<NetId> {
        self.gate_ids()
            .filter(|&g| self.kind(g) == GateKind::Camo)
            .collect()
    }

    /// Owned gate list in topological order.
    pub fn gates(&self) -> Vec<Gate> {
        self.gate_ids()
            .map(|g| Gate {
                id: self.name(g).to_string(),
                kind: self.kind(g),
                fanins: self
                    .fanins(g)
                    .iter()
                    .map(|&f| self.name(f).to_string())
                    .collect(),
            })
            .collect()
    }

    /// Nets with no path to any primary output.
    pub fn dangling_nets(&self) -> Vec<NetId> {
        let live = self.reaches_output();
        self.net_ids().filter(|n| !live[n.index()]).collect()
    }

    /// `true` for nets that reach some primary output.
    pub fn reaches_output(&self) -> Vec<bool> {
        let mut live = self.is_output.clone();
        for n in self.net_ids().rev() {
            if !live[n.index()] {
                live[n.index()] = self.fanouts(n).iter().any(|(s, _)| live[s.index()]);
            }
        }
        live
    }

    /// Forward transitive closure (including `from`) as a bit mask over nets.
    pub fn forward_cone(&self, from: NetId) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut queue = VecDeque::from([from]);
        mark[from.index()] = true;
        while let Some(n) = queue.pop_front() {
            for &(s, _) in self.fanouts(n) {
                if !mark[s.index()] {
                    mark[s.index()] = true;
                    queue.push_back(s);
                }
            }
        }
        mark
    }

    /// Backward transitive closure (including `to`).
    pub fn backward_cone(&self, to: NetId) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut queue = VecDeque::from([to]);
        mark[to.index()] = true;
        while let Some(n) = queue.pop_front() {
            for &f in self.fanins(n) {
                if !mark[f.index()] {
                    mark[f.index()] = true;
                    queue.push_back(f);
                }
            }
        }
        mark
    }

    /// Name that does not collide with any existing net.
    pub fn fresh_name(&self, stem: &str) -> String {
        if self.id(stem).is_none() {
            return stem.to_string();
        }
        (1..)
            .map(|i| format!("{stem}_{i}"))
            .find(|n| self.id(n).is_none())
            .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn topological_numbering() {
        let nl = Netlist::new(
            s(&["a", "b"]),
            s(&["y"]),
            vec![
                Gate::new("y", GateKind::And, &["m", "b"]),
                Gate::new("m", GateKind::Not, &["a"]),
            ],
        )
        .unwrap();
        let m = nl.id("m").unwrap();
        let y = nl.id("y").unwrap();
        assert!(m < y);
        assert_eq!(nl.fanouts(m), &[(y, 0)]);
        assert_eq!(nl.gate_count(), 2);
    }

    #[test]
    fn arity_rules() {
        let bad = Netlist::new(
            s(&["a", "b", "c"]),
            s(&["y"]),
            vec![Gate::new("y", GateKind::Xor, &["a", "b", "c"])],
        );
        assert!(matches!(bad, Err(NetlistError::Arity { .. })));
        let one_and = Netlist::new(
            s(&["a"]),
            s(&["y"]),
            vec![Gate::new("y", GateKind::And, &["a"])],
        );
        assert!(matches!(one_and, Err(NetlistError::Arity { .. })));
        let wide = Netlist::new(
            s(&["a", "b", "c", "d"]),
            s(&["y"]),
            vec![Gate::new("y", GateKind::Nand, &["a", "b", "c", "d"])],
        );
        assert!(wide.is_ok());
    }

    #[test]
    fn rejects_cycle_and_duplicates() {
        let cyc = Netlist::new(
            s(&["a"]),
            s(&["y"]),
            vec![
                Gate::new("y", GateKind::And, &["a", "z"]),
                Gate::new("z", GateKind::Not, &["y"]),
            ],
        );
        assert!(matches!(cyc, Err(NetlistError::Cycle { .. })));
        let dup = Netlist::new(
            s(&["a"]),
            s(&["a"]),
            vec![Gate::new("a", GateKind::Not, &["a"])],
        );
        assert!(matches!(dup, Err(NetlistError::DuplicateNet { .. })));
    }

    #[test]
    fn dangling_nets_are_accepted() {
        let nl = Netlist::new(
            s(&["a", "b"]),
            s(&["y"]),
            vec![
                Gate::new("y", GateKind::Or, &["a", "b"]),
                Gate::new("unused", GateKind::Not, &["a"]),
            ],
        )
        .unwrap();
        assert_eq!(nl.dangling_nets(), vec![nl.id("unused").unwrap()]);
    }

    #[test]
    fn names_are_checked() {
        let r = Netlist::new(s(&["a-b"]), vec![], vec![]);
        assert_eq!(r, Err(NetlistError::InvalidName("a-b".into())));
    }
}
