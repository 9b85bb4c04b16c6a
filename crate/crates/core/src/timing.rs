// SPDX-License-Identifier: Apache-2.0

//! Additive static timing analysis.
//!
//! Every gate contributes a fixed delay from a [`DelayTable`]; primary inputs
//! contribute nothing. A path is the sequence of nets from a primary input
//! to a primary output, and its delay is the sum of the gate delays along it.
//!
//! [`top_k_paths`] enumerates paths in order of decreasing delay with a
//! best-first search. Each partial path is keyed by the exact longest
//! completion (prefix delay plus the longest suffix from its last net), so
//! complete paths come off the heap already sorted. Equal delays are ordered
//! by the net-name sequence, which makes reports deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateKind, NetId, Netlist};
use crate::scalar::Delay;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("no delay entry for {0} gates")]
    MissingDelay(GateKind),
    #[error("netlist has no primary-input to primary-output path")]
    NoPath,
    #[error("invalid delay table: {0}")]
    InvalidTable(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("reports were built with different k ({0} vs {1})")]
    KMismatch(usize, usize),
    #[error("baseline delay must be positive")]
    NonPositiveBaseline,
    #[error("malformed delay config: {0}")]
    Config(String),
}

/// Calibration envelope of the library scaling factor.
pub const SCALE_ENVELOPE: (f64, f64) = (0.94, 2.29);

/// Per-kind gate delays in picoseconds, a delay for keyed blocks, and a
/// global multiplier applied to all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable<T> {
    gates: BTreeMap<GateKind, T>,
    camo: T,
    scale: T,
}

impl<T: Delay> DelayTable<T> {
    pub fn new(camo: T, scale: T) -> Self {
        DelayTable {
            gates: BTreeMap::new(),
            camo,
            scale,
        }
    }

    /// Every logic gate 10 ps, NOT 5 ps, keyed block 10 ps, scale 1.
    pub fn standard() -> Self {
        let ten = T::from_f64_lossy(10.0);
        let mut t = Self::new(ten, T::one());
        for k in GateKind::LOGIC {
            if k != GateKind::Camo {
                t.gates.insert(k, ten);
            }
        }
        t.gates.insert(GateKind::Not, T::from_f64_lossy(5.0));
        t
    }

    /// Every gate (including keyed blocks) takes one unit.
    pub fn unit() -> Self {
        let mut t = Self::new(T::one(), T::one());
        for k in GateKind::LOGIC {
            if k != GateKind::Camo {
                t.gates.insert(k, T::one());
            }
        }
        t
    }

    pub fn with(mut self, kind: GateKind, delay: T) -> Self {
        self.set(kind, delay);
        self
    }

    pub fn set(&mut self, kind: GateKind, delay: T) {
        if kind == GateKind::Camo {
            self.camo = delay;
        } else {
            self.gates.insert(kind, delay);
        }
    }

    pub fn with_scale(mut self, scale: T) -> Self {
        self.scale = scale;
        self
    }

    pub fn camo_delay(&self) -> T {
        self.camo
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Unscaled table entry.
    pub fn raw(&self, kind: GateKind) -> Option<T> {
        match kind {
            GateKind::Camo => Some(self.camo),
            GateKind::Input => Some(T::zero()),
            k => self.gates.get(&k).copied(),
        }
    }

    /// Scaled delay of one gate.
    pub fn delay(&self, kind: GateKind) -> Result<T, TimingError> {
        self.raw(kind)
            .map(|d| d * self.scale)
            .ok_or(TimingError::MissingDelay(kind))
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        if let Some((k, _)) = self.gates.iter().find(|(_, d)| d.is_negative()) {
            return Err(TimingError::InvalidTable(format!("negative delay for {k}")));
        }
        if self.camo <= T::zero() {
            return Err(TimingError::InvalidTable(
                "camo delay must be positive".into(),
            ));
        }
        if self.scale <= T::zero() {
            return Err(TimingError::InvalidTable("scale must be positive".into()));
        }
        Ok(())
    }

    /// Whether `scale` lies inside the library calibration envelope.
    pub fn in_calibration_envelope(&self) -> bool {
        let s = self.scale.to_f64_lossy();
        (SCALE_ENVELOPE.0..=SCALE_ENVELOPE.1).contains(&s)
    }

    /// Reads `delays.json`: `{"NAND": 10, "NOT": 5, ..., "camo": 10, "scale": 1.0}`.
    /// Gate names are case-insensitive. Without `camo` the block delay
    /// defaults to twice the NOT delay; without `scale` to 1.
    pub fn from_json(text: &str) -> Result<Self, TimingError> {
        let raw: BTreeMap<String, f64> =
            serde_json::from_str(text).map_err(|e| TimingError::Config(e.to_string()))?;
        let mut t = Self::new(T::zero(), T::one());
        let mut camo = None;
        for (key, v) in raw {
            match key.to_ascii_lowercase().as_str() {
                "camo" => camo = Some(T::from_f64_lossy(v)),
                "scale" => t.scale = T::from_f64_lossy(v),
                _ => {
                    let kind: GateKind = key.parse().map_err(TimingError::Config)?;
                    if !kind.is_logic() {
                        return Err(TimingError::Config(format!("`{key}` is not a gate")));
                    }
                    t.set(kind, T::from_f64_lossy(v));
                }
            }
        }
        t.camo = match camo {
            Some(c) => c,
            None => {
                let not = t
                    .gates
                    .get(&GateKind::Not)
                    .copied()
                    .ok_or_else(|| TimingError::Config("need `camo` or `NOT`".into()))?;
                not + not
            }
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        let mut m: BTreeMap<String, f64> = self
            .gates
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_f64_lossy()))
            .collect();
        m.insert("camo".into(), self.camo.to_f64_lossy());
        m.insert("scale".into(), self.scale.to_f64_lossy());
        serde_json::to_string_pretty(&m).expect("map serializes")
    }
}

impl<T: Delay> Default for DelayTable<T> {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPath<T> {
    pub nets: Vec<String>,
    pub delay: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport<T> {
    /// Sorted by decreasing delay, ties by net-name sequence.
    pub paths: Vec<TimedPath<T>>,
    pub critical_delay: T,
    pub topk_sum: T,
    pub k: usize,
}

impl<T: Delay> PathReport<T> {
    /// CSV with columns `rank,delay_ps,path`; nets joined by `->`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,delay_ps,path\n");
        for (i, p) in self.paths.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, p.delay, p.nets.join("->"));
        }
        out
    }
}

/// Arrival times and longest suffixes for one netlist under one table.
#[derive(Debug, Clone)]
pub struct StaticTiming<'a, T> {
    nl: &'a Netlist,
    delay: Vec<T>,
    arrival: Vec<T>,
    tail: Vec<Option<T>>,
    // Canonical continuation after a net on its best suffix; `None` = stop
    // at this (output) net.
    next: Vec<Option<NetId>>,
    rank: Vec<u32>,
}

fn cmp_delay<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

impl<'a, T: Delay> StaticTiming<'a, T> {
    pub fn new(nl: &'a Netlist, table: &DelayTable<T>) -> Result<Self, TimingError> {
        table.validate()?;
        let mut delay = Vec::with_capacity(nl.len());
        for n in nl.net_ids() {
            delay.push(table.delay(nl.kind(n))?);
        }

        let mut order: Vec<NetId> = nl.net_ids().collect();
        order.sort_by(|&a, &b| nl.name(a).cmp(nl.name(b)));
        let mut rank = vec![0u32; nl.len()];
        for (r, n) in order.into_iter().enumerate() {
            rank[n.index()] = r as u32;
        }

        let mut arrival = delay.clone();
        for g in nl.gate_ids() {
            let worst = nl
                .fanins(g)
                .iter()
                .map(|f| arrival[f.index()])
                .max_by(cmp_delay)
                .unwrap_or_else(T::zero);
            arrival[g.index()] = delay[g.index()] + worst;
        }

        let mut tail: Vec<Option<T>> = vec![None; nl.len()];
        let mut next: Vec<Option<NetId>> = vec![None; nl.len()];
        for n in nl.net_ids().rev() {
            let mut best: Option<(T, Option<NetId>)> = nl.is_output(n).then_some((T::zero(), None));
            for &s in nl.successors(n) {
                let Some(ts) = tail[s.index()] else { continue };
                best = match best {
                    None => Some((ts, Some(s))),
                    Some((bd, bn)) => match cmp_delay(&ts, &bd) {
                        Ordering::Greater => Some((ts, Some(s))),
                        Ordering::Equal => {
                            // Stopping is a prefix of any extension, so it wins ties.
                            let better = match bn {
                                None => false,
                                Some(b) => rank[s.index()] < rank[b.index()],
                            };
                            if better {
                                Some((ts, Some(s)))
                            } else {
                                Some((bd, bn))
                            }
                        }
                        Ordering::Less => Some((bd, bn)),
                    },
                };
            }
            if let Some((d, nx)) = best {
                tail[n.index()] = Some(delay[n.index()] + d);
                next[n.index()] = nx;
            }
        }

        Ok(StaticTiming {
            nl,
            delay,
            arrival,
            tail,
            next,
            rank,
        })
    }

    pub fn netlist(&self) -> &'a Netlist {
        self.nl
    }

    pub fn gate_delay(&self, n: NetId) -> T {
        self.delay[n.index()]
    }

    /// Longest delay from any primary input up to and including `n`.
    pub fn arrival(&self, n: NetId) -> T {
        self.arrival[n.index()]
    }

    /// Longest delay from `n` (inclusive) to any primary output.
    pub fn tail(&self, n: NetId) -> Option<T> {
        self.tail[n.index()]
    }

    pub fn critical_delay(&self) -> Result<T, TimingError> {
        self.nl
            .inputs()
            .iter()
            .filter_map(|i| self.tail(*i))
            .max_by(cmp_delay)
            .ok_or(TimingError::NoPath)
    }

    /// Delay of the longest input-to-output path through the edge `driver -> sink`.
    pub fn through_edge(&self, driver: NetId, sink: NetId) -> Option<T> {
        self.tail(sink).map(|t| self.arrival(driver) + t)
    }

    fn canonical_suffix(&self, from: NetId, out: &mut Vec<NetId>) {
        let mut cur = from;
        while let Some(nx) = self.next[cur.index()] {
            out.push(nx);
            cur = nx;
        }
    }

    fn names(&self, path: &[NetId]) -> Vec<String> {
        path.iter().map(|&n| self.nl.name(n).to_string()).collect()
    }

    /// One maximum-delay path as net ids; ties go to the smallest
    /// net-name sequence.
    pub fn critical_path_ids(&self) -> Result<(Vec<NetId>, T), TimingError> {
        let mut best: Option<(T, NetId)> = None;
        for &i in self.nl.inputs() {
            let Some(t) = self.tail(i) else { continue };
            best = match best {
                None => Some((t, i)),
                Some((bd, bi)) => match cmp_delay(&t, &bd) {
                    Ordering::Greater => Some((t, i)),
                    Ordering::Equal if self.rank[i.index()] < self.rank[bi.index()] => Some((t, i)),
                    _ => Some((bd, bi)),
                },
            };
        }
        let (delay, start) = best.ok_or(TimingError::NoPath)?;
        let mut path = vec![start];
        self.canonical_suffix(start, &mut path);
        Ok((path, delay))
    }

    pub fn critical_path(&self) -> Result<TimedPath<T>, TimingError> {
        let (path, delay) = self.critical_path_ids()?;
        Ok(TimedPath {
            nets: self.names(&path),
            delay,
        })
    }

    /// The `k` longest paths, or all of them if there are fewer.
    pub fn top_k(&self, k: usize) -> Result<PathReport<T>, TimingError> {
        if k == 0 {
            return Err(TimingError::ZeroK);
        }
        let mut heap = BinaryHeap::new();
        for &i in self.nl.inputs() {
            let Some(t) = self.tail(i) else { continue };
            heap.push(self.entry(vec![i], T::zero(), t, false));
        }
        if heap.is_empty() {
            return Err(TimingError::NoPath);
        }
        let mut paths = Vec::new();
        while let Some(e) = heap.pop() {
            if e.complete {
                paths.push(TimedPath {
                    nets: self.names(&e.prefix),
                    delay: e.bound,
                });
                if paths.len() == k {
                    break;
                }
                continue;
            }
            let last = *e.prefix.last().unwrap();
            if self.nl.is_output(last) {
                heap.push(self.entry(e.prefix.clone(), e.prefix_delay, e.prefix_delay, true));
            }
            for &s in self.nl.successors(last) {
                let Some(ts) = self.tail(s) else { continue };
                let mut p = e.prefix.clone();
                p.push(s);
                let pd = e.prefix_delay + self.delay[s.index()];
                heap.push(self.entry(p, pd, e.prefix_delay + ts, false));
            }
        }
        let critical_delay = paths[0].delay;
        let topk_sum = paths.iter().fold(T::zero(), |a, p| a + p.delay);
        Ok(PathReport {
            paths,
            critical_delay,
            topk_sum,
            k,
        })
    }

    fn entry(&self, prefix: Vec<NetId>, prefix_delay: T, bound: T, complete: bool) -> Entry<T> {
        let mut rep = prefix.clone();
        if !complete {
            self.canonical_suffix(*prefix.last().unwrap(), &mut rep);
        }
        Entry {
            bound,
            repr: rep.iter().map(|n| self.rank[n.index()]).collect(),
            prefix,
            prefix_delay,
            complete,
        }
    }
}

// Heap entry. `repr` is the name-rank sequence of the lexicographically
// smallest maximum-delay completion, so ordering by (bound desc, repr asc)
// is a lower bound on the order of every descendant.
#[derive(Debug)]
struct Entry<T> {
    bound: T,
    repr: Vec<u32>,
    prefix: Vec<NetId>,
    prefix_delay: T,
    complete: bool,
}

impl<T: PartialOrd> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_delay(&self.bound, &other.bound)
            .then_with(|| other.repr.cmp(&self.repr))
            .then_with(|| self.complete.cmp(&other.complete))
    }
}

impl<T: PartialOrd> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: PartialOrd> Eq for Entry<T> {}

pub fn critical_path<T: Delay>(
    nl: &Netlist,
    table: &DelayTable<T>,
) -> Result<TimedPath<T>, TimingError> {
    StaticTiming::new(nl, table)?.critical_path()
}

pub fn top_k_paths<T: Delay>(
    nl: &Netlist,
    table: &DelayTable<T>,
    k: usize,
) -> Result<PathReport<T>, TimingError> {
    StaticTiming::new(nl, table)?.top_k(k)
}

/// Sum of gate delays along a named net sequence.
pub fn path_delay<T: Delay>(
    nl: &Netlist,
    table: &DelayTable<T>,
    nets: &[String],
) -> Result<T, TimingError> {
    let mut sum = T::zero();
    for n in nets {
        let id = nl
            .id(n)
            .ok_or_else(|| TimingError::Config(format!("unknown net `{n}`")))?;
        sum = sum + table.delay(nl.kind(id))?;
    }
    Ok(sum)
}

/// Percentage increase of the critical delay and of the top-k sum.
pub fn delay_overhead<T: Delay>(
    before: &PathReport<T>,
    after: &PathReport<T>,
) -> Result<(T, T), TimingError> {
    if before.k != after.k {
        return Err(TimingError::KMismatch(before.k, after.k));
    }
    if before.critical_delay <= T::zero() || before.topk_sum <= T::zero() {
        return Err(TimingError::NonPositiveBaseline);
    }
    let hundred = T::from_f64_lossy(100.0);
    let pct = |b: T, a: T| (a - b) / b * hundred;
    Ok((
        pct(before.critical_delay, after.critical_delay),
        pct(before.topk_sum, after.topk_sum),
    ))
}
