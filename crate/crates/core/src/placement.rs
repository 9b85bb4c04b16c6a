// SPDX-License-Identifier: Apache-2.0

//! Choosing insertion sites for keyed blocks and splicing them in.
//!
//! A site is one connection: either a gate input pin or the connection from
//! a net to the primary output of the same name. Levels count from the
//! output: a block that drives an output directly sits at level 1.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{BlockMode, DeviceError, EncryptionBlock, FeFetDevice, OperatingPoint};
use crate::netlist::{levelize, Gate, GateKind, NetId, Netlist, NetlistError};
use crate::scalar::{Delay, Real};
use crate::timing::{StaticTiming, TimingError};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("{strategy} placement needs {requested} sites but only {found} are eligible")]
    Insufficient {
        strategy: Strategy,
        requested: usize,
        found: usize,
    },
    #[error("level {level} exceeds the path length (deepest level is {max})")]
    LevelTooDeep { level: u32, max: u32 },
    #[error("{0}")]
    InvalidRequest(String),
    #[error("stale plan: {0}")]
    StalePlan(String),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    NoncriticalSpread,
    CriticalStacked,
    LevelAt,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::NoncriticalSpread => "noncritical",
            Strategy::CriticalStacked => "critical",
            Strategy::LevelAt => "level",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "noncritical" | "noncritical_spread" => Ok(Strategy::NoncriticalSpread),
            "critical" | "critical_stacked" => Ok(Strategy::CriticalStacked),
            "level" | "level_at" => Ok(Strategy::LevelAt),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

/// One connection to splice. For output connections `sink` repeats the
/// driver name and `pin` is the output index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub driver: String,
    pub sink: String,
    pub pin: usize,
    #[serde(default)]
    pub to_output: bool,
    pub on_critical: bool,
    pub level: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub strategy: Strategy,
    pub n_blocks: usize,
    pub level: Option<u32>,
    pub seed: u64,
    pub sites: Vec<Site>,
    /// Pairs of sites that share an input-to-output path.
    #[serde(default)]
    pub spread_violations: usize,
    #[serde(default)]
    pub block_ids: Vec<String>,
}

/// Internal edge handle: sink `None` is the output connection of `driver`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Edge {
    driver: NetId,
    sink: Option<NetId>,
    pin: usize,
}

struct Ctx<'t, 'a, T> {
    st: &'t StaticTiming<'a, T>,
    nl: &'a Netlist,
    crit: Vec<NetId>,
    crit_delay: T,
    dist: Vec<Option<u32>>,
}

impl<'t, 'a, T: Delay> Ctx<'t, 'a, T> {
    fn new(st: &'t StaticTiming<'a, T>) -> Result<Self, PlacementError> {
        let nl = st.netlist();
        let (crit, crit_delay) = st.critical_path_ids()?;
        Ok(Ctx {
            st,
            nl,
            crit,
            crit_delay,
            dist: levelize(nl).output_distance,
        })
    }

    fn on_critical(&self, e: Edge) -> bool {
        match e.sink {
            None => self.crit.last() == Some(&e.driver),
            Some(s) => self.crit.windows(2).any(|w| w[0] == e.driver && w[1] == s),
        }
    }

    fn level(&self, e: Edge) -> Option<u32> {
        match e.sink {
            None => Some(1),
            Some(s) => self.dist[s.index()].map(|d| d + 2),
        }
    }

    /// Longest input-to-output path through the edge, if any.
    fn through(&self, e: Edge) -> Option<T> {
        match e.sink {
            None => Some(self.st.arrival(e.driver)),
            Some(s) => self.st.through_edge(e.driver, s),
        }
    }

    fn site(&self, e: Edge) -> Site {
        let driver = self.nl.name(e.driver).to_string();
        Site {
            sink: e
                .sink
                .map_or_else(|| driver.clone(), |s| self.nl.name(s).to_string()),
            driver,
            pin: e.pin,
            to_output: e.sink.is_none(),
            on_critical: self.on_critical(e),
            level: self.level(e),
        }
    }

    /// Every connection that lies on some input-to-output path, in netlist order.
    fn all_edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for g in self.nl.gate_ids() {
            for (pin, &f) in self.nl.fanins(g).iter().enumerate() {
                let e = Edge {
                    driver: f,
                    sink: Some(g),
                    pin,
                };
                if self.through(e).is_some() {
                    out.push(e);
                }
            }
        }
        for (i, &o) in self.nl.outputs().iter().enumerate() {
            if !self.nl.is_input(o) {
                out.push(Edge {
                    driver: o,
                    sink: None,
                    pin: i,
                });
            }
        }
        out
    }

    /// Edges off the critical path with enough slack to absorb one block.
    fn noncritical_edges(&self, camo: T) -> Vec<Edge> {
        self.all_edges()
            .into_iter()
            .filter(|&e| !self.on_critical(e))
            .filter(|&e| match self.through(e) {
                Some(d) => self.crit_delay - d >= camo,
                None => false,
            })
            .collect()
    }

    fn path_edges(&self, path: &[NetId]) -> Vec<Edge> {
        let mut edges: Vec<Edge> = path
            .windows(2)
            .map(|w| Edge {
                driver: w[0],
                sink: Some(w[1]),
                pin: self
                    .nl
                    .fanins(w[1])
                    .iter()
                    .position(|&f| f == w[0])
                    .unwrap(),
            })
            .collect();
        if let Some(&last) = path.last() {
            let idx = self.nl.outputs().iter().position(|&o| o == last).unwrap();
            edges.push(Edge {
                driver: last,
                sink: None,
                pin: idx,
            });
        }
        edges
    }
}

// Cones of an accepted edge, used for O(1) path-sharing tests.
struct Reach {
    edge: Edge,
    after: Vec<bool>,
    before: Vec<bool>,
}

impl Reach {
    fn new(nl: &Netlist, e: Edge) -> Self {
        Reach {
            edge: e,
            after: match e.sink {
                Some(s) => nl.forward_cone(s),
                None => vec![false; nl.len()],
            },
            before: nl.backward_cone(e.driver),
        }
    }

    fn shares_path(&self, c: Edge) -> bool {
        if self.edge.driver == c.driver && self.edge.sink == c.sink {
            return true;
        }
        self.after[c.driver.index()] || c.sink.is_some_and(|s| self.before[s.index()])
    }
}

const SPREAD_ATTEMPTS: usize = 32;
const PATH_SAMPLES_PER_BLOCK: usize = 64;

/// Random input-to-output walk: uniform start among live inputs, then a
/// uniform choice among live successors and (at outputs) stopping.
fn random_walk<R: rand::Rng>(nl: &Netlist, live: &[bool], rng: &mut R) -> Option<Vec<NetId>> {
    let starts: Vec<NetId> = nl
        .inputs()
        .iter()
        .copied()
        .filter(|i| live[i.index()])
        .collect();
    let mut cur = *starts.choose(rng)?;
    let mut path = vec![cur];
    loop {
        let mut options: Vec<Option<NetId>> = nl
            .successors(cur)
            .iter()
            .filter(|s| live[s.index()])
            .map(|&s| Some(s))
            .collect();
        if nl.is_output(cur) {
            options.push(None);
        }
        match *options.choose(rng)? {
            Some(s) => {
                path.push(s);
                cur = s;
            }
            None => return Some(path),
        }
    }
}

/// Picks each block by drawing a random path and then a uniform eligible
/// edge on it that shares no path with earlier picks.
fn path_pick<R: rand::Rng, T: Delay>(
    ctx: &Ctx<'_, '_, T>,
    pool: &[Edge],
    n: usize,
    rng: &mut R,
) -> Option<Vec<Edge>> {
    let eligible: HashSet<Edge> = pool.iter().copied().collect();
    let live = ctx.nl.reaches_output();
    let mut chosen: Vec<Reach> = Vec::with_capacity(n);
    for _ in 0..n * PATH_SAMPLES_PER_BLOCK {
        if chosen.len() == n {
            break;
        }
        let path = random_walk(ctx.nl, &live, rng)?;
        let options: Vec<Edge> = ctx
            .path_edges(&path)
            .into_iter()
            .filter(|e| eligible.contains(e))
            .filter(|&e| chosen.iter().all(|r| !r.shares_path(e)))
            .collect();
        if let Some(&e) = options.choose(rng) {
            chosen.push(Reach::new(ctx.nl, e));
        }
    }
    (chosen.len() == n).then(|| chosen.into_iter().map(|r| r.edge).collect())
}

fn spread_pick(nl: &Netlist, pool: &[Edge], n: usize) -> (Vec<Edge>, usize) {
    let mut chosen: Vec<Reach> = Vec::with_capacity(n);
    let mut taken = vec![false; pool.len()];
    for (i, &e) in pool.iter().enumerate() {
        if chosen.len() == n {
            break;
        }
        if chosen.iter().all(|r| !r.shares_path(e)) {
            chosen.push(Reach::new(nl, e));
            taken[i] = true;
        }
    }
    let mut violations = 0;
    while chosen.len() < n {
        let best = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, &e)| (chosen.iter().filter(|r| r.shares_path(e)).count(), i))
            .min();
        let Some((cost, i)) = best else { break };
        violations += cost;
        taken[i] = true;
        chosen.push(Reach::new(nl, pool[i]));
    }
    (chosen.into_iter().map(|r| r.edge).collect(), violations)
}

/// Selects sites for `n_blocks` blocks.
///
/// `level` is required for [`Strategy::LevelAt`], which places one block on
/// the critical path at that distance from its output.
pub fn plan_placement<T: Delay>(
    timing: &StaticTiming<'_, T>,
    camo_delay: T,
    strategy: Strategy,
    n_blocks: usize,
    seed: u64,
    level: Option<u32>,
) -> Result<PlacementPlan, PlacementError> {
    let ctx = Ctx::new(timing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let edges = match strategy {
        Strategy::NoncriticalSpread => {
            let mut pool = ctx.noncritical_edges(camo_delay);
            if pool.len() < n_blocks {
                return Err(PlacementError::Insufficient {
                    strategy,
                    requested: n_blocks,
                    found: pool.len(),
                });
            }
            let mut best: Option<(Vec<Edge>, usize)> = None;
            if let Some(p) = path_pick(&ctx, &pool, n_blocks, &mut rng) {
                best = Some((p, 0));
            }
            for _ in 0..if best.is_some() { 0 } else { SPREAD_ATTEMPTS } {
                pool.shuffle(&mut rng);
                let (picked, v) = spread_pick(ctx.nl, &pool, n_blocks);
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((picked, v));
                }
                if v == 0 {
                    break;
                }
            }
            let (picked, v) = best.expect("at least one attempt");
            violations = v;
            for &e in &picked {
                if ctx.on_critical(e) {
                    unreachable!("non-critical pool produced a critical edge");
                }
            }
            picked
        }
        Strategy::CriticalStacked => {
            let on_path = ctx.path_edges(&ctx.crit);
            if on_path.len() < n_blocks {
                return Err(PlacementError::Insufficient {
                    strategy,
                    requested: n_blocks,
                    found: on_path.len(),
                });
            }
            let mut picked: Vec<Edge> = on_path
                .choose_multiple(&mut rng, n_blocks)
                .copied()
                .collect();
            let order: HashMap<Edge, usize> =
                on_path.iter().enumerate().map(|(i, &e)| (e, i)).collect();
            picked.sort_by_key(|e| order[e]);
            picked
        }
        Strategy::LevelAt => {
            let level = level.ok_or_else(|| {
                PlacementError::InvalidRequest("level placement needs a level".into())
            })?;
            if n_blocks != 1 {
                return Err(PlacementError::InvalidRequest(
                    "level placement inserts exactly one block".into(),
                ));
            }
            vec![level_edge(&ctx, &ctx.crit, level)?]
        }
    };
    Ok(PlacementPlan {
        strategy,
        n_blocks,
        level,
        seed,
        sites: edges.into_iter().map(|e| ctx.site(e)).collect(),
        spread_violations: violations,
        block_ids: Vec::new(),
    })
}

fn level_edge<T: Delay>(
    ctx: &Ctx<'_, '_, T>,
    path: &[NetId],
    level: u32,
) -> Result<Edge, PlacementError> {
    let edges = ctx.path_edges(path);
    let max = edges.len() as u32;
    if level == 0 || level > max {
        return Err(PlacementError::LevelTooDeep { level, max });
    }
    Ok(edges[edges.len() - level as usize])
}

/// Single-block plan at `level` on an explicit input-to-output path.
pub fn plan_level_on_path<T: Delay>(
    timing: &StaticTiming<'_, T>,
    path: &[String],
    level: u32,
) -> Result<PlacementPlan, PlacementError> {
    let ctx = Ctx::new(timing)?;
    let ids = path
        .iter()
        .map(|n| ctx.nl.lookup(n))
        .collect::<Result<Vec<_>, _>>()?;
    let valid = ids.first().is_some_and(|&i| ctx.nl.is_input(i))
        && ids.last().is_some_and(|&o| ctx.nl.is_output(o))
        && ids
            .windows(2)
            .all(|w| ctx.nl.successors(w[0]).contains(&w[1]));
    if !valid {
        return Err(PlacementError::InvalidRequest(
            "path must run from a primary input to a primary output".into(),
        ));
    }
    let e = level_edge(&ctx, &ids, level)?;
    Ok(PlacementPlan {
        strategy: Strategy::LevelAt,
        n_blocks: 1,
        level: Some(level),
        seed: 0,
        sites: vec![ctx.site(e)],
        spread_violations: 0,
        block_ids: Vec::new(),
    })
}

/// A random input-to-output path drawn by the walk used for placement.
pub fn random_path(nl: &Netlist, seed: u64) -> Option<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = random_walk(nl, &nl.reaches_output(), &mut rng)?;
    Some(path.iter().map(|&n| nl.name(n).to_string()).collect())
}

/// Result of splicing blocks into a netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub netlist: Netlist,
    /// Block net names in plan order; key bit `i` programs `block_ids[i]`.
    pub block_ids: Vec<String>,
}

/// Splices one `CAMO` gate per site.
///
/// A block on an output connection takes over the output name; the original
/// driver is renamed so the primary-output interface is unchanged.
pub fn insert_blocks(nl: &Netlist, plan: &PlacementPlan) -> Result<Insertion, PlacementError> {
    let stale = |m: String| Err(PlacementError::StalePlan(m));
    let mut seen = HashSet::new();
    for s in &plan.sites {
        if !seen.insert((&s.driver, &s.sink, s.pin, s.to_output)) {
            return stale(format!("duplicate site {} -> {}", s.driver, s.sink));
        }
        let Some(d) = nl.id(&s.driver) else {
            return stale(format!("driver `{}` not in netlist", s.driver));
        };
        if s.to_output {
            if nl.outputs().get(s.pin) != Some(&d) || s.sink != s.driver {
                return stale(format!("`{}` is not primary output #{}", s.driver, s.pin));
            }
            if nl.is_input(d) {
                return stale(format!("cannot rename primary input `{}`", s.driver));
            }
        } else {
            let ok = nl
                .id(&s.sink)
                .is_some_and(|g| nl.fanins(g).get(s.pin) == Some(&d));
            if !ok {
                return stale(format!("no edge {} -> {} pin {}", s.driver, s.sink, s.pin));
            }
        }
    }

    let mut gates: Vec<Gate> = nl.gates();
    let mut used: HashSet<String> = nl.net_ids().map(|n| nl.name(n).to_string()).collect();
    let mut fresh = |stem: String| -> String {
        let name = if used.contains(&stem) {
            (1..)
                .map(|i| format!("{stem}_{i}"))
                .find(|n| !used.contains(n))
                .unwrap()
        } else {
            stem
        };
        used.insert(name.clone());
        name
    };
    let mut index: HashMap<String, usize> = gates
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id.clone(), i))
        .collect();
    // Original net name -> name of the net that now carries its value.
    let mut current: HashMap<String, String> = HashMap::new();
    let cur =
        |m: &HashMap<String, String>, n: &str| m.get(n).cloned().unwrap_or_else(|| n.to_string());

    let mut block_ids = Vec::with_capacity(plan.sites.len());
    for (i, s) in plan.sites.iter().enumerate() {
        let src = cur(&current, &s.driver);
        if s.to_output {
            let pre = fresh(format!("{}_pre", s.driver));
            for g in gates.iter_mut() {
                for f in g.fanins.iter_mut() {
                    if *f == s.driver {
                        *f = pre.clone();
                    }
                }
            }
            let at = index.remove(&s.driver).expect("output driver is a gate");
            gates[at].id = pre.clone();
            index.insert(pre.clone(), at);
            current.insert(s.driver.clone(), pre.clone());
            index.insert(s.driver.clone(), gates.len());
            gates.push(Gate {
                id: s.driver.clone(),
                kind: GateKind::Camo,
                fanins: vec![pre],
            });
            block_ids.push(s.driver.clone());
        } else {
            let name = fresh(format!("camo{i}"));
            let sink = cur(&current, &s.sink);
            let at = index[&sink];
            gates[at].fanins[s.pin] = name.clone();
            index.insert(name.clone(), gates.len());
            gates.push(Gate {
                id: name.clone(),
                kind: GateKind::Camo,
                fanins: vec![src],
            });
            block_ids.push(name);
        }
    }
    let netlist = Netlist::new(
        nl.input_names().into_iter().map(String::from).collect(),
        nl.output_names().into_iter().map(String::from).collect(),
        gates,
    )?;
    Ok(Insertion { netlist, block_ids })
}

/// Four-row truth table of `c3(NAND(c1(a), c2(b)))` for `ab` = 00, 01, 10, 11,
/// with every block evaluated through programmed devices.
pub fn compose_reconfigurable<R: Real>(
    c1: BlockMode,
    c2: BlockMode,
    c3: BlockMode,
    template: &FeFetDevice<R>,
    op: &OperatingPoint<R>,
) -> Result<[bool; 4], DeviceError> {
    let b1 = EncryptionBlock::programmed(template, c1, op)?;
    let b2 = EncryptionBlock::programmed(template, c2, op)?;
    let b3 = EncryptionBlock::programmed(template, c3, op)?;
    let mut rows = [false; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        let (a, b) = (i & 2 != 0, i & 1 != 0);
        let nand = !(b1.output(a, op)? && b2.output(b, op)?);
        *row = b3.output(nand, op)?;
    }
    Ok(rows)
}

pub const TRANSISTORS_PER_BLOCK: u32 = 4;
pub const AREA_PER_BLOCK_UM2: f64 = 1.09;
pub const TVD_REFERENCE_TRANSISTORS: u32 = 30;
pub const NAND2_TRANSISTORS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub transistors: u32,
    pub area_um2: f64,
    pub tvd_reference_transistors: u32,
    pub nand_one_block_transistors: u32,
    pub nand_three_block_transistors: u32,
}

pub fn cost_report(n_blocks: u32) -> CostReport {
    CostReport {
        transistors: TRANSISTORS_PER_BLOCK * n_blocks,
        area_um2: AREA_PER_BLOCK_UM2 * f64::from(n_blocks),
        tvd_reference_transistors: TVD_REFERENCE_TRANSISTORS,
        nand_one_block_transistors: NAND2_TRANSISTORS + TRANSISTORS_PER_BLOCK,
        nand_three_block_transistors: NAND2_TRANSISTORS + 3 * TRANSISTORS_PER_BLOCK,
    }
}
