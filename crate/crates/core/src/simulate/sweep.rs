// SPDX-License-Identifier: Apache-2.0

//! Batch experiments: probability and timing overhead over circuits, block
//! counts and placement seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    encryption_probability_with, Key, PackedVectors, SimError, Simulator, VectorSet, WrongKey,
};
use crate::device::DeviceConfig;
use crate::netlist::Netlist;
use crate::placement::{
    insert_blocks, plan_level_on_path, plan_placement, PlacementError, PlacementPlan, Strategy,
};
use crate::timing::{delay_overhead, DelayTable, PathReport, StaticTiming};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub strategy: Strategy,
    pub n_blocks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub vectors: usize,
    pub vector_seed: u64,
    pub wrong_key: WrongKey,
    pub k: usize,
    pub delays: DelayTable<f64>,
    pub device: DeviceConfig,
    /// Target level for [`Strategy::LevelAt`].
    pub level: Option<u32>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            strategy: Strategy::NoncriticalSpread,
            n_blocks: (1..=7).collect(),
            seeds: (1..=10).collect(),
            vectors: super::DEFAULT_VECTORS,
            vector_seed: super::DEFAULT_VECTOR_SEED,
            wrong_key: WrongKey::AllInvert,
            k: 100,
            delays: DelayTable::standard(),
            device: DeviceConfig::default(),
            level: None,
        }
    }
}

/// One CSV row. `seed = None` marks a mean over seeds; circuit `"mean"`
/// marks a mean over circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub circuit: String,
    pub strategy: Strategy,
    pub n_blocks: usize,
    pub seed: Option<u64>,
    pub n_vectors: usize,
    pub probability: f64,
    pub critical_delay_ps: f64,
    pub critical_pct: f64,
    pub top100_sum_ps: f64,
    pub top100_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRun {
    pub circuit: String,
    pub n_blocks: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// Per-run rows in (circuit, n_blocks, seed) order, then means.
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedRun>,
}

/// Everything measured for one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub plan: PlacementPlan,
    pub encrypted: Netlist,
    pub correct_key: Key,
    pub wrong_key: Key,
    pub probability: f64,
    pub before: PathReport<f64>,
    pub after: PathReport<f64>,
    pub critical_pct: f64,
    pub topk_pct: f64,
}

/// Plans, inserts, times and simulates one (circuit, n, seed) case.
pub fn run_case(
    nl: &Netlist,
    before: &PathReport<f64>,
    plan: PlacementPlan,
    cfg: &SweepConfig,
    packed: &PackedVectors,
    original: &Simulator,
) -> Result<RunResult, SimError> {
    let ins = insert_blocks(nl, &plan)?;
    let after = StaticTiming::new(&ins.netlist, &cfg.delays)?.top_k(cfg.k)?;
    let (critical_pct, topk_pct) = delay_overhead(before, &after)?;
    let correct_key = Key::all_buffer(&ins.block_ids);
    let wrong_key = correct_key.with_bits(cfg.wrong_key.apply(&correct_key.bits, plan.seed))?;
    let enc = Simulator::with_key(&ins.netlist, &wrong_key, &cfg.device)?;
    let probability = encryption_probability_with(original, &enc, packed, nl).probability;
    let mut plan = plan;
    plan.block_ids = ins.block_ids;
    Ok(RunResult {
        plan,
        encrypted: ins.netlist,
        correct_key,
        wrong_key,
        probability,
        before: before.clone(),
        after,
        critical_pct,
        topk_pct,
    })
}

fn empty_plan(strategy: Strategy, seed: u64) -> PlacementPlan {
    PlacementPlan {
        strategy,
        n_blocks: 0,
        level: None,
        seed,
        sites: Vec::new(),
        spread_violations: 0,
        block_ids: Vec::new(),
    }
}

/// Builds the plan for one case; `n = 0` yields an empty plan.
pub fn plan_case(
    st: &StaticTiming<'_, f64>,
    cfg: &SweepConfig,
    n: usize,
    seed: u64,
) -> Result<PlacementPlan, PlacementError> {
    if n == 0 {
        return Ok(empty_plan(cfg.strategy, seed));
    }
    plan_placement(
        st,
        cfg.delays.delay(crate::netlist::GateKind::Camo)?,
        cfg.strategy,
        n,
        seed,
        cfg.level,
    )
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        0.0
    } else {
        s / c as f64
    }
}

fn mean_row(circuit: &str, strategy: Strategy, n: usize, rows: &[&SweepRow]) -> SweepRow {
    SweepRow {
        circuit: circuit.to_string(),
        strategy,
        n_blocks: n,
        seed: None,
        n_vectors: rows.first().map_or(0, |r| r.n_vectors),
        probability: mean(rows.iter().map(|r| r.probability)),
        critical_delay_ps: mean(rows.iter().map(|r| r.critical_delay_ps)),
        critical_pct: mean(rows.iter().map(|r| r.critical_pct)),
        top100_sum_ps: mean(rows.iter().map(|r| r.top100_sum_ps)),
        top100_pct: mean(rows.iter().map(|r| r.top100_pct)),
    }
}

/// Runs every (circuit, n_blocks, seed) combination. Cases without enough
/// eligible sites are reported as skipped rather than failing the sweep.
pub fn sweep(
    benchmarks: &[(String, Netlist)],
    cfg: &SweepConfig,
) -> Result<SweepOutcome, SimError> {
    let mut cases = Vec::new();
    for (c, _) in benchmarks.iter().enumerate() {
        for &n in &cfg.n_blocks {
            for &seed in &cfg.seeds {
                cases.push((c, n, seed));
            }
        }
    }
    let prepared = benchmarks
        .par_iter()
        .map(|(_, nl)| -> Result<_, SimError> {
            let st = StaticTiming::new(nl, &cfg.delays)?;
            let before = st.top_k(cfg.k)?;
            let packed = PackedVectors::generate(
                VectorSet::Random {
                    seed: cfg.vector_seed,
                    n: cfg.vectors,
                },
                nl.inputs().len(),
            )?;
            Ok((before, packed, Simulator::plain(nl)?))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<Result<SweepRow, SkippedRun>> = cases
        .par_iter()
        .map(|&(c, n, seed)| {
            let (name, nl) = &benchmarks[c];
            let (before, packed, original) = &prepared[c];
            let skip = |reason: String| SkippedRun {
                circuit: name.clone(),
                n_blocks: n,
                seed,
                reason,
            };
            let st = StaticTiming::new(nl, &cfg.delays).map_err(|e| skip(e.to_string()))?;
            let plan = plan_case(&st, cfg, n, seed).map_err(|e| skip(e.to_string()))?;
            let r = run_case(nl, before, plan, cfg, packed, original)
                .map_err(|e| skip(e.to_string()))?;
            Ok(SweepRow {
                circuit: name.clone(),
                strategy: cfg.strategy,
                n_blocks: n,
                seed: Some(seed),
                n_vectors: cfg.vectors,
                probability: r.probability,
                critical_delay_ps: r.after.critical_delay,
                critical_pct: r.critical_pct,
                top100_sum_ps: r.after.topk_sum,
                top100_pct: r.topk_pct,
            })
        })
        .collect();

    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(s) => out.skipped.push(s),
        }
    }
    let mut means = Vec::new();
    for &n in &cfg.n_blocks {
        let mut per_circuit = Vec::new();
        for (name, _) in benchmarks {
            let rows: Vec<&SweepRow> = out
                .rows
                .iter()
                .filter(|r| &r.circuit == name && r.n_blocks == n)
                .collect();
            if !rows.is_empty() {
                per_circuit.push(mean_row(name, cfg.strategy, n, &rows));
            }
        }
        let refs: Vec<&SweepRow> = per_circuit.iter().collect();
        if !refs.is_empty() {
            let overall = mean_row("mean", cfg.strategy, n, &refs);
            means.extend(per_circuit);
            means.push(overall);
        }
    }
    out.rows.extend(means);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: u32,
    pub driver: String,
    pub sink: String,
    pub n_vectors: usize,
    pub probability: f64,
}

/// Moves one inverter-keyed block along `path` (the critical path when
/// `None`) from level 1 to the path input.
pub fn level_sweep(
    nl: &Netlist,
    path: Option<&[String]>,
    cfg: &SweepConfig,
) -> Result<Vec<LevelRow>, SimError> {
    let st = StaticTiming::new(nl, &cfg.delays)?;
    let path: Vec<String> = match path {
        Some(p) => p.to_vec(),
        None => st.critical_path()?.nets,
    };
    let packed = PackedVectors::generate(
        VectorSet::Random {
            seed: cfg.vector_seed,
            n: cfg.vectors,
        },
        nl.inputs().len(),
    )?;
    let original = Simulator::plain(nl)?;
    (1..=path.len() as u32)
        .into_par_iter()
        .map(|level| {
            let plan = plan_level_on_path(&st, &path, level)?;
            let ins = insert_blocks(nl, &plan)?;
            let key = Key::all_buffer(&ins.block_ids).with_bits(super::KeyBits::ones(1))?;
            let enc = Simulator::with_key(&ins.netlist, &key, &cfg.device)?;
            let r = encryption_probability_with(&original, &enc, &packed, nl);
            let site = &plan.sites[0];
            Ok(LevelRow {
                level,
                driver: site.driver.clone(),
                sink: site.sink.clone(),
                n_vectors: r.n_vectors,
                probability: r.probability,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    const C17: &str = include_str!("../../../../benchmarks/iscas85/c17.bench");

    #[test]
    fn zero_blocks_zero_probability() {
        let nl = parse_bench(C17).unwrap();
        let cfg = SweepConfig {
            n_blocks: vec![0],
            seeds: vec![1, 2],
            vectors: 256,
            ..Default::default()
        };
        let out = sweep(&[("c17".into(), nl)], &cfg).unwrap();
        assert!(out.skipped.is_empty());
        assert!(out
            .rows
            .iter()
            .all(|r| r.probability == 0.0 && r.critical_pct == 0.0));
        assert_eq!(out.rows.len(), 2 + 2);
    }

    #[test]
    fn level_one_always_flips() {
        let nl = parse_bench(C17).unwrap();
        let cfg = SweepConfig {
            vectors: 512,
            ..Default::default()
        };
        let rows = level_sweep(&nl, None, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].probability, 1.0);
        assert!(rows.iter().all(|r| r.probability <= rows[0].probability));
    }
}
