// SPDX-License-Identifier: Apache-2.0

use super::{NetId, Netlist, NetlistError};

/// Depth information for every net.
///
/// `output_distance` counts gates between a net and its nearest primary
/// output: a net that is itself an output has distance 0. The placement
/// convention numbers levels from 1, so `level = output_distance + 1`.
/// Nets that reach no output have no distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMap {
    pub forward_level: Vec<u32>,
    pub output_distance: Vec<Option<u32>>,
}

impl LevelMap {
    pub fn forward(&self, id: NetId) -> u32 {
        self.forward_level[id.index()]
    }

    pub fn distance(&self, id: NetId) -> Option<u32> {
        self.output_distance[id.index()]
    }

    pub fn level(&self, id: NetId) -> Option<u32> {
        self.distance(id).map(|d| d + 1)
    }

    pub fn max_forward(&self) -> u32 {
        self.forward_level.iter().copied().max().unwrap_or(0)
    }
}

pub fn levelize(nl: &Netlist) -> LevelMap {
    let mut forward_level = vec![0u32; nl.len()];
    for g in nl.gate_ids() {
        forward_level[g.index()] = 1 + nl
            .fanins(g)
            .iter()
            .map(|f| forward_level[f.index()])
            .max()
            .unwrap_or(0);
    }
    let mut output_distance: Vec<Option<u32>> = vec![None; nl.len()];
    for n in nl.net_ids().rev() {
        output_distance[n.index()] = if nl.is_output(n) {
            Some(0)
        } else {
            nl.fanouts(n)
                .iter()
                .filter_map(|(s, _)| output_distance[s.index()])
                .min()
                .map(|d| d + 1)
        };
    }
    LevelMap {
        forward_level,
        output_distance,
    }
}

/// Number of distinct directed paths from `from` to `to` (saturating).
/// Paths are net sequences, so parallel pins into one gate count once.
/// A net has exactly one (empty) path to itself.
pub fn enumerate_paths(nl: &Netlist, from: &str, to: &str) -> Result<u128, NetlistError> {
    let from = nl.lookup(from)?;
    let to = nl.lookup(to)?;
    if to < from {
        return Ok(0);
    }
    let mut count = vec![0u128; nl.len()];
    count[from.index()] = 1;
    for n in from.index()..=to.index() {
        let c = count[n];
        if c == 0 {
            continue;
        }
        for &s in nl.successors(NetId(n as u32)) {
            count[s.index()] = count[s.index()].saturating_add(c);
        }
    }
    Ok(count[to.index()])
}

/// Number of distinct primary-input to primary-output paths (saturating).
/// A path may end at an output that also feeds further logic.
pub fn count_io_paths(nl: &Netlist) -> u128 {
    let mut suffix = vec![0u128; nl.len()];
    for n in nl.net_ids().rev() {
        let mut c = u128::from(nl.is_output(n));
        for &s in nl.successors(n) {
            c = c.saturating_add(suffix[s.index()]);
        }
        suffix[n.index()] = c;
    }
    nl.inputs()
        .iter()
        .fold(0u128, |acc, i| acc.saturating_add(suffix[i.index()]))
}
