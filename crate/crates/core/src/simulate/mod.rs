// SPDX-License-Identifier: Apache-2.0

//! Bit-parallel logic simulation of keyed netlists.
//!
//! Each net holds a `u64` word, so one pass evaluates 64 input vectors. Keyed
//! blocks are resolved once per key through the device model into a pair of
//! masks giving the block output for input 0 and for input 1.

mod sweep;

pub use sweep::{
    level_sweep, plan_case, run_case, sweep, LevelRow, RunResult, SkippedRun, SweepConfig,
    SweepOutcome, SweepRow,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{BlockMode, DeviceConfig, DeviceError, EncryptionBlock, OperatingPoint};
use crate::netlist::{GateKind, Netlist, NetlistError};
use crate::placement::PlacementError;
use crate::scalar::Real;
use crate::timing::TimingError;

pub const DEFAULT_VECTORS: usize = 10_000;
pub const DEFAULT_VECTOR_SEED: u64 = 42;
pub const MAX_EXHAUSTIVE_INPUTS: usize = 24;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("key has {got} bits but the netlist has {expected} blocks")]
    KeyLength { expected: usize, got: usize },
    #[error("`{0}` is not a keyed block in this netlist")]
    UnknownBlock(String),
    #[error("block `{0}` is keyed twice")]
    DuplicateBlock(String),
    #[error("vector has {got} bits but the netlist has {expected} inputs")]
    VectorWidth { expected: usize, got: usize },
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error("exhaustive vectors need at most {MAX_EXHAUSTIVE_INPUTS} inputs, netlist has {0}")]
    TooManyInputs(usize),
    #[error("malformed key: {0}")]
    Key(String),
    #[error("block `{block}`: {source}")]
    Device { block: String, source: DeviceError },
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Key bits aligned with block ids; `true` selects the inverter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct KeyBits(pub Vec<bool>);

impl KeyBits {
    pub fn zeros(n: usize) -> Self {
        KeyBits(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        KeyBits(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self) -> Self {
        KeyBits(self.0.iter().map(|b| !b).collect())
    }

    pub fn modes(&self) -> impl Iterator<Item = BlockMode> + '_ {
        self.0.iter().map(|&b| BlockMode::from_bit(b))
    }
}

impl fmt::Display for KeyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0
            .iter()
            .try_for_each(|&b| f.write_str(if b { "1" } else { "0" }))
    }
}

impl FromStr for KeyBits {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(SimError::Key(format!(
                    "unexpected character `{c}` in bit string"
                ))),
            })
            .collect::<Result<_, _>>()
            .map(KeyBits)
    }
}

/// A key bound to block names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Key {
    pub block_ids: Vec<String>,
    pub bits: KeyBits,
}

/// On-disk key: `order` and `bits` are authoritative, `modes` is the
/// readable per-block view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub order: Vec<String>,
    pub bits: String,
    pub modes: BTreeMap<String, BlockMode>,
}

impl Key {
    pub fn new(block_ids: Vec<String>, bits: KeyBits) -> Result<Self, SimError> {
        if block_ids.len() != bits.len() {
            return Err(SimError::KeyLength {
                expected: block_ids.len(),
                got: bits.len(),
            });
        }
        Ok(Key { block_ids, bits })
    }

    /// Key over the netlist's blocks in topological order.
    pub fn in_netlist_order(nl: &Netlist, bits: KeyBits) -> Result<Self, SimError> {
        let ids = nl
            .camo_gates()
            .iter()
            .map(|&g| nl.name(g).to_string())
            .collect();
        Key::new(ids, bits)
    }

    pub fn all_buffer(block_ids: &[String]) -> Self {
        Key {
            block_ids: block_ids.to_vec(),
            bits: KeyBits::zeros(block_ids.len()),
        }
    }

    pub fn with_bits(&self, bits: KeyBits) -> Result<Self, SimError> {
        Key::new(self.block_ids.clone(), bits)
    }

    pub fn to_file(&self) -> KeyFile {
        KeyFile {
            order: self.block_ids.clone(),
            bits: self.bits.to_string(),
            modes: self
                .block_ids
                .iter()
                .cloned()
                .zip(self.bits.modes())
                .collect(),
        }
    }

    pub fn from_file(f: &KeyFile) -> Result<Self, SimError> {
        let key = Key::new(f.order.clone(), f.bits.parse()?)?;
        for (id, mode) in key.block_ids.iter().zip(key.bits.modes()) {
            if f.modes.get(id).is_some_and(|m| *m != mode) {
                return Err(SimError::Key(format!(
                    "`{id}` disagrees between bits and modes"
                )));
            }
        }
        Ok(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrongKey {
    AllInvert,
    Complement,
    Random,
}

impl FromStr for WrongKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all-invert" => Ok(WrongKey::AllInvert),
            "complement" => Ok(WrongKey::Complement),
            "random" => Ok(WrongKey::Random),
            _ => Err(format!("unknown wrong-key convention `{s}`")),
        }
    }
}

impl fmt::Display for WrongKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WrongKey::AllInvert => "all-invert",
            WrongKey::Complement => "complement",
            WrongKey::Random => "random",
        })
    }
}

impl WrongKey {
    pub fn apply(self, correct: &KeyBits, seed: u64) -> KeyBits {
        match self {
            WrongKey::AllInvert => KeyBits::ones(correct.len()),
            WrongKey::Complement => correct.complement(),
            WrongKey::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                KeyBits((0..correct.len()).map(|_| rng.random()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSet {
    /// Every assignment; input 0 is the most significant bit of the index.
    Exhaustive,
    Random {
        seed: u64,
        n: usize,
    },
}

impl Default for VectorSet {
    fn default() -> Self {
        VectorSet::Random {
            seed: DEFAULT_VECTOR_SEED,
            n: DEFAULT_VECTORS,
        }
    }
}

/// Packed input words: `words[w * width + i]` holds input `i` for vectors
/// `64w .. 64w + 63`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedVectors {
    pub width: usize,
    pub count: usize,
    pub words: Vec<u64>,
}

impl PackedVectors {
    pub fn generate(set: VectorSet, width: usize) -> Result<Self, SimError> {
        match set {
            VectorSet::Exhaustive => {
                if width > MAX_EXHAUSTIVE_INPUTS {
                    return Err(SimError::TooManyInputs(width));
                }
                let count = 1usize << width;
                let nwords = count.div_ceil(64);
                let mut words = Vec::with_capacity(nwords * width);
                for w in 0..nwords {
                    for i in 0..width {
                        let bit = width - 1 - i;
                        words.push(exhaustive_word(bit, w));
                    }
                }
                Ok(PackedVectors {
                    width,
                    count,
                    words,
                })
            }
            VectorSet::Random { seed, n } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let words = (0..n.div_ceil(64) * width)
                    .map(|_| rng.next_u64())
                    .collect();
                Ok(PackedVectors {
                    width,
                    count: n,
                    words,
                })
            }
        }
    }

    pub fn n_words(&self) -> usize {
        self.count.div_ceil(64)
    }

    fn word(&self, w: usize) -> &[u64] {
        &self.words[w * self.width..(w + 1) * self.width]
    }

    /// Lanes of word `w` that carry real vectors.
    fn lane_mask(&self, w: usize) -> u64 {
        let rem = self.count - w * 64;
        if rem >= 64 {
            !0
        } else {
            (1u64 << rem) - 1
        }
    }

    pub fn vector(&self, idx: usize) -> Vec<bool> {
        let (w, lane) = (idx / 64, idx % 64);
        self.word(w).iter().map(|x| x >> lane & 1 == 1).collect()
    }
}

const LOW_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

fn exhaustive_word(bit: usize, w: usize) -> u64 {
    if bit < 6 {
        LOW_PATTERNS[bit]
    } else if (w >> (bit - 6)) & 1 == 1 {
        !0
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy)]
struct Op {
    kind: GateKind,
    out: u32,
    start: u32,
    len: u32,
    // Block output words for input 0 and input 1.
    on0: u64,
    on1: u64,
}

/// A netlist flattened for word-parallel evaluation with its blocks resolved.
#[derive(Debug, Clone)]
pub struct Simulator {
    n_nets: usize,
    inputs: Vec<u32>,
    outputs: Vec<u32>,
    ops: Vec<Op>,
    fanins: Vec<u32>,
}

impl Simulator {
    /// Resolves every block by programming a fresh device pair per key bit.
    pub fn with_key(nl: &Netlist, key: &Key, device: &DeviceConfig) -> Result<Self, SimError> {
        let template = device.device::<f64>();
        let op = device.operating_point::<f64>();
        let blocks = key
            .block_ids
            .iter()
            .zip(key.bits.modes())
            .map(|(id, mode)| {
                EncryptionBlock::programmed(&template, mode, &op).map_err(|source| {
                    SimError::Device {
                        block: id.clone(),
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_blocks(nl, &key.block_ids, &blocks, &op)
    }

    /// Resolves blocks from already programmed device pairs.
    pub fn with_blocks<R: Real>(
        nl: &Netlist,
        block_ids: &[String],
        blocks: &[EncryptionBlock<R>],
        op: &OperatingPoint<R>,
    ) -> Result<Self, SimError> {
        let camo = nl.camo_gates();
        if block_ids.len() != camo.len() || blocks.len() != block_ids.len() {
            return Err(SimError::KeyLength {
                expected: camo.len(),
                got: block_ids.len().min(blocks.len()),
            });
        }
        let mut resolved: HashMap<u32, (u64, u64)> = HashMap::new();
        for (id, block) in block_ids.iter().zip(blocks) {
            let g = nl
                .id(id)
                .filter(|&g| nl.kind(g) == GateKind::Camo)
                .ok_or_else(|| SimError::UnknownBlock(id.clone()))?;
            let out = |x: bool| {
                block.output(x, op).map_err(|source| SimError::Device {
                    block: id.clone(),
                    source,
                })
            };
            let word = |b: bool| if b { !0u64 } else { 0 };
            if resolved
                .insert(g.0, (word(out(false)?), word(out(true)?)))
                .is_some()
            {
                return Err(SimError::DuplicateBlock(id.clone()));
            }
        }
        let mut ops = Vec::with_capacity(nl.gate_count());
        let mut fanins = Vec::new();
        for g in nl.gate_ids() {
            let (on0, on1) = resolved.get(&g.0).copied().unwrap_or((0, 0));
            ops.push(Op {
                kind: nl.kind(g),
                out: g.0,
                start: fanins.len() as u32,
                len: nl.fanins(g).len() as u32,
                on0,
                on1,
            });
            fanins.extend(nl.fanins(g).iter().map(|f| f.0));
        }
        Ok(Simulator {
            n_nets: nl.len(),
            inputs: nl.inputs().iter().map(|n| n.0).collect(),
            outputs: nl.outputs().iter().map(|n| n.0).collect(),
            ops,
            fanins,
        })
    }

    /// Simulator for a netlist without blocks.
    pub fn plain(nl: &Netlist) -> Result<Self, SimError> {
        Self::with_blocks::<f64>(nl, &[], &[], &OperatingPoint::default())
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates one packed word per input; writes one word per output.
    pub fn eval_words(&self, inputs: &[u64], values: &mut Vec<u64>, out: &mut [u64]) {
        values.clear();
        values.resize(self.n_nets, 0);
        for (&i, &w) in self.inputs.iter().zip(inputs) {
            values[i as usize] = w;
        }
        let mut scratch: Vec<u64> = Vec::with_capacity(16);
        for op in &self.ops {
            let fan = &self.fanins[op.start as usize..(op.start + op.len) as usize];
            let v = if op.kind == GateKind::Camo {
                let x = values[fan[0] as usize];
                (!x & op.on0) | (x & op.on1)
            } else {
                scratch.clear();
                scratch.extend(fan.iter().map(|&f| values[f as usize]));
                op.kind.eval_words(&scratch)
            };
            values[op.out as usize] = v;
        }
        for (o, &n) in out.iter_mut().zip(&self.outputs) {
            *o = values[n as usize];
        }
    }

    pub fn eval(&self, vector: &[bool]) -> Result<Vec<bool>, SimError> {
        if vector.len() != self.inputs.len() {
            return Err(SimError::VectorWidth {
                expected: self.inputs.len(),
                got: vector.len(),
            });
        }
        let words: Vec<u64> = vector.iter().map(|&b| u64::from(b)).collect();
        let mut out = vec![0; self.outputs.len()];
        self.eval_words(&words, &mut Vec::new(), &mut out);
        Ok(out.iter().map(|w| w & 1 == 1).collect())
    }
}

/// Evaluates one vector; outputs in declared order.
pub fn eval(nl: &Netlist, key: &Key, vector: &[bool]) -> Result<Vec<bool>, SimError> {
    Simulator::with_key(nl, key, &DeviceConfig::default())?.eval(vector)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptionResult {
    pub n_vectors: usize,
    pub n_mismatched: usize,
    pub probability: f64,
    /// Per primary output, number of vectors on which it differs.
    pub per_output_flip_counts: Vec<(String, u64)>,
    /// Index of the first mismatching vector.
    pub first_mismatch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub index: usize,
    pub inputs: Vec<bool>,
    pub expected: Vec<bool>,
    pub got: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equivalent: bool,
    pub counterexample: Option<Counterexample>,
}

fn check_interface(a: &Netlist, b: &Netlist) -> Result<(), SimError> {
    if a.input_names() != b.input_names() {
        return Err(SimError::Interface("primary inputs differ".into()));
    }
    if a.output_names() != b.output_names() {
        return Err(SimError::Interface("primary outputs differ".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Tally {
    mismatched: usize,
    flips: Vec<u64>,
    first: Option<usize>,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.mismatched += o.mismatched;
        for (a, b) in self.flips.iter_mut().zip(o.flips) {
            *a += b;
        }
        self.first = match (self.first, o.first) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

const WORDS_PER_TASK: usize = 32;

/// Compares two simulators over a vector set. Work is split into fixed
/// word ranges, so results do not depend on the thread count.
pub fn compare(a: &Simulator, b: &Simulator, vectors: &PackedVectors) -> Vec<u64> {
    compare_tally(a, b, vectors).flips
}

fn compare_tally(a: &Simulator, b: &Simulator, vectors: &PackedVectors) -> Tally {
    let n_out = a.n_outputs();
    let empty = Tally {
        mismatched: 0,
        flips: vec![0; n_out],
        first: None,
    };
    let tasks: Vec<usize> = (0..vectors.n_words()).step_by(WORDS_PER_TASK).collect();
    let parts: Vec<Tally> = tasks
        .par_iter()
        .map(|&w0| {
            let mut t = empty.clone();
            let (mut va, mut vb) = (Vec::new(), Vec::new());
            let (mut oa, mut ob) = (vec![0u64; n_out], vec![0u64; n_out]);
            for w in w0..(w0 + WORDS_PER_TASK).min(vectors.n_words()) {
                let input = vectors.word(w);
                a.eval_words(input, &mut va, &mut oa);
                b.eval_words(input, &mut vb, &mut ob);
                let mask = vectors.lane_mask(w);
                let mut any = 0u64;
                for (k, (x, y)) in oa.iter().zip(&ob).enumerate() {
                    let d = (x ^ y) & mask;
                    t.flips[k] += u64::from(d.count_ones());
                    any |= d;
                }
                t.mismatched += any.count_ones() as usize;
                if any != 0 && t.first.is_none() {
                    t.first = Some(w * 64 + any.trailing_zeros() as usize);
                }
            }
            t
        })
        .collect();
    parts.into_iter().fold(empty, Tally::merge)
}

/// Fraction of vectors on which any output of the keyed netlist differs
/// from the original.
pub fn encryption_probability(
    original: &Netlist,
    encrypted: &Netlist,
    key: &Key,
    vectors: VectorSet,
    device: &DeviceConfig,
) -> Result<EncryptionResult, SimError> {
    check_interface(original, encrypted)?;
    let a = Simulator::plain(original)?;
    let b = Simulator::with_key(encrypted, key, device)?;
    let packed = PackedVectors::generate(vectors, original.inputs().len())?;
    Ok(result_from(&a, &b, &packed, original))
}

fn result_from(
    a: &Simulator,
    b: &Simulator,
    packed: &PackedVectors,
    nl: &Netlist,
) -> EncryptionResult {
    let t = compare_tally(a, b, packed);
    EncryptionResult {
        n_vectors: packed.count,
        n_mismatched: t.mismatched,
        probability: if packed.count == 0 {
            0.0
        } else {
            t.mismatched as f64 / packed.count as f64
        },
        per_output_flip_counts: nl
            .output_names()
            .into_iter()
            .map(String::from)
            .zip(t.flips)
            .collect(),
        first_mismatch: t.first,
    }
}

/// Probability from pre-built simulators, for callers that reuse them.
pub fn encryption_probability_with(
    original: &Simulator,
    encrypted: &Simulator,
    packed: &PackedVectors,
    nl: &Netlist,
) -> EncryptionResult {
    result_from(original, encrypted, packed, nl)
}

/// Whether the keyed netlist matches the original on every vector.
pub fn equivalence_check(
    original: &Netlist,
    encrypted: &Netlist,
    key: &Key,
    vectors: VectorSet,
    device: &DeviceConfig,
) -> Result<Equivalence, SimError> {
    check_interface(original, encrypted)?;
    let a = Simulator::plain(original)?;
    let b = Simulator::with_key(encrypted, key, device)?;
    let packed = PackedVectors::generate(vectors, original.inputs().len())?;
    let t = compare_tally(&a, &b, &packed);
    let counterexample = match t.first {
        None => None,
        Some(index) => {
            let inputs = packed.vector(index);
            Some(Counterexample {
                expected: a.eval(&inputs)?,
                got: b.eval(&inputs)?,
                index,
                inputs,
            })
        }
    };
    Ok(Equivalence {
        equivalent: counterexample.is_none(),
        counterexample,
    })
}
