// SPDX-License-Identifier: Apache-2.0

//! Key delivery through a scan chain and the device programming protocols.
//!
//! Each keyed block has one scan cell. Device F1 is the block's `upper`
//! (inverted-input) transistor and F2 its `lower` one, so a scan output of 1
//! writes F1 to LVT and selects the inverter, matching the key convention.
//!
//! Line voltages per phase follow the roles described for the peripheral
//! (write lines L1/L2, selector lines L3..L5); the numbers are configurable
//! and not confirmed by a published table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{BlockMode, DeviceError, EncryptionBlock, OperatingPoint, VthState};
use crate::scalar::Real;
use crate::simulate::KeyBits;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("key has {got} bits but {needed} clocks were requested")]
    ShortKey { needed: usize, got: usize },
    #[error("chain has {cells} cells but {blocks} blocks")]
    Length { cells: usize, blocks: usize },
    #[error("programming failed for block `{block}`: {device} did not reach {expected:?}")]
    ProgrammingFailure {
        block: String,
        device: &'static str,
        expected: VthState,
    },
    #[error("one-step programming needs a scan chain with negative logic-0 swing")]
    NegativeSwingRequired,
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanCell {
    pub q: bool,
    pub q_bar: bool,
    pub attached_block: String,
}

impl ScanCell {
    pub fn new(block: impl Into<String>) -> Self {
        ScanCell {
            q: false,
            q_bar: true,
            attached_block: block.into(),
        }
    }

    fn set(&mut self, q: bool) {
        self.q = q;
        self.q_bar = !q;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanChain {
    pub cells: Vec<ScanCell>,
    /// Logic-0 scan outputs swing to a negative voltage.
    pub negative_swing: bool,
}

impl ScanChain {
    pub fn for_blocks(block_ids: &[String], negative_swing: bool) -> Self {
        ScanChain {
            cells: block_ids.iter().map(ScanCell::new).collect(),
            negative_swing,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn outputs(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.q).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Shift,
    ProgStep1,
    ProgStep2,
    Prog,
    Logic,
}

/// Voltages of lines L1..L5 during one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSchedule {
    pub phase: Phase,
    pub line_voltages: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasConfig {
    /// Gate level that turns a selector on while writing.
    pub selector_on: f64,
    /// Selector level in logic mode.
    pub logic_selector: f64,
    pub clock_period_ns: f64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            selector_on: 4.0,
            logic_selector: 1.1,
            clock_period_ns: 10.0,
        }
    }
}

impl BiasConfig {
    pub fn schedule<R: Real>(&self, phase: Phase, op: &OperatingPoint<R>) -> BiasSchedule {
        let vw = op.v_write.to_f64().unwrap_or(0.0);
        let vr = op.v_read.to_f64().unwrap_or(0.0);
        let s = self.selector_on;
        let v = match phase {
            Phase::Shift => [0.0, 0.0, 0.0, 0.0, 0.0],
            Phase::ProgStep1 => [-vw, -vw, s, s, s],
            Phase::ProgStep2 => [vw, vw, 0.0, s, s],
            Phase::Prog => [vw, -vw, 0.0, s, s],
            Phase::Logic => [vr, vr, 0.0, self.logic_selector, self.logic_selector],
        };
        BiasSchedule {
            phase,
            line_voltages: (1..=5).map(|i| format!("L{i}")).zip(v).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceValue {
    Bit(u8),
    Volts(f64),
    State(VthState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ns: f64,
    pub signal: String,
    pub value: TraceValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub t_start_ns: f64,
    pub t_end_ns: f64,
    pub line_voltages: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    pub phases: Vec<PhaseRecord>,
    pub events: Vec<TraceEvent>,
}

impl EventTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn phase_order(&self) -> Vec<Phase> {
        self.phases.iter().map(|p| p.phase).collect()
    }

    /// Events stamped in `[start, end)` of the first occurrence of `phase`.
    pub fn events_in(&self, phase: Phase) -> Vec<&TraceEvent> {
        let Some(p) = self.phases.iter().find(|p| p.phase == phase) else {
            return Vec::new();
        };
        self.events
            .iter()
            .filter(|e| e.t_ns >= p.t_start_ns && e.t_ns < p.t_end_ns)
            .collect()
    }
}

type Blocks<R> = Vec<EncryptionBlock<R>>;

/// Sequential programming run that records every step into a trace.
#[derive(Debug, Clone)]
pub struct Programmer<R> {
    pub op: OperatingPoint<R>,
    pub bias: BiasConfig,
    t: f64,
    trace: EventTrace,
}

impl<R: Real> Programmer<R> {
    pub fn new(op: OperatingPoint<R>, bias: BiasConfig) -> Self {
        Programmer {
            op,
            bias,
            t: 0.0,
            trace: EventTrace::default(),
        }
    }

    fn begin(&mut self, phase: Phase) {
        let sched = self.bias.schedule(phase, &self.op);
        for (line, &v) in &sched.line_voltages {
            self.trace.events.push(TraceEvent {
                t_ns: self.t,
                signal: line.clone(),
                value: TraceValue::Volts(v),
            });
        }
        self.trace.phases.push(PhaseRecord {
            phase,
            t_start_ns: self.t,
            t_end_ns: self.t,
            line_voltages: sched.line_voltages,
        });
    }

    fn end(&mut self, duration: f64) {
        self.t += duration;
        if let Some(p) = self.trace.phases.last_mut() {
            p.t_end_ns = self.t;
        }
    }

    fn event(&mut self, t: f64, signal: String, value: TraceValue) {
        self.trace.events.push(TraceEvent {
            t_ns: t,
            signal,
            value,
        });
    }

    /// Serial shift from the chain head. After `k` clocks cells `0..k`
    /// hold `key[0..k]` and the previous contents moved `k` cells down.
    pub fn shift_key(
        &mut self,
        chain: &mut ScanChain,
        key: &KeyBits,
        n_clocks: usize,
    ) -> Result<(), ScanError> {
        if key.len() < n_clocks {
            return Err(ScanError::ShortKey {
                needed: n_clocks,
                got: key.len(),
            });
        }
        self.begin(Phase::Shift);
        let period = self.bias.clock_period_ns;
        for clk in 0..n_clocks {
            let t = self.t + period * clk as f64;
            let bit = key.0[n_clocks - 1 - clk];
            self.event(t, "SCLK".into(), TraceValue::Bit(1));
            self.event(t, "scan_in".into(), TraceValue::Bit(u8::from(bit)));
            let mut carry = bit;
            for (i, cell) in chain.cells.iter_mut().enumerate() {
                let prev = cell.q;
                cell.set(carry);
                carry = prev;
                if prev != cell.q {
                    self.trace.events.push(TraceEvent {
                        t_ns: t,
                        signal: format!("scan{i}.q"),
                        value: TraceValue::Bit(u8::from(cell.q)),
                    });
                }
            }
        }
        self.end(period * n_clocks as f64);
        Ok(())
    }

    fn pulse(
        &mut self,
        block: &str,
        which: &'static str,
        dev: &mut crate::device::FeFetDevice<R>,
        amplitude: R,
        expected: VthState,
    ) -> Result<(), ScanError> {
        let before = dev.state;
        *dev = dev.program_pulse(amplitude, self.op.t_write)?;
        if dev.state != expected {
            return Err(ScanError::ProgrammingFailure {
                block: block.to_string(),
                device: which,
                expected,
            });
        }
        if dev.state != before {
            let t = self.t + self.op.t_write.to_f64().unwrap_or(0.0);
            self.event(t, format!("{block}.{which}"), TraceValue::State(dev.state));
        }
        Ok(())
    }

    // Write pulse plus one clock period of settling.
    fn write_window(&self) -> f64 {
        self.op.t_write.to_f64().unwrap_or(0.0) + self.bias.clock_period_ns
    }

    /// Erase to HVT, then write the selected device to LVT. Returns the
    /// programmed blocks and the all-HVT snapshot taken after the erase.
    pub fn program_two_step(
        &mut self,
        chain: &ScanChain,
        blocks: &[EncryptionBlock<R>],
    ) -> Result<(Blocks<R>, Blocks<R>), ScanError> {
        check_len(chain, blocks)?;
        let vw = self.op.v_write;
        let mut out = blocks.to_vec();
        self.begin(Phase::ProgStep1);
        for (cell, b) in chain.cells.iter().zip(out.iter_mut()) {
            self.pulse(&cell.attached_block, "F1", &mut b.upper, -vw, VthState::Hvt)?;
            self.pulse(&cell.attached_block, "F2", &mut b.lower, -vw, VthState::Hvt)?;
        }
        let snapshot = out.clone();
        self.end(self.write_window());
        self.begin(Phase::ProgStep2);
        for (cell, b) in chain.cells.iter().zip(out.iter_mut()) {
            if cell.q {
                self.pulse(&cell.attached_block, "F1", &mut b.upper, vw, VthState::Lvt)?;
            } else {
                self.pulse(&cell.attached_block, "F2", &mut b.lower, vw, VthState::Lvt)?;
            }
        }
        self.end(self.write_window());
        Ok((out, snapshot))
    }

    /// Writes both devices of every block in a single phase with
    /// complementary pulses selected by the scan outputs.
    pub fn program_one_step(
        &mut self,
        chain: &ScanChain,
        blocks: &[EncryptionBlock<R>],
    ) -> Result<Vec<EncryptionBlock<R>>, ScanError> {
        if !chain.negative_swing {
            return Err(ScanError::NegativeSwingRequired);
        }
        check_len(chain, blocks)?;
        let vw = self.op.v_write;
        let mut out = blocks.to_vec();
        self.begin(Phase::Prog);
        for (cell, b) in chain.cells.iter().zip(out.iter_mut()) {
            let (f1, f2) = if cell.q {
                ((vw, VthState::Lvt), (-vw, VthState::Hvt))
            } else {
                ((-vw, VthState::Hvt), (vw, VthState::Lvt))
            };
            self.pulse(&cell.attached_block, "F1", &mut b.upper, f1.0, f1.1)?;
            self.pulse(&cell.attached_block, "F2", &mut b.lower, f2.0, f2.1)?;
        }
        self.end(self.write_window());
        Ok(out)
    }

    /// Switches the lines to read levels; blocks now act as logic.
    pub fn logic(&mut self) {
        self.begin(Phase::Logic);
        self.end(self.bias.clock_period_ns);
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EventTrace {
        self.trace
    }
}

fn check_len<R>(chain: &ScanChain, blocks: &[EncryptionBlock<R>]) -> Result<(), ScanError> {
    if chain.len() != blocks.len() {
        return Err(ScanError::Length {
            cells: chain.len(),
            blocks: blocks.len(),
        });
    }
    Ok(())
}

pub fn shift_key(
    chain: &ScanChain,
    key: &KeyBits,
    n_clocks: usize,
) -> Result<ScanChain, ScanError> {
    let mut c = chain.clone();
    Programmer::<f64>::new(OperatingPoint::default(), BiasConfig::default())
        .shift_key(&mut c, key, n_clocks)?;
    Ok(c)
}

pub fn program_two_step<R: Real>(
    chain: &ScanChain,
    blocks: &[EncryptionBlock<R>],
    op: &OperatingPoint<R>,
) -> Result<Vec<EncryptionBlock<R>>, ScanError> {
    Ok(Programmer::new(*op, BiasConfig::default())
        .program_two_step(chain, blocks)?
        .0)
}

pub fn program_one_step<R: Real>(
    chain: &ScanChain,
    blocks: &[EncryptionBlock<R>],
    op: &OperatingPoint<R>,
) -> Result<Vec<EncryptionBlock<R>>, ScanError> {
    Programmer::new(*op, BiasConfig::default()).program_one_step(chain, blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    TwoStep,
    OneStep,
}

/// Outcome of a full shift, program and logic-mode run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramRun<R> {
    pub chain: ScanChain,
    pub blocks: Vec<EncryptionBlock<R>>,
    /// All-HVT state after the erase step (two-step only).
    pub step1_snapshot: Option<Vec<EncryptionBlock<R>>>,
    pub trace: EventTrace,
}

impl<R: Real> ProgramRun<R> {
    pub fn modes(&self) -> Vec<BlockMode> {
        self.blocks.iter().map(EncryptionBlock::mode).collect()
    }
}

/// Loads `key` into a chain over `block_ids`, programs `blocks`, and
/// enters logic mode.
pub fn run_protocol<R: Real>(
    protocol: Protocol,
    block_ids: &[String],
    key: &KeyBits,
    blocks: &[EncryptionBlock<R>],
    op: &OperatingPoint<R>,
    bias: &BiasConfig,
) -> Result<ProgramRun<R>, ScanError> {
    let mut chain = ScanChain::for_blocks(block_ids, protocol == Protocol::OneStep);
    let mut p = Programmer::new(*op, bias.clone());
    p.shift_key(&mut chain, key, block_ids.len())?;
    let (blocks, step1_snapshot) = match protocol {
        Protocol::TwoStep => {
            let (b, s) = p.program_two_step(&chain, blocks)?;
            (b, Some(s))
        }
        Protocol::OneStep => (p.program_one_step(&chain, blocks)?, None),
    };
    p.logic();
    Ok(ProgramRun {
        chain,
        blocks,
        step1_snapshot,
        trace: p.into_trace(),
    })
}

pub fn emit_trace<R>(run: &ProgramRun<R>) -> String {
    run.trace.to_json()
}
