// SPDX-License-Identifier: Apache-2.0

//! Behavioral FeFET model and the two-transistor keyed buffer/inverter.
//!
//! A device holds a nonvolatile threshold state. Write pulses switch it when
//! they clear a step boundary in (amplitude, width); reads compare the gate
//! voltage with the current threshold and never change state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("device threshold is indeterminate (never programmed)")]
    Indeterminate,
    #[error("block output is floating (upper conducts: {upper}, lower conducts: {lower})")]
    FloatingOutput { upper: bool, lower: bool },
    #[error("pulse width must be positive, got {0} ns")]
    NonPositiveWidth(f64),
    #[error("invalid device configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VthState {
    Lvt,
    Hvt,
    Unprogrammed,
}

/// One step of the switching boundary: pulses at least `amplitude` volts in
/// magnitude and at least `min_width` ns long flip the polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStep<R> {
    pub amplitude: R,
    pub min_width: R,
}

/// Default step boundary. Only the 4 V / 20 ns anchor is measured; the
/// lower-amplitude entries are placeholders.
pub const DEFAULT_BOUNDARY: [(f64, f64); 3] = [(4.0, 20.0), (3.5, 200.0), (3.0, 2000.0)];

/// Reads `device.json`. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub vth_low: f64,
    pub vth_high: f64,
    pub v_read: f64,
    pub v_in_high: f64,
    pub v_write: f64,
    pub t_write: f64,
    /// (amplitude V, min width ns), amplitude descending.
    pub boundary: Vec<(f64, f64)>,
    pub sigma_vth: f64,
    pub buffer_nominal_ns: f64,
    pub inverter_nominal_ns: f64,
    /// ns of delay per volt of threshold shift.
    pub buffer_slope_ns_per_v: f64,
    pub inverter_slope_ns_per_v: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            vth_low: 0.5,
            vth_high: 1.7,
            v_read: 1.1,
            v_in_high: 0.8,
            v_write: 4.0,
            t_write: 500.0,
            boundary: DEFAULT_BOUNDARY.to_vec(),
            sigma_vth: 0.05,
            buffer_nominal_ns: 12.0,
            inverter_nominal_ns: 9.0,
            buffer_slope_ns_per_v: 16.62,
            inverter_slope_ns_per_v: 11.68,
        }
    }
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let c: DeviceConfig =
            serde_json::from_str(text).map_err(|e| DeviceError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: &str| Err(DeviceError::Config(m.to_string()));
        if self.vth_high <= self.vth_low {
            return bad("vth_high must exceed vth_low");
        }
        if !(self.vth_low < self.v_read && self.v_read < self.vth_high) {
            return bad("v_read must lie inside the memory window");
        }
        if self.boundary.is_empty() {
            return bad("boundary needs at least one step");
        }
        for w in self.boundary.windows(2) {
            if !(w[0].0 > w[1].0 && w[0].1 < w[1].1) {
                return bad("boundary amplitudes must descend while widths ascend");
            }
        }
        if self.boundary.iter().any(|&(a, w)| a <= 0.0 || w <= 0.0) {
            return bad("boundary entries must be positive");
        }
        if self.t_write <= 0.0 || self.sigma_vth < 0.0 {
            return bad("t_write must be positive and sigma_vth non-negative");
        }
        Ok(())
    }

    pub fn device<R: Real>(&self) -> FeFetDevice<R> {
        FeFetDevice {
            state: VthState::Unprogrammed,
            vth_low: R::lit(self.vth_low),
            vth_high: R::lit(self.vth_high),
            boundary: self
                .boundary
                .iter()
                .map(|&(a, w)| BoundaryStep {
                    amplitude: R::lit(a),
                    min_width: R::lit(w),
                })
                .collect(),
        }
    }

    pub fn operating_point<R: Real>(&self) -> OperatingPoint<R> {
        OperatingPoint {
            v_read: R::lit(self.v_read),
            v_in_high: R::lit(self.v_in_high),
            v_write: R::lit(self.v_write),
            t_write: R::lit(self.t_write),
        }
    }

    pub fn response<R: Real>(&self, mode: BlockMode) -> DelayResponse<R> {
        match mode {
            BlockMode::Inverter => DelayResponse {
                nominal: R::lit(self.inverter_nominal_ns),
                slope: R::lit(self.inverter_slope_ns_per_v),
            },
            _ => DelayResponse {
                nominal: R::lit(self.buffer_nominal_ns),
                slope: R::lit(self.buffer_slope_ns_per_v),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeFetDevice<R> {
    pub state: VthState,
    pub vth_low: R,
    pub vth_high: R,
    pub boundary: Vec<BoundaryStep<R>>,
}

impl<R: Real> Default for FeFetDevice<R> {
    fn default() -> Self {
        DeviceConfig::default().device()
    }
}

impl<R: Real> FeFetDevice<R> {
    pub fn with_state(mut self, state: VthState) -> Self {
        self.state = state;
        self
    }

    pub fn memory_window(&self) -> R {
        self.vth_high - self.vth_low
    }

    /// Whether a pulse of this magnitude and width clears the boundary.
    pub fn switches(&self, amplitude: R, width: R) -> bool {
        let a = amplitude.abs();
        self.boundary
            .iter()
            .any(|s| a >= s.amplitude && width >= s.min_width)
    }

    /// Applies one write pulse. Positive amplitude writes LVT, negative HVT;
    /// pulses under the boundary leave the state untouched.
    pub fn program_pulse(&self, amplitude: R, width: R) -> Result<Self, DeviceError> {
        if width.is_nan() || width <= R::zero() {
            return Err(DeviceError::NonPositiveWidth(
                width.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let mut next = self.clone();
        if self.switches(amplitude, width) {
            next.state = if amplitude > R::zero() {
                VthState::Lvt
            } else {
                VthState::Hvt
            };
        }
        Ok(next)
    }

    pub fn threshold(&self) -> Result<R, DeviceError> {
        match self.state {
            VthState::Lvt => Ok(self.vth_low),
            VthState::Hvt => Ok(self.vth_high),
            VthState::Unprogrammed => Err(DeviceError::Indeterminate),
        }
    }

    pub fn read_conducts(&self, v_gate: R) -> Result<bool, DeviceError> {
        Ok(v_gate > self.threshold()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<R> {
    pub v_read: R,
    pub v_in_high: R,
    pub v_write: R,
    pub t_write: R,
}

impl<R: Real> Default for OperatingPoint<R> {
    fn default() -> Self {
        DeviceConfig::default().operating_point()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    Buffer,
    Inverter,
    Unresolved,
}

impl BlockMode {
    /// Key-bit convention: 1 selects the inverter.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            BlockMode::Inverter
        } else {
            BlockMode::Buffer
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            BlockMode::Buffer => Some(false),
            BlockMode::Inverter => Some(true),
            BlockMode::Unresolved => None,
        }
    }
}

/// Keyed block: `upper` sits in the inverted-input branch, `lower` in the
/// true-input branch; both gates are driven at the read voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptionBlock<R> {
    pub upper: FeFetDevice<R>,
    pub lower: FeFetDevice<R>,
}

impl<R: Real> EncryptionBlock<R> {
    pub fn new(template: &FeFetDevice<R>) -> Self {
        EncryptionBlock {
            upper: template.clone(),
            lower: template.clone(),
        }
    }

    /// Erases both devices then writes the branch that should conduct,
    /// using full write pulses from `op`.
    pub fn programmed(
        template: &FeFetDevice<R>,
        mode: BlockMode,
        op: &OperatingPoint<R>,
    ) -> Result<Self, DeviceError> {
        let erase = |d: &FeFetDevice<R>| d.program_pulse(-op.v_write, op.t_write);
        let write = |d: &FeFetDevice<R>| d.program_pulse(op.v_write, op.t_write);
        let mut b = EncryptionBlock {
            upper: erase(template)?,
            lower: erase(template)?,
        };
        match mode {
            BlockMode::Buffer => b.lower = write(&b.lower)?,
            BlockMode::Inverter => b.upper = write(&b.upper)?,
            BlockMode::Unresolved => {}
        }
        Ok(b)
    }

    pub fn mode(&self) -> BlockMode {
        match (self.upper.state, self.lower.state) {
            (VthState::Hvt, VthState::Lvt) => BlockMode::Buffer,
            (VthState::Lvt, VthState::Hvt) => BlockMode::Inverter,
            _ => BlockMode::Unresolved,
        }
    }

    pub fn is_complementary(&self) -> bool {
        self.mode() != BlockMode::Unresolved
    }

    /// Evaluates the block through both pass transistors.
    pub fn output(&self, input: bool, op: &OperatingPoint<R>) -> Result<bool, DeviceError> {
        let upper = self.upper.read_conducts(op.v_read).unwrap_or(false);
        let lower = self.lower.read_conducts(op.v_read).unwrap_or(false);
        match (upper, lower) {
            (true, false) => Ok(!input),
            (false, true) => Ok(input),
            _ => Err(DeviceError::FloatingOutput { upper, lower }),
        }
    }
}

pub fn block_output<R: Real>(
    block: &EncryptionBlock<R>,
    input: bool,
    op: &OperatingPoint<R>,
) -> Result<bool, DeviceError> {
    block.output(input, op)
}

/// Affine delay response: `nominal + slope * dVth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayResponse<R> {
    pub nominal: R,
    pub slope: R,
}

impl<R: Real> DelayResponse<R> {
    pub fn delay(&self, dvth: R) -> R {
        self.nominal + self.slope * dvth
    }
}

/// Running distribution statistics, mergeable in any grouping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats<R> {
    pub n: u64,
    pub mean: R,
    m2: R,
    pub min: R,
    pub max: R,
}

impl<R: Real> DelayStats<R> {
    pub fn empty() -> Self {
        DelayStats {
            n: 0,
            mean: R::zero(),
            m2: R::zero(),
            min: R::infinity(),
            max: R::neg_infinity(),
        }
    }

    pub fn push(&mut self, x: R) {
        self.n += 1;
        let d = x - self.mean;
        self.mean = self.mean + d / R::lit(self.n as f64);
        self.m2 = self.m2 + d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let (na, nb, nn) = (
            R::lit(self.n as f64),
            R::lit(other.n as f64),
            R::lit(n as f64),
        );
        let d = other.mean - self.mean;
        DelayStats {
            n,
            mean: self.mean + d * nb / nn,
            m2: self.m2 + other.m2 + d * d * na * nb / nn,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    /// Sample standard deviation (0 for fewer than two samples).
    pub fn stddev(&self) -> R {
        if self.n < 2 {
            R::zero()
        } else {
            (self.m2 / R::lit((self.n - 1) as f64)).sqrt()
        }
    }

    pub fn spread(&self) -> R {
        self.max - self.min
    }
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo delay distribution under Gaussian threshold variation.
/// Samples are drawn in fixed chunks, each from its own seeded stream, so
/// the result does not depend on the thread count.
pub fn mc_delay<R>(response: DelayResponse<R>, sigma_vth: R, n: usize, seed: u64) -> DelayStats<R>
where
    R: Real,
    StandardNormal: Distribution<R>,
{
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<DelayStats<R>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut s = DelayStats::empty();
            for _ in 0..len {
                let z: R = rng.sample(StandardNormal);
                s.push(response.delay(z * sigma_vth));
            }
            s
        })
        .collect();
    parts
        .into_iter()
        .fold(DelayStats::empty(), DelayStats::merge)
}

/// `mc_delay` with the response curve and sigma from a configuration.
pub fn mc_delay_for<R>(cfg: &DeviceConfig, mode: BlockMode, n: usize, seed: u64) -> DelayStats<R>
where
    R: Real,
    StandardNormal: Distribution<R>,
{
    mc_delay(cfg.response(mode), R::lit(cfg.sigma_vth), n, seed)
}
