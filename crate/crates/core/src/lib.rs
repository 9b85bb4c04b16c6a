// SPDX-License-Identifier: Apache-2.0

//! Keyed buffer/inverter insertion for combinational netlists.
//!
//! The pipeline reads an ISCAS85 `.bench` netlist, times it, splices keyed
//! blocks onto chosen connections, and measures how often a wrong key
//! corrupts the outputs. The blocks themselves are modeled as pairs of
//! ferroelectric transistors programmed through a scan chain.
//!
//! Timing is generic over [`scalar::Delay`] (floats or exact rationals) and
//! the device model over [`scalar::Real`]. The aliases below fix the usual
//! choices.

pub mod device;
pub mod netlist;
pub mod placement;
pub mod scalar;
pub mod scanchain;
pub mod simulate;
pub mod timing;

use num_rational::Rational64;

pub use netlist::{parse_bench, write_bench, GateKind, NetId, Netlist, NetlistError};
pub use placement::{PlacementPlan, Site, Strategy};
pub use simulate::{EncryptionResult, Key, KeyBits, VectorSet, WrongKey};

pub type DelayTable = timing::DelayTable<f64>;
pub type PathReport = timing::PathReport<f64>;
pub type TimedPath = timing::TimedPath<f64>;
pub type ExactDelayTable = timing::DelayTable<Rational64>;
pub type ExactPathReport = timing::PathReport<Rational64>;

pub type FeFetDevice = device::FeFetDevice<f64>;
pub type EncryptionBlock = device::EncryptionBlock<f64>;
pub type OperatingPoint = device::OperatingPoint<f64>;
pub type DelayStats = device::DelayStats<f64>;
pub type ProgramRun = scanchain::ProgramRun<f64>;
