// SPDX-License-Identifier: Apache-2.0

//! Numeric traits shared by the timing and device models.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Delay arithmetic. Only ring operations and ordering are needed, so exact
/// rationals work as well as floats.
pub trait Delay:
    Num + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("delay value must be representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_negative(self) -> bool {
        self < Self::zero()
    }
}

impl Delay for f32 {}
impl Delay for f64 {}
impl Delay for Ratio<i64> {}
impl Delay for Ratio<i128> {}

/// Floating point scalar for the analog-ish device model: f32 or f64.
pub trait Real:
    num_traits::Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits in scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_delays_are_exact() {
        let a = Ratio::<i64>::from_f64_lossy(0.1);
        let sum = (0..10).fold(Ratio::from_integer(0), |acc, _| acc + a);
        assert_eq!(sum, Ratio::from_integer(1));
    }

    #[test]
    fn real_literal() {
        assert_eq!(f32::lit(1.5), 1.5f32);
    }
}
