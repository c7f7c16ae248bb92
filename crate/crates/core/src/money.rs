//! Fixed-point currency used for settlement.
//!
//! Bids and VCG payments are computed in `f64`, but every amount that moves
//! between a UE and a BS is rounded to micro-units first so that the ledger
//! balances exactly.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const MICROS_PER_UNIT: f64 = 1_000_000.0;

/// Serialized as a plain number of currency units; micro-unit values round-trip exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    /// Nearest micro-unit. Non-finite inputs map to zero.
    pub fn from_units(units: f64) -> Self {
        if !units.is_finite() {
            return Money::ZERO;
        }
        Money((units * MICROS_PER_UNIT).round() as i64)
    }

    /// Largest micro-unit amount not exceeding `units`.
    pub fn floor_units(units: f64) -> Self {
        if !units.is_finite() {
            return Money::ZERO;
        }
        Money((units * MICROS_PER_UNIT).floor() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn as_units(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_units())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Money::from_units)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.as_units())
    }
}
