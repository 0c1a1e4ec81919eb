//! Currency amounts as integer minor units.
//!
//! Revenue sums are compared at 0.1% resolution, so amounts are held as
//! `i64` minor units (1 major unit = 100 minor units) and only converted
//! to floats inside learners.

use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// An amount in integer minor units.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(i64);

/// Minor units per major unit.
pub const MINOR_PER_MAJOR: i64 = 100;

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_minor(minor: i64) -> Money {
        Money(minor)
    }

    pub const fn from_major(major: i64) -> Money {
        Money(major * MINOR_PER_MAJOR)
    }

    pub const fn minor(self) -> i64 {
        self.0
    }

    /// Value in minor units as a float, for learners and metrics.
    pub const fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Nearest amount to a float count of minor units.
    pub fn from_f64_rounded(minor: f64) -> Money {
        Money(num_traits::Float::round(minor) as i64)
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    /// Canonical form: the minor-unit integer, as written in CSV files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl core::str::FromStr for Money {
    type Err = core::num::ParseIntError;
    fn from_str(s: &str) -> Result<Money, Self::Err> {
        s.parse::<i64>().map(Money)
    }
}
