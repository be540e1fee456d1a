use serde::{Deserialize, Serialize};

/// A pair of per-polarization quantities, typically powers in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolPair {
    pub v: f64,
    pub h: f64,
}

impl PolPair {
    pub fn new(v: f64, h: f64) -> Self {
        PolPair { v, h }
    }

    pub fn both(x: f64) -> Self {
        PolPair { v: x, h: x }
    }

    pub fn swapped(self) -> Self {
        PolPair { v: self.h, h: self.v }
    }

    pub fn total(self) -> f64 {
        self.v + self.h
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}
