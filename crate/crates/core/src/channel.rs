//! Binary erasure channel and the two-point message family.
//!
//! Half-log-likelihoods produced by the erasure channel are either `0`
//! (erased) or `+∞` (revealed, gauge-fixed). Couplings are therefore a
//! two-valued enum and message distributions are described by a single
//! number: the revealed weight, i.e. the mass at `+∞`. The erasure mass
//! `1 - r` is only used where formulas are naturally written in it (the
//! scalar replica functional and density evolution).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A gauge-fixed half-log-likelihood: erased (`0`) or revealed (`+∞`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Zero,
    Inf,
}

impl Coupling {
    pub fn is_inf(self) -> bool {
        matches!(self, Coupling::Inf)
    }

    /// `tanh` of the half-log-likelihood: 0 or 1.
    pub fn tanh(self) -> f64 {
        match self {
            Coupling::Zero => 0.0,
            Coupling::Inf => 1.0,
        }
    }
}

/// Binary erasure channel with erasure probability `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BecChannel {
    q: f64,
}

impl BecChannel {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", format!("erasure probability {q} not in [0, 1]")));
        }
        Ok(BecChannel { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Probability that a measurement is revealed.
    pub fn revealed(&self) -> f64 {
        1.0 - self.q
    }

    /// Draw a gauge-fixed coupling: `Inf` with probability `1 - q`.
    pub fn sample_coupling<R: Rng + ?Sized>(&self, rng: &mut R) -> Coupling {
        if rng.random::<f64>() < self.q {
            Coupling::Zero
        } else {
            Coupling::Inf
        }
    }

    /// One BP update on the revealed weight: a factor-to-variable message is
    /// revealed iff the coupling and all `k - 1` incoming messages are,
    /// giving `(1 - q) r^(k-1)`.
    pub fn bp_update_prob(&self, r: f64, k: usize) -> Result<f64> {
        if k < 2 {
            return Err(Error::param("K", format!("factor degree {k} < 2")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::param("r", format!("revealed weight {r} not in [0, 1]")));
        }
        Ok(self.revealed() * r.powi(k as i32 - 1))
    }
}

/// Element of the two-point family: `(1 - r) Δ₀ + r Δ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMassMix {
    r_inf: f64,
}

impl PointMassMix {
    pub fn new(r_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_inf) {
            return Err(Error::param("r_inf", format!("{r_inf} not in [0, 1]")));
        }
        Ok(PointMassMix { r_inf })
    }

    /// Build from the erasure mass `x = 1 - r`.
    pub fn from_erasure(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::param("x", format!("erasure mass {x} not in [0, 1]")));
        }
        Ok(PointMassMix { r_inf: 1.0 - x })
    }

    pub fn revealed(&self) -> f64 {
        self.r_inf
    }

    pub fn erasure(&self) -> f64 {
        1.0 - self.r_inf
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coupling {
        if rng.random::<f64>() < self.r_inf {
            Coupling::Inf
        } else {
            Coupling::Zero
        }
    }

    /// `∫ (tanh h)^p dx(h)`, summed over the two atoms.
    pub fn tanh_moment(&self, p: u32) -> f64 {
        let atoms = [(1.0 - self.r_inf, Coupling::Zero), (self.r_inf, Coupling::Inf)];
        atoms
            .iter()
            .map(|&(w, h)| w * h.tanh().powi(p as i32))
            .sum()
    }

    /// Odd and even tanh-moments agree for every `k <= k_max`.
    pub fn check_symmetry_moments(&self, k_max: u32) -> bool {
        (1..=k_max).all(|k| self.tanh_moment(2 * k - 1) == self.tanh_moment(2 * k))
    }
}
