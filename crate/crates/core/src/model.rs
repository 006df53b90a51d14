//! Censored block model instances and their exact posterior.
//!
//! After gauge fixing (planted configuration all-ones) a revealed measurement
//! on the subset `A` forces `σ_A = 1`. Writing `σ_i = (-1)^{b_i}` this is the
//! parity row `Σ_{i∈A} b_i = 0`, so the posterior is uniform on the kernel of
//! the revealed rows: `ln Z = (n - rank) ln 2` and `⟨σ_S⟩ = 1` iff the
//! indicator of `S` lies in the row space, `0` otherwise.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{BecChannel, Coupling};
use crate::error::{Error, Result};
use crate::gf2::Gf2System;
use crate::rng::{rng_from_seed, Rng as SeededRng};
use crate::stats::{self, Estimate, Moments};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(n: usize, k: usize, alpha: f64, q: f64) -> Result<Self> {
        let p = ModelParams { n, k, alpha, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "need at least one variable"));
        }
        if self.k < 2 {
            return Err(Error::param("K", format!("factor degree {} < 2", self.k)));
        }
        if self.k > self.n {
            return Err(Error::param("K", format!("K = {} exceeds n = {}", self.k, self.n)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{} is not a finite non-negative number", self.alpha)));
        }
        BecChannel::new(self.q)?;
        Ok(())
    }

    pub fn channel(&self) -> BecChannel {
        BecChannel::new(self.q).expect("validated erasure probability")
    }
}

/// A realized factor graph with its couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(flatten)]
    pub params: ModelParams,
    pub seed: u64,
    pub factors: Vec<Vec<usize>>,
    pub couplings: Vec<Coupling>,
    /// Planted `±1` configuration; `None` means gauge-fixed (all ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<i8>>,
}

/// Uniform `k`-subset of `0..n`, sorted.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut s = index::sample(rng, n, k).into_vec();
    s.sort_unstable();
    s
}

impl Instance {
    /// Gauge-fixed instance: `m ~ Poi(αn)` uniform `K`-subsets with couplings
    /// drawn from the channel.
    pub fn generate(params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = rng_from_seed(seed);
        Ok(Self::generate_with(params, seed, &mut rng))
    }

    fn generate_with(params: ModelParams, seed: u64, rng: &mut SeededRng) -> Self {
        let ch = params.channel();
        let m = stats::poisson(rng, params.alpha * params.n as f64);
        let mut factors = Vec::with_capacity(m);
        let mut couplings = Vec::with_capacity(m);
        for _ in 0..m {
            factors.push(random_subset(rng, params.n, params.k));
            couplings.push(ch.sample_coupling(rng));
        }
        Instance {
            params,
            seed,
            factors,
            couplings,
            planted: None,
        }
    }

    /// Same graph and erasure law, with a uniformly random planted
    /// configuration. A revealed coupling then forces `σ_A = σ⁰_A`.
    pub fn generate_planted(params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut inst = Self::generate_with(params, seed, &mut rng);
        let planted = (0..params.n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        inst.planted = Some(planted);
        Ok(inst)
    }

    /// Build from explicit parts (validated).
    pub fn from_parts(
        params: ModelParams,
        factors: Vec<Vec<usize>>,
        couplings: Vec<Coupling>,
        planted: Option<Vec<i8>>,
    ) -> Result<Self> {
        let inst = Instance {
            params,
            seed: 0,
            factors,
            couplings,
            planted,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.factors.len() != self.couplings.len() {
            return Err(Error::param(
                "couplings",
                format!("{} couplings for {} factors", self.couplings.len(), self.factors.len()),
            ));
        }
        for f in &self.factors {
            if f.len() != self.params.k {
                return Err(Error::param("factors", format!("factor {f:?} does not have K = {} members", self.params.k)));
            }
            if let Some(&index) = f.iter().find(|&&i| i >= self.params.n) {
                return Err(Error::IndexOutOfRange { index, n: self.params.n });
            }
            let mut s = f.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != f.len() {
                return Err(Error::param("factors", format!("factor {f:?} repeats a variable")));
            }
        }
        if let Some(p) = &self.planted {
            if p.len() != self.params.n || p.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::param("planted", "expected n entries of ±1"));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn is_gauge_fixed(&self) -> bool {
        self.planted
            .as_ref()
            .is_none_or(|p| p.iter().all(|&s| s == 1))
    }

    /// The gauge-transformed image: same graph, planted all-ones. Revealed
    /// couplings `σ⁰_A · ∞` become `+∞`, erased ones stay `0`.
    pub fn gauge_fixed(&self) -> Instance {
        Instance {
            planted: None,
            ..self.clone()
        }
    }

    /// `σ⁰_S` for the planted configuration (1 when gauge-fixed).
    pub fn planted_sign(&self, support: &[usize]) -> i8 {
        self.planted
            .as_ref()
            .map_or(1, |p| support.iter().map(|&i| p[i]).product())
    }

    pub fn revealed_count(&self) -> usize {
        self.couplings.iter().filter(|c| c.is_inf()).count()
    }

    /// Homogeneous parity system of the revealed factors. For a planted
    /// instance the actual constraints are an affine shift of it with the same
    /// solution count.
    pub fn to_gf2(&self) -> Gf2System {
        let mut sys = Gf2System::new(self.params.n);
        for (f, c) in self.factors.iter().zip(&self.couplings) {
            if c.is_inf() {
                sys.add_row(f).expect("validated factor indices");
            }
        }
        sys
    }

    /// `(1/n) ln Z = (1 - rank/n) ln 2`, in nats per variable.
    pub fn free_entropy(&self) -> f64 {
        free_entropy_of(&self.to_gf2())
    }

    pub fn posterior(&self) -> Result<Posterior> {
        if !self.is_gauge_fixed() {
            return Err(Error::NotGaugeFixed);
        }
        Ok(Posterior::new(self.to_gf2()))
    }

    pub fn marginal(&self, support: &[usize]) -> Result<u8> {
        self.posterior()?.marginal(support)
    }

    pub fn mean_overlap(&self) -> Result<f64> {
        Ok(self.posterior()?.mean_overlap())
    }

    pub fn overlap_power_moment(
        &self,
        k: usize,
        samples: usize,
        rng: &mut SeededRng,
    ) -> Result<Estimate> {
        self.posterior()?
            .overlap_power_moment(k, samples, TupleLaw::WithReplacement, rng)
    }
}

pub fn free_entropy_of(sys: &Gf2System) -> f64 {
    (1.0 - sys.rank() as f64 / sys.n() as f64) * LN_2
}

/// How index tuples are drawn when averaging `⟨σ_{i₁}⋯σ_{iₖ}⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleLaw {
    /// All `n^k` tuples, repeats allowed: the moment `⟨Q₁ᵏ⟩`.
    WithReplacement,
    /// Distinct indices, the law factors are drawn from.
    Distinct,
}

/// Exhaustive tuple averages are used when the tuple count is at most this.
pub const EXHAUSTIVE_TUPLES: usize = 1_000_000;

/// Gibbs brackets of a gauge-fixed erasure-channel posterior.
#[derive(Clone, Debug)]
pub struct Posterior {
    sys: Gf2System,
}

impl Posterior {
    pub fn new(sys: Gf2System) -> Self {
        Posterior { sys }
    }

    pub fn system(&self) -> &Gf2System {
        &self.sys
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn free_entropy(&self) -> f64 {
        free_entropy_of(&self.sys)
    }

    /// `⟨σ_S⟩ ∈ {0, 1}`.
    pub fn marginal(&self, support: &[usize]) -> Result<u8> {
        Ok(self.sys.in_row_space(support)? as u8)
    }

    /// `⟨Q₁⟩`: fraction of variables fixed by the constraints.
    pub fn mean_overlap(&self) -> f64 {
        self.sys.determined_count() as f64 / self.n() as f64
    }

    /// Estimate of `(1/|tuples|) Σ ⟨σ_{i₁}⋯σ_{iₖ}⟩`; exhaustive (se = 0) when
    /// the number of tuples is at most [`EXHAUSTIVE_TUPLES`].
    pub fn overlap_power_moment(
        &self,
        k: usize,
        samples: usize,
        law: TupleLaw,
        rng: &mut SeededRng,
    ) -> Result<Estimate> {
        let n = self.n();
        if k == 0 {
            return Err(Error::param("k", "moment order must be at least 1"));
        }
        if law == TupleLaw::Distinct && k > n {
            return Err(Error::param("k", format!("{k} distinct indices out of {n}")));
        }
        match tuple_count(n, k, law) {
            Some(total) if total <= EXHAUSTIVE_TUPLES => Ok(self.exhaustive_moment(k, law, total)),
            _ => self.sampled_tuple_mean(k, samples, law, rng),
        }
    }

    /// Monte Carlo mean of `⟨σ_{i₁}⋯σ_{iₖ}⟩` over `samples` random tuples,
    /// never exhaustive.
    pub fn sampled_tuple_mean(&self, k: usize, samples: usize, law: TupleLaw, rng: &mut SeededRng) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::param("samples", "need at least one sample"));
        }
        if law == TupleLaw::Distinct && k > self.n() {
            return Err(Error::param("k", format!("{k} distinct indices out of {}", self.n())));
        }
        let mut acc = Moments::default();
        for _ in 0..samples {
            let t = self.sample_tuple(k, law, rng);
            acc.push(self.marginal(&t)? as f64);
        }
        Ok(acc.estimate())
    }

    pub(crate) fn sample_tuple(&self, k: usize, law: TupleLaw, rng: &mut SeededRng) -> Vec<usize> {
        let n = self.n();
        match law {
            TupleLaw::WithReplacement => (0..k).map(|_| rng.random_range(0..n)).collect(),
            TupleLaw::Distinct => random_subset(rng, n, k),
        }
    }

    fn exhaustive_moment(&self, k: usize, law: TupleLaw, total: usize) -> Estimate {
        let n = self.n();
        let mut idx = vec![0usize; k];
        let mut hits = 0usize;
        let mut seen = 0usize;
        loop {
            let distinct_ok = law == TupleLaw::WithReplacement || {
                let mut s = idx.clone();
                s.sort_unstable();
                s.windows(2).all(|w| w[0] != w[1])
            };
            if distinct_ok {
                seen += 1;
                if self.sys.in_row_space(&idx).expect("indices < n") {
                    hits += 1;
                }
            }
            // odometer
            let mut pos = 0;
            loop {
                if pos == k {
                    debug_assert_eq!(seen, total);
                    return Estimate {
                        mean: hits as f64 / seen as f64,
                        se: 0.0,
                        samples: seen,
                    };
                }
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    /// Thermal variance `⟨(Q₁ - ⟨Q₁⟩)²⟩ = (1/n²) Σ_{i,j} (⟨σ_iσ_j⟩ - ⟨σ_i⟩⟨σ_j⟩)`.
    /// On the erasure channel a pair contributes 1 iff `σ_iσ_j` is fixed while
    /// `σ_i` is not, i.e. both share the same nonzero coset label.
    pub fn thermal_overlap_variance(&self) -> f64 {
        let n = self.n();
        let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
        for i in 0..n {
            let label = self.sys.coset_label(i);
            if label.iter().any(|&w| w != 0) {
                *counts.entry(label).or_default() += 1;
            }
        }
        let pairs: usize = counts.values().map(|c| c * c).sum();
        pairs as f64 / (n * n) as f64
    }
}

/// Number of ordered tuples under `law`, `None` on overflow.
fn tuple_count(n: usize, k: usize, law: TupleLaw) -> Option<usize> {
    let mut total: usize = 1;
    for j in 0..k {
        let f = match law {
            TupleLaw::WithReplacement => n,
            TupleLaw::Distinct => n - j,
        };
        total = total.checked_mul(f)?;
    }
    Some(total)
}
