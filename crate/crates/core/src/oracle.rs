//! Exhaustive ground truth for small systems.
//!
//! Everything here is brute force over all `2ⁿ` spin configurations (and all
//! `2ᵐ` erasure patterns for disorder averages), independent of the GF(2)
//! machinery, so it can be used to check it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::Coupling;
use crate::error::{Error, Result};
use crate::model::{Instance, ModelParams};
use crate::stats::KahanSum;

pub const MAX_ENUM_VARS: usize = 20;
pub const MAX_ENUM_FACTORS: usize = 20;

/// Spins are encoded as bits, `σ_i = (-1)^{b_i}`.
fn mask_of(n: usize, support: &[usize]) -> Result<u32> {
    support.iter().try_fold(0u32, |m, &i| {
        if i >= n {
            Err(Error::IndexOutOfRange { index: i, n })
        } else {
            Ok(m ^ (1 << i))
        }
    })
}

fn spin(cfg: u32, mask: u32) -> i64 {
    if (cfg & mask).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// All satisfying configurations of an instance, enumerated explicitly.
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    n: usize,
    configs: Vec<u32>,
}

impl ExactGibbs {
    /// Revealed factors impose `σ_A = σ⁰_A` (with `σ⁰` all-ones when the
    /// instance is gauge-fixed).
    pub fn enumerate(inst: &Instance) -> Result<Self> {
        let n = inst.n();
        if n > MAX_ENUM_VARS {
            return Err(Error::EnumerationCap { what: "n", value: n, cap: MAX_ENUM_VARS });
        }
        let rows: Vec<(u32, i64)> = inst
            .factors
            .iter()
            .zip(&inst.couplings)
            .filter(|(_, c)| c.is_inf())
            .map(|(f, _)| Ok((mask_of(n, f)?, inst.planted_sign(f) as i64)))
            .collect::<Result<_>>()?;
        let configs = (0u32..1 << n)
            .filter(|&cfg| rows.iter().all(|&(m, s)| spin(cfg, m) == s))
            .collect();
        Ok(ExactGibbs { n, configs })
    }

    /// The partition function counts solutions (each has weight 1 once the
    /// infinite couplings are normalized away).
    pub fn z(&self) -> u64 {
        self.configs.len() as u64
    }

    pub fn log_z(&self) -> f64 {
        (self.z() as f64).ln()
    }

    /// `Σ_σ σ_S` over solutions.
    pub fn count(&self, support: &[usize]) -> Result<i64> {
        let m = mask_of(self.n, support)?;
        Ok(self.configs.iter().map(|&c| spin(c, m)).sum())
    }

    pub fn bracket(&self, support: &[usize]) -> Result<f64> {
        Ok(self.count(support)? as f64 / self.z() as f64)
    }

    /// `⟨Q_p⟩ = (1/n) Σ_i ⟨σ_i⟩^p` for `p` independent replicas.
    pub fn replica_overlap(&self, p: u32) -> f64 {
        let sum: f64 = (0..self.n)
            .map(|i| self.bracket(&[i]).expect("i < n").powi(p as i32))
            .sum();
        sum / self.n as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GibbsReport {
    pub log_z: f64,
    pub brackets: BTreeMap<Vec<usize>, f64>,
    pub replica_overlaps: BTreeMap<u32, f64>,
}

pub fn enumerate_gibbs(inst: &Instance, subsets: &[Vec<usize>], replicas: &[u32]) -> Result<GibbsReport> {
    let g = ExactGibbs::enumerate(inst)?;
    let brackets = subsets
        .iter()
        .map(|s| Ok((s.clone(), g.bracket(s)?)))
        .collect::<Result<_>>()?;
    let replica_overlaps = replicas.iter().map(|&p| (p, g.replica_overlap(p))).collect();
    Ok(GibbsReport { log_z: g.log_z(), brackets, replica_overlaps })
}

fn pattern_instance(params: ModelParams, factors: &[Vec<usize>], pattern: u32, planted: Option<&[i8]>) -> Instance {
    let couplings = (0..factors.len())
        .map(|a| if (pattern >> a) & 1 == 1 { Coupling::Inf } else { Coupling::Zero })
        .collect();
    Instance {
        params,
        seed: 0,
        factors: factors.to_vec(),
        couplings,
        planted: planted.map(<[i8]>::to_vec),
    }
}

fn check_factor_cap(m: usize) -> Result<()> {
    if m > MAX_ENUM_FACTORS {
        return Err(Error::EnumerationCap { what: "m", value: m, cap: MAX_ENUM_FACTORS });
    }
    Ok(())
}

/// Exact average over the `2ᵐ` erasure patterns of a fixed graph, each
/// factor revealed independently with probability `1 - q`. The observable
/// may return several values; they are averaged componentwise.
pub fn exact_disorder_average_many<F>(params: ModelParams, factors: &[Vec<usize>], observable: F) -> Result<Vec<f64>>
where
    F: Fn(&ExactGibbs) -> Result<Vec<f64>>,
{
    params.validate()?;
    let m = factors.len();
    check_factor_cap(m)?;
    let q = params.q;
    let mut acc: Vec<KahanSum> = Vec::new();
    for pattern in 0u32..1 << m {
        let revealed = pattern.count_ones() as i32;
        let w = (1.0 - q).powi(revealed) * q.powi(m as i32 - revealed);
        if w == 0.0 {
            continue;
        }
        let inst = pattern_instance(params, factors, pattern, None);
        inst.validate()?;
        let values = observable(&ExactGibbs::enumerate(&inst)?)?;
        if acc.is_empty() {
            acc = vec![KahanSum::default(); values.len()];
        }
        for (a, v) in acc.iter_mut().zip(values) {
            a.add(w * v);
        }
    }
    Ok(acc.iter().map(KahanSum::value).collect())
}

pub fn exact_disorder_average<F>(params: ModelParams, factors: &[Vec<usize>], observable: F) -> Result<f64>
where
    F: Fn(&ExactGibbs) -> Result<f64>,
{
    let v = exact_disorder_average_many(params, factors, |g| Ok(vec![observable(g)?]))?;
    Ok(v[0])
}

/// Symmetric difference of a collection of supports, so that
/// `Π_{S∈𝒞} σ_S = σ_{△𝒞}`.
pub fn symmetric_difference(collection: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = BTreeMap::<usize, bool>::new();
    for &i in collection.iter().flatten() {
        *seen.entry(i).or_default() ^= true;
    }
    seen.into_iter().filter_map(|(i, odd)| odd.then_some(i)).collect()
}

/// Largest `|𝔼⟨Π_{S∈𝒞} σ_S⟩ Π_{S∈𝒞} ⟨σ_S⟩ - 𝔼 Π_{S∈𝒞} ⟨σ_S⟩|` over the
/// given collections.
pub fn nishimori_check(params: ModelParams, factors: &[Vec<usize>], collections: &[Vec<Vec<usize>>]) -> Result<f64> {
    let products: Vec<Vec<usize>> = collections.iter().map(|c| symmetric_difference(c)).collect();
    let sides = exact_disorder_average_many(params, factors, |g| {
        let mut out = Vec::with_capacity(2 * collections.len());
        for (c, prod) in collections.iter().zip(&products) {
            let mut pi = 1.0;
            for s in c {
                pi *= g.bracket(s)?;
            }
            out.push(g.bracket(prod)? * pi);
            out.push(pi);
        }
        Ok(out)
    })?;
    Ok(sides
        .chunks(2)
        .map(|lr| (lr[0] - lr[1]).abs())
        .fold(0.0, f64::max))
}

/// Number of GKS violations over the given pairs, compared exactly in
/// integers: `N_S ≥ 0` and `Z·N_{S△T} - N_S·N_T ≥ 0`.
pub fn gks_violations(inst: &Instance, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<usize> {
    if !inst.is_gauge_fixed() {
        return Err(Error::NotGaugeFixed);
    }
    let g = ExactGibbs::enumerate(inst)?;
    let z = g.z() as i128;
    let mut bad = 0;
    for (s, t) in pairs {
        let ns = g.count(s)? as i128;
        let nt = g.count(t)? as i128;
        let nst = g.count(&symmetric_difference(&[s.clone(), t.clone()]))? as i128;
        if ns < 0 || nt < 0 || z * nst - ns * nt < 0 {
            bad += 1;
        }
    }
    Ok(bad)
}

pub fn gks_check(inst: &Instance, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<bool> {
    Ok(gks_violations(inst, pairs)? == 0)
}

/// For every erasure pattern, compares the planted system with its
/// gauge-transformed image: `ln Z` must agree, and
/// `⟨σ_S⟩_planted = σ⁰_S ⟨σ_S⟩_fixed` for every singleton and factor support.
pub fn gauge_invariance_check(params: ModelParams, factors: &[Vec<usize>], planted: &[i8]) -> Result<bool> {
    let m = factors.len();
    check_factor_cap(m)?;
    let mut probes: Vec<Vec<usize>> = (0..params.n).map(|i| vec![i]).collect();
    probes.extend(factors.iter().cloned());
    for pattern in 0u32..1 << m {
        let planted_inst = pattern_instance(params, factors, pattern, Some(planted));
        planted_inst.validate()?;
        let fixed = planted_inst.gauge_fixed();
        let gp = ExactGibbs::enumerate(&planted_inst)?;
        let gf = ExactGibbs::enumerate(&fixed)?;
        if gp.z() != gf.z() {
            return Ok(false);
        }
        for s in &probes {
            if gp.count(s)? != planted_inst.planted_sign(s) as i64 * gf.count(s)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stats::Moments;
    use rand::Rng;
    use std::f64::consts::LN_2;

    fn params(n: usize, k: usize, q: f64) -> ModelParams {
        ModelParams::new(n, k, 1.0, q).unwrap()
    }

    fn instance(n: usize, k: usize, factors: Vec<Vec<usize>>, couplings: Vec<Coupling>) -> Instance {
        Instance::from_parts(params(n, k, 0.0), factors, couplings, None).unwrap()
    }

    #[test]
    fn uniform_measure_brackets_vanish() {
        let inst = instance(5, 3, vec![], vec![]);
        let r = enumerate_gibbs(&inst, &[vec![], vec![0], vec![1, 3], vec![0, 1, 2, 3, 4]], &[1, 2]).unwrap();
        assert_eq!(r.brackets[&vec![]], 1.0);
        assert_eq!(r.brackets[&vec![0]], 0.0);
        assert_eq!(r.brackets[&vec![1, 3]], 0.0);
        assert!((r.log_z - 5.0 * LN_2).abs() < 1e-12);
        assert_eq!(r.replica_overlaps[&1], 0.0);
    }

    #[test]
    fn single_parity() {
        let inst = instance(3, 3, vec![vec![0, 1, 2]], vec![Coupling::Inf]);
        let g = ExactGibbs::enumerate(&inst).unwrap();
        assert_eq!(g.z(), 4);
        assert_eq!(g.bracket(&[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(g.bracket(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn four_variable_log_z() {
        let inst = instance(4, 3, vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3]], vec![Coupling::Inf; 3]);
        let r = enumerate_gibbs(&inst, &[vec![0], vec![1]], &[1, 3]).unwrap();
        assert!((r.log_z - LN_2).abs() < 1e-15);
        assert_eq!(r.brackets[&vec![0]], 1.0);
        assert_eq!(r.brackets[&vec![1]], 0.0);
        assert_eq!(r.replica_overlaps[&3], 0.25);
    }

    #[test]
    fn enumeration_cap() {
        let inst = instance(21, 3, vec![], vec![]);
        assert!(matches!(ExactGibbs::enumerate(&inst), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn disorder_average_examples() {
        let p = params(4, 3, 1.0);
        let f = vec![vec![0, 1, 2]];
        let v = exact_disorder_average(p, &f, |g| g.bracket(&[0, 1, 2])).unwrap();
        assert_eq!(v, 0.0);
        let p = params(4, 3, 0.3);
        let v = exact_disorder_average(p, &f, |g| g.bracket(&[0, 1, 2])).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        let many: Vec<Vec<usize>> = (0..21).map(|_| vec![0, 1, 2]).collect();
        assert!(exact_disorder_average(p, &many, |g| Ok(g.log_z())).is_err());
    }

    #[test]
    fn disorder_average_matches_sampling() {
        let p = params(7, 3, 0.4);
        let mut rng = rng_from_seed(12);
        let factors: Vec<Vec<usize>> = (0..3).map(|_| crate::model::random_subset(&mut rng, 7, 3)).collect();
        let obs = |g: &ExactGibbs| Ok(g.log_z() + g.bracket(&[0])?);
        let exact = exact_disorder_average(p, &factors, obs).unwrap();
        let mut acc = Moments::default();
        for _ in 0..100_000 {
            let pattern = (0..3).fold(0u32, |m, a| m | ((rng.random::<f64>() >= 0.4) as u32) << a);
            let inst = pattern_instance(p, &factors, pattern, None);
            acc.push(obs(&ExactGibbs::enumerate(&inst).unwrap()).unwrap());
        }
        assert!(acc.estimate().within(exact, 3.0), "{:?} vs {exact}", acc.estimate());
    }

    #[test]
    fn nishimori_examples() {
        let p = params(6, 3, 0.35);
        let a = vec![0, 2, 4];
        assert_eq!(nishimori_check(p, std::slice::from_ref(&a), &[vec![a.clone()]]).unwrap(), 0.0);
        let lhs_rhs = exact_disorder_average_many(p, std::slice::from_ref(&a), |g| {
            let b = g.bracket(&a)?;
            Ok(vec![b * b, b * b * b])
        })
        .unwrap();
        assert_eq!(lhs_rhs[0], lhs_rhs[1]);
        assert_eq!(nishimori_check(p, std::slice::from_ref(&a), &[vec![a.clone(), a.clone()]]).unwrap(), 0.0);
        let mut rng = rng_from_seed(3);
        let factors: Vec<Vec<usize>> = (0..4).map(|_| crate::model::random_subset(&mut rng, 6, 3)).collect();
        let coll: Vec<Vec<usize>> = (0..3).map(|_| crate::model::random_subset(&mut rng, 6, 2)).collect();
        assert!(nishimori_check(p, &factors, &[coll]).unwrap() <= 1e-12);
    }

    #[test]
    fn symmetric_difference_cancels() {
        assert_eq!(symmetric_difference(&[vec![0, 1], vec![1, 2]]), vec![0, 2]);
        assert_eq!(symmetric_difference(&[vec![3], vec![3]]), Vec::<usize>::new());
    }

    #[test]
    fn gks_extremes() {
        let pairs = vec![(vec![0], vec![1]), (vec![0, 1], vec![1, 2])];
        assert!(gks_check(&instance(4, 2, vec![], vec![]), &pairs).unwrap());
        let full = instance(4, 2, vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 1]], vec![Coupling::Inf; 4]);
        assert!(gks_check(&full, &pairs).unwrap());
    }

    #[test]
    fn gauge_examples() {
        let p = params(4, 2, 0.5);
        assert!(gauge_invariance_check(p, &[vec![0, 1]], &[1, 1, 1, 1]).unwrap());
        assert!(gauge_invariance_check(p, &[vec![0, 1]], &[1, -1, 1, -1]).unwrap());
        let p = params(6, 3, 0.5);
        let mut rng = rng_from_seed(9);
        let factors: Vec<Vec<usize>> = (0..3).map(|_| crate::model::random_subset(&mut rng, 6, 3)).collect();
        let planted: Vec<i8> = (0..6).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        assert!(gauge_invariance_check(p, &factors, &planted).unwrap());
    }

    #[test]
    fn planted_brackets_carry_sign() {
        let p = params(3, 3, 0.0);
        let inst = Instance::from_parts(p, vec![vec![0, 1, 2]], vec![Coupling::Inf], Some(vec![1, -1, 1])).unwrap();
        let g = ExactGibbs::enumerate(&inst).unwrap();
        assert_eq!(g.bracket(&[0, 1, 2]).unwrap(), -1.0);
    }
}
