//! The `(t, s)` interpolating ensemble and the numerical checks built on it.
//!
//! At coordinate `(t, s)` every variable carries half-edges from the past
//! steps `t' < t` (rate `αK/T` each) and from the current step (rate
//! `αKs/T`), each revealed with probability `x̃⁽ᵗ'⁾ = (1-q) r⁽ᵗ'⁾^{K-1}`;
//! `Poi(αn(T-t+1-s)/T)` genuine factors remain. Two side fields `H` and `H̃`
//! reveal a variable with probabilities `ε` and `δ n^{-θ}`. On the erasure
//! channel all of these are either erased or forcing, so every free entropy
//! is a GF(2) rank and every bracket is 0 or 1.
//!
//! Half-edge counts over past steps are drawn by Poisson splitting: the total
//! `Poi(αK(t-1)/T)` first, then a uniform step for each half-edge. This has
//! the same law as one independent count per step at a fraction of the cost.
//!
//! Every random decision consumes a uniform compared against its threshold,
//! so runs that differ only in `ε`, `δ` or the path share their randomness.

use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Coupling;
use crate::error::{Error, Result};
use crate::gf2::Gf2System;
use crate::model::{random_subset, ModelParams, Posterior, TupleLaw};
use crate::replica::{generalized_free_entropy, GeneralizedParams, RsParams};
use crate::rng::{derive_seed, rng_from_seed, stream_tag, Rng as SeededRng};
use crate::stats::{self, variance_estimate, Estimate, KahanSum, Moments};

pub const DEFAULT_THETA: f64 = 0.2;
pub const DEFAULT_TRIALS_PER_STEP: usize = 200;
pub const DEFAULT_S_GRID: usize = 11;
/// Sum-rule runs default to `T = 20 n`.
pub const DEFAULT_STEPS_PER_VARIABLE: usize = 20;
/// Exact `H̃` averaging is used when `n · 2^c` stays below this.
pub const EXACT_FIELD_BUDGET: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpParams {
    pub model: ModelParams,
    #[serde(rename = "T")]
    pub steps: usize,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
}

impl InterpParams {
    pub fn new(model: ModelParams, steps: usize, eps: f64, delta: f64, theta: f64) -> Result<Self> {
        let p = InterpParams { model, steps, eps, delta, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.steps == 0 {
            return Err(Error::param("T", "need at least one step"));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} not in [0, 1]")));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 0.2) {
            return Err(Error::param("theta", format!("{} not in (0, 1/5]", self.theta)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    /// `δ n^{-θ}`.
    pub fn delta_scaled(&self) -> f64 {
        self.delta * (self.model.n as f64).powf(-self.theta)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        InterpParams { eps, ..*self }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        InterpParams { delta, ..*self }
    }

    pub fn with_n(&self, n: usize) -> Self {
        InterpParams { model: ModelParams { n, ..self.model }, ..*self }
    }

    fn rs(&self) -> RsParams {
        RsParams { k: self.model.k, alpha: self.model.alpha, q: self.model.q }
    }
}

/// Revealed weights `r⁽ᵗ⁾` of the interpolation path and the derived
/// half-edge reveal probabilities `x̃⁽ᵗ⁾`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpPath {
    pub r: Vec<f64>,
    pub tilde_r: Vec<f64>,
    /// Standard error of each `r⁽ᵗ⁾` when it was estimated; zeros otherwise.
    pub se: Vec<f64>,
}

impl InterpPath {
    pub fn new(r: Vec<f64>, model: &ModelParams) -> Result<Self> {
        let ch = model.channel();
        let tilde_r = r.iter().map(|&x| ch.bp_update_prob(x, model.k)).collect::<Result<_>>()?;
        let se = vec![0.0; r.len()];
        Ok(InterpPath { r, tilde_r, se })
    }

    pub fn constant(steps: usize, r: f64, model: &ModelParams) -> Result<Self> {
        Self::new(vec![r; steps], model)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `Σ_{t'<t} x̃⁽ᵗ'⁾ + s x̃⁽ᵗ⁾`, the half-edge reveal mass seen at `(t, s)`.
    pub fn revealed_mass(&self, t: usize, s: f64) -> f64 {
        let past: f64 = self.tilde_r[..t - 1].iter().sum();
        if s > 0.0 {
            past + s * self.tilde_r[t - 1]
        } else {
            past
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfEdge {
    pub var: usize,
    /// Interpolation step the half-edge belongs to (1-based).
    pub step: usize,
    pub value: Coupling,
}

/// One draw of the `(t, s)` ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TsInstance {
    pub t: usize,
    pub s: f64,
    pub n: usize,
    pub half_edges: Vec<HalfEdge>,
    pub field_h: Vec<Coupling>,
    pub field_h_tilde: Vec<Coupling>,
    /// The uniforms behind `field_h_tilde`, kept so `δ` can be changed with
    /// everything else held fixed.
    pub h_tilde_uniforms: Vec<f64>,
    pub factors: Vec<Vec<usize>>,
    pub couplings: Vec<Coupling>,
    /// Set when the half-edges and `H` were folded into `field_h`.
    pub collapsed: bool,
}

fn coupling_below(u: f64, p: f64) -> Coupling {
    if u < p {
        Coupling::Inf
    } else {
        Coupling::Zero
    }
}

fn check_coordinates(params: &InterpParams, path: &InterpPath, t: usize, s: f64) -> Result<()> {
    params.validate()?;
    if t == 0 || t > params.steps {
        return Err(Error::param("t", format!("{t} not in 1..={}", params.steps)));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::param("s", format!("{s} not in [0, 1]")));
    }
    let need = if s > 0.0 { t } else { t - 1 };
    if path.len() < need {
        return Err(Error::param("path", format!("{} steps given, {need} needed at (t, s) = ({t}, {s})", path.len())));
    }
    Ok(())
}

/// Remaining genuine factors and the perturbation fields, shared by both builders.
fn draw_factor_block(params: &InterpParams, t: usize, s: f64, rng: &mut SeededRng) -> (Vec<Vec<usize>>, Vec<Coupling>) {
    let m = &params.model;
    let tf = params.steps as f64;
    let rate = m.alpha * m.n as f64 * (tf - t as f64 + 1.0 - s) / tf;
    let count = stats::poisson(rng, rate.max(0.0));
    let mut factors = Vec::with_capacity(count);
    let mut couplings = Vec::with_capacity(count);
    for _ in 0..count {
        factors.push(random_subset(rng, m.n, m.k));
        couplings.push(coupling_below(rng.random::<f64>(), 1.0 - m.q));
    }
    (factors, couplings)
}

/// Draw of the `(t, s)` ensemble following the construction step by step.
pub fn build_ts_instance(params: &InterpParams, path: &InterpPath, t: usize, s: f64, rng: &mut SeededRng) -> Result<TsInstance> {
    check_coordinates(params, path, t, s)?;
    let m = &params.model;
    let n = m.n;
    let tf = params.steps as f64;
    let step_rate = m.alpha * m.k as f64 / tf;
    let mut half_edges = Vec::new();
    for i in 0..n {
        let past = stats::poisson(rng, step_rate * (t - 1) as f64);
        for _ in 0..past {
            let step = rng.random_range(1..t);
            let value = coupling_below(rng.random::<f64>(), path.tilde_r[step - 1]);
            half_edges.push(HalfEdge { var: i, step, value });
        }
        let current = stats::poisson(rng, step_rate * s);
        for _ in 0..current {
            let value = coupling_below(rng.random::<f64>(), path.tilde_r[t - 1]);
            half_edges.push(HalfEdge { var: i, step: t, value });
        }
    }
    let (factors, couplings) = draw_factor_block(params, t, s, rng);
    let field_h = (0..n).map(|_| coupling_below(rng.random::<f64>(), params.eps)).collect();
    let h_tilde_uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let dn = params.delta_scaled();
    let field_h_tilde = h_tilde_uniforms.iter().map(|&u| coupling_below(u, dn)).collect();
    Ok(TsInstance {
        t,
        s,
        n,
        half_edges,
        field_h,
        field_h_tilde,
        h_tilde_uniforms,
        factors,
        couplings,
        collapsed: false,
    })
}

/// Draw with all half-edges and `H` of a variable folded into one effective
/// field revealed with probability `1 - (1-ε) e^{-(αK/T) Σ x̃}`; `H̃` is kept
/// separate. Forcing then happens with probability
/// `1 - (1-ε)(1-δn^{-θ}) e^{-(αK/T)(s x̃⁽ᵗ⁾ + Σ_{t'<t} x̃⁽ᵗ'⁾)}`.
pub fn build_ts_collapsed(params: &InterpParams, path: &InterpPath, t: usize, s: f64, rng: &mut SeededRng) -> Result<TsInstance> {
    check_coordinates(params, path, t, s)?;
    let m = &params.model;
    let n = m.n;
    let p_bar = 1.0 - (1.0 - params.eps) * (-m.alpha * m.k as f64 / params.steps as f64 * path.revealed_mass(t, s)).exp();
    let field_h = (0..n).map(|_| coupling_below(rng.random::<f64>(), p_bar)).collect();
    let (factors, couplings) = draw_factor_block(params, t, s, rng);
    let h_tilde_uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let dn = params.delta_scaled();
    let field_h_tilde = h_tilde_uniforms.iter().map(|&u| coupling_below(u, dn)).collect();
    Ok(TsInstance {
        t,
        s,
        n,
        half_edges: Vec::new(),
        field_h,
        field_h_tilde,
        h_tilde_uniforms,
        factors,
        couplings,
        collapsed: true,
    })
}

/// `1 - (1-ε)(1-δn^{-θ}) e^{-(αK/T)(s x̃⁽ᵗ⁾ + Σ_{t'<t} x̃⁽ᵗ'⁾)}`.
pub fn forcing_probability(params: &InterpParams, path: &InterpPath, t: usize, s: f64) -> f64 {
    let m = &params.model;
    1.0 - (1.0 - params.eps)
        * (1.0 - params.delta_scaled())
        * (-m.alpha * m.k as f64 / params.steps as f64 * path.revealed_mass(t, s)).exp()
}

impl TsInstance {
    /// Half-edges per variable, revealed or not.
    pub fn half_edge_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for h in &self.half_edges {
            c[h.var] += 1;
        }
        c
    }

    /// Half-edges plus factor memberships per variable.
    pub fn degrees(&self) -> Vec<usize> {
        let mut c = self.half_edge_counts();
        for f in &self.factors {
            for &i in f {
                c[i] += 1;
            }
        }
        c
    }

    /// Same instance with `H̃` re-thresholded at `δ n^{-θ} = delta_scaled`.
    pub fn with_delta_scaled(&self, delta_scaled: f64) -> TsInstance {
        TsInstance {
            field_h_tilde: self.h_tilde_uniforms.iter().map(|&u| coupling_below(u, delta_scaled)).collect(),
            ..self.clone()
        }
    }

    /// Everything except `H̃`: singleton rows for revealed half-edges and `H`,
    /// `K`-rows for revealed factors.
    pub fn base_system(&self) -> Gf2System {
        let mut sys = Gf2System::new(self.n);
        for h in self.half_edges.iter().filter(|h| h.value.is_inf()) {
            sys.add_row(&[h.var]).expect("variable index < n");
        }
        for (i, c) in self.field_h.iter().enumerate() {
            if c.is_inf() {
                sys.add_row(&[i]).expect("variable index < n");
            }
        }
        for (f, c) in self.factors.iter().zip(&self.couplings) {
            if c.is_inf() {
                sys.add_row(f).expect("factor indices < n");
            }
        }
        sys
    }

    pub fn to_gf2(&self) -> Gf2System {
        let mut sys = self.base_system();
        for (i, c) in self.field_h_tilde.iter().enumerate() {
            if c.is_inf() {
                sys.add_row(&[i]).expect("variable index < n");
            }
        }
        sys
    }

    pub fn posterior(&self) -> Posterior {
        Posterior::new(self.to_gf2())
    }

    pub fn free_entropy(&self) -> f64 {
        self.posterior().free_entropy()
    }
}

/// Mean of a per-trial statistic with the seeds that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub estimate: Estimate,
    pub seeds: Vec<u64>,
}

/// Runs `trials` independent draws in parallel; trial `i` uses
/// `derive_seed(seed, stream, i)`, so results do not depend on threading.
pub fn run_trials<T, F>(trials: usize, seed: u64, stream: u64, f: F) -> Result<(Vec<T>, Vec<u64>)>
where
    T: Send,
    F: Fn(&mut SeededRng) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let seeds: Vec<u64> = (0..trials as u64).map(|i| derive_seed(seed, stream, i)).collect();
    let values = seeds
        .par_iter()
        .map(|&sd| f(&mut rng_from_seed(sd)))
        .collect::<Result<Vec<T>>>()?;
    Ok((values, seeds))
}

fn coordinate_stream(purpose: u64, t: usize, s: f64) -> u64 {
    stream_tag(&[purpose, t as u64, s.to_bits()])
}

const STREAM_FREE_ENTROPY: u64 = 1;
const STREAM_PATH: u64 = 2;
const STREAM_REMAINDER: u64 = 3;
const STREAM_DERIVATIVE: u64 = 4;
const STREAM_CONCENTRATION: u64 = 5;

/// Monte Carlo estimate of `h_{t,s;ε,δ} = (1/n) E ln Z`.
pub fn ts_free_entropy(params: &InterpParams, path: &InterpPath, t: usize, s: f64, trials: usize, seed: u64) -> Result<TrialEstimate> {
    let (values, seeds) = run_trials(trials, seed, coordinate_stream(STREAM_FREE_ENTROPY, t, s), |rng| {
        Ok(build_ts_instance(params, path, t, s, rng)?.free_entropy())
    })?;
    Ok(TrialEstimate { estimate: Estimate::from_samples(&values), seeds })
}

/// Closed form at the end point `(T, 1)`, where only fields remain:
/// `ln 2 · (1-ε)(1-δn^{-θ}) e^{-(αK/T) Σₜ x̃⁽ᵗ⁾}`.
pub fn endpoint_free_entropy(params: &InterpParams, path: &InterpPath) -> f64 {
    LN_2 * (1.0 - forcing_probability(params, path, params.steps, 1.0))
}

/// `(1/n) E_{H̃} ln Z` for a draw whose `H̃` is averaged out. Exact when
/// `n · 2^c ≤ 2²⁰` for `c` undetermined variables (a field on a determined
/// variable changes nothing), otherwise Monte Carlo over `H̃` alone.
pub fn partially_averaged_free_entropy(ts: &TsInstance, delta_scaled: f64, samples: usize, rng: &mut SeededRng) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&delta_scaled) {
        return Err(Error::param("delta", format!("scaled value {delta_scaled} not in [0, 1]")));
    }
    let base = ts.base_system();
    let n = ts.n;
    let candidates: Vec<usize> = (0..n).filter(|&i| !base.is_determined(i)).collect();
    let c = candidates.len();
    let exact = c < usize::BITS as usize - 1 && n.saturating_mul(1usize << c) <= EXACT_FIELD_BUDGET;
    if delta_scaled == 0.0 || c == 0 {
        return Ok(Estimate::exact(crate::model::free_entropy_of(&base)));
    }
    if exact {
        let mut acc = KahanSum::default();
        for mask in 0u64..1 << c {
            let k = mask.count_ones() as i32;
            let w = delta_scaled.powi(k) * (1.0 - delta_scaled).powi(c as i32 - k);
            if w == 0.0 {
                continue;
            }
            let mut sys = base.clone();
            for (j, &i) in candidates.iter().enumerate() {
                if (mask >> j) & 1 == 1 {
                    sys.add_row(&[i])?;
                }
            }
            acc.add(w * crate::model::free_entropy_of(&sys));
        }
        return Ok(Estimate::exact(acc.value()));
    }
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let mut acc = Moments::default();
    for _ in 0..samples {
        let mut sys = base.clone();
        for &i in &candidates {
            if rng.random::<f64>() < delta_scaled {
                sys.add_row(&[i])?;
            }
        }
        acc.push(crate::model::free_entropy_of(&sys));
    }
    Ok(acc.estimate())
}

/// Moment-matched path: `r⁽ᵗ⁾ = E⟨Q₁⟩_{t,0;ε,0}`, estimated step by step
/// from draws that only see `r⁽¹⁾..r⁽ᵗ⁻¹⁾`.
pub fn adaptive_path(params: &InterpParams, trials_per_step: usize, seed: u64) -> Result<InterpPath> {
    params.validate()?;
    let no_delta = params.with_delta(0.0);
    let mut path = InterpPath { r: Vec::with_capacity(params.steps), tilde_r: Vec::new(), se: Vec::new() };
    let ch = params.model.channel();
    for t in 1..=params.steps {
        let (values, _) = run_trials(trials_per_step, seed, coordinate_stream(STREAM_PATH, t, 0.0), |rng| {
            Ok(build_ts_instance(&no_delta, &path, t, 0.0, rng)?.posterior().mean_overlap())
        })?;
        let e = Estimate::from_samples(&values);
        path.r.push(e.mean);
        path.tilde_r.push(ch.bp_update_prob(e.mean, params.model.k)?);
        path.se.push(e.se);
    }
    Ok(path)
}

/// How the extra factor in the remainder is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderOptions {
    pub trials: usize,
    /// Random `K`-tuples per instance for `⟨σ_B⟩`.
    pub tuple_samples: usize,
    pub law: TupleLaw,
}

impl Default for RemainderOptions {
    fn default() -> Self {
        RemainderOptions { trials: 4, tuple_samples: 64, law: TupleLaw::Distinct }
    }
}

/// `ℛ = (1-q) ln 2 · E[⟨σ_B⟩ - K r^{K-1}(⟨Q₁⟩ - r) - r^K]` with `r = r⁽ᵗ⁾`.
///
/// With [`TupleLaw::Distinct`] `B` is a fresh factor-shaped subset and the
/// sum rule holds exactly at finite `n`; [`TupleLaw::WithReplacement`] gives
/// `⟨Q₁ᴷ⟩`, which differs by `O(1/n)`.
pub fn remainder_estimate(params: &InterpParams, path: &InterpPath, t: usize, s: f64, opts: &RemainderOptions, seed: u64) -> Result<Estimate> {
    let values = remainder_samples(params, path, t, s, opts, seed)?;
    Ok(Estimate::from_samples(&values))
}

fn remainder_samples(params: &InterpParams, path: &InterpPath, t: usize, s: f64, opts: &RemainderOptions, seed: u64) -> Result<Vec<f64>> {
    if path.len() < t {
        return Err(Error::param("path", format!("needs r⁽ᵗ⁾ for t = {t}")));
    }
    let k = params.model.k;
    let r = path.r[t - 1];
    let pref = (1.0 - params.model.q) * LN_2;
    let (values, _) = run_trials(opts.trials, seed, coordinate_stream(STREAM_REMAINDER, t, s), |rng| {
        let post = build_ts_instance(params, path, t, s, rng)?.posterior();
        let sigma_b = post.sampled_tuple_mean(k, opts.tuple_samples, opts.law, rng)?.mean;
        let q1 = post.mean_overlap();
        let rk1 = r.powi(k as i32 - 1);
        Ok(pref * (sigma_b - k as f64 * rk1 * (q1 - r) - rk1 * r))
    })?;
    Ok(values)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumRuleReport {
    pub lhs: Estimate,
    pub generalized: f64,
    pub remainder_integral: Estimate,
    pub residual: f64,
    pub residual_se: f64,
    /// `∫₀¹ ℛ_{t,s} ds` for each step.
    pub per_step: Vec<Estimate>,
}

impl SumRuleReport {
    pub fn z_score(&self) -> f64 {
        if self.residual_se > 0.0 {
            self.residual / self.residual_se
        } else if self.residual.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Evaluates both sides of
/// `h_{1,0;ε,δ} = h̃_{ε,δ}(path) + (α/T) Σₜ ∫₀¹ ℛ_{t,s;ε,δ} ds`.
pub fn sum_rule_check(
    params: &InterpParams,
    path: &InterpPath,
    grid_s: usize,
    lhs_trials: usize,
    opts: &RemainderOptions,
    seed: u64,
) -> Result<SumRuleReport> {
    params.validate()?;
    if grid_s < 2 {
        return Err(Error::param("grid_s", "need at least two points"));
    }
    if path.len() != params.steps {
        return Err(Error::param("path", format!("{} steps for T = {}", path.len(), params.steps)));
    }
    if opts.trials < 2 {
        return Err(Error::param("trials", "the remainder needs at least two trials per point for an error bar"));
    }
    let lhs = ts_free_entropy(params, path, 1, 0.0, lhs_trials, seed)?.estimate;
    let gp = GeneralizedParams {
        path: path.r.clone(),
        eps: params.eps,
        delta: params.delta,
        theta: params.theta,
        n: params.n(),
    };
    let generalized = generalized_free_entropy(&gp, &params.rs())?;

    let h = 1.0 / (grid_s - 1) as f64;
    let weights: Vec<f64> = (0..grid_s).map(|j| if j == 0 || j + 1 == grid_s { 0.5 * h } else { h }).collect();
    let per_step = (1..=params.steps)
        .into_par_iter()
        .map(|t| {
            let mut mean = 0.0;
            let mut var = 0.0;
            for (j, w) in weights.iter().enumerate() {
                let s = j as f64 * h;
                let e = remainder_estimate(params, path, t, s, opts, seed)?;
                mean += w * e.mean;
                var += w * w * e.se * e.se;
            }
            Ok(Estimate { mean, se: var.sqrt(), samples: grid_s * opts.trials })
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = params.model.alpha / params.steps as f64;
    let mut total = KahanSum::default();
    let mut var = 0.0;
    for e in &per_step {
        total.add(e.mean);
        var += e.se * e.se;
    }
    let remainder_integral = Estimate {
        mean: scale * total.value(),
        se: scale * var.sqrt(),
        samples: per_step.iter().map(|e| e.samples).sum(),
    };
    let residual = lhs.mean - generalized - remainder_integral.mean;
    let residual_se = (lhs.se.powi(2) + remainder_integral.se.powi(2)).sqrt();
    Ok(SumRuleReport { lhs, generalized, remainder_integral, residual, residual_se, per_step })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub finite_difference: Estimate,
    pub formula: Estimate,
    /// `|fd - formula| / max(|formula|, tiny)`.
    pub relative_error: f64,
    /// `|fd - formula|` over the combined standard error.
    pub z_score: f64,
}

/// `dh/dδ = -ln 2 / (n^{1+θ}(1 - δn^{-θ})) · Σᵢ (1 - E⟨σᵢ⟩)`, for one sample.
fn delta_formula(params: &InterpParams, q1: f64) -> f64 {
    let n = params.n() as f64;
    -LN_2 / (n.powf(params.theta) * (1.0 - params.delta_scaled())) * (1.0 - q1)
}

/// Central difference of `h_{t,s}` in `δ` (common random numbers for both
/// sides) against the closed derivative.
pub fn delta_derivative_check(
    params: &InterpParams,
    path: &InterpPath,
    t: usize,
    s: f64,
    trials: usize,
    step: f64,
    seed: u64,
) -> Result<DerivativeReport> {
    if !(step > 0.0 && params.delta - step >= 0.0 && params.delta + step <= 1.0) {
        return Err(Error::param("step", format!("δ ± {step} leaves [0, 1]")));
    }
    let scale = (params.n() as f64).powf(-params.theta);
    let (pairs, _) = run_trials(trials, seed, coordinate_stream(STREAM_DERIVATIVE, t, s), |rng| {
        let ts = build_ts_instance(params, path, t, s, rng)?;
        let up = ts.with_delta_scaled((params.delta + step) * scale).free_entropy();
        let down = ts.with_delta_scaled((params.delta - step) * scale).free_entropy();
        Ok(((up - down) / (2.0 * step), delta_formula(params, ts.posterior().mean_overlap())))
    })?;
    let fd = Estimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let formula = Estimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    if fd.se > 0.0 && fd.se > formula.mean.abs() {
        return Err(Error::NoiseDominated { step, se: fd.se });
    }
    Ok(derivative_report(fd, formula))
}

fn derivative_report(fd: Estimate, formula: Estimate) -> DerivativeReport {
    let diff = (fd.mean - formula.mean).abs();
    let se = (fd.se.powi(2) + formula.se.powi(2)).sqrt();
    DerivativeReport {
        finite_difference: fd,
        formula,
        relative_error: diff / formula.mean.abs().max(1e-300),
        z_score: if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY },
    }
}

/// Graph of a draw with its randomness in couplings and forcing averaged
/// out exactly: `2ᵐ` coupling patterns times `2ⁿ` forcing patterns.
#[derive(Clone, Debug)]
pub struct ExactFieldAverage {
    n: usize,
    q: f64,
    /// Per-variable probability of being forced by a half-edge or `H`.
    base_forcing: Vec<f64>,
    /// Per pattern `(coupling mask, forcing mask)`: free entropy and the
    /// number of undetermined variables.
    table: Vec<(u32, u32, f64, usize)>,
    m: usize,
}

pub const EXACT_MAX_VARS: usize = 10;
pub const EXACT_MAX_FACTORS: usize = 8;

impl ExactFieldAverage {
    pub fn new(params: &InterpParams, path: &InterpPath, ts: &TsInstance) -> Result<Self> {
        let n = ts.n;
        let m = ts.factors.len();
        if n > EXACT_MAX_VARS {
            return Err(Error::EnumerationCap { what: "n", value: n, cap: EXACT_MAX_VARS });
        }
        if m > EXACT_MAX_FACTORS {
            return Err(Error::EnumerationCap { what: "m", value: m, cap: EXACT_MAX_FACTORS });
        }
        let mut base_forcing = vec![params.eps; n];
        for h in &ts.half_edges {
            let x = path.tilde_r[h.step - 1];
            base_forcing[h.var] = 1.0 - (1.0 - base_forcing[h.var]) * (1.0 - x);
        }
        let mut table = Vec::with_capacity(1 << (m + n));
        for cm in 0u32..1 << m {
            for fm in 0u32..1 << n {
                let mut sys = Gf2System::new(n);
                for (a, f) in ts.factors.iter().enumerate() {
                    if (cm >> a) & 1 == 1 {
                        sys.add_row(f)?;
                    }
                }
                for i in 0..n {
                    if (fm >> i) & 1 == 1 {
                        sys.add_row(&[i])?;
                    }
                }
                let free = crate::model::free_entropy_of(&sys);
                table.push((cm, fm, free, n - sys.determined_count()));
            }
        }
        Ok(ExactFieldAverage { n, q: params.model.q, base_forcing, table, m })
    }

    /// `(h, Σᵢ(1 - E⟨σᵢ⟩))` at scaled field strength `δ n^{-θ}`.
    pub fn evaluate(&self, delta_scaled: f64) -> (f64, f64) {
        let p: Vec<f64> = self.base_forcing.iter().map(|&b| 1.0 - (1.0 - b) * (1.0 - delta_scaled)).collect();
        let mut h = KahanSum::default();
        let mut free = KahanSum::default();
        for &(cm, fm, f, undetermined) in &self.table {
            let revealed = cm.count_ones() as i32;
            let mut w = (1.0 - self.q).powi(revealed) * self.q.powi(self.m as i32 - revealed);
            for (i, &pi) in p.iter().enumerate() {
                w *= if (fm >> i) & 1 == 1 { pi } else { 1.0 - pi };
            }
            h.add(w * f);
            free.add(w * undetermined as f64);
        }
        (h.value(), free.value())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDerivative {
    pub finite_difference: f64,
    pub formula: f64,
    pub abs_error: f64,
}

/// Exact version of [`delta_derivative_check`] on one small graph: the
/// graph is drawn once, then couplings and fields are averaged exactly and
/// `dh/dδ` is taken with a five-point stencil.
pub fn delta_derivative_exact(
    params: &InterpParams,
    path: &InterpPath,
    t: usize,
    s: f64,
    step: f64,
    rng: &mut SeededRng,
) -> Result<ExactDerivative> {
    if !(step > 0.0 && params.delta - 2.0 * step >= 0.0 && params.delta + 2.0 * step <= 1.0) {
        return Err(Error::param("step", format!("δ ± 2·{step} leaves [0, 1]")));
    }
    let ts = build_ts_instance(params, path, t, s, rng)?;
    let avg = ExactFieldAverage::new(params, path, &ts)?;
    let scale = (params.n() as f64).powf(-params.theta);
    let h = |d: f64| avg.evaluate(d * scale).0;
    let d = params.delta;
    let fd = (-h(d + 2.0 * step) + 8.0 * h(d + step) - 8.0 * h(d - step) + h(d - 2.0 * step)) / (12.0 * step);
    let n = avg.n as f64;
    let undetermined = avg.evaluate(params.delta_scaled()).1;
    let formula = -LN_2 / (n.powf(1.0 + params.theta) * (1.0 - params.delta_scaled())) * undetermined;
    Ok(ExactDerivative { finite_difference: fd, formula, abs_error: (fd - formula).abs() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// `∫ dε E⟨(Q₁ - ⟨Q₁⟩)²⟩` over the window.
    pub thermal_integral: Estimate,
    pub thermal_bound: f64,
    /// `Var ⟨Q₁⟩` across instances at the window midpoint.
    pub disorder_variance: Estimate,
    /// `Var H` across instances, `H` the free entropy averaged over `H̃`,
    /// corrected for the Monte Carlo noise of that average.
    pub free_entropy_variance: Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationOptions {
    pub t: usize,
    pub s: f64,
    pub trials: usize,
    pub eps_grid: usize,
    /// Window `[n^{-γ}, 2 n^{-γ}]`.
    pub gamma: f64,
    pub field_samples: usize,
}

impl Default for ConcentrationOptions {
    fn default() -> Self {
        ConcentrationOptions { t: 1, s: 0.0, trials: 200, eps_grid: 5, gamma: 0.5, field_samples: 32 }
    }
}

/// Thermal, disorder and free-entropy fluctuations for each size in `n_list`.
/// `params.eps` is ignored; `ε` ranges over the window.
pub fn concentration_report(
    params: &InterpParams,
    path: &InterpPath,
    n_list: &[usize],
    opts: &ConcentrationOptions,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if n_list.is_empty() {
        return Err(Error::param("n_list", "empty"));
    }
    if opts.eps_grid < 2 {
        return Err(Error::param("eps_grid", "need at least two points"));
    }
    n_list
        .iter()
        .map(|&n| {
            let base = params.with_n(n);
            base.validate()?;
            let eps_lo = (n as f64).powf(-opts.gamma);
            let eps_hi = (2.0 * eps_lo).min(1.0);
            let h = (eps_hi - eps_lo) / (opts.eps_grid - 1) as f64;
            let mut mean = 0.0;
            let mut var = 0.0;
            for j in 0..opts.eps_grid {
                let eps = eps_lo + j as f64 * h;
                let w = if j == 0 || j + 1 == opts.eps_grid { 0.5 * h } else { h };
                let p = base.with_eps(eps);
                let stream = stream_tag(&[STREAM_CONCENTRATION, n as u64, j as u64]);
                let (vals, _) = run_trials(opts.trials, seed, stream, |rng| {
                    Ok(build_ts_instance(&p, path, opts.t, opts.s, rng)?.posterior().thermal_overlap_variance())
                })?;
                let e = Estimate::from_samples(&vals);
                mean += w * e.mean;
                var += w * w * e.se * e.se;
            }
            let thermal_integral = Estimate { mean, se: var.sqrt(), samples: opts.trials * opts.eps_grid };

            let mid = base.with_eps(0.5 * (eps_lo + eps_hi));
            let dn = mid.delta_scaled();
            let stream = stream_tag(&[STREAM_CONCENTRATION, n as u64, u64::MAX]);
            let (rows, _) = run_trials(opts.trials, seed, stream, |rng| {
                let ts = build_ts_instance(&mid, path, opts.t, opts.s, rng)?;
                let q1 = ts.posterior().mean_overlap();
                let big_h = partially_averaged_free_entropy(&ts, dn, opts.field_samples, rng)?;
                Ok((q1, big_h))
            })?;
            let q1s: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let hs: Vec<f64> = rows.iter().map(|r| r.1.mean).collect();
            let noise: f64 = rows.iter().map(|r| r.1.se * r.1.se).sum::<f64>() / rows.len() as f64;
            let mut fe = variance_estimate(&hs);
            fe.mean -= noise;
            Ok(ConcentrationRow {
                n,
                eps_lo,
                eps_hi,
                thermal_integral,
                thermal_bound: 3.0 / n as f64,
                disorder_variance: variance_estimate(&q1s),
                free_entropy_variance: fe,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Instance;

    fn model(n: usize, alpha: f64, q: f64) -> ModelParams {
        ModelParams::new(n, 3, alpha, q).unwrap()
    }

    fn interp(n: usize, alpha: f64, q: f64, steps: usize, eps: f64, delta: f64) -> InterpParams {
        InterpParams::new(model(n, alpha, q), steps, eps, delta, DEFAULT_THETA).unwrap()
    }

    #[test]
    fn validation() {
        let m = model(10, 0.2, 0.5);
        assert!(InterpParams::new(m, 0, 0.1, 0.1, 0.2).is_err());
        assert!(InterpParams::new(m, 5, 1.1, 0.1, 0.2).is_err());
        assert!(InterpParams::new(m, 5, 0.1, 0.1, 0.3).is_err());
        let p = interp(10, 0.2, 0.5, 5, 0.0, 0.0);
        let path = InterpPath::constant(5, 0.5, &m).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(build_ts_instance(&p, &path, 0, 0.0, &mut rng).is_err());
        assert!(build_ts_instance(&p, &path, 6, 0.0, &mut rng).is_err());
        assert!(build_ts_instance(&p, &path, 2, 1.5, &mut rng).is_err());
    }

    #[test]
    fn path_tilde_matches_bp_update() {
        let m = model(10, 0.2, 0.3);
        let path = InterpPath::new(vec![0.0, 0.5, 1.0], &m).unwrap();
        for (r, x) in path.r.iter().zip(&path.tilde_r) {
            assert_eq!(*x, m.channel().bp_update_prob(*r, 3).unwrap());
        }
    }

    #[test]
    fn end_point_has_no_factors() {
        let p = interp(30, 0.5, 0.5, 4, 0.1, 0.1);
        let path = InterpPath::constant(4, 0.5, &p.model).unwrap();
        for seed in 0..100 {
            let ts = build_ts_instance(&p, &path, 4, 1.0, &mut rng_from_seed(seed)).unwrap();
            assert!(ts.factors.is_empty());
        }
    }

    #[test]
    fn zero_path_reveals_no_half_edges() {
        let p = interp(30, 0.5, 0.2, 6, 0.0, 0.0);
        let path = InterpPath::constant(6, 0.0, &p.model).unwrap();
        for seed in 0..50 {
            let ts = build_ts_instance(&p, &path, 5, 0.7, &mut rng_from_seed(seed)).unwrap();
            assert!(ts.half_edges.iter().all(|h| h.value == Coupling::Zero));
        }
    }

    #[test]
    fn start_point_matches_model_ensemble() {
        let p = interp(40, 0.6, 0.3, 10, 0.0, 0.0);
        let path = InterpPath::constant(10, 0.5, &p.model).unwrap();
        let draws = 2000;
        let mut a_m = Vec::new();
        let mut a_h = Vec::new();
        let mut b_m = Vec::new();
        let mut b_h = Vec::new();
        for seed in 0..draws {
            let ts = build_ts_instance(&p, &path, 1, 0.0, &mut rng_from_seed(seed)).unwrap();
            assert!(ts.half_edges.is_empty());
            a_m.push(ts.factors.len() as f64);
            a_h.push(ts.free_entropy());
            let inst = Instance::generate(p.model, 1_000_000 + seed).unwrap();
            b_m.push(inst.factors.len() as f64);
            b_h.push(inst.free_entropy());
        }
        assert!(stats::ks_two_sample(&a_m, &b_m).1 > 0.01);
        assert!(stats::ks_two_sample(&a_h, &b_h).1 > 0.01);
    }

    #[test]
    fn collapsed_forcing_examples() {
        let p = interp(20, 0.2, 0.3, 10, 0.0, 0.0);
        let path = InterpPath::constant(10, 0.5, &p.model).unwrap();
        assert_eq!(forcing_probability(&p, &path, 1, 0.0), 0.0);
        let all = p.with_eps(1.0);
        assert_eq!(forcing_probability(&all, &path, 3, 0.5), 1.0);
        let ts = build_ts_collapsed(&all, &path, 3, 0.5, &mut rng_from_seed(1)).unwrap();
        assert_eq!(ts.free_entropy(), 0.0);
    }

    /// The half-edge splitting against a literal per-step loop.
    #[test]
    fn splitting_matches_per_step_draws() {
        let p = interp(3, 1.0, 0.0, 8, 0.0, 0.0);
        let path = InterpPath::new((0..8).map(|i| i as f64 / 8.0).collect(), &p.model).unwrap();
        let t = 6;
        let rate = p.model.alpha * 3.0 / 8.0;
        let draws = 20_000;
        let mut ours = vec![Vec::new(); t];
        let mut literal = vec![Vec::new(); t];
        let mut rng = rng_from_seed(77);
        for seed in 0..draws {
            let ts = build_ts_instance(&p, &path, t, 0.4, &mut rng_from_seed(seed)).unwrap();
            let mut per_step = vec![0.0; t];
            for h in ts.half_edges.iter().filter(|h| h.var == 0) {
                per_step[h.step - 1] += 1.0;
            }
            let mut lit = vec![0.0; t];
            for (tp, slot) in lit.iter_mut().enumerate() {
                let r = if tp + 1 < t { rate } else { rate * 0.4 };
                *slot = stats::poisson(&mut rng, r) as f64;
            }
            for j in 0..t {
                ours[j].push(per_step[j]);
                literal[j].push(lit[j]);
            }
        }
        for j in 0..t {
            let (a, b) = (Estimate::from_samples(&ours[j]), Estimate::from_samples(&literal[j]));
            let se = (a.se * a.se + b.se * b.se).sqrt();
            assert!((a.mean - b.mean).abs() <= 4.0 * se, "step {}: {a:?} vs {b:?}", j + 1);
        }
    }

    #[test]
    fn collapsed_matches_literal_in_mean() {
        let p = interp(60, 0.2, 0.4, 10, 0.1, 0.5);
        let mut rng = rng_from_seed(8);
        let path = InterpPath::new(crate::replica::random_path(&mut rng, 10), &p.model).unwrap();
        let draws = 10_000;
        let a: Vec<f64> = (0..draws).map(|s| build_ts_instance(&p, &path, 3, 0.5, &mut rng_from_seed(s)).unwrap().free_entropy()).collect();
        let b: Vec<f64> = (0..draws).map(|s| build_ts_collapsed(&p, &path, 3, 0.5, &mut rng_from_seed(s + draws)).unwrap().free_entropy()).collect();
        let (ea, eb) = (Estimate::from_samples(&a), Estimate::from_samples(&b));
        assert!((ea.mean - eb.mean).abs() <= 3.0 * (ea.se.powi(2) + eb.se.powi(2)).sqrt(), "{ea:?} {eb:?}");
    }

    #[test]
    fn free_entropy_fully_erased() {
        let p = interp(30, 0.5, 1.0, 5, 0.0, 0.0);
        let path = InterpPath::constant(5, 0.7, &p.model).unwrap();
        let e = ts_free_entropy(&p, &path, 3, 0.2, 50, 1).unwrap();
        assert_eq!(e.estimate.mean, LN_2);
        assert_eq!(e.estimate.se, 0.0);
        assert_eq!(e.seeds.len(), 50);
    }

    #[test]
    fn end_point_closed_form() {
        let p = interp(50, 0.4, 0.3, 5, 0.1, 0.3);
        let path = InterpPath::new(vec![0.2, 0.4, 0.5, 0.9, 0.6], &p.model).unwrap();
        let e = ts_free_entropy(&p, &path, 5, 1.0, 4000, 3).unwrap().estimate;
        assert!(e.within(endpoint_free_entropy(&p, &path), 3.0), "{e:?}");
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let p = interp(40, 0.5, 0.3, 5, 0.1, 0.1);
        let path = InterpPath::constant(5, 0.4, &p.model).unwrap();
        let a = ts_free_entropy(&p, &path, 2, 0.5, 64, 11).unwrap();
        let b = ts_free_entropy(&p, &path, 2, 0.5, 64, 11).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn partial_average_examples() {
        let p = interp(8, 0.6, 0.2, 5, 0.1, 0.0);
        let path = InterpPath::constant(5, 0.5, &p.model).unwrap();
        let mut rng = rng_from_seed(4);
        let ts = build_ts_instance(&p, &path, 2, 0.3, &mut rng).unwrap();
        let e = partially_averaged_free_entropy(&ts, 0.0, 10, &mut rng).unwrap();
        assert_eq!(e.mean, ts.free_entropy());

        let full = p.with_eps(1.0);
        let ts = build_ts_instance(&full, &path, 2, 0.3, &mut rng).unwrap();
        assert_eq!(partially_averaged_free_entropy(&ts, 0.5, 10, &mut rng).unwrap().mean, 0.0);
    }

    #[test]
    fn partial_average_exact_matches_sampling() {
        let p = interp(8, 0.5, 0.3, 5, 0.05, 0.0);
        let path = InterpPath::constant(5, 0.3, &p.model).unwrap();
        let mut rng = rng_from_seed(21);
        let ts = build_ts_instance(&p, &path, 2, 0.5, &mut rng).unwrap();
        let dn = 0.3;
        let exact = partially_averaged_free_entropy(&ts, dn, 0, &mut rng).unwrap();
        assert_eq!(exact.se, 0.0);
        let base = ts.base_system();
        let mut acc = Moments::default();
        for _ in 0..1_000_000 {
            let mut sys = base.clone();
            for i in 0..8 {
                if rng.random::<f64>() < dn {
                    sys.add_row(&[i]).unwrap();
                }
            }
            acc.push(crate::model::free_entropy_of(&sys));
        }
        assert!(acc.estimate().within(exact.mean, 3.0), "{:?} vs {exact:?}", acc.estimate());
    }

    #[test]
    fn adaptive_path_examples() {
        let p = interp(100, 0.2, 1.0, 6, 0.0, 0.0);
        let path = adaptive_path(&p, 20, 5).unwrap();
        assert!(path.r.iter().all(|&r| r == 0.0));
        let p = p.with_eps(0.2);
        let path = adaptive_path(&p, 50, 5).unwrap();
        for (r, se) in path.r.iter().zip(&path.se) {
            assert!((r - 0.2).abs() <= 3.0 * se + 1e-12, "{r} ± {se}");
        }
    }

    #[test]
    fn remainder_examples() {
        let p = interp(40, 0.5, 1.0, 4, 0.1, 0.1);
        let path = InterpPath::constant(4, 0.5, &p.model).unwrap();
        let opts = RemainderOptions { trials: 8, ..Default::default() };
        let e = remainder_estimate(&p, &path, 2, 0.5, &opts, 1).unwrap();
        assert_eq!(e.mean, 0.0);
        let p = interp(40, 0.5, 0.3, 4, 0.1, 0.1);
        let zero = InterpPath::constant(4, 0.0, &p.model).unwrap();
        let e = remainder_estimate(&p, &zero, 2, 0.5, &opts, 1).unwrap();
        assert!(e.mean >= 0.0);
    }

    #[test]
    fn sum_rule_degenerate_channel() {
        let p = interp(30, 0.5, 1.0, 6, 0.1, 0.1);
        let path = InterpPath::constant(6, 0.5, &p.model).unwrap();
        let opts = RemainderOptions { trials: 2, ..Default::default() };
        let rep = sum_rule_check(&p, &path, 3, 2000, &opts, 2).unwrap();
        assert_eq!(rep.remainder_integral.mean, 0.0);
        assert!(rep.residual.abs() <= 3.0 * rep.residual_se + 1e-12, "{rep:?}");
    }

    #[test]
    fn sum_rule_without_factors() {
        let p = interp(30, 0.0, 0.4, 6, 0.1, 0.1);
        let path = InterpPath::constant(6, 0.5, &p.model).unwrap();
        let opts = RemainderOptions { trials: 2, ..Default::default() };
        let rep = sum_rule_check(&p, &path, 3, 2000, &opts, 2).unwrap();
        assert!(rep.residual.abs() <= 3.0 * rep.residual_se + 1e-12, "{rep:?}");
    }

    #[test]
    fn sum_rule_small_system() {
        let p = interp(40, 0.5, 0.4, 20, 0.1, 0.2);
        let path = InterpPath::new((0..20).map(|i| 0.2 + 0.03 * i as f64).collect(), &p.model).unwrap();
        let opts = RemainderOptions { trials: 8, tuple_samples: 32, law: TupleLaw::Distinct };
        let rep = sum_rule_check(&p, &path, 5, 20_000, &opts, 9).unwrap();
        assert!(rep.residual.abs() <= 3.0 * rep.residual_se, "{rep:?}");
    }

    #[test]
    fn delta_derivative_field_only() {
        let p = interp(50, 0.0, 1.0, 4, 0.0, 0.5);
        let path = InterpPath::constant(4, 0.0, &p.model).unwrap();
        let mut rng = rng_from_seed(1);
        let p8 = p.with_n(8);
        let ex = delta_derivative_exact(&p8, &path, 2, 0.5, 1e-3, &mut rng).unwrap();
        let expect = -LN_2 * 8f64.powf(-DEFAULT_THETA);
        assert!((ex.formula - expect).abs() < 1e-12);
        assert!((ex.finite_difference - expect).abs() < 1e-9);
        let rep = delta_derivative_check(&p, &path, 2, 0.5, 4000, 0.05, 3).unwrap();
        assert!(rep.z_score <= 3.0, "{rep:?}");
    }

    #[test]
    fn delta_derivative_fully_forced() {
        let p = interp(8, 0.5, 0.3, 4, 1.0, 0.5);
        let path = InterpPath::constant(4, 0.5, &p.model).unwrap();
        let ex = delta_derivative_exact(&p, &path, 2, 0.5, 1e-3, &mut rng_from_seed(2)).unwrap();
        assert_eq!(ex.formula, 0.0);
        assert!(ex.finite_difference.abs() < 1e-12);
    }

    #[test]
    fn delta_derivative_exact_generic() {
        let p = interp(7, 0.6, 0.3, 5, 0.2, 0.5);
        let path = InterpPath::new(vec![0.3, 0.5, 0.6, 0.7, 0.8], &p.model).unwrap();
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            match delta_derivative_exact(&p, &path, 3, 0.4, 1e-3, &mut rng) {
                Ok(ex) => assert!(ex.abs_error <= 1e-8, "{ex:?}"),
                Err(Error::EnumerationCap { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn concentration_fully_determined() {
        // γ = 0 puts the ε window at [1, 1], so every variable is forced.
        let p = interp(50, 0.3, 0.3, 4, 0.0, 0.1);
        let path = InterpPath::constant(4, 0.5, &p.model).unwrap();
        let opts = ConcentrationOptions { t: 2, s: 0.5, trials: 20, eps_grid: 2, gamma: 0.0, field_samples: 4 };
        let rows = concentration_report(&p, &path, &[50], &opts, 1).unwrap();
        assert_eq!(rows[0].thermal_integral.mean, 0.0);
        assert_eq!(rows[0].disorder_variance.mean, 0.0);
        assert_eq!(rows[0].free_entropy_variance.mean, 0.0);
    }
}
