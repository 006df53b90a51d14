//! Replica-symmetric prediction on the erasure family.
//!
//! Restricted to two-point message laws `x Δ₀ + (1 - x) Δ∞` the functional is
//! a scalar function of the erasure mass `x`:
//!
//! `h(x) = ln 2 · [e^{-A(1-x)^{K-1}} + A(1-x)^{K-1} - α(K-1)(1-q)(1-x)^K - α(1-q)]`
//!
//! with `A = αK(1-q)`. Its stationary points are the fixed points of the
//! density evolution map `z ↦ exp(-A(1-z)^{K-1})`.

use std::f64::consts::LN_2;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{BecChannel, PointMassMix};
use crate::error::{Error, Result};
use crate::rng::Rng as SeededRng;
use crate::stats::{self, Estimate, Moments};

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
pub const DEFAULT_THETA: f64 = 0.2;

/// `(K, α, q)` for the scalar functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub q: f64,
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::param(name, format!("{x} not in [0, 1]")))
    }
}

impl RsParams {
    pub fn new(k: usize, alpha: f64, q: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::param("K", format!("factor degree {k} < 2")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{alpha} is not a finite non-negative number")));
        }
        check_unit("q", q)?;
        Ok(RsParams { k, alpha, q })
    }

    /// `A = αK(1-q)`, the mean number of revealed factor messages.
    pub fn a(&self) -> f64 {
        self.alpha * self.k as f64 * (1.0 - self.q)
    }

    fn km1(&self) -> i32 {
        self.k as i32 - 1
    }

    /// The scalar replica-symmetric free entropy at erasure mass `x`.
    pub fn h_rs_scalar(&self, x: f64) -> f64 {
        let y = 1.0 - x;
        let a = self.a();
        let p = y.powi(self.km1());
        let b = self.alpha * (self.k as f64 - 1.0) * (1.0 - self.q);
        LN_2 * ((-a * p).exp() + a * p - b * y * p - self.alpha * (1.0 - self.q))
    }

    /// `∂h/∂x = ln 2 · A(K-1)(1-x)^{K-2} (e^{-A(1-x)^{K-1}} - x)`.
    pub fn h_rs_derivative(&self, x: f64) -> f64 {
        let y = 1.0 - x;
        let a = self.a();
        LN_2 * a * (self.k as f64 - 1.0) * y.powi(self.k as i32 - 2) * self.stationarity(x)
    }

    /// `de_map(x) - x`; its sign is the sign of `∂h/∂x` on `[0, 1)`.
    pub fn stationarity(&self, x: f64) -> f64 {
        self.de_map(x) - x
    }

    /// One density-evolution step on the erasure mass.
    pub fn de_map(&self, z: f64) -> f64 {
        (-self.a() * (1.0 - z).powi(self.km1())).exp()
    }

    pub fn de_map_derivative(&self, z: f64) -> f64 {
        let y = 1.0 - z;
        self.a() * (self.k as f64 - 1.0) * y.powi(self.k as i32 - 2) * self.de_map(z)
    }
}

/// Direct Monte Carlo of the replica functional with literal `tanh`
/// arithmetic on point-mass messages.
pub fn mc_replica_functional(p: &RsParams, x: f64, samples: usize, rng: &mut SeededRng) -> Result<Estimate> {
    check_unit("x", x)?;
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let msg = PointMassMix::from_erasure(x)?;
    let ch = BecChannel::new(p.q)?;
    let k = p.k;
    let mut acc = Moments::default();
    for _ in 0..samples {
        // variable-node term: l incoming factor messages
        let l = stats::poisson(rng, p.alpha * k as f64);
        let (mut plus, mut minus) = (1.0, 1.0);
        for _ in 0..l {
            let t = ch.sample_coupling(rng).tanh() * (0..k - 1).map(|_| msg.sample(rng).tanh()).product::<f64>();
            plus *= 1.0 + t;
            minus *= 1.0 - t;
        }
        let mut v = (plus + minus).ln();
        // factor term
        let t = ch.sample_coupling(rng).tanh() * (0..k).map(|_| msg.sample(rng).tanh()).product::<f64>();
        v -= p.alpha * (k as f64 - 1.0) * (1.0 + t).ln();
        // channel normalization
        v -= p.alpha * (1.0 + ch.sample_coupling(rng).tanh()).ln();
        acc.push(v);
    }
    Ok(acc.estimate())
}

/// Outcome of maximizing the scalar functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub x: f64,
    pub h: f64,
}

impl Maximizer {
    /// Larger `h` wins; exact ties go to the larger `x`.
    fn better_than(&self, other: &Maximizer) -> bool {
        self.h > other.h || (self.h == other.h && self.x > other.x)
    }
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Global maximum of the scalar functional over `x ∈ [0, 1]`.
///
/// A dense grid locates every local maximum; each is refined by golden
/// section to width `refine_tol` and, when interior, polished by bisection on
/// the stationarity condition, since `h` is too flat at a maximum to pin `x`
/// below about `1e-8` from function values alone.
pub fn sup_h_rs(p: &RsParams, grid_points: usize, refine_tol: f64) -> Result<Maximizer> {
    if grid_points < 3 {
        return Err(Error::param("grid_points", format!("{grid_points} < 3")));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::param("refine_tol", "must be positive"));
    }
    let step = 1.0 / (grid_points - 1) as f64;
    let xs: Vec<f64> = (0..grid_points).map(|i| i as f64 * step).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| p.h_rs_scalar(x)).collect();
    let mut best = Maximizer { x: xs[0], h: hs[0] };
    for (&x, &h) in xs.iter().zip(&hs) {
        let cand = Maximizer { x, h };
        if !best.better_than(&cand) {
            best = cand;
        }
    }
    for i in 0..grid_points {
        let left_ok = i == 0 || hs[i] >= hs[i - 1];
        let right_ok = i + 1 == grid_points || hs[i] >= hs[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(grid_points - 1)];
        let xr = golden_section_max(|x| p.h_rs_scalar(x), lo, hi, refine_tol);
        let mut cand = Maximizer { x: xr, h: p.h_rs_scalar(xr) };
        if let Some(root) = polish_stationary(p, lo, hi) {
            let polished = Maximizer { x: root, h: p.h_rs_scalar(root) };
            if polished.h >= cand.h - 1e-15 {
                cand = polished;
            }
        }
        if cand.better_than(&best) {
            best = cand;
        }
    }
    Ok(best)
}

/// Root of the stationarity condition where `∂h` goes from `+` to `-`
/// inside `[lo, hi] ⊂ [0, 1)`.
fn polish_stationary(p: &RsParams, lo: f64, hi: f64) -> Option<f64> {
    let hi = hi.min(1.0 - f64::EPSILON);
    if p.a() == 0.0 || hi <= lo {
        return None;
    }
    let (glo, ghi) = (p.stationarity(lo), p.stationarity(hi));
    (glo > 0.0 && ghi < 0.0).then(|| bisect(|x| p.stationarity(x), lo, hi))
}

/// `h` on a grid together with its maximizer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicaCurve {
    pub params: RsParams,
    pub grid: Vec<(f64, f64)>,
    pub argmax_x: f64,
    pub argmax_h: f64,
}

pub fn replica_curve(p: &RsParams, grid_points: usize, refine_tol: f64) -> Result<ReplicaCurve> {
    let best = sup_h_rs(p, grid_points, refine_tol)?;
    let step = 1.0 / (grid_points - 1) as f64;
    let grid = (0..grid_points)
        .map(|i| {
            let x = i as f64 * step;
            (x, p.h_rs_scalar(x))
        })
        .collect();
    Ok(ReplicaCurve { params: *p, grid, argmax_x: best.x, argmax_h: best.h })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

/// Which iteration start converged to a fixed point, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basin {
    FromZero,
    FromOne,
    FromBoth,
    ScanOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub z: f64,
    pub residual: f64,
    pub stability: Stability,
    pub basin: Basin,
}

/// Number of sign-change scan cells used by [`de_fixed_points`].
pub const DE_SCAN_POINTS: usize = 10_001;

fn iterate_de(p: &RsParams, start: f64, tol: f64, max_iters: usize) -> Result<f64> {
    let mut z = start;
    for _ in 0..max_iters {
        let next = p.de_map(z);
        if (next - z).abs() <= tol {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::NoConvergence { iters: max_iters, residual: (p.de_map(z) - z).abs() })
}

/// All fixed points of the density evolution map on `[0, 1]`.
pub fn de_fixed_points(p: &RsParams, tol: f64, max_iters: usize) -> Result<Vec<FixedPoint>> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let from_zero = iterate_de(p, 0.0, tol, max_iters)?;
    let from_one = iterate_de(p, 1.0, tol, max_iters)?;

    let mut roots = vec![from_zero, from_one];
    let f = |z: f64| z - p.de_map(z);
    let step = 1.0 / (DE_SCAN_POINTS - 1) as f64;
    let mut prev = (0.0, f(0.0));
    for i in 1..DE_SCAN_POINTS {
        let z = i as f64 * step;
        let fz = f(z);
        if fz == 0.0 {
            roots.push(z);
        } else if prev.1 != 0.0 && (prev.1 > 0.0) != (fz > 0.0) {
            roots.push(bisect(f, prev.0, z));
        }
        prev = (z, fz);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-7);

    let mut out = Vec::with_capacity(roots.len());
    for z in roots {
        let residual = f(z).abs();
        if residual > tol {
            return Err(Error::NoConvergence { iters: max_iters, residual });
        }
        let slope = p.de_map_derivative(z).abs();
        let stability = if (slope - 1.0).abs() < 1e-9 {
            Stability::Marginal
        } else if slope < 1.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        let near = |w: f64| (w - z).abs() <= 1e-7;
        let basin = match (near(from_zero), near(from_one)) {
            (true, true) => Basin::FromBoth,
            (true, false) => Basin::FromZero,
            (false, true) => Basin::FromOne,
            (false, false) => Basin::ScanOnly,
        };
        out.push(FixedPoint { z, residual, stability, basin });
    }
    Ok(out)
}

/// A path of revealed weights with the perturbation strengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedParams {
    pub path: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
    pub n: usize,
}

impl GeneralizedParams {
    pub fn validate(&self) -> Result<()> {
        if self.path.is_empty() {
            return Err(Error::param("path", "need at least one step"));
        }
        for &r in &self.path {
            check_unit("path", r)?;
        }
        check_unit("eps", self.eps)?;
        check_unit("delta", self.delta)?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param("theta", format!("{} not in (0, 1)", self.theta)));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        Ok(())
    }

    /// `δ n^{-θ}`, the probability that the small field is revealed.
    pub fn delta_scaled(&self) -> f64 {
        self.delta * (self.n as f64).powf(-self.theta)
    }
}

/// Closed form of the generalized functional on two-point laws.
pub fn generalized_free_entropy(gp: &GeneralizedParams, p: &RsParams) -> Result<f64> {
    gp.validate()?;
    let t = gp.path.len() as f64;
    let k = p.k as i32;
    let s1: f64 = gp.path.iter().map(|r| r.powi(k - 1)).sum();
    let sk: f64 = gp.path.iter().map(|r| r.powi(k)).sum();
    let mean_revealed = p.a() * s1 / t;
    let b = p.alpha * (p.k as f64 - 1.0) * (1.0 - p.q);
    Ok(LN_2
        * (mean_revealed + (1.0 - gp.eps) * (1.0 - gp.delta_scaled()) * (-mean_revealed).exp()
            - b * sk / t
            - p.alpha * (1.0 - p.q)))
}

/// Direct Monte Carlo of the generalized functional with literal `tanh`
/// arithmetic (`e^{-2∞} = 0`).
pub fn mc_generalized_free_entropy(
    gp: &GeneralizedParams,
    p: &RsParams,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<Estimate> {
    gp.validate()?;
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let ch = BecChannel::new(p.q)?;
    let laws: Vec<PointMassMix> = gp.path.iter().map(|&r| PointMassMix::new(r)).collect::<Result<_>>()?;
    let t_steps = laws.len() as f64;
    let k = p.k;
    let rate = p.alpha * k as f64 / t_steps;
    let dn = gp.delta_scaled();
    let mut acc = Moments::default();
    for _ in 0..samples {
        let (mut plus, mut minus) = (1.0, 1.0);
        for law in &laws {
            for _ in 0..stats::poisson(rng, rate) {
                let t = ch.sample_coupling(rng).tanh() * (0..k - 1).map(|_| law.sample(rng).tanh()).product::<f64>();
                plus *= 1.0 + t;
                minus *= 1.0 - t;
            }
        }
        let h_inf = stats::bernoulli(rng, gp.eps);
        let h_tilde_inf = stats::bernoulli(rng, dn);
        let damp = if h_inf || h_tilde_inf { 0.0 } else { 1.0 };
        let mut v = (plus + damp * minus).ln();
        for law in &laws {
            let t = ch.sample_coupling(rng).tanh() * (0..k).map(|_| law.sample(rng).tanh()).product::<f64>();
            v -= p.alpha * (k as f64 - 1.0) / t_steps * (1.0 + t).ln();
        }
        v -= p.alpha * (1.0 + ch.sample_coupling(rng).tanh()).ln();
        acc.push(v);
    }
    Ok(acc.estimate())
}

/// `|h̃_{ε,δ} - h̃_{0,0}| ≤ (ε + δ n^{-θ}) ln 2`.
pub fn perturbation_bound_check(gp: &GeneralizedParams, p: &RsParams) -> Result<bool> {
    let with = generalized_free_entropy(gp, p)?;
    let without = generalized_free_entropy(&GeneralizedParams { eps: 0.0, delta: 0.0, ..gp.clone() }, p)?;
    let bound = (gp.eps + gp.delta_scaled()) * LN_2;
    Ok((with - without).abs() <= bound * (1.0 + 1e-12) + 1e-15)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub x_star: f64,
    pub h_star: f64,
}

/// Largest jump of the maximizer between consecutive grid values of `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub q_left: f64,
    pub q_right: f64,
    pub size: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseScan {
    pub k: usize,
    pub alpha: f64,
    pub points: Vec<PhasePoint>,
    pub jump: Option<Jump>,
}

pub fn phase_scan(k: usize, alpha: f64, q_grid: &[f64], grid_points: usize, refine_tol: f64) -> Result<PhaseScan> {
    if q_grid.is_empty() {
        return Err(Error::param("q_grid", "empty"));
    }
    let increasing = q_grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = q_grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::param("q_grid", "must be strictly monotone"));
    }
    let points = q_grid
        .par_iter()
        .map(|&q| {
            let best = sup_h_rs(&RsParams::new(k, alpha, q)?, grid_points, refine_tol)?;
            Ok(PhasePoint { q, x_star: best.x, h_star: best.h })
        })
        .collect::<Result<Vec<_>>>()?;
    let jump = points
        .windows(2)
        .map(|w| Jump { q_left: w[0].q, q_right: w[1].q, size: (w[1].x_star - w[0].x_star).abs() })
        .fold(None, |acc: Option<Jump>, j| match acc {
            Some(a) if a.size >= j.size => Some(a),
            _ => Some(j),
        });
    Ok(PhaseScan { k, alpha, points, jump })
}

/// Narrows a jump of `x*(q)` between `q_lo` and `q_hi` by bisection until the
/// bracket is at most `width` wide. Returns the final bracket.
pub fn locate_transition(
    k: usize,
    alpha: f64,
    q_lo: f64,
    q_hi: f64,
    width: f64,
    grid_points: usize,
    refine_tol: f64,
) -> Result<Jump> {
    let xstar = |q: f64| -> Result<f64> { Ok(sup_h_rs(&RsParams::new(k, alpha, q)?, grid_points, refine_tol)?.x) };
    let (mut lo, mut hi) = (q_lo, q_hi);
    let (mut x_lo, mut x_hi) = (xstar(lo)?, xstar(hi)?);
    while (hi - lo).abs() > width {
        let mid = 0.5 * (lo + hi);
        let x_mid = xstar(mid)?;
        if (x_mid - x_lo).abs() <= (x_mid - x_hi).abs() {
            lo = mid;
            x_lo = x_mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    Ok(Jump { q_left: lo, q_right: hi, size: (x_hi - x_lo).abs() })
}

/// Rows `(q, x, h)`, one per grid point of every curve.
pub fn write_curves_csv<W: Write>(out: W, curves: &[ReplicaCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "x", "h"])?;
    for c in curves {
        for &(x, h) in &c.grid {
            w.serialize((c.params.q, x, h))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `(q, x_star, h_star)`.
pub fn write_phase_csv<W: Write>(out: W, scan: &PhaseScan) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &scan.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Draws a path with each component uniform on `[0, 1]`.
pub fn random_path<R: Rng + ?Sized>(rng: &mut R, steps: usize) -> Vec<f64> {
    (0..steps).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn rs(k: usize, alpha: f64, q: f64) -> RsParams {
        RsParams::new(k, alpha, q).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let p = rs(3, 0.2, 0.4);
        assert!((p.h_rs_scalar(1.0) - (1.0 - 0.2 * 0.6) * LN_2).abs() < 1e-15);
        for x in [0.0, 0.3, 0.9] {
            assert!((rs(3, 0.7, 1.0).h_rs_scalar(x) - LN_2).abs() < 1e-15);
        }
        assert!((rs(3, 0.8, 0.0).h_rs_scalar(0.0) - (-2.4f64).exp() * LN_2).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = rng_from_seed(5);
        for _ in 0..500 {
            let p = rs(rng.random_range(2..6), rng.random_range(0.05..3.0), rng.random_range(0.0..0.95));
            let x = rng.random_range(0.01..0.99);
            let h = 1e-6;
            let fd = (p.h_rs_scalar(x + h) - p.h_rs_scalar(x - h)) / (2.0 * h);
            let an = p.h_rs_derivative(x);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{p:?} x={x}: {fd} vs {an}");
        }
    }

    #[test]
    fn nondecreasing_in_q() {
        for k in 2..5 {
            for xi in 0..=20 {
                let x = xi as f64 / 20.0;
                let mut prev = f64::NEG_INFINITY;
                for qi in 0..=20 {
                    let h = rs(k, 0.2, qi as f64 / 20.0).h_rs_scalar(x);
                    assert!(h >= prev - 1e-15);
                    prev = h;
                }
            }
        }
    }

    #[test]
    fn mc_functional_degenerate() {
        let mut rng = rng_from_seed(1);
        let e = mc_replica_functional(&rs(3, 0.5, 1.0), 0.3, 1000, &mut rng).unwrap();
        assert!((e.mean - LN_2).abs() < 1e-15 && e.se < 1e-15);
        let e = mc_replica_functional(&rs(3, 0.0, 0.3), 0.3, 1000, &mut rng).unwrap();
        assert!((e.mean - LN_2).abs() < 1e-15);
    }

    #[test]
    fn mc_functional_matches_closed_form() {
        let p = rs(3, 0.2, 0.4);
        let mut rng = rng_from_seed(2024);
        let e = mc_replica_functional(&p, 0.3, 1_000_000, &mut rng).unwrap();
        assert!(e.within(p.h_rs_scalar(0.3), 3.0), "{e:?} vs {}", p.h_rs_scalar(0.3));
    }

    #[test]
    fn sup_fully_erased_ties_to_one() {
        let m = sup_h_rs(&rs(3, 0.2, 1.0), DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        assert_eq!(m.x, 1.0);
        assert!((m.h - LN_2).abs() < 1e-15);
    }

    #[test]
    fn sup_matches_dense_scan() {
        for (k, alpha, q) in [(3, 0.2, 0.0), (3, 5.0, 0.5), (4, 1.0, 0.3), (2, 1.5, 0.2)] {
            let p = rs(k, alpha, q);
            let m = sup_h_rs(&p, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
            let brute = (0..=1_000_000).map(|i| p.h_rs_scalar(i as f64 / 1e6)).fold(f64::NEG_INFINITY, f64::max);
            assert!(m.h >= brute - 1e-10, "{p:?}: {} < {brute}", m.h);
            assert!(m.h >= p.h_rs_scalar(0.0).max(p.h_rs_scalar(1.0)));
        }
    }

    #[test]
    fn interior_maximizer_is_de_fixed_point() {
        let p = rs(3, 5.0, 0.5);
        let m = sup_h_rs(&p, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        assert!(m.x > 0.0 && m.x < 1.0);
        assert!((m.x - p.de_map(m.x)).abs() <= 1e-8);
    }

    #[test]
    fn de_map_examples() {
        assert_eq!(rs(3, 0.5, 0.2).de_map(1.0), 1.0);
        assert_eq!(rs(3, 0.5, 1.0).de_map(0.3), 1.0);
    }

    #[test]
    fn de_fixed_point_examples() {
        for p in [rs(3, 0.5, 1.0), rs(3, 0.0, 0.3)] {
            let fps = de_fixed_points(&p, 1e-12, 10_000).unwrap();
            assert_eq!(fps.len(), 1);
            assert_eq!(fps[0].z, 1.0);
        }
        let p = rs(3, 0.2, 0.5);
        let fps = de_fixed_points(&p, 1e-12, 100_000).unwrap();
        assert!(fps.iter().all(|f| f.residual <= 1e-12));
        // independent dense scan: count sign changes of z - de_map(z) plus the root at 1
        let f = |z: f64| z - p.de_map(z);
        let mut changes = 0;
        for i in 0..100_000 {
            let (a, b) = (i as f64 / 1e5, (i + 1) as f64 / 1e5);
            if f(a) * f(b) < 0.0 {
                changes += 1;
            }
        }
        assert_eq!(fps.len(), changes + 1);
    }

    #[test]
    fn de_three_fixed_points_in_coexistence() {
        // K = 3, α = 5 near the transition has z = 1, an unstable and a stable root.
        let p = rs(3, 5.0, 0.75);
        let fps = de_fixed_points(&p, 1e-12, 100_000).unwrap();
        assert!(fps.len() >= 2, "{fps:?}");
        assert!(fps.iter().any(|f| f.stability == Stability::Stable && f.z < 1.0));
    }

    fn gp(path: Vec<f64>, eps: f64, delta: f64, n: usize) -> GeneralizedParams {
        GeneralizedParams { path, eps, delta, theta: DEFAULT_THETA, n }
    }

    #[test]
    fn generalized_reduces_to_scalar() {
        let p = rs(3, 0.7, 0.3);
        for r in [0.0, 0.25, 0.8, 1.0] {
            let g = generalized_free_entropy(&gp(vec![r; 5], 0.0, 0.0, 100), &p).unwrap();
            assert!((g - p.h_rs_scalar(1.0 - r)).abs() < 1e-14);
        }
    }

    #[test]
    fn generalized_eps_one_drops_exponential() {
        let p = rs(3, 0.7, 0.3);
        let path = vec![0.1, 0.5, 0.9];
        let g = generalized_free_entropy(&gp(path.clone(), 1.0, 0.0, 100), &p).unwrap();
        let s1: f64 = path.iter().map(|r| r * r).sum();
        let s2: f64 = path.iter().map(|r| r * r * r).sum();
        let expect = LN_2 * (p.a() * s1 / 3.0 - 0.7 * 2.0 * 0.7 * s2 / 3.0 - 0.7 * 0.7);
        assert!((g - expect).abs() < 1e-14);
    }

    #[test]
    fn generalized_matches_mc() {
        let p = rs(3, 0.8, 0.3);
        let mut rng = rng_from_seed(99);
        let g = gp(random_path(&mut rng, 4), 0.1, 0.5, 100);
        let exact = generalized_free_entropy(&g, &p).unwrap();
        let e = mc_generalized_free_entropy(&g, &p, 1_000_000, &mut rng).unwrap();
        assert!(e.within(exact, 3.0), "{e:?} vs {exact}");
    }

    #[test]
    fn generalized_is_permutation_invariant() {
        let p = rs(4, 1.3, 0.2);
        let a = generalized_free_entropy(&gp(vec![0.1, 0.7, 0.4], 0.2, 0.3, 50), &p).unwrap();
        let b = generalized_free_entropy(&gp(vec![0.4, 0.1, 0.7], 0.2, 0.3, 50), &p).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn perturbation_bound_examples() {
        let p = rs(3, 0.5, 0.4);
        assert!(perturbation_bound_check(&gp(vec![0.3, 0.6], 0.0, 0.0, 10), &p).unwrap());
        let g = gp(vec![0.0; 3], 1.0, 0.0, 10);
        let diff = generalized_free_entropy(&g, &p).unwrap()
            - generalized_free_entropy(&gp(vec![0.0; 3], 0.0, 0.0, 10), &p).unwrap();
        assert!((diff.abs() - LN_2).abs() < 1e-15);
        assert!(perturbation_bound_check(&g, &p).unwrap());
    }

    #[test]
    fn phase_scan_examples() {
        let s = phase_scan(3, 0.2, &[1.0], DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        assert_eq!(s.points[0].x_star, 1.0);
        assert!(s.jump.is_none());
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let s = phase_scan(3, 0.2, &grid, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        assert!(s.points.windows(2).all(|w| w[1].h_star >= w[0].h_star - 1e-15));
        assert!(phase_scan(3, 0.2, &[0.5, 0.1, 0.7], 101, 1e-6).is_err());
    }

    #[test]
    fn first_order_jump_located() {
        // At α = 0.2 the maximizer is x* = 1 for every q; the jump shows up at
        // design rate 1/5, i.e. five factors per variable.
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let s = phase_scan(3, 5.0, &grid, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        let j = s.jump.unwrap();
        assert!(j.size > 0.1, "{j:?}");
        let t = locate_transition(3, 5.0, j.q_left, j.q_right, 1e-4, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL).unwrap();
        assert!(t.q_right - t.q_left <= 1e-4);
        assert!(t.size > 0.1);
    }

    #[test]
    fn csv_columns() {
        let c = replica_curve(&rs(3, 0.2, 0.5), 11, 1e-8).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[c]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,x,h\n"));
        assert_eq!(text.lines().count(), 12);
        let s = phase_scan(3, 0.2, &[0.1, 0.2], 11, 1e-8).unwrap();
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, &s).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("q,x_star,h_star\n"));
    }
}
