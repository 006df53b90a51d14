//! Command-line experiments behind the `cbm` binary.
//!
//! Every command resolves a [`RunConfig`] (flags over config file over
//! defaults), derives all randomness from its master seed and embeds the
//! resolved config in every artifact it writes. CSV files start with a
//! `# config: {...}` line and are read back with `#` as comment character.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interpolation::{
    adaptive_path, concentration_report, sum_rule_check, ConcentrationOptions, InterpParams, RemainderOptions,
    DEFAULT_S_GRID, DEFAULT_STEPS_PER_VARIABLE,
};
use crate::model::{random_subset, Instance, ModelParams};
use crate::oracle::{gauge_invariance_check, gks_violations, nishimori_check, ExactGibbs};
use crate::replica::{locate_transition, phase_scan, replica_curve, write_curves_csv, write_phase_csv, ReplicaCurve, RsParams};
use crate::rng::{derive_seed, rng_from_seed, stream_tag};
use crate::stats::Estimate;

#[derive(Debug, Parser)]
#[command(name = "cbm", version, about = "Censored block model on the erasure channel: exact entropies, replica prediction and interpolation checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replica-symmetric free entropy curves h(x), one per q.
    RsCurve {
        #[command(flatten)]
        flags: Flags,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Maximizer x*(q) and its largest jump.
    Phase {
        #[command(flatten)]
        flags: Flags,
    },
    /// Rank-based Monte Carlo entropy against the replica prediction.
    EntropyMc {
        #[command(flatten)]
        flags: Flags,
    },
    /// Exhaustive oracle suites: rank equivalence, Nishimori, GKS, gauge.
    Verify {
        #[command(flatten)]
        flags: Flags,
    },
    /// Adaptive path, sum rule and concentration tables.
    Interpolate {
        #[command(flatten)]
        flags: Flags,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RsCurve { .. } => "rs-curve",
            Command::Phase { .. } => "phase",
            Command::EntropyMc { .. } => "entropy-mc",
            Command::Verify { .. } => "verify",
            Command::Interpolate { .. } => "interpolate",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::RsCurve { flags, .. }
            | Command::Phase { flags }
            | Command::EntropyMc { flags }
            | Command::Verify { flags }
            | Command::Interpolate { flags } => flags,
        }
    }
}

/// Flags shared by all commands. Unset flags fall back to the config file,
/// then to per-command defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// List `a,b,c` or range `start:stop:step` (inclusive).
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid points on x ∈ [0, 1].
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the fields above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn or(self, other: Flags) -> Flags {
        Flags {
            n: self.n.or(other.n),
            k: self.k.or(other.k),
            alpha: self.alpha.or(other.alpha),
            q: self.q.or(other.q),
            steps: self.steps.or(other.steps),
            eps: self.eps.or(other.eps),
            delta: self.delta.or(other.delta),
            theta: self.theta.or(other.theta),
            trials: self.trials.or(other.trials),
            seed: self.seed.or(other.seed),
            grid: self.grid.or(other.grid),
            out: self.out.or(other.out),
            config: self.config.or(other.config),
        }
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub q: Vec<f64>,
    #[serde(rename = "T")]
    pub steps: usize,
    pub eps: f64,
    pub delta: f64,
    pub theta: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub grid: usize,
    pub output_dir: PathBuf,
}

fn defaults(command: &str) -> Flags {
    let (n, q, trials) = match command {
        "rs-curve" => (1000, "0:0.9:0.1", 0),
        "phase" => (1000, "0:1:0.01", 0),
        "entropy-mc" => (1000, "0.5", 100),
        "verify" => (8, "0.5", 200),
        _ => (100, "0.5", 50),
    };
    Flags {
        n: Some(n),
        k: Some(3),
        alpha: Some(0.2),
        q: Some(q.into()),
        steps: None,
        eps: Some(0.1),
        delta: Some(0.1),
        theta: Some(0.2),
        trials: Some(trials),
        seed: Some(0),
        grid: Some(crate::replica::DEFAULT_GRID_POINTS),
        out: Some(PathBuf::from("out")),
        config: None,
    }
}

/// Parses `a,b,c` or `start:stop:step` (stop included up to rounding).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::param("q", format!("`{spec}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

impl RunConfig {
    /// Flags over config file over defaults.
    pub fn resolve(command: &str, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => serde_json::from_str::<Flags>(&fs::read_to_string(path)?)?,
            None => Flags::default(),
        };
        let f = flags.clone().or(file).or(defaults(command));
        let n = f.n.expect("default");
        let cfg = RunConfig {
            command: command.into(),
            n,
            k: f.k.expect("default"),
            alpha: f.alpha.expect("default"),
            q: parse_grid(f.q.as_deref().expect("default"))?,
            steps: f.steps.unwrap_or(DEFAULT_STEPS_PER_VARIABLE * n),
            eps: f.eps.expect("default"),
            delta: f.delta.expect("default"),
            theta: f.theta.expect("default"),
            trials: f.trials.expect("default"),
            master_seed: f.seed.expect("default"),
            grid: f.grid.expect("default"),
            output_dir: f.out.expect("default"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::param("q", "empty grid"));
        }
        for &q in &self.q {
            RsParams::new(self.k, self.alpha, q)?;
        }
        if self.grid < 3 {
            return Err(Error::param("grid", "need at least 3 points"));
        }
        if matches!(self.command.as_str(), "entropy-mc" | "verify" | "interpolate") && self.trials == 0 {
            return Err(Error::param("trials", "need at least one trial"));
        }
        Ok(())
    }

    fn header(&self) -> String {
        format!("# config: {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

/// What a command produced: the summary printed to stdout and whether every
/// check it ran passed.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig::resolve(cli.command.name(), cli.command.flags())?;
    fs::create_dir_all(&cfg.output_dir)?;
    match &cli.command {
        Command::RsCurve { svg, .. } => cmd_rs_curve(&cfg, *svg),
        Command::Phase { .. } => cmd_phase(&cfg),
        Command::EntropyMc { .. } => cmd_entropy_mc(&cfg),
        Command::Verify { .. } => cmd_verify(&cfg),
        Command::Interpolate { .. } => cmd_interpolate(&cfg),
    }
}

/// Writes `# config:` followed by the CSV body produced by `body`.
fn write_csv_artifact<F>(cfg: &RunConfig, name: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = cfg.output_dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    w.write_all(cfg.header().as_bytes())?;
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn write_json_artifact(cfg: &RunConfig, name: &str, value: &Value) -> Result<PathBuf> {
    let path = cfg.output_dir.join(name);
    let mut doc = json!({ "config": cfg });
    if let (Some(d), Some(v)) = (doc.as_object_mut(), value.as_object()) {
        d.extend(v.clone());
    }
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(path)
}

/// Reads a CSV artifact back: the embedded config and the rows.
pub fn read_csv_artifact(path: &Path) -> Result<(RunConfig, Vec<csv::StringRecord>)> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix("# config: ")
        .ok_or_else(|| Error::param("csv", format!("{} has no config line", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(json)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((cfg, rows))
}

fn cmd_rs_curve(cfg: &RunConfig, svg: bool) -> Result<Outcome> {
    let curves = cfg
        .q
        .iter()
        .map(|&q| replica_curve(&RsParams::new(cfg.k, cfg.alpha, q)?, cfg.grid, crate::replica::DEFAULT_REFINE_TOL))
        .collect::<Result<Vec<_>>>()?;
    let mut artifacts = vec![write_csv_artifact(cfg, "rs_curve.csv", |w| write_curves_csv(w, &curves))?];
    if svg {
        let path = cfg.output_dir.join("rs_curve.svg");
        fs::write(&path, render_svg(cfg, &curves))?;
        artifacts.push(path);
    }
    let maxima: Vec<Value> = curves
        .iter()
        .map(|c| json!({ "q": c.params.q, "x_star": c.argmax_x, "h_star": c.argmax_h }))
        .collect();
    let summary = json!({ "maxima": maxima });
    artifacts.push(write_json_artifact(cfg, "rs_curve.json", &summary)?);
    Ok(Outcome { passed: true, summary, artifacts })
}

/// A self-contained SVG: one polyline per curve, a circle at each maximum.
pub fn render_svg(cfg: &RunConfig, curves: &[ReplicaCurve]) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let all = curves.iter().flat_map(|c| c.grid.iter().map(|p| p.1));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |x: f64| pad + x * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v - lo) / span * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<!-- config: {} -->", serde_json::to_string(cfg).unwrap_or_default().replace("--", "- -"));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{} {} H{} M{} {} V{}" stroke="black" fill="none"/>"#,
        px(0.0),
        h - pad,
        px(1.0),
        px(0.0),
        h - pad,
        pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14">x</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="10" y="{}" font-size="14">h(x)</text>"#, h / 2.0);
    for (i, c) in curves.iter().enumerate() {
        let hue = 240.0 * i as f64 / curves.len().max(1) as f64;
        let pts: Vec<String> = c.grid.iter().map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="hsl({hue:.0},70%,40%)" stroke-width="1.5" points="{}"><title>q = {}</title></polyline>"#,
            pts.join(" "),
            c.params.q
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="none" stroke="hsl({hue:.0},70%,40%)"/>"#,
            px(c.argmax_x),
            py(c.argmax_h)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn cmd_phase(cfg: &RunConfig) -> Result<Outcome> {
    let tol = crate::replica::DEFAULT_REFINE_TOL;
    let scan = phase_scan(cfg.k, cfg.alpha, &cfg.q, cfg.grid, tol)?;
    let mut artifacts = vec![write_csv_artifact(cfg, "phase.csv", |w| write_phase_csv(w, &scan))?];
    let monotone = scan.points.windows(2).all(|p| {
        let (a, b) = (&p[0], &p[1]);
        (b.h_star - a.h_star) * (b.q - a.q) >= -1e-12
    });
    let located = match scan.jump {
        Some(j) if j.size > 0.1 => Some(locate_transition(cfg.k, cfg.alpha, j.q_left, j.q_right, 1e-4, cfg.grid, tol)?),
        _ => None,
    };
    let summary = json!({
        "largest_step": scan.jump,
        "transition": located,
        "h_star_monotone_in_q": monotone,
    });
    artifacts.push(write_json_artifact(cfg, "phase.json", &summary)?);
    Ok(Outcome { passed: monotone, summary, artifacts })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyRow {
    pub n: usize,
    pub q: f64,
    pub mean: f64,
    pub se: f64,
    pub sup_h_rs: f64,
    pub x_star: f64,
    pub gap: f64,
}

/// Mean rank-based entropy over `trials` instances for each `q`.
pub fn entropy_mc(cfg: &RunConfig) -> Result<Vec<EntropyRow>> {
    use rayon::prelude::*;
    cfg.q
        .iter()
        .map(|&q| {
            let params = ModelParams::new(cfg.n, cfg.k, cfg.alpha, q)?;
            let stream = stream_tag(&[q.to_bits()]);
            let values = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|i| Ok(Instance::generate(params, derive_seed(cfg.master_seed, stream, i))?.free_entropy()))
                .collect::<Result<Vec<f64>>>()?;
            let e = Estimate::from_samples(&values);
            let best = crate::replica::sup_h_rs(&RsParams::new(cfg.k, cfg.alpha, q)?, cfg.grid, crate::replica::DEFAULT_REFINE_TOL)?;
            Ok(EntropyRow { n: cfg.n, q, mean: e.mean, se: e.se, sup_h_rs: best.h, x_star: best.x, gap: e.mean - best.h })
        })
        .collect()
}

fn cmd_entropy_mc(cfg: &RunConfig) -> Result<Outcome> {
    let rows = entropy_mc(cfg)?;
    let summary = json!({ "results": rows });
    let artifacts = vec![write_json_artifact(cfg, "entropy_mc.json", &summary)?];
    Ok(Outcome { passed: true, summary, artifacts })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub max_violation: f64,
    pub passed: bool,
}

/// Randomized exhaustive checks against the brute-force oracle. Sizes are
/// capped so every case is enumerable.
pub fn verify_suites(cfg: &RunConfig) -> Result<Vec<SuiteResult>> {
    use rand::Rng;
    let q = cfg.q[0];
    let k = cfg.k;
    let n_max = cfg.n.clamp(k.max(4), 12);
    let trials = cfg.trials;
    let seed = cfg.master_seed;
    let mut out = Vec::new();

    let mut rank_bad = 0usize;
    for i in 0..trials as u64 {
        let n = k + (i as usize % (n_max - k + 1));
        let inst = Instance::generate(ModelParams::new(n, k, cfg.alpha.max(0.5), q)?, derive_seed(seed, 1, i))?;
        let g = ExactGibbs::enumerate(&inst)?;
        let rank = inst.to_gf2().rank();
        if g.z() != 1u64 << (n - rank) {
            rank_bad += 1;
        }
    }
    out.push(SuiteResult { name: "rank_oracle".into(), cases: trials, max_violation: rank_bad as f64, passed: rank_bad == 0 });

    let mut worst = 0.0f64;
    for i in 0..trials as u64 {
        let mut rng = rng_from_seed(derive_seed(seed, 2, i));
        let n = rng.random_range(k..=n_max.min(8));
        let m = rng.random_range(1..=6);
        let factors: Vec<Vec<usize>> = (0..m).map(|_| random_subset(&mut rng, n, k)).collect();
        let coll: Vec<Vec<usize>> = (0..rng.random_range(1..=3))
            .map(|_| {
                let size = rng.random_range(1..=n);
                random_subset(&mut rng, n, size)
            })
            .collect();
        worst = worst.max(nishimori_check(ModelParams::new(n, k, 1.0, q)?, &factors, &[coll])?);
    }
    out.push(SuiteResult { name: "nishimori".into(), cases: trials, max_violation: worst, passed: worst <= 1e-12 });

    let mut gks_bad = 0usize;
    for i in 0..trials as u64 {
        let mut rng = rng_from_seed(derive_seed(seed, 3, i));
        let n = rng.random_range(k..=n_max.min(10));
        let inst = Instance::generate(ModelParams::new(n, k, 1.0, q)?, rng.random())?;
        let pairs: Vec<(Vec<usize>, Vec<usize>)> = (0..8)
            .map(|_| {
                let (a, b) = (rng.random_range(1..=n), rng.random_range(1..=n));
                (random_subset(&mut rng, n, a), random_subset(&mut rng, n, b))
            })
            .collect();
        gks_bad += gks_violations(&inst, &pairs)?;
    }
    out.push(SuiteResult { name: "gks".into(), cases: trials, max_violation: gks_bad as f64, passed: gks_bad == 0 });

    let mut gauge_bad = 0usize;
    for i in 0..trials.min(50) as u64 {
        let mut rng = rng_from_seed(derive_seed(seed, 4, i));
        let n = rng.random_range(k..=n_max.min(8));
        let m = rng.random_range(1..=4);
        let factors: Vec<Vec<usize>> = (0..m).map(|_| random_subset(&mut rng, n, k)).collect();
        let planted: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        if !gauge_invariance_check(ModelParams::new(n, k, 1.0, q)?, &factors, &planted)? {
            gauge_bad += 1;
        }
    }
    out.push(SuiteResult { name: "gauge".into(), cases: trials.min(50), max_violation: gauge_bad as f64, passed: gauge_bad == 0 });
    Ok(out)
}

fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let suites = verify_suites(cfg)?;
    let passed = suites.iter().all(|s| s.passed);
    let summary = json!({ "passed": passed, "suites": suites });
    let artifacts = vec![write_json_artifact(cfg, "verify.json", &summary)?];
    Ok(Outcome { passed, summary, artifacts })
}

fn cmd_interpolate(cfg: &RunConfig) -> Result<Outcome> {
    let q = cfg.q[0];
    let model = ModelParams::new(cfg.n, cfg.k, cfg.alpha, q)?;
    let params = InterpParams::new(model, cfg.steps, cfg.eps, cfg.delta, cfg.theta)?;
    let seeds = [10, 11, 12].map(|stream| derive_seed(cfg.master_seed, stream, 0));
    let path = adaptive_path(&params, cfg.trials, seeds[0])?;
    let opts = RemainderOptions { trials: 2, ..Default::default() };
    let report = sum_rule_check(&params, &path, DEFAULT_S_GRID, 20 * cfg.trials, &opts, seeds[1])?;
    let conc_opts = ConcentrationOptions { trials: cfg.trials, ..Default::default() };
    let conc = concentration_report(&params, &path, &[cfg.n], &conc_opts, seeds[2])?;

    let mut artifacts = vec![write_csv_artifact(cfg, "path.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t", "r", "se", "tilde_r"])?;
        for (i, ((r, se), x)) in path.r.iter().zip(&path.se).zip(&path.tilde_r).enumerate() {
            c.serialize((i + 1, r, se, x))?;
        }
        c.flush()?;
        Ok(())
    })?];
    artifacts.push(write_csv_artifact(cfg, "sum_rule.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t", "remainder_integral", "se"])?;
        for (i, e) in report.per_step.iter().enumerate() {
            c.serialize((i + 1, e.mean, e.se))?;
        }
        c.flush()?;
        Ok(())
    })?);
    artifacts.push(write_csv_artifact(cfg, "concentration.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "n",
            "eps_lo",
            "eps_hi",
            "thermal_integral",
            "thermal_se",
            "thermal_bound",
            "disorder_variance",
            "disorder_se",
            "free_entropy_variance",
            "free_entropy_se",
        ])?;
        for r in &conc {
            c.serialize((
                r.n,
                r.eps_lo,
                r.eps_hi,
                r.thermal_integral.mean,
                r.thermal_integral.se,
                r.thermal_bound,
                r.disorder_variance.mean,
                r.disorder_variance.se,
                r.free_entropy_variance.mean,
                r.free_entropy_variance.se,
            ))?;
        }
        c.flush()?;
        Ok(())
    })?);

    let sum_rule_ok = report.residual.abs() <= 3.0 * report.residual_se + 1e-12;
    let thermal_ok = conc
        .iter()
        .all(|r| r.thermal_integral.mean <= r.thermal_bound + 3.0 * r.thermal_integral.se);
    let summary = json!({
        "params": params,
        "seeds": { "path": seeds[0], "sum_rule": seeds[1], "concentration": seeds[2] },
        "path": path,
        "sum_rule": {
            "lhs": report.lhs,
            "generalized": report.generalized,
            "remainder_integral": report.remainder_integral,
            "residual": report.residual,
            "residual_se": report.residual_se,
            "within_3_se": sum_rule_ok,
            "per_step": report.per_step,
        },
        "concentration": conc,
        "thermal_bound_ok": thermal_ok,
    });
    artifacts.push(write_json_artifact(cfg, "manifest.json", &summary)?);
    Ok(Outcome { passed: sum_rule_ok && thermal_ok, summary, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        assert_eq!(parse_grid("0.1,0.3").unwrap(), vec![0.1, 0.3]);
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:0.9:0.1").unwrap().len(), 10);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        fs::write(&file, r#"{"n": 50, "alpha": 0.3, "seed": 9}"#).unwrap();
        let flags = Flags { n: Some(70), config: Some(file), ..Default::default() };
        let cfg = RunConfig::resolve("entropy-mc", &flags).unwrap();
        assert_eq!(cfg.n, 70);
        assert_eq!(cfg.alpha, 0.3);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.steps, 20 * 70);
    }

    #[test]
    fn unknown_config_field_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        fs::write(&file, r#"{"bogus": 1}"#).unwrap();
        let flags = Flags { config: Some(file), ..Default::default() };
        assert!(RunConfig::resolve("phase", &flags).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let flags = Flags { q: Some("1.5".into()), ..Default::default() };
        assert!(matches!(RunConfig::resolve("phase", &flags), Err(Error::InvalidParameter { .. })));
    }
}
