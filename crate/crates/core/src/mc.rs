//! Monte Carlo simulation of the controlled surplus process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, require_positive, Result};
use crate::model::ModelParams;
use crate::strategy::StrategyCurve;

pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub safe_level: f64,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn validate(&self, x0: f64) -> Result<()> {
        require_positive("mc.dt", self.dt)?;
        require_positive("mc.horizon", self.horizon)?;
        if self.dt > self.horizon {
            return Err(invalid("mc.dt", format!("step {} exceeds the horizon {}", self.dt, self.horizon)));
        }
        if self.n_paths < MIN_PATHS {
            return Err(invalid("mc.paths", format!("need at least {MIN_PATHS} paths, got {}", self.n_paths)));
        }
        if !(self.safe_level > x0) {
            return Err(invalid(
                "mc.safe_level",
                format!("safe level {} must exceed the initial surplus {x0}", self.safe_level),
            ));
        }
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(invalid("x0", format!("initial surplus must be non-negative, got {x0}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Outcome {
    Ruined { time: f64 },
    Safe,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_paths: usize,
    /// Fraction of paths not ruined (safe or censored at the horizon).
    pub survival: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub ruined: usize,
    pub horizon: usize,
    pub safe: usize,
    pub mean_ruin_time: Option<f64>,
}

impl SimReport {
    fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let n = outcomes.len();
        let mut ruined = 0;
        let mut horizon = 0;
        let mut safe = 0;
        let mut ruin_time = 0.0;
        for o in outcomes {
            match *o {
                Outcome::Ruined { time } => {
                    ruined += 1;
                    ruin_time += time;
                }
                Outcome::Safe => safe += 1,
                Outcome::Horizon => horizon += 1,
            }
        }
        let p = (safe + horizon) as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        SimReport {
            n_paths: n,
            survival: p,
            std_error: se,
            ci95: ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0)),
            ruined,
            horizon,
            safe,
            mean_ruin_time: (ruined > 0).then(|| ruin_time / ruined as f64),
        }
    }
}

/// `sqrt(se_a^2 + se_b^2)`.
pub fn pooled_stderr(a: &SimReport, b: &SimReport) -> f64 {
    (a.std_error * a.std_error + b.std_error * b.std_error).sqrt()
}

fn path_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = master ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Separate streams for the Brownian increments and the claims, so that
/// strategies compared on the same path index see the same noise.
fn path_streams(master: u64, index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let seed = path_seed(master, index);
    let mut brownian = ChaCha8Rng::seed_from_u64(seed);
    brownian.set_stream(0);
    let mut claims = ChaCha8Rng::seed_from_u64(seed);
    claims.set_stream(1);
    (brownian, claims)
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

/// Euler scheme for `dX = [c + r X + (mu - r) a] dt + sigma a dB + sigma1 dB1`
/// minus compound Poisson claims. `observe` sees `(t, X)` after every step.
fn run_path(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategy: &StrategyCurve,
    x0: f64,
    config: &SimConfig,
    path_index: u64,
    stop_at: f64,
    mut observe: impl FnMut(f64, f64),
) -> Outcome {
    let p = params;
    let (mut bm, mut cl) = path_streams(config.master_seed, path_index);
    let sqrt_dt = config.dt.sqrt();
    let rho_perp = (1.0 - p.rho * p.rho).sqrt();
    let mut next_claim = -open_unit(&mut cl).ln() / p.lambda;
    let mut x = x0;
    let mut t = 0.0;
    let end = stop_at.min(config.horizon);
    while t < end {
        let dt = config.dt.min(end - t);
        let sq = if dt == config.dt { sqrt_dt } else { dt.sqrt() };
        let a = strategy.eval(x);
        let z1: f64 = bm.sample(StandardNormal);
        let z2: f64 = bm.sample(StandardNormal);
        let db = sq * z1;
        let db1 = p.rho * db + rho_perp * sq * z2;
        x += (p.c + p.r * x + p.excess() * a) * dt + p.sigma * a * db + p.sigma1 * db1;
        t += dt;
        if x < 0.0 {
            return Outcome::Ruined { time: t };
        }
        while next_claim <= t {
            x -= dist.sample_from_uniform(open_unit(&mut cl));
            if x < 0.0 {
                return Outcome::Ruined { time: next_claim };
            }
            next_claim += -open_unit(&mut cl).ln() / p.lambda;
        }
        observe(t, x);
        if x >= config.safe_level {
            return Outcome::Safe;
        }
    }
    Outcome::Horizon
}

/// Outcome of one path; identical for identical `(master_seed, path_index)`.
pub fn simulate_path(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategy: &StrategyCurve,
    x0: f64,
    config: &SimConfig,
    path_index: u64,
) -> Outcome {
    run_path(params, dist, strategy, x0, config, path_index, f64::INFINITY, |_, _| {})
}

/// Surplus at time `t` along one path (`None` if the path was absorbed first).
pub fn surplus_at(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategy: &StrategyCurve,
    x0: f64,
    config: &SimConfig,
    path_index: u64,
    t: f64,
) -> Option<f64> {
    let mut last = None;
    let out = run_path(params, dist, strategy, x0, config, path_index, t, |s, x| last = Some((s, x)));
    match (out, last) {
        (Outcome::Horizon, Some((s, x))) if (s - t.min(config.horizon)).abs() < 1e-9 => Some(x),
        _ => None,
    }
}

fn simulate_all(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategy: &StrategyCurve,
    x0: f64,
    config: &SimConfig,
) -> Vec<Outcome> {
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(params, dist, strategy, x0, config, i))
        .collect()
}

pub fn estimate_survival(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategy: &StrategyCurve,
    x0: f64,
    config: &SimConfig,
) -> Result<SimReport> {
    params.validate()?;
    config.validate(x0)?;
    Ok(SimReport::from_outcomes(&simulate_all(params, dist, strategy, x0, config)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub report: SimReport,
}

/// Evaluates every strategy on the same random streams; rows are sorted by
/// decreasing survival (stable, so equal rows keep their input order).
pub fn compare_strategies(
    params: &ModelParams,
    dist: &ClaimDistribution,
    strategies: &[(String, StrategyCurve)],
    x0: f64,
    config: &SimConfig,
) -> Result<Vec<ComparisonRow>> {
    if strategies.len() < 2 {
        return Err(invalid("strategies", "need at least two strategies to compare"));
    }
    params.validate()?;
    config.validate(x0)?;
    let mut rows: Vec<ComparisonRow> = strategies
        .iter()
        .map(|(name, s)| ComparisonRow {
            name: name.clone(),
            report: SimReport::from_outcomes(&simulate_all(params, dist, s, x0, config)),
        })
        .collect();
    rows.sort_by(|a, b| b.report.survival.total_cmp(&a.report.survival));
    Ok(rows)
}
