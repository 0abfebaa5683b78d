//! Seeded GBM paths, stop detection and the gain along stopped paths.
//!
//! Prices are stepped with the exact lognormal transition
//! `S[i+1] = S[i] exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z[i])`, so the
//! only discretization error left is the discrete monitoring of the stop.
//! An optional Brownian-bridge correction removes most of that: between two
//! grid points that both sit above `S*`, the log-price bridge touches the
//! barrier with probability
//!
//! ```text
//! exp(-2 ln(S[i]/S*) ln(S[i+1]/S*) / (sigma^2 dt))
//! ```
//!
//! and a crossing is drawn with that probability. A crossing found inside
//! step `i -> i+1` is booked at grid time `t[i+1]`.
//!
//! # Random streams
//!
//! Every path owns two ChaCha8 streams keyed by
//! `splitmix64(master_seed + GOLDEN * (path_index + 1))`: stream 0 feeds the
//! normal increments, stream 1 feeds the bridge uniforms (one per step, drawn
//! whether or not the step can cross). Paths are therefore independent of
//! each other and of scheduling, and toggling the bridge leaves the price
//! path untouched.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::model::{self, GainSample, MarketParams, TradeSpec};

/// Steps per unit time used when no explicit grid is requested.
pub const DEFAULT_STEPS_PER_YEAR: usize = 1024;

/// Largest `n_paths * n_steps` that [`run_batch`] accepts by default.
pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 31;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const PRICE_STREAM: u64 = 0;
const BRIDGE_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform time grid on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    t_end: f64,
    n_steps: usize,
}

impl PathGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        check(t_end > 0.0 && t_end.is_finite(), "t", "t > 0", t_end)?;
        check(n_steps >= 1, "n_steps", "n_steps >= 1", n_steps as f64)?;
        Ok(Self { t_end, n_steps })
    }

    /// `steps_per_year` steps per unit time, at least one step.
    pub fn with_density(t_end: f64, steps_per_year: usize) -> Result<Self> {
        check(t_end > 0.0 && t_end.is_finite(), "t", "t > 0", t_end)?;
        let n = (t_end * steps_per_year as f64).ceil().max(1.0) as usize;
        Self::new(t_end, n)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.dt() * i as f64
        }
    }
}

/// Identifies the random streams of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self {
            master_seed,
            path_index,
        }
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let key = splitmix64(
            self.master_seed
                .wrapping_add(GOLDEN.wrapping_mul(self.path_index.wrapping_add(1))),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(stream);
        rng
    }
}

/// Discretized price trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
}

impl Path {
    /// Builds a path from explicit values; times must increase strictly and
    /// prices must be positive.
    pub fn from_parts(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if times.len() != prices.len() || times.len() < 2 {
            return Err(Error::Domain(
                "a path needs at least two points and matching times/prices".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("path times must increase strictly".into()));
        }
        if prices.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain("path prices must be positive".into()));
        }
        Ok(Self { times, prices })
    }
}

/// A path annotated with its first passage below the stop price.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedPath {
    pub base: Path,
    pub t_star: Option<f64>,
    /// Grid index at which the stop is booked.
    pub stop_index: Option<usize>,
    /// Prices with everything from the stop onward replaced by `S*`.
    pub stopped_prices: Vec<f64>,
}

/// Per-step constants of the exact lognormal transition.
#[derive(Debug, Clone, Copy)]
struct Stepper {
    drift_dt: f64,
    vol_sqrt_dt: f64,
    /// `2 / (sigma^2 dt)`
    bridge_scale: f64,
}

impl Stepper {
    fn new(market: &MarketParams, dt: f64) -> Self {
        let sigma = market.sigma();
        Self {
            drift_dt: market.log_drift() * dt,
            vol_sqrt_dt: sigma * dt.sqrt(),
            bridge_scale: 2.0 / (sigma * sigma * dt),
        }
    }

    fn step(&self, price: f64, z: f64) -> f64 {
        price * (self.drift_dt + self.vol_sqrt_dt * z).exp()
    }

    /// Bridge crossing probability given log distances above the barrier.
    fn crossing_probability(&self, above_before: f64, above_after: f64) -> f64 {
        (-self.bridge_scale * above_before * above_after).exp()
    }
}

/// Generates one GBM path on `grid`, fully determined by `seed`.
pub fn sample_path(market: &MarketParams, grid: &PathGrid, seed: SeedSpec) -> Path {
    let stepper = Stepper::new(market, grid.dt());
    let mut rng = seed.stream(PRICE_STREAM);
    let n = grid.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut prices = Vec::with_capacity(n + 1);
    let mut price = market.s0();
    times.push(0.0);
    prices.push(price);
    for i in 1..=n {
        let z: f64 = rng.sample(StandardNormal);
        price = stepper.step(price, z);
        times.push(grid.time(i));
        prices.push(price);
    }
    Path { times, prices }
}

/// Finds the first passage of `path` to `s_star`.
///
/// Without the bridge the stop is the first grid point at or below `s_star`.
/// With it, each step that stays above the barrier additionally crosses with
/// the bridge probability, using the bridge stream of `seed`.
pub fn detect_stop(
    path: &Path,
    market: &MarketParams,
    s_star: f64,
    bridge: bool,
    seed: SeedSpec,
) -> Result<StoppedPath> {
    if !(s_star > 0.0) || s_star >= path.prices[0] {
        return Err(Error::Domain(format!(
            "stop price {s_star} must lie in (0, {})",
            path.prices[0]
        )));
    }
    let mut bridge_rng = bridge.then(|| seed.stream(BRIDGE_STREAM));
    let mut stop_index = None;
    let mut above_before = (path.prices[0] / s_star).ln();
    for i in 0..path.prices.len() - 1 {
        let next = path.prices[i + 1];
        let u = bridge_rng.as_mut().map(|rng| rng.random::<f64>());
        if next <= s_star {
            stop_index = Some(i + 1);
            break;
        }
        let above_after = (next / s_star).ln();
        if let Some(u) = u {
            let dt = path.times[i + 1] - path.times[i];
            let stepper = Stepper::new(market, dt);
            if u < stepper.crossing_probability(above_before, above_after) {
                stop_index = Some(i + 1);
                break;
            }
        }
        above_before = above_after;
    }
    let stopped_prices = path
        .prices
        .iter()
        .enumerate()
        .map(|(i, &p)| match stop_index {
            Some(j) if i >= j => s_star,
            _ => p,
        })
        .collect();
    Ok(StoppedPath {
        base: path.clone(),
        t_star: stop_index.map(|j| path.times[j]),
        stop_index,
        stopped_prices,
    })
}

/// Gain, control and account value at every grid time of a stopped path.
///
/// Once the stop has fired the position is flat, so the gain stays at the
/// value locked in at `t*`.
pub fn gain_trajectory(
    sp: &StoppedPath,
    market: &MarketParams,
    trade: &TradeSpec,
) -> Result<Vec<GainSample>> {
    let locked = match (sp.t_star, trade.s_star()) {
        (Some(t_star), Some(s_star)) => Some(model::gain_stopped(market, trade, s_star, t_star)?),
        (Some(_), None) => return Err(Error::StopDisabled),
        (None, _) => None,
    };
    sp.base
        .times
        .iter()
        .zip(&sp.stopped_prices)
        .enumerate()
        .map(|(i, (&t, &price))| {
            let stopped = sp.stop_index.is_some_and(|j| i >= j);
            let g = match locked {
                Some(g) if stopped => g,
                _ => model::gain_no_stop(market, trade, price, t)?,
            };
            Ok(GainSample {
                t,
                g,
                u: model::control_value(trade, g, stopped),
                v: trade.v0() + g,
            })
        })
        .collect()
}

/// Outcome of one simulated path at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalSample {
    pub path_index: u64,
    pub t_star: Option<f64>,
    pub g: f64,
}

/// Everything needed to reproduce a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub grid: PathGrid,
    pub n_paths: usize,
    pub master_seed: u64,
    pub bridge: bool,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub memory_budget: u128,
}

impl BatchConfig {
    pub fn new(grid: PathGrid, n_paths: usize, master_seed: u64, bridge: bool) -> Result<Self> {
        check(n_paths >= 1, "paths", "paths >= 1", n_paths as f64)?;
        Ok(Self {
            grid,
            n_paths,
            master_seed,
            bridge,
            workers: None,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    pub fn with_memory_budget(mut self, points: u128) -> Self {
        self.memory_budget = points;
        self
    }
}

/// Terminal gains and stop times of a batch, ordered by path index.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub config: BatchConfig,
    pub samples: Vec<TerminalSample>,
}

impl BatchOutput {
    pub fn terminal_gains(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.g).collect()
    }

    pub fn stopped_fraction(&self) -> f64 {
        let n = self.samples.iter().filter(|s| s.t_star.is_some()).count();
        n as f64 / self.samples.len() as f64
    }
}

/// Single-path kernel equivalent to `sample_path` + `detect_stop` +
/// `gain_trajectory` at the horizon, without materializing the path and
/// ending early once the stop fires.
fn terminal_sample(
    market: &MarketParams,
    trade: &TradeSpec,
    grid: &PathGrid,
    stepper: &Stepper,
    seed: SeedSpec,
    bridge: bool,
) -> TerminalSample {
    let mut rng = seed.stream(PRICE_STREAM);
    let mut bridge_rng = (bridge && trade.s_star().is_some()).then(|| seed.stream(BRIDGE_STREAM));
    let mut price = market.s0();
    let mut t_star = None;
    if let Some(s_star) = trade.s_star() {
        let mut above_before = (price / s_star).ln();
        for i in 0..grid.n_steps() {
            let z: f64 = rng.sample(StandardNormal);
            price = stepper.step(price, z);
            let u = bridge_rng.as_mut().map(|r| r.random::<f64>());
            if price <= s_star {
                t_star = Some(grid.time(i + 1));
                break;
            }
            let above_after = (price / s_star).ln();
            if u.is_some_and(|u| u < stepper.crossing_probability(above_before, above_after)) {
                t_star = Some(grid.time(i + 1));
                break;
            }
            above_before = above_after;
        }
    } else {
        for _ in 0..grid.n_steps() {
            let z: f64 = rng.sample(StandardNormal);
            price = stepper.step(price, z);
        }
    }
    let g = match (t_star, trade.s_star()) {
        (Some(ts), Some(s_star)) => model::gain_formula(market, trade.u0(), trade.k(), s_star, ts),
        _ => model::gain_formula(market, trade.u0(), trade.k(), price, grid.t_end()),
    };
    TerminalSample {
        path_index: seed.path_index,
        t_star,
        g,
    }
}

fn simulate_range(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
    range: std::ops::Range<u64>,
) -> Vec<TerminalSample> {
    let stepper = Stepper::new(market, config.grid.dt());
    let work = || {
        range
            .clone()
            .into_par_iter()
            .map(|i| {
                terminal_sample(
                    market,
                    trade,
                    &config.grid,
                    &stepper,
                    SeedSpec::new(config.master_seed, i),
                    config.bridge,
                )
            })
            .collect()
    };
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(work))
            .unwrap_or_else(|_| work()),
        None => work(),
    }
}

/// Simulates `config.n_paths` paths and keeps their terminal gains.
///
/// Refuses batches whose `n_paths * n_steps` exceeds the configured budget;
/// [`stream_batch`] has no such limit.
pub fn run_batch(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
) -> Result<BatchOutput> {
    let requested = config.n_paths as u128 * config.grid.n_steps() as u128;
    if requested > config.memory_budget {
        return Err(Error::Resource {
            requested,
            budget: config.memory_budget,
        });
    }
    let samples = simulate_range(market, trade, config, 0..config.n_paths as u64);
    Ok(BatchOutput {
        config: *config,
        samples,
    })
}

const STREAM_CHUNK: u64 = 1 << 16;

/// Simulates the batch chunk by chunk and hands every sample to `sink` in
/// path-index order.
pub fn stream_batch<F>(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(&TerminalSample) -> Result<()>,
{
    let n = config.n_paths as u64;
    let mut start = 0;
    while start < n {
        let end = (start + STREAM_CHUNK).min(n);
        for sample in simulate_range(market, trade, config, start..end) {
            sink(&sample)?;
        }
        start = end;
    }
    Ok(())
}

/// Fixed 17-significant-digit rendering used by every CSV writer.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SAMPLE_CSV_HEADER: &str = "path_index,t_star,terminal_g";

pub fn write_sample_row<W: Write>(out: &mut W, sample: &TerminalSample) -> std::io::Result<()> {
    let t_star = sample.t_star.map(format_number).unwrap_or_default();
    writeln!(
        out,
        "{},{},{}",
        sample.path_index,
        t_star,
        format_number(sample.g)
    )
}

/// Streams a batch as CSV: a header, then `path_index,t_star,terminal_g`
/// rows in index order (`t_star` empty for paths that were never stopped).
pub fn write_batch_csv<W: Write>(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "{SAMPLE_CSV_HEADER}")?;
    stream_batch(market, trade, config, |s| Ok(write_sample_row(out, s)?))
}
