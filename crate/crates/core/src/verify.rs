//! Monte Carlo checks of the closed-form results.
//!
//! Comparisons use the raw sup-distance between the empirical CDF and the
//! closed form on a grid. The gain law with a stop has an atom at its floor
//! for `K = 1`, so Kolmogorov-Smirnov p-values would be wrong there and none
//! are computed. The default gate of 0.015 at 50,000 paths leaves room for
//! the DKW 95% band (about 0.0086) plus the residual of discrete stop
//! monitoring.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{CdfQuery, ShorthandContext};
use crate::error::{check, Error, Result};
use crate::model::{self, MarketParams, TradeSpec};
use crate::simulate::{self, format_number, BatchConfig, PathGrid, SeedSpec};

/// Sup-distance gate for 50,000-path replications.
pub const SUP_DISTANCE_GATE: f64 = 0.015;

/// Sup-distance gate for `n_paths` samples: [`SUP_DISTANCE_GATE`] from
/// 50,000 paths up, widened like `1/sqrt(n)` below that.
pub fn sup_distance_gate(n_paths: usize) -> f64 {
    SUP_DISTANCE_GATE * (50_000.0 / n_paths.max(1) as f64).sqrt().max(1.0)
}

/// Number of abscissae in a comparison grid.
pub const GRID_POINTS: usize = 512;

/// Right-continuous empirical CDF of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::Domain("samples contain NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    /// Fraction of samples exactly equal to `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        let lo = self.sorted.partition_point(|&s| s < x);
        let hi = self.sorted.partition_point(|&s| s <= x);
        (hi - lo) as f64 / self.len() as f64
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples.to_vec())
}

/// Pointwise and uniform distance between an empirical and a theoretical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub grid: Vec<f64>,
    pub theory: Vec<f64>,
    pub empirical: Vec<f64>,
    /// `empirical - theory` at each grid point.
    pub residuals: Vec<f64>,
    pub sup_distance: f64,
    /// Abscissa where the sup-distance is attained.
    pub argmax: f64,
}

/// Evaluates `theory` and the empirical CDF on `grid`.
pub fn compare<F>(empirical: &EmpiricalCdf, theory: F, grid: &[f64]) -> Result<ComparisonReport>
where
    F: Fn(f64) -> f64,
{
    if grid.is_empty() {
        return Err(Error::Domain("comparison grid is empty".into()));
    }
    let theory: Vec<f64> = grid.iter().map(|&x| theory(x)).collect();
    let emp: Vec<f64> = grid.iter().map(|&x| empirical.eval(x)).collect();
    let residuals: Vec<f64> = emp.iter().zip(&theory).map(|(e, f)| e - f).collect();
    let (i_max, sup) =
        residuals
            .iter()
            .map(|r| r.abs())
            .enumerate()
            .fold(
                (0, 0.0),
                |best, (i, d)| if d > best.1 { (i, d) } else { best },
            );
    Ok(ComparisonReport {
        grid: grid.to_vec(),
        theory,
        empirical: emp,
        residuals,
        sup_distance: sup,
        argmax: grid[i_max],
    })
}

/// Smallest `x` (to a relative tolerance) with `F(x, t) >= p`.
pub fn theoretical_quantile(ctx: &ShorthandContext, t: f64, p: f64) -> Result<f64> {
    check(p > 0.0 && p < 1.0, "p", "0 < p < 1", p)?;
    let cdf = |x: f64| -> Result<f64> { Ok(ctx.cdf_with_stop(CdfQuery::new(x, t)?).p) };
    let mut lo = ctx.floor(t);
    let scale = ctx.trade().u0() / ctx.trade().k();
    let mut width = scale;
    let mut hi = lo + width;
    while cdf(hi)? < p {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        if !hi.is_finite() {
            return Err(Error::Domain(format!("quantile {p} is not finite")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid)? >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Evenly spaced grid from a little below the floor of `F(., t)` up to its
/// 99.9% quantile.
pub fn comparison_grid(ctx: &ShorthandContext, t: f64, n_points: usize) -> Result<Vec<f64>> {
    check(n_points >= 2, "n_points", "n_points >= 2", n_points as f64)?;
    let lo = ctx.floor(t) - 0.05 * ctx.trade().u0() / ctx.trade().k();
    let hi = theoretical_quantile(ctx, t, 0.999)?;
    let step = (hi - lo) / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            if i + 1 == n_points {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect())
}

/// Market, trade and horizon of one experiment, in plain numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub u0: f64,
    pub k: f64,
    pub v0: f64,
    /// `None` disables the stop order.
    pub s_star: Option<f64>,
    pub t: f64,
}

impl Scenario {
    /// Parameter sets of the three illustrative figures: buy-and-hold,
    /// bold (`K = 2`) and timid (`K = 1/2`), all with `mu = S* = 1/2` and
    /// `S0 = u0 = sigma = t = 1`.
    pub fn figure(which: u8) -> Result<Self> {
        let k = match which {
            1 => 1.0,
            2 => 2.0,
            3 => 0.5,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "figure",
                    constraint: "figure in {1, 2, 3}",
                    value: which as f64,
                })
            }
        };
        Ok(Self {
            mu: 0.5,
            sigma: 1.0,
            s0: 1.0,
            u0: 1.0,
            k,
            v0: 1.0 / k,
            s_star: Some(0.5),
            t: 1.0,
        })
    }

    pub fn market(&self) -> Result<MarketParams> {
        MarketParams::new(self.mu, self.sigma, self.s0)
    }

    pub fn trade(&self) -> Result<TradeSpec> {
        match self.s_star {
            Some(s_star) => TradeSpec::new(&self.market()?, self.u0, self.k, self.v0, s_star),
            None => TradeSpec::without_stop(self.u0, self.k, self.v0),
        }
    }

    pub fn without_stop(&self) -> Self {
        Self {
            s_star: None,
            ..*self
        }
    }

    pub fn context(&self) -> Result<ShorthandContext> {
        Ok(ShorthandContext::new(&self.market()?, &self.trade()?))
    }
}

/// Monte Carlo settings that, together with a [`Scenario`], pin a run down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub master_seed: u64,
    pub bridge: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            n_paths: 50_000,
            n_steps: simulate::DEFAULT_STEPS_PER_YEAR,
            master_seed: 20_240_601,
            bridge: true,
        }
    }
}

impl SimulationSettings {
    pub fn batch(&self, t: f64) -> Result<BatchConfig> {
        BatchConfig::new(
            PathGrid::new(t, self.n_steps)?,
            self.n_paths,
            self.master_seed,
            self.bridge,
        )
    }
}

/// One row of a figure dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub x: f64,
    pub f0_theory: f64,
    pub f_theory: f64,
    pub f0_empirical: f64,
    pub f_empirical: f64,
}

pub const FIGURE_CSV_HEADER: &str = "x,F0_theory,F_theory,F0_empirical,F_empirical";

/// Summary written next to a figure dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureReport {
    pub figure: u8,
    pub scenario: Scenario,
    pub simulation: SimulationSettings,
    pub floor: f64,
    pub stopped_fraction: f64,
    pub sup_distance: f64,
    pub sup_distance_no_stop: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Theory and simulation, with and without the stop, on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureReproduction {
    pub report: FigureReport,
    pub rows: Vec<FigureRow>,
    pub with_stop: ComparisonReport,
    pub no_stop: ComparisonReport,
}

impl FigureReproduction {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{FIGURE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                format_number(r.x),
                format_number(r.f0_theory),
                format_number(r.f_theory),
                format_number(r.f0_empirical),
                format_number(r.f_empirical)
            )?;
        }
        Ok(())
    }
}

/// Reproduces one of the three illustrative figures with the given
/// simulation settings. The no-stop curve is simulated on the same seeds,
/// so both empirical curves come from identical price paths.
pub fn reproduce_figure(which: u8, sim: &SimulationSettings) -> Result<FigureReproduction> {
    let scenario = Scenario::figure(which)?;
    reproduce_scenario(which, &scenario, sim)
}

/// [`reproduce_figure`] for an arbitrary stopped scenario; `label` is only
/// echoed into the report.
pub fn reproduce_scenario(
    label: u8,
    scenario: &Scenario,
    sim: &SimulationSettings,
) -> Result<FigureReproduction> {
    let market = scenario.market()?;
    let trade = scenario.trade()?;
    trade.s_star().ok_or(Error::StopDisabled)?;
    let free = scenario.without_stop().trade()?;
    let ctx = ShorthandContext::new(&market, &trade);
    let ctx_free = ShorthandContext::new(&market, &free);
    let t = scenario.t;
    let grid = comparison_grid(&ctx, t, GRID_POINTS)?;

    let batch = sim.batch(t)?;
    let stopped = simulate::run_batch(&market, &trade, &batch)?;
    let unstopped = simulate::run_batch(&market, &free, &batch)?;
    let e_stop = EmpiricalCdf::new(stopped.terminal_gains())?;
    let e_free = EmpiricalCdf::new(unstopped.terminal_gains())?;

    let f = |x: f64| ctx.cdf_with_stop(CdfQuery { x, t }).p;
    let f0 = |x: f64| ctx_free.cdf_no_stop(CdfQuery { x, t }).p;
    let with_stop = compare(&e_stop, f, &grid)?;
    let no_stop = compare(&e_free, f0, &grid)?;

    let tolerance = sup_distance_gate(sim.n_paths);
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| FigureRow {
            x,
            f0_theory: no_stop.theory[i],
            f_theory: with_stop.theory[i],
            f0_empirical: no_stop.empirical[i],
            f_empirical: with_stop.empirical[i],
        })
        .collect();
    let report = FigureReport {
        figure: label,
        scenario: *scenario,
        simulation: *sim,
        floor: ctx.floor(t),
        stopped_fraction: stopped.stopped_fraction(),
        sup_distance: with_stop.sup_distance,
        sup_distance_no_stop: no_stop.sup_distance,
        tolerance,
        pass: with_stop.sup_distance <= tolerance && no_stop.sup_distance <= tolerance,
    };
    Ok(FigureReproduction {
        report,
        rows,
        with_stop,
        no_stop,
    })
}

/// Sup-distance between simulated and closed-form no-stop gain laws for
/// the scenario, ignoring its stop price.
pub fn no_stop_distance(scenario: &Scenario, sim: &SimulationSettings) -> Result<f64> {
    let free = scenario.without_stop();
    let market = free.market()?;
    let trade = free.trade()?;
    let ctx = ShorthandContext::new(&market, &trade);
    let t = free.t;
    let grid = comparison_grid(&ctx, t, GRID_POINTS)?;
    let batch = simulate::run_batch(&market, &trade, &sim.batch(t)?)?;
    let e = EmpiricalCdf::new(batch.terminal_gains())?;
    Ok(compare(&e, |x| ctx.cdf_no_stop(CdfQuery { x, t }).p, &grid)?.sup_distance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub status: CheckStatus,
    pub violations: u64,
    pub detail: String,
}

impl PropertyCheck {
    fn counted(name: &str, violations: u64, checked: u64) -> Self {
        Self {
            name: name.into(),
            status: if violations == 0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            violations,
            detail: format!("{violations} violations in {checked} grid points"),
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped,
            violations: 0,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub market: MarketParams,
    pub trade: TradeSpec,
    pub t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub master_seed: u64,
    pub bridge: bool,
    pub mean_terminal_gain: f64,
    pub standard_error: f64,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    /// True when no check failed; skipped checks do not count.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    points: u64,
    negative_value: u64,
    long_only: u64,
    control_bound: u64,
    proportional: u64,
    sum_g: f64,
    sum_g2: f64,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            points: self.points + o.points,
            negative_value: self.negative_value + o.negative_value,
            long_only: self.long_only + o.long_only,
            control_bound: self.control_bound + o.control_bound,
            proportional: self.proportional + o.proportional,
            sum_g: self.sum_g + o.sum_g,
            sum_g2: self.sum_g2 + o.sum_g2,
        }
    }
}

fn tally_path(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
    index: u64,
) -> Result<Tally> {
    let seed = SeedSpec::new(config.master_seed, index);
    let path = simulate::sample_path(market, &config.grid, seed);
    let sp = match trade.s_star() {
        Some(s_star) => simulate::detect_stop(&path, market, s_star, config.bridge, seed)?,
        None => simulate::StoppedPath {
            stopped_prices: path.prices.clone(),
            base: path,
            t_star: None,
            stop_index: None,
        },
    };
    let traj = simulate::gain_trajectory(&sp, market, trade)?;
    let (u0, k, v0) = (trade.u0(), trade.k(), trade.v0());
    let mut tally = Tally::default();
    for (i, s) in traj.iter().enumerate() {
        let stopped = sp.stop_index.is_some_and(|j| i >= j);
        tally.points += 1;
        tally.negative_value += u64::from(s.v < 0.0);
        tally.long_only += u64::from(if stopped { s.u != 0.0 } else { !(s.u > 0.0) });
        let bound = u0 + k * v0 + k * s.v;
        tally.control_bound += u64::from(s.u.abs() > bound + 1e-12 * bound.abs().max(1.0));
        if !stopped {
            let kv = k * s.v;
            tally.proportional += u64::from((s.u - kv).abs() > 1e-9 * kv.abs().max(1.0));
        }
    }
    let g = traj.last().map_or(0.0, |s| s.g);
    tally.sum_g = g;
    tally.sum_g2 = g * g;
    Ok(tally)
}

/// Simulates full trajectories and checks, at every grid time of every path,
/// that the account value stays nonnegative, that the position is long
/// before the stop and flat after it, and that `|u| <= u0 + K V0 + K V`.
/// It also checks the expected-gain lower bound at the horizon for
/// `c` in `{V0/2, V0, 2 V0}` with a 3-standard-error allowance.
///
/// The account-value leg needs `u0 <= K V0` and is skipped otherwise. The
/// `u = K V` leg only applies when `u0 = K V0` exactly.
pub fn property_suite(
    market: &MarketParams,
    trade: &TradeSpec,
    config: &BatchConfig,
) -> Result<PropertyReport> {
    let tally = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| tally_path(market, trade, config, i))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;

    let n = config.n_paths as f64;
    let mean = tally.sum_g / n;
    let var = if config.n_paths > 1 {
        ((tally.sum_g2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se = (var / n).sqrt();

    let mut checks = Vec::new();
    if model::check_survivability(trade) {
        checks.push(PropertyCheck::counted(
            "survivability",
            tally.negative_value,
            tally.points,
        ));
    } else {
        checks.push(PropertyCheck::skipped(
            "survivability",
            "precondition u0 <= k*v0 not met",
        ));
    }
    checks.push(PropertyCheck::counted(
        "long_only",
        tally.long_only,
        tally.points,
    ));
    checks.push(PropertyCheck::counted(
        "control_bound",
        tally.control_bound,
        tally.points,
    ));
    if trade.u0() == trade.k() * trade.v0() {
        checks.push(PropertyCheck::counted(
            "proportional_control",
            tally.proportional,
            tally.points,
        ));
    } else {
        checks.push(PropertyCheck::skipped(
            "proportional_control",
            "only defined when u0 = k*v0",
        ));
    }

    let ctx = ShorthandContext::new(market, trade);
    let t = config.grid.t_end();
    let v0 = trade.v0();
    for (name, c) in [
        ("lower_bound_half_v0", 0.5 * v0),
        ("lower_bound_v0", v0),
        ("lower_bound_two_v0", 2.0 * v0),
    ] {
        let f_at = ctx.cdf_with_stop(CdfQuery::new(c - v0, t)?).p;
        let bound = model::expected_gain_lower_bound(c, v0, f_at)?;
        let ok = mean >= bound - 3.0 * se;
        checks.push(PropertyCheck {
            name: name.into(),
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            violations: u64::from(!ok),
            detail: format!("mean {mean:.6} vs bound {bound:.6} (se {se:.2e})"),
        });
    }

    Ok(PropertyReport {
        market: *market,
        trade: *trade,
        t,
        n_paths: config.n_paths,
        n_steps: config.grid.n_steps(),
        master_seed: config.master_seed,
        bridge: config.bridge,
        mean_terminal_gain: mean,
        standard_error: se,
        checks,
    })
}
