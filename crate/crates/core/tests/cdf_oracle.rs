//! Monte Carlo oracles for the joint laws behind the closed-form CDF.
//!
//! Each test simulates 10^5 bridge-corrected paths on a 1024-step grid and
//! compares empirical frequencies with the closed form. The 0.008 tolerance
//! is about five binomial standard errors at n = 10^5 plus the residual
//! discretization of the stop.

use feedback_stop::simulate::{run_batch, BatchConfig, PathGrid, TerminalSample};
use feedback_stop::{model, MarketParams, ShorthandContext, TradeSpec};

const TOL: f64 = 0.008;
const N: usize = 100_000;

fn market() -> MarketParams {
    MarketParams::new(0.5, 1.0, 1.0).unwrap()
}

fn samples(trade: &TradeSpec, t: f64, seed: u64) -> Vec<TerminalSample> {
    let grid = PathGrid::with_density(t, 1024).unwrap();
    let cfg = BatchConfig::new(grid, N, seed, true).unwrap();
    run_batch(&market(), trade, &cfg).unwrap().samples
}

fn frequency(samples: &[TerminalSample], pred: impl Fn(&TerminalSample) -> bool) -> f64 {
    samples.iter().filter(|s| pred(s)).count() as f64 / samples.len() as f64
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

#[test]
fn joint_survival_against_unstopped_prices() {
    // with K = 1 and u0 = S0 = 1 the unstopped price is 1 + g
    let m = market();
    let tr = TradeSpec::new(&m, 1.0, 1.0, 1.0, 0.5).unwrap();
    let ctx = ShorthandContext::new(&m, &tr);
    let t = 1.0;
    let s = samples(&tr, t, 101);
    for x in [0.3, 0.5, 0.7, 1.0, 1.5, 2.5, 4.0] {
        let empirical = frequency(&s, |p| p.t_star.is_none() && 1.0 + p.g >= x);
        let theory = ctx.joint_survival(x, t).unwrap();
        assert!(
            (empirical - theory).abs() < TOL,
            "x = {x}: {empirical} vs {theory}"
        );
    }
}

#[test]
fn joint_pieces_for_bold_and_timid() {
    let m = market();
    let t = 1.0;
    for (k, seed) in [(2.0, 202), (0.5, 303)] {
        let tr = TradeSpec::new(&m, 1.0, k, 1.0 / k, 0.5).unwrap();
        let ctx = ShorthandContext::new(&m, &tr);
        let s = samples(&tr, t, seed);
        let lo = ctx.floor(t) - 0.05;
        for x in linspace(lo, 2.0, 41) {
            let stopped = frequency(&s, |p| p.t_star.is_some() && p.g <= x);
            let unstopped = frequency(&s, |p| p.t_star.is_none() && p.g <= x);
            let survive_above = frequency(&s, |p| p.t_star.is_none() && p.g > x);
            let js = ctx.joint_cdf_stopped(x, t).unwrap();
            let ju = ctx.joint_cdf_unstopped(x, t).unwrap();
            assert!(
                (stopped - js).abs() < TOL,
                "K={k}, x={x}: stopped {stopped} vs {js}"
            );
            assert!(
                (unstopped - ju).abs() < TOL,
                "K={k}, x={x}: unstopped {unstopped} vs {ju}"
            );
            if x > tr.ruin_level() {
                let th = ctx.theta(x, t).unwrap();
                assert!(
                    (survive_above - th).abs() < TOL,
                    "K={k}, x={x}: theta {survive_above} vs {th}"
                );
            }
        }
    }
}

#[test]
fn timid_middle_band_is_a_stop_time_probability() {
    // between the timid floor and g*(t) only stopped paths contribute, and a
    // path stopped at time s has gain g*(s), which rises with s for K < 1
    let m = market();
    let t = 1.0;
    let tr = TradeSpec::new(&m, 1.0, 0.5, 2.0, 0.5).unwrap();
    let ctx = ShorthandContext::new(&m, &tr);
    let floor = model::timid_floor(&m, &tr).unwrap();
    let top = model::g_star_t(&m, &tr, t).unwrap();
    let s = samples(&tr, t, 404);
    for x in linspace(floor, top, 12).skip(1).take(10) {
        let a = ctx.a_of_x(x).unwrap();
        assert!(a > 0.0 && a < t);
        let empirical_f = frequency(&s, |p| p.g <= x);
        let empirical_stop = frequency(&s, |p| p.t_star.is_some_and(|ts| ts <= a));
        let theory = ctx.stopping_time_cdf(a).unwrap();
        assert!(
            (empirical_f - theory).abs() < TOL,
            "x={x}: F {empirical_f} vs {theory}"
        );
        assert!(
            (empirical_stop - theory).abs() < TOL,
            "x={x}: stop {empirical_stop} vs {theory}"
        );
    }
}

#[test]
fn stop_time_distribution_over_horizons() {
    let m = market();
    let tr = TradeSpec::new(&m, 1.0, 1.0, 1.0, 0.5).unwrap();
    let ctx = ShorthandContext::new(&m, &tr);
    let s = samples(&tr, 4.0, 505);
    for t in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let empirical = frequency(&s, |p| p.t_star.is_some_and(|ts| ts <= t));
        let theory = ctx.stopping_time_cdf(t).unwrap();
        assert!(
            (empirical - theory).abs() < TOL,
            "t={t}: {empirical} vs {theory}"
        );
    }
}
