//! Market and trade parameters, the closed-form gain of the affine feedback
//! rule, and the account-level properties (survivability, long-only, the
//! expected-gain lower bound).
//!
//! The price follows a geometric Brownian motion `dS/S = mu dt + sigma dW`.
//! The trader invests `u(t) = u0 + K g(t)` until the price first touches the
//! stop price `S*`, after which the position is closed and `u(t) = 0`.
//! Along any path that has not been stopped the cumulative gain is
//!
//! ```text
//! g(t) = (u0 / K) * ((S(t) / S0)^K * exp(sigma^2 (K - K^2) t / 2) - 1)
//! ```
//!
//! Times are in years, `mu` and `sigma` are annualized, prices and currency
//! amounts are arbitrary positive reals.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

/// Drift, volatility and starting price of the GBM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    mu: f64,
    sigma: f64,
    s0: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, s0: f64) -> Result<Self> {
        check(mu.is_finite(), "mu", "a finite value", mu)?;
        check(
            sigma > 0.0 && sigma.is_finite(),
            "sigma",
            "sigma > 0",
            sigma,
        )?;
        check(s0 > 0.0 && s0.is_finite(), "s0", "s0 > 0", s0)?;
        Ok(Self { mu, sigma, s0 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Drift of the log-price, `mu - sigma^2 / 2`.
    pub fn log_drift(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }
}

/// Initial investment, feedback gain, initial account value and (optionally)
/// the stop price.
///
/// A trade built with [`TradeSpec::without_stop`] never liquidates; the CDF
/// engine then routes to the no-stop distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeSpec {
    u0: f64,
    k: f64,
    v0: f64,
    s_star: Option<f64>,
}

impl TradeSpec {
    /// Validates `u0, k, v0 > 0` and `0 < s_star < s0`.
    pub fn new(market: &MarketParams, u0: f64, k: f64, v0: f64, s_star: f64) -> Result<Self> {
        let mut spec = Self::without_stop(u0, k, v0)?;
        check(s_star > 0.0, "s_star", "s_star > 0", s_star)?;
        check(s_star < market.s0, "s_star", "s_star < s0", s_star)?;
        spec.s_star = Some(s_star);
        Ok(spec)
    }

    pub fn without_stop(u0: f64, k: f64, v0: f64) -> Result<Self> {
        check(u0 > 0.0 && u0.is_finite(), "u0", "u0 > 0", u0)?;
        check(k > 0.0 && k.is_finite(), "k", "k > 0", k)?;
        check(v0 > 0.0 && v0.is_finite(), "v0", "v0 > 0", v0)?;
        Ok(Self {
            u0,
            k,
            v0,
            s_star: None,
        })
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn s_star(&self) -> Option<f64> {
        self.s_star
    }

    pub(crate) fn require_stop(&self) -> Result<f64> {
        self.s_star.ok_or(Error::StopDisabled)
    }

    pub fn regime(&self) -> Regime {
        Regime::from_gain(self.k)
    }

    /// Lower bound `-u0/K` of the gain when no stop is in place.
    pub fn ruin_level(&self) -> f64 {
        -self.u0 / self.k
    }
}

/// Which closed-form theorem applies, selected by the feedback gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `K = 1` exactly.
    BuyAndHold,
    /// `K > 1`, leveraged.
    Bold,
    /// `0 < K < 1`, cash financed.
    Timid,
}

impl Regime {
    pub fn from_gain(k: f64) -> Self {
        #[allow(clippy::float_cmp)]
        if k == 1.0 {
            Regime::BuyAndHold
        } else if k > 1.0 {
            Regime::Bold
        } else {
            Regime::Timid
        }
    }
}

/// State of the trade at one observation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSample {
    pub t: f64,
    /// Cumulative profit or loss.
    pub g: f64,
    /// Investment level (control).
    pub u: f64,
    /// Account value `v0 + g`.
    pub v: f64,
}

/// Gain formula shared by the stopped and unstopped cases. For `K = 1` the
/// exponent vanishes and the expression collapses to `u0 (S/S0 - 1)`, which
/// is evaluated directly so the stop atom lands on `g_star` bit for bit.
pub(crate) fn gain_formula(market: &MarketParams, u0: f64, k: f64, price: f64, t: f64) -> f64 {
    #[allow(clippy::float_cmp)]
    if k == 1.0 {
        return u0 * (price / market.s0 - 1.0);
    }
    let sigma2 = market.sigma * market.sigma;
    let exponent = k * (price / market.s0).ln() + 0.5 * sigma2 * (k - k * k) * t;
    u0 / k * exponent.exp_m1()
}

/// `Z* = (S*/S0)^(2 mu / sigma^2 - 1)`.
pub fn z_star(market: &MarketParams, trade: &TradeSpec) -> Result<f64> {
    Ok(ln_z_star(market, trade.require_stop()?).exp())
}

pub(crate) fn ln_z_star(market: &MarketParams, s_star: f64) -> f64 {
    let exponent = 2.0 * market.mu / (market.sigma * market.sigma) - 1.0;
    if exponent == 0.0 {
        return 0.0;
    }
    exponent * (s_star / market.s0).ln()
}

/// Worst-case gain for `K = 1`: `u0 (S*/S0 - 1)`.
pub fn g_star(market: &MarketParams, trade: &TradeSpec) -> Result<f64> {
    let s_star = trade.require_stop()?;
    Ok(trade.u0 * (s_star / market.s0 - 1.0))
}

/// Gain locked in by a stop triggered at time `t`:
/// `(u0/K) ((S*/S0)^K exp(sigma^2 (K - K^2) t / 2) - 1)`.
pub fn g_star_t(market: &MarketParams, trade: &TradeSpec, t: f64) -> Result<f64> {
    let s_star = trade.require_stop()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("g_star_t needs t >= 0, got {t}")));
    }
    Ok(gain_formula(market, trade.u0, trade.k, s_star, t))
}

/// Worst case for the timid regime, `(u0/K) ((S*/S0)^K - 1)`.
pub fn timid_floor(market: &MarketParams, trade: &TradeSpec) -> Result<f64> {
    if trade.k >= 1.0 {
        return Err(Error::Regime(format!(
            "timid floor is defined for 0 < k < 1, got k = {}",
            trade.k
        )));
    }
    let s_star = trade.require_stop()?;
    Ok(junction_level(market, trade, s_star))
}

/// `(u0/K) ((S*/S0)^K - 1)`; the timid floor, and the upper branch junction
/// of the bold theorem.
pub(crate) fn junction_level(market: &MarketParams, trade: &TradeSpec, s_star: f64) -> f64 {
    gain_formula(market, trade.u0, trade.k, s_star, 0.0)
}

/// Cumulative gain at time `t` for price `s_t` when no stop is in place.
pub fn gain_no_stop(market: &MarketParams, trade: &TradeSpec, s_t: f64, t: f64) -> Result<f64> {
    if !(s_t > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "gain needs a positive price and t >= 0, got price {s_t}, t {t}"
        )));
    }
    Ok(gain_formula(market, trade.u0, trade.k, s_t, t))
}

/// Cumulative gain evaluated on the stopped price `s_tilde >= S*`.
///
/// `t` is the time the position was last active: the observation time for a
/// live trade, and the stop time `t*` once the stop has fired (the position
/// is flat afterwards, so the gain no longer moves).
pub fn gain_stopped(market: &MarketParams, trade: &TradeSpec, s_tilde: f64, t: f64) -> Result<f64> {
    let s_star = trade.require_stop()?;
    if s_tilde < s_star {
        return Err(Error::Domain(format!(
            "stopped price {s_tilde} lies below the stop price {s_star}"
        )));
    }
    gain_no_stop(market, trade, s_tilde, t)
}

/// Investment level: `u0 + K g` while the trade is live, `0` once stopped.
pub fn control_value(trade: &TradeSpec, g: f64, stopped: bool) -> f64 {
    if stopped {
        0.0
    } else {
        trade.u0 + trade.k * g
    }
}

/// `u0 <= K V0` guarantees a nonnegative account value on every path.
pub fn check_survivability(trade: &TradeSpec) -> bool {
    trade.u0 <= trade.k * trade.v0
}

/// Markov-inequality bound `E[g(t)] >= c (1 - F(c - V0, t)) - V0`, where
/// `f_at` is the CDF evaluated at `c - V0`.
pub fn expected_gain_lower_bound(c: f64, v0: f64, f_at: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("lower bound needs c > 0, got {c}")));
    }
    if !(0.0..=1.0).contains(&f_at) {
        return Err(Error::Domain(format!(
            "CDF value must lie in [0, 1], got {f_at}"
        )));
    }
    Ok(c * (1.0 - f_at) - v0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn market(mu: f64, sigma: f64) -> MarketParams {
        MarketParams::new(mu, sigma, 1.0).unwrap()
    }

    fn trade(m: &MarketParams, u0: f64, k: f64, s_star: f64) -> TradeSpec {
        TradeSpec::new(m, u0, k, u0 / k, s_star).unwrap()
    }

    #[test]
    fn validation_names_the_constraint() {
        let err = MarketParams::new(0.5, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("sigma > 0"), "{err}");
        let m = market(0.5, 1.0);
        let err = TradeSpec::new(&m, 1.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("s_star < s0"), "{err}");
        assert!(TradeSpec::new(&m, 1.0, 0.0, 1.0, 0.5).is_err());
        assert!(TradeSpec::new(&m, -1.0, 1.0, 1.0, 0.5).is_err());
        assert!(TradeSpec::new(&m, 1.0, 1.0, 0.0, 0.5).is_err());
        assert!(TradeSpec::new(&m, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(MarketParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(TradeSpec::without_stop(1.0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn regime_dispatch_is_exact() {
        assert_eq!(Regime::from_gain(1.0), Regime::BuyAndHold);
        assert_eq!(Regime::from_gain(1.0 + 1e-12), Regime::Bold);
        assert_eq!(Regime::from_gain(1.0 - 1e-12), Regime::Timid);
    }

    #[test]
    fn z_star_examples() {
        let m = market(0.5, 1.0);
        assert_eq!(z_star(&m, &trade(&m, 1.0, 1.0, 0.5)).unwrap(), 1.0);
        let m = market(1.0, 1.0);
        assert_abs_diff_eq!(
            z_star(&m, &trade(&m, 1.0, 1.0, 0.5)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let z = z_star(&m, &trade(&m, 1.0, 1.0, 1.0 - 1e-12)).unwrap();
        assert_abs_diff_eq!(z, 1.0, epsilon = 1e-10);
        let no_stop = TradeSpec::without_stop(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(z_star(&m, &no_stop), Err(Error::StopDisabled)));
    }

    #[test]
    fn g_star_examples() {
        let m = market(0.5, 1.0);
        assert_eq!(g_star(&m, &trade(&m, 1.0, 1.0, 0.5)).unwrap(), -0.5);
        assert_eq!(g_star(&m, &trade(&m, 2.0, 1.0, 0.5)).unwrap(), -1.0);
        assert_abs_diff_eq!(
            g_star(&m, &trade(&m, 1.0, 1.0, 1.0 - 1e-12)).unwrap(),
            0.0,
            epsilon = 1e-11
        );
    }

    #[test]
    fn g_star_t_examples() {
        let m = market(0.5, 1.0);
        for t in [0.1, 1.0, 7.0] {
            assert_eq!(g_star_t(&m, &trade(&m, 1.0, 1.0, 0.5), t).unwrap(), -0.5);
        }
        let bold = g_star_t(&m, &trade(&m, 1.0, 2.0, 0.5), 1.0).unwrap();
        assert_abs_diff_eq!(bold, 0.5 * (0.25 * (-1.0f64).exp() - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(bold, -0.454_015_069_853_569_7, epsilon = 1e-14);
        let timid = g_star_t(&m, &trade(&m, 1.0, 0.5, 0.5), 0.0).unwrap();
        assert_abs_diff_eq!(timid, 2.0 * (0.5f64.sqrt() - 1.0), epsilon = 1e-15);
        assert!(g_star_t(&m, &trade(&m, 1.0, 0.5, 0.5), -1.0).is_err());
    }

    #[test]
    fn timid_floor_examples() {
        let m = market(0.5, 1.0);
        let floor = timid_floor(&m, &trade(&m, 1.0, 0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(floor, -0.5858, epsilon = 1e-4);
        let near = timid_floor(&m, &trade(&m, 1.0, 0.5, 1.0 - 1e-12)).unwrap();
        assert_abs_diff_eq!(near, 0.0, epsilon = 1e-11);
        let quarter = timid_floor(&m, &trade(&m, 1.0, 0.25, 0.5)).unwrap();
        assert_abs_diff_eq!(quarter, -0.636_414_338_985_141_8, epsilon = 1e-14);
        assert!(matches!(
            timid_floor(&m, &trade(&m, 1.0, 1.0, 0.5)),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn gain_examples() {
        let m = market(0.5, 1.0);
        let hold = trade(&m, 1.0, 1.0, 0.5);
        assert_eq!(gain_no_stop(&m, &hold, 1.0, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            gain_no_stop(&m, &hold, 1.2, 1.0).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        let bold = trade(&m, 1.0, 2.0, 0.5);
        assert_abs_diff_eq!(
            gain_no_stop(&m, &bold, 1.0, 1.0).unwrap(),
            0.5 * ((-1.0f64).exp() - 1.0),
            epsilon = 1e-15
        );
        assert!(gain_no_stop(&m, &bold, 0.0, 1.0).is_err());

        assert_eq!(gain_stopped(&m, &hold, 0.5, 1.0).unwrap(), -0.5);
        assert_eq!(gain_stopped(&m, &hold, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(
            gain_stopped(&m, &bold, 0.5, 1.0).unwrap(),
            g_star_t(&m, &bold, 1.0).unwrap()
        );
        assert!(matches!(
            gain_stopped(&m, &hold, 0.49, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn control_and_survivability() {
        let m = market(0.5, 1.0);
        let tr = TradeSpec::new(&m, 1.0, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(control_value(&tr, 0.0, false), 1.0);
        assert_eq!(control_value(&tr, -0.25, false), 0.5);
        assert_eq!(control_value(&tr, 3.0, true), 0.0);

        let s = |u0, k, v0| check_survivability(&TradeSpec::without_stop(u0, k, v0).unwrap());
        assert!(s(1.0, 1.0, 2.0));
        assert!(!s(3.0, 1.0, 2.0));
        assert!(s(2.0, 1.0, 2.0));
    }

    #[test]
    fn lower_bound_examples() {
        let f0 = 0.582_828_519_001_698_5;
        assert_abs_diff_eq!(
            expected_gain_lower_bound(2.0, 2.0, f0).unwrap(),
            -2.0 * f0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            expected_gain_lower_bound(2.0, 2.0, 0.5829).unwrap(),
            -1.1658,
            epsilon = 1e-12
        );
        assert_eq!(expected_gain_lower_bound(2.0, 2.0, 1.0).unwrap(), -2.0);
        assert!(expected_gain_lower_bound(0.0, 2.0, 0.5).is_err());
        assert!(expected_gain_lower_bound(1.0, 2.0, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn unstopped_gain_stays_above_ruin(
            k in 0.05f64..8.0, sigma in 0.05f64..2.0, ln_s in -6.0f64..6.0, t in 0.0f64..5.0
        ) {
            let m = MarketParams::new(0.1, sigma, 1.0).unwrap();
            let tr = TradeSpec::without_stop(1.0, k, 1.0).unwrap();
            let g = gain_no_stop(&m, &tr, ln_s.exp(), t).unwrap();
            // equality only once expm1 saturates at -1 in double precision
            prop_assert!(g >= tr.ruin_level());
        }

        #[test]
        fn stop_gain_matches_g_star_t(k in 0.05f64..8.0, t in 0.0f64..5.0, s_star in 0.05f64..0.95) {
            let m = MarketParams::new(0.3, 0.8, 1.0).unwrap();
            let tr = TradeSpec::new(&m, 1.0, k, 1.0 / k, s_star).unwrap();
            prop_assert_eq!(gain_stopped(&m, &tr, s_star, t).unwrap(), g_star_t(&m, &tr, t).unwrap());
            prop_assert_eq!(gain_stopped(&m, &tr, 1.3, t).unwrap(), gain_no_stop(&m, &tr, 1.3, t).unwrap());
        }

        #[test]
        fn live_control_stays_positive_above_the_stop_level(
            k in 0.05f64..8.0, t in 0.0f64..5.0, s_star in 0.05f64..0.95, bump in 0.0f64..2.0
        ) {
            let m = MarketParams::new(0.3, 0.8, 1.0).unwrap();
            let tr = TradeSpec::new(&m, 1.0, k, 1.0 / k, s_star).unwrap();
            let g = g_star_t(&m, &tr, t).unwrap() + bump;
            prop_assert!(control_value(&tr, g, false) > 0.0);
        }

        #[test]
        fn control_magnitude_bound(u0 in 0.01f64..5.0, k in 0.05f64..8.0, v0 in 0.01f64..5.0, g in -5.0f64..5.0) {
            prop_assume!(v0 + g >= 0.0);
            let tr = TradeSpec::without_stop(u0, k, v0).unwrap();
            let u = control_value(&tr, g, false);
            prop_assert!(u.abs() <= u0 + k * v0 + k * (v0 + g) + 1e-12);
        }

        #[test]
        fn linear_feedback_iff_u0_equals_k_v0(k in 0.05f64..8.0, v0 in 0.01f64..5.0, g in -5.0f64..5.0) {
            let tr = TradeSpec::without_stop(k * v0, k, v0).unwrap();
            let u = control_value(&tr, g, false);
            prop_assert!((u - k * (v0 + g)).abs() <= 1e-12 * (1.0 + u.abs()));
            let off = TradeSpec::without_stop(k * v0 * 1.5, k, v0).unwrap();
            prop_assert!((control_value(&off, g, false) - k * (v0 + g)).abs() > 1e-9);
        }
    }
}
