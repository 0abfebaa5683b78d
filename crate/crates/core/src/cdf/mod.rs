//! Closed-form distribution of the trading gain `g(t)` with and without a
//! stop-loss order.
//!
//! Everything here is a combination of standard normal CDF values evaluated
//! at the log-price statistic
//!
//! ```text
//! X(z, t) = (ln z + (mu - sigma^2/2) t) / (sigma sqrt(t))
//! ```
//!
//! together with the first-passage law of the GBM to the stop price and the
//! joint law of `(S(t), t*)` obtained from the reflection principle. The
//! three gain regimes (`K = 1`, `K > 1`, `0 < K < 1`) each have their own
//! case split; see [`cdf_with_stop`].
//!
//! Arguments that would be exponentiated (`z`, `(S0/S*)^K`, `B(x, t)`) are
//! carried as logarithms throughout.

mod normal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, MarketParams, Regime, TradeSpec};

use normal::weighted_cdf;
pub use normal::{erfc, std_normal_cdf};

/// Profit level `x` and horizon `t > 0` at which `P(g(t) <= x)` is wanted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfQuery {
    pub x: f64,
    pub t: f64,
}

impl CdfQuery {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        if x.is_nan() {
            return Err(Error::Domain("profit level x is NaN".into()));
        }
        crate::error::check(t > 0.0 && t.is_finite(), "t", "t > 0", t)?;
        Ok(Self { x, t })
    }
}

/// Case of the governing theorem that produced a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// At or below the worst-case gain; the probability is zero.
    Floor,
    /// Between the floor and the level where every stopped path is counted.
    Middle,
    /// Above that level; only the unstopped tail is still uncertain.
    Upper,
    /// No stop configured.
    NoStop,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Floor => "floor",
            Branch::Middle => "middle",
            Branch::Upper => "upper",
            Branch::NoStop => "no_stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfValue {
    pub p: f64,
    pub branch: Branch,
}

impl CdfValue {
    fn new(p: f64, branch: Branch) -> Self {
        Self {
            p: p.clamp(0.0, 1.0),
            branch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StopTerms {
    s_star: f64,
    /// `ln(S*/S0) < 0`
    ln_ratio: f64,
    ln_z_star: f64,
    z_star: f64,
    /// `g_*` for K = 1, `(u0/K)((S*/S0)^K - 1)` otherwise.
    junction: f64,
}

/// Pre-computed shorthand quantities for one market/trade pair. Cheap to
/// build, immutable, and `Send + Sync`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShorthandContext {
    market: MarketParams,
    trade: TradeSpec,
    log_drift: f64,
    stop: Option<StopTerms>,
}

impl ShorthandContext {
    pub fn new(market: &MarketParams, trade: &TradeSpec) -> Self {
        let stop = trade.s_star().map(|s_star| {
            let ln_z_star = model::ln_z_star(market, s_star);
            StopTerms {
                s_star,
                ln_ratio: (s_star / market.s0()).ln(),
                ln_z_star,
                z_star: ln_z_star.exp(),
                junction: model::junction_level(market, trade, s_star),
            }
        });
        Self {
            market: *market,
            trade: *trade,
            log_drift: market.log_drift(),
            stop,
        }
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn trade(&self) -> &TradeSpec {
        &self.trade
    }

    pub fn regime(&self) -> Regime {
        self.trade.regime()
    }

    /// Cached `Z*`.
    pub fn z_star(&self) -> Result<f64> {
        Ok(self.stop()?.z_star)
    }

    /// Cached `mu - sigma^2/2`.
    pub fn log_drift(&self) -> f64 {
        self.log_drift
    }

    fn stop(&self) -> Result<&StopTerms> {
        self.stop.as_ref().ok_or(Error::StopDisabled)
    }

    /// `X(z, t)` from `ln z`. At `t = 0` the signed-infinity limit is used.
    fn x_of_ln(&self, ln_z: f64, t: f64) -> f64 {
        if t == 0.0 {
            return if ln_z > 0.0 {
                f64::INFINITY
            } else if ln_z < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
        }
        (ln_z + self.log_drift * t) / (self.market.sigma() * t.sqrt())
    }

    /// `ln B(x, t) = (ln(Kx/u0 + 1) - sigma^2 (K - K^2) t / 2) / K`.
    fn ln_b(&self, x: f64, t: f64) -> f64 {
        let k = self.trade.k();
        let sigma2 = self.market.sigma() * self.market.sigma();
        ((k * x / self.trade.u0()).ln_1p() - 0.5 * sigma2 * (k - k * k) * t) / k
    }

    fn check_above_ruin(&self, x: f64, what: &str) -> Result<()> {
        if x > self.trade.ruin_level() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} needs x > -u0/k = {}, got {x}",
                self.trade.ruin_level()
            )))
        }
    }

    fn check_time(t: f64, allow_zero: bool) -> Result<()> {
        let ok = if allow_zero { t >= 0.0 } else { t > 0.0 };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("time must be positive, got {t}")))
        }
    }

    /// `Z* Phi(X(z, t))` for `z` given in log form.
    fn z_weighted(&self, stop: &StopTerms, ln_z: f64, t: f64) -> f64 {
        weighted_cdf(stop.ln_z_star, stop.z_star, self.x_of_ln(ln_z, t))
    }

    /// `Phi(X(1/B, t)) - Z* Phi(X((S*/S0)^2 / B, t))` given `ln B`.
    fn theta_of_ln_b(&self, stop: &StopTerms, ln_b: f64, t: f64) -> f64 {
        std_normal_cdf(self.x_of_ln(-ln_b, t))
            - self.z_weighted(stop, 2.0 * stop.ln_ratio - ln_b, t)
    }

    /// `1 - Phi(X(1/B, t)) + Z* Phi(X((S*/S0)^2 / B, t))`: all stopped mass plus
    /// the unstopped paths below the level encoded by `B`.
    fn upper_expression(&self, stop: &StopTerms, ln_b: f64, t: f64) -> f64 {
        std_normal_cdf(-self.x_of_ln(-ln_b, t))
            + self.z_weighted(stop, 2.0 * stop.ln_ratio - ln_b, t)
    }

    fn stopping_cdf_unchecked(&self, stop: &StopTerms, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if t == f64::INFINITY {
            // absorption probability
            return if self.log_drift > 0.0 {
                stop.z_star.min(1.0)
            } else {
                1.0
            };
        }
        let p = std_normal_cdf(-self.x_of_ln(-stop.ln_ratio, t))
            + self.z_weighted(stop, stop.ln_ratio, t);
        p.clamp(0.0, 1.0)
    }

    // ------------------------------------------------------------------
    // shorthand functions

    /// `X(z, t)` for `z, t > 0`.
    pub fn big_x(&self, z: f64, t: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::Domain(format!("X(z, t) needs z > 0, got {z}")));
        }
        Self::check_time(t, false)?;
        Ok(self.x_of_ln(z.ln(), t))
    }

    /// Stop time at which the locked-in gain equals `x` (K != 1):
    /// `A(x) = -2 / (sigma^2 K (K - 1)) ln[(S0/S*)^K (Kx/u0 + 1)]`.
    pub fn a_of_x(&self, x: f64) -> Result<f64> {
        let stop = self.stop()?;
        let k = self.trade.k();
        if self.regime() == Regime::BuyAndHold {
            return Err(Error::Regime("A(x) is undefined for k = 1".into()));
        }
        self.check_above_ruin(x, "A(x)")?;
        Ok(self.a_unchecked(stop, k, x))
    }

    fn a_unchecked(&self, stop: &StopTerms, k: f64, x: f64) -> f64 {
        let sigma2 = self.market.sigma() * self.market.sigma();
        let ln_arg = -k * stop.ln_ratio + (k * x / self.trade.u0()).ln_1p();
        -2.0 / (sigma2 * k * (k - 1.0)) * ln_arg
    }

    /// `B(x, t) = [(Kx/u0 + 1) exp(-sigma^2 (K - K^2) t / 2)]^(1/K)`, the
    /// price ratio `S(t)/S0` at which an unstopped trade shows gain `x`.
    pub fn b_of_x_t(&self, x: f64, t: f64) -> Result<f64> {
        self.check_above_ruin(x, "B(x, t)")?;
        Self::check_time(t, false)?;
        Ok(self.ln_b(x, t).exp())
    }

    // ------------------------------------------------------------------
    // first passage and joint laws

    /// `P(t* <= t) = 1 - Phi(X(S0/S*, t)) + Z* Phi(X(S*/S0, t))`, with
    /// `P(t* <= 0) = 0`.
    pub fn stopping_time_cdf(&self, t: f64) -> Result<f64> {
        let stop = self.stop()?;
        Self::check_time(t, true)?;
        Ok(self.stopping_cdf_unchecked(stop, t))
    }

    /// `Omega(t) = P(t* > t) = 1 - P(t* <= t)`; `Omega(0) = 1`.
    pub fn omega(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.stopping_time_cdf(t)?)
    }

    /// `P(S(t) >= x, t* >= t) = Phi(X(S0/x, t)) - Z* Phi(X(S*^2/(S0 x), t))`.
    ///
    /// A surviving path sits above `S*`, so for `x <= S*` the probability is
    /// just `P(t* >= t)`; the price is clamped to `S*` there.
    pub fn joint_survival(&self, x_price: f64, t: f64) -> Result<f64> {
        let stop = self.stop()?;
        if !(x_price > 0.0) {
            return Err(Error::Domain(format!(
                "price must be positive, got {x_price}"
            )));
        }
        Self::check_time(t, false)?;
        let ln_x = (x_price.max(stop.s_star) / self.market.s0()).ln();
        let p = std_normal_cdf(self.x_of_ln(-ln_x, t))
            - self.z_weighted(stop, 2.0 * stop.ln_ratio - ln_x, t);
        Ok(p.clamp(0.0, 1.0))
    }

    /// `Theta(x, t) = Phi(X(1/B, t)) - Z* Phi(X((S*/S0)^2 / B, t))`, the
    /// probability that the trade survives to `t` with a gain above `x`.
    ///
    /// Every surviving path already gains more than `g*(t)`, so below that
    /// level `B` is clamped to `S*/S0` and the result is `Omega(t)`.
    pub fn theta(&self, x: f64, t: f64) -> Result<f64> {
        let stop = self.stop()?;
        self.check_above_ruin(x, "Theta(x, t)")?;
        Self::check_time(t, false)?;
        let ln_b = self.ln_b(x, t).max(stop.ln_ratio);
        Ok(self.theta_of_ln_b(stop, ln_b, t))
    }

    fn check_not_hold(&self) -> Result<()> {
        if self.regime() == Regime::BuyAndHold {
            Err(Error::Regime(
                "the joint stopped/unstopped split is stated for k != 1".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// `P(g(t) <= x, t* <= t)` for `K != 1`.
    pub fn joint_cdf_stopped(&self, x: f64, t: f64) -> Result<f64> {
        let stop = self.stop()?;
        self.check_not_hold()?;
        Self::check_time(t, false)?;
        let k = self.trade.k();
        let g_t = model::g_star_t(&self.market, &self.trade, t)?;
        let p = match self.regime() {
            Regime::Bold => {
                if x <= g_t {
                    0.0
                } else if x < stop.junction {
                    let a = self.a_unchecked(stop, k, x);
                    (1.0 - self.stopping_cdf_unchecked(stop, a))
                        - (1.0 - self.stopping_cdf_unchecked(stop, t))
                } else {
                    self.stopping_cdf_unchecked(stop, t)
                }
            }
            Regime::Timid => {
                if x <= stop.junction {
                    0.0
                } else if x < g_t {
                    self.stopping_cdf_unchecked(stop, self.a_unchecked(stop, k, x))
                } else {
                    self.stopping_cdf_unchecked(stop, t)
                }
            }
            Regime::BuyAndHold => unreachable!(),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    /// `P(g(t) <= x, t* > t)` for `K != 1`.
    pub fn joint_cdf_unstopped(&self, x: f64, t: f64) -> Result<f64> {
        let stop = self.stop()?;
        self.check_not_hold()?;
        Self::check_time(t, false)?;
        let g_t = model::g_star_t(&self.market, &self.trade, t)?;
        let below = match self.regime() {
            Regime::Bold => x <= g_t,
            _ => x < g_t,
        };
        if below {
            return Ok(0.0);
        }
        let omega_t = 1.0 - self.stopping_cdf_unchecked(stop, t);
        let p = omega_t - self.theta_of_ln_b(stop, self.ln_b(x, t), t);
        Ok(p.clamp(0.0, 1.0))
    }

    // ------------------------------------------------------------------
    // full distributions

    /// `F0(x, t)`: the gain CDF with no stop order.
    pub fn cdf_no_stop(&self, q: CdfQuery) -> CdfValue {
        if q.x <= self.trade.ruin_level() {
            return CdfValue::new(0.0, Branch::NoStop);
        }
        let p = std_normal_cdf(-self.x_of_ln(-self.ln_b(q.x, q.t), q.t));
        CdfValue::new(p, Branch::NoStop)
    }

    /// `F(x, t) = P(g(t) <= x)` with the stop order in place, dispatched on
    /// the regime. Trades without a stop fall back to [`Self::cdf_no_stop`].
    pub fn cdf_with_stop(&self, q: CdfQuery) -> CdfValue {
        let Some(stop) = self.stop.as_ref() else {
            return self.cdf_no_stop(q);
        };
        let CdfQuery { x, t } = q;
        match self.regime() {
            Regime::BuyAndHold => {
                if x < stop.junction {
                    CdfValue::new(0.0, Branch::Floor)
                } else {
                    // B(x, t) = (x + u0)/u0 when K = 1
                    let ln_b = (x / self.trade.u0()).ln_1p();
                    CdfValue::new(self.upper_expression(stop, ln_b, t), Branch::Upper)
                }
            }
            Regime::Bold => {
                let g_t = self.g_star_t_unchecked(stop, t);
                if x <= g_t {
                    CdfValue::new(0.0, Branch::Floor)
                } else if x < stop.junction {
                    let a = self.a_unchecked(stop, self.trade.k(), x);
                    let omega_a = std_normal_cdf(self.x_of_ln(-stop.ln_ratio, a))
                        - self.z_weighted(stop, stop.ln_ratio, a);
                    let omega_a = if a == 0.0 { 1.0 } else { omega_a };
                    let p = omega_a - self.theta_of_ln_b(stop, self.ln_b(x, t), t);
                    CdfValue::new(p, Branch::Middle)
                } else {
                    CdfValue::new(
                        self.upper_expression(stop, self.ln_b(x, t), t),
                        Branch::Upper,
                    )
                }
            }
            Regime::Timid => {
                let g_t = self.g_star_t_unchecked(stop, t);
                if x <= stop.junction {
                    CdfValue::new(0.0, Branch::Floor)
                } else if x < g_t {
                    let a = self.a_unchecked(stop, self.trade.k(), x);
                    CdfValue::new(self.stopping_cdf_unchecked(stop, a), Branch::Middle)
                } else {
                    CdfValue::new(
                        self.upper_expression(stop, self.ln_b(x, t), t),
                        Branch::Upper,
                    )
                }
            }
        }
    }

    fn g_star_t_unchecked(&self, stop: &StopTerms, t: f64) -> f64 {
        model::gain_formula(
            &self.market,
            self.trade.u0(),
            self.trade.k(),
            stop.s_star,
            t,
        )
    }

    /// Worst-case gain at horizon `t`. `F` vanishes below it, and at it too
    /// except for `K = 1`, where the stopped paths form an atom.
    pub fn floor(&self, t: f64) -> f64 {
        match (self.stop.as_ref(), self.regime()) {
            (None, _) => self.trade.ruin_level(),
            (Some(stop), Regime::Bold) => self.g_star_t_unchecked(stop, t),
            (Some(stop), _) => stop.junction,
        }
    }
}
