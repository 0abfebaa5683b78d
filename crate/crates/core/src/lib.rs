//! Profit/loss distribution of an affine feedback trading rule with a
//! stop-loss order, on a geometric Brownian motion price.
//!
//! * [`model`]: parameters, the closed-form gain, control and account value.
//! * [`cdf`]: closed-form CDFs of the gain and of the stop time.
//! * [`simulate`]: seeded, parallel GBM paths with stop detection.
//! * [`verify`]: empirical-vs-closed-form comparisons and property checks.
//! * [`cli`]: the `feedback-stop` command line front end.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example` lists
//! them.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdf;
pub mod cli;
pub mod error;
pub mod model;
pub mod simulate;
pub mod verify;

pub use cdf::{Branch, CdfQuery, CdfValue, ShorthandContext};
pub use error::{Error, Result};
pub use model::{GainSample, MarketParams, Regime, TradeSpec};
