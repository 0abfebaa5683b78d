//! First-passage probability of the stop, closed form against simulation,
//! with and without the Brownian-bridge correction.
//!
//! ```text
//! cargo run --release --example stopping_time
//! ```

use feedback_stop::simulate::{run_batch, BatchConfig, PathGrid};
use feedback_stop::{MarketParams, ShorthandContext, TradeSpec};

fn main() -> feedback_stop::Result<()> {
    let market = MarketParams::new(0.5, 1.0, 1.0)?;
    let trade = TradeSpec::new(&market, 1.0, 1.0, 1.0, 0.5)?;
    let ctx = ShorthandContext::new(&market, &trade);

    println!("{:>6}  {:>10}", "t", "P(t* <= t)");
    for t in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, f64::INFINITY] {
        println!("{t:>6}  {:>10.6}", ctx.stopping_time_cdf(t)?);
    }

    let t = 1.0;
    let exact = ctx.stopping_time_cdf(t)?;
    println!("\nsimulated P(t* <= {t}) with 100,000 paths (closed form {exact:.5}):");
    for steps in [16, 64, 256, 1024] {
        let grid = PathGrid::new(t, steps)?;
        let plain = run_batch(&market, &trade, &BatchConfig::new(grid, 100_000, 1, false)?)?;
        let bridged = run_batch(&market, &trade, &BatchConfig::new(grid, 100_000, 1, true)?)?;
        println!(
            "  {steps:>5} steps: discrete {:.5}, bridge {:.5}",
            plain.stopped_fraction(),
            bridged.stopped_fraction()
        );
    }
    Ok(())
}
