//! Runs the path-wise property checks (nonnegative account value, long-only
//! position, control bound, expected-gain lower bound) on a leveraged and on
//! an over-leveraged trade.
//!
//! ```text
//! cargo run --release --example survivability
//! ```

use feedback_stop::simulate::{BatchConfig, PathGrid};
use feedback_stop::verify::property_suite;
use feedback_stop::{model, MarketParams, TradeSpec};

fn main() -> feedback_stop::Result<()> {
    let market = MarketParams::new(0.5, 1.0, 1.0)?;
    let config = BatchConfig::new(PathGrid::with_density(1.0, 1024)?, 10_000, 11, true)?;

    for (u0, k, v0) in [(1.0, 1.0, 2.0), (1.0, 2.0, 0.5), (1.0, 0.5, 1.0)] {
        let trade = TradeSpec::new(&market, u0, k, v0, 0.5)?;
        println!(
            "u0 = {u0}, K = {k}, V0 = {v0} (survivable: {})",
            model::check_survivability(&trade)
        );
        let report = property_suite(&market, &trade, &config)?;
        for c in &report.checks {
            println!("  {:<22} {:?}  {}", c.name, c.status, c.detail);
        }
        println!(
            "  overall: {}\n",
            if report.passed() { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
