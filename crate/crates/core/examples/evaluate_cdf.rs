//! Evaluates the gain CDF with and without the stop order in each regime.
//!
//! ```text
//! cargo run --example evaluate_cdf
//! ```

use feedback_stop::{model, CdfQuery, MarketParams, ShorthandContext, TradeSpec};

fn main() -> feedback_stop::Result<()> {
    let market = MarketParams::new(0.5, 1.0, 1.0)?;
    let t = 1.0;

    for k in [1.0, 2.0, 0.5] {
        let trade = TradeSpec::new(&market, 1.0, k, 1.0 / k, 0.5)?;
        let free = TradeSpec::without_stop(1.0, k, 1.0 / k)?;
        let ctx = ShorthandContext::new(&market, &trade);
        let ctx_free = ShorthandContext::new(&market, &free);

        println!("K = {k} ({:?})", trade.regime());
        println!("  worst case with stop at t = {t}: {:.5}", ctx.floor(t));
        println!("  worst case without stop:       {:.5}", trade.ruin_level());
        println!("  g*(t) = {:.5}", model::g_star_t(&market, &trade, t)?);
        for x in [-0.5, -0.25, 0.0, 0.5, 1.0] {
            let q = CdfQuery::new(x, t)?;
            let f = ctx.cdf_with_stop(q);
            let f0 = ctx_free.cdf_no_stop(q);
            println!(
                "  x = {x:>5}: F = {:.6} [{}]   F0 = {:.6}",
                f.p,
                f.branch.as_str(),
                f0.p
            );
        }
        println!();
    }
    Ok(())
}
