//! Writes `x,F,F0` curves for the three regimes to CSV files, ready for
//! plotting.
//!
//! ```text
//! cargo run --example cdf_curves [output-dir]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use feedback_stop::simulate::format_number;
use feedback_stop::{CdfQuery, MarketParams, ShorthandContext, TradeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "curves".into()));
    std::fs::create_dir_all(&out_dir)?;
    let market = MarketParams::new(0.5, 1.0, 1.0)?;
    let t = 1.0;
    let (x_min, x_max, points) = (-2.0, 4.0, 601);

    for (name, k) in [("hold", 1.0), ("bold", 2.0), ("timid", 0.5)] {
        let ctx = ShorthandContext::new(&market, &TradeSpec::new(&market, 1.0, k, 1.0 / k, 0.5)?);
        let free = ShorthandContext::new(&market, &TradeSpec::without_stop(1.0, k, 1.0 / k)?);
        let path = out_dir.join(format!("cdf_{name}.csv"));
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "x,F,F0")?;
        for i in 0..points {
            let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
            let q = CdfQuery::new(x, t)?;
            writeln!(
                w,
                "{},{},{}",
                format_number(x),
                format_number(ctx.cdf_with_stop(q).p),
                format_number(free.cdf_no_stop(q).p)
            )?;
        }
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
