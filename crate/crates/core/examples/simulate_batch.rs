//! Simulates stopped paths for a bold trade, prints one trajectory and
//! streams a batch of terminal samples to CSV.
//!
//! ```text
//! cargo run --release --example simulate_batch [samples.csv]
//! ```

use std::fs::File;
use std::io::BufWriter;

use feedback_stop::simulate::{
    detect_stop, gain_trajectory, run_batch, sample_path, write_batch_csv, BatchConfig, PathGrid,
    SeedSpec,
};
use feedback_stop::{MarketParams, TradeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = MarketParams::new(0.5, 1.0, 1.0)?;
    let trade = TradeSpec::new(&market, 1.0, 2.0, 0.5, 0.5)?;
    let grid = PathGrid::with_density(1.0, 1024)?;
    let master_seed = 7;

    // one path, step by step
    let seed = SeedSpec::new(master_seed, 0);
    let path = sample_path(&market, &grid, seed);
    let stopped = detect_stop(&path, &market, 0.5, true, seed)?;
    let traj = gain_trajectory(&stopped, &market, &trade)?;
    println!("path 0: stop time {:?}", stopped.t_star);
    for s in traj.iter().step_by(128) {
        println!(
            "  t = {:.4}  g = {:+.5}  u = {:.5}  V = {:.5}",
            s.t, s.g, s.u, s.v
        );
    }

    let config = BatchConfig::new(grid, 20_000, master_seed, true)?;
    let batch = run_batch(&market, &trade, &config)?;
    let gains = batch.terminal_gains();
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    println!(
        "\n{} paths: {:.2}% stopped, mean terminal gain {:+.5}",
        gains.len(),
        100.0 * batch.stopped_fraction(),
        mean
    );

    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "samples.csv".into());
    write_batch_csv(
        &market,
        &trade,
        &config,
        &mut BufWriter::new(File::create(&out)?),
    )?;
    println!("terminal samples written to {out}");
    Ok(())
}
