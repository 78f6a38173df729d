//! Sweep the rate weight and print the accuracy/rate Pareto front.

use mpisac::experiments::{parse_grid, region, SearchSettings, SeedPolicy};
use mpisac::scenario::default_scenario;

fn main() -> Result<(), mpisac::Error> {
    let mus = parse_grid("0,0.001,0.005,0.01,0.02,0.05,0.1,0.2,0.5,0.9,1")?;
    let rows = region(
        &default_scenario(),
        &mus,
        &[0],
        &SearchSettings::default(),
        SeedPolicy::default(),
    )?;
    println!("mu      x       accuracy  rate      front");
    for r in &rows {
        let mark = if r.dominated == Some(false) { "*" } else { "" };
        println!(
            "{:<6}  {}  {:.5}   {:.4}   {mark}",
            r.mu, r.x, r.accuracy, r.rate_bps_hz
        );
    }
    Ok(())
}
