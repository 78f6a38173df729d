//! Joint selection vs. a single sensing DFR vs. all-sensing fusion over a
//! range of power budgets, averaged over seeds.

use mpisac::experiments::{
    compare, parse_power_grid, seed_range, Scheme, SearchSettings, SeedPolicy,
};
use mpisac::scenario::default_scenario;

fn main() -> Result<(), mpisac::Error> {
    let grid = parse_power_grid("10mW:60mW:10mW")?;
    let seeds = seed_range(0, 10);
    let rows = compare(
        &default_scenario(),
        &grid,
        &seeds,
        0.01,
        &SearchSettings::default(),
        SeedPolicy::default(),
    )?;
    println!("P_sum(mW)  scheme            accuracy  rate(bps/Hz)  mean |S|");
    for &p in &grid {
        for scheme in [Scheme::Mpisac, Scheme::IsacNoFusion, Scheme::MultiRadar] {
            let pick: Vec<_> = rows
                .iter()
                .filter(|r| r.p_sum_w == p && r.scheme == scheme)
                .collect();
            let n = pick.len() as f64;
            let mean = |f: fn(&&mpisac::experiments::ExperimentRecord) -> f64| {
                pick.iter().map(f).sum::<f64>() / n
            };
            println!(
                "{:>8.0}   {:<16}  {:.4}    {:>8.3}      {:.1}",
                p * 1e3,
                scheme.name(),
                mean(|r| r.accuracy),
                mean(|r| r.rate_bps_hz),
                mean(|r| r.num_sensing as f64)
            );
        }
    }
    Ok(())
}
