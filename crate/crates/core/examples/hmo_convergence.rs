//! Neighborhood search against exhaustive enumeration over a few seeds.

use mpisac::optimizer::{exhaustive_solve, hmo_solve, HmoConfig, Problem};
use mpisac::scenario::default_scenario;

fn main() -> Result<(), mpisac::Error> {
    let mu = 0.01;
    for seed in 0..5 {
        let problem = Problem::new(default_scenario(), seed)?;
        let best = exhaustive_solve(&problem, mu)?;
        let sol = hmo_solve(&problem, &HmoConfig::default().with_mu(mu).with_seed(seed))?;
        let trace: Vec<String> = sol.trace.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "seed {seed}: hmo {} ({:.5}, {} evaluations)  exhaustive {} ({:.5}, {})  trace [{}]",
            sol.x,
            sol.objective,
            sol.evaluations,
            best.x,
            best.objective,
            best.evaluations,
            trace.join(", ")
        );
    }
    Ok(())
}
