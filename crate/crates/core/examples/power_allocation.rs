//! Solve the power subproblem for a fixed selection and compare it with a
//! brute-force grid search.

use mpisac::beamform::SelectionVector;
use mpisac::power::{grid_oracle, min_sensing_powers, solve_p4, P4Instance};

fn main() -> Result<(), mpisac::Error> {
    // DFR 0 senses, DFRs 1 and 2 serve the receiver
    let inst = P4Instance {
        x: SelectionVector(vec![true, false, false]),
        a: vec![0.0, 1.0, 2.0],
        b: vec![2.0, 0.0, 0.0],
        sum_power: 6.0,
        max_power: 3.0,
        noise_power: 1.0,
        sinr_threshold: 2.0,
    };
    println!("sensing minima: {:?}", min_sensing_powers(&inst)?);
    let sol = solve_p4(&inst)?;
    println!(
        "KKT solution:   p = {:.6?}, objective {:.6}, lambda {:.6}",
        sol.p.0, sol.objective, sol.lambda
    );
    let grid = grid_oracle(&inst, 1e-3)?;
    println!(
        "grid (1 mW):    p = {:.3?}, objective {:.6}",
        grid.p.0, grid.objective
    );
    Ok(())
}
