//! Load a scenario (the shipped default, or a path given as the first
//! argument), tweak it, and write it back out as TOML and JSON.

use mpisac::scenario::{default_scenario, load_scenario, parse_scenario, write_scenario, Format};

fn main() -> Result<(), mpisac::Error> {
    let mut scenario = match std::env::args().nth(1) {
        Some(path) => load_scenario(path)?,
        None => default_scenario(),
    };
    let p = &scenario.params;
    println!(
        "K = {}, M = {}, P_T = {} W, P_sum = {} W, sigma^2 = {:e} W, gamma = {}",
        p.dfr_count, p.antennas, p.max_power, p.sum_power, p.noise_power, p.sinr_threshold
    );

    scenario = scenario.with_sum_power(0.03)?;
    let toml = write_scenario(&scenario, Format::Toml);
    let json = write_scenario(&scenario, Format::Json);
    assert_eq!(
        parse_scenario(&json, Format::Json)?,
        parse_scenario(&toml, Format::Toml)?
    );
    println!("{toml}");
    Ok(())
}
