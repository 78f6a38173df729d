//! Randomized invariants across modules.

use num_complex::Complex64;
use proptest::prelude::*;

use mpisac::beamform::{build_beamformers, BeamformError, SelectionVector};
use mpisac::channel::{path_loss, synthesize_channels_seeded};
use mpisac::experiments::{
    compare, parse_power_grid, seed_range, Scheme, SearchSettings, SeedPolicy,
};
use mpisac::fusion::{binomial_accuracy, optimal_threshold, FusionProfile};
use mpisac::metrics::PowerAllocation;
use mpisac::optimizer::{exhaustive_solve, hmo_solve, HmoConfig, Problem};
use mpisac::power::{solve_p4, P4Instance};
use mpisac::scenario::{default_scenario, parse_scenario, write_scenario, Format, Scenario};

/// A scenario with `k` DFRs at the given wall offsets and random rates.
fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (2usize..=5, 0usize..=6)
        .prop_flat_map(|(k, extra)| {
            (
                Just(k),
                Just(k + 1 + extra),
                prop::collection::vec((0.05f64..0.95, 0.2f64..2.8), k),
                (0.3f64..2.7, 0.3f64..4.2),
                prop::collection::vec((0.0f64..0.5, 0.0f64..0.5), k),
                0.001f64..0.02,
                2.0f64..3.5,
            )
        })
        .prop_map(|(k, m, spots, target, rates, p_t, eta)| {
            let mut s = default_scenario();
            s.params.dfr_count = k;
            s.params.antennas = m;
            s.params.max_power = p_t;
            s.params.sum_power = p_t * k as f64 * 0.8;
            s.params.pathloss_exponent = eta;
            let max = s.geometry.room_bounds.max;
            // distinct walls per DFR index, position along the wall from `u`
            s.geometry.dfr_positions = spots
                .iter()
                .enumerate()
                .map(|(i, &(u, z))| match i % 4 {
                    0 => [u * max[0], 0.0, z],
                    1 => [max[0], u * max[1], z],
                    2 => [u * max[0], max[1], z],
                    _ => [0.0, u * max[1], z],
                })
                .collect();
            s.geometry.target_position = [target.0, target.1, 1.5];
            s.geometry.receiver_position = [max[0] / 2.0, max[1] / 2.0, 2.9];
            s.errors.false_negative = rates.iter().map(|r| r.0).collect();
            s.errors.false_positive = rates.iter().map(|r| r.1).collect();
            s
        })
        .prop_filter("valid geometry", |s| s.validate().is_ok())
}

fn selection_strategy(k: usize) -> impl Strategy<Value = SelectionVector> {
    prop::collection::vec(any::<bool>(), k).prop_map(SelectionVector)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_round_trips(s in scenario_strategy(), json in any::<bool>()) {
        let fmt = if json { Format::Json } else { Format::Toml };
        let back = parse_scenario(&write_scenario(&s, fmt), fmt).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn channel_norms_follow_path_loss(s in scenario_strategy(), seed in any::<u64>()) {
        let ch = synthesize_channels_seeded(&s, seed).unwrap();
        let pos = &s.geometry.dfr_positions;
        let m = s.params.antennas as f64;
        for j in 0..pos.len() {
            for i in (0..pos.len()).filter(|&i| i != j) {
                let d = (0..3).map(|c| (pos[j][c] - pos[i][c]).powi(2)).sum::<f64>().sqrt();
                let expect = m * path_loss(d, &s.params).unwrap();
                prop_assert!((ch.h(j, i).norm_squared() - expect).abs() <= 1e-12 * expect);
                prop_assert!((ch.h(j, i).norm() - ch.h(i, j).norm()).abs() <= 1e-12 * ch.h(i, j).norm());
            }
        }
        prop_assert_eq!(synthesize_channels_seeded(&s, seed).unwrap(), ch);
    }

    #[test]
    fn zero_forcing_invariants(
        (s, x) in scenario_strategy().prop_flat_map(|s| {
            let k = s.params.dfr_count;
            (Just(s), selection_strategy(k))
        }),
        seed in 0u64..1000,
        powers in prop::collection::vec(0.0f64..0.01, 5),
    ) {
        let ch = synthesize_channels_seeded(&s, seed).unwrap();
        let beams = match build_beamformers(&x, &ch) {
            Ok(b) => b,
            // near-collinear random layouts are legitimately refused
            Err(BeamformError::RankDeficientChannels { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let k = x.len();
        for i in 0..k {
            prop_assert!((beams.w_zf[i].norm() - 1.0).abs() <= 1e-12);
            prop_assert!(beams.a[i] >= 0.0 && beams.b[i] >= 0.0);
            for j in (0..k).filter(|&j| j != i) {
                let h = ch.h(i, j);
                prop_assert!(h.dotc(&beams.w_zf[i]).norm() <= 1e-9 * h.norm());
            }
            if x.is_sensing(i) {
                prop_assert!(ch.f[i].dotc(&beams.w_zf[i]).norm() <= 1e-9 * ch.f[i].norm());
            }
        }
        // phase-aligned communication beams add on the real axis
        let p = &powers[..k];
        let w = beams.scaled(p);
        let sum: Complex64 = (0..k).filter(|&i| !x.is_sensing(i)).map(|i| ch.f[i].dotc(&w[i])).sum();
        let expect: f64 = (0..k).filter(|&i| !x.is_sensing(i)).map(|i| p[i].sqrt() * beams.a[i]).sum();
        prop_assert!((sum.re - expect).abs() <= 1e-9 * expect.max(1e-300));
        prop_assert!(sum.im.abs() <= 1e-9 * expect.max(1e-300));
    }

    #[test]
    fn power_solution_is_feasible_and_monotone(
        k in 1usize..=6,
        seed_vals in prop::collection::vec((0.0f64..2.0, 0.2f64..2.0, any::<bool>()), 6),
        p_t in 0.5f64..3.0,
        extra in 1e-6f64..8.0,
        grow in 1.0f64..2.0,
    ) {
        let vals = &seed_vals[..k];
        let x = SelectionVector(vals.iter().map(|v| v.2).collect());
        let a: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let b: Vec<f64> = vals.iter().map(|v| v.1.max(1.01 / p_t)).collect();
        let need: f64 = (0..k).filter(|&i| x.is_sensing(i)).map(|i| 1.0 / b[i]).sum();
        let inst = P4Instance {
            x: x.clone(), a: a.clone(), b: b.clone(),
            sum_power: need + extra, max_power: p_t, noise_power: 1.0, sinr_threshold: 1.0,
        };
        let sol = solve_p4(&inst).unwrap();
        prop_assert!(inst.violation(&sol.p.0) <= 1e-9);
        prop_assert!(sol.lambda * (inst.sum_power - sol.p.total()) <= 1e-6);
        for i in (0..k).filter(|&i| !x.is_sensing(i)) {
            let p = sol.p.0[i];
            if a[i] == 0.0 {
                prop_assert_eq!(p, 0.0);
            } else if p < p_t && sol.lambda > 0.0 {
                prop_assert!((a[i] / (2.0 * p.sqrt()) - sol.lambda).abs() <= 1e-6 * sol.lambda);
            } else if p >= p_t {
                prop_assert!(a[i] / (2.0 * p_t.sqrt()) >= sol.lambda * (1.0 - 1e-9));
            }
        }
        let richer = solve_p4(&P4Instance { sum_power: inst.sum_power * grow, ..inst.clone() }).unwrap();
        prop_assert!(richer.objective >= sol.objective * (1.0 - 1e-12));
        let stronger = solve_p4(&P4Instance { a: a.iter().map(|v| v * grow).collect(), ..inst.clone() }).unwrap();
        prop_assert!(stronger.objective >= sol.objective * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_dominates_search(s in scenario_strategy(), mu in 0.0f64..=1.0, seed in 0u64..100) {
        let problem = match Problem::new(s, seed) {
            Ok(p) => p,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let config = HmoConfig::default().with_mu(mu).with_seed(seed);
        let (h, e) = match (hmo_solve(&problem, &config), exhaustive_solve(&problem, mu)) {
            (Ok(h), Ok(e)) => (h, e),
            // random layouts where no selection builds are skipped
            _ => return Ok(()),
        };
        prop_assert!(e.objective >= h.objective);
        prop_assert!(h.trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((h.objective - ((1.0 - mu) * h.accuracy + mu * h.rate)).abs() <= 1e-12 * h.objective.max(1.0));
        prop_assert_eq!(hmo_solve(&problem, &config).unwrap(), h);
    }
}

#[test]
fn homogeneous_surrogate_grows_with_sensor_count() {
    for &(p, q) in &[
        (0.05, 0.05),
        (0.1, 0.3),
        (0.3, 0.1),
        (0.2, 0.45),
        (0.49, 0.01),
        (0.4, 0.4),
    ] {
        let mut last = 0.0;
        for n in 1..=40 {
            let prof = FusionProfile::homogeneous(n, p, q);
            let acc = binomial_accuracy(&prof, optimal_threshold(&prof).unwrap()).unwrap();
            assert!(acc >= last - 1e-12, "P={p} Q={q} N={n}: {acc} < {last}");
            last = acc;
        }
    }
}

#[test]
fn fewer_sensors_as_budget_shrinks() {
    let grid = parse_power_grid("10mW:60mW:5mW").unwrap();
    let seeds = seed_range(0, 20);
    let rows = compare(
        &default_scenario(),
        &grid,
        &seeds,
        0.01,
        &SearchSettings::default(),
        SeedPolicy::default(),
    )
    .unwrap();
    let mean_sensing: Vec<f64> = grid
        .iter()
        .map(|&p| {
            let counts: Vec<usize> = rows
                .iter()
                .filter(|r| r.p_sum_w == p && r.scheme == Scheme::Mpisac)
                .map(|r| r.num_sensing)
                .collect();
            assert_eq!(counts.len(), seeds.len());
            counts.iter().sum::<usize>() as f64 / counts.len() as f64
        })
        .collect();
    assert!(
        mean_sensing.windows(2).all(|w| w[1] >= w[0]),
        "{mean_sensing:?}"
    );
    assert!(mean_sensing[0] < *mean_sensing.last().unwrap());
}

#[test]
fn sensing_floor_holds_for_every_feasible_default_selection() {
    let problem = Problem::new(default_scenario(), 0).unwrap();
    let params = &problem.scenario.params;
    for bits in 0..64 {
        let x = SelectionVector::from_mask(6, bits);
        let beams = build_beamformers(&x, &problem.channels).unwrap();
        let inst = P4Instance::new(x.clone(), &beams, params);
        if let Ok(sol) = solve_p4(&inst) {
            let PowerAllocation(p) = &sol.p;
            for i in x.sensing_set() {
                assert!(p[i] * beams.b[i] / params.noise_power >= params.sinr_threshold);
            }
        }
    }
}
