//! Power allocation for a fixed functionality selection.
//!
//! Maximize `sum_{i comm} a_i sqrt(p_i)` subject to `sum p_i <= P_sum`,
//! `0 <= p_i <= P_T`, and `p_i b_i >= sigma^2 gamma` for sensing DFRs.
//! Sensing powers do not enter the objective, so they are pinned to their
//! minimum and the remaining budget goes to the communication DFRs. The KKT
//! conditions give `sqrt(p_i) = min(sqrt(P_T), a_i / (2 lambda))`, and the
//! multiplier `lambda` is found by bisection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamform::{BeamformerSet, SelectionVector};
use crate::metrics::PowerAllocation;
use crate::scenario::SystemParams;

const BISECTION_ITERS: usize = 200;
const BISECTION_REL_WIDTH: f64 = 1e-12;

/// Largest number of free communication powers [`grid_oracle`] will scan.
pub const MAX_ORACLE_DIMS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("sensing DFR {dfr} has no echo gain toward the target")]
    UnreachableTarget { dfr: usize },
    #[error("selection infeasible: {0}")]
    Infeasible(String),
    #[error("grid oracle limited to {MAX_ORACLE_DIMS} communication DFRs, got {dims}")]
    OracleTooLarge { dims: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P4Instance {
    pub x: SelectionVector,
    /// Communication amplitude gains `|f_i^H w_i|`.
    pub a: Vec<f64>,
    /// Sensing power gains `|g_ii^H w_i|^2`.
    pub b: Vec<f64>,
    pub sum_power: f64,
    pub max_power: f64,
    pub noise_power: f64,
    pub sinr_threshold: f64,
}

impl P4Instance {
    pub fn new(x: SelectionVector, beams: &BeamformerSet, params: &SystemParams) -> Self {
        P4Instance {
            x,
            a: beams.a.clone(),
            b: beams.b.clone(),
            sum_power: params.sum_power,
            max_power: params.max_power,
            noise_power: params.noise_power,
            sinr_threshold: params.sinr_threshold,
        }
    }

    fn dfr_count(&self) -> usize {
        self.x.len()
    }

    fn comm_dfrs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dfr_count()).filter(|&i| !self.x.is_sensing(i))
    }

    /// Objective value of an allocation.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.comm_dfrs()
            .map(|i| self.a[i] * p[i].max(0.0).sqrt())
            .sum()
    }

    /// Maximum violation of any constraint by `p` (0 when feasible).
    pub fn violation(&self, p: &[f64]) -> f64 {
        let mut worst = (p.iter().sum::<f64>() - self.sum_power).max(0.0);
        for (i, &pi) in p.iter().enumerate() {
            worst = worst.max(-pi).max(pi - self.max_power);
            if self.x.is_sensing(i) {
                let need = self.noise_power * self.sinr_threshold / self.b[i];
                worst = worst.max(need - pi);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P4Solution {
    pub p: PowerAllocation,
    /// `sum a_i sqrt(p_i)` over communication DFRs.
    pub objective: f64,
    /// Multiplier of the sum-power constraint (0 when slack).
    pub lambda: f64,
}

/// Minimum power each sensing DFR needs to reach the SINR threshold.
pub fn min_sensing_powers(inst: &P4Instance) -> Result<Vec<f64>, PowerError> {
    let need = inst.noise_power * inst.sinr_threshold;
    (0..inst.dfr_count())
        .map(|i| {
            if !inst.x.is_sensing(i) {
                Ok(0.0)
            } else if inst.b[i] > 0.0 {
                let mut p = need / inst.b[i];
                // the division can round below the threshold by an ulp
                while p * inst.b[i] / inst.noise_power < inst.sinr_threshold {
                    p += p * f64::EPSILON;
                }
                Ok(p)
            } else {
                Err(PowerError::UnreachableTarget { dfr: i })
            }
        })
        .collect()
}

/// Sensing minima plus the budget left for communication, or `Infeasible`.
fn sensing_floor(inst: &P4Instance) -> Result<(Vec<f64>, f64), PowerError> {
    let floor = min_sensing_powers(inst)?;
    if let Some(i) = (0..floor.len()).find(|&i| floor[i] > inst.max_power) {
        return Err(PowerError::Infeasible(format!(
            "DFR {i} needs {:.3e} W to sense, above the {:.3e} W cap",
            floor[i], inst.max_power
        )));
    }
    let used: f64 = floor.iter().sum();
    if used > inst.sum_power {
        return Err(PowerError::Infeasible(format!(
            "sensing needs {used:.3e} W in total, above the {:.3e} W budget",
            inst.sum_power
        )));
    }
    Ok((floor, inst.sum_power - used))
}

/// Sensing DFRs at their minimum power and everyone else silent.
pub fn sensing_only(inst: &P4Instance) -> Result<P4Solution, PowerError> {
    let (p, _) = sensing_floor(inst)?;
    Ok(P4Solution {
        p: PowerAllocation(p),
        objective: 0.0,
        lambda: 0.0,
    })
}

pub fn solve_p4(inst: &P4Instance) -> Result<P4Solution, PowerError> {
    let (mut p, budget) = sensing_floor(inst)?;
    let active: Vec<usize> = inst.comm_dfrs().filter(|&i| inst.a[i] > 0.0).collect();
    let cap = inst.max_power;

    let lambda = if active.len() as f64 * cap <= budget {
        for &i in &active {
            p[i] = cap;
        }
        0.0
    } else if budget <= 0.0 {
        // sensing used the whole budget; communication stays silent
        0.0
    } else {
        let spend = |lambda: f64| -> f64 {
            active
                .iter()
                .map(|&i| (inst.a[i] / (2.0 * lambda)).powi(2).min(cap))
                .sum()
        };
        // every uncapped allocation fits once lambda reaches `hi`
        let sum_a2: f64 = active.iter().map(|&i| inst.a[i].powi(2)).sum();
        let mut hi = (sum_a2 / (4.0 * budget)).sqrt();
        let mut lo = 0.0;
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if spend(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= BISECTION_REL_WIDTH * hi {
                break;
            }
        }
        for &i in &active {
            p[i] = (inst.a[i] / (2.0 * hi)).powi(2).min(cap);
        }
        // spend(hi) <= budget; hand the rounding shortfall to an uncapped
        // DFR so the sum constraint is tight
        let slack = budget - active.iter().map(|&i| p[i]).sum::<f64>();
        if let Some(&i) = active.iter().find(|&&i| p[i] < cap) {
            p[i] = (p[i] + slack).clamp(0.0, cap);
        }
        hi
    };

    Ok(P4Solution {
        objective: inst.objective(&p),
        p: PowerAllocation(p),
        lambda,
    })
}

/// Exhaustive grid search over the communication powers at resolution
/// `step` watts. The last free DFR takes whatever budget the others leave
/// (clipped to its cap), since the objective increases in every power.
pub fn grid_oracle(inst: &P4Instance, step: f64) -> Result<P4Solution, PowerError> {
    assert!(step > 0.0, "grid step must be positive");
    let free: Vec<usize> = inst.comm_dfrs().collect();
    if free.len() > MAX_ORACLE_DIMS {
        return Err(PowerError::OracleTooLarge { dims: free.len() });
    }
    let (floor, budget) = sensing_floor(inst)?;
    let levels = |limit: f64| -> Vec<f64> {
        let count = (limit / step).floor() as usize;
        (0..=count).map(|k| k as f64 * step).collect()
    };

    let mut best = floor.clone();
    let mut best_obj = inst.objective(&best);
    let mut trial = floor.clone();
    let Some((&last, leading)) = free.split_last() else {
        return Ok(P4Solution {
            p: PowerAllocation(best),
            objective: best_obj,
            lambda: 0.0,
        });
    };

    #[allow(clippy::too_many_arguments)]
    fn scan(
        inst: &P4Instance,
        leading: &[usize],
        last: usize,
        remaining: f64,
        trial: &mut Vec<f64>,
        levels: &dyn Fn(f64) -> Vec<f64>,
        best: &mut Vec<f64>,
        best_obj: &mut f64,
    ) {
        match leading.split_first() {
            None => {
                trial[last] = remaining.min(inst.max_power).max(0.0);
                let obj = inst.objective(trial);
                if obj > *best_obj {
                    *best_obj = obj;
                    best.clone_from(trial);
                }
            }
            Some((&i, rest)) => {
                for v in levels(remaining.min(inst.max_power)) {
                    trial[i] = v;
                    scan(
                        inst,
                        rest,
                        last,
                        remaining - v,
                        trial,
                        levels,
                        best,
                        best_obj,
                    );
                }
                trial[i] = 0.0;
            }
        }
    }
    scan(
        inst,
        leading,
        last,
        budget,
        &mut trial,
        &levels,
        &mut best,
        &mut best_obj,
    );
    Ok(P4Solution {
        p: PowerAllocation(best),
        objective: best_obj,
        lambda: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(x: &str, a: &[f64], b: &[f64], sum_power: f64, max_power: f64) -> P4Instance {
        P4Instance {
            x: x.parse().unwrap(),
            a: a.to_vec(),
            b: b.to_vec(),
            sum_power,
            max_power,
            noise_power: 1.0,
            sinr_threshold: 1.0,
        }
    }

    fn assert_powers(sol: &P4Solution, expect: &[f64], tol: f64) {
        for (p, e) in sol.p.0.iter().zip(expect) {
            assert!((p - e).abs() <= tol, "{:?} vs {expect:?}", sol.p.0);
        }
    }

    #[test]
    fn minimum_sensing_powers() {
        let i = inst("10", &[0.0, 1.0], &[1.0, 1.0], 5.0, 10.0);
        assert_eq!(min_sensing_powers(&i).unwrap(), vec![1.0, 0.0]);
        let comm = inst("00", &[1.0, 1.0], &[0.0, 0.0], 5.0, 10.0);
        assert_eq!(min_sensing_powers(&comm).unwrap(), vec![0.0, 0.0]);
        let dead = inst("10", &[0.0, 1.0], &[0.0, 1.0], 5.0, 10.0);
        assert_eq!(
            min_sensing_powers(&dead),
            Err(PowerError::UnreachableTarget { dfr: 0 })
        );
        // above the cap: infeasible downstream
        let weak = inst("10", &[0.0, 1.0], &[0.05, 1.0], 50.0, 10.0);
        assert!(min_sensing_powers(&weak).unwrap()[0] > weak.max_power);
        assert!(matches!(solve_p4(&weak), Err(PowerError::Infeasible(_))));
        assert!(matches!(
            grid_oracle(&weak, 0.1),
            Err(PowerError::Infeasible(_))
        ));
    }

    #[test]
    fn proportional_to_squared_gains() {
        let sol = solve_p4(&inst("00", &[1.0, 2.0], &[0.0, 0.0], 5.0, 5.0)).unwrap();
        assert_powers(&sol, &[1.0, 4.0], 1e-9);
        assert!((sol.objective - 5.0).abs() < 1e-9);
        // stationarity a_i / (2 sqrt p_i) = lambda
        assert!((sol.lambda - 0.5).abs() < 1e-9);
    }

    #[test]
    fn capped_dfr_passes_remainder_on() {
        let i = inst("00", &[1.0, 2.0], &[0.0, 0.0], 5.0, 3.0);
        let sol = solve_p4(&i).unwrap();
        assert_powers(&sol, &[2.0, 3.0], 1e-9);
        let grid = grid_oracle(&i, 1e-3).unwrap();
        assert_powers(&grid, &[2.0, 3.0], 2e-3);
        assert!((grid.objective - sol.objective).abs() <= 1e-3 * sol.objective);
    }

    #[test]
    fn sensing_minimum_comes_off_the_top() {
        let i = inst("10", &[0.0, 1.0], &[1.0, 0.0], 5.0, 10.0);
        let sol = solve_p4(&i).unwrap();
        assert_powers(&sol, &[1.0, 4.0], 1e-9);
        let grid = grid_oracle(&i, 1e-3).unwrap();
        assert_powers(&grid, &[1.0, 4.0], 1e-9);
    }

    #[test]
    fn slack_budget_caps_everyone() {
        let i = inst("000", &[1.0, 0.5, 2.0], &[0.0; 3], 10.0, 2.0);
        let sol = solve_p4(&i).unwrap();
        assert_eq!(sol.p.0, vec![2.0, 2.0, 2.0]);
        assert_eq!(sol.lambda, 0.0);
    }

    #[test]
    fn zero_gain_comm_dfr_gets_nothing() {
        let i = inst("000", &[1.0, 0.0, 1.0], &[0.0; 3], 1.0, 1.0);
        let sol = solve_p4(&i).unwrap();
        assert_powers(&sol, &[0.5, 0.0, 0.5], 1e-9);
    }

    #[test]
    fn exhausted_budget_leaves_comm_silent() {
        // sensing eats exactly the whole budget
        let i = inst("10", &[0.0, 1.0], &[0.2, 0.0], 5.0, 10.0);
        let sol = solve_p4(&i).unwrap();
        assert_powers(&sol, &[5.0, 0.0], 1e-12);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn infeasible_sum() {
        let i = inst("110", &[0.0, 0.0, 1.0], &[0.25, 0.25, 0.0], 6.0, 10.0);
        assert!(matches!(solve_p4(&i), Err(PowerError::Infeasible(_))));
        assert!(matches!(
            grid_oracle(&i, 0.01),
            Err(PowerError::Infeasible(_))
        ));
    }

    #[test]
    fn oracle_dimension_guard() {
        let i = inst("0000", &[1.0; 4], &[0.0; 4], 4.0, 4.0);
        assert_eq!(
            grid_oracle(&i, 0.1),
            Err(PowerError::OracleTooLarge { dims: 4 })
        );
        assert!(solve_p4(&i).is_ok());
    }

    #[test]
    fn finer_grid_never_hurts() {
        let i = inst("000", &[0.7, 1.3, 0.4], &[0.0; 3], 1.0, 0.6);
        let mut step = 0.05;
        let mut last = grid_oracle(&i, step).unwrap().objective;
        for _ in 0..4 {
            step /= 2.0;
            let obj = grid_oracle(&i, step).unwrap().objective;
            assert!(obj >= last - 1e-15);
            last = obj;
        }
        let exact = solve_p4(&i).unwrap().objective;
        assert!(exact >= last - 1e-12);
        assert!((exact - last).abs() <= 1e-3 * exact);
    }

    #[test]
    fn objective_monotone_in_budget_and_gain() {
        let mut last = 0.0;
        for k in 1..=20 {
            let i = inst(
                "0100",
                &[0.9, 0.0, 1.4, 0.3],
                &[0.0, 0.5, 0.0, 0.0],
                2.0 + 0.25 * k as f64,
                2.5,
            );
            let obj = solve_p4(&i).unwrap().objective;
            assert!(obj >= last - 1e-12);
            last = obj;
        }
        let mut last = 0.0;
        for k in 0..20 {
            let i = inst("000", &[0.9, 0.1 * k as f64, 1.4], &[0.0; 3], 3.0, 2.0);
            let obj = solve_p4(&i).unwrap().objective;
            assert!(obj >= last - 1e-12);
            last = obj;
        }
    }
}
