//! Functionality selection: maximize the weighted surrogate
//! `(1 - mu) * accuracy + mu * rate` over selection vectors.
//!
//! The accuracy term is the binomial surrogate at the closed-form voting
//! threshold for the sensing set; the rate term is the ZF-simplified rate
//! under the optimal power allocation for that selection. [`hmo_solve`]
//! runs the accept-if-no-worse neighborhood search, [`exhaustive_solve`]
//! enumerates every selection.

use std::collections::{HashMap, HashSet};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamform::{build_beamformers, BeamformError, BeamformerSet, SelectionVector};
use crate::channel::{seeded_rng, synthesize_channels_seeded, ChannelError, ChannelSet};
use crate::fusion::{self, FusionError, FusionProfile};
use crate::metrics::{comm_rate_zf, PowerAllocation};
use crate::power::{solve_p4, P4Instance, P4Solution, PowerError};
use crate::scenario::Scenario;

/// Largest K accepted by [`exhaustive_solve`].
pub const MAX_EXHAUSTIVE_DFRS: usize = 20;

/// Raw draws allowed per unit of regeneration budget before an iteration
/// gives up on finding an unseen neighbor.
const MAX_DRAWS_PER_REGEN: usize = 64;

/// Accuracy credited to an empty sensing set: a coin flip between two
/// equally likely hypotheses.
pub const EMPTY_SET_ACCURACY: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible selection vector")]
    NoFeasibleSelection,
    #[error("{dfrs} DFRs is too many for exhaustive search (max {MAX_EXHAUSTIVE_DFRS})")]
    TooLargeForEnumeration { dfrs: usize },
}

/// Why a candidate selection was rejected.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CandidateError {
    #[error(transparent)]
    Beamform(#[from] BeamformError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmoConfig {
    /// Maximum number of flips per neighborhood move (L).
    pub neighborhood: usize,
    pub max_iter: usize,
    /// Candidate draws per iteration before the search gives up.
    pub max_regen: usize,
    /// Weight of the rate term.
    pub mu: f64,
    pub seed: u64,
}

impl Default for HmoConfig {
    fn default() -> Self {
        HmoConfig {
            neighborhood: 2,
            max_iter: 10,
            max_regen: 50,
            mu: 0.5,
            seed: 0,
        }
    }
}

impl HmoConfig {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, dfrs: usize) -> Result<(), OptimizerError> {
        if self.neighborhood < 1 || self.neighborhood > dfrs {
            return Err(OptimizerError::InvalidConfig(format!(
                "neighborhood size must be in 1..={dfrs}, got {}",
                self.neighborhood
            )));
        }
        if self.max_iter < 1 {
            return Err(OptimizerError::InvalidConfig(
                "max_iter must be >= 1".into(),
            ));
        }
        check_mu(self.mu)
    }
}

fn check_mu(mu: f64) -> Result<(), OptimizerError> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(OptimizerError::InvalidConfig(format!(
            "mu must be in [0, 1], got {mu}"
        )))
    }
}

/// Result of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: SelectionVector,
    pub p: PowerAllocation,
    /// Surrogate accuracy at the closed-form threshold.
    pub accuracy: f64,
    /// Voting threshold used for `accuracy` (`None` for an empty set).
    pub threshold: Option<usize>,
    /// Exact fusion accuracy under the best threshold, for reference.
    pub exact_accuracy: f64,
    /// bps/Hz.
    pub rate: f64,
    pub objective: f64,
    /// Incumbent objective after each accepted move (first entry is the
    /// starting point).
    pub trace: Vec<f64>,
    /// Distinct selection vectors evaluated.
    pub evaluations: usize,
}

impl Solution {
    pub fn sensing_count(&self) -> usize {
        self.x.sensing_count()
    }
}

/// Scenario plus one channel draw.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scenario: Scenario,
    pub channels: ChannelSet,
}

impl Problem {
    pub fn new(scenario: Scenario, channel_seed: u64) -> Result<Self, OptimizerError> {
        let channels = synthesize_channels_seeded(&scenario, channel_seed)?;
        Ok(Problem { scenario, channels })
    }

    pub fn dfr_count(&self) -> usize {
        self.scenario.params.dfr_count
    }
}

/// Surrogate accuracy of the sensing set `members` and the threshold used.
///
/// Uses the closed-form threshold; when the mean rates make it undefined
/// (a zero mean rate, or `P + Q >= 1`) the surrogate is maximized over `n`
/// directly.
pub fn surrogate_accuracy(scenario: &Scenario, members: &[usize]) -> (f64, Option<usize>) {
    if members.is_empty() {
        return (EMPTY_SET_ACCURACY, None);
    }
    let e = &scenario.errors;
    let profile = FusionProfile::subset(&e.false_negative, &e.false_positive, members);
    let n = match fusion::optimal_threshold(&profile) {
        Ok(n) => n,
        Err(FusionError::DegenerateRates { .. }) => {
            fusion::best_binomial_threshold(&profile).expect("non-empty profile")
        }
        Err(other) => unreachable!("non-empty profile: {other}"),
    };
    let acc = fusion::binomial_accuracy(&profile, n).expect("threshold within range");
    (acc, Some(n))
}

/// Exact accuracy of `members` under its best threshold.
pub fn exact_fusion_accuracy(scenario: &Scenario, members: &[usize]) -> f64 {
    if members.is_empty() {
        return EMPTY_SET_ACCURACY;
    }
    let e = &scenario.errors;
    let profile = FusionProfile::subset(&e.false_negative, &e.false_positive, members);
    let curve = fusion::exact_accuracy_curve(&profile).expect("non-empty profile");
    curve.into_iter().fold(f64::MIN, f64::max)
}

/// `(1 - mu) * surrogate accuracy + mu * ZF rate` for a feasible `(x, p)`.
pub fn surrogate_objective(
    x: &SelectionVector,
    p: &PowerAllocation,
    scenario: &Scenario,
    beams: &BeamformerSet,
    mu: f64,
) -> f64 {
    let (acc, _) = surrogate_accuracy(scenario, &x.sensing_set());
    let rate = comm_rate_zf(x, p, beams, scenario.params.noise_power);
    (1.0 - mu) * acc + mu * rate
}

/// Draw a neighbor of `x`: flip count uniform in `1..=max_flips`, then a
/// uniform subset of positions of that size.
pub fn neighborhood_sample(
    x: &SelectionVector,
    max_flips: usize,
    rng: &mut impl Rng,
) -> SelectionVector {
    let k = x.len();
    let flips = rng.gen_range(1..=max_flips.min(k));
    let mut out = x.clone();
    for i in index::sample(rng, k, flips) {
        out.0[i] = !out.0[i];
    }
    out
}

/// Number of selections within `1..=max_flips` flips of a K-vector.
pub fn neighborhood_size(k: usize, max_flips: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for l in 1..=max_flips.min(k) {
        binom = binom * (k + 1 - l) / l;
        total = total.saturating_add(binom);
    }
    total
}

/// Everything about one selection that does not depend on `mu`.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub x: SelectionVector,
    pub powers: P4Solution,
    pub accuracy: f64,
    pub threshold: Option<usize>,
    pub rate: f64,
}

impl Candidate {
    pub fn objective(&self, mu: f64) -> f64 {
        (1.0 - mu) * self.accuracy + mu * self.rate
    }

    fn into_solution(
        self,
        problem: &Problem,
        mu: f64,
        trace: Vec<f64>,
        evaluations: usize,
    ) -> Solution {
        let members = self.x.sensing_set();
        Solution {
            objective: self.objective(mu),
            exact_accuracy: exact_fusion_accuracy(&problem.scenario, &members),
            x: self.x,
            p: self.powers.p,
            accuracy: self.accuracy,
            threshold: self.threshold,
            rate: self.rate,
            trace,
            evaluations,
        }
    }
}

/// Build beams, solve the power subproblem, and score a selection.
pub fn evaluate_candidate(
    problem: &Problem,
    x: &SelectionVector,
) -> Result<Candidate, CandidateError> {
    let beams = build_beamformers(x, &problem.channels)?;
    let inst = P4Instance::new(x.clone(), &beams, &problem.scenario.params);
    let powers = solve_p4(&inst)?;
    let (accuracy, threshold) = surrogate_accuracy(&problem.scenario, &x.sensing_set());
    let rate = comm_rate_zf(x, &powers.p, &beams, problem.scenario.params.noise_power);
    Ok(Candidate {
        x: x.clone(),
        powers,
        accuracy,
        threshold,
        rate,
    })
}

/// Per-solve memo of candidate evaluations keyed by selection bits.
struct Memo<'a> {
    problem: &'a Problem,
    seen: HashMap<u64, Result<Candidate, CandidateError>>,
}

impl<'a> Memo<'a> {
    fn new(problem: &'a Problem) -> Self {
        Memo {
            problem,
            seen: HashMap::new(),
        }
    }

    fn get(&mut self, x: &SelectionVector) -> Result<&Candidate, &CandidateError> {
        let problem = self.problem;
        self.seen
            .entry(x.mask())
            .or_insert_with(|| evaluate_candidate(problem, x))
            .as_ref()
    }
}

/// Neighborhood search from `[1, 0, ..., 0]` that accepts any candidate at
/// least as good as the incumbent. Stops after `max_iter` accepted moves or
/// when `max_regen` distinct neighbors (or the whole neighborhood, if
/// smaller) fail to match the incumbent.
pub fn hmo_solve(problem: &Problem, config: &HmoConfig) -> Result<Solution, OptimizerError> {
    let k = problem.dfr_count();
    config.validate(k)?;
    let mu = config.mu;
    let mut rng = seeded_rng(config.seed);
    let mut memo = Memo::new(problem);

    let mut incumbent = match memo.get(&SelectionVector::singleton(k, 0)) {
        Ok(c) => c.clone(),
        Err(_) => memo
            .get(&SelectionVector::all_comm(k))
            .map_err(|_| OptimizerError::NoFeasibleSelection)?
            .clone(),
    };
    let mut trace = vec![incumbent.objective(mu)];

    let reachable = neighborhood_size(k, config.neighborhood);
    for _ in 0..config.max_iter {
        let current = incumbent.objective(mu);
        let mut accepted = None;
        // a redraw must be a different point: repeats of a rejected
        // neighbor are skipped without spending the regeneration budget
        let mut rejected = HashSet::new();
        let mut draws = 0usize;
        while rejected.len() < config.max_regen.min(reachable)
            && draws < MAX_DRAWS_PER_REGEN * config.max_regen
        {
            draws += 1;
            let x = neighborhood_sample(&incumbent.x, config.neighborhood, &mut rng);
            if !rejected.insert(x.mask()) {
                continue;
            }
            if let Ok(c) = memo.get(&x) {
                if c.objective(mu) >= current {
                    accepted = Some(c.clone());
                    break;
                }
            }
        }
        match accepted {
            Some(c) => {
                incumbent = c;
                trace.push(incumbent.objective(mu));
            }
            None => break,
        }
    }
    let evaluations = memo.seen.len();
    Ok(incumbent.into_solution(problem, mu, trace, evaluations))
}

/// Best selection over all `2^K` vectors; ties go to the smaller binary
/// value of `x_1 ... x_K`.
pub fn exhaustive_solve(problem: &Problem, mu: f64) -> Result<Solution, OptimizerError> {
    check_mu(mu)?;
    let k = problem.dfr_count();
    if k > MAX_EXHAUSTIVE_DFRS {
        return Err(OptimizerError::TooLargeForEnumeration { dfrs: k });
    }
    let total = 1u64 << k;
    let best = (0..total)
        .into_par_iter()
        .filter_map(|bits| evaluate_candidate(problem, &SelectionVector::from_mask(k, bits)).ok())
        .reduce_with(|a, b| better_of(a, b, mu));
    let best = best.ok_or(OptimizerError::NoFeasibleSelection)?;
    let obj = best.objective(mu);
    Ok(best.into_solution(problem, mu, vec![obj], total as usize))
}

fn better_of(a: Candidate, b: Candidate, mu: f64) -> Candidate {
    let (oa, ob) = (a.objective(mu), b.objective(mu));
    if ob > oa || (ob == oa && b.x.binary_value() < a.x.binary_value()) {
        b
    } else {
        a
    }
}
