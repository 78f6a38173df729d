//! Experiment drivers behind the `mpisac` binary: single solves, baseline
//! comparisons over a power grid, weight sweeps, and fusion curves.
//!
//! Every driver returns plain rows sorted in a fixed order, so the output
//! does not depend on how many workers ran.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamform::{build_beamformers, SelectionVector};
use crate::fusion::{self, FusionError, FusionProfile};
use crate::metrics::{link_report, LinkReport, PowerAllocation};
use crate::optimizer::{
    evaluate_candidate, exact_fusion_accuracy, exhaustive_solve, hmo_solve, surrogate_accuracy,
    HmoConfig, OptimizerError, Problem, Solution,
};
use crate::power::{sensing_only, P4Instance};
use crate::scenario::{parse_power, Scenario, ScenarioError};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MPISAC_THREADS";

pub const RECORD_HEADER: &str =
    "experiment,scheme,mu,p_sum_w,seed,x,num_sensing,accuracy,rate_bps_hz,objective,wall_time_ms,dominated";

pub const FUSION_CURVE_HEADER: &str = "n,exact,approx,closed_form_threshold,best_exact_threshold";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("invalid grid `{spec}`: {reason}")]
    InvalidGrid { spec: String, reason: String },
    #[error("failed to start worker pool: {0}")]
    WorkerPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Joint selection by neighborhood search.
    Mpisac,
    /// Joint selection by exhaustive search.
    MpisacExhaustive,
    /// Best single sensing DFR, everyone else communicates.
    IsacNoFusion,
    /// Every DFR that can sense does; nobody communicates.
    MultiRadar,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mpisac => "mpisac",
            Scheme::MpisacExhaustive => "mpisac-exhaustive",
            Scheme::IsacNoFusion => "isac-no-fusion",
            Scheme::MultiRadar => "multi-radar",
        }
    }
}

/// Search settings shared by every solve in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub neighborhood: usize,
    pub max_iter: usize,
    pub max_regen: usize,
    pub exhaustive: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let d = HmoConfig::default();
        SearchSettings {
            neighborhood: d.neighborhood,
            max_iter: d.max_iter,
            max_regen: d.max_regen,
            exhaustive: false,
        }
    }
}

impl SearchSettings {
    pub fn hmo_config(&self, mu: f64, seed: u64) -> HmoConfig {
        HmoConfig {
            neighborhood: self.neighborhood,
            max_iter: self.max_iter,
            max_regen: self.max_regen,
            mu,
            seed,
        }
    }

    fn scheme(&self) -> Scheme {
        if self.exhaustive {
            Scheme::MpisacExhaustive
        } else {
            Scheme::Mpisac
        }
    }
}

/// How one experiment seed maps to channel and search seeds. Either can be
/// pinned to hold it fixed while the other varies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub channel: Option<u64>,
    pub search: Option<u64>,
}

impl SeedPolicy {
    pub fn channel_seed(&self, seed: u64) -> u64 {
        self.channel.unwrap_or(seed)
    }

    pub fn search_seed(&self, seed: u64) -> u64 {
        self.search.unwrap_or(seed)
    }
}

/// Solve with the configured joint optimizer.
pub fn solve_joint(
    problem: &Problem,
    mu: f64,
    search: &SearchSettings,
    seed: u64,
) -> Result<Solution, OptimizerError> {
    if search.exhaustive {
        exhaustive_solve(problem, mu)
    } else {
        hmo_solve(problem, &search.hmo_config(mu, seed))
    }
}

/// Best feasible singleton sensing set by objective; ties go to the smaller
/// binary value. Falls back to all-communication when no single DFR can
/// sense.
pub fn isac_no_fusion(problem: &Problem, mu: f64) -> Result<Solution, OptimizerError> {
    let k = problem.dfr_count();
    let mut candidates: Vec<_> = (0..k)
        .filter_map(|i| evaluate_candidate(problem, &SelectionVector::singleton(k, i)).ok())
        .collect();
    if candidates.is_empty() {
        let all_comm = evaluate_candidate(problem, &SelectionVector::all_comm(k))
            .map_err(|_| OptimizerError::NoFeasibleSelection)?;
        candidates.push(all_comm);
    }
    let best = candidates
        .into_iter()
        .reduce(|a, b| {
            let (oa, ob) = (a.objective(mu), b.objective(mu));
            if ob > oa || (ob == oa && b.x.binary_value() < a.x.binary_value()) {
                b
            } else {
                a
            }
        })
        .expect("at least one candidate");
    let members = best.x.sensing_set();
    Ok(Solution {
        objective: best.objective(mu),
        exact_accuracy: exact_fusion_accuracy(&problem.scenario, &members),
        trace: vec![best.objective(mu)],
        evaluations: k,
        x: best.x,
        p: best.powers.p,
        accuracy: best.accuracy,
        threshold: best.threshold,
        rate: best.rate,
    })
}

/// All DFRs sense at their minimum power. While that is infeasible the
/// sensing DFR with the weakest echo gain is dropped; dropped DFRs stay
/// silent, so the rate is always zero.
pub fn multi_radar(problem: &Problem, mu: f64) -> Result<Solution, OptimizerError> {
    let k = problem.dfr_count();
    let params = &problem.scenario.params;
    let mut x = SelectionVector::all_sensing(k);
    let mut evaluations = 0;
    let p = loop {
        if x.sensing_count() == 0 {
            break PowerAllocation::zeros(k);
        }
        evaluations += 1;
        let weakest = match build_beamformers(&x, &problem.channels) {
            Ok(beams) => {
                let inst = P4Instance::new(x.clone(), &beams, params);
                match sensing_only(&inst) {
                    Ok(sol) => break sol.p,
                    Err(_) => weakest_sensing(&x, &beams.b),
                }
            }
            // no beams means no gain to rank by; drop the highest index
            Err(_) => *x.sensing_set().last().expect("non-empty"),
        };
        x.0[weakest] = false;
    };
    let members = x.sensing_set();
    let (accuracy, threshold) = surrogate_accuracy(&problem.scenario, &members);
    let objective = (1.0 - mu) * accuracy;
    Ok(Solution {
        exact_accuracy: exact_fusion_accuracy(&problem.scenario, &members),
        x,
        p,
        accuracy,
        threshold,
        rate: 0.0,
        objective,
        trace: vec![objective],
        evaluations,
    })
}

fn weakest_sensing(x: &SelectionVector, b: &[f64]) -> usize {
    x.sensing_set()
        .into_iter()
        .min_by(|&i, &j| {
            b[i].partial_cmp(&b[j])
                .unwrap_or(Ordering::Equal)
                .then(j.cmp(&i))
        })
        .expect("non-empty sensing set")
}

pub fn solve_scheme(
    problem: &Problem,
    scheme: Scheme,
    mu: f64,
    search: &SearchSettings,
    search_seed: u64,
) -> Result<Solution, OptimizerError> {
    match scheme {
        Scheme::Mpisac => solve_joint(
            problem,
            mu,
            &SearchSettings {
                exhaustive: false,
                ..search.clone()
            },
            search_seed,
        ),
        Scheme::MpisacExhaustive => exhaustive_solve(problem, mu),
        Scheme::IsacNoFusion => isac_no_fusion(problem, mu),
        Scheme::MultiRadar => multi_radar(problem, mu),
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub scheme: Scheme,
    pub mu: f64,
    pub p_sum_w: f64,
    pub seed: u64,
    pub x: SelectionVector,
    pub num_sensing: usize,
    pub accuracy: f64,
    pub rate_bps_hz: f64,
    pub objective: f64,
    pub wall_time_ms: f64,
    /// Set by [`mark_dominated`]; `None` when not computed.
    pub dominated: Option<bool>,
}

impl ExperimentRecord {
    fn from_solution(
        experiment: &str,
        scheme: Scheme,
        mu: f64,
        p_sum: f64,
        seed: u64,
        sol: Solution,
        ms: f64,
    ) -> Self {
        ExperimentRecord {
            experiment: experiment.to_string(),
            scheme,
            mu,
            p_sum_w: p_sum,
            seed,
            num_sensing: sol.x.sensing_count(),
            x: sol.x,
            accuracy: sol.accuracy,
            rate_bps_hz: sol.rate,
            objective: sol.objective,
            wall_time_ms: ms,
            dominated: None,
        }
    }

    pub fn csv_row(&self) -> String {
        let dominated = match self.dominated {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        [
            self.experiment.clone(),
            self.scheme.name().to_string(),
            fmt_sig(self.mu),
            fmt_sig(self.p_sum_w),
            self.seed.to_string(),
            self.x.to_string(),
            self.num_sensing.to_string(),
            fmt_sig(self.accuracy),
            fmt_sig(self.rate_bps_hz),
            fmt_sig(self.objective),
            fmt_sig(self.wall_time_ms),
            dominated.to_string(),
        ]
        .join(",")
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Run `f` on a rayon pool capped by `MPISAC_THREADS` when set.
pub fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ExperimentError::WorkerPool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Three schemes (joint, single-sensor, all-sensing) at every
/// `(P_sum, seed)` point.
pub fn compare(
    scenario: &Scenario,
    psum_grid: &[f64],
    seeds: &[u64],
    mu: f64,
    search: &SearchSettings,
    policy: SeedPolicy,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    if psum_grid.is_empty() || seeds.is_empty() {
        return Err(ExperimentError::InvalidGrid {
            spec: "compare".into(),
            reason: "power grid and seed list must be non-empty".into(),
        });
    }
    let points: Vec<(f64, u64)> = psum_grid
        .iter()
        .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let schemes = [search.scheme(), Scheme::IsacNoFusion, Scheme::MultiRadar];
    let rows: Result<Vec<Vec<ExperimentRecord>>, ExperimentError> = points
        .par_iter()
        .map(|&(p_sum, seed)| {
            let problem = Problem::new(scenario.with_sum_power(p_sum)?, policy.channel_seed(seed))?;
            schemes
                .iter()
                .map(|&scheme| {
                    let (sol, ms) = timed(|| {
                        solve_scheme(&problem, scheme, mu, search, policy.search_seed(seed))
                    });
                    Ok(ExperimentRecord::from_solution(
                        "compare", scheme, mu, p_sum, seed, sol?, ms,
                    ))
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<_> = rows?.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.p_sum_w
            .total_cmp(&b.p_sum_w)
            .then(a.seed.cmp(&b.seed))
            .then(a.scheme.cmp(&b.scheme))
    });
    Ok(rows)
}

/// One joint solve per `(mu, seed)`, with Pareto-dominated rows marked per
/// seed.
pub fn region(
    scenario: &Scenario,
    mu_grid: &[f64],
    seeds: &[u64],
    search: &SearchSettings,
    policy: SeedPolicy,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    if mu_grid.is_empty() || seeds.is_empty() {
        return Err(ExperimentError::InvalidGrid {
            spec: "region".into(),
            reason: "weight grid and seed list must be non-empty".into(),
        });
    }
    let p_sum = scenario.params.sum_power;
    let problems: Vec<(u64, Problem)> = seeds
        .iter()
        .map(|&s| Ok((s, Problem::new(scenario.clone(), policy.channel_seed(s))?)))
        .collect::<Result<_, ExperimentError>>()?;
    let points: Vec<(usize, f64)> = (0..problems.len())
        .flat_map(|i| mu_grid.iter().map(move |&m| (i, m)))
        .collect();
    let scheme = search.scheme();
    let mut rows = points
        .par_iter()
        .map(|&(i, mu)| {
            let (seed, problem) = &problems[i];
            let (sol, ms) =
                timed(|| solve_scheme(problem, scheme, mu, search, policy.search_seed(*seed)));
            Ok(ExperimentRecord::from_solution(
                "region", scheme, mu, p_sum, *seed, sol?, ms,
            ))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.mu.total_cmp(&b.mu)));
    mark_dominated(&mut rows);
    Ok(rows)
}

/// Mark each row dominated if another row with the same seed is at least as
/// good in both accuracy and rate and strictly better in one.
pub fn mark_dominated(rows: &mut [ExperimentRecord]) {
    let flags: Vec<bool> = rows
        .iter()
        .map(|r| {
            rows.iter().any(|s| {
                s.seed == r.seed
                    && s.accuracy >= r.accuracy
                    && s.rate_bps_hz >= r.rate_bps_hz
                    && (s.accuracy > r.accuracy || s.rate_bps_hz > r.rate_bps_hz)
            })
        })
        .collect();
    for (r, d) in rows.iter_mut().zip(flags) {
        r.dominated = Some(d);
    }
}

/// Exact and surrogate accuracy at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionCurveRow {
    pub n: usize,
    pub exact: f64,
    pub approx: f64,
    /// `n` equals the closed-form threshold.
    pub closed_form_threshold: bool,
    /// `n` maximizes the exact accuracy.
    pub best_exact_threshold: bool,
}

/// Accuracy versus threshold for a profile. The closed-form marker is left
/// unset when the mean rates make it undefined.
pub fn fusion_curve(profile: &FusionProfile) -> Result<Vec<FusionCurveRow>, ExperimentError> {
    let exact = fusion::exact_accuracy_curve(profile)?;
    let closed = match fusion::optimal_threshold(profile) {
        Ok(n) => Some(n),
        Err(FusionError::DegenerateRates { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let best = fusion::best_exact_threshold(profile)?;
    (1..=profile.len())
        .map(|n| {
            Ok(FusionCurveRow {
                n,
                exact: exact[n - 1],
                approx: fusion::binomial_accuracy(profile, n)?,
                closed_form_threshold: closed == Some(n),
                best_exact_threshold: best == n,
            })
        })
        .collect()
}

/// Output of a single `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    pub mu: f64,
    pub channel_seed: u64,
    pub search_seed: u64,
    pub solution: Solution,
    /// The solution re-evaluated under the full interference model.
    pub link: LinkReport,
}

pub fn run(
    scenario: &Scenario,
    mu: f64,
    search: &SearchSettings,
    channel_seed: u64,
    search_seed: u64,
) -> Result<RunReport, ExperimentError> {
    let problem = Problem::new(scenario.clone(), channel_seed)?;
    let solution = solve_joint(&problem, mu, search, search_seed)?;
    let beams = build_beamformers(&solution.x, &problem.channels)
        .map_err(|_| OptimizerError::NoFeasibleSelection)?;
    let params = &scenario.params;
    let link = link_report(
        &solution.x,
        &solution.p,
        &beams,
        &problem.channels,
        params.noise_power,
        params.sinr_threshold,
    );
    Ok(RunReport {
        scheme: search.scheme(),
        mu,
        channel_seed,
        search_seed,
        solution,
        link,
    })
}

pub fn records_to_csv(rows: &[ExperimentRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn fusion_curve_to_csv(rows: &[FusionCurveRow]) -> String {
    let mut out = String::from(FUSION_CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt_sig(r.exact),
            fmt_sig(r.approx),
            u8::from(r.closed_form_threshold),
            u8::from(r.best_exact_threshold)
        );
    }
    out
}

/// Format with 9 significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Parse `a:b:step` (inclusive) or a comma list. Each number goes through
/// `item`.
fn parse_grid_with(
    spec: &str,
    item: impl Fn(&str) -> Result<f64, String>,
) -> Result<Vec<f64>, ExperimentError> {
    let bad = |reason: String| ExperimentError::InvalidGrid {
        spec: spec.to_string(),
        reason,
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h) = (
                item(start).map_err(bad)?,
                item(stop).map_err(bad)?,
                item(step).map_err(bad)?,
            );
            if h.is_nan() || h <= 0.0 {
                return Err(bad("step must be positive".into()));
            }
            if b < a {
                return Err(bad("end is below start".into()));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(bad(format!("{count} points is too many")));
            }
            (0..count).map(|k| round_sig(a + k as f64 * h)).collect()
        }
        [list] => list
            .split(',')
            .map(|s| item(s.trim()).map_err(bad))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad("expected `start:end:step` or a comma list".into())),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("grid must contain finite values".into()));
    }
    Ok(values)
}

/// Plain numeric grid, e.g. weights `0:1:0.1`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ExperimentError> {
    parse_grid_with(spec, |s| {
        s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
    })
}

/// Power grid; items accept the same units as scenario files (`10mW`).
pub fn parse_power_grid(spec: &str) -> Result<Vec<f64>, ExperimentError> {
    let grid = parse_grid_with(spec, parse_power)?;
    if grid.iter().any(|&p| p <= 0.0) {
        return Err(ExperimentError::InvalidGrid {
            spec: spec.to_string(),
            reason: "powers must be positive".into(),
        });
    }
    Ok(grid)
}

/// Strip accumulated floating error from grid points (0.30000000000000004).
fn round_sig(v: f64) -> f64 {
    format!("{v:.12e}").parse().expect("formatted float parses")
}

/// Seeds `first..first + count`.
pub fn seed_range(first: u64, count: u64) -> Vec<u64> {
    (first..first + count).collect()
}
