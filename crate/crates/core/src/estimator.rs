//! Finite-horizon estimates of the critical infection rate.
//!
//! "Survives" means "alive at horizon `T` on `[-L, L]^d`", and the estimate
//! is the rate at which that probability crosses a threshold `epsilon`. This
//! is a pseudo-critical point for the given `(T, L)`, not the
//! infinite-volume limit.
//!
//! All survival evaluations inside one sweep or bisection share the replica
//! seeds and one clock reference rate, so for each replica the survival
//! indicator is nondecreasing in `lambda` by construction.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{survival_from, Direction, ReplicaEstimate, SimOptions, SurvivalMode};
use crate::error::{Error, Result};
use crate::lattice::{ModelParams, Vertex};
use crate::stats::Estimate;
use crate::walk_pair::upper_bound_lambda;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub horizon: f64,
    pub box_radius: i32,
    pub replicas: u64,
    pub epsilon: f64,
    /// Bisection stops once the bracket is at most this wide.
    pub tol: f64,
    /// Normal quantile for the statistical interval.
    pub z: f64,
    pub max_active: Option<usize>,
    /// Translated starting vertices probed in quenched mode, besides the origin.
    pub extra_starts: usize,
    pub rng_seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            box_radius: 40,
            replicas: 2000,
            epsilon: 0.02,
            tol: 0.01,
            z: 1.96,
            max_active: Some(2000),
            extra_starts: 4,
            rng_seed: 0,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        self.sim_options(1.0).validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold epsilon = {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) || !(self.z >= 0.0) || self.replicas < 2 {
            return Err(Error::InvalidParameter(
                "need tol > 0, z >= 0 and at least two replicas".into(),
            ));
        }
        Ok(())
    }

    fn sim_options(&self, reference_rate: f64) -> SimOptions {
        let mut opts = SimOptions::new(self.box_radius, self.horizon, self.rng_seed)
            .with_reference_rate(reference_rate);
        opts.max_active = self.max_active;
        opts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum EstimatorMode {
    Annealed,
    /// One environment. The quenched occupation `P(eta_t(x) = 1)` from the
    /// all-infected state equals survival of the dual process from `x`, so
    /// this mode runs the dual from each probed start and keeps the largest
    /// survival.
    Quenched { env_seed: u64 },
}

/// Starting vertices probed in quenched mode: the origin, then
/// `3k e_{(k-1) mod d}` for `k = 1..=extra`. The dual drifts toward lower
/// coordinates, so the shifts point the other way.
pub fn probe_starts(d: usize, extra: usize) -> Vec<Vertex> {
    let mut out = vec![Vertex::origin(d)];
    out.extend((1..=extra).map(|k| Vertex::axis_multiple(d, (k - 1) % d, 3 * k as i32)));
    out
}

/// Survival at one rate, with the clock reference rate fixed by the caller.
fn survival_at(
    params: &ModelParams,
    lambda: f64,
    reference_rate: f64,
    mode: EstimatorMode,
    opts: &EstimatorOptions,
) -> Result<ReplicaEstimate> {
    let params = params.with_lambda(lambda)?;
    let sim = opts.sim_options(reference_rate);
    match mode {
        EstimatorMode::Annealed => survival_from(
            &params,
            &Vertex::origin(params.d),
            opts.replicas,
            SurvivalMode::Annealed,
            &sim,
        ),
        EstimatorMode::Quenched { env_seed } => {
            let sim = sim.with_direction(Direction::Dual);
            let per_start = probe_starts(params.d, opts.extra_starts)
                .iter()
                .map(|x| {
                    survival_from(&params, x, opts.replicas, SurvivalMode::Quenched { env_seed }, &sim)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_start
                .into_iter()
                .max_by(|a, b| a.estimate.mean.total_cmp(&b.estimate.mean))
                .expect("at least the origin"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub survival: ReplicaEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub params: ModelParams,
    pub mode: EstimatorMode,
    pub options: EstimatorOptions,
    pub points: Vec<SweepPoint>,
    /// Adjacent points where survival drops by more than 3 combined SE.
    pub warnings: Vec<String>,
}

/// Survival over a nondecreasing grid of rates. The whole grid shares one
/// clock reference (its largest rate), so survival is monotone per replica.
pub fn sweep(
    params: &ModelParams,
    lambdas: &[f64],
    mode: EstimatorMode,
    opts: &EstimatorOptions,
) -> Result<SweepRecord> {
    params.validate()?;
    opts.validate()?;
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("rate grid must be nonempty and nondecreasing".into()));
    }
    let reference = *lambdas.last().expect("nonempty");
    let points = lambdas
        .iter()
        .map(|&lambda| {
            Ok(SweepPoint {
                lambda,
                survival: survival_at(params, lambda, reference, mode, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let warnings = points
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].survival.estimate, w[1].survival.estimate);
            (a.mean - b.mean > 3.0 * a.combined_se(&b)).then(|| {
                format!(
                    "survival drops from {} at lambda = {} to {} at lambda = {}",
                    a.mean, w[0].lambda, b.mean, w[1].lambda
                )
            })
        })
        .collect();
    Ok(SweepRecord {
        params: ModelParams { lambda: None, ..*params },
        mode,
        options: *opts,
        points,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub params: ModelParams,
    pub mode: EstimatorMode,
    pub options: EstimatorOptions,
    /// Midpoint of the final bisection bracket.
    pub lambda_hat: f64,
    /// Final bracket around the `epsilon` crossing of the survival estimate.
    pub bracket: (f64, f64),
    /// Union of the bracket with the rates where survival plus or minus
    /// `z` SE crosses `epsilon`.
    pub ci: (f64, f64),
    /// True if a statistical crossing was clipped at the initial bracket.
    pub ci_clipped: bool,
    pub evaluations: usize,
}

impl CriticalEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }

    pub fn ci_overlaps(&self, other: &CriticalEstimate) -> bool {
        self.ci.0 <= other.ci.1 && other.ci.0 <= self.ci.1
    }
}

struct Evaluator<'a> {
    params: &'a ModelParams,
    reference: f64,
    mode: EstimatorMode,
    opts: &'a EstimatorOptions,
    memo: HashMap<u64, Estimate>,
}

impl Evaluator<'_> {
    fn eval(&mut self, lambda: f64) -> Result<Estimate> {
        if let Some(e) = self.memo.get(&lambda.to_bits()) {
            return Ok(*e);
        }
        let e = survival_at(self.params, lambda, self.reference, self.mode, self.opts)?.estimate;
        self.memo.insert(lambda.to_bits(), e);
        Ok(e)
    }

    /// Bisect for the crossing of `score >= epsilon` on `[lo, hi]`, given
    /// that it fails at `lo` and holds at `hi`.
    fn bisect(&mut self, mut lo: f64, mut hi: f64, shift: f64) -> Result<(f64, f64)> {
        let eps = self.opts.epsilon;
        while hi - lo > self.opts.tol {
            let mid = 0.5 * (lo + hi);
            let e = self.eval(mid)?;
            if e.mean + shift * e.se >= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, hi))
    }

    /// Crossing of `mean + shift * se`, clipped to the bracket.
    fn crossing(&mut self, lo: f64, hi: f64, shift: f64) -> Result<(f64, bool)> {
        let eps = self.opts.epsilon;
        let (e_lo, e_hi) = (self.eval(lo)?, self.eval(hi)?);
        if e_lo.mean + shift * e_lo.se >= eps {
            return Ok((lo, true));
        }
        if e_hi.mean + shift * e_hi.se < eps {
            return Ok((hi, true));
        }
        let (a, b) = self.bisect(lo, hi, shift)?;
        Ok((0.5 * (a + b), false))
    }
}

/// Bisection for the `epsilon` crossing of survival at horizon `T`.
pub fn bisect_lambda_c(
    params: &ModelParams,
    bracket: (f64, f64),
    mode: EstimatorMode,
    opts: &EstimatorOptions,
) -> Result<CriticalEstimate> {
    params.validate()?;
    opts.validate()?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad bracket ({lo}, {hi})")));
    }
    let mut ev = Evaluator {
        params,
        reference: hi,
        mode,
        opts,
        memo: HashMap::new(),
    };
    let (s_lo, s_hi) = (ev.eval(lo)?, ev.eval(hi)?);
    if !(s_lo.mean < opts.epsilon && s_hi.mean >= opts.epsilon) {
        return Err(Error::InvalidBracket {
            lambda_lo: lo,
            lambda_hi: hi,
            survival_lo: s_lo.mean,
            survival_hi: s_hi.mean,
            epsilon: opts.epsilon,
        });
    }
    let (b_lo, b_hi) = ev.bisect(lo, hi, 0.0)?;
    let (ci_lo, clip_lo) = ev.crossing(lo, hi, opts.z)?;
    let (ci_hi, clip_hi) = ev.crossing(lo, hi, -opts.z)?;
    Ok(CriticalEstimate {
        params: ModelParams { lambda: None, ..*params },
        mode,
        options: *opts,
        lambda_hat: 0.5 * (b_lo + b_hi),
        bracket: (b_lo, b_hi),
        ci: (ci_lo.min(b_lo), ci_hi.max(b_hi)),
        ci_clipped: clip_lo || clip_hi,
        evaluations: ev.memo.len(),
    })
}

/// Bracket search: lower end `lo`, upper end doubled from `2 lo` up to
/// `lo * 2^max_doublings` until the bisection precondition holds.
pub fn bisect_with_search(
    params: &ModelParams,
    lo: f64,
    max_doublings: u32,
    mode: EstimatorMode,
    opts: &EstimatorOptions,
) -> Result<CriticalEstimate> {
    let mut last = None;
    for k in 1..=max_doublings.max(1) {
        let hi = lo * 2f64.powi(k as i32);
        match bisect_lambda_c(params, (lo, hi), mode, opts) {
            Ok(est) => return Ok(est),
            Err(e @ Error::InvalidBracket { survival_lo, epsilon, .. }) => {
                if survival_lo >= epsilon {
                    return Err(e);
                }
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedAnnealedComparison {
    pub params: ModelParams,
    pub annealed: CriticalEstimate,
    pub quenched: Vec<(u64, std::result::Result<CriticalEstimate, String>)>,
    /// Largest `|lambda_hat_i - lambda_hat_j|` over all completed estimates.
    pub max_deviation: f64,
    pub all_overlap: bool,
}

pub fn quenched_annealed_compare(
    params: &ModelParams,
    bracket: (f64, f64),
    env_seeds: &[u64],
    opts: &EstimatorOptions,
) -> Result<QuenchedAnnealedComparison> {
    if env_seeds.len() < 5 {
        return Err(Error::InvalidParameter("need at least five environment seeds".into()));
    }
    let annealed = bisect_lambda_c(params, bracket, EstimatorMode::Annealed, opts)?;
    let quenched: Vec<_> = env_seeds
        .iter()
        .map(|&env_seed| {
            let r = bisect_lambda_c(params, bracket, EstimatorMode::Quenched { env_seed }, opts);
            (env_seed, r.map_err(|e| e.to_string()))
        })
        .collect();
    let mut all: Vec<&CriticalEstimate> = vec![&annealed];
    all.extend(quenched.iter().filter_map(|(_, r)| r.as_ref().ok()));
    let complete = all.len() == env_seeds.len() + 1;
    let mut max_deviation: f64 = 0.0;
    let mut all_overlap = complete;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            max_deviation = max_deviation.max((a.lambda_hat - b.lambda_hat).abs());
            all_overlap &= a.ci_overlaps(b);
        }
    }
    Ok(QuenchedAnnealedComparison {
        params: ModelParams { lambda: None, ..*params },
        annealed,
        quenched,
        max_deviation,
        all_overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub d: usize,
    pub p: f64,
    pub lower: f64,
    /// Empirical upper bound from the collision constant, when defined.
    pub upper: Option<f64>,
    pub estimate: std::result::Result<CriticalEstimate, String>,
    /// The same estimate at twice the horizon, if requested.
    pub long_horizon: Option<std::result::Result<CriticalEstimate, String>>,
}

impl ScalingRow {
    pub fn scaled(&self) -> Option<f64> {
        self.estimate
            .as_ref()
            .ok()
            .map(|e| self.d as f64 * self.p * e.lambda_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub estimator: EstimatorOptions,
    /// Bracket search starts at `lower_factor / (dp)`.
    pub lower_factor: f64,
    pub max_doublings: u32,
    pub c_hat: Option<f64>,
    pub long_horizon: bool,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorOptions::default(),
            lower_factor: 0.5,
            max_doublings: 6,
            c_hat: None,
            long_horizon: true,
        }
    }
}

/// One row per dimension, annealed. Bracket failures are recorded per row.
pub fn scaling_table(p: f64, dims: &[usize], opts: &ScalingOptions) -> Result<Vec<ScalingRow>> {
    if dims.is_empty() || dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("dimensions must be strictly increasing".into()));
    }
    dims.par_iter()
        .map(|&d| {
            let params = ModelParams::geometric(d, p)?;
            let lower = 1.0 / params.mean_degree();
            let run = |est_opts: &EstimatorOptions| {
                match bisect_with_search(
                    &params,
                    opts.lower_factor * lower,
                    opts.max_doublings,
                    EstimatorMode::Annealed,
                    est_opts,
                ) {
                    Ok(e) => Ok(Ok(e)),
                    Err(e @ Error::InvalidBracket { .. }) => Ok(Err(e.to_string())),
                    Err(e) => Err(e),
                }
            };
            let estimate = run(&opts.estimator)?;
            let long_horizon = if opts.long_horizon {
                let long = EstimatorOptions {
                    horizon: 2.0 * opts.estimator.horizon,
                    ..opts.estimator
                };
                Some(run(&long)?)
            } else {
                None
            };
            Ok(ScalingRow {
                d,
                p,
                lower,
                upper: opts.c_hat.and_then(|c| upper_bound_lambda(d, p, c)),
                estimate,
                long_horizon,
            })
        })
        .collect()
}
