//! Continuous-time contact process on the open subgraph `G(omega)`.
//!
//! Infected sites recover at rate 1. A healthy site `x` is infected at rate
//! `lambda` times the number of infected `y` with an open edge `y -> x`
//! (forward direction), or `x -> y` (dual direction). Runs are exact
//! event-driven simulations on the box `[-L, L]^d` with an absorbing
//! boundary: infections aimed outside the box are discarded and counted.
//!
//! All runs read the per-site clocks of [`crate::clock`], so runs with the
//! same `rng_seed` and `reference_rate` but different `lambda` are coupled
//! and their infected sets are nested.

use std::collections::BTreeSet;

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::clock::{ClockField, Mark, Scheduler};
use crate::environment::{Environment, QuenchedEnvironment};
use crate::error::{Error, Result};
use crate::lattice::{check_dim, rectangle_vertices, ModelParams, Vertex};
use crate::seeds::{seed_schedule, ReplicaSeeds};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Infection travels along open edges, `y -> x`.
    #[default]
    Forward,
    /// Infection travels against open edges: the dual process.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Simulate on `[-L, L]^d`.
    pub box_radius: i32,
    pub horizon: f64,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub boundary: Boundary,
    pub rng_seed: u64,
    /// Clock rate used for thinning. Runs at different `lambda` that share
    /// `rng_seed` and this value are pathwise coupled. Defaults to `lambda`.
    #[serde(default)]
    pub reference_rate: Option<f64>,
    /// Stop early, counting the run as alive, once this many sites are
    /// active at the same time.
    #[serde(default)]
    pub max_active: Option<usize>,
    /// Vertex whose occupation history is recorded. Defaults to the origin.
    #[serde(default)]
    pub probe: Option<Vertex>,
}

impl SimOptions {
    pub fn new(box_radius: i32, horizon: f64, rng_seed: u64) -> Self {
        Self {
            box_radius,
            horizon,
            direction: Direction::Forward,
            boundary: Boundary::Absorbing,
            rng_seed,
            reference_rate: None,
            max_active: None,
            probe: None,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_reference_rate(mut self, rate: f64) -> Self {
        self.reference_rate = Some(rate);
        self
    }

    pub fn with_max_active(mut self, cap: usize) -> Self {
        self.max_active = Some(cap);
        self
    }

    pub fn with_probe(mut self, probe: Vertex) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.box_radius < 1 {
            return Err(Error::InvalidParameter(format!(
                "box radius {} must be at least 1",
                self.box_radius
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must be finite and nonnegative",
                self.horizon
            )));
        }
        if let Some(rate) = self.reference_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "reference rate {rate} must be positive and finite"
                )));
            }
        }
        if self.max_active == Some(0) {
            return Err(Error::InvalidParameter("max_active must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn reference_rate_for(&self, lambda: f64) -> Result<f64> {
        let reference = self.reference_rate.unwrap_or(lambda);
        if lambda > reference * (1.0 + 1e-12) {
            return Err(Error::ContractViolation(format!(
                "lambda {lambda} exceeds the clock reference rate {reference}"
            )));
        }
        Ok(reference)
    }

    /// Target of an attempt from `site` along `axis`, if the edge it uses is open.
    #[inline]
    pub(crate) fn attempt_target<E: Environment + ?Sized>(
        &self,
        env: &E,
        site: &Vertex,
        axis: usize,
    ) -> Option<Vertex> {
        match self.direction {
            Direction::Forward => env.is_open(site, axis).then(|| site.step_forward(axis)),
            Direction::Dual => {
                let y = site.step_backward(axis);
                env.is_open(&y, axis).then_some(y)
            }
        }
    }
}

/// The infected set at a given time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactConfiguration {
    pub infected: BTreeSet<Vertex>,
    pub time: OrderedTime,
}

/// A time stamp; wrapped so configurations can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTime(pub f64);

impl Eq for OrderedTime {}

impl ContactConfiguration {
    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    pub fn contains(&self, x: &Vertex) -> bool {
        self.infected.contains(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    #[serde(rename = "final")]
    pub final_config: ContactConfiguration,
    pub alive_at_horizon: bool,
    pub extinction_time: Option<f64>,
    /// Occupation transitions `(time, infected)` of the probe vertex,
    /// starting with its state at time 0.
    pub probe_trace: Vec<(f64, bool)>,
    pub boundary_hits: u64,
    pub events: u64,
    /// The run stopped early at the `max_active` cap.
    pub capped: bool,
}

fn check_initial(d: usize, initial: &[Vertex], opts: &SimOptions) -> Result<()> {
    opts.validate()?;
    if initial.is_empty() {
        return Err(Error::ContractViolation("initial infected set is empty".into()));
    }
    for x in initial {
        check_dim(d, x.dim())?;
        if !x.in_box(opts.box_radius) {
            return Err(Error::ContractViolation(format!(
                "initial vertex {x:?} lies outside the box of radius {}",
                opts.box_radius
            )));
        }
    }
    if let Some(probe) = &opts.probe {
        check_dim(d, probe.dim())?;
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "infection rate {lambda} must be positive and finite"
        )))
    }
}

struct ProbeTracker {
    probe: Vertex,
    trace: Vec<(f64, bool)>,
}

impl ProbeTracker {
    fn new(probe: Vertex, initially: bool) -> Self {
        Self {
            probe,
            trace: vec![(0.0, initially)],
        }
    }

    #[inline]
    fn record(&mut self, site: &Vertex, time: f64, infected: bool) {
        if *site == self.probe {
            self.trace.push((time, infected));
        }
    }
}

/// Exact simulation of the quenched contact process started from `initial`.
pub fn run_quenched<E: Environment + ?Sized>(
    env: &E,
    lambda: f64,
    initial: &[Vertex],
    opts: &SimOptions,
) -> Result<RunResult> {
    let d = env.dim();
    check_lambda(lambda)?;
    check_initial(d, initial, opts)?;
    let reference = opts.reference_rate_for(lambda)?;
    let accept = lambda / reference;
    let mut sched = Scheduler::new(ClockField::new(opts.rng_seed, d, reference));
    for x in initial {
        sched.activate(*x, 0.0);
    }
    let probe = opts.probe.unwrap_or_else(|| Vertex::origin(d));
    let mut tracker = ProbeTracker::new(probe, sched.is_active(&probe));
    let mut boundary_hits = 0;
    let mut events = 0;
    let mut extinction_time = None;
    let mut capped = false;
    let mut now = opts.horizon;

    while let Some(ev) = sched.next_event(opts.horizon) {
        events += 1;
        match ev.mark {
            Mark::Recover => {
                sched.deactivate(&ev.site);
                tracker.record(&ev.site, ev.time, false);
                if sched.active_count() == 0 {
                    extinction_time = Some(ev.time);
                    break;
                }
            }
            Mark::Attempt { axis, u } => {
                if u >= accept {
                    continue;
                }
                let Some(target) = opts.attempt_target(env, &ev.site, axis) else {
                    continue;
                };
                if !target.in_box(opts.box_radius) {
                    boundary_hits += 1;
                    continue;
                }
                if !sched.is_active(&target) {
                    sched.activate(target, ev.time);
                    tracker.record(&target, ev.time, true);
                    if opts.max_active.is_some_and(|cap| sched.active_count() >= cap) {
                        capped = true;
                        now = ev.time;
                        break;
                    }
                }
            }
        }
    }

    let infected: BTreeSet<Vertex> = sched.active_sites().copied().collect();
    let time = extinction_time.unwrap_or(now);
    Ok(RunResult {
        alive_at_horizon: !infected.is_empty(),
        final_config: ContactConfiguration {
            infected,
            time: OrderedTime(time),
        },
        extinction_time,
        probe_trace: tracker.trace,
        boundary_hits,
        events,
        capped,
    })
}

/// Two runs driven by the same clocks, at `lambda_low <= lambda_high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub low: RunResult,
    pub high: RunResult,
    /// Events after which some site was infected in the low run but not
    /// in the high run. Zero for a correct coupling.
    pub inclusion_violations: u64,
}

/// Basic coupling: shared recovery clocks, and every infection of the low
/// process is a thinning (probability `lambda_low / lambda_high`) of an
/// infection attempt of the high process.
pub fn run_coupled_pair<E: Environment + ?Sized>(
    env: &E,
    lambda_low: f64,
    lambda_high: f64,
    initial: &[Vertex],
    opts: &SimOptions,
) -> Result<CoupledRun> {
    let d = env.dim();
    check_lambda(lambda_low)?;
    check_lambda(lambda_high)?;
    if lambda_low > lambda_high {
        return Err(Error::ContractViolation(format!(
            "lambda_low = {lambda_low} exceeds lambda_high = {lambda_high}"
        )));
    }
    check_initial(d, initial, opts)?;
    let reference = opts.reference_rate_for(lambda_high)?;
    let accept_high = lambda_high / reference;
    let accept_low = lambda_low / reference;

    // The high run's infected set is the scheduler's active set.
    let mut sched = Scheduler::new(ClockField::new(opts.rng_seed, d, reference));
    let mut low: FxHashSet<Vertex> = FxHashSet::default();
    for x in initial {
        sched.activate(*x, 0.0);
        low.insert(*x);
    }
    let probe = opts.probe.unwrap_or_else(|| Vertex::origin(d));
    let mut trace_high = ProbeTracker::new(probe, sched.is_active(&probe));
    let mut trace_low = ProbeTracker::new(probe, low.contains(&probe));
    let (mut hits_high, mut hits_low) = (0u64, 0u64);
    let mut events = 0u64;
    let mut events_low = 0u64;
    let mut ext_high = None;
    let mut ext_low = None;
    let mut violations = 0u64;
    let mut capped = false;
    let mut now = opts.horizon;

    while let Some(ev) = sched.next_event(opts.horizon) {
        events += 1;
        let in_low = low.contains(&ev.site);
        if in_low {
            events_low += 1;
        }
        match ev.mark {
            Mark::Recover => {
                sched.deactivate(&ev.site);
                trace_high.record(&ev.site, ev.time, false);
                if low.remove(&ev.site) {
                    trace_low.record(&ev.site, ev.time, false);
                    if low.is_empty() {
                        ext_low = Some(ev.time);
                    }
                }
                if sched.active_count() == 0 {
                    ext_high = Some(ev.time);
                    break;
                }
            }
            Mark::Attempt { axis, u } => {
                if u >= accept_high {
                    continue;
                }
                let Some(target) = opts.attempt_target(env, &ev.site, axis) else {
                    continue;
                };
                let low_accepts = in_low && u < accept_low;
                if !target.in_box(opts.box_radius) {
                    hits_high += 1;
                    if low_accepts {
                        hits_low += 1;
                    }
                    continue;
                }
                if !sched.is_active(&target) {
                    sched.activate(target, ev.time);
                    trace_high.record(&target, ev.time, true);
                }
                if low_accepts && low.insert(target) {
                    trace_low.record(&target, ev.time, true);
                }
                if low.contains(&target) && !sched.is_active(&target) {
                    violations += 1;
                }
                if opts.max_active.is_some_and(|cap| sched.active_count() >= cap) {
                    capped = true;
                    now = ev.time;
                    break;
                }
            }
        }
    }

    let high_set: BTreeSet<Vertex> = sched.active_sites().copied().collect();
    let low_set: BTreeSet<Vertex> = low.into_iter().collect();
    if !low_set.is_subset(&high_set) {
        violations += 1;
    }
    let make = |infected: BTreeSet<Vertex>, ext: Option<f64>, trace: ProbeTracker, hits, events| {
        let time = ext.unwrap_or(now);
        RunResult {
            alive_at_horizon: !infected.is_empty(),
            final_config: ContactConfiguration {
                infected,
                time: OrderedTime(time),
            },
            extinction_time: ext,
            probe_trace: trace.trace,
            boundary_hits: hits,
            events,
            capped,
        }
    };
    Ok(CoupledRun {
        low: make(low_set, ext_low, trace_low, hits_low, events_low),
        high: make(high_set, ext_high, trace_high, hits_high, events),
        inclusion_violations: violations,
    })
}

/// Vertices of the box that can influence `probe` (forward: `x <= probe`;
/// dual: `x >= probe`). Sites outside this cone never change the state of
/// `probe`, so starting "all infected" on the cone is the same as on the box.
pub fn influence_cone(probe: &Vertex, box_radius: i32, direction: Direction) -> Vec<Vertex> {
    let d = probe.dim();
    let lo = Vertex::from_coords(&vec![-box_radius; d]).expect("valid dimension");
    let hi = Vertex::from_coords(&vec![box_radius; d]).expect("valid dimension");
    match direction {
        Direction::Forward => {
            let top: Vec<i32> = probe.coords().iter().map(|&c| c.min(box_radius)).collect();
            rectangle_vertices(&lo, &Vertex::from_coords(&top).expect("valid dimension"))
        }
        Direction::Dual => {
            let bottom: Vec<i32> = probe.coords().iter().map(|&c| c.max(-box_radius)).collect();
            rectangle_vertices(&Vertex::from_coords(&bottom).expect("valid dimension"), &hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaEstimate {
    pub estimate: Estimate,
    /// Replicas in which at least one infection was aimed outside the box.
    pub boundary_hits: u64,
    /// Replicas stopped early at the `max_active` cap.
    pub capped: u64,
}

fn summarize(outcomes: &[(bool, bool, bool)]) -> ReplicaEstimate {
    let n = outcomes.len() as u64;
    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let capped = outcomes.iter().filter(|o| o.1).count() as u64;
    let successes = outcomes.iter().filter(|o| o.2).count() as u64;
    ReplicaEstimate {
        estimate: Estimate::from_indicators(successes, n),
        boundary_hits: hits,
        capped,
    }
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas == 0 {
        Err(Error::InvalidParameter("replicas must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Annealed `P(eta_t(probe) = 1)` from the all-infected box. Every replica
/// draws its own environment and its own clocks from `opts.rng_seed`.
pub fn annealed_occupation(
    params: &ModelParams,
    t: f64,
    probe: &Vertex,
    replicas: u64,
    opts: &SimOptions,
) -> Result<ReplicaEstimate> {
    params.validate()?;
    let lambda = params.require_lambda()?;
    check_replicas(replicas)?;
    check_dim(params.d, probe.dim())?;
    let opts = SimOptions {
        horizon: t,
        probe: Some(*probe),
        ..*opts
    };
    opts.validate()?;
    if !probe.in_box(opts.box_radius) {
        return Err(Error::ContractViolation(format!("probe {probe:?} lies outside the box")));
    }
    let initial = influence_cone(probe, opts.box_radius, opts.direction);
    let outcomes = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let seeds = ReplicaSeeds::derive(opts.rng_seed, i);
            let env = QuenchedEnvironment::new(*params, seeds.env_seed)?;
            let run = run_quenched(&env, lambda, &initial, &opts.with_seed(seeds.process_seed))?;
            Ok((run.boundary_hits > 0, run.capped, run.final_config.contains(probe)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SurvivalMode {
    /// Fresh environment per replica.
    Annealed,
    /// One fixed environment for all replicas.
    Quenched { env_seed: u64 },
}

/// Fraction of replicas of `eta^{start}` still alive at `opts.horizon`.
pub fn survival_from(
    params: &ModelParams,
    start: &Vertex,
    replicas: u64,
    mode: SurvivalMode,
    opts: &SimOptions,
) -> Result<ReplicaEstimate> {
    params.validate()?;
    let lambda = params.require_lambda()?;
    check_replicas(replicas)?;
    check_initial(params.d, std::slice::from_ref(start), opts)?;
    let fixed = match mode {
        SurvivalMode::Quenched { env_seed } => Some(QuenchedEnvironment::new(*params, env_seed)?),
        SurvivalMode::Annealed => None,
    };
    let outcomes = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let seeds = ReplicaSeeds::derive(opts.rng_seed, i);
            let run_opts = opts.with_seed(seeds.process_seed);
            let run = match &fixed {
                Some(env) => run_quenched(env, lambda, std::slice::from_ref(start), &run_opts)?,
                None => {
                    let env = QuenchedEnvironment::new(*params, seeds.env_seed)?;
                    run_quenched(&env, lambda, std::slice::from_ref(start), &run_opts)?
                }
            };
            Ok((run.boundary_hits > 0, run.capped, run.alive_at_horizon))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&outcomes))
}

/// Survival of `eta^0` to the horizon: the finite-time proxy for
/// "`eta^0` survives".
pub fn survival_probability(
    params: &ModelParams,
    opts: &SimOptions,
    replicas: u64,
    mode: SurvivalMode,
) -> Result<ReplicaEstimate> {
    survival_from(params, &Vertex::origin(params.d), replicas, mode, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfDualityReport {
    /// Annealed `P(eta_t(0) = 1)` from the all-infected box.
    pub forward: ReplicaEstimate,
    /// Annealed `P(eta_t^0 nonempty)`.
    pub single_site: ReplicaEstimate,
    pub combined_se: f64,
}

impl SelfDualityReport {
    pub fn difference(&self) -> f64 {
        self.forward.estimate.mean - self.single_site.estimate.mean
    }
}

/// Both sides of the annealed self-duality identity
/// `P(eta_t(0) = 1) = P(exists x: eta_t^0(x) = 1)`, from independent replicas.
pub fn check_self_duality(
    params: &ModelParams,
    t: f64,
    replicas: u64,
    opts: &SimOptions,
) -> Result<SelfDualityReport> {
    let forward_opts = SimOptions {
        direction: Direction::Forward,
        ..*opts
    };
    let forward = annealed_occupation(params, t, &Vertex::origin(params.d), replicas, &forward_opts)?;
    let single_opts = SimOptions {
        horizon: t,
        direction: Direction::Forward,
        rng_seed: seed_schedule(opts.rng_seed, "self-duality/single-site", 0),
        ..*opts
    };
    let single_site = survival_probability(params, &single_opts, replicas, SurvivalMode::Annealed)?;
    Ok(SelfDualityReport {
        combined_se: forward.estimate.combined_se(&single_site.estimate),
        forward,
        single_site,
    })
}

/// Quenched counterpart: on one fixed environment, the all-infected
/// occupation of the origin, the survival of `eta^0`, and the survival of
/// the dual process `eta_hat^0`. The first and third agree in law on every
/// environment; the first and second need not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchedDualityReport {
    pub occupation: ReplicaEstimate,
    pub forward_survival: ReplicaEstimate,
    pub dual_survival: ReplicaEstimate,
}

pub fn quenched_duality(
    env: &QuenchedEnvironment,
    lambda: f64,
    t: f64,
    replicas: u64,
    opts: &SimOptions,
) -> Result<QuenchedDualityReport> {
    check_lambda(lambda)?;
    check_replicas(replicas)?;
    let d = env.dim();
    let origin = Vertex::origin(d);
    let base = SimOptions {
        horizon: t,
        probe: Some(origin),
        ..*opts
    };
    base.validate()?;
    let cone = influence_cone(&origin, base.box_radius, Direction::Forward);
    let run_many = |label: &str, direction: Direction, initial: &[Vertex], probe_only: bool| {
        let outcomes = (0..replicas)
            .into_par_iter()
            .map(|i| {
                let run_opts = SimOptions {
                    direction,
                    rng_seed: seed_schedule(opts.rng_seed, label, i),
                    ..base
                };
                let run = run_quenched(env, lambda, initial, &run_opts)?;
                let success = if probe_only {
                    run.final_config.contains(&origin)
                } else {
                    run.alive_at_horizon
                };
                Ok((run.boundary_hits > 0, run.capped, success))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(summarize(&outcomes))
    };
    Ok(QuenchedDualityReport {
        occupation: run_many("quenched/occupation", Direction::Forward, &cone, true)?,
        forward_survival: run_many("quenched/forward", Direction::Forward, &[origin], false)?,
        dual_survival: run_many("quenched/dual", Direction::Dual, &[origin], false)?,
    })
}
