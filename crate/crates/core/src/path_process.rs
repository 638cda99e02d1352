//! The binary contact path process.
//!
//! `zeta_t(x)` is a nonnegative integer. At rate 1 it is reset to 0, and for
//! every open edge `y -> x`, at rate `lambda` it jumps to
//! `zeta_t(x) + zeta_t(y)`. Its support is a contact process when both are
//! built from the same clocks, and from `zeta_0 == 1` its annealed mean at
//! the origin is `exp((lambda d p - 1) t)`.
//!
//! The dynamics are linear, so `zeta_t(0) = <w_t, zeta_0>` where `w` runs the
//! transposed moves backwards in time: from `w = delta_0`, reset `w(x)` at
//! rate 1 and add `w(x)` into `w(y)` at rate `lambda` for each open
//! `y -> x`. Time-reversed Poisson clocks are again Poisson clocks, so the
//! total mass of a dual-direction run started at `delta_0` has the law of
//! `zeta_t(0)` started from all ones on the whole lattice.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::clock::{ClockField, Mark, Scheduler};
use crate::contact::{influence_cone, ContactConfiguration, Direction, OrderedTime, SimOptions};
use crate::environment::{Environment, QuenchedEnvironment};
use crate::error::{Error, Result};
use crate::lattice::{check_dim, ModelParams, Vertex};
use crate::seeds::ReplicaSeeds;
use crate::stats::{Estimate, MeanAccumulator};

/// Share of overflow-discarded replicas above which a warning is attached.
pub const OVERFLOW_WARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProcessConfiguration {
    /// Nonzero entries only.
    pub values: BTreeMap<Vertex, u64>,
    pub time: f64,
    /// Some addition saturated at `u64::MAX`.
    pub overflowed: bool,
}

impl PathProcessConfiguration {
    pub fn value(&self, x: &Vertex) -> u64 {
        self.values.get(x).copied().unwrap_or(0)
    }

    /// Sum of all entries, or `None` if it does not fit in a `u128`.
    pub fn total(&self) -> Option<u128> {
        self.values
            .values()
            .try_fold(0u128, |acc, &v| acc.checked_add(v as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRun {
    pub config: PathProcessConfiguration,
    pub events: u64,
    pub boundary_hits: u64,
}

/// `eta_t(x) = 1` iff `zeta_t(x) >= 1`.
pub fn coupled_eta_view(zeta: &PathProcessConfiguration) -> ContactConfiguration {
    ContactConfiguration {
        infected: zeta
            .values
            .iter()
            .filter(|(_, &v)| v > 0)
            .map(|(x, _)| *x)
            .collect(),
        time: OrderedTime(zeta.time),
    }
}

fn check_run(lambda: f64, opts: &SimOptions) -> Result<f64> {
    opts.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "infection rate {lambda} must be positive and finite"
        )));
    }
    opts.reference_rate_for(lambda)
}

/// Run from an arbitrary initial field. Zero entries are ignored.
pub fn run_path_process_from<E: Environment + ?Sized>(
    env: &E,
    lambda: f64,
    initial: &[(Vertex, u64)],
    opts: &SimOptions,
) -> Result<PathRun> {
    let d = env.dim();
    let reference = check_run(lambda, opts)?;
    let accept = lambda / reference;
    let mut sched = Scheduler::new(ClockField::new(opts.rng_seed, d, reference));
    let mut values: FxHashMap<Vertex, u64> = FxHashMap::default();
    for &(x, v) in initial {
        check_dim(d, x.dim())?;
        if !x.in_box(opts.box_radius) {
            return Err(Error::ContractViolation(format!(
                "initial vertex {x:?} lies outside the box"
            )));
        }
        if v > 0 {
            values.insert(x, v);
            sched.activate(x, 0.0);
        }
    }
    let mut overflowed = false;
    let mut events = 0;
    let mut boundary_hits = 0;

    while let Some(ev) = sched.next_event(opts.horizon) {
        events += 1;
        match ev.mark {
            Mark::Recover => {
                sched.deactivate(&ev.site);
                values.remove(&ev.site);
                if values.is_empty() {
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
                let add = values[&ev.site];
                let slot = values.entry(target).or_insert(0);
                let was_zero = *slot == 0;
                *slot = slot.checked_add(add).unwrap_or_else(|| {
                    overflowed = true;
                    u64::MAX
                });
                if was_zero {
                    sched.activate(target, ev.time);
                }
            }
        }
    }

    Ok(PathRun {
        config: PathProcessConfiguration {
            values: values.into_iter().collect(),
            time: opts.horizon,
            overflowed,
        },
        events,
        boundary_hits,
    })
}

/// Run from `zeta_0 == 1` on the whole box `[-L, L]^d`.
pub fn run_path_process<E: Environment + ?Sized>(
    env: &E,
    lambda: f64,
    opts: &SimOptions,
) -> Result<PathRun> {
    let d = env.dim();
    let box_radius = opts.box_radius;
    let initial: Vec<(Vertex, u64)> = crate::lattice::cube_vertices(d, -box_radius, box_radius)
        .into_iter()
        .map(|x| (x, 1))
        .collect();
    run_path_process_from(env, lambda, &initial, opts)
}

/// `zeta` and a contact process driven by the same clocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRun {
    pub zeta: PathProcessConfiguration,
    pub eta: ContactConfiguration,
    pub events: u64,
    /// Events after which `eta(x) = 1` and `zeta(x) >= 1` disagreed at the
    /// updated site. Zero for a correct coupling.
    pub mismatches: u64,
}

/// Run `zeta` (from 1 on `initial`) and `eta` (infected on `initial`)
/// together, checking `eta(x) = 1 <=> zeta(x) >= 1` after every event.
pub fn run_joint<E: Environment + ?Sized>(
    env: &E,
    lambda: f64,
    initial: &[Vertex],
    opts: &SimOptions,
) -> Result<JointRun> {
    let d = env.dim();
    let reference = check_run(lambda, opts)?;
    let accept = lambda / reference;
    let mut sched = Scheduler::new(ClockField::new(opts.rng_seed, d, reference));
    let mut zeta: FxHashMap<Vertex, u64> = FxHashMap::default();
    let mut eta: FxHashSet<Vertex> = FxHashSet::default();
    for x in initial {
        check_dim(d, x.dim())?;
        if !x.in_box(opts.box_radius) {
            return Err(Error::ContractViolation(format!(
                "initial vertex {x:?} lies outside the box"
            )));
        }
        zeta.insert(*x, 1);
        eta.insert(*x);
        sched.activate(*x, 0.0);
    }
    let mut overflowed = false;
    let mut events = 0;
    let mut mismatches = 0;

    // The scheduler runs the clocks of supp(zeta) union eta; with a correct
    // coupling the two sets coincide.
    while let Some(ev) = sched.next_event(opts.horizon) {
        events += 1;
        let touched = match ev.mark {
            Mark::Recover => {
                zeta.remove(&ev.site);
                eta.remove(&ev.site);
                sched.deactivate(&ev.site);
                ev.site
            }
            Mark::Attempt { axis, u } => {
                if u >= accept {
                    continue;
                }
                let Some(target) = opts.attempt_target(env, &ev.site, axis) else {
                    continue;
                };
                if !target.in_box(opts.box_radius) {
                    continue;
                }
                let add = zeta.get(&ev.site).copied().unwrap_or(0);
                if add > 0 {
                    let slot = zeta.entry(target).or_insert(0);
                    *slot = slot.checked_add(add).unwrap_or_else(|| {
                        overflowed = true;
                        u64::MAX
                    });
                }
                if eta.contains(&ev.site) {
                    eta.insert(target);
                }
                if zeta.contains_key(&target) || eta.contains(&target) {
                    sched.activate(target, ev.time);
                }
                target
            }
        };
        let z = zeta.get(&touched).copied().unwrap_or(0);
        if (z >= 1) != eta.contains(&touched) {
            mismatches += 1;
        }
    }

    Ok(JointRun {
        zeta: PathProcessConfiguration {
            values: zeta.into_iter().collect(),
            time: opts.horizon,
            overflowed,
        },
        eta: ContactConfiguration {
            infected: eta.into_iter().collect(),
            time: OrderedTime(opts.horizon),
        },
        events,
        mismatches,
    })
}

/// `exp((lambda d p - 1) t)`.
pub fn analytic_mean_zeta(params: &ModelParams, t: f64) -> Result<f64> {
    let lambda = params.require_lambda()?;
    Ok(((lambda * params.mean_degree() - 1.0) * t).exp())
}

/// `e^{-t} sum_{n <= terms} (t lambda d p)^n / n!`.
pub fn analytic_mean_zeta_series(params: &ModelParams, t: f64, terms: usize) -> Result<f64> {
    let lambda = params.require_lambda()?;
    let x = t * lambda * params.mean_degree();
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=terms {
        term *= x / n as f64;
        sum += term;
    }
    Ok((-t).exp() * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ZetaMethod {
    /// Forward simulation from `zeta_0 == 1` on the part of the box that can
    /// reach the origin.
    Forward,
    /// Total mass of the transposed (dual-direction) process from `delta_0`.
    #[default]
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaMeanReport {
    pub params: ModelParams,
    pub t: f64,
    pub method: ZetaMethod,
    pub estimate: Estimate,
    pub analytic: f64,
    pub replicas: u64,
    pub overflow_discards: u64,
    pub boundary_hits: u64,
    pub warning: Option<String>,
}

/// Annealed Monte Carlo mean of `zeta_t(0)`, one fresh environment per replica.
pub fn mean_zeta_origin(
    params: &ModelParams,
    t: f64,
    replicas: u64,
    opts: &SimOptions,
    method: ZetaMethod,
) -> Result<ZetaMeanReport> {
    params.validate()?;
    let lambda = params.require_lambda()?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be at least 1".into()));
    }
    let origin = Vertex::origin(params.d);
    let (initial, direction) = match method {
        ZetaMethod::Forward => (
            influence_cone(&origin, opts.box_radius, Direction::Forward)
                .into_iter()
                .map(|x| (x, 1))
                .collect::<Vec<_>>(),
            Direction::Forward,
        ),
        ZetaMethod::Dual => (vec![(origin, 1)], Direction::Dual),
    };
    let base = SimOptions {
        horizon: t,
        direction,
        ..*opts
    };
    let samples = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let seeds = ReplicaSeeds::derive(opts.rng_seed, i);
            let env = QuenchedEnvironment::new(*params, seeds.env_seed)?;
            let run = run_path_process_from(&env, lambda, &initial, &base.with_seed(seeds.process_seed))?;
            let value = match method {
                ZetaMethod::Forward => Some(run.config.value(&origin) as f64),
                ZetaMethod::Dual => run.config.total().map(|v| v as f64),
            };
            let value = if run.config.overflowed { None } else { value };
            Ok((value, run.boundary_hits > 0))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut acc = MeanAccumulator::default();
    let mut discards = 0;
    let mut hits = 0;
    for (value, hit) in samples {
        match value {
            Some(v) => acc.push(v),
            None => discards += 1,
        }
        hits += hit as u64;
    }
    let warning = (discards as f64 > OVERFLOW_WARNING_RATE * replicas as f64).then(|| {
        format!("{discards} of {replicas} replicas overflowed and were discarded")
    });
    Ok(ZetaMeanReport {
        params: *params,
        t,
        method,
        estimate: acc.estimate(),
        analytic: analytic_mean_zeta(params, t)?,
        replicas,
        overflow_discards: discards,
        boundary_hits: hits,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{EdgeSetEnvironment, UniformEnvironment};
    use crate::seeds::seed_schedule;

    fn v(c: &[i32]) -> Vertex {
        Vertex::from_coords(c).unwrap()
    }

    #[test]
    fn eta_view_is_the_support() {
        let mut zeta = PathProcessConfiguration {
            values: BTreeMap::new(),
            time: 0.0,
            overflowed: false,
        };
        assert!(coupled_eta_view(&zeta).is_empty());
        zeta.values.insert(v(&[1, 2]), 7);
        zeta.values.insert(v(&[0, 0]), 0);
        let eta = coupled_eta_view(&zeta);
        assert_eq!(eta.infected.len(), 1);
        assert!(eta.contains(&v(&[1, 2])));
    }

    #[test]
    fn closed_environment_is_a_pure_death_chain() {
        let env = UniformEnvironment { d: 2, open: false };
        let runs = 20_000u64;
        let t = 0.7;
        let mut alive = 0u64;
        for i in 0..runs {
            let opts = SimOptions::new(1, t, seed_schedule(2, "death", i));
            let run = run_path_process(&env, 2.0, &opts).unwrap();
            for (_, &value) in &run.config.values {
                assert_eq!(value, 1);
            }
            alive += run.config.values.len() as u64;
        }
        // Nine independent sites per run.
        let est = Estimate::from_indicators(alive, runs * 9);
        assert!(est.within((-t).exp(), 3.0), "{est:?}");
    }

    #[test]
    fn overflow_is_flagged() {
        let env = UniformEnvironment { d: 1, open: true };
        let opts = SimOptions::new(2, 50.0, 1);
        let run = run_path_process_from(&env, 50.0, &[(v(&[0]), u64::MAX / 2 + 1), (v(&[1]), u64::MAX / 2 + 1)], &opts)
            .unwrap();
        assert!(run.config.overflowed || run.config.values.is_empty());
    }

    #[test]
    fn series_matches_closed_form() {
        for (lambda, t) in [(0.5, 1.0), (1.0, 2.0), (2.0, 1.25)] {
            let params = ModelParams::new(2, 0.5, lambda).unwrap();
            assert!(t * lambda * params.mean_degree() <= 5.0);
            let closed = analytic_mean_zeta(&params, t).unwrap();
            let series = analytic_mean_zeta_series(&params, t, 50).unwrap();
            assert!((closed - series).abs() < 1e-12, "{closed} vs {series}");
        }
        let critical = ModelParams::new(4, 0.25, 1.0).unwrap();
        for t in [0.0, 1.0, 10.0] {
            assert!((analytic_mean_zeta(&critical, t).unwrap() - 1.0).abs() < 1e-15);
        }
        let sub = ModelParams::new(2, 0.5, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let value = analytic_mean_zeta(&sub, k as f64).unwrap();
            assert!(value < last);
            last = value;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn joint_run_keeps_supports_equal() {
        let env = QuenchedEnvironment::new(ModelParams::geometric(2, 0.6).unwrap(), 3).unwrap();
        let initial = influence_cone(&Vertex::origin(2), 4, Direction::Forward);
        for seed in 0..100 {
            let run = run_joint(&env, 1.3, &initial, &SimOptions::new(4, 2.0, seed)).unwrap();
            assert_eq!(run.mismatches, 0);
            assert_eq!(coupled_eta_view(&run.zeta).infected, run.eta.infected);
        }
    }

    #[test]
    fn dual_and_forward_agree_on_a_fixed_chain() {
        // d = 1, only -1 -> 0 open. zeta_t(0) = 1{0 alive} * ... computed
        // both ways must have the same mean.
        let env = EdgeSetEnvironment::with_edges(1, [(v(&[-1]), 0)]).unwrap();
        let runs = 40_000u64;
        let lambda = 1.0;
        let t = 1.0;
        let mut fwd = MeanAccumulator::default();
        let mut dual = MeanAccumulator::default();
        for i in 0..runs {
            let opts = SimOptions::new(2, t, seed_schedule(9, "fwd", i));
            let run = run_path_process_from(&env, lambda, &[(v(&[-1]), 1), (v(&[0]), 1)], &opts).unwrap();
            fwd.push(run.config.value(&v(&[0])) as f64);
            let opts = SimOptions::new(2, t, seed_schedule(9, "dual", i)).with_direction(Direction::Dual);
            let run = run_path_process_from(&env, lambda, &[(v(&[0]), 1)], &opts).unwrap();
            dual.push(run.config.total().unwrap() as f64);
        }
        let (a, b) = (fwd.estimate(), dual.estimate());
        // m' = -m + lambda e^{-t}, m(0) = 1  =>  m(1) = 2 e^{-1}.
        let exact = 2.0 * (-1.0f64).exp();
        assert!(a.within(exact, 3.0), "{a:?}");
        assert!(b.within(exact, 3.0), "{b:?}");
    }
}
