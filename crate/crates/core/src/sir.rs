//! Static infection trials and the second-moment bound on `P(C_n != {})`.
//!
//! Every vertex `x` gets a lifetime `Y_x ~ Exp(1)` and every pair `(x, i)` an
//! attempt time `U_{x,i} ~ Exp(lambda)`; `x` infects `x + e_i` iff that edge
//! is open and `U_{x,i} <= Y_x`. All variables are keyed hashes of the trial
//! seed, so a field is a fixed, replayable object and a given `U_{x,i}` is
//! shared by every path through `(x, i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{check_enumeration_budget, Environment, QuenchedEnvironment};
use crate::error::{Error, Result};
use crate::keyed::{domain, hash_vertex, unit_interval_open_low};
use crate::lattice::{ModelParams, Vertex};
use crate::seeds::seed_schedule;
use crate::stats::{Estimate, MeanAccumulator};

/// `P(x => y) = lambda p / (1 + lambda)`.
pub fn infect_one_probability(lambda: f64, p: f64) -> f64 {
    lambda * p / (1.0 + lambda)
}

/// `P(x => y1, x => y2) = 2 lambda^2 p^2 / ((2 lambda + 1)(lambda + 1))` for `y1 != y2`.
pub fn infect_two_probability(lambda: f64, p: f64) -> f64 {
    2.0 * lambda * lambda * p * p / ((2.0 * lambda + 1.0) * (lambda + 1.0))
}

/// The relation `x => x + e_axis`.
pub trait InfectionRelation: Sync {
    fn dim(&self) -> usize;
    fn infects(&self, x: &Vertex, axis: usize) -> bool;
}

#[derive(Debug, Clone)]
pub struct InfectionTrialField<E = QuenchedEnvironment> {
    lambda: f64,
    trial_seed: u64,
    env: E,
}

impl InfectionTrialField<QuenchedEnvironment> {
    /// Trials keyed on `trial_seed`, over an environment derived from it.
    pub fn new(params: &ModelParams, trial_seed: u64) -> Result<Self> {
        let lambda = params.require_lambda()?;
        let env = QuenchedEnvironment::new(*params, seed_schedule(trial_seed, "trial/environment", 0))?;
        Ok(Self {
            lambda,
            trial_seed,
            env,
        })
    }
}

impl<E: Environment> InfectionTrialField<E> {
    pub fn with_environment(env: E, lambda: f64, trial_seed: u64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self {
            lambda,
            trial_seed,
            env,
        })
    }

    pub fn environment(&self) -> &E {
        &self.env
    }

    /// `Y_x`.
    pub fn lifetime(&self, x: &Vertex) -> f64 {
        let u = hash_vertex(self.trial_seed, domain::RECOVERY_TRIAL, x, &[]);
        -unit_interval_open_low(u).ln()
    }

    /// `U_{x, axis}`.
    pub fn attempt_time(&self, x: &Vertex, axis: usize) -> f64 {
        let u = hash_vertex(self.trial_seed, domain::ATTEMPT_TRIAL, x, &[axis as u64]);
        -unit_interval_open_low(u).ln() / self.lambda
    }
}

impl<E: Environment> InfectionRelation for InfectionTrialField<E> {
    fn dim(&self) -> usize {
        self.env.dim()
    }

    #[inline]
    fn infects(&self, x: &Vertex, axis: usize) -> bool {
        self.env.is_open(x, axis) && self.attempt_time(x, axis) <= self.lifetime(x)
    }
}

/// `|M_n|`: infection paths of length `n` from the origin, by depth-first
/// enumeration of all `d^n` oriented paths.
pub fn count_infection_paths<R: InfectionRelation + ?Sized>(field: &R, n: usize) -> Result<u64> {
    let d = field.dim();
    check_enumeration_budget(d, n)?;
    fn walk<R: InfectionRelation + ?Sized>(field: &R, x: &Vertex, remaining: usize) -> u64 {
        if remaining == 0 {
            return 1;
        }
        (0..x.dim())
            .filter(|&axis| field.infects(x, axis))
            .map(|axis| walk(field, &x.step_forward(axis), remaining - 1))
            .sum()
    }
    Ok(walk(field, &Vertex::origin(d), n))
}

/// The vertices reached by infection paths of length `n` (the endpoints of
/// `C_n`), found level by level. Empty iff `C_n` is empty.
pub fn infection_level_set<R: InfectionRelation + ?Sized>(field: &R, n: usize) -> Vec<Vertex> {
    let mut level = vec![Vertex::origin(field.dim())];
    for _ in 0..n {
        let mut next: Vec<Vertex> = level
            .iter()
            .flat_map(|x| {
                (0..x.dim())
                    .filter(move |&axis| field.infects(x, axis))
                    .map(move |axis| x.step_forward(axis))
            })
            .collect();
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return next;
        }
        level = next;
    }
    level
}

/// An element of `T_n`, given by its step axes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrientedPath {
    pub d: usize,
    pub steps: Vec<usize>,
}

impl OrientedPath {
    pub fn new(d: usize, steps: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = steps.iter().find(|&&a| a >= d) {
            return Err(Error::InvalidParameter(format!("axis {bad} out of range for d = {d}")));
        }
        Ok(Self { d, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `x_0 = 0, x_1, ..., x_n`.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = Vertex::origin(self.d);
        out.push(x);
        for &axis in &self.steps {
            x = x.step_forward(axis);
            out.push(x);
        }
        out
    }

    pub fn is_infecting<R: InfectionRelation + ?Sized>(&self, field: &R) -> bool {
        let mut x = Vertex::origin(self.d);
        for &axis in &self.steps {
            if !field.infects(&x, axis) {
                return false;
            }
            x = x.step_forward(axis);
        }
        true
    }

    /// Every path of length `n` in dimension `d`.
    pub fn all(d: usize, n: usize) -> Result<Vec<OrientedPath>> {
        check_enumeration_budget(d, n)?;
        let total = d.pow(n as u32);
        Ok((0..total)
            .map(|mut code| {
                let steps = (0..n)
                    .map(|_| {
                        let axis = code % d;
                        code /= d;
                        axis
                    })
                    .collect();
                OrientedPath { d, steps }
            })
            .collect())
    }
}

/// Step overlaps of two equal-length paths: `(shared, split)` counts the
/// indices `i` with `x_i = y_i` and, respectively, the same or a different
/// next step.
pub fn overlap_counts(a: &OrientedPath, b: &OrientedPath) -> Result<(usize, usize)> {
    if a.len() != b.len() || a.d != b.d {
        return Err(Error::ContractViolation(
            "paths must have equal length and dimension".into(),
        ));
    }
    let mut x = Vertex::origin(a.d);
    let mut y = x;
    let (mut shared, mut split) = (0, 0);
    for (&sa, &sb) in a.steps.iter().zip(&b.steps) {
        if x == y {
            if sa == sb {
                shared += 1;
            } else {
                split += 1;
            }
        }
        x = x.step_forward(sa);
        y = y.step_forward(sb);
    }
    Ok((shared, split))
}

/// Exact `P(a in M_n, b in M_n)`:
/// `q1^(2n - |A| - 2|B|) * q2^|B|` with `q1`, `q2` the one- and two-target
/// infection probabilities. On the oriented lattice two paths can only meet
/// at equal step indices, so these are the only dependencies.
pub fn theoretical_pair_correlation(
    lambda: f64,
    p: f64,
    a: &OrientedPath,
    b: &OrientedPath,
) -> Result<f64> {
    let (shared, split) = overlap_counts(a, b)?;
    let n = a.len() as i32;
    let q1 = infect_one_probability(lambda, p);
    let q2 = infect_two_probability(lambda, p);
    Ok(q1.powi(2 * n - shared as i32 - 2 * split as i32) * q2.powi(split as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentReport {
    pub params: ModelParams,
    pub n: usize,
    pub fields: u64,
    /// `E|M_n|`.
    pub first_moment: Estimate,
    /// `E|M_n|^2`.
    pub second_moment: Estimate,
    /// `(E|M_n|)^2 / E|M_n|^2`, with a delta-method standard error.
    pub bound: Estimate,
    /// `P(|M_n| > 0)`.
    pub direct: Estimate,
}

/// Monte Carlo over independent trial fields `seed_schedule(master_seed, "trial", i)`.
pub fn second_moment_bound(
    params: &ModelParams,
    n: usize,
    fields: u64,
    master_seed: u64,
) -> Result<SecondMomentReport> {
    params.validate()?;
    params.require_lambda()?;
    check_enumeration_budget(params.d, n)?;
    if fields < 2 {
        return Err(Error::InvalidParameter("need at least two trial fields".into()));
    }
    let counts = (0..fields)
        .into_par_iter()
        .map(|i| {
            let field = InfectionTrialField::new(params, seed_schedule(master_seed, "trial", i))?;
            count_infection_paths(&field, n)
        })
        .collect::<Result<Vec<u64>>>()?;

    let mut m1 = MeanAccumulator::default();
    let mut m2 = MeanAccumulator::default();
    let mut positive = 0u64;
    for &c in &counts {
        let c = c as f64;
        m1.push(c);
        m2.push(c * c);
        positive += (c > 0.0) as u64;
    }
    let (e1, e2) = (m1.estimate(), m2.estimate());

    // Delta method for g(a, b) = a^2 / b.
    let nf = fields as f64;
    let (a, b) = (e1.mean, e2.mean);
    let cov = counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            (c - a) * (c * c - b)
        })
        .sum::<f64>()
        / (nf - 1.0);
    let (var_a, var_b) = (e1.se * e1.se * nf, e2.se * e2.se * nf);
    let (ga, gb) = (2.0 * a / b, -a * a / (b * b));
    let var_g = (ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * cov) / nf;
    let bound = if b > 0.0 {
        Estimate {
            mean: a * a / b,
            se: var_g.max(0.0).sqrt(),
            n: fields,
        }
    } else {
        Estimate {
            mean: 0.0,
            se: 0.0,
            n: fields,
        }
    };

    Ok(SecondMomentReport {
        params: *params,
        n,
        fields,
        first_moment: e1,
        second_moment: e2,
        bound,
        direct: Estimate::from_indicators(positive, fields),
    })
}

/// `P(C_n != {})` for `n = 1..=max_n`, estimated on one set of fields.
/// The sequence is nonincreasing in `n` on every field.
pub fn infection_survival_sequence(
    params: &ModelParams,
    max_n: usize,
    fields: u64,
    master_seed: u64,
) -> Result<Vec<Estimate>> {
    params.validate()?;
    params.require_lambda()?;
    let depths = (0..fields)
        .into_par_iter()
        .map(|i| {
            let field = InfectionTrialField::new(params, seed_schedule(master_seed, "trial", i))?;
            // Deepest level reached, capped at max_n.
            let mut level = vec![Vertex::origin(params.d)];
            let mut depth = 0;
            while depth < max_n {
                let mut next: Vec<Vertex> = level
                    .iter()
                    .flat_map(|x| {
                        let field = &field;
                        (0..x.dim())
                            .filter(move |&axis| field.infects(x, axis))
                            .map(move |axis| x.step_forward(axis))
                    })
                    .collect();
                next.sort_unstable();
                next.dedup();
                if next.is_empty() {
                    break;
                }
                level = next;
                depth += 1;
            }
            Ok(depth)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok((1..=max_n)
        .map(|n| {
            let reached = depths.iter().filter(|&&depth| depth >= n).count() as u64;
            Estimate::from_indicators(reached, fields)
        })
        .collect())
}
