//! The oriented bond percolation environment.
//!
//! A [`QuenchedEnvironment`] realizes the i.i.d. Bernoulli(p) edge field on
//! the whole of Z^d without storing it: the state of an edge is a keyed hash
//! of `(env_seed, translated tail, axis)`. Queries are pure, so a fixed seed
//! replays the same random graph on every run and every platform, and a
//! translation is just an offset added before hashing.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyed::{domain, hash_vertex, unit_interval};
use crate::lattice::{check_dim, DirectedEdge, ModelParams, Vertex};

/// Largest number of paths the exhaustive enumerators will walk.
pub const PATH_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Read access to an oriented edge field.
pub trait Environment: Sync {
    fn dim(&self) -> usize;

    /// State of the edge `tail -> tail + e_axis`. Callers guarantee
    /// `tail.dim() == self.dim()` and `axis < self.dim()`.
    fn is_open(&self, tail: &Vertex, axis: usize) -> bool;

    /// `{y : y -> x}`.
    fn open_in_neighbors(&self, x: &Vertex) -> Result<Vec<Vertex>> {
        check_dim(self.dim(), x.dim())?;
        Ok((0..self.dim())
            .map(|axis| x.step_backward(axis))
            .enumerate()
            .filter(|(axis, y)| self.is_open(y, *axis))
            .map(|(_, y)| y)
            .collect())
    }

    /// `{y : x -> y}`.
    fn open_out_neighbors(&self, x: &Vertex) -> Result<Vec<Vertex>> {
        check_dim(self.dim(), x.dim())?;
        Ok((0..self.dim())
            .filter(|&axis| self.is_open(x, axis))
            .map(|axis| x.step_forward(axis))
            .collect())
    }

    fn edge_state(&self, e: &DirectedEdge) -> Result<bool> {
        check_dim(self.dim(), e.dim())?;
        Ok(self.is_open(&e.tail, e.axis))
    }
}

/// One realization `omega` of the edge field, evaluated lazily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentSpec", into = "EnvironmentSpec")]
pub struct QuenchedEnvironment {
    params: ModelParams,
    env_seed: u64,
    origin_offset: Vertex,
}

impl QuenchedEnvironment {
    pub fn new(params: ModelParams, env_seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: ModelParams {
                lambda: None,
                ..params
            },
            env_seed,
            origin_offset: Vertex::origin(params.d),
        })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn env_seed(&self) -> u64 {
        self.env_seed
    }

    pub fn origin_offset(&self) -> Vertex {
        self.origin_offset
    }

    /// The shifted field `[T_x omega](e) = omega(x + e)`.
    pub fn translate(&self, x: &Vertex) -> Result<Self> {
        Ok(Self {
            origin_offset: self.origin_offset.checked_add(x)?,
            ..self.clone()
        })
    }

    /// Number of open oriented paths of length `n` ending at the origin,
    /// by exhaustive backward enumeration.
    pub fn count_open_paths_to_origin(&self, n: usize) -> Result<u64> {
        count_open_paths_to_origin(self, n)
    }
}

impl Environment for QuenchedEnvironment {
    fn dim(&self) -> usize {
        self.params.d
    }

    #[inline]
    fn is_open(&self, tail: &Vertex, axis: usize) -> bool {
        debug_assert_eq!(tail.dim(), self.params.d);
        let shifted = tail.add(&self.origin_offset);
        let u = hash_vertex(self.env_seed, domain::EDGE, &shifted, &[axis as u64]);
        unit_interval(u) < self.params.p
    }
}

/// Serialized form `{d, p, env_seed, origin_offset}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub d: usize,
    pub p: f64,
    pub env_seed: u64,
    #[serde(default)]
    pub origin_offset: Option<Vertex>,
}

impl TryFrom<EnvironmentSpec> for QuenchedEnvironment {
    type Error = Error;

    fn try_from(spec: EnvironmentSpec) -> Result<Self> {
        let env = QuenchedEnvironment::new(ModelParams::geometric(spec.d, spec.p)?, spec.env_seed)?;
        match spec.origin_offset {
            Some(offset) => env.translate(&offset),
            None => Ok(env),
        }
    }
}

impl From<QuenchedEnvironment> for EnvironmentSpec {
    fn from(env: QuenchedEnvironment) -> Self {
        Self {
            d: env.params.d,
            p: env.params.p,
            env_seed: env.env_seed,
            origin_offset: Some(env.origin_offset),
        }
    }
}

/// Every edge open, or every edge closed.
#[derive(Debug, Clone, Copy)]
pub struct UniformEnvironment {
    pub d: usize,
    pub open: bool,
}

impl Environment for UniformEnvironment {
    fn dim(&self) -> usize {
        self.d
    }

    fn is_open(&self, _tail: &Vertex, _axis: usize) -> bool {
        self.open
    }
}

/// Open exactly on a listed set of edges.
#[derive(Debug, Clone, Default)]
pub struct EdgeSetEnvironment {
    d: usize,
    open: HashSet<(Vertex, usize)>,
}

impl EdgeSetEnvironment {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            open: HashSet::new(),
        }
    }

    pub fn open_edge(&mut self, tail: Vertex, axis: usize) -> Result<()> {
        check_dim(self.d, tail.dim())?;
        DirectedEdge::new(tail, axis)?;
        self.open.insert((tail, axis));
        Ok(())
    }

    pub fn with_edges(d: usize, edges: impl IntoIterator<Item = (Vertex, usize)>) -> Result<Self> {
        let mut env = Self::new(d);
        for (tail, axis) in edges {
            env.open_edge(tail, axis)?;
        }
        Ok(env)
    }
}

impl Environment for EdgeSetEnvironment {
    fn dim(&self) -> usize {
        self.d
    }

    fn is_open(&self, tail: &Vertex, axis: usize) -> bool {
        self.open.contains(&(*tail, axis))
    }
}

/// Fails with [`Error::BudgetExceeded`] when `d^n` exceeds the enumeration budget.
pub(crate) fn check_enumeration_budget(d: usize, n: usize) -> Result<()> {
    let required = (d as f64).powi(n as i32);
    if required > PATH_ENUMERATION_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            required,
            budget: PATH_ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Count length-`n` paths `x_0 -> ... -> x_n = 0` whose every edge is open.
/// `l_0 = 1`: the empty path.
pub fn count_open_paths_to_origin<E: Environment + ?Sized>(env: &E, n: usize) -> Result<u64> {
    let d = env.dim();
    check_enumeration_budget(d, n)?;
    fn walk<E: Environment + ?Sized>(env: &E, head: &Vertex, remaining: usize) -> u64 {
        if remaining == 0 {
            return 1;
        }
        (0..head.dim())
            .map(|axis| {
                let tail = head.step_backward(axis);
                if env.is_open(&tail, axis) {
                    walk(env, &tail, remaining - 1)
                } else {
                    0
                }
            })
            .sum()
    }
    Ok(walk(env, &Vertex::origin(d), n))
}
