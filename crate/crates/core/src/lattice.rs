//! Lattice geometry: model parameters, vertices of Z^d and the forward
//! directed edges `x -> x + e_i`.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice dimension a [`Vertex`] can hold.
pub const MAX_DIM: usize = 16;

/// Dimension, open probability and (optionally) infection rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl ModelParams {
    /// Parameters for purely geometric operations (no infection rate).
    pub fn geometric(d: usize, p: f64) -> Result<Self> {
        let params = Self { d, p, lambda: None };
        params.validate()?;
        Ok(params)
    }

    pub fn new(d: usize, p: f64, lambda: f64) -> Result<Self> {
        let params = Self {
            d,
            p,
            lambda: Some(lambda),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.d, self.p, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "dimension d = {} must lie in [1, {MAX_DIM}]",
                self.d
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "open probability p = {} must lie in (0, 1)",
                self.p
            )));
        }
        if let Some(lambda) = self.lambda {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "infection rate lambda = {lambda} must be positive and finite"
                )));
            }
        }
        Ok(())
    }

    pub fn require_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| {
            Error::InvalidParameter("this operation needs an infection rate".to_string())
        })
    }

    /// Mean number of open out-edges of a vertex, `d * p`.
    pub fn mean_degree(&self) -> f64 {
        self.d as f64 * self.p
    }
}

/// A point of Z^d, stored inline.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct Vertex {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Vertex {
    pub fn origin(d: usize) -> Self {
        assert!(d <= MAX_DIM, "dimension {d} exceeds MAX_DIM");
        Self {
            dim: d as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn from_coords(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "vertex dimension {} must lie in [1, {MAX_DIM}]",
                coords.len()
            )));
        }
        let mut v = Self::origin(coords.len());
        v.coords[..coords.len()].copy_from_slice(coords);
        Ok(v)
    }

    /// `k * e_axis` in dimension `d`.
    pub fn axis_multiple(d: usize, axis: usize, k: i32) -> Self {
        let mut v = Self::origin(d);
        v.coords[axis] = k;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn step_forward(&self, axis: usize) -> Self {
        let mut v = *self;
        v.coords[axis] += 1;
        v
    }

    #[inline]
    pub fn step_backward(&self, axis: usize) -> Self {
        let mut v = *self;
        v.coords[axis] -= 1;
        v
    }

    pub fn checked_add(&self, other: &Vertex) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.add(other))
    }

    #[inline]
    pub(crate) fn add(&self, other: &Vertex) -> Self {
        let mut v = *self;
        for (a, b) in v.coords.iter_mut().zip(other.coords.iter()) {
            *a += *b;
        }
        v
    }

    pub fn neg(&self) -> Self {
        let mut v = *self;
        for a in v.coords.iter_mut() {
            *a = -*a;
        }
        v
    }

    /// Sum of coordinates; every forward step raises it by one.
    pub fn level(&self) -> i64 {
        self.coords().iter().map(|&c| c as i64).sum()
    }

    /// True if every coordinate lies in `[-radius, radius]`.
    #[inline]
    pub fn in_box(&self, radius: i32) -> bool {
        self.coords().iter().all(|&c| (-radius..=radius).contains(&c))
    }

    /// Coordinatewise `self <= other`.
    pub fn dominated_by(&self, other: &Vertex) -> bool {
        self.coords()
            .iter()
            .zip(other.coords())
            .all(|(a, b)| a <= b)
    }

    pub fn is_origin(&self) -> bool {
        self.coords().iter().all(|&c| c == 0)
    }
}

impl Hash for Vertex {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u8(self.dim);
        for &c in self.coords() {
            state.write_i32(c);
        }
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl TryFrom<Vec<i32>> for Vertex {
    type Error = Error;

    fn try_from(value: Vec<i32>) -> Result<Self> {
        Vertex::from_coords(&value)
    }
}

impl From<Vertex> for Vec<i32> {
    fn from(v: Vertex) -> Self {
        v.coords().to_vec()
    }
}

/// The edge `tail -> tail + e_axis`. Axes are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub tail: Vertex,
    pub axis: usize,
}

impl DirectedEdge {
    pub fn new(tail: Vertex, axis: usize) -> Result<Self> {
        if axis >= tail.dim() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for dimension {}",
                tail.dim()
            )));
        }
        Ok(Self { tail, axis })
    }

    pub fn head(&self) -> Vertex {
        self.tail.step_forward(self.axis)
    }

    pub fn dim(&self) -> usize {
        self.tail.dim()
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Enumerate every vertex of `[lo, hi]^d`.
pub fn cube_vertices(d: usize, lo: i32, hi: i32) -> Vec<Vertex> {
    let lo_v = Vertex::from_coords(&vec![lo; d]).expect("valid dimension");
    let hi_v = Vertex::from_coords(&vec![hi; d]).expect("valid dimension");
    rectangle_vertices(&lo_v, &hi_v)
}

/// Enumerate every vertex `v` with `lo <= v <= hi` coordinatewise.
pub fn rectangle_vertices(lo: &Vertex, hi: &Vertex) -> Vec<Vertex> {
    let d = lo.dim();
    assert_eq!(d, hi.dim());
    if lo.coords().iter().zip(hi.coords()).any(|(a, b)| b < a) {
        return Vec::new();
    }
    let total: usize = lo
        .coords()
        .iter()
        .zip(hi.coords())
        .map(|(a, b)| (b - a + 1) as usize)
        .product();
    let mut out = Vec::with_capacity(total);
    let mut cur = *lo;
    for _ in 0..total {
        out.push(cur);
        for axis in 0..d {
            if cur.coords[axis] < hi.coords[axis] {
                cur.coords[axis] += 1;
                break;
            }
            cur.coords[axis] = lo.coords[axis];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::geometric(0, 0.5).is_err());
        assert!(ModelParams::geometric(2, 1.0).is_err());
        assert!(ModelParams::geometric(2, 0.0).is_err());
        assert!(ModelParams::new(2, 0.5, -1.0).is_err());
        assert!(ModelParams::new(2, 0.5, 1.0).is_ok());
        assert!(ModelParams::geometric(3, 0.5).unwrap().require_lambda().is_err());
    }

    #[test]
    fn vertex_steps_and_level() {
        let v = Vertex::from_coords(&[1, -2, 3]).unwrap();
        assert_eq!(v.level(), 2);
        assert_eq!(v.step_forward(1).coords(), &[1, -1, 3]);
        assert_eq!(v.step_backward(0).coords(), &[0, -2, 3]);
        assert_eq!(v.add(&v.neg()), Vertex::origin(3));
        assert!(v.in_box(3));
        assert!(!v.in_box(2));
    }

    #[test]
    fn vertex_serde_is_a_plain_list() {
        let v = Vertex::from_coords(&[4, -1]).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "[4,-1]");
        let back: Vertex = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vertex>("[]").is_err());
    }

    #[test]
    fn edge_axis_is_checked() {
        let o = Vertex::origin(2);
        assert!(DirectedEdge::new(o, 2).is_err());
        assert_eq!(DirectedEdge::new(o, 1).unwrap().head().coords(), &[0, 1]);
    }

    #[test]
    fn cube_enumeration() {
        let cube = cube_vertices(2, -1, 1);
        assert_eq!(cube.len(), 9);
        let set: std::collections::HashSet<_> = cube.iter().collect();
        assert_eq!(set.len(), 9);
        assert!(cube.iter().all(|v| v.in_box(1)));
    }
}
