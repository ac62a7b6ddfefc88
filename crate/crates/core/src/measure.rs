//! Discrete positive measures on R^d.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud with nonnegative weights and
//! arbitrary total mass. The null measure is the measure with empty support.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Center of the dilations `T_a(x) = a (x - x0) + x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint(Vec<f64>);

impl ReferencePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "reference point",
            });
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Dilation `T_a` applied to one point.
    pub fn dilate(&self, a: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.0)
            .map(|(&xi, &ci)| a * (xi - ci) + ci)
            .collect()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Weighted point cloud `Σ w_i δ_{x_i}` with `w_i ≥ 0`.
///
/// Points are stored row-major in a flat buffer. Zero-weight atoms are kept;
/// use [`DiscreteMeasure::pruned`] to strip them.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from a list of points. An empty list gives the null
    /// measure with dimension 0, which is compatible with every dimension.
    pub fn new(points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        Self::from_flat(dim, flat, weights.to_vec())
    }

    /// Builds a measure from a row-major coordinate buffer.
    pub fn from_flat(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if points.len() != n * dim {
            return Err(Error::LengthMismatch {
                points: if dim == 0 { points.len() } else { points.len() / dim },
                weights: n,
            });
        }
        if dim == 0 && n > 0 {
            return Err(invalid("dim", "atoms need at least one coordinate"));
        }
        if points.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { what: "points" });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { what: "weights" });
            }
            if value < 0.0 {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    /// The null measure `0_M` in dimension `dim`.
    pub fn null(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// `mass · δ_x`.
    pub fn dirac(x: &[f64], mass: f64) -> Result<Self> {
        Self::from_flat(x.len(), x.to_vec(), vec![mass])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms, zero-weight atoms included.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when the total mass is zero (empty support or all-zero weights).
    pub fn is_null(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// `μ̄ = μ / m_μ`, or `δ_{x0}` for the null measure.
    pub fn normalize(&self, x0: &ReferencePoint) -> Self {
        let m = self.mass();
        if m > 0.0 {
            self.scaled_unchecked(1.0 / m)
        } else {
            Self {
                dim: x0.dim(),
                points: x0.coords().to_vec(),
                weights: vec![1.0],
            }
        }
    }

    /// Pushforward by the dilation `T_a`.
    pub fn dilate(&self, a: f64, x0: &ReferencePoint) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(invalid("a", format!("dilation factor must be >= 0, got {a}")));
        }
        if self.is_empty() {
            return Ok(self.clone());
        }
        x0.check_dim(self.dim)?;
        let c = x0.coords();
        let points = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(c).map(|(&xi, &ci)| a * (xi - ci) + ci))
            .collect();
        Ok(Self {
            dim: self.dim,
            points,
            weights: self.weights.clone(),
        })
    }

    /// Multiplies every weight by `a ≥ 0`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(invalid("a", format!("scale must be finite and >= 0, got {a}")));
        }
        Ok(self.scaled_unchecked(a))
    }

    pub(crate) fn scaled_unchecked(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w * a).collect(),
        }
    }

    /// Second moment `M_{x0}(μ) = Σ w_i |x_i - x0|²`.
    pub fn moment2(&self, x0: &ReferencePoint) -> f64 {
        self.moment_p(x0, 2.0)
    }

    /// `Σ w_i |x_i - x0|^p`.
    pub fn moment_p(&self, x0: &ReferencePoint, p: f64) -> f64 {
        self.points()
            .zip(&self.weights)
            .map(|(x, &w)| {
                let d2 = sq_dist(x, x0.coords());
                if p == 2.0 {
                    w * d2
                } else {
                    w * d2.sqrt().powf(p)
                }
            })
            .sum()
    }

    /// Membership in `M_K`: `M_{x0}(μ) ≤ K m_μ`.
    pub fn in_mk(&self, k: f64, x0: &ReferencePoint) -> Result<bool> {
        if !(k > 0.0) {
            return Err(invalid("K", format!("must be > 0, got {k}")));
        }
        Ok(self.moment2(x0) <= k * self.mass())
    }

    /// Drops zero-weight atoms.
    pub fn pruned(&self) -> Self {
        let mut points = Vec::with_capacity(self.points.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        for (x, &w) in self.points().zip(&self.weights) {
            if w > 0.0 {
                points.extend_from_slice(x);
                weights.push(w);
            }
        }
        Self {
            dim: self.dim,
            points,
            weights,
        }
    }

    /// Indices of the atoms with positive weight.
    pub(crate) fn positive_atoms(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Merges atoms at identical locations, drops zero weights and sorts the
    /// support lexicographically. Two measures are equal iff their canonical
    /// forms are equal.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = self.positive_atoms();
        order.sort_by(|&i, &j| lex_cmp(self.point(i), self.point(j)));
        let mut points: Vec<f64> = Vec::with_capacity(order.len() * self.dim);
        let mut weights: Vec<f64> = Vec::with_capacity(order.len());
        for i in order {
            let x = self.point(i);
            let n = weights.len();
            if n > 0 && &points[(n - 1) * self.dim..] == x {
                weights[n - 1] += self.weights[i];
            } else {
                points.extend_from_slice(x);
                weights.push(self.weights[i]);
            }
        }
        Self {
            dim: self.dim,
            points,
            weights,
        }
    }

    /// Replaces the declared dimension of a null measure.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if !self.is_empty() && self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        self.dim = dim;
        Ok(self)
    }

    /// Barycenter `Σ w̄_i x_i` of the normalized measure. `None` for null measures.
    pub fn mean(&self) -> Option<Vec<f64>> {
        let m = self.mass();
        if !(m > 0.0) {
            return None;
        }
        let mut mean = vec![0.0; self.dim];
        for (x, &w) in self.points().zip(&self.weights) {
            for (acc, &xi) in mean.iter_mut().zip(x) {
                *acc += w * xi;
            }
        }
        mean.iter_mut().for_each(|c| *c /= m);
        Some(mean)
    }
}

/// Resolves the common dimension of two measures and a reference point. Empty
/// measures adapt to the other operand.
pub(crate) fn common_dim(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<usize> {
    let dim = x0.dim();
    for m in [mu, nu] {
        if !m.is_empty() && m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
    }
    Ok(dim)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}
