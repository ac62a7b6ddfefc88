//! WOP geodesics and the dynamic action of discrete paths.
//!
//! The geodesic between `μ0` and `μ1` is `μ_t = m_t · μ̂_{λ_t}` with
//! `m_t = (1−t) m0 + t m1`, `λ_t = t m1 / m_t` and `μ̂` the displacement
//! interpolation between `μ̄0` and `μ̄1` along an exact optimal coupling.

use crate::error::{invalid, Error, Result};
use crate::measure::{common_dim, DiscreteMeasure, ReferencePoint};
use crate::metric::wop_distance;
use crate::transport::{self, Coupling};

/// Tolerance used by [`dynamic_action`] when checking path consistency.
pub const PATH_TOLERANCE: f64 = 1e-6;

/// `λ_t = t m1 / ((1−t) m0 + t m1)`.
pub fn lambda_reparam(t: f64, m0: f64, m1: f64) -> Result<f64> {
    check_time(t)?;
    if !(m0 >= 0.0) || !(m1 >= 0.0) {
        return Err(invalid("mass", "masses must be >= 0"));
    }
    let denom = (1.0 - t) * m0 + t * m1;
    if denom == 0.0 {
        return Err(invalid("t", format!("(1-t) m0 + t m1 vanishes at t = {t}")));
    }
    Ok((t * m1 / denom).clamp(0.0, 1.0))
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid("t", format!("must lie in [0, 1], got {t}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GeodesicSample {
    pub t: f64,
    pub measure: DiscreteMeasure,
    pub mass: f64,
    pub lambda: f64,
}

/// A geodesic with its optimal coupling computed once; samples at any `t` are
/// cheap.
#[derive(Debug, Clone)]
pub struct Geodesic {
    start: DiscreteMeasure,
    end: DiscreteMeasure,
    m0: f64,
    m1: f64,
    dim: usize,
    /// `(x_i, y_j, π_ij)` for each positive coupling entry between the
    /// normalized endpoints.
    pairs: Vec<(Vec<f64>, Vec<f64>, f64)>,
    null_path: bool,
}

impl Geodesic {
    pub fn new(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, x0: &ReferencePoint) -> Result<Self> {
        let dim = common_dim(mu0, mu1, x0)?;
        let (m0, m1) = (mu0.mass(), mu1.mass());
        let null_path = !(m0 > 0.0) && !(m1 > 0.0);
        let mut pairs = Vec::new();
        if !null_path {
            let (a, b) = (mu0.normalize(x0), mu1.normalize(x0));
            let sol = transport::solve_w2_exact(&a, &b)?;
            pairs = sol
                .coupling
                .nonzeros()
                .map(|(i, j, w)| (a.point(i).to_vec(), b.point(j).to_vec(), w))
                .collect();
        }
        Ok(Self {
            start: mu0.clone(),
            end: mu1.clone(),
            m0,
            m1,
            dim,
            pairs,
            null_path,
        })
    }

    /// True when both endpoints are null; every sample is then the null
    /// measure.
    pub fn is_null_path(&self) -> bool {
        self.null_path
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.m0, self.m1)
    }

    pub fn mass_at(&self, t: f64) -> f64 {
        (1.0 - t) * self.m0 + t * self.m1
    }

    /// Time change at `t`, extended by continuity where `m_t` vanishes.
    pub fn lambda_at(&self, t: f64) -> f64 {
        if self.null_path {
            return t;
        }
        lambda_reparam(t, self.m0, self.m1).unwrap_or(if self.m0 > 0.0 { 0.0 } else { 1.0 })
    }

    /// Number of atoms of every interior sample.
    pub fn atom_count(&self) -> usize {
        self.pairs.len()
    }

    /// Interior representation `Σ m_t π_ij δ_{(1−λ)x_i + λ y_j}`, used at
    /// every `t` including the endpoints.
    pub fn interpolant(&self, t: f64) -> Result<DiscreteMeasure> {
        check_time(t)?;
        if self.null_path {
            return Ok(DiscreteMeasure::null(self.dim));
        }
        let lambda = self.lambda_at(t);
        let mass = self.mass_at(t);
        let mut points = Vec::with_capacity(self.pairs.len() * self.dim);
        let mut weights = Vec::with_capacity(self.pairs.len());
        for (x, y, w) in &self.pairs {
            points.extend(x.iter().zip(y).map(|(a, b)| (1.0 - lambda) * a + lambda * b));
            weights.push(mass * w);
        }
        DiscreteMeasure::from_flat(self.dim, points, weights)
    }

    /// `μ_t`. The endpoints are returned unchanged; a vanishing mass gives
    /// the null measure.
    pub fn sample(&self, t: f64) -> Result<GeodesicSample> {
        check_time(t)?;
        let mass = self.mass_at(t);
        let lambda = self.lambda_at(t);
        let measure = if t == 0.0 {
            self.start.clone()
        } else if t == 1.0 {
            self.end.clone()
        } else if !(mass > 0.0) {
            DiscreteMeasure::null(self.dim)
        } else {
            self.interpolant(t)?
        };
        Ok(GeodesicSample {
            t,
            measure,
            mass,
            lambda,
        })
    }

    pub fn samples(&self, times: &[f64]) -> Result<Vec<GeodesicSample>> {
        times.iter().map(|&t| self.sample(t)).collect()
    }
}

/// Single geodesic sample `μ_t` between `μ0` and `μ1`.
pub fn geodesic(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    t: f64,
    x0: &ReferencePoint,
) -> Result<GeodesicSample> {
    check_time(t)?;
    Geodesic::new(mu0, mu1, x0)?.sample(t)
}

/// Uniform grid `0, 1/K, …, 1`.
pub fn uniform_times(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// Discrete path `(μ_k, u_k, m′_k)` on a time grid.
///
/// Atoms correspond across times. Controls are piecewise constant:
/// `velocities[k]` and `mass_rates[k]` act on `[t_k, t_{k+1}]`.
#[derive(Debug, Clone)]
pub struct SourcedPath {
    pub times: Vec<f64>,
    pub measures: Vec<DiscreteMeasure>,
    /// Row-major per-atom velocities, one buffer per interval.
    pub velocities: Vec<Vec<f64>>,
    pub mass_rates: Vec<f64>,
}

impl SourcedPath {
    /// Checks the grid and the shapes; consistency of the controls is checked
    /// by [`SourcedPath::check_consistency`].
    pub fn new(
        times: Vec<f64>,
        measures: Vec<DiscreteMeasure>,
        velocities: Vec<Vec<f64>>,
        mass_rates: Vec<f64>,
    ) -> Result<Self> {
        let k = times.len();
        if k < 2 {
            return Err(invalid("times", "need at least two time points"));
        }
        if times[0] != 0.0 || times[k - 1] != 1.0 {
            return Err(invalid("times", "grid must start at 0 and end at 1"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times", "grid must be strictly increasing"));
        }
        if measures.len() != k || velocities.len() != k - 1 || mass_rates.len() != k - 1 {
            return Err(invalid(
                "path",
                "need one measure per time and one control per interval",
            ));
        }
        let (n, dim) = (measures[0].len(), measures[0].dim());
        for (step, m) in measures.iter().enumerate() {
            if m.len() != n || m.dim() != dim {
                return Err(Error::InconsistentPath {
                    step,
                    reason: "atom count or dimension changes along the path".into(),
                });
            }
        }
        for (step, u) in velocities.iter().enumerate() {
            if u.len() != n * dim {
                return Err(Error::InconsistentPath {
                    step,
                    reason: format!("velocity has {} entries, expected {}", u.len(), n * dim),
                });
            }
        }
        if velocities.iter().flatten().chain(&mass_rates).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "controls" });
        }
        Ok(Self {
            times,
            measures,
            velocities,
            mass_rates,
        })
    }

    /// Path whose controls are the finite differences of consecutive states.
    pub fn from_states(times: Vec<f64>, measures: Vec<DiscreteMeasure>) -> Result<Self> {
        if times.len() != measures.len() || times.len() < 2 {
            return Err(invalid("path", "need matching times and measures"));
        }
        let n = measures[0].len() * measures[0].dim();
        let mut velocities = Vec::with_capacity(times.len() - 1);
        let mut mass_rates = Vec::with_capacity(times.len() - 1);
        for k in 0..times.len() - 1 {
            let dt = times[k + 1] - times[k];
            let (a, b) = (&measures[k], &measures[k + 1]);
            if b.flat_points().len() != n || a.flat_points().len() != n {
                return Err(Error::InconsistentPath {
                    step: k,
                    reason: "atom count changes along the path".into(),
                });
            }
            velocities.push(
                a.flat_points()
                    .iter()
                    .zip(b.flat_points())
                    .map(|(x, y)| (y - x) / dt)
                    .collect(),
            );
            mass_rates.push((b.mass() - a.mass()) / dt);
        }
        Self::new(times, measures, velocities, mass_rates)
    }

    /// Samples a geodesic on `times` using the coupling representation at
    /// every node, so atoms correspond across the whole path.
    pub fn from_geodesic(g: &Geodesic, times: Vec<f64>) -> Result<Self> {
        let measures = times
            .iter()
            .map(|&t| g.interpolant(t))
            .collect::<Result<Vec<_>>>()?;
        let mut path = Self::from_states(times, measures)?;
        // The mass rate is exactly m1 − m0.
        let rate = g.m1 - g.m0;
        path.mass_rates.iter_mut().for_each(|r| *r = rate);
        Ok(path)
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Normalized weights at node `k`, borrowed from a neighbour when the
    /// mass vanishes there.
    fn normalized_weights(&self, k: usize) -> Vec<f64> {
        let order = std::iter::once(k).chain((0..self.measures.len()).filter(move |&j| j != k));
        for j in order {
            let m = self.measures[j].mass();
            if m > 0.0 {
                return self.measures[j].weights().iter().map(|w| w / m).collect();
            }
        }
        vec![0.0; self.measures[k].len()]
    }

    /// Verifies `x_{k+1} = x_k + u_k Δt`, `m_{k+1} = m_k + m′_k Δt` and that
    /// normalized weights stay fixed, each within `tol`.
    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        for k in 0..self.steps() {
            let dt = self.times[k + 1] - self.times[k];
            let (a, b) = (&self.measures[k], &self.measures[k + 1]);
            let scale = 1.0 + a.flat_points().iter().fold(0.0f64, |s, x| s.max(x.abs()));
            for ((x, y), u) in a.flat_points().iter().zip(b.flat_points()).zip(&self.velocities[k]) {
                let err = (x + u * dt - y).abs();
                if err > tol * scale {
                    return Err(Error::InconsistentPath {
                        step: k,
                        reason: format!("atom displacement off by {err:e}"),
                    });
                }
            }
            let err = (a.mass() + self.mass_rates[k] * dt - b.mass()).abs();
            if err > tol * (1.0 + a.mass()) {
                return Err(Error::InconsistentPath {
                    step: k,
                    reason: format!("mass change off by {err:e}"),
                });
            }
            if a.mass() > 0.0 && b.mass() > 0.0 {
                let (wa, wb) = (self.normalized_weights(k), self.normalized_weights(k + 1));
                let err = wa.iter().zip(&wb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                if err > tol {
                    return Err(Error::InconsistentPath {
                        step: k,
                        reason: format!("source term not proportional to the measure ({err:e})"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `|m′|² + Σ w̄_i |m u_i + m′ (x_i − x0)|²` at one state.
fn lagrangian(mu: &DiscreteMeasure, wbar: &[f64], u: &[f64], m_prime: f64, x0: &ReferencePoint) -> f64 {
    let m = mu.mass();
    let dim = mu.dim();
    let c = x0.coords();
    let mut kinetic = 0.0;
    for (i, w) in wbar.iter().enumerate() {
        let x = mu.point(i);
        let v = &u[i * dim..(i + 1) * dim];
        let s: f64 = (0..dim)
            .map(|d| {
                let z = m * v[d] + m_prime * (x[d] - c[d]);
                z * z
            })
            .sum();
        kinetic += w * s;
    }
    m_prime * m_prime + kinetic
}

/// Trapezoidal approximation of the action
/// `∫₀¹ |m′|² + Σ w̄_i |m u_i + m′ (x_i − x0)|² dt` of a consistent path.
///
/// On each interval the control is held fixed and the state is evaluated at
/// both ends. The error on a geodesic is `O(Δt²)`.
pub fn dynamic_action(path: &SourcedPath, x0: &ReferencePoint) -> Result<f64> {
    path.check_consistency(PATH_TOLERANCE)?;
    if !path.measures[0].is_empty() {
        x0.check_dim(path.measures[0].dim())?;
    }
    let mut total = 0.0;
    let mut w_next = path.normalized_weights(0);
    for k in 0..path.steps() {
        let dt = path.times[k + 1] - path.times[k];
        let w_here = w_next;
        w_next = path.normalized_weights(k + 1);
        let (u, r) = (&path.velocities[k], path.mass_rates[k]);
        let left = lagrangian(&path.measures[k], &w_here, u, r, x0);
        let right = lagrangian(&path.measures[k + 1], &w_next, u, r, x0);
        total += 0.5 * dt * (left + right);
    }
    Ok(total)
}

/// `WOP²(μ_t, η) − [(1−t) WOP²(μ0, η) + t WOP²(μ1, η) − t(1−t) WOP²(μ0, μ1)]`.
/// Nonnegative for a space of nonnegative curvature.
pub fn curvature_gap(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    eta: &DiscreteMeasure,
    t: f64,
    x0: &ReferencePoint,
) -> Result<f64> {
    let mt = geodesic(mu0, mu1, t, x0)?.measure;
    let d = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<f64> {
        Ok(wop_distance(a, b, x0)?.squared())
    };
    Ok(d(&mt, eta)? - ((1.0 - t) * d(mu0, eta)? + t * d(mu1, eta)? - t * (1.0 - t) * d(mu0, mu1)?))
}

/// Raw coupling between the normalized endpoints, for callers that need it.
pub fn endpoint_coupling(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<Coupling> {
    common_dim(mu0, mu1, x0)?;
    Ok(transport::solve_w2_exact(&mu0.normalize(x0), &mu1.normalize(x0))?.coupling)
}
