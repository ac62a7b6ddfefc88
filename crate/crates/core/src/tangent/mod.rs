//! Tangent vectors, the WOP Riemannian structure and gradient flows.
//!
//! A tangent vector at `μ` is a pair `(u, m′)`: a velocity per atom and a
//! scalar mass rate. The metric is
//! `⟨v1, v2⟩_μ = m′1 m′2 + Σ w̄_i ⟨m u1_i + m′1 (x_i − x0), m u2_i + m′2 (x_i − x0)⟩`.

mod flow;
mod functional;
mod heat;

pub use flow::{flow_particles, FlowPath};
pub use functional::{
    extend_functional, gradient_consistency, Extended, FirstVariationOracle, Functional,
    HalfSquaredNorm, MomentEnergy, PotentialEnergy, ProbabilityFunctional, QuadraticInteraction,
    TotalMass,
};
pub use heat::{boltzmann_entropy, extended_entropy, heat_flow_grid, GridDensity, GridPath};

use crate::error::{invalid, Error, Result};
use crate::measure::{DiscreteMeasure, ReferencePoint};

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    /// Row-major per-atom velocities.
    pub u: Vec<f64>,
    pub m_prime: f64,
}

impl TangentVector {
    pub fn new(u: Vec<f64>, m_prime: f64) -> Result<Self> {
        if u.iter().any(|x| !x.is_finite()) || !m_prime.is_finite() {
            return Err(Error::NonFinite {
                what: "tangent vector",
            });
        }
        Ok(Self { u, m_prime })
    }

    pub fn zero(mu: &DiscreteMeasure) -> Self {
        Self {
            u: vec![0.0; mu.len() * mu.dim()],
            m_prime: 0.0,
        }
    }

    pub fn velocity(&self, i: usize, dim: usize) -> &[f64] {
        &self.u[i * dim..(i + 1) * dim]
    }

    fn check_base(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.u.len() != mu.len() * mu.dim() {
            return Err(invalid(
                "tangent vector",
                format!(
                    "has {} velocity entries, base measure needs {}",
                    self.u.len(),
                    mu.len() * mu.dim()
                ),
            ));
        }
        Ok(())
    }
}

fn check_base_measure(mu: &DiscreteMeasure, x0: &ReferencePoint) -> Result<f64> {
    let m = mu.mass();
    if !(m > 0.0) {
        return Err(Error::NullMeasure("tangent space needs a positive base measure"));
    }
    x0.check_dim(mu.dim())?;
    Ok(m)
}

/// Lifted velocity `m u_i + m′ (x_i − x0)` of atom `i`.
fn lifted_velocity(v: &TangentVector, mu: &DiscreteMeasure, m: f64, x0: &[f64], i: usize) -> Vec<f64> {
    let x = mu.point(i);
    v.velocity(i, mu.dim())
        .iter()
        .zip(x)
        .zip(x0)
        .map(|((u, xi), c)| m * u + v.m_prime * (xi - c))
        .collect()
}

/// WOP scalar product of two tangent vectors at `μ`.
pub fn inner_product(
    v1: &TangentVector,
    v2: &TangentVector,
    mu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<f64> {
    let m = check_base_measure(mu, x0)?;
    v1.check_base(mu)?;
    v2.check_base(mu)?;
    let mut s = v1.m_prime * v2.m_prime;
    for (i, w) in mu.weights().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let a = lifted_velocity(v1, mu, m, x0.coords(), i);
        let b = lifted_velocity(v2, mu, m, x0.coords(), i);
        s += (w / m) * a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>();
    }
    Ok(s)
}

/// WOP gradient `(u_F, m′_F)` of `F` at `μ`:
/// `m′_F = Σ w̄ δF − Σ w̄ ⟨∇δF, x − x0⟩` and
/// `u_F = (∇δF − m′_F (x − x0)) / m`.
pub fn wop_gradient<F: Functional + ?Sized>(
    f: &F,
    mu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<TangentVector> {
    let m = check_base_measure(mu, x0)?;
    if !f.growth_certified() {
        return Err(invalid(
            "functional",
            "gradient requires a linear-growth certificate",
        ));
    }
    let c = x0.coords();
    let grads: Vec<Vec<f64>> = mu.points().map(|x| f.first_variation_grad(mu, x)).collect();
    let mut m_prime = 0.0;
    for ((x, g), w) in mu.points().zip(&grads).zip(mu.weights()) {
        if *w == 0.0 {
            continue;
        }
        let radial: f64 = g.iter().zip(x).zip(c).map(|((gi, xi), ci)| gi * (xi - ci)).sum();
        m_prime += (w / m) * (f.first_variation(mu, x) - radial);
    }
    let mut u = Vec::with_capacity(mu.len() * mu.dim());
    for (x, g) in mu.points().zip(&grads) {
        u.extend(
            g.iter()
                .zip(x)
                .zip(c)
                .map(|((gi, xi), ci)| (gi - m_prime * (xi - ci)) / m),
        );
    }
    TangentVector::new(u, m_prime)
}

/// Moves `μ` along `v` for time `dt`: atoms `x + dt u`, mass `m + dt m′` with
/// weights rescaled uniformly.
pub fn step_along(mu: &DiscreteMeasure, v: &TangentVector, dt: f64) -> Result<DiscreteMeasure> {
    v.check_base(mu)?;
    let m = mu.mass();
    let new_mass = m + dt * v.m_prime;
    if !(new_mass > 0.0) {
        return Err(invalid("dt", format!("step drives the mass to {new_mass}")));
    }
    let points = mu
        .flat_points()
        .iter()
        .zip(&v.u)
        .map(|(x, u)| x + dt * u)
        .collect();
    let weights = mu.weights().iter().map(|w| w * (new_mass / m)).collect();
    DiscreteMeasure::from_flat(mu.dim(), points, weights)
}

/// Forward difference `(F(μ_dt) − F(μ)) / dt` along `v` against
/// `⟨∇F(μ), v⟩_μ`. The two agree up to `O(dt)`.
pub fn directional_derivative_check<F: Functional + ?Sized>(
    f: &F,
    mu: &DiscreteMeasure,
    v: &TangentVector,
    x0: &ReferencePoint,
    dt: f64,
) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be > 0"));
    }
    let grad = wop_gradient(f, mu, x0)?;
    let rhs = inner_product(&grad, v, mu, x0)?;
    let moved = step_along(mu, v, dt)?;
    let lhs = (f.value(&moved) - f.value(mu)) / dt;
    Ok((lhs, rhs))
}

/// Sampled test of mass conservation: `|m′_F(μ)| ≤ tol` on every sample.
pub fn is_conservative<F: Functional + ?Sized>(
    f: &F,
    samples: &[DiscreteMeasure],
    x0: &ReferencePoint,
    tol: f64,
) -> Result<bool> {
    for mu in samples {
        if wop_gradient(f, mu, x0)?.m_prime.abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
