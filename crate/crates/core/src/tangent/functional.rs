//! Functionals on positive measures described by their first variation.

use crate::measure::{sq_dist, DiscreteMeasure, ReferencePoint};

/// A functional `F` on positive measures with first variation `δF/δμ` and its
/// spatial gradient.
///
/// `growth_certified` records the caller's assertion that
/// `|∇ δF/δμ (μ)(x)| ≲ 1 + |x|`; it is not verified.
pub trait Functional {
    fn value(&self, mu: &DiscreteMeasure) -> f64;

    fn first_variation(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64;

    fn first_variation_grad(&self, mu: &DiscreteMeasure, x: &[f64]) -> Vec<f64>;

    fn growth_certified(&self) -> bool {
        false
    }
}

type ValueFn = Box<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>;
type VariationFn = Box<dyn Fn(&DiscreteMeasure, &[f64]) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&DiscreteMeasure, &[f64]) -> Vec<f64> + Send + Sync>;

/// Functional assembled from closures.
pub struct FirstVariationOracle {
    value: ValueFn,
    value_at: VariationFn,
    grad_at: GradientFn,
    growth: bool,
}

impl FirstVariationOracle {
    pub fn new(
        value: impl Fn(&DiscreteMeasure) -> f64 + Send + Sync + 'static,
        value_at: impl Fn(&DiscreteMeasure, &[f64]) -> f64 + Send + Sync + 'static,
        grad_at: impl Fn(&DiscreteMeasure, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            value_at: Box::new(value_at),
            grad_at: Box::new(grad_at),
            growth: false,
        }
    }

    pub fn with_growth_certificate(mut self) -> Self {
        self.growth = true;
        self
    }
}

impl Functional for FirstVariationOracle {
    fn value(&self, mu: &DiscreteMeasure) -> f64 {
        (self.value)(mu)
    }

    fn first_variation(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
        (self.value_at)(mu, x)
    }

    fn first_variation_grad(&self, mu: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        (self.grad_at)(mu, x)
    }

    fn growth_certified(&self) -> bool {
        self.growth
    }
}

/// Largest relative mismatch between `∇ δF/δμ` and central differences of
/// `δF/δμ` with step `h`, over the given points.
pub fn gradient_consistency<F: Functional + ?Sized>(
    f: &F,
    mu: &DiscreteMeasure,
    points: &[Vec<f64>],
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for x in points {
        let g = f.first_variation_grad(mu, x);
        for d in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[d] += h;
            xm[d] -= h;
            let fd = (f.first_variation(mu, &xp) - f.first_variation(mu, &xm)) / (2.0 * h);
            worst = worst.max((fd - g[d]).abs() / (1.0 + g[d].abs()));
        }
    }
    worst
}

/// `F(μ) = m_μ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalMass;

impl Functional for TotalMass {
    fn value(&self, mu: &DiscreteMeasure) -> f64 {
        mu.mass()
    }

    fn first_variation(&self, _mu: &DiscreteMeasure, _x: &[f64]) -> f64 {
        1.0
    }

    fn first_variation_grad(&self, mu: &DiscreteMeasure, _x: &[f64]) -> Vec<f64> {
        vec![0.0; mu.dim()]
    }

    fn growth_certified(&self) -> bool {
        true
    }
}

/// `F(μ) = m_μ² (1 + M_{x0}(μ̄)) / 2 = (m_μ² + m_μ M_{x0}(μ)) / 2`, half the
/// squared distance to the null measure.
#[derive(Debug, Clone)]
pub struct HalfSquaredNorm {
    pub x0: ReferencePoint,
}

impl Functional for HalfSquaredNorm {
    fn value(&self, mu: &DiscreteMeasure) -> f64 {
        let m = mu.mass();
        0.5 * (m * m + m * mu.moment2(&self.x0))
    }

    fn first_variation(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
        let m = mu.mass();
        m + 0.5 * mu.moment2(&self.x0) + 0.5 * m * sq_dist(x, self.x0.coords())
    }

    fn first_variation_grad(&self, mu: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        let m = mu.mass();
        x.iter().zip(self.x0.coords()).map(|(a, c)| m * (a - c)).collect()
    }

    fn growth_certified(&self) -> bool {
        true
    }
}

/// `F(μ) = m_μ² M_{x0}(μ̄) / 2 = m_μ M_{x0}(μ) / 2`.
#[derive(Debug, Clone)]
pub struct MomentEnergy {
    pub x0: ReferencePoint,
}

impl Functional for MomentEnergy {
    fn value(&self, mu: &DiscreteMeasure) -> f64 {
        0.5 * mu.mass() * mu.moment2(&self.x0)
    }

    fn first_variation(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
        0.5 * mu.moment2(&self.x0) + 0.5 * mu.mass() * sq_dist(x, self.x0.coords())
    }

    fn first_variation_grad(&self, mu: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        let m = mu.mass();
        x.iter().zip(self.x0.coords()).map(|(a, c)| m * (a - c)).collect()
    }

    fn growth_certified(&self) -> bool {
        true
    }
}

/// A functional `G` on probability measures with first variation `g` and
/// gradient `∇g`.
pub trait ProbabilityFunctional {
    fn value(&self, p: &DiscreteMeasure) -> f64;

    fn first_variation(&self, p: &DiscreteMeasure, x: &[f64]) -> f64;

    fn first_variation_grad(&self, p: &DiscreteMeasure, x: &[f64]) -> Vec<f64>;

    fn growth_certified(&self) -> bool {
        false
    }
}

/// Potential energy `G(p) = Σ p_i V(x_i)`.
pub struct PotentialEnergy {
    potential: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    growth: bool,
}

impl PotentialEnergy {
    pub fn new(
        potential: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            potential: Box::new(potential),
            gradient: Box::new(gradient),
            growth: false,
        }
    }

    pub fn with_growth_certificate(mut self) -> Self {
        self.growth = true;
        self
    }

    /// `V(x) = |x − c|² / 2`.
    pub fn quadratic(center: Vec<f64>) -> Self {
        let c2 = center.clone();
        Self::new(
            move |x| 0.5 * sq_dist(x, &center),
            move |x| x.iter().zip(&c2).map(|(a, c)| a - c).collect(),
        )
        .with_growth_certificate()
    }
}

impl ProbabilityFunctional for PotentialEnergy {
    fn value(&self, p: &DiscreteMeasure) -> f64 {
        p.points()
            .zip(p.weights())
            .map(|(x, w)| w * (self.potential)(x))
            .sum()
    }

    fn first_variation(&self, _p: &DiscreteMeasure, x: &[f64]) -> f64 {
        (self.potential)(x)
    }

    fn first_variation_grad(&self, _p: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    fn growth_certified(&self) -> bool {
        self.growth
    }
}

/// Quadratic interaction energy `G(p) = ¼ Σ_ij p_i p_j |x_i − x_j|²`, whose
/// first variation is `g(x) = ½ Σ_j p_j |x − x_j|²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticInteraction;

impl ProbabilityFunctional for QuadraticInteraction {
    fn value(&self, p: &DiscreteMeasure) -> f64 {
        let mut s = 0.0;
        for (x, wx) in p.points().zip(p.weights()) {
            for (y, wy) in p.points().zip(p.weights()) {
                s += wx * wy * sq_dist(x, y);
            }
        }
        0.25 * s
    }

    fn first_variation(&self, p: &DiscreteMeasure, x: &[f64]) -> f64 {
        0.5 * p
            .points()
            .zip(p.weights())
            .map(|(y, w)| w * sq_dist(x, y))
            .sum::<f64>()
    }

    fn first_variation_grad(&self, p: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        let m = p.mass();
        let mean = p.mean().unwrap_or_else(|| x.to_vec());
        x.iter().zip(&mean).map(|(a, b)| m * (a - b)).collect()
    }

    fn growth_certified(&self) -> bool {
        true
    }
}

/// Extension `F̃(μ) = G(T_{m_μ}#μ̄)` of a probability functional to positive
/// measures. Its WOP gradient has zero mass component.
pub struct Extended<G> {
    pub inner: G,
    pub x0: ReferencePoint,
}

/// Builds the extension `F̃` of `G`.
pub fn extend_functional<G: ProbabilityFunctional>(inner: G, x0: ReferencePoint) -> Extended<G> {
    Extended { inner, x0 }
}

impl<G: ProbabilityFunctional> Extended<G> {
    fn lift(&self, mu: &DiscreteMeasure) -> DiscreteMeasure {
        mu.normalize(&self.x0)
            .dilate(mu.mass(), &self.x0)
            .expect("mass is a valid dilation factor")
    }

    /// `Σ w̄ ⟨∇g(T_m y), y − x0⟩ − Σ w̄ g(T_m y) / m`.
    fn constant(&self, mu: &DiscreteMeasure, lifted: &DiscreteMeasure) -> f64 {
        let m = mu.mass();
        let c = self.x0.coords();
        let mut s = 0.0;
        for ((y, ty), w) in mu.points().zip(lifted.points()).zip(lifted.weights()) {
            let g = self.inner.first_variation(lifted, ty);
            let grad = self.inner.first_variation_grad(lifted, ty);
            let dot: f64 = grad.iter().zip(y).zip(c).map(|((a, b), o)| a * (b - o)).sum();
            s += w * (dot - g / m);
        }
        s
    }
}

impl<G: ProbabilityFunctional> Functional for Extended<G> {
    fn value(&self, mu: &DiscreteMeasure) -> f64 {
        self.inner.value(&self.lift(mu))
    }

    fn first_variation(&self, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
        let m = mu.mass();
        let lifted = self.lift(mu);
        let tx = self.x0.dilate(m, x);
        self.inner.first_variation(&lifted, &tx) / m + self.constant(mu, &lifted)
    }

    fn first_variation_grad(&self, mu: &DiscreteMeasure, x: &[f64]) -> Vec<f64> {
        let lifted = self.lift(mu);
        self.inner
            .first_variation_grad(&lifted, &self.x0.dilate(mu.mass(), x))
    }

    fn growth_certified(&self) -> bool {
        self.inner.growth_certified()
    }
}
