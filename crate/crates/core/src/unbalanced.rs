//! Entropy-transport problems and the Hellinger–Kantorovich distance.
//!
//! `ET(μ, ν) = inf_γ D_f(γ₀ | μ) + D_f(γ₁ | ν) + Σ γ_ij c(x_i, y_j)` where
//! `γ₀`, `γ₁` are the marginals of `γ ≥ 0`. Positive ε selects an unbalanced
//! log-domain Sinkhorn solver; ε = 0 is solved directly on supports with at
//! most two atoms per side.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measure::{lex_cmp, sq_dist, DiscreteMeasure};
use crate::transport::sinkhorn::log_sum_exp;
use crate::transport::Coupling;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Convex entropy `f` with `f(1) = 0`.
#[derive(Clone)]
pub enum EntropyFunction {
    /// `f(t) = t log t + 1 − t`.
    Kl,
    /// `f(t) = |t − 1|`.
    TotalVariation,
    Custom {
        f: ScalarFn,
        at_zero: f64,
        inf_slope: f64,
    },
}

impl std::fmt::Debug for EntropyFunction {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Kl => write!(fmt, "Kl"),
            Self::TotalVariation => write!(fmt, "TotalVariation"),
            Self::Custom {
                at_zero, inf_slope, ..
            } => write!(fmt, "Custom {{ f(0): {at_zero}, f'_inf: {inf_slope} }}"),
        }
    }
}

impl EntropyFunction {
    /// Custom entropy given by `f` on `(0, ∞)`, its value at zero and the
    /// recession slope `lim f(t)/t` (either may be `+∞`).
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        at_zero: f64,
        inf_slope: f64,
    ) -> Self {
        Self::Custom {
            f: Arc::new(f),
            at_zero,
            inf_slope,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.at_zero();
        }
        match self {
            Self::Kl => t * t.ln() + 1.0 - t,
            Self::TotalVariation => (t - 1.0).abs(),
            Self::Custom { f, .. } => f(t),
        }
    }

    pub fn at_zero(&self) -> f64 {
        match self {
            Self::Kl | Self::TotalVariation => 1.0,
            Self::Custom { at_zero, .. } => *at_zero,
        }
    }

    /// `f′_∞(1) = lim_{t→∞} f(t)/t`.
    pub fn inf_slope(&self) -> f64 {
        match self {
            Self::Kl => f64::INFINITY,
            Self::TotalVariation => 1.0,
            Self::Custom { inf_slope, .. } => *inf_slope,
        }
    }

    /// Checks `f(1) = 0` and midpoint convexity on consecutive triples of a
    /// nonnegative grid.
    pub fn check(&self, grid: &[f64]) -> bool {
        if self.eval(1.0).abs() > 1e-12 {
            return false;
        }
        grid.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let (fa, fb, fm) = (self.eval(a), self.eval(b), self.eval(0.5 * (a + b)));
            !(fm.is_finite() && fa.is_finite() && fb.is_finite())
                || fm <= 0.5 * (fa + fb) + 1e-12 * (1.0 + fa.abs() + fb.abs())
        })
    }
}

/// Ground cost of an entropy-transport problem.
#[derive(Clone)]
pub enum GroundCost {
    /// `−2 log cos(|x − y| ∧ π/2)`, infinite from `π/2` on.
    HellingerKantorovich,
    SquaredEuclidean,
    Custom(CostFn),
}

impl GroundCost {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::HellingerKantorovich => hk_cost(x, y),
            Self::SquaredEuclidean => sq_dist(x, y),
            Self::Custom(c) => c(x, y),
        }
    }
}

/// `−2 log cos(|x − y|)` for `|x − y| < π/2`, `+∞` otherwise.
pub fn hk_cost(x: &[f64], y: &[f64]) -> f64 {
    let d = sq_dist(x, y).sqrt();
    if d >= FRAC_PI_2 {
        f64::INFINITY
    } else {
        -2.0 * d.cos().ln()
    }
}

#[derive(Clone)]
pub struct EtProblem {
    pub entropy: EntropyFunction,
    pub cost: GroundCost,
}

impl EtProblem {
    /// KL entropy with the cone cost, whose ET value is `HK²`.
    pub fn hellinger_kantorovich() -> Self {
        Self {
            entropy: EntropyFunction::Kl,
            cost: GroundCost::HellingerKantorovich,
        }
    }
}

/// `Σ_i μ_i f(γ_i / μ_i) + f′_∞(1) γ^⊥` over aligned weight vectors, with
/// `∞ · 0 = 0`.
fn aligned_divergence(gamma: &[f64], mu: &[f64], entropy: &EntropyFunction) -> f64 {
    let mut s = 0.0;
    for (&g, &m) in gamma.iter().zip(mu) {
        if m > 0.0 {
            s += m * entropy.eval(g / m);
        } else if g > 0.0 {
            s += g * entropy.inf_slope();
        }
    }
    s
}

/// Csiszár divergence `D_f(γ | μ)` of two discrete measures. Atoms are
/// matched by their coordinates.
pub fn f_divergence(gamma: &DiscreteMeasure, mu: &DiscreteMeasure, entropy: &EntropyFunction) -> f64 {
    let (g, m) = (gamma.canonical(), mu.canonical());
    let (mut i, mut j) = (0, 0);
    let (mut gw, mut mw) = (Vec::new(), Vec::new());
    while i < g.len() || j < m.len() {
        let ord = if i == g.len() {
            std::cmp::Ordering::Greater
        } else if j == m.len() {
            std::cmp::Ordering::Less
        } else {
            lex_cmp(g.point(i), m.point(j))
        };
        match ord {
            std::cmp::Ordering::Less => {
                gw.push(g.weights()[i]);
                mw.push(0.0);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                gw.push(0.0);
                mw.push(m.weights()[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                gw.push(g.weights()[i]);
                mw.push(m.weights()[j]);
                i += 1;
                j += 1;
            }
        }
    }
    aligned_divergence(&gw, &mw, entropy)
}

/// `min(f(0), f′_∞(1))`, an upper bound on `ET(μ, 0)` for probability `μ`.
pub fn et_null_bound(entropy: &EntropyFunction) -> f64 {
    entropy.at_zero().min(entropy.inf_slope())
}

/// Stopping rules of the unbalanced Sinkhorn solver.
#[derive(Debug, Clone, Copy)]
pub struct EtOptions {
    /// Stop once no potential changes by more than this over a sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EtOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EtResult {
    /// Primal objective of the returned plan, without the entropic term.
    pub value: f64,
    pub plan: Coupling,
    pub converged: bool,
    pub iterations: usize,
    /// Last potential update (Sinkhorn) or coordinate step (exact path).
    pub residual: f64,
    pub epsilon: f64,
}

fn primal(
    plan: &[f64],
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    entropy: &EntropyFunction,
) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    let mut transport = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = plan[i * m + j];
            if p > 0.0 {
                rows[i] += p;
                cols[j] += p;
                transport += p * cost[i * m + j];
            }
        }
    }
    aligned_divergence(&rows, a, entropy) + aligned_divergence(&cols, b, entropy) + transport
}

/// ET value of `μ` and `ν`.
pub fn et_value(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    problem: &EtProblem,
    epsilon: f64,
) -> Result<EtResult> {
    et_value_with(mu, nu, problem, epsilon, EtOptions::default())
}

pub fn et_value_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    problem: &EtProblem,
    epsilon: f64,
    options: EtOptions,
) -> Result<EtResult> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    if !mu.is_empty() && !nu.is_empty() && mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let rows = mu.positive_atoms();
    let cols = nu.positive_atoms();
    let a: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu.weights()[j]).collect();
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for &i in &rows {
        for &j in &cols {
            let c = problem.cost.eval(mu.point(i), nu.point(j));
            if c.is_nan() || c < 0.0 {
                return Err(invalid("cost", format!("cost must be >= 0, got {c}")));
            }
            cost.push(c);
        }
    }

    let (plan, converged, iterations, residual) = if a.is_empty() || b.is_empty() {
        (vec![0.0; a.len() * b.len()], true, 0, 0.0)
    } else if epsilon == 0.0 {
        if a.len() > 2 || b.len() > 2 {
            return Err(Error::Unsupported(
                "epsilon = 0 is only available for supports with at most two atoms".into(),
            ));
        }
        exact_small(&a, &b, &cost, &problem.entropy)
    } else {
        sinkhorn_unbalanced(&a, &b, &cost, &problem.entropy, epsilon, options)?
    };
    let value = primal(&plan, &a, &b, &cost, &problem.entropy);

    let m = nu.len();
    let mut full = vec![0.0; mu.len() * m];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            full[i * m + j] = plan[r * cols.len() + c];
        }
    }
    Ok(EtResult {
        value,
        plan: Coupling::new(mu.len(), m, full)?,
        converged,
        iterations,
        residual,
        epsilon,
    })
}

/// `HK(μ, ν) = √ET` for the KL entropy and the cone cost.
pub fn hk_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, epsilon: f64) -> Result<f64> {
    Ok(et_value(mu, nu, &EtProblem::hellinger_kantorovich(), epsilon)?
        .value
        .max(0.0)
        .sqrt())
}

/// Proximal step of the marginal penalty: maps the soft-min `s` to the new
/// potential.
fn prox(entropy: &EntropyFunction, s: f64, epsilon: f64) -> f64 {
    match entropy {
        EntropyFunction::TotalVariation => (-s).clamp(-1.0, 1.0),
        _ => {
            if s == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                -s / (1.0 + epsilon)
            }
        }
    }
}

fn sinkhorn_unbalanced(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    entropy: &EntropyFunction,
    epsilon: f64,
    options: EtOptions,
) -> Result<(Vec<f64>, bool, usize, f64)> {
    if let EntropyFunction::Custom { .. } = entropy {
        return Err(Error::Unsupported(
            "entropic solver supports the KL and total-variation entropies".into(),
        ));
    }
    let (n, m) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut residual;
    let mut converged = false;
    let mut stage = 0i32;

    // Terms with infinite cost never carry mass and are skipped.
    let term = |p: f64, c: f64, lw: f64, eps: f64| {
        if c == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            (p - c) / eps + lw
        }
    };

    'stages: loop {
        let eps = 0.5f64.powi(stage).max(epsilon);
        let at_target = eps <= epsilon;
        let tol = if at_target {
            options.tolerance
        } else {
            options.tolerance.max(1e-3 * eps)
        };
        loop {
            let mut change = 0.0f64;
            for i in 0..n {
                let row = &cost[i * m..(i + 1) * m];
                let s = eps * log_sum_exp((0..m).map(|j| term(g[j], row[j], log_b[j], eps)));
                let v = prox(entropy, s, eps);
                if v.is_finite() {
                    change = change.max((v - f[i]).abs());
                }
                f[i] = v;
            }
            for j in 0..m {
                let s = eps
                    * log_sum_exp((0..n).map(|i| term(f[i], cost[i * m + j], log_a[i], eps)));
                let v = prox(entropy, s, eps);
                if v.is_finite() {
                    change = change.max((v - g[j]).abs());
                }
                g[j] = v;
            }
            if let EntropyFunction::Kl = entropy {
                // Optimal translation (f + τ, g − τ) of the dual objective.
                let sa: f64 = f.iter().zip(a).map(|(p, w)| w * (-p).exp()).sum();
                let sb: f64 = g.iter().zip(b).map(|(q, w)| w * (-q).exp()).sum();
                if sa > 0.0 && sb > 0.0 {
                    let tau = 0.5 * (sa / sb).ln();
                    f.iter_mut().for_each(|p| *p += tau);
                    g.iter_mut().for_each(|q| *q -= tau);
                }
            }
            iterations += 1;
            residual = change;
            if change <= tol {
                break;
            }
            if iterations >= options.max_iterations {
                break 'stages;
            }
        }
        if at_target {
            converged = true;
            break;
        }
        stage += 1;
    }

    let eps = epsilon;
    let mut plan = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost[i * m + j];
            if c.is_finite() && f[i].is_finite() && g[j].is_finite() {
                plan[i * m + j] = ((f[i] + g[j] - c) / eps + log_a[i] + log_b[j]).exp();
            }
        }
    }
    Ok((plan, converged, iterations, residual))
}

/// Coordinate descent with golden-section line searches over `γ ≥ 0` for
/// supports with at most two atoms per side.
fn exact_small(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    entropy: &EntropyFunction,
) -> (Vec<f64>, bool, usize, f64) {
    let total: f64 = a.iter().chain(b).sum();
    let upper = 2.0 * total + 1.0;
    let mut plan: Vec<f64> = cost
        .iter()
        .map(|c| if c.is_finite() { 0.0 } else { f64::NAN })
        .collect();
    let free: Vec<usize> = (0..plan.len()).filter(|&k| !plan[k].is_nan()).collect();
    plan.iter_mut().filter(|p| p.is_nan()).for_each(|p| *p = 0.0);
    let objective = |p: &[f64]| primal(p, a, b, cost, entropy);
    let mut sweeps = 0;
    let mut step = f64::INFINITY;
    while sweeps < 10_000 {
        sweeps += 1;
        step = 0.0;
        for &k in &free {
            let old = plan[k];
            let mut probe = plan.clone();
            let best = golden_section(
                |x| {
                    probe[k] = x;
                    objective(&probe)
                },
                0.0,
                upper,
            );
            // Keep the old value on ties so the sweep settles.
            plan[k] = old;
            let keep = objective(&plan);
            plan[k] = best;
            if objective(&plan) > keep {
                plan[k] = old;
            }
            step = step.max((plan[k] - old).abs());
        }
        if step <= 1e-13 * (1.0 + total) {
            return (plan, true, sweeps, step);
        }
    }
    (plan, false, sweeps, step)
}

fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    // The minimum may sit on the boundary γ = 0.
    let mid = 0.5 * (lo + hi);
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassProfileRow {
    pub t: f64,
    pub mass_wop: f64,
    pub mass_hk: f64,
}

/// WOP and HK mass profiles along the geodesics between two measures.
#[derive(Debug, Clone, Serialize)]
pub struct MassProfile {
    pub rows: Vec<MassProfileRow>,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// How the HK column was obtained.
    pub hk_method: &'static str,
}

impl MassProfile {
    /// CSV with columns `t,mass_wop,mass_hk`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass_wop", "mass_hk"])?;
        for r in &self.rows {
            w.write_record([r.t.to_string(), r.mass_wop.to_string(), r.mass_hk.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Everything but the rows, as JSON.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "hk_method": self.hk_method,
            "wop_method": "exact linear mass interpolation",
        })
    }
}

/// Mass profiles `t ↦ m_WOP(t)`, `t ↦ m_HK(t)` on `steps + 1` uniform times.
///
/// The WOP profile is exact. The HK profile follows cone geodesics between
/// the atom pairs of an entropic HK plan: each entry `γ_ij` is split into
/// masses `A_ij = μ_i γ_ij / γ₀_i` and `B_ij = ν_j γ_ij / γ₁_j` whose cone
/// geodesic carries mass `(1−t)² A + t² B + 2t(1−t) √(AB) cos(d ∧ π/2)`.
pub fn compare_geodesic_masses(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    steps: usize,
    epsilon: f64,
) -> Result<MassProfile> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one step"));
    }
    let (m0, m1) = (mu.mass(), nu.mass());
    if !(m0 > 0.0) || !(m1 > 0.0) {
        return Err(Error::NullMeasure("mass profiles need positive masses"));
    }
    let et = et_value(mu, nu, &EtProblem::hellinger_kantorovich(), epsilon)?;
    let rows_sum = et.plan.row_sums();
    let cols_sum = et.plan.col_sums();
    // (A, B, cos d) per plan entry, plus mass created or destroyed outright.
    let mut pairs = Vec::new();
    for (i, j, p) in et.plan.nonzeros() {
        let d = sq_dist(mu.point(i), nu.point(j)).sqrt();
        let a = mu.weights()[i] * p / rows_sum[i];
        let b = nu.weights()[j] * p / cols_sum[j];
        pairs.push((a, b, d.min(FRAC_PI_2).cos()));
    }
    let lost: f64 = mu
        .weights()
        .iter()
        .zip(&rows_sum)
        .filter(|(_, r)| !(**r > 0.0))
        .map(|(w, _)| w)
        .sum();
    let gained: f64 = nu
        .weights()
        .iter()
        .zip(&cols_sum)
        .filter(|(_, c)| !(**c > 0.0))
        .map(|(w, _)| w)
        .sum();
    let rows = (0..=steps)
        .map(|k| {
            let t = k as f64 / steps as f64;
            let s = 1.0 - t;
            let hk: f64 = pairs
                .iter()
                .map(|(a, b, c)| s * s * a + t * t * b + 2.0 * t * s * (a * b).sqrt() * c)
                .sum::<f64>()
                + s * s * lost
                + t * t * gained;
            MassProfileRow {
                t,
                mass_wop: s * m0 + t * m1,
                mass_hk: hk,
            }
        })
        .collect();
    Ok(MassProfile {
        rows,
        epsilon,
        iterations: et.iterations,
        residual: et.residual,
        converged: et.converged,
        hk_method: "entropic proxy: cone geodesics along an entropic HK plan",
    })
}

/// `a + b − 2 √(ab) cos(d ∧ π/2)`: the HK² value between `a δ_x` and `b δ_y`
/// at distance `d`.
pub fn hk_dirac_squared(a: f64, b: f64, d: f64) -> f64 {
    a + b - 2.0 * (a * b).sqrt() * d.min(FRAC_PI_2).cos()
}
