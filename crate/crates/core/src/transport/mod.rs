//! Balanced optimal transport between discrete measures of equal mass.
//!
//! [`solve_exact`] runs a network simplex on the positive atoms and returns an
//! optimal coupling together with feasible dual potentials;
//! [`solve_entropic`] runs log-domain Sinkhorn and rounds the plan onto the
//! transport polytope.

mod network_simplex;
pub(crate) mod sinkhorn;

use crate::error::{invalid, Error, Result};
use crate::measure::{sq_dist, DiscreteMeasure};

/// Relative tolerance on the mass balance accepted by the solvers.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Nonnegative `n × m` plan, row-major, indexed by the atoms of the source and
/// target measures (zero-weight atoms included).
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Coupling {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(
                "coupling",
                format!("expected {} entries, got {}", rows * cols, data.len()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "coupling" });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, &x)| x < 0.0) {
            return Err(Error::NegativeWeight { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)).take(self.rows) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Entries `(i, j, π_ij)` with `π_ij > 0`, in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(move |(k, &x)| (k / cols, k % cols, x))
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Largest absolute deviation of the marginals from `a` and `b`.
    pub fn marginal_error(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(a)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }
}

/// Kantorovich potentials `(φ, ψ)` on the source and target atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    /// `Σ φ_i a_i + Σ ψ_j b_j`.
    pub fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(&self.phi, a) + dot(&self.psi, b)
    }

    /// `max_ij (φ_i + ψ_j − c_ij)`; nonpositive for feasible potentials.
    pub fn max_violation(&self, cost: &[f64]) -> f64 {
        let m = self.psi.len();
        let mut worst = f64::NEG_INFINITY;
        for (i, &p) in self.phi.iter().enumerate() {
            for (j, &q) in self.psi.iter().enumerate() {
                worst = worst.max(p + q - cost[i * m + j]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// `Σ π_ij c_ij`.
    pub cost: f64,
    pub coupling: Coupling,
    pub potentials: DualPotentials,
    /// Pivots for the exact solver, Sinkhorn sweeps for the entropic one.
    pub iterations: usize,
}

/// Settings for [`solve_entropic`].
#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    /// Stop once the max marginal residual falls below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 100_000,
        }
    }
}

/// Dense cost matrix `c(x_i, y_j)` over all atom pairs.
pub fn cost_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> Vec<f64> {
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.points() {
        for y in nu.points() {
            c.push(cost(x, y));
        }
    }
    c
}

/// `Σ_ij π_ij c(x_i, y_j)`.
pub fn coupling_cost(
    coupling: &Coupling,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    coupling
        .nonzeros()
        .map(|(i, j, w)| w * cost(mu.point(i), nu.point(j)))
        .sum()
}

/// Positive atoms of both measures and the target weights rescaled to the
/// source mass.
struct Reduced {
    rows: Vec<usize>,
    cols: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
}

fn reduce(mu: &DiscreteMeasure, nu: &DiscreteMeasure, full_cost: &[f64]) -> Result<Reduced> {
    if !mu.is_empty() && !nu.is_empty() && mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let rows = mu.positive_atoms();
    let cols = nu.positive_atoms();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptySupport);
    }
    let (ma, mb) = (mu.mass(), nu.mass());
    if (ma - mb).abs() > MASS_TOLERANCE * ma.max(mb) {
        return Err(Error::UnequalMass {
            source_mass: ma,
            target_mass: mb,
        });
    }
    let a: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu.weights()[j] * (ma / mb)).collect();
    let m = nu.len();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            cost.push(full_cost[i * m + j]);
        }
    }
    Ok(Reduced {
        rows,
        cols,
        a,
        b,
        cost,
    })
}

/// Extends reduced potentials to every atom by a double c-transform:
/// `ψ_j = min_{i∈I} c_ij − φ_i` over the positive rows, then
/// `φ_i = min_j c_ij − ψ_j` over all columns. The result is feasible on every
/// pair and its dual value is no smaller on the reduced problem.
fn c_transform(red: &Reduced, phi_red: &[f64], full_cost: &[f64], n: usize, m: usize) -> DualPotentials {
    let psi: Vec<f64> = (0..m)
        .map(|j| {
            red.rows
                .iter()
                .zip(phi_red)
                .map(|(&i, &p)| full_cost[i * m + j] - p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let phi: Vec<f64> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| full_cost[i * m + j] - psi[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    DualPotentials { phi, psi }
}

fn expand(red: &Reduced, plan: &[f64], n: usize, m: usize) -> Coupling {
    let k = red.cols.len();
    let mut data = vec![0.0; n * m];
    for (r, &i) in red.rows.iter().enumerate() {
        for (c, &j) in red.cols.iter().enumerate() {
            data[i * m + j] = plan[r * k + c];
        }
    }
    Coupling {
        rows: n,
        cols: m,
        data,
    }
}

/// Exact optimal transport for an arbitrary ground cost.
///
/// Both measures need positive and equal total mass (relative tolerance
/// [`MASS_TOLERANCE`]). Zero-weight atoms are excluded from the LP and receive
/// no mass; potentials are extended to them by c-transform.
pub fn solve_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<TransportSolution> {
    let full_cost = cost_matrix(mu, nu, cost);
    solve_exact_matrix(mu, nu, &full_cost)
}

pub(crate) fn solve_exact_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    full_cost: &[f64],
) -> Result<TransportSolution> {
    let red = reduce(mu, nu, full_cost)?;
    let sol = network_simplex::solve(&red.a, &red.b, &red.cost)?;
    let (n, m) = (mu.len(), nu.len());
    let coupling = expand(&red, &sol.flow, n, m);
    let cost = dot(&sol.flow, &red.cost);
    let potentials = c_transform(&red, &sol.phi, full_cost, n, m);
    Ok(TransportSolution {
        cost,
        coupling,
        potentials,
        iterations: sol.pivots,
    })
}

/// Exact squared 2-Wasserstein transport.
pub fn solve_w2_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution> {
    solve_exact(mu, nu, sq_dist)
}

/// Entropic transport for an arbitrary ground cost. The reported cost is the
/// transport part `Σ π_ij c_ij` of the rounded plan, without the entropy.
pub fn solve_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64,
    epsilon: f64,
    options: SinkhornOptions,
) -> Result<TransportSolution> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let full_cost = cost_matrix(mu, nu, cost);
    let red = reduce(mu, nu, &full_cost)?;
    let out = sinkhorn::solve(
        &red.a,
        &red.b,
        &red.cost,
        epsilon,
        options.tolerance,
        options.max_iterations,
    )?;
    let (n, m) = (mu.len(), nu.len());
    let coupling = expand(&red, &out.plan, n, m);
    let cost = dot(&out.plan, &red.cost);
    let potentials = c_transform(&red, &out.f, &full_cost, n, m);
    Ok(TransportSolution {
        cost,
        coupling,
        potentials,
        iterations: out.iterations,
    })
}

/// Entropic squared 2-Wasserstein transport with default stopping rules.
pub fn solve_w2_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    epsilon: f64,
) -> Result<TransportSolution> {
    solve_entropic(mu, nu, sq_dist, epsilon, SinkhornOptions::default())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
