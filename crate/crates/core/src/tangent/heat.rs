//! Grid densities on the line and the WOP gradient flow of the extended
//! Boltzmann entropy, which is the heat equation slowed by `1/m²`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Piecewise-constant density on the uniform grid
/// `x_start + (k + ½) dx`, `k = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub x_start: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(x_start: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x_start.is_finite() {
            return Err(invalid("dx", "grid spacing must be positive and finite"));
        }
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "density" });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeWeight { index, value });
        }
        Ok(Self {
            x_start,
            dx,
            values,
        })
    }

    /// Samples `f` at the cell centers of `n` cells covering `[a, b]`.
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = (b - a) / n as f64;
        Self::new(a, dx, (0..n).map(|k| f(a + (k as f64 + 0.5) * dx)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center(&self, k: usize) -> f64 {
        self.x_start + (k as f64 + 0.5) * self.dx
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    /// `a · T_{1/a}#ρ`: the grid contracts toward `x0` by `1/a` and the
    /// density picks up a factor `a²` (mass `a`, Jacobian `a`).
    pub fn mass_dilation(&self, a: f64, x0: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid("a", format!("must be > 0, got {a}")));
        }
        Self::new(
            x0 + (self.x_start - x0) / a,
            self.dx / a,
            self.values.iter().map(|v| v * a * a).collect(),
        )
    }

    /// L¹ distance between two densities on the same grid.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.dx
    }
}

/// `∫ ρ log ρ dx`, with `0 log 0 = 0`.
pub fn boltzmann_entropy(rho: &GridDensity) -> f64 {
    rho.values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
        * rho.dx
}

/// Extension of the entropy to positive densities,
/// `Ẽ(ρ) = E(T_m#ρ̄) = ∫ ρ̄ log ρ̄ dx − log m`.
pub fn extended_entropy(rho: &GridDensity) -> Result<f64> {
    let m = rho.mass();
    if !(m > 0.0) {
        return Err(Error::NullMeasure("entropy of a null density"));
    }
    let normalized = GridDensity {
        x_start: rho.x_start,
        dx: rho.dx,
        values: rho.values.iter().map(|v| v / m).collect(),
    };
    Ok(boltzmann_entropy(&normalized) - m.ln())
}

#[derive(Debug, Clone)]
pub struct GridPath {
    /// Times of the recorded frames.
    pub times: Vec<f64>,
    pub frames: Vec<GridDensity>,
    /// Mass after every step, starting with the initial mass.
    pub masses: Vec<f64>,
}

impl GridPath {
    pub fn last(&self) -> &GridDensity {
        self.frames.last().expect("a grid path holds its initial state")
    }
}

/// Explicit finite differences for `∂_t ρ = Δρ / m²` with zero-flux
/// boundaries. The factor `1/m²` is refreshed from the grid mass at every
/// step. Frames are recorded every `record_every` steps and at the end.
pub fn heat_flow_grid(
    rho0: &GridDensity,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<GridPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    let n = rho0.len();
    let dx = rho0.dx;
    let record_every = record_every.max(1);
    let mut rho = rho0.values.clone();
    let mut next = vec![0.0; n];
    let mut path = GridPath {
        times: vec![0.0],
        frames: vec![rho0.clone()],
        masses: vec![rho0.mass()],
    };
    for step in 1..=steps {
        let m = rho.iter().sum::<f64>() * dx;
        if !(m > 0.0) {
            return Err(Error::NullMeasure("heat flow of a null density"));
        }
        if dt > 0.5 * dx * dx * m * m * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!("CFL violated: dt = {dt} > dx² m² / 2 = {}", 0.5 * dx * dx * m * m),
            ));
        }
        let k = dt / (m * m * dx * dx);
        for i in 0..n {
            let left = if i > 0 { rho[i] - rho[i - 1] } else { 0.0 };
            let right = if i + 1 < n { rho[i + 1] - rho[i] } else { 0.0 };
            next[i] = rho[i] + k * (right - left);
        }
        std::mem::swap(&mut rho, &mut next);
        if let Some(v) = rho.iter().copied().find(|&v| v < -1e-12) {
            return Err(Error::NotConverged {
                solver: "heat flow",
                iterations: step,
                residual: v,
            });
        }
        path.masses.push(rho.iter().sum::<f64>() * dx);
        if step % record_every == 0 || step == steps {
            path.times.push(step as f64 * dt);
            path.frames.push(GridDensity {
                x_start: rho0.x_start,
                dx,
                values: rho.iter().map(|v| v.max(0.0)).collect(),
            });
        }
    }
    Ok(path)
}
