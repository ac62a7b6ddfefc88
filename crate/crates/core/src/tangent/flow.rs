//! Explicit Euler integration of WOP gradient flows on particles.

use std::io::Write;

use super::{step_along, wop_gradient, Functional, TangentVector};
use crate::error::{invalid, Result};
use crate::measure::{DiscreteMeasure, ReferencePoint};

#[derive(Debug, Clone)]
pub struct FlowPath {
    pub times: Vec<f64>,
    pub measures: Vec<DiscreteMeasure>,
    pub masses: Vec<f64>,
    pub values: Vec<f64>,
    /// Step at which the mass would have become nonpositive, if any. The
    /// path stops at the last valid state.
    pub halted_at: Option<usize>,
}

impl FlowPath {
    pub fn last(&self) -> &DiscreteMeasure {
        self.measures.last().expect("a flow path holds its initial state")
    }

    /// CSV rows `step,t,mass,F_value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "t", "mass", "F_value"])?;
        for (k, ((t, m), v)) in self.times.iter().zip(&self.masses).zip(&self.values).enumerate() {
            w.write_record([k.to_string(), t.to_string(), m.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `ẋ_i = −u_F(x_i)`, `ṁ = −m′_F` with explicit Euler steps of size
/// `dt`. Weights are rescaled uniformly when the mass changes.
pub fn flow_particles<F: Functional + ?Sized>(
    f: &F,
    mu0: &DiscreteMeasure,
    x0: &ReferencePoint,
    dt: f64,
    steps: usize,
) -> Result<FlowPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    let mut mu = mu0.clone();
    let mut path = FlowPath {
        times: vec![0.0],
        measures: vec![mu.clone()],
        masses: vec![mu.mass()],
        values: vec![f.value(&mu)],
        halted_at: None,
    };
    for k in 1..=steps {
        let g = wop_gradient(f, &mu, x0)?;
        if !(mu.mass() - dt * g.m_prime > 0.0) {
            path.halted_at = Some(k);
            break;
        }
        let descent = TangentVector {
            u: g.u.iter().map(|x| -x).collect(),
            m_prime: -g.m_prime,
        };
        mu = step_along(&mu, &descent, dt)?;
        path.times.push(k as f64 * dt);
        path.masses.push(mu.mass());
        path.values.push(f.value(&mu));
        path.measures.push(mu.clone());
    }
    Ok(path)
}
