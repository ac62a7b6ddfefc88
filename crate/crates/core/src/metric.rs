//! The WOP distance between finite positive measures.
//!
//! `WOP²(μ, ν) = (m_μ − m_ν)² + W₂²(T_{m_μ}#μ̄, T_{m_ν}#ν̄)` where
//! `T_a(x) = a (x − x0) + x0` and `μ̄` is the normalized measure (`δ_{x0}` for
//! the null measure).

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::measure::{common_dim, sq_dist, DiscreteMeasure, ReferencePoint};
use crate::transport::{self, cost_matrix, Coupling};

#[derive(Debug, Clone)]
pub struct WopResult {
    pub distance: f64,
    /// `(m_μ − m_ν)²`.
    pub mass_term: f64,
    /// `distance² − mass_term`.
    pub transport_term: f64,
    /// Optimal coupling of the lifted (or normalized, for the second
    /// formulation) measures, indexed by the atoms of `μ̄` and `ν̄`.
    pub coupling: Option<Coupling>,
}

impl WopResult {
    pub fn squared(&self) -> f64 {
        self.mass_term + self.transport_term
    }
}

/// Fixed total order on measures. Symmetric quantities are evaluated with
/// the smaller argument first so that swapping the inputs gives bitwise
/// identical results.
fn measure_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Ordering {
    let cmp = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(a.len().cmp(&b.len()))
    };
    mu.len()
        .cmp(&nu.len())
        .then_with(|| cmp(mu.weights(), nu.weights()))
        .then_with(|| cmp(mu.flat_points(), nu.flat_points()))
}

/// Runs `f` on the ordered pair and transposes the coupling back.
fn symmetrized(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    f: impl Fn(&DiscreteMeasure, &DiscreteMeasure) -> Result<WopResult>,
) -> Result<WopResult> {
    if measure_order(mu, nu) == Ordering::Greater {
        let mut r = f(nu, mu)?;
        r.coupling = r.coupling.map(|c| c.transpose());
        Ok(r)
    } else {
        f(mu, nu)
    }
}

/// `T_{m_μ}#μ̄` in dimension `dim`.
pub(crate) fn lifted(mu: &DiscreteMeasure, x0: &ReferencePoint) -> Result<DiscreteMeasure> {
    mu.normalize(x0).dilate(mu.mass(), x0)
}

/// WOP distance computed from the definition: exact W₂ between the lifted
/// normalized measures.
pub fn wop_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<WopResult> {
    common_dim(mu, nu, x0)?;
    symmetrized(mu, nu, |mu, nu| wop_from_definition(mu, nu, x0))
}

fn wop_from_definition(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<WopResult> {
    let dm = mu.mass() - nu.mass();
    let sol = transport::solve_w2_exact(&lifted(mu, x0)?, &lifted(nu, x0)?)?;
    let mass_term = dm * dm;
    let transport_term = sol.cost.max(0.0);
    Ok(WopResult {
        distance: (mass_term + transport_term).sqrt(),
        mass_term,
        transport_term,
        coupling: Some(sol.coupling),
    })
}

/// WOP distance from the expanded form
/// `Δm² + Δm (M_{x0}(μ) − M_{x0}(ν)) + m_μ m_ν W₂²(μ̄, ν̄)`.
///
/// The coupling, when present, is between the normalized measures. It is
/// omitted when one mass vanishes since the W₂ term then drops out.
pub fn wop_distance_defbis(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<WopResult> {
    common_dim(mu, nu, x0)?;
    symmetrized(mu, nu, |mu, nu| wop_expanded(mu, nu, x0))
}

fn wop_expanded(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<WopResult> {
    let (ma, mb) = (mu.mass(), nu.mass());
    let dm = ma - mb;
    let (w2, coupling) = if ma > 0.0 && mb > 0.0 {
        let sol = transport::solve_w2_exact(&mu.normalize(x0), &nu.normalize(x0))?;
        (sol.cost, Some(sol.coupling))
    } else {
        (0.0, None)
    };
    let mass_term = dm * dm;
    let sq = (mass_term + dm * (mu.moment2(x0) - nu.moment2(x0)) + ma * mb * w2).max(0.0);
    Ok(WopResult {
        distance: sq.sqrt(),
        mass_term,
        transport_term: sq - mass_term,
        coupling,
    })
}

/// Lifted ground cost `a(a−b)|x−x0|² + b(b−a)|y−x0|² + ab|x−y|²`, equal to
/// `|a(x−x0) − b(y−x0)|²`.
pub fn wop_cost(a: f64, b: f64, x0: &[f64], x: &[f64], y: &[f64]) -> f64 {
    a * (a - b) * sq_dist(x, x0) + b * (b - a) * sq_dist(y, x0) + a * b * sq_dist(x, y)
}

/// Correction `Δ` with `WOP²_{x0}(μ, ν) = WOP²_{y0}(μ, ν) + Δ`.
pub fn reference_shift(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
    y0: &ReferencePoint,
) -> Result<f64> {
    let dim = common_dim(mu, nu, x0)?;
    y0.check_dim(dim)?;
    let dm = mu.mass() - nu.mass();
    Ok(dm * (mu.moment2(x0) - mu.moment2(y0) + nu.moment2(y0) - nu.moment2(x0)))
}

/// Dual certificate for `WOP²(μ, ν)` built from W₂ potentials of the lifted
/// measures.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// `φ̃` on the atoms of `μ`.
    pub phi: Vec<f64>,
    /// `ψ̃` on the atoms of `ν`.
    pub psi: Vec<f64>,
    /// `Σ φ̃ dμ + Σ ψ̃ dν`.
    pub value: f64,
}

impl DualCertificate {
    /// `max_ij m_μ φ̃_i + m_ν ψ̃_j − Δm² − |T_{m_μ}(x_i) − T_{m_ν}(y_j)|²`.
    pub fn max_violation(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        x0: &ReferencePoint,
    ) -> f64 {
        let (ma, mb) = (mu.mass(), nu.mass());
        let dm2 = (ma - mb) * (ma - mb);
        let mut worst = f64::NEG_INFINITY;
        for (x, p) in mu.points().zip(&self.phi) {
            let tx = x0.dilate(ma, x);
            for (y, q) in nu.points().zip(&self.psi) {
                let ty = x0.dilate(mb, y);
                worst = worst.max(ma * p + mb * q - dm2 - sq_dist(&tx, &ty));
            }
        }
        worst
    }
}

/// Dual potentials `(φ̃, ψ̃)` certifying `WOP²(μ, ν)`. Both masses must be
/// positive.
pub fn dual_certificate(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
) -> Result<DualCertificate> {
    common_dim(mu, nu, x0)?;
    let (ma, mb) = (mu.mass(), nu.mass());
    if !(ma > 0.0) || !(mb > 0.0) {
        return Err(Error::NullMeasure("dual certificate needs positive masses"));
    }
    let (la, lb) = (lifted(mu, x0)?, lifted(nu, x0)?);
    let sol = transport::solve_w2_exact(&la, &lb)?;
    let half = 0.5 * (ma - mb) * (ma - mb);
    let phi: Vec<f64> = sol.potentials.phi.iter().map(|p| (p + half) / ma).collect();
    let psi: Vec<f64> = sol.potentials.psi.iter().map(|q| (q + half) / mb).collect();
    let value = transport::dot(&phi, mu.weights()) + transport::dot(&psi, nu.weights());
    Ok(DualCertificate { phi, psi, value })
}

/// `WOP_p(μ, ν) = (|m_μ − m_ν|^p + W_p^p(T_{m_μ}#μ̄, T_{m_ν}#ν̄))^{1/p}`.
pub fn wop_p_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x0: &ReferencePoint,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid("p", format!("must be a finite value >= 1, got {p}")));
    }
    if p == 2.0 {
        return Ok(wop_distance(mu, nu, x0)?.distance);
    }
    common_dim(mu, nu, x0)?;
    let (mu, nu) = if measure_order(mu, nu) == Ordering::Greater {
        (nu, mu)
    } else {
        (mu, nu)
    };
    let (la, lb) = (lifted(mu, x0)?, lifted(nu, x0)?);
    let cost = cost_matrix(&la, &lb, |x, y| sq_dist(x, y).sqrt().powf(p));
    let sol = transport::solve_exact_matrix(&la, &lb, &cost)?;
    let dm = (mu.mass() - nu.mass()).abs();
    Ok((dm.powf(p) + sol.cost.max(0.0)).powf(1.0 / p))
}
