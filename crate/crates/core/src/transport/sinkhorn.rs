//! Log-domain Sinkhorn iterations for balanced entropic transport.

use crate::error::{Error, Result};

pub(crate) struct Output {
    /// Row-major plan, rounded onto the transport polytope.
    pub plan: Vec<f64>,
    pub f: Vec<f64>,
    pub iterations: usize,
}

/// `log Σ_k exp(v_k)` skipping `-∞` entries; `-∞` when all entries are.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic transport between positive marginals `a`, `b` of equal mass.
///
/// Potentials are updated in the log domain with ε-scaling (ε halves from the
/// cost scale down to the target). Iteration stops when the row-marginal
/// residual drops below `tol` at the target ε; the plan is then rounded so
/// both marginals hold to machine precision.
pub(crate) fn solve(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Output> {
    let (n, m) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let scale = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut eps = scale.max(epsilon);
    let mut iterations = 0usize;
    let mut residual;

    loop {
        let at_target = eps <= epsilon;
        let stage_tol = if at_target { tol } else { tol.max(1e-3 * eps) };
        loop {
            for i in 0..n {
                let row = &cost[i * m..(i + 1) * m];
                f[i] = -eps
                    * log_sum_exp(
                        (0..m).map(|j| (g[j] - row[j]) / eps + log_b[j]),
                    );
            }
            for j in 0..m {
                g[j] = -eps
                    * log_sum_exp(
                        (0..n).map(|i| (f[i] - cost[i * m + j]) / eps + log_a[i]),
                    );
            }
            iterations += 1;
            // After the g-update columns are exact; measure the rows.
            residual = (0..n)
                .map(|i| {
                    let row = &cost[i * m..(i + 1) * m];
                    let r: f64 = (0..m)
                        .map(|j| ((f[i] + g[j] - row[j]) / eps + log_a[i] + log_b[j]).exp())
                        .sum();
                    (r - a[i]).abs()
                })
                .fold(0.0, f64::max);
            if residual <= stage_tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NotConverged {
                    solver: "sinkhorn",
                    iterations,
                    residual,
                });
            }
        }
        if at_target {
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }

    let mut plan = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            plan[k] = ((f[i] + g[j] - cost[k]) / eps + log_a[i] + log_b[j]).exp();
        }
    }
    round_to_polytope(&mut plan, a, b);
    Ok(Output {
        plan,
        f,
        iterations,
    })
}

/// Rounds a nonnegative plan onto `Π(a, b)`: shrink rows, shrink columns, then
/// add the rank-one correction `err_r err_cᵀ / |err_r|₁`.
pub(crate) fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let row = &mut plan[i * m..(i + 1) * m];
        let r: f64 = row.iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            row.iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..m {
        let c: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        if c > b[j] {
            let s = b[j] / c;
            (0..n).for_each(|i| plan[i * m + j] *= s);
        }
    }
    let err_r: Vec<f64> = (0..n)
        .map(|i| (a[i] - plan[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_c: Vec<f64> = (0..m)
        .map(|j| (b[j] - (0..n).map(|i| plan[i * m + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}
