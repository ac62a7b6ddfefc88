//! WOP barycenters of finitely many weighted measures.
//!
//! The minimizer of `V(μ) = Σ λ_i WOP²(μ, μ_i)` has mass `Σ λ_i m_i` and its
//! normalization is the W₂ barycenter of the `μ̄_i` with weights proportional
//! to `λ_i m_i`. Neither depends on the reference point.

use crate::error::{invalid, Error, Result};
use crate::measure::{lex_cmp, sq_dist, DiscreteMeasure, ReferencePoint};
use crate::metric::wop_distance;
use crate::transport;

#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    entries: Vec<(f64, DiscreteMeasure)>,
    x0: ReferencePoint,
}

impl BarycenterProblem {
    /// Weights must be positive and sum to one within `1e-12`.
    pub fn new(entries: Vec<(f64, DiscreteMeasure)>, x0: ReferencePoint) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("entries", "need at least one measure"));
        }
        if let Some((l, _)) = entries.iter().find(|(l, _)| !(*l > 0.0) || !l.is_finite()) {
            return Err(invalid("lambda", format!("weights must be > 0, got {l}")));
        }
        let total: f64 = entries.iter().map(|(l, _)| l).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("lambda", format!("weights sum to {total}, expected 1")));
        }
        for (_, mu) in &entries {
            if !mu.is_empty() {
                x0.check_dim(mu.dim())?;
            }
        }
        Ok(Self { entries, x0 })
    }

    pub fn entries(&self) -> &[(f64, DiscreteMeasure)] {
        &self.entries
    }

    pub fn x0(&self) -> &ReferencePoint {
        &self.x0
    }

    pub fn with_x0(&self, x0: ReferencePoint) -> Result<Self> {
        Self::new(self.entries.clone(), x0)
    }
}

/// `V(μ) = Σ λ_i WOP²_{x0}(μ, μ_i)`.
pub fn variance(mu: &DiscreteMeasure, problem: &BarycenterProblem) -> Result<f64> {
    problem.entries.iter().try_fold(0.0, |acc, (l, m)| {
        Ok(acc + l * wop_distance(mu, m, &problem.x0)?.squared())
    })
}

/// Settings of the free-support fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct BarycenterOptions {
    /// Number of support points; defaults to the size of the largest input.
    pub support_size: Option<usize>,
    pub max_iterations: usize,
    /// Stop once no support point moves farther than this.
    pub tolerance: f64,
    /// Use exact quantile averaging for one-dimensional inputs.
    pub exact_1d: bool,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            support_size: None,
            max_iterations: 500,
            tolerance: 1e-8,
            exact_1d: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Barycenter {
    pub measure: DiscreteMeasure,
    pub iterations: usize,
    /// False when the iteration limit was hit; the best iterate is returned.
    pub converged: bool,
    /// True when every input was null and the result is the null measure.
    pub all_null: bool,
}

/// WOP barycenter of the problem's entries.
pub fn wop_barycenter(problem: &BarycenterProblem, options: BarycenterOptions) -> Result<Barycenter> {
    let dim = problem.x0.dim();
    let mass: f64 = problem.entries.iter().map(|(l, m)| l * m.mass()).sum();
    let live: Vec<(f64, DiscreteMeasure)> = problem
        .entries
        .iter()
        .filter(|(_, m)| m.mass() > 0.0)
        .map(|(l, m)| (l * m.mass(), m.normalize(&problem.x0)))
        .collect();
    if live.is_empty() {
        return Ok(Barycenter {
            measure: DiscreteMeasure::null(dim),
            iterations: 0,
            converged: true,
            all_null: true,
        });
    }
    let total: f64 = live.iter().map(|(w, _)| w).sum();
    let weights: Vec<f64> = live.iter().map(|(w, _)| w / total).collect();
    let measures: Vec<DiscreteMeasure> = live.into_iter().map(|(_, m)| m).collect();
    let bar = w2_barycenter(&weights, &measures, options)?;
    Ok(Barycenter {
        measure: bar.measure.scaled(mass)?,
        ..bar
    })
}

/// W₂ barycenter of probability measures.
///
/// One-dimensional inputs use exact quantile averaging unless disabled;
/// otherwise a free-support fixed-point iteration alternates exact couplings
/// with barycentric projection of the support. Weights of the support are
/// those of the largest input and stay fixed.
pub fn w2_barycenter(
    weights: &[f64],
    measures: &[DiscreteMeasure],
    options: BarycenterOptions,
) -> Result<Barycenter> {
    if weights.len() != measures.len() || measures.is_empty() {
        return Err(invalid("weights", "need one positive weight per measure"));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(invalid("weights", "weights must be > 0"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("weights", format!("weights sum to {total}, expected 1")));
    }
    let measures: Vec<DiscreteMeasure> = measures.iter().map(DiscreteMeasure::pruned).collect();
    if measures.iter().any(|m| m.is_empty()) {
        return Err(Error::EmptySupport);
    }
    let dim = measures[0].dim();
    if let Some(m) = measures.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.dim(),
        });
    }
    if measures.len() == 1 {
        return Ok(Barycenter {
            measure: measures[0].clone(),
            iterations: 0,
            converged: true,
            all_null: false,
        });
    }
    if dim == 1 && options.exact_1d {
        return Ok(Barycenter {
            measure: quantile_barycenter(weights, &measures),
            iterations: 0,
            converged: true,
            all_null: false,
        });
    }
    fixed_point(weights, &measures, options)
}

/// Exact 1-d barycenter: the quantile function is `Σ ω_i Q_i`.
fn quantile_barycenter(weights: &[f64], measures: &[DiscreteMeasure]) -> DiscreteMeasure {
    // Sorted atoms and cumulative levels per input.
    let sorted: Vec<(Vec<f64>, Vec<f64>)> = measures
        .iter()
        .map(|m| {
            let c = m.canonical();
            let total = c.mass();
            let xs = c.flat_points().to_vec();
            let mut acc = 0.0;
            let levels = c
                .weights()
                .iter()
                .map(|w| {
                    acc += w / total;
                    acc
                })
                .collect();
            (xs, levels)
        })
        .collect();
    let mut cursor = vec![0usize; measures.len()];
    let mut points = Vec::new();
    let mut masses = Vec::new();
    let mut level = 0.0;
    loop {
        let next = sorted
            .iter()
            .zip(&cursor)
            .map(|((_, lv), &k)| if k + 1 == lv.len() { 1.0 } else { lv[k] })
            .fold(1.0f64, f64::min);
        let x: f64 = sorted
            .iter()
            .zip(&cursor)
            .zip(weights)
            .map(|(((xs, _), &k), w)| w * xs[k])
            .sum();
        if next > level {
            points.push(x);
            masses.push(next - level);
        }
        level = next;
        if level >= 1.0 {
            break;
        }
        let mut moved = false;
        for ((_, lv), k) in sorted.iter().zip(cursor.iter_mut()) {
            if *k + 1 < lv.len() && lv[*k] <= level {
                *k += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    DiscreteMeasure::from_flat(1, points, masses)
        .expect("quantile averaging yields finite atoms")
        .canonical()
}

fn fixed_point(
    weights: &[f64],
    measures: &[DiscreteMeasure],
    options: BarycenterOptions,
) -> Result<Barycenter> {
    let dim = measures[0].dim();
    // Start from the largest input shifted onto the weighted mean.
    let largest = measures
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let seed = &measures[largest];
    let mut order: Vec<usize> = (0..seed.len()).collect();
    if let Some(k) = options.support_size.filter(|&k| k > 0 && k < seed.len()) {
        order.sort_by(|&a, &b| {
            seed.weights()[b]
                .total_cmp(&seed.weights()[a])
                .then_with(|| lex_cmp(seed.point(a), seed.point(b)))
        });
        order.truncate(k);
    }
    let mut target_mean = vec![0.0; dim];
    for (w, m) in weights.iter().zip(measures) {
        for (t, c) in target_mean.iter_mut().zip(m.mean().expect("inputs are non-null")) {
            *t += w * c;
        }
    }
    let seed_mean = seed.mean().expect("inputs are non-null");
    let mut points: Vec<f64> = Vec::with_capacity(order.len() * dim);
    let mut bw: Vec<f64> = Vec::with_capacity(order.len());
    for &i in &order {
        points.extend(
            seed.point(i)
                .iter()
                .zip(&seed_mean)
                .zip(&target_mean)
                .map(|((x, s), t)| x - s + t),
        );
        bw.push(seed.weights()[i]);
    }
    let total: f64 = bw.iter().sum();
    bw.iter_mut().for_each(|w| *w /= total);

    let mut iterations = 0;
    let mut converged = false;
    let mut current = DiscreteMeasure::from_flat(dim, points, bw.clone())?;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut next = vec![0.0; current.len() * dim];
        for (w, target) in weights.iter().zip(measures) {
            let sol = transport::solve_w2_exact(&current, target)?;
            for (k, j, p) in sol.coupling.nonzeros() {
                let scale = w * p / bw[k];
                for (acc, y) in next[k * dim..(k + 1) * dim].iter_mut().zip(target.point(j)) {
                    *acc += scale * y;
                }
            }
        }
        let movement = current
            .points()
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        current = DiscreteMeasure::from_flat(dim, next, bw.clone())?;
        if movement < options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Barycenter {
        measure: current,
        iterations,
        converged,
        all_null: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_flat(1, points.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn variance_examples() {
        let x0 = ReferencePoint::origin(1);
        let mu = m1(&[0.5, 1.0], &[1.0, 2.0]);
        let p = BarycenterProblem::new(vec![(1.0, mu.clone())], x0.clone()).unwrap();
        assert!(variance(&mu, &p).unwrap().abs() < 1e-12);

        let p = BarycenterProblem::new(
            vec![(0.5, m1(&[0.0], &[1.0])), (0.5, m1(&[2.0], &[1.0]))],
            x0.clone(),
        )
        .unwrap();
        assert!((variance(&m1(&[1.0], &[1.0]), &p).unwrap() - 1.0).abs() < 1e-12);

        let p = BarycenterProblem::new(
            vec![(0.5, m1(&[0.0], &[1.0])), (0.5, m1(&[4.0], &[3.0]))],
            x0,
        )
        .unwrap();
        assert!((variance(&m1(&[3.0], &[2.0]), &p).unwrap() - 37.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_barycenter() {
        let x0 = ReferencePoint::origin(1);
        let p = BarycenterProblem::new(
            vec![(0.5, m1(&[0.0], &[1.0])), (0.5, m1(&[4.0], &[3.0]))],
            x0,
        )
        .unwrap();
        let b = wop_barycenter(&p, BarycenterOptions::default()).unwrap();
        assert_eq!(b.measure.len(), 1);
        assert!((b.measure.mass() - 2.0).abs() < 1e-12);
        assert!((b.measure.point(0)[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_inputs() {
        let x0 = ReferencePoint::origin(1);
        let mu = m1(&[0.0, 1.0, 5.0], &[0.5, 0.25, 1.25]);
        let p = BarycenterProblem::new(vec![(1.0, mu.clone())], x0.clone()).unwrap();
        let b = wop_barycenter(&p, BarycenterOptions::default()).unwrap();
        assert_eq!(b.measure.canonical(), mu.canonical());

        let p = BarycenterProblem::new(vec![(0.3, mu.clone()), (0.7, mu.clone())], x0.clone())
            .unwrap();
        let b = wop_barycenter(&p, BarycenterOptions::default()).unwrap();
        let c = b.measure.canonical();
        let e = mu.canonical();
        for (x, y) in c.flat_points().iter().zip(e.flat_points()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in c.weights().iter().zip(e.weights()) {
            assert!((x - y).abs() < 1e-12);
        }

        let null = DiscreteMeasure::null(1);
        let p = BarycenterProblem::new(vec![(1.0, null)], x0).unwrap();
        assert!(wop_barycenter(&p, BarycenterOptions::default()).unwrap().all_null);
    }

    #[test]
    fn dirac_fixed_point() {
        let opts = BarycenterOptions {
            exact_1d: false,
            ..Default::default()
        };
        let b = w2_barycenter(
            &[0.25, 0.75],
            &[m1(&[1.0], &[1.0]), m1(&[5.0], &[1.0])],
            opts,
        )
        .unwrap();
        assert!((b.measure.point(0)[0] - 4.0).abs() < 1e-12);
        assert!(b.converged);
    }

    #[test]
    fn quantile_average_two_point() {
        let b = quantile_barycenter(
            &[0.5, 0.5],
            &[m1(&[0.0, 1.0], &[0.5, 0.5]), m1(&[2.0], &[1.0])],
        );
        assert_eq!(b.flat_points(), &[1.0, 1.5]);
        assert_eq!(b.weights(), &[0.5, 0.5]);
    }
}
