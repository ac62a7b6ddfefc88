#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use wop_core::DiscreteMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random measure with `n` atoms in `[-2, 2]^dim` and the given total mass.
pub fn random_measure(rng: &mut impl Rng, dim: usize, n: usize, mass: f64) -> DiscreteMeasure {
    let points: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w * mass / s).collect();
    DiscreteMeasure::from_flat(dim, points, weights).unwrap()
}

pub fn uniform_measure(points: Vec<f64>, dim: usize, mass: f64) -> DiscreteMeasure {
    let n = points.len() / dim;
    DiscreteMeasure::from_flat(dim, points, vec![mass / n as f64; n]).unwrap()
}

pub fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::from_flat(1, points.to_vec(), weights.to_vec()).unwrap()
}

pub fn sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Quantile functions of two equal-mass 1-d measures, integrated against
/// `|F⁻¹ − G⁻¹|^p`.
pub fn quantile_cost_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m
            .points()
            .map(|x| x[0])
            .zip(m.weights().iter().copied())
            .filter(|(_, w)| *w > 0.0)
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let step = ra.min(rb);
        total += step * (a[i].0 - b[j].0).abs().powf(p);
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    total
}

/// Minimum of `Σ c(x_i, y_σ(i))/n` over all permutations.
pub fn brute_force_assignment(x: &[Vec<f64>], y: &[Vec<f64>], c: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let n = x.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let s: f64 = p.iter().enumerate().map(|(i, &j)| c(&x[i], &y[j])).sum();
        best = best.min(s / n as f64);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Exact `WOP²` between two Diracs.
pub fn wop2_diracs(a: f64, x: &[f64], b: f64, y: &[f64], x0: &[f64]) -> f64 {
    let gap: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(x0)
        .map(|((xi, yi), c)| a * (xi - c) - b * (yi - c))
        .collect();
    (a - b) * (a - b) + gap.iter().map(|g| g * g).sum::<f64>()
}

pub fn measure_strategy(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (1..=max_atoms)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(-3.0f64..3.0, n * dim),
                prop::collection::vec(0.01f64..2.0, n),
            )
        })
        .prop_map(move |(p, w)| DiscreteMeasure::from_flat(dim, p, w).unwrap())
}

/// Positive measure or, with probability about 1/8, the null measure.
pub fn measure_or_null(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop_oneof![
        7 => measure_strategy(dim, max_atoms),
        1 => Just(DiscreteMeasure::null(dim)),
    ]
}

/// Random measure with a random atom count and mass drawn from the ranges.
pub fn random_sized(
    rng: &mut impl Rng,
    dim: usize,
    atoms: std::ops::Range<usize>,
    mass: std::ops::Range<f64>,
) -> DiscreteMeasure {
    let n = rng.random_range(atoms);
    let m = rng.random_range(mass);
    random_measure(rng, dim, n, m)
}
