mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wop_core::unbalanced::*;
use wop_core::{solve_w2_exact, wop_distance, DiscreteMeasure, ReferencePoint};

/// `min_{γ ≥ 0} a f(γ/a) + b f(γ/b) + γ c` for the KL entropy, by bisection on
/// the derivative `log(γ/a) + log(γ/b) + c`.
fn kl_dirac_oracle(a: f64, b: f64, c: f64) -> f64 {
    if c.is_infinite() {
        return a + b;
    }
    let kl = |g: f64, m: f64| if g == 0.0 { m } else { g * (g / m).ln() + m - g };
    let (mut lo, mut hi) = (0.0f64, a.max(b) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (mid / a).ln() + (mid / b).ln() + c > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    kl(g, a) + kl(g, b) + g * c
}

#[test]
fn dirac_values_match_scalar_minimization() {
    let mut r = rng(50);
    for _ in 0..20 {
        let (a, b) = (r.random_range(0.1..3.0), r.random_range(0.1..3.0));
        let d = r.random_range(0.0..2.5);
        let mu = m1(&[0.0], &[a]);
        let nu = m1(&[d], &[b]);
        let oracle = kl_dirac_oracle(a, b, hk_cost(&[0.0], &[d]));
        assert!((oracle - hk_dirac_squared(a, b, d)).abs() < 1e-9);
        let p = EtProblem::hellinger_kantorovich();
        let ent = et_value(&mu, &nu, &p, 1e-4).unwrap();
        assert!(ent.converged);
        assert!((ent.value - oracle).abs() <= 1e-3, "{} vs {oracle}", ent.value);
        let exact = et_value(&mu, &nu, &p, 0.0).unwrap();
        assert!((exact.value - oracle).abs() <= 1e-9);
    }
}

#[test]
fn exact_small_supports_match_entropic_limit() {
    let mut r = rng(51);
    for _ in 0..5 {
        let mu = random_sized(&mut r, 1, 1..3, 0.5..2.0);
        let nu = random_sized(&mut r, 1, 1..3, 0.5..2.0);
        let p = EtProblem::hellinger_kantorovich();
        let exact = et_value(&mu, &nu, &p, 0.0).unwrap().value;
        let ent = et_value(&mu, &nu, &p, 1e-4).unwrap().value;
        // the entropic plan is feasible, so its primal value is never lower
        assert!(ent >= exact - 1e-9);
        assert!(ent - exact <= 5e-3, "{ent} vs {exact}");
    }
}

#[test]
fn total_variation_entropy() {
    // TV with unit slopes: transporting costs c, destroying and creating costs 2
    let p = EtProblem {
        entropy: EntropyFunction::TotalVariation,
        cost: GroundCost::SquaredEuclidean,
    };
    let near = et_value(&m1(&[0.0], &[1.0]), &m1(&[1.0], &[1.0]), &p, 0.0).unwrap().value;
    assert!((near - 1.0).abs() < 1e-9);
    let far = et_value(&m1(&[0.0], &[1.0]), &m1(&[3.0], &[1.0]), &p, 0.0).unwrap().value;
    assert!((far - 2.0).abs() < 1e-9);
    let ent = et_value(&m1(&[0.0], &[1.0]), &m1(&[3.0], &[1.0]), &p, 1e-3).unwrap().value;
    assert!((ent - 2.0).abs() < 1e-2);
}

#[test]
fn null_measure_bound() {
    let mut r = rng(52);
    let p = EtProblem::hellinger_kantorovich();
    for _ in 0..20 {
        let n = r.random_range(1..20);
        let mu = random_measure(&mut r, 2, n, 1.0);
        let v = et_value(&mu, &DiscreteMeasure::null(2), &p, 1e-2).unwrap().value;
        assert!(v <= 1.0 + 1e-6);
        assert!(v <= et_null_bound(&p.entropy) + 1e-6);
    }
}

#[test]
fn separates_hk_from_wop() {
    let mu = m1(&[0.0], &[1.0]);
    let nu = m1(&[2.0], &[1.0]);
    let hk = hk_distance(&mu, &nu, 0.0).unwrap();
    let w2 = solve_w2_exact(&mu, &nu).unwrap().cost.sqrt();
    let wop = wop_distance(&mu, &nu, &ReferencePoint::origin(1)).unwrap().distance;
    assert!((hk - 2f64.sqrt()).abs() < 1e-9);
    assert!((w2 - 2.0).abs() < 1e-12);
    assert!((wop - 2.0).abs() < 1e-12);
    assert!(hk < w2);
}

#[test]
fn mass_profiles() {
    let mu = m1(&[0.0], &[1.0]);
    let nu = m1(&[2.0], &[1.0]);
    let prof = compare_geodesic_masses(&mu, &nu, 10, 1e-3).unwrap();
    for row in &prof.rows {
        assert_eq!(row.mass_wop, 1.0);
        let t = row.t;
        // beyond π/2 the cone geodesic passes through the apex
        assert!((row.mass_hk - ((1.0 - t).powi(2) + t * t)).abs() < 1e-6);
    }
    assert!(prof.metadata()["hk_method"].as_str().unwrap().contains("entropic"));
}

#[test]
fn rejects_bad_parameters() {
    let mu = m1(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
    let p = EtProblem::hellinger_kantorovich();
    assert!(et_value(&mu, &mu, &p, -1.0).is_err());
    assert!(et_value(&mu, &mu, &p, 0.0).is_err());
    let custom = EtProblem {
        entropy: EntropyFunction::custom(|t| (t - 1.0) * (t - 1.0), 1.0, f64::INFINITY),
        cost: GroundCost::SquaredEuclidean,
    };
    assert!(et_value(&mu, &mu, &custom, 1e-2).is_err());
    let small = m1(&[0.0], &[1.0]);
    let v = et_value(&small, &m1(&[0.5], &[2.0]), &custom, 0.0).unwrap();
    assert!(v.converged && v.value.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetric(mu in measure_strategy(1, 6), nu in measure_strategy(1, 6)) {
        let p = EtProblem::hellinger_kantorovich();
        let ab = et_value(&mu, &nu, &p, 1e-2).unwrap();
        let ba = et_value(&nu, &mu, &p, 1e-2).unwrap();
        prop_assert!(ab.converged && ba.converged);
        prop_assert!((ab.value - ba.value).abs() <= 1e-6 * (1.0 + ab.value));
    }

    #[test]
    fn bounded_by_creation_and_destruction(mu in measure_strategy(2, 6), nu in measure_strategy(2, 6)) {
        // the zero plan is admissible and costs f(0)(m_μ + m_ν)
        let p = EtProblem::hellinger_kantorovich();
        let v = et_value(&mu, &nu, &p, 1e-2).unwrap().value;
        prop_assert!(v >= -1e-9);
        prop_assert!(v <= mu.mass() + nu.mass() + 1e-6);
    }
}
