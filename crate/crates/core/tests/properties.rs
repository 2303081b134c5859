use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sill_koopman::bench::{make_snapshots, rk4_integrate, spanned_field, FnField, VectorField};
use sill_koopman::closure::{
    compute_bounds, error_term_linearization, hyperplane_distance, lie_approx_intermediate,
    lie_approx_linear, lie_derivative_exact, weighted_product_error,
};
use sill_koopman::dictionary::logistic;
use sill_koopman::regression::{fit_generator, project_state, solve_least_squares};
use sill_koopman::stats::{
    expected_logistic, integrate_against_product, mc_expected_logistic, product_cdf, product_pdf,
};
use sill_koopman::{ConjLogistic, ScalarLogisticParams, SillDictionary, SpannedField};

fn conj(m: usize) -> impl Strategy<Value = ConjLogistic> {
    (
        prop::collection::vec(-5.0..5.0f64, m),
        prop::collection::vec(0.5..10.0f64, m),
    )
        .prop_map(|(mu, alpha)| ConjLogistic::new(mu, alpha).unwrap())
}

fn dictionary() -> impl Strategy<Value = SillDictionary> {
    (1usize..=3, 1usize..=4).prop_flat_map(|(m, nl)| {
        prop::collection::vec(conj(m), nl).prop_map(move |ls| SillDictionary::new(m, ls).unwrap())
    })
}

fn point(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, m)
}

fn spanned(m: usize, nl: usize) -> impl Strategy<Value = SpannedField> {
    (
        prop::collection::vec(conj(m), nl),
        prop::collection::vec(-2.0..2.0f64, m * nl),
    )
        .prop_map(move |(ls, w)| {
            let d = SillDictionary::new(m, ls).unwrap();
            SpannedField::new(d, DMatrix::from_row_slice(m, nl, &w)).unwrap().completed()
        })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn logistic_stays_in_unit_interval(mu in -5.0..5.0f64, alpha in 0.5..10.0f64, y in -5.0..5.0f64) {
        let v = ScalarLogisticParams::new(mu, alpha).eval(y);
        prop_assert!((0.0..=1.0).contains(&v));
        if (alpha * (y - mu)).abs() <= 30.0 {
            prop_assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn logistic_is_monotone(mu in -5.0..5.0f64, alpha in 0.5..10.0f64, y in -5.0..5.0f64, dy in 1e-3..2.0f64) {
        let s = ScalarLogisticParams::new(mu, alpha);
        prop_assert!(s.eval(y) <= s.eval(y + dy));
        if (alpha * (y - mu)).abs() <= 20.0 && (alpha * (y + dy - mu)).abs() <= 20.0 {
            prop_assert!(s.eval(y) < s.eval(y + dy));
        }
    }

    #[test]
    fn complement_matches_one_minus(x in -30.0..30.0f64) {
        prop_assert!((logistic(-x) - (1.0 - logistic(x))).abs() <= 1e-15);
    }

    #[test]
    fn conjunctive_in_unit_interval(f in conj(3), y in point(3)) {
        let v = f.eval(&y).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn gradient_matches_central_differences(f in conj(3), y in point(3)) {
        let g = f.grad(&y).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[i] += h;
            ym[i] -= h;
            let fd = (f.eval(&yp).unwrap() - f.eval(&ym).unwrap()) / (2.0 * h);
            prop_assert!(close(g[i], fd, 1e-5), "component {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn jacobian_matches_central_differences(d in dictionary(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..d.m()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let jac = d.lift_jacobian(&y).unwrap();
        let h = 1e-6;
        for i in 0..d.m() {
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[i] += h;
            ym[i] -= h;
            let fd = (d.lift(&yp).unwrap() - d.lift(&ym).unwrap()) / (2.0 * h);
            for r in 0..d.len() {
                prop_assert!(close(jac[(r, i)], fd[r], 1e-5));
            }
        }
    }

    #[test]
    fn domination_is_a_partial_order(f in conj(2), g in conj(2), h in conj(2)) {
        prop_assert!(f.dominates(&f).unwrap());
        if f.dominates(&g).unwrap() && g.dominates(&f).unwrap() {
            prop_assert_eq!(f.mu(), g.mu());
        }
        if f.dominates(&g).unwrap() && g.dominates(&h).unwrap() {
            prop_assert!(f.dominates(&h).unwrap());
        }
    }

    #[test]
    fn join_is_a_semilattice(f in conj(3), g in conj(3), h in conj(3)) {
        let fg = f.join(&g).unwrap();
        prop_assert_eq!(&fg, &g.join(&f).unwrap());
        prop_assert_eq!(fg.join(&h).unwrap(), f.join(&g.join(&h).unwrap()).unwrap());
        prop_assert_eq!(f.join(&f).unwrap(), f.clone());
        // the join sits at or above both arguments in the orthant order
        prop_assert!(f.dominates(&fg).unwrap() && g.dominates(&fg).unwrap());
    }

    #[test]
    fn join_completion_is_closed(d in dictionary()) {
        let c = d.join_completion();
        prop_assert_eq!(&c.logistics()[..d.n_logistics()], d.logistics());
        for f in c.logistics() {
            for g in c.logistics() {
                let j = f.join(g).unwrap();
                prop_assert!(c.logistics().contains(&j));
            }
        }
    }

    #[test]
    fn projection_recovers_state(d in dictionary(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..d.m()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let z: Vec<f64> = d.lift(&y).unwrap().iter().copied().collect();
        prop_assert_eq!(project_state(&z, &d).unwrap(), y);
    }

    #[test]
    fn hyperplane_distance_zero_on_center_coordinate(d in dictionary(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y: Vec<f64> = (0..d.m()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let off = hyperplane_distance(&y, &d).unwrap();
        let expected = d
            .logistics()
            .iter()
            .flat_map(|f| f.mu().iter().zip(&y).map(|(mu, v)| (mu - v).abs()))
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(off, expected);
        let i = rng.gen_range(0..d.m());
        y[i] = d.logistics()[0].mu()[i];
        prop_assert_eq!(hyperplane_distance(&y, &d).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_equations_are_orthogonal(n in 2usize..6, extra in 0usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = n + 2 + extra;
        let g = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
        let a = DMatrix::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
        let k = solve_least_squares(&g, &a, 0.0).unwrap();
        let ortho = ((&a - &k * &g) * g.transpose()).norm();
        prop_assert!(ortho <= 1e-8 * a.norm() * g.norm(), "{ortho}");
    }

    #[test]
    fn exact_data_is_recovered(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = 3 * n;
        let g = DMatrix::from_fn(n, r, |i, j| if i == j % n { 2.0 } else { 0.0 } + rng.gen_range(-0.5..0.5));
        let k0 = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let k = solve_least_squares(&g, &(&k0 * &g), 0.0).unwrap();
        prop_assert!((&k - &k0).norm() <= 1e-6 * k0.norm());
    }

    #[test]
    fn fitting_is_bitwise_deterministic(sf in spanned(2, 2)) {
        let pts: Vec<Vec<f64>> = (0..30).map(|k| vec![-2.0 + 0.13 * k as f64, 1.5 - 0.1 * k as f64]).collect();
        let s = make_snapshots(&spanned_field(&sf), &pts).unwrap();
        let k1 = fit_generator(&s, sf.dictionary(), 0.0).unwrap();
        let k2 = fit_generator(&s, sf.dictionary(), 0.0).unwrap();
        prop_assert_eq!(k1.k_row_major(), k2.k_row_major());
    }

    #[test]
    fn identity_chain_holds(sf in spanned(2, 3), y in point(2)) {
        for l in 0..sf.dictionary().n_logistics() {
            let exact = lie_derivative_exact(l, &sf, &y).unwrap();
            let inter = lie_approx_intermediate(l, &sf, &y).unwrap();
            let wpe = weighted_product_error(l, &sf, &y).unwrap();
            let linear = lie_approx_linear(l, &sf, &y).unwrap();
            let lin_err = error_term_linearization(l, &sf, &y).unwrap();
            let s1 = exact.abs().max(inter.abs()).max(wpe.abs());
            let s2 = linear.abs().max(inter.abs()).max(lin_err.abs());
            prop_assert!((exact - (inter + wpe)).abs() <= 1e-12 * s1.max(f64::MIN_POSITIVE));
            prop_assert!((linear - (inter + lin_err)).abs() <= 1e-12 * s2.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn weighted_error_bound_covers_every_grid_point(sf in spanned(2, 2), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]).collect();
        let rep = compute_bounds(&sf, &grid, 1.0, 1e-9);
        prop_assume!(rep.is_ok());
        let rep = rep.unwrap();
        for y in &grid {
            for l in 0..sf.dictionary().n_logistics() {
                let gap = (lie_derivative_exact(l, &sf, y).unwrap() - lie_approx_intermediate(l, &sf, y).unwrap()).abs();
                prop_assert!(gap <= rep.bar_b1 * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn snapshots_equal_field(sf in spanned(2, 2), pts in prop::collection::vec(point(2), 1..20)) {
        let f = spanned_field(&sf);
        let s = make_snapshots(&f, &pts).unwrap();
        let bound: f64 = sf.weights().row_iter().map(|r| r.iter().map(|w| w.abs()).sum::<f64>()).fold(0.0, f64::max);
        for (i, p) in pts.iter().enumerate() {
            let v = f.eval(p);
            prop_assert_eq!(s.target(i), v.clone());
            prop_assert!(v.iter().all(|x| x.abs() <= bound));
        }
    }

    #[test]
    fn product_pdf_is_even(z in 1e-6..1.99f64, a in 0.1..10.0f64) {
        let z = z * a * a;
        prop_assert_eq!(product_pdf(z, a).unwrap(), product_pdf(-z, a).unwrap());
        prop_assert!((product_cdf(z, a).unwrap() + product_cdf(-z, a).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn product_pdf_normalizes(a in 0.1..10.0f64) {
        let total = integrate_against_product(a, 200, |_| 1.0).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn quadrature_agrees_with_monte_carlo(a in 0.5..8.0f64, seed in any::<u64>()) {
        let q = expected_logistic(a, 200).unwrap();
        let (mc, _) = mc_expected_logistic(a, 200_000, seed).unwrap();
        prop_assert!((q.expectation - mc.mean).abs() <= (3.0 * mc.stderr).max(1e-3));
    }
}

#[test]
fn product_cdf_matches_sampled_distribution() {
    let a = 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut z: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let (x, y, w): (f64, f64, f64) = (rng.gen_range(-a..a), rng.gen_range(-a..a), rng.gen_range(-a..a));
            x * (y - w)
        })
        .collect();
    z.sort_by(f64::total_cmp);
    let c = 2.0 * a * a;
    let mut gap: f64 = 0.0;
    for k in 1..200 {
        let t = -c + 2.0 * c * k as f64 / 200.0;
        let empirical = z.partition_point(|&v| v <= t) as f64 / z.len() as f64;
        gap = gap.max((empirical - product_cdf(t, a).unwrap()).abs());
    }
    assert!(gap < 5e-3, "{gap}");
}

#[test]
fn rk4_is_fourth_order() {
    let decay = FnField::new(1, |y: &[f64]| vec![-y[0]]);
    let err = |steps: usize| {
        let t = rk4_integrate(&decay, &[1.0], 1.0 / steps as f64, steps).unwrap();
        (t.states.last().unwrap()[0] - (-1f64).exp()).abs()
    };
    let ratio = err(20) / err(40);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}
