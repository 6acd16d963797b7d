use conflap::linalg::simplex::project_simplex;
use conflap::optimizer::{f2, f2eps, floor_truncate, RegParams};
use conflap::oracle::{circle_spectrum_discrete, product_spectrum_analytic, random_factor, smooth_field, trial_rng, ProductExample};
use conflap::speclib::{generalized_spectrum, lambda2_orthogonal, negative_count};
use conflap::variation::one_sided_derivatives;
use conflap::{ConformalFactor, DiscreteManifold, SolverOptions};
use proptest::prelude::*;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn example() -> ProductExample {
    ProductExample::new(12, 8).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn field(ex: &ProductExample, seed: u64, amp: f64) -> ConformalFactor {
    random_factor(&ex.manifold, &ex.angles, &mut trial_rng(seed, 0), amp * 0.1, amp).unwrap()
}

fn direction(ex: &ProductExample, seed: u64) -> Vec<f64> {
    smooth_field(&ex.angles, &mut trial_rng(seed, 1), 1.0).iter().map(|v| v.ln()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn stiffness_kills_constants(na in 8usize..24, nb in 8usize..12, ra in 0.2f64..3.0, rb in 0.2f64..3.0) {
        let a = DiscreteManifold::build_circle(ra, na).unwrap();
        let b = DiscreteManifold::build_circle(rb, nb).unwrap().with_dim(3);
        for m in [a.clone(), DiscreteManifold::product(&a, &b)] {
            let k = m.stiffness();
            let ones = vec![1.0; m.node_count()];
            let r = k.matvec(&ones).iter().fold(0.0f64, |x, v| x.max(v.abs()));
            let scale = k.triplets().map(|(_, _, v)| v.abs()).fold(0.0f64, f64::max);
            prop_assert!(r <= 1e-12 * scale);
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum(c1 in -4.0f64..-0.5, c2 in -4.0f64..-0.5) {
        let spectrum = |c: f64| {
            let ex = ProductExample::with_potential(10, 8, c).unwrap();
            generalized_spectrum(&ex.manifold, &ex.unit_factor(), 4, &opts()).unwrap()
        };
        let (s1, s2) = (spectrum(c1), spectrum(c2));
        for i in 0..4 {
            prop_assert!(((s1.eigenvalues[i] - s2.eigenvalues[i]) - (c1 - c2)).abs() <= 1e-10);
        }
    }

    #[test]
    fn tensor_sum_spectrum(na in 8usize..16, nb in 8usize..11, v in -3.0f64..-0.5) {
        let ex = ProductExample::with_potential(na, nb, v).unwrap();
        let exact = product_spectrum_analytic(
            &circle_spectrum_discrete(ProductExample::CIRCLE_RADIUS, na),
            &circle_spectrum_discrete(ProductExample::H_RADIUS, nb),
            v,
        );
        let s = generalized_spectrum(&ex.manifold, &ex.unit_factor(), 5, &opts()).unwrap();
        for i in 0..5 {
            prop_assert!((s.eigenvalues[i] - exact.merged[i]).abs() <= 1e-9 * exact.merged[i].abs().max(1.0));
        }
    }

    #[test]
    fn inertia_is_conformally_invariant(seed in any::<u64>(), amp in 0.01f64..1.5) {
        let ex = example();
        let base = negative_count(&ex.manifold, &ex.unit_factor(), &opts()).unwrap();
        prop_assert_eq!(negative_count(&ex.manifold, &field(&ex, seed, amp), &opts()).unwrap(), base);
    }

    #[test]
    fn eigenvalues_scale_homogeneously(seed in any::<u64>(), s in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let ex = example();
        let u = field(&ex, seed, 0.5);
        let a = generalized_spectrum(&ex.manifold, &u, 3, &opts()).unwrap();
        let b = generalized_spectrum(&ex.manifold, &u.scaled(s), 3, &opts()).unwrap();
        let f = s.powf(-u.weight_exponent());
        for k in 0..3 {
            prop_assert!(rel(b.eigenvalues[k], f * a.eigenvalues[k]) <= 1e-10);
        }
    }

    #[test]
    fn lambda2_grows_with_the_factor(seed in any::<u64>(), bump in 0.0f64..1.0) {
        let ex = example();
        let u = field(&ex, seed, 0.5);
        let g = smooth_field(&ex.angles, &mut trial_rng(seed, 2), 1.0);
        let w = u.with_values(u.values().iter().zip(&g).map(|(a, b)| a * (1.0 + bump * b)).collect()).unwrap();
        let l2u = generalized_spectrum(&ex.manifold, &u, 2, &opts()).unwrap().lambda2();
        let l2w = generalized_spectrum(&ex.manifold, &w, 2, &opts()).unwrap().lambda2();
        prop_assume!(l2u < 0.0);
        prop_assert!(l2w >= l2u - 1e-12 * l2u.abs());
    }

    #[test]
    fn orthogonal_characterization_matches(seed in any::<u64>()) {
        let ex = example();
        let u = field(&ex, seed, 0.5);
        let s = generalized_spectrum(&ex.manifold, &u, 3, &opts()).unwrap();
        prop_assert!(s.max_residual() <= opts().solver_tol);
        let l2o = lambda2_orthogonal(&ex.manifold, &u, &opts()).unwrap();
        prop_assert!((l2o - s.lambda2()).abs() <= 1e-9);
    }

    #[test]
    fn one_sided_pair_structure(seed in any::<u64>(), s in 0.1f64..10.0, unit in any::<bool>()) {
        let ex = example();
        let u = if unit { ex.unit_factor() } else { field(&ex, seed, 0.3) };
        let h = direction(&ex, seed);
        let p = one_sided_derivatives(&ex.manifold, &u, &h, &opts()).unwrap();
        prop_assert!(p.right <= p.left + 1e-12);
        let hs: Vec<f64> = h.iter().map(|v| s * v).collect();
        let ps = one_sided_derivatives(&ex.manifold, &u, &hs, &opts()).unwrap();
        prop_assert!((ps.right - s * p.right).abs() <= 1e-12 * s.max(1.0) * p.right.abs().max(1.0));
        prop_assert!((ps.left - s * p.left).abs() <= 1e-12 * s.max(1.0) * p.left.abs().max(1.0));
        let hn: Vec<f64> = h.iter().map(|v| -v).collect();
        let pn = one_sided_derivatives(&ex.manifold, &u, &hn, &opts()).unwrap();
        prop_assert!((pn.right + p.left).abs() <= 1e-12 * p.left.abs().max(1.0));
        prop_assert!((pn.left + p.right).abs() <= 1e-12 * p.right.abs().max(1.0));
    }

    #[test]
    fn f2_is_scale_invariant_and_dominates_f2eps(seed in any::<u64>(), s in 0.05f64..20.0, eps in 1e-4f64..0.5) {
        let ex = example();
        let u = field(&ex, seed, 0.5);
        let a = f2(&ex.manifold, &u, &opts()).unwrap();
        prop_assert!(rel(f2(&ex.manifold, &u.scaled(s), &opts()).unwrap(), a) <= 1e-10);
        prop_assert!(f2eps(&ex.manifold, &u, eps, &opts()).unwrap() < a);
    }

    #[test]
    fn gamma1_exceeds_one(seed in any::<u64>(), eps in 1e-4f64..0.5) {
        let ex = example();
        let u = field(&ex, seed, 0.5);
        let l2 = generalized_spectrum(&ex.manifold, &u, 2, &opts()).unwrap().lambda2();
        let r = RegParams::compute(&ex.manifold, &u, eps, l2).unwrap();
        prop_assert!(r.gamma1 > 1.0 && r.gamma2 > 0.0);
    }

    #[test]
    fn floor_truncation(seed in any::<u64>(), frac in 0.0f64..2.0) {
        let ex = example();
        let m = &ex.manifold;
        let u = field(&ex, seed, 1.5).normalized(m);
        let below = floor_truncate(&u, u.min() * 0.999).unwrap();
        prop_assert_eq!(below.values(), u.values());
        let delta = u.min() + frac * (u.max() - u.min());
        let w = floor_truncate(&u, delta).unwrap();
        let n = u.critical_exponent();
        prop_assert!(w.conformal_volume(m) <= 1.0 + delta.powf(n) + 1e-12);
        let l2u = generalized_spectrum(m, &u, 2, &opts()).unwrap().lambda2();
        let l2w = generalized_spectrum(m, &w, 2, &opts()).unwrap().lambda2();
        prop_assume!(l2w < 0.0);
        prop_assert!(l2w >= l2u - 1e-12 * l2u.abs());
    }

    #[test]
    fn simplex_projection(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let q = project_simplex(&p);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        // optimality: v - p has the same value on every positive coordinate
        let shift: Vec<f64> = v.iter().zip(&p).filter(|(_, p)| **p > 0.0).map(|(v, p)| v - p).collect();
        for s in &shift {
            prop_assert!((s - shift[0]).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }
}
