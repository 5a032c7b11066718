use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starrad::net::{forward_jet, init_network, Activation, NetworkSpec};
use starrad::pde::{Domain, Pde, Problem};
use starrad::quad::{allocate, error_bounds, refined_trapezoid, uniform_trapezoid, Interval};
use starrad::rad::{build_density, make_candidates, weighted_sample_indices, Criterion, DensityParams};
use starrad::Interval64;

fn maxima_and_budget() -> impl Strategy<Value = (Vec<f64>, usize)> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e6f64], 1..60)
        .prop_flat_map(|m| {
            let k = m.len();
            (Just(m), k..k + 400)
        })
}

proptest! {
    #[test]
    fn allocation_spends_the_budget((maxima, total) in maxima_and_budget()) {
        let counts = allocate(&maxima, total).unwrap();
        prop_assert_eq!(counts.len(), maxima.len());
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
        prop_assert!(counts.iter().all(|c| *c >= 1));
    }

    #[test]
    fn allocation_ignores_a_common_scale((maxima, total) in maxima_and_budget(), p in 0i32..6) {
        let scaled: Vec<f64> = maxima.iter().map(|m| m * 4f64.powi(p)).collect();
        prop_assert_eq!(allocate(&maxima, total).unwrap(), allocate(&scaled, total).unwrap());
    }

    #[test]
    fn refined_bound_never_exceeds_uniform((maxima, total) in maxima_and_budget(), w in 0.01..10.0f64) {
        let iv = Interval64::new(-1.0, -1.0 + w).unwrap();
        let b = error_bounds(&maxima, iv, total).unwrap();
        prop_assert!(b.refined <= b.uniform * (1.0 + 1e-12), "{:?}", b);
        prop_assert!(b.refined >= 0.0);
    }

    #[test]
    fn equal_maxima_with_divisible_budget_give_equal_bounds(k in 1usize..30, per in 1usize..10, m in 1e-3..1e3f64) {
        let iv = Interval64::new(0.0, 2.0).unwrap();
        let b = error_bounds(&vec![m; k], iv, k * per).unwrap();
        prop_assert!((b.refined - b.uniform).abs() <= 1e-12 * b.uniform);
    }

    #[test]
    fn both_rules_integrate_affine_functions(
        a in -100.0..100.0f64, b in -100.0..100.0f64,
        lo in -10.0..10.0f64, w in 0.01..10.0f64,
        n in 1usize..150, frac in 0.0..1.0f64,
    ) {
        let hi = lo + w;
        let iv = Interval::new(lo, hi).unwrap();
        let k = 1 + ((n - 1) as f64 * frac) as usize;
        let exact = a * w + 0.5 * b * (hi * hi - lo * lo);
        let f = |x: f64| a + b * x;
        let tol = 1e-10 * exact.abs().max(a.abs() * w).max(1e-12);
        prop_assert!((uniform_trapezoid(f, iv, n).unwrap() - exact).abs() <= tol);
        let (r, plan) = refined_trapezoid(f, |_| 0.0, iv, n, k, 50).unwrap();
        prop_assert_eq!(plan.counts.iter().sum::<usize>(), n);
        prop_assert!((r - exact).abs() <= tol);
    }

    #[test]
    fn density_is_normalised_and_order_preserving(
        values in prop::collection::vec(0.0..1e3f64, 1..200),
        tau in 0.1..3.0f64,
        c in 0.0..2.0f64,
    ) {
        let params = DensityParams::new(tau, c).unwrap();
        let p = build_density(&values, Criterion::Res, &params).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] > values[j] {
                    prop_assert!(p[i] >= p[j] * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn density_ignores_the_scale_of_the_criterion(
        values in prop::collection::vec(0.0..1e3f64, 1..100),
        scale in 1e-3..1e3f64,
        c in 0.0..1.0f64,
    ) {
        let params = DensityParams::new(0.5, c).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let p = build_density(&values, Criterion::Grad, &params).unwrap();
        let q = build_density(&scaled, Criterion::Grad, &params).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn sampling_draws_distinct_positive_weight_indices(
        weights in prop::collection::vec(prop_oneof![Just(0.0), 1e-6..10.0f64], 1..100),
        frac in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        let n = (weights.len() as f64 * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = weighted_sample_indices(&weights, n, &mut rng).unwrap();
        prop_assert_eq!(picked.len(), n);
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), n);
        // zero-weight items appear only once every positive one is taken
        let zeros = picked.iter().filter(|i| weights[**i] == 0.0).count();
        prop_assert_eq!(zeros, n.saturating_sub(positive));
    }

    #[test]
    fn candidates_are_interior_and_reproducible(count in 1usize..500, seed in any::<u64>(), event in 0u64..50) {
        let domain = Domain::new(vec![Interval::new(0.0, 1.0).unwrap(), Interval::new(-2.0, 3.0).unwrap()]).unwrap();
        let a: Array2<f64> = make_candidates(&domain, count, seed, event);
        prop_assert_eq!(a.dim(), (count, 2));
        for row in a.rows() {
            prop_assert!(row[0] > 0.0 && row[0] < 1.0 && row[1] > -2.0 && row[1] < 3.0);
        }
        prop_assert_eq!(a, make_candidates(&domain, count, seed, event));
    }

    #[test]
    fn input_scaling_is_differentiated_through(
        seed in any::<u64>(),
        lo in -50.0..50.0f64,
        w in 0.5..500.0f64,
        t in 0.05..0.95f64,
    ) {
        let spec = NetworkSpec::new(1, vec![6, 6], Activation::Tanh)
            .unwrap()
            .with_input_bounds(&[(lo, lo + w)])
            .unwrap();
        let params = init_network::<f64>(&spec, seed).into_inner();
        let x = lo + t * w;
        let value = |x: f64| forward_jet(&spec, &params, &[x]).unwrap().value;
        let jet = forward_jet(&spec, &params, &[x]).unwrap();
        let h = 1e-4 * w;
        let g = (value(x + h) - value(x - h)) / (2.0 * h);
        let q = (value(x + h) - 2.0 * jet.value + value(x - h)) / (h * h);
        let scale = 2.0 / w;
        prop_assert!((jet.grad[0] - g).abs() <= 1e-5 * scale.max(g.abs()));
        prop_assert!((jet.hess[0] - q).abs() <= 1e-4 * (scale * scale).max(q.abs()));
    }
}

#[test]
fn problem_overrides_round_trip_through_constants() {
    for name in Problem::<f64>::NAMES {
        let p: Problem<f64> = name.parse().unwrap();
        let constants = p.constants();
        let overrides = constants.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(Problem::<f64>::build(name, &overrides).unwrap(), p);
    }
}
