use std::collections::HashSet;

use idla_core::aggregation::{error_radii, grow, grow_stopped, Configuration};
use idla_core::experiments::subdivide;
use idla_core::lattice::{ball_sites, ceil_square, Ball, Dim, Site};
use idla_core::tails::{lower_tail_bound, optimize_lambda, upper_tail_bound, Tail, TailBoundInput, UPPER_LAMBDA_MAX};
use idla_core::walk::RandomSource;
use proptest::prelude::*;

fn dim_strategy() -> impl Strategy<Value = Dim> {
    (2usize..=3).prop_map(|d| Dim::new(d).unwrap())
}

fn config_strategy() -> impl Strategy<Value = Configuration> {
    (dim_strategy(), prop::collection::vec((-3i32..=3, -3i32..=3, -3i32..=3, 1u64..40), 1..6)).prop_map(|(dim, piles)| {
        let mut eta = Configuration::empty(dim);
        for (a, b, c, k) in piles {
            let coords = [a, b, c];
            eta.add(Site::new(&coords[..dim.get()]).unwrap(), k);
        }
        eta
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn every_explorer_gets_its_own_site(eta in config_strategy(), seed in any::<u64>()) {
        let c = grow(&eta, RandomSource::from_seed(seed)).unwrap();
        prop_assert_eq!(c.len() as u64, eta.total());
        let distinct: HashSet<Site> = c.settle_order().iter().map(|s| s.site).collect();
        prop_assert_eq!(distinct.len(), c.len());
        let explorers: HashSet<usize> = c.settle_order().iter().map(|s| s.explorer).collect();
        prop_assert_eq!(explorers.len(), c.len());
    }

    #[test]
    fn cluster_is_connected_to_a_start(eta in config_strategy(), seed in any::<u64>()) {
        // every settled site has an occupied neighbour unless it is a start
        let c = grow(&eta, RandomSource::from_seed(seed)).unwrap();
        for s in c.sites() {
            let is_start = eta.get(&s) > 0;
            prop_assert!(is_start || s.neighbors().any(|y| c.contains(&y)));
        }
    }

    #[test]
    fn stopped_mass_is_conserved(dim in dim_strategy(), r in 2.0f64..6.0, k in 1u64..200, seed in any::<u64>()) {
        let eta = Configuration::point(Site::origin(dim), k);
        let c = grow_stopped(&eta, r, RandomSource::from_seed(seed)).unwrap();
        prop_assert_eq!(c.len() as u64 + c.total_stopped(), k);
        let ball = Ball::centered(dim, r).unwrap();
        prop_assert!(c.sites().iter().all(|s| ball.contains(s)));
        prop_assert!(c.stopped_on_boundary().keys().all(|s| ball.on_boundary(s)));
    }

    #[test]
    fn error_radii_sandwich_the_cluster(n in 1.0f64..7.0, seed in any::<u64>()) {
        let dim = Dim::new(2).unwrap();
        let c = grow(&Configuration::ball_mass(dim, n), RandomSource::from_seed(seed)).unwrap();
        let e = error_radii(&c, n);
        prop_assert!(e.inner >= 0.0 && e.inner <= n && e.outer >= 0.0);
        for s in ball_sites(&Site::origin(dim), (n - e.inner - 1e-9).max(0.0)) {
            prop_assert!(c.contains(&s));
        }
        let outer = ceil_square(n + e.outer);
        prop_assert!(c.sites().iter().all(|s| s.norm2() <= outer));
    }

    #[test]
    fn same_seed_same_cluster(eta in config_strategy(), seed in any::<u64>()) {
        let a = grow(&eta, RandomSource::from_seed(seed)).unwrap();
        let b = grow(&eta, RandomSource::from_seed(seed)).unwrap();
        prop_assert_eq!(a.settle_order(), b.settle_order());
    }

    #[test]
    fn strict_ball_matches_float_norm(x in -20i32..=20, y in -20i32..=20, r in 0.5f64..20.0) {
        let s = Site::new(&[x, y]).unwrap();
        let inside = Ball::centered(s.dim(), r).unwrap().contains(&s);
        prop_assert_eq!(inside, ((x * x + y * y) as f64).sqrt() < r);
    }

    #[test]
    fn subdivision_invariants(r in 4.0f64..300.0, gamma in 1.0f64..3.0, frac in 0.0f64..1.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let dim = Dim::new(2).unwrap();
        let h0 = r / 4.0;
        let lo = h0.floor();
        let hi = (h0 * h0 / gamma).floor();
        prop_assume!(hi >= lo);
        let total = (lo + frac * (hi - lo)).floor() as u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = subdivide(dim, r, gamma, total, |k, h| rng.random_range(h[k].floor() as u64..=total)).unwrap();
        prop_assert!(s.heights[..=s.l].iter().all(|&h| h >= 1.0));
        let mid = s.middle_sum();
        prop_assert!(mid >= r / 2.0 - 1e-9 && mid <= 0.75 * r + 1e-9);
        prop_assert!(s.heights[s.l + 1] >= -1e-9);
        prop_assert_eq!(s.counts.len(), s.l);
    }

    #[test]
    fn optimized_lower_bound_beats_any_lambda(mu in 0.0f64..200.0, frac in 0.0f64..1.2, c in 0.0f64..3.0, kappa in 1.01f64..4.0, s2 in 0.0f64..30.0, lambda in 0.0f64..3.0) {
        let inp = TailBoundInput { mu, xi: frac * mu, c, kappa, s2 };
        let best = optimize_lambda(&inp, Tail::Lower).unwrap();
        prop_assert!(best.log_bound <= lower_tail_bound(&inp, lambda).unwrap().log_bound + 1e-9);
        prop_assert!(best.bound <= 1.0 && best.bound >= 0.0);
    }

    #[test]
    fn optimized_upper_bound_beats_any_lambda(mu in 0.0f64..200.0, frac in 0.8f64..3.0, s2 in 0.0f64..30.0, t in 0.0f64..1.0) {
        let inp = TailBoundInput { mu, xi: frac * mu, c: 0.0, kappa: 2.0, s2 };
        let best = optimize_lambda(&inp, Tail::Upper).unwrap();
        prop_assert!(best.lambda <= UPPER_LAMBDA_MAX);
        prop_assert!(best.log_bound <= upper_tail_bound(&inp, t * UPPER_LAMBDA_MAX).unwrap().log_bound + 1e-9);
    }

    #[test]
    fn lower_bound_decreases_with_mean(mu in 1.0f64..100.0, dmu in 0.0f64..50.0, xi in 0.0f64..20.0, s2 in 0.0f64..10.0) {
        let at = |m: f64| optimize_lambda(&TailBoundInput { mu: m, xi, c: 0.5, kappa: 2.0, s2 }, Tail::Lower).unwrap().bound;
        prop_assert!(at(mu + dmu) <= at(mu) + 1e-12);
    }
}
