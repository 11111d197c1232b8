//! Distributional checks between realizations that should share a law, and
//! Monte Carlo trend checks for the probes. Seeds are fixed, so each test is
//! deterministic; thresholds sit far from the observed values.

use idla_core::aggregation::{count_hits, count_hits_coupled, grow, inner_error, outer_error, Configuration, HitMode};
use idla_core::experiments::{probe_origin_hit, probe_traps, OriginPlacement, DEFAULT_ORIGIN_BETA};
use idla_core::flashing::flashing_grow;
use idla_core::lattice::{inner_height, Dim, Site};
use idla_core::stats::ks_two_sample;
use idla_core::tails::{default_grid, validate_bound};
use idla_core::walk::RandomSource;
use idla_core::waves::grow_by_waves;

fn d(n: usize) -> Dim {
    Dim::new(n).unwrap()
}

#[test]
fn waves_and_direct_growth_agree() {
    let dim = d(2);
    let n = 7.0;
    let trials = 400;
    let eta = Configuration::ball_mass(dim, n);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in 0..trials {
        let c = grow(&eta, RandomSource::new(1, t)).unwrap();
        a.push(inner_error(&c, n) + outer_error(&c, n));
        let w = grow_by_waves(dim, n, RandomSource::new(2, t)).unwrap();
        b.push(inner_error(&w.cluster, n) + outer_error(&w.cluster, n));
    }
    let ks = ks_two_sample(&a, &b);
    assert!(!ks.rejects(1e-3), "{ks:?}");
}

#[test]
fn flashing_coupling_keeps_the_plain_law() {
    for dim in [d(2), d(3)] {
        let n = 5.0;
        let h = inner_height(dim, n);
        let eta = Configuration::ball_mass(dim, n);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for t in 0..300 {
            let run = flashing_grow(dim, n, h, RandomSource::new(3, t)).unwrap();
            assert!(run.order_violations().is_empty());
            a.push(run.plain.max_norm2().unwrap() as f64);
            b.push(grow(&eta, RandomSource::new(4, t)).unwrap().max_norm2().unwrap() as f64);
        }
        let ks = ks_two_sample(&a, &b);
        assert!(!ks.rejects(1e-3), "{ks:?}");
    }
}

#[test]
fn explorer_and_walker_hits_share_a_law_after_shifting() {
    // W(z) + M(A(z)) against M(z) at a boundary target
    let dim = d(2);
    let n = 5.0;
    let eta = Configuration::ball_mass(dim, n);
    let z = Site::new(&[5, 0]).unwrap();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for t in 0..1500u64 {
        let src = RandomSource::new(5, t);
        let w = count_hits(&eta, n, &[z], HitMode::Explorers, src.child(0)).unwrap();
        let cluster = Configuration::indicator(dim, &w.cluster.unwrap().sites());
        let m_a = count_hits(&cluster, n, &[z], HitMode::Walkers, src.child(1)).unwrap();
        lhs.push((w.counts[&z] + m_a.counts[&z]) as f64);
        rhs.push(count_hits(&eta, n, &[z], HitMode::Walkers, src.child(2)).unwrap().counts[&z] as f64);
    }
    let ks = ks_two_sample(&lhs, &rhs);
    assert!(!ks.rejects(1e-3), "{ks:?}");
}

#[test]
fn coupled_walkers_dominate_explorers() {
    let eta = Configuration::ball_mass(d(2), 6.0);
    let targets: Vec<Site> = (-6..=6).map(|y| Site::new(&[3, y.clamp(-5, 5)]).unwrap()).collect();
    for t in 0..20 {
        let (w, m, _) = count_hits_coupled(&eta, 6.0, &targets, RandomSource::new(6, t)).unwrap();
        for (s, k) in &w {
            assert!(m[s] >= *k);
        }
    }
}

#[test]
fn tail_bounds_hold_on_part_of_the_grid() {
    for (i, cell) in default_grid().iter().enumerate().step_by(7) {
        let v = validate_bound(&cell.spec, cell.xi, cell.c, cell.kappa, cell.tail, 4000, RandomSource::new(7, i as u64)).unwrap();
        assert!(v.holds, "cell {i}: {v:?}");
    }
}

#[test]
fn origin_probe_decays_with_radius() {
    let freq: Vec<f64> = [4.0, 8.0, 12.0]
        .iter()
        .map(|&r| {
            probe_origin_hit(d(2), r, DEFAULT_ORIGIN_BETA, 2000, OriginPlacement::Stacked, RandomSource::new(8, r as u64))
                .unwrap()
                .frequency
        })
        .collect();
    assert!(freq[0] > freq[1] && freq[1] > freq[2], "{freq:?}");
}

#[test]
fn trap_crossing_grows_with_density_and_contains_plain() {
    let mut last = -1.0;
    for (i, density) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let r = probe_traps(d(2), 8.0, density, 1500, 2.0, RandomSource::new(9, i as u64)).unwrap();
        assert_eq!(r.containment_violations, 0);
        assert!(r.flash_frequency >= r.plain_frequency);
        assert!(r.flash_frequency > last, "{density}: {}", r.flash_frequency);
        last = r.flash_frequency;
    }
}
