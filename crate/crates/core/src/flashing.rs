//! Flashing explorers and their coupling with internal DLA.
//!
//! Outside `B(0,n)` space is cut into outward shells of height `2h`. After
//! its first visit to `Σ_m` an explorer draws `R = h·U^{1/d}` and runs until
//! it leaves `B(anchor, R)`. The exit site `Z` is the only site of that
//! shell it may settle on. If `Z` is occupied, the explorer walks freely to
//! `Σ_{m+1}`. Inside `B(0,n)` the plain rule applies until the explorer
//! first leaves the ball; whether it may settle there after coming back is
//! a [`FlashingConfig`] switch, off by default.
//!
//! Every explorer owns a stored trajectory. The flashing cluster is built
//! first. The internal DLA cluster is then built on the same trajectories,
//! with one extra move: an explorer still unsettled at its flashing time
//! `T*(i)` takes the site `S_i(T*(i))`, and the explorer it displaces
//! resumes its own trajectory. This forces `T(i) <= T*(i)` for every `i`.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{Cluster, Settlement};
use crate::error::{IdlaError, Result};
use crate::grid::Occupancy;
use crate::lattice::{ball_volume, ceil_square, Ball, Dim, ShellConfig, ShellMode, ShellPartition, Site};
use crate::walk::{RandomSource, StepRng, DEFAULT_STEP_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlashingSiteDraw {
    pub shell: usize,
    pub anchor: Site,
    pub radius: f64,
    pub site: Site,
}

/// `h·U^{1/d}`: density `d r^{d-1} / h^d` on `[0, h]`.
pub fn draw_flash_radius(dim: Dim, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    h * u.powf(1.0 / dim.get() as f64)
}

/// `y ∈ ∂B(0,r)` given `c = ceil(r²)`: outside, with a neighbour inside.
#[inline]
fn on_sphere(y: &Site, c: u64) -> bool {
    let q = y.norm2();
    q >= c && q + 1 < c + 2 * y.max_abs() as u64
}

/// A lazily extended trajectory.
struct Trajectory {
    rng: StepRng,
    path: Vec<Site>,
}

impl Trajectory {
    fn new(start: Site, rng: StepRng) -> Self {
        Trajectory { rng, path: vec![start] }
    }

    #[inline]
    fn at(&mut self, t: u64) -> Site {
        let t = t as usize;
        while self.path.len() <= t {
            let last = *self.path.last().expect("non-empty");
            let next = self.rng.step_from(&last);
            self.path.push(next);
        }
        self.path[t]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlashingConfig {
    /// Outermost sphere, in units of `h` beyond `n`: explorers reaching
    /// `∂B(0, n + cap_heights·h)` are stopped.
    pub cap_heights: f64,
    pub step_cap: u64,
    /// Whether an explorer that has left `B(0,n)` may still settle inside
    /// it under the plain rule after coming back.
    pub settle_on_return: bool,
}

impl Default for FlashingConfig {
    fn default() -> Self {
        FlashingConfig { cap_heights: 6.0, step_cap: DEFAULT_STEP_CAP, settle_on_return: false }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub n: f64,
    pub height: f64,
    /// `T(i)`: internal DLA settling times.
    pub t_plain: Vec<u64>,
    /// `T*(i)`; `None` for explorers stopped at the cap.
    pub t_flash: Vec<Option<u64>>,
    /// `A(N)`.
    pub plain: Cluster,
    /// `A*(N)`, with cap-stopped explorers in `stopped_on_boundary`.
    pub flashing: Cluster,
    pub draws: Vec<Vec<FlashingSiteDraw>>,
    /// Number of displacements the coupling needed.
    pub evictions: u64,
}

impl CoupledRun {
    /// Explorers violating `T*(i) >= T(i)`; empty by construction.
    pub fn order_violations(&self) -> Vec<usize> {
        (0..self.t_plain.len()).filter(|&i| matches!(self.t_flash[i], Some(t) if t < self.t_plain[i])).collect()
    }

    pub fn min_delay(&self) -> Option<i64> {
        (0..self.t_plain.len()).filter_map(|i| self.t_flash[i].map(|t| t as i64 - self.t_plain[i] as i64)).min()
    }
}

enum Phase {
    Free { next: usize },
    Probing { shell: usize, anchor: Site, cutoff: u64, radius: f64 },
}

/// Coupled flashing and internal DLA runs for `N = |B(0,n)|` explorers
/// from the origin, shell height `h`.
pub fn flashing_grow(dim: Dim, n: f64, h: f64, source: RandomSource) -> Result<CoupledRun> {
    flashing_grow_with(dim, n, h, FlashingConfig::default(), source)
}

pub fn flashing_grow_with(dim: Dim, n: f64, h: f64, cfg: FlashingConfig, source: RandomSource) -> Result<CoupledRun> {
    let sphere_count = ((cfg.cap_heights - 1.0) / 2.0).ceil().max(1.0) as usize;
    let part = ShellPartition::new(ShellConfig { dim, mode: ShellMode::Outward, base_radius: n, height: h, shell_count: sphere_count })?;
    let total = ball_volume(dim, n);
    if total == 0 {
        return Err(IdlaError::InvalidInput(format!("B(0,{n}) is empty")));
    }
    let inner_cut = ceil_square(n);
    let cap_cut = ceil_square(n + cfg.cap_heights * h);
    let sphere_cuts: Vec<u64> = part.indices().map(|k| ceil_square(part.sphere_radius(k))).filter(|&c| c < cap_cut).collect();
    let origin = Site::origin(dim);

    let mut paths: Vec<Trajectory> = (0..total).map(|i| Trajectory::new(origin, source.child(i as u64).walker(dim))).collect();

    // flashing pass
    let mut occ_star = Occupancy::new(dim, (n + cfg.cap_heights * h).ceil() as i32 + 1);
    let mut flash_settled: Vec<Settlement> = Vec::with_capacity(total);
    let mut flash_stopped: BTreeMap<Site, u64> = BTreeMap::new();
    let mut t_flash = vec![None; total];
    let mut draws = vec![Vec::new(); total];
    for i in 0..total {
        let mut radii = source.child(i as u64).child(0).rng();
        let mut phase = Phase::Free { next: 0 };
        let mut left = false;
        let mut t = 0u64;
        loop {
            let pos = paths[i].at(t);
            let inside = pos.norm2() < inner_cut;
            left |= !inside;
            if pos.norm2() >= cap_cut {
                *flash_stopped.entry(pos).or_insert(0) += 1;
                break;
            }
            match phase {
                Phase::Probing { shell, anchor, cutoff, radius } => {
                    if anchor.dist2(&pos) >= cutoff {
                        draws[i].push(FlashingSiteDraw { shell, anchor, radius, site: pos });
                        if !occ_star.contains(&pos) {
                            occ_star.set(pos, i as u32);
                            flash_settled.push(Settlement { explorer: i, site: pos, time: t });
                            t_flash[i] = Some(t);
                            break;
                        }
                        phase = Phase::Free { next: shell + 1 };
                        continue;
                    }
                }
                Phase::Free { next } => {
                    if inside {
                        if (cfg.settle_on_return || !left) && !occ_star.contains(&pos) {
                            occ_star.set(pos, i as u32);
                            flash_settled.push(Settlement { explorer: i, site: pos, time: t });
                            t_flash[i] = Some(t);
                            break;
                        }
                    } else if next < sphere_cuts.len() && on_sphere(&pos, sphere_cuts[next]) {
                        let radius = draw_flash_radius(dim, h, &mut radii);
                        phase = Phase::Probing { shell: next, anchor: pos, cutoff: ceil_square(radius), radius };
                        continue;
                    }
                }
            }
            if t >= cfg.step_cap {
                return Err(IdlaError::StepCapExceeded { cap: cfg.step_cap });
            }
            t += 1;
        }
    }

    // internal DLA on the same trajectories
    let mut occ = Occupancy::new(dim, n.ceil() as i32 + 2);
    let mut t_plain = vec![0u64; total];
    let mut evictions = 0u64;
    for i in 0..total {
        let mut stack = vec![(i, 0u64)];
        while let Some((e, start)) = stack.pop() {
            let mut t = start;
            loop {
                let pos = paths[e].at(t);
                match occ.label(&pos) {
                    None => {
                        occ.set(pos, e as u32);
                        t_plain[e] = t;
                        break;
                    }
                    Some(j) if t_flash[e] == Some(t) => {
                        occ.set(pos, e as u32);
                        t_plain[e] = t;
                        evictions += 1;
                        let j = j as usize;
                        stack.push((j, t_plain[j] + 1));
                        break;
                    }
                    Some(_) => {}
                }
                if t - start >= cfg.step_cap {
                    return Err(IdlaError::StepCapExceeded { cap: cfg.step_cap });
                }
                t += 1;
            }
        }
    }
    let plain_order: Vec<Settlement> =
        (0..total).map(|i| Settlement { explorer: i, site: paths[i].path[t_plain[i] as usize], time: t_plain[i] }).collect();

    Ok(CoupledRun {
        n,
        height: h,
        t_plain,
        t_flash,
        plain: Cluster::from_parts(dim, plain_order, BTreeMap::new()),
        flashing: Cluster::from_parts(dim, flash_settled, flash_stopped),
        draws,
        evictions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlashOutcome {
    /// No flashing site down to the last shell was a trap.
    Crossed,
    /// Settled on a trap.
    Settled,
    /// Reached the cap sphere first.
    Escaped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapOutcome {
    pub flashing: FlashOutcome,
    /// The plain walk reached `B(0,R)` before any trap and before the cap.
    pub plain_crossed: bool,
    pub draws: Vec<FlashingSiteDraw>,
}

impl TrapOutcome {
    pub fn crossed(&self) -> bool {
        self.flashing == FlashOutcome::Crossed
    }
}

/// Default shell height for trap probes.
pub const DEFAULT_TRAP_HEIGHT: f64 = 2.0;

/// One flashing explorer from `z ∈ ∂B(0,2R)` across the annulus
/// `B(0,2R) \ B(0,R)`, whose sites outside `V` are traps. The plain walk on
/// the same trajectory is tracked too.
pub fn trap_crossing(z: &Site, radius: f64, height: f64, v: &HashSet<Site>, source: RandomSource) -> Result<TrapOutcome> {
    let dim = z.dim();
    let part = ShellPartition::new(ShellConfig { dim, mode: ShellMode::Inward, base_radius: radius, height, shell_count: 1 })?;
    let outer = Ball::centered(dim, 2.0 * radius)?;
    if !outer.on_boundary(z) {
        return Err(IdlaError::InvalidInput(format!("start {z} is not on ∂B(0,{})", 2.0 * radius)));
    }
    let inner_cut = ceil_square(radius);
    let outer_cut = ceil_square(2.0 * radius);
    let in_annulus = |s: &Site| {
        let q = s.norm2();
        q >= inner_cut && q < outer_cut
    };
    if let Some(bad) = v.iter().find(|s| !in_annulus(s)) {
        return Err(IdlaError::InvalidInput(format!("V site {bad} is outside the annulus")));
    }
    let is_trap = |s: &Site| in_annulus(s) && !v.contains(s);
    let cap_cut = ceil_square(4.0 * radius);
    let h = part.height;
    let shells: Vec<(usize, u64)> = part.indices().map(|k| (k, ceil_square(part.sphere_radius(k)))).collect();

    let mut steps = source.walker(dim);
    let mut radii = source.child(0).rng();
    let mut pos = *z;
    let mut plain: Option<bool> = None;
    let mut flash: Option<FlashOutcome> = None;
    let mut phase = Phase::Free { next: 0 };
    let mut draws = Vec::new();
    let mut t = 0u64;
    while plain.is_none() || flash.is_none() {
        let escaped = pos.norm2() >= cap_cut;
        if plain.is_none() {
            if pos.norm2() < inner_cut {
                plain = Some(true);
            } else if is_trap(&pos) || escaped {
                plain = Some(false);
            }
        }
        while flash.is_none() {
            if escaped {
                flash = Some(FlashOutcome::Escaped);
                break;
            }
            match phase {
                Phase::Probing { shell, anchor, cutoff, radius: r } => {
                    if anchor.dist2(&pos) < cutoff {
                        break;
                    }
                    draws.push(FlashingSiteDraw { shell: shells[shell].0, anchor, radius: r, site: pos });
                    if is_trap(&pos) {
                        flash = Some(FlashOutcome::Settled);
                    } else if shell + 1 == shells.len() {
                        flash = Some(FlashOutcome::Crossed);
                    } else {
                        phase = Phase::Free { next: shell + 1 };
                    }
                }
                Phase::Free { next } => {
                    if !on_sphere(&pos, shells[next].1) {
                        break;
                    }
                    let r = draw_flash_radius(dim, h, &mut radii);
                    phase = Phase::Probing { shell: next, anchor: pos, cutoff: ceil_square(r), radius: r };
                }
            }
        }
        if plain.is_some() && flash.is_some() {
            break;
        }
        if t >= DEFAULT_STEP_CAP {
            return Err(IdlaError::StepCapExceeded { cap: DEFAULT_STEP_CAP });
        }
        pos = steps.step_from(&pos);
        t += 1;
    }
    Ok(TrapOutcome { flashing: flash.expect("decided"), plain_crossed: plain.expect("decided"), draws })
}

/// `D_k = {y ∈ Σ_k : |B(y,h) ∩ V| >= β h^d}`.
pub fn dense_neighborhoods(sphere: &[Site], v: &HashSet<Site>, beta: f64, h: f64) -> Result<Vec<Site>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(IdlaError::InvalidInput(format!("beta must lie in (0,1), got {beta}")));
    }
    let Some(first) = sphere.first() else { return Ok(Vec::new()) };
    let threshold = beta * h.powi(first.dim().get() as i32);
    let mut out = Vec::new();
    for y in sphere {
        let ball = Ball::new(*y, h)?;
        let count = if v.len() < 4 * crate::lattice::ball_volume(y.dim(), h) {
            v.iter().filter(|s| ball.contains(s)).count()
        } else {
            ball.sites().iter().filter(|s| v.contains(s)).count()
        };
        if count as f64 >= threshold {
            out.push(*y);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;

    fn d(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    #[test]
    fn sphere_predicate_matches_ball() {
        for r in [2.0, 3.5, 7.0] {
            let ball = Ball::centered(d(3), r).unwrap();
            let c = ceil_square(r);
            for s in crate::lattice::box_sites(d(3), 9) {
                assert_eq!(on_sphere(&s, c), ball.on_boundary(&s), "{s} r={r}");
            }
        }
    }

    #[test]
    fn flash_radius_law() {
        let dim = d(3);
        let h = 4.0;
        let mut rng = RandomSource::from_seed(9).rng();
        let sample: Vec<f64> = (0..100_000).map(|_| draw_flash_radius(dim, h, &mut rng)).collect();
        assert!(sample.iter().all(|r| (0.0..=h).contains(r)));
        let dist = ks_one_sample(&sample, |r| (r / h).powi(3));
        assert!(dist < 0.01, "{dist}");
    }

    #[test]
    fn coupling_order_and_conservation() {
        for (dim, n) in [(2, 6.0), (3, 4.0), (2, 9.0)] {
            for seed in 0..5 {
                let run = flashing_grow(d(dim), n, 2.0, RandomSource::new(seed, 1)).unwrap();
                let total = ball_volume(d(dim), n);
                assert!(run.order_violations().is_empty());
                assert_eq!(run.plain.len(), total);
                assert_eq!(run.flashing.len() as u64 + run.flashing.total_stopped(), total as u64);
                let inner = Ball::centered(d(dim), n).unwrap();
                // explorers whose flashing site is inside B(0,n) settle at the same time
                for (i, s) in run.flashing.settle_order().iter().enumerate() {
                    let _ = i;
                    if inner.contains(&s.site) && run.draws[s.explorer].is_empty() && run.t_flash[s.explorer].is_some() {
                        assert!(run.t_plain[s.explorer] <= s.time);
                    }
                }
            }
        }
    }

    #[test]
    fn coupled_plain_sites_are_on_trajectories() {
        let run = flashing_grow(d(2), 7.0, 2.0, RandomSource::from_seed(3)).unwrap();
        let mut sites: Vec<Site> = run.plain.settle_order().iter().map(|s| s.site).collect();
        sites.sort();
        sites.dedup();
        assert_eq!(sites.len(), run.plain.len());
    }

    fn annulus(dim: Dim, r: f64) -> Vec<Site> {
        let inner = ceil_square(r);
        Ball::centered(dim, 2.0 * r).unwrap().sites().into_iter().filter(|s| s.norm2() >= inner).collect()
    }

    #[test]
    fn plain_crossing_implies_flash_crossing() {
        let dim = d(2);
        let r = 8.0;
        let ann = annulus(dim, r);
        let starts = Ball::centered(dim, 2.0 * r).unwrap().boundary_sites();
        let mut rng = RandomSource::from_seed(77).rng();
        let mut plain = 0;
        for trial in 0..3000u64 {
            let v: HashSet<Site> = ann.iter().filter(|_| rng.random::<f64>() < 0.7).copied().collect();
            let z = starts[rng.random_range(0..starts.len())];
            let out = trap_crossing(&z, r, 2.0, &v, RandomSource::new(5, trial)).unwrap();
            if out.plain_crossed {
                plain += 1;
                assert!(out.crossed());
            }
            if out.crossed() {
                assert!(out.draws.iter().all(|dr| v.contains(&dr.site) || !ann.contains(&dr.site)));
            }
        }
        assert!(plain > 0);
    }

    #[test]
    fn no_trap_free_sites_means_no_crossing() {
        let dim = d(2);
        let r = 12.0;
        let z = Site::on_axis(dim, 24);
        for trial in 0..200 {
            let out = trap_crossing(&z, r, 2.0, &HashSet::new(), RandomSource::new(1, trial)).unwrap();
            assert!(!out.plain_crossed);
            assert_ne!(out.flashing, FlashOutcome::Crossed);
        }
    }

    #[test]
    fn dense_neighborhood_edges() {
        let dim = d(2);
        let part =
            ShellPartition::new(ShellConfig { dim, mode: ShellMode::Inward, base_radius: 12.0, height: 2.0, shell_count: 1 }).unwrap();
        let sphere = part.sphere_sites(1);
        assert!(dense_neighborhoods(&sphere, &HashSet::new(), 0.5, 2.0).unwrap().is_empty());
        let full: HashSet<Site> = Ball::centered(dim, 30.0).unwrap().sites().into_iter().collect();
        assert_eq!(dense_neighborhoods(&sphere, &full, 0.5, 2.0).unwrap(), sphere);
        assert!(dense_neighborhoods(&sphere, &full, 1.5, 2.0).is_err());
    }
}
