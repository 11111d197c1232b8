//! Probes and scans built on the growth processes: covering of a ball by
//! explorers started inside it, the origin being reached by explorers
//! started outside, traversal of a trapped annulus, scaling of the error
//! radii with `n`, and the random shell subdivision used for the origin
//! estimate.
//!
//! Trials run in parallel on the current rayon pool. Trial `j` always draws
//! from `source.child(j)`, so results do not depend on the pool width.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{error_radii, grow, grow_stopped, Cluster, Configuration};
use crate::error::{IdlaError, Result};
use crate::flashing::trap_crossing;
use crate::lattice::{ball_sites, ceil_square, Ball, Dim, Site};
use crate::stats::{linear_fit, summarize, wilson, LineFit, Summary};
use crate::walk::RandomSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: String,
    pub dim: Dim,
    pub radius: f64,
    /// Name of the scanned parameter (`A`, `beta`, `density`).
    pub parameter: String,
    pub value: f64,
    pub explorers: u64,
    pub placement: String,
    pub trials: u64,
    pub base_seed: u64,
    pub stream: u64,
    pub successes: u64,
    pub frequency: f64,
    pub wilson_halfwidth: f64,
}

impl ProbeResult {
    #[allow(clippy::too_many_arguments)]
    fn new(
        probe: &str,
        dim: Dim,
        radius: f64,
        parameter: &str,
        value: f64,
        explorers: u64,
        placement: &str,
        trials: u64,
        source: RandomSource,
        successes: u64,
    ) -> Self {
        let frequency = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        ProbeResult {
            probe: probe.to_string(),
            dim,
            radius,
            parameter: parameter.to_string(),
            value,
            explorers,
            placement: placement.to_string(),
            trials,
            base_seed: source.base_seed,
            stream: source.stream_id,
            successes,
            frequency,
            wilson_halfwidth: wilson(successes, trials).1,
        }
    }
}

fn count_trials<F>(trials: u64, source: RandomSource, f: F) -> Result<u64>
where
    F: Fn(RandomSource) -> Result<bool> + Sync,
{
    let hits: Result<Vec<bool>> = (0..trials).into_par_iter().map(|j| f(source.child(j))).collect();
    Ok(hits?.into_iter().filter(|&b| b).count() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringPlacement {
    /// Equal share on every site of `B(0,R/2)`, remainder at the origin.
    UniformHalfBall,
    Origin,
}

impl CoveringPlacement {
    pub fn name(self) -> &'static str {
        match self {
            CoveringPlacement::UniformHalfBall => "uniform_half_ball",
            CoveringPlacement::Origin => "origin",
        }
    }
}

/// `⌊A·R^d⌋` explorers placed on `B(0,R/2)`.
pub fn covering_configuration(dim: Dim, radius: f64, a: f64, placement: CoveringPlacement) -> Configuration {
    let total = (a * radius.powi(dim.get() as i32)).floor() as u64;
    let origin = Site::origin(dim);
    match placement {
        CoveringPlacement::Origin => Configuration::point(origin, total),
        CoveringPlacement::UniformHalfBall => {
            let sites = ball_sites(&origin, radius / 2.0);
            if sites.is_empty() {
                return Configuration::point(origin, total);
            }
            let share = total / sites.len() as u64;
            let mut eta = Configuration::empty(dim);
            for s in &sites {
                eta.add(*s, share);
            }
            eta.add(origin, total - share * sites.len() as u64);
            eta
        }
    }
}

pub const DEFAULT_COVERING_ALPHA: f64 = 4.0;

/// Frequency of `B(0,R) ⊄ A_{αR}(η)`.
pub fn probe_covering(
    dim: Dim,
    radius: f64,
    a: f64,
    trials: u64,
    alpha: f64,
    placement: CoveringPlacement,
    source: RandomSource,
) -> Result<ProbeResult> {
    if a < 1.0 {
        return Err(IdlaError::InvalidInput(format!("A must be >= 1, got {a}")));
    }
    let eta = covering_configuration(dim, radius, a, placement);
    let target = ball_sites(&Site::origin(dim), radius);
    let hits = count_trials(trials, source, |src| {
        let cluster = grow_stopped(&eta, alpha * radius, src)?;
        Ok(!target.iter().all(|s| cluster.contains(s)))
    })?;
    Ok(ProbeResult::new("covering", dim, radius, "A", a, eta.total(), placement.name(), trials, source, hits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPlacement {
    /// All explorers on `(R, 0, ..., 0)`.
    Stacked,
    /// Equal share over `∂B(0,R)`, remainder on its first sites.
    UniformBoundary,
}

impl OriginPlacement {
    pub fn name(self) -> &'static str {
        match self {
            OriginPlacement::Stacked => "stacked",
            OriginPlacement::UniformBoundary => "uniform_boundary",
        }
    }
}

pub const DEFAULT_ORIGIN_BETA: f64 = 3.0;

pub fn origin_configuration(dim: Dim, radius: f64, beta: f64, placement: OriginPlacement) -> Result<Configuration> {
    let total = (beta * radius.powi(dim.get() as i32)).floor() as u64;
    let ball = Ball::centered(dim, radius)?;
    let mut eta = Configuration::empty(dim);
    match placement {
        OriginPlacement::Stacked => {
            let r = radius.ceil() as i32;
            let start = Site::on_axis(dim, r);
            if !ball.on_boundary(&start) {
                return Err(IdlaError::InvalidInput(format!("({r},0,..) is not on ∂B(0,{radius}); use an integer radius")));
            }
            eta.add(start, total);
        }
        OriginPlacement::UniformBoundary => {
            let sites = ball.boundary_sites();
            let share = total / sites.len() as u64;
            let rem = (total % sites.len() as u64) as usize;
            for (i, s) in sites.iter().enumerate() {
                eta.add(*s, share + (i < rem) as u64);
            }
        }
    }
    Ok(eta)
}

/// Frequency of `0 ∈ A(η)` for `⌊β R^d⌋` explorers on `∂B(0,R)`.
pub fn probe_origin_hit(
    dim: Dim,
    radius: f64,
    beta: f64,
    trials: u64,
    placement: OriginPlacement,
    source: RandomSource,
) -> Result<ProbeResult> {
    let eta = origin_configuration(dim, radius, beta, placement)?;
    let origin = Site::origin(dim);
    let hits = if eta.total() == 0 { 0 } else { count_trials(trials, source, |src| Ok(grow(&eta, src)?.contains(&origin)))? };
    Ok(ProbeResult::new("origin", dim, radius, "beta", beta, eta.total(), placement.name(), trials, source, hits))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapProbeResult {
    pub dim: Dim,
    pub radius: f64,
    pub density: f64,
    pub height: f64,
    pub trials: u64,
    pub base_seed: u64,
    pub stream: u64,
    pub mean_trap_free: f64,
    pub flash_crossed: u64,
    pub plain_crossed: u64,
    /// Trials with a plain crossing but no flashing crossing.
    pub containment_violations: u64,
    pub flash_frequency: f64,
    pub flash_halfwidth: f64,
    pub plain_frequency: f64,
    pub plain_halfwidth: f64,
}

/// Annulus crossing with `V` drawn at the given density (independently per
/// site, per trial) and the start uniform on `∂B(0,2R)`.
pub fn probe_traps(dim: Dim, radius: f64, density: f64, trials: u64, height: f64, source: RandomSource) -> Result<TrapProbeResult> {
    if !(0.0..=1.0).contains(&density) {
        return Err(IdlaError::InvalidInput(format!("density must lie in [0,1], got {density}")));
    }
    let inner = ceil_square(radius);
    let annulus: Vec<Site> = ball_sites(&Site::origin(dim), 2.0 * radius).into_iter().filter(|s| s.norm2() >= inner).collect();
    let starts = Ball::centered(dim, 2.0 * radius)?.boundary_sites();
    let outcomes: Result<Vec<(bool, bool, usize)>> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let src = source.child(j);
            let mut rng = src.child(1).rng();
            let v: HashSet<Site> = annulus.iter().filter(|_| rng.random::<f64>() < density).copied().collect();
            let z = starts[rng.random_range(0..starts.len())];
            let out = trap_crossing(&z, radius, height, &v, src)?;
            Ok((out.plain_crossed, out.crossed(), v.len()))
        })
        .collect();
    let outcomes = outcomes?;
    let plain = outcomes.iter().filter(|o| o.0).count() as u64;
    let flash = outcomes.iter().filter(|o| o.1).count() as u64;
    let violations = outcomes.iter().filter(|o| o.0 && !o.1).count() as u64;
    let mean_v = outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / trials.max(1) as f64;
    let freq = |k: u64| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
    Ok(TrapProbeResult {
        dim,
        radius,
        density,
        height,
        trials,
        base_seed: source.base_seed,
        stream: source.stream_id,
        mean_trap_free: mean_v,
        flash_crossed: flash,
        plain_crossed: plain,
        containment_violations: violations,
        flash_frequency: freq(flash),
        flash_halfwidth: wilson(flash, trials).1,
        plain_frequency: freq(plain),
        plain_halfwidth: wilson(plain, trials).1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fit: LineFit,
    /// Cells whose count was zero; every cell uses `(k+1)/(n+2)`.
    pub zero_cells: usize,
}

/// Least squares of `log((k+1)/(n+2))` against `x`.
pub fn fit_decay(x: &[f64], successes: &[u64], trials: &[u64]) -> Option<DecayFit> {
    let y: Vec<f64> = successes.iter().zip(trials).map(|(&k, &n)| ((k as f64 + 1.0) / (n as f64 + 2.0)).ln()).collect();
    let fit = linear_fit(x, &y)?;
    Some(DecayFit { fit, zero_cells: successes.iter().filter(|&&k| k == 0).count() })
}

/// Decay variable for the origin probe: `R²/log R` in `d = 2`, `R²` above.
pub fn origin_decay_variable(dim: Dim, radius: f64) -> f64 {
    if dim.get() == 2 {
        radius * radius / radius.ln()
    } else {
        radius * radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: f64,
    pub trial: u64,
    pub inner: f64,
    pub outer: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanStats {
    pub n: f64,
    /// `log n` (d = 2) or `sqrt(log n)`; zero flags a degenerate normalizer.
    pub normalizer: f64,
    pub degenerate: bool,
    pub inner: Summary,
    pub outer: Summary,
    pub inner_ratio: f64,
    pub outer_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingScan {
    pub dim: Dim,
    pub trials: u64,
    pub base_seed: u64,
    pub rows: Vec<ScanRow>,
    pub stats: Vec<ScanStats>,
    /// Largest mean inner ratio over the scanned `n`.
    pub alpha_hat: f64,
    /// Largest mean outer ratio.
    pub beta_hat: f64,
}

pub fn fluctuation_normalizer(dim: Dim, n: f64) -> f64 {
    let l = if n > 1.0 { n.ln() } else { 0.0 };
    if dim.get() == 2 {
        l
    } else {
        l.sqrt()
    }
}

/// Error radii over independent clusters of `|B(0,n)|` explorers.
pub fn scan_fluctuations(dim: Dim, n_list: &[f64], trials: u64, source: RandomSource) -> Result<ScalingScan> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IdlaError::InvalidInput("n values must be strictly increasing".into()));
    }
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let eta = Configuration::ball_mass(dim, n);
        let per_n = source.child(i as u64);
        let radii: Result<Vec<(f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|j| {
                let c = grow(&eta, per_n.child(j))?;
                let e = error_radii(&c, n);
                Ok((e.inner, e.outer))
            })
            .collect();
        let radii = radii?;
        let inner: Vec<f64> = radii.iter().map(|r| r.0).collect();
        let outer: Vec<f64> = radii.iter().map(|r| r.1).collect();
        rows.extend(radii.iter().enumerate().map(|(j, r)| ScanRow { n, trial: j as u64, inner: r.0, outer: r.1 }));
        let norm = fluctuation_normalizer(dim, n);
        let degenerate = norm == 0.0;
        let (si, so) = (summarize(&inner), summarize(&outer));
        let ratio = |m: f64| if degenerate { m } else { m / norm };
        stats.push(ScanStats {
            n,
            normalizer: norm,
            degenerate,
            inner: si,
            outer: so,
            inner_ratio: ratio(si.mean),
            outer_ratio: ratio(so.mean),
        });
    }
    let alpha_hat = stats.iter().map(|s| s.inner_ratio).fold(f64::NEG_INFINITY, f64::max);
    let beta_hat = stats.iter().map(|s| s.outer_ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingScan { dim, trials, base_seed: source.base_seed, rows, stats, alpha_hat, beta_hat })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    pub radius: f64,
    pub gamma: f64,
    /// `h_0, ..., h_{L+1}`.
    pub heights: Vec<f64>,
    /// `N_0, ..., N_L`.
    pub counts: Vec<u64>,
    pub l: usize,
}

impl Subdivision {
    /// `Σ_{i=1}^{L} h_i`.
    pub fn middle_sum(&self) -> f64 {
        self.heights[1..=self.l].iter().sum()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(IdlaError::PreconditionViolated(m));
        if let Some((k, h)) = self.heights[..=self.l].iter().enumerate().find(|(_, h)| **h < 1.0) {
            return fail(format!("h_{k} = {h} < 1"));
        }
        let s = self.middle_sum();
        let eps = 1e-9 * self.radius;
        if s < self.radius / 2.0 - eps || s > 0.75 * self.radius + eps {
            return fail(format!("sum of h_1..h_L = {s} outside [R/2, 3R/4]"));
        }
        let last = self.heights[self.l + 1];
        if last < -eps {
            return fail(format!("h_(L+1) = {last} < 0"));
        }
        Ok(())
    }
}

/// Runs `h_0 = R/4`, `h_{k+1} = (γ N_k)^{1/d}` while `Σ_{i=1}^{k} h_i < R/2`,
/// where `counts(k, heights)` returns `N_k` given `h_0..h_k`.
pub fn subdivide<F>(dim: Dim, radius: f64, gamma: f64, total: u64, mut counts: F) -> Result<Subdivision>
where
    F: FnMut(usize, &[f64]) -> u64,
{
    let h0 = radius / 4.0;
    let d = dim.get() as i32;
    if gamma < 1.0 {
        return Err(IdlaError::PreconditionViolated(format!("gamma = {gamma} < 1")));
    }
    if h0 < 1.0 {
        return Err(IdlaError::PreconditionViolated(format!("h_0 = R/4 = {h0} < 1")));
    }
    if gamma * total as f64 > h0.powi(d) {
        return Err(IdlaError::PreconditionViolated(format!("gamma·|eta| = {} > h_0^d = {}", gamma * total as f64, h0.powi(d))));
    }
    let mut heights = vec![h0];
    let mut cnt = Vec::new();
    let mut sum = 0.0;
    loop {
        let k = heights.len() - 1;
        let n_k = counts(k, &heights);
        let floor_h = heights[k].floor() as u64;
        if n_k < floor_h || n_k > total {
            return Err(IdlaError::PreconditionViolated(format!("N_{k} = {n_k} outside [floor(h_{k}) = {floor_h}, {total}]")));
        }
        cnt.push(n_k);
        let next = (gamma * n_k as f64).powf(1.0 / d as f64);
        heights.push(next);
        sum += next;
        if !(next >= 1.0 && sum < radius / 2.0) {
            break;
        }
    }
    let l = heights.len() - 1;
    let used: f64 = heights.iter().sum();
    heights.push(radius - used);
    let out = Subdivision { radius, gamma, heights, counts: cnt, l };
    out.check_invariants()?;
    Ok(out)
}

/// Subdivision of `B(z,R)` driven by a cluster: `N_k` is the number of
/// occupied sites in the shell `B(z, R - Σ_{i<k} h_i) \ B(z, R - Σ_{i<=k} h_i)`.
pub fn subdivide_cluster(cluster: &Cluster, z: &Site, radius: f64, gamma: f64, total: u64) -> Result<Subdivision> {
    let occupied: Vec<u64> = cluster.sites().iter().map(|s| s.dist2(z)).collect();
    subdivide(cluster.dim(), radius, gamma, total, |k, h| {
        let outer = radius - h[..k].iter().sum::<f64>();
        let inner = outer - h[k];
        let (co, ci) = (ceil_square(outer), ceil_square(inner.max(0.0)));
        occupied.iter().filter(|&&q| q < co && q >= ci).count() as u64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    #[test]
    fn covering_placement_conserves_mass() {
        let eta = covering_configuration(d(3), 6.0, 2.0, CoveringPlacement::UniformHalfBall);
        assert_eq!(eta.total(), 432);
        let ball = Ball::centered(d(3), 3.0).unwrap();
        assert!(eta.iter().all(|(s, _)| ball.contains(s)));
    }

    #[test]
    fn radius_one_is_always_covered() {
        let r = probe_covering(d(2), 1.0, 3.0, 50, 4.0, CoveringPlacement::UniformHalfBall, RandomSource::from_seed(0)).unwrap();
        assert_eq!(r.frequency, 0.0);
    }

    #[test]
    fn huge_a_always_covers() {
        let r = probe_covering(d(3), 5.0, 50.0, 100, 4.0, CoveringPlacement::UniformHalfBall, RandomSource::from_seed(1)).unwrap();
        assert_eq!(r.frequency, 0.0);
    }

    #[test]
    fn origin_probe_without_explorers() {
        let r = probe_origin_hit(d(2), 6.0, 0.0, 20, OriginPlacement::Stacked, RandomSource::from_seed(0)).unwrap();
        assert_eq!((r.explorers, r.frequency), (0, 0.0));
    }

    #[test]
    fn two_stacked_explorers_at_distance_one() {
        // first settles at (1,0); second moves to a uniform neighbour
        let trials = 20_000;
        for dim in [2usize, 3] {
            let r = probe_origin_hit(d(dim), 1.0, 2.0, trials, OriginPlacement::Stacked, RandomSource::from_seed(dim as u64)).unwrap();
            let p = 1.0 / (2 * dim) as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((r.frequency - p).abs() < 4.0 * se, "d={dim} {}", r.frequency);
        }
    }

    #[test]
    fn trap_edges() {
        let zero = probe_traps(d(2), 8.0, 0.0, 200, 2.0, RandomSource::from_seed(0)).unwrap();
        assert_eq!(zero.plain_crossed, 0);
        let full = probe_traps(d(2), 8.0, 1.0, 200, 2.0, RandomSource::from_seed(0)).unwrap();
        assert!(full.plain_crossed > 0);
        assert_eq!(full.containment_violations, 0);
    }

    #[test]
    fn scan_handles_n_one() {
        let s = scan_fluctuations(d(2), &[1.0, 3.0], 5, RandomSource::from_seed(0)).unwrap();
        assert!(s.stats[0].degenerate);
        assert_eq!(s.rows.len(), 10);
        for r in &s.rows {
            assert!(r.inner >= 0.0 && r.inner <= r.n && r.outer >= 0.0);
        }
        assert!(scan_fluctuations(d(2), &[3.0, 3.0], 1, RandomSource::from_seed(0)).is_err());
    }

    #[test]
    fn scan_is_independent_of_pool_width() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| scan_fluctuations(d(2), &[4.0, 6.0], 8, RandomSource::new(3, 1)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn subdivision_at_minimum_counts() {
        let s = subdivide(d(2), 40.0, 1.0, 100, |k, h| h[k].floor() as u64).unwrap();
        // h_0 = 10, N_0 = 10, h_1 = sqrt(10), N_1 = 3, h_2 = sqrt 3, ...
        assert!((s.heights[1] - 10f64.sqrt()).abs() < 1e-12);
        s.check_invariants().unwrap();
    }

    #[test]
    fn smallest_radius() {
        let s = subdivide(d(2), 4.0, 1.0, 1, |_, _| 1).unwrap();
        assert_eq!(s.heights[0], 1.0);
        assert!(*s.heights.last().unwrap() >= 0.0);
    }

    #[test]
    fn constant_counts() {
        let (r, beta, gamma) = (64.0, 0.01, 1.0);
        let n = (beta * r * r) as u64;
        let s = subdivide(d(2), r, gamma, n, |_, _| n).unwrap();
        let h = (gamma * n as f64).sqrt();
        assert!(s.heights[1..=s.l].iter().all(|x| (x - h).abs() < 1e-12));
        assert_eq!(s.l, ((r / 2.0) / h).floor() as usize + 1);
    }

    #[test]
    fn subdivision_preconditions() {
        assert!(matches!(subdivide(d(2), 8.0, 1.0, 5, |_, _| 2), Err(IdlaError::PreconditionViolated(_))));
        assert!(matches!(subdivide(d(2), 40.0, 1.0, 50, |_, _| 3), Err(IdlaError::PreconditionViolated(_))));
    }
}
