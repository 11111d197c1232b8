//! Internal DLA built wave by wave: before shell `S_k` is explored, every
//! unsettled explorer is paused on `Σ_k = ∂B(0, k·h)`. The paused explorers
//! then resume in lexicographic order of their pause site.
//!
//! Also the tile observables of a wave: the paused counts `W` and the mean
//! excess `μ(T)` with its hypothesis check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::Cluster;
use crate::error::{IdlaError, Result};
use crate::greens::{Domain, DEFAULT_SITE_BUDGET, SOLVER_TOL};
use crate::lattice::{
    ball_sites, ball_volume, ceil_square, inner_height, Dim, Radius, ShellConfig, ShellMode, ShellPartition, Site, TileFamily,
};
use crate::walk::{RandomSource, DEFAULT_STEP_CAP};

/// Snapshot taken when wave `k` has paused its explorers on `Σ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub k: usize,
    /// Radius `k·h` of the ball whose boundary holds the paused explorers.
    pub radius: f64,
    /// Explorers settled so far.
    pub settled: usize,
    pub paused: BTreeMap<Site, u64>,
}

impl WaveState {
    pub fn total_paused(&self) -> u64 {
        self.paused.values().sum()
    }
}

#[derive(Clone, Debug)]
pub struct WaveRun {
    pub n: f64,
    pub height: f64,
    pub cluster: Cluster,
    pub waves: Vec<WaveState>,
}

impl WaveRun {
    /// Inner partition covering every recorded wave.
    pub fn partition(&self) -> ShellPartition {
        ShellPartition::new(ShellConfig {
            dim: self.cluster.dim(),
            mode: ShellMode::Inner,
            base_radius: self.n,
            height: self.height,
            shell_count: self.waves.len() + 2,
        })
        .expect("height >= 1")
    }
}

/// `N = |B(0,n)|` explorers from the origin, explored wave by wave with
/// `h = h(n)`.
pub fn grow_by_waves(dim: Dim, n: f64, source: RandomSource) -> Result<WaveRun> {
    grow_by_waves_with(dim, n, inner_height(dim, n), source)
}

pub fn grow_by_waves_with(dim: Dim, n: f64, height: f64, source: RandomSource) -> Result<WaveRun> {
    if height.is_nan() || height < 1.0 {
        return Err(IdlaError::InvalidInput(format!("wave height must be >= 1, got {height}")));
    }
    let total = ball_volume(dim, n) as u64;
    if total == 0 {
        return Err(IdlaError::InvalidInput(format!("B(0,{n}) is empty")));
    }
    let cap = DEFAULT_STEP_CAP;
    let mut cluster = Cluster::new(dim, total);
    let mut rng = source.walker(dim);
    // (pause site, explorer, steps so far)
    let mut pending: Vec<(Site, usize, u64)> = (0..total as usize).map(|i| (Site::origin(dim), i, 0)).collect();
    let mut waves = Vec::new();
    let mut k = 0usize;
    while !pending.is_empty() {
        let radius = (k + 1) as f64 * height;
        let cutoff = ceil_square(radius);
        let mut next = Vec::new();
        for (start, explorer, t0) in pending {
            let mut pos = start;
            let mut t = t0;
            loop {
                if pos.norm2() >= cutoff {
                    next.push((pos, explorer, t));
                    break;
                }
                if !cluster.occupancy().contains(&pos) {
                    cluster.settle(explorer, pos, t);
                    break;
                }
                if t - t0 >= cap {
                    return Err(IdlaError::StepCapExceeded { cap });
                }
                pos = rng.step_from(&pos);
                t += 1;
            }
        }
        next.sort();
        k += 1;
        let mut paused = BTreeMap::new();
        for (s, _, _) in &next {
            *paused.entry(*s).or_insert(0) += 1;
        }
        if !paused.is_empty() {
            waves.push(WaveState { k, radius, settled: cluster.len(), paused });
        }
        pending = next;
    }
    Ok(WaveRun { n, height, cluster, waves })
}

/// Paused explorers per tile `B(center, h/2) ∩ Σ_k`; an explorer counts for
/// every tile containing its site.
pub fn tile_w_counts(wave: &WaveState, height: f64, centers: &[Site]) -> BTreeMap<Site, u64> {
    let r = Radius::new(height / 2.0).expect("height >= 0");
    centers
        .iter()
        .map(|c| {
            let w = wave.paused.iter().filter(|(s, _)| r.admits(s.dist2(c))).map(|(_, k)| *k).sum();
            (*c, w)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuOptions {
    pub site_budget: usize,
    /// Monte Carlo walks per term when the exact solve is too large.
    pub mc_trials: Option<u64>,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions { site_budget: DEFAULT_SITE_BUDGET, mc_trials: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub value: f64,
    /// 95% half-width; zero for exact values.
    pub halfwidth: f64,
    pub exact: bool,
}

/// Sites of `B(0,r)` at distance at least `L·h` from the tile.
fn far_sites(ball: &[Site], tile: &[Site], exclusion: f64) -> Vec<bool> {
    let cut = ceil_square(exclusion);
    ball.iter().map(|y| tile.iter().all(|t| y.dist2(t) >= cut)).collect()
}

fn check_tile(tile: &[Site], radius: f64) -> Result<()> {
    let r = Radius::new(radius)?;
    for t in tile {
        let inside_nb = t.neighbors().any(|y| r.admits(y.norm2()));
        if r.admits(t.norm2()) || !inside_nb {
            return Err(IdlaError::InvalidInput(format!("tile site {t} is not on ∂B(0,{radius})")));
        }
    }
    Ok(())
}

/// Exit probabilities `u(y) = P_y(S(H) ∈ T)` on `B(0, radius)`.
fn exit_to_tile(dim: Dim, radius: f64, tile: &[Site], budget: usize) -> Result<(Domain, Vec<f64>)> {
    let domain = Domain::ball(dim, radius, budget)?;
    let set: std::collections::HashSet<Site> = tile.iter().copied().collect();
    let u = domain.harmonic_extension(|s| if set.contains(s) { 1.0 } else { 0.0 }, SOLVER_TOL)?;
    Ok((domain, u.values))
}

/// `μ(T) = E[M(N·1_0, T)] - E[M(B(0,kh) \ B̃(Lh), T)]` at `h = h(n)`, where
/// `B̃(r)` is the set of sites of `B(0,kh)` closer than `r` to `T`.
pub fn mu_tile(dim: Dim, n: f64, k: usize, tile: &[Site], l: f64, opts: MuOptions, source: RandomSource) -> Result<MuEstimate> {
    let h = inner_height(dim, n);
    let radius = k as f64 * h;
    check_tile(tile, radius)?;
    if tile.is_empty() {
        return Ok(MuEstimate { value: 0.0, halfwidth: 0.0, exact: true });
    }
    let total = ball_volume(dim, n) as f64;
    match exit_to_tile(dim, radius, tile, opts.site_budget) {
        Ok((domain, u)) => {
            let keep = far_sites(domain.sites(), tile, l * h);
            let u0 = domain.index_of(&Site::origin(dim)).map(|i| u[i]).unwrap_or(0.0);
            let far: f64 = u.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).sum();
            Ok(MuEstimate { value: total * u0 - far, halfwidth: 0.0, exact: true })
        }
        Err(IdlaError::DomainTooLarge { sites, budget }) => {
            let trials = opts.mc_trials.ok_or(IdlaError::DomainTooLarge { sites, budget })?;
            mu_monte_carlo(dim, radius, tile, l * h, total, trials, source)
        }
        Err(e) => Err(e),
    }
}

fn mu_monte_carlo(
    dim: Dim,
    radius: f64,
    tile: &[Site],
    exclusion: f64,
    total: f64,
    trials: u64,
    source: RandomSource,
) -> Result<MuEstimate> {
    let ball = ball_sites(&Site::origin(dim), radius);
    let keep = far_sites(&ball, tile, exclusion);
    let kept: Vec<Site> = ball.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| *s).collect();
    let set: std::collections::HashSet<Site> = tile.iter().copied().collect();
    let cutoff = ceil_square(radius);
    let mut rng = source.walker(dim);
    let exits = |start: Site, rng: &mut crate::walk::StepRng| -> bool {
        let mut pos = start;
        while pos.norm2() < cutoff {
            pos = rng.step_from(&pos);
        }
        set.contains(&pos)
    };
    let trials = trials.max(1);
    let mut x0 = 0u64;
    let mut xy = 0u64;
    for _ in 0..trials {
        x0 += exits(Site::origin(dim), &mut rng) as u64;
        if !kept.is_empty() {
            let y = kept[rng.below(kept.len() as u64) as usize];
            xy += exits(y, &mut rng) as u64;
        }
    }
    let p0 = x0 as f64 / trials as f64;
    let py = xy as f64 / trials as f64;
    let m = kept.len() as f64;
    let var = total * total * p0 * (1.0 - p0) / trials as f64 + m * m * py * (1.0 - py) / trials as f64;
    Ok(MuEstimate { value: total * p0 - m * py, halfwidth: 1.96 * var.sqrt(), exact: false })
}

/// `sup u(y)` over sites of `B(0,kh)` at distance `>= L·h` from the tile;
/// zero when that set is empty.
pub fn check_h1(dim: Dim, n: f64, k: usize, tile: &[Site], l: f64) -> Result<f64> {
    let h = inner_height(dim, n);
    let radius = k as f64 * h;
    check_tile(tile, radius)?;
    if tile.is_empty() {
        return Ok(0.0);
    }
    let (domain, u) = exit_to_tile(dim, radius, tile, DEFAULT_SITE_BUDGET)?;
    let keep = far_sites(domain.sites(), tile, l * h);
    Ok(u.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileStats {
    pub k: usize,
    pub center: Site,
    pub w: u64,
    pub mu: f64,
    pub mu_halfwidth: f64,
    pub exclusion_radius: f64,
}

/// `W` and `μ` for every tile of wave `k` in the chosen family.
pub fn wave_tile_stats(
    run: &WaveRun,
    k: usize,
    family: TileFamily,
    l: f64,
    opts: MuOptions,
    source: RandomSource,
) -> Result<Vec<TileStats>> {
    let wave = run.waves.iter().find(|w| w.k == k).ok_or_else(|| IdlaError::InvalidInput(format!("no wave {k} in this run")))?;
    let part = run.partition();
    let dim = run.cluster.dim();
    let centers = part.tile_centers(k, family);
    let counts = tile_w_counts(wave, run.height, &centers);
    let mut out = Vec::with_capacity(centers.len());
    for (i, c) in centers.iter().enumerate() {
        let tile = part.tile(k, c);
        let mu = mu_tile(dim, run.n, k, &tile, l, opts, source.child(i as u64))?;
        out.push(TileStats { k, center: *c, w: counts[c], mu: mu.value, mu_halfwidth: mu.halfwidth, exclusion_radius: l * run.height });
    }
    Ok(out)
}
