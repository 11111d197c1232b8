//! Internal DLA growth: each explorer walks from its start until it stands
//! on a site not yet occupied and settles there. Also the stopped variant
//! (explorers frozen on `∂B(0,R)`), the inner/outer error radii, and the
//! walker/explorer hit counts `M_R(η,·)` and `W_R(η,·)`.
//!
//! Explorers are processed in lexicographic order of their starting site,
//! then by multiplicity index. One random stream drives a whole run.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{IdlaError, Result};
use crate::grid::Occupancy;
use crate::lattice::{ball_volume, Ball, Dim, Radius, Site};
use crate::walk::{RandomSource, StepRng, DEFAULT_STEP_CAP, GENERATOR_ID};

/// Finite multiset of starting positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    dim: Dim,
    counts: BTreeMap<Site, u64>,
}

impl Configuration {
    pub fn empty(dim: Dim) -> Self {
        Configuration { dim, counts: BTreeMap::new() }
    }

    /// `count · 1_site`.
    pub fn point(site: Site, count: u64) -> Self {
        let mut c = Configuration::empty(site.dim());
        c.add(site, count);
        c
    }

    /// `N · 1_0` with `N = |B(0,n)|`.
    pub fn ball_mass(dim: Dim, n: f64) -> Self {
        Configuration::point(Site::origin(dim), ball_volume(dim, n) as u64)
    }

    /// One explorer on each site of `sites`.
    pub fn indicator<'a, I: IntoIterator<Item = &'a Site>>(dim: Dim, sites: I) -> Self {
        let mut c = Configuration::empty(dim);
        for s in sites {
            c.add(*s, 1);
        }
        c
    }

    pub fn add(&mut self, site: Site, count: u64) {
        assert_eq!(site.dim(), self.dim, "site dimension differs from configuration");
        if count > 0 {
            *self.counts.entry(site).or_insert(0) += count;
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// `|η| = Σ η(z)`.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, site: &Site) -> u64 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &u64)> {
        self.counts.iter()
    }

    /// Explorer start positions in processing order.
    pub fn starts(&self) -> impl Iterator<Item = Site> + '_ {
        self.counts.iter().flat_map(|(s, &c)| std::iter::repeat_n(*s, c as usize))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub explorer: usize,
    pub site: Site,
    /// Settling time `τ`, counted in steps of this explorer.
    pub time: u64,
}

#[derive(Clone, Debug)]
pub struct Cluster {
    dim: Dim,
    occupied: Occupancy,
    settle_order: Vec<Settlement>,
    stopped: BTreeMap<Site, u64>,
    explorers: u64,
}

impl Cluster {
    pub(crate) fn new(dim: Dim, expected: u64) -> Self {
        // a ball of the expected volume, plus slack
        let r = (expected as f64).powf(1.0 / dim.get() as f64).ceil() as i32 + 4;
        Cluster {
            dim,
            occupied: Occupancy::new(dim, r),
            settle_order: Vec::with_capacity(expected as usize),
            stopped: BTreeMap::new(),
            explorers: 0,
        }
    }

    pub(crate) fn occupancy(&self) -> &Occupancy {
        &self.occupied
    }

    pub(crate) fn settle(&mut self, explorer: usize, site: Site, time: u64) {
        debug_assert!(!self.occupied.contains(&site));
        self.occupied.set(site, explorer as u32);
        self.settle_order.push(Settlement { explorer, site, time });
        self.explorers += 1;
    }

    pub(crate) fn stop(&mut self, site: Site) {
        *self.stopped.entry(site).or_insert(0) += 1;
        self.explorers += 1;
    }

    pub(crate) fn from_parts(dim: Dim, settle_order: Vec<Settlement>, stopped: BTreeMap<Site, u64>) -> Self {
        let mut c = Cluster::new(dim, settle_order.len() as u64);
        for s in settle_order {
            c.settle(s.explorer, s.site, s.time);
        }
        for (site, k) in stopped {
            for _ in 0..k {
                c.stop(site);
            }
        }
        c
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// `|A|`.
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.occupied.contains(site)
    }

    /// Explorer settled on `site`, if any.
    pub fn occupant(&self, site: &Site) -> Option<usize> {
        self.occupied.label(site).map(|l| l as usize)
    }

    /// Occupied sites, lexicographically sorted.
    pub fn sites(&self) -> Vec<Site> {
        self.occupied.sites()
    }

    pub fn settle_order(&self) -> &[Settlement] {
        &self.settle_order
    }

    pub fn stopped_on_boundary(&self) -> &BTreeMap<Site, u64> {
        &self.stopped
    }

    pub fn total_stopped(&self) -> u64 {
        self.stopped.values().sum()
    }

    /// Number of explorers processed, settled or stopped.
    pub fn explorers(&self) -> u64 {
        self.explorers
    }

    pub fn max_norm2(&self) -> Option<u64> {
        self.settle_order.iter().map(|s| s.site.norm2()).max()
    }

    /// Smallest squared norm of an unoccupied site.
    pub fn min_hole_norm2(&self) -> u64 {
        if !self.occupied.contains(&Site::origin(self.dim)) {
            return 0;
        }
        let extent = self.settle_order.iter().map(|s| s.site.max_abs()).max().unwrap_or(0) + 1;
        // (extent, 0, ..., 0) is unoccupied, so the minimum is attained inside this cube
        crate::lattice::box_sites(self.dim, extent)
            .filter(|s| !self.occupied.contains(s))
            .map(|s| s.norm2())
            .min()
            .expect("cube contains an unoccupied site")
    }

    pub fn count_within(&self, radius: f64) -> usize {
        let r = Radius::new(radius).expect("radius must be >= 0");
        self.settle_order.iter().filter(|s| r.admits(s.site.norm2())).count()
    }

    pub fn to_dump(&self, meta: RunMeta) -> ClusterDump {
        ClusterDump {
            schema: CLUSTER_SCHEMA.to_string(),
            meta,
            occupied: self.len(),
            settle_order: self.settle_order.iter().map(|s| (s.explorer, s.site, s.time)).collect(),
            stopped_on_boundary: self.stopped.iter().map(|(s, c)| (*s, *c)).collect(),
        }
    }
}

pub const CLUSTER_SCHEMA: &str = "idla.cluster/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dim: Dim,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_radius: Option<f64>,
    pub explorers: u64,
    pub seed: u64,
    pub stream: u64,
    pub generator: String,
}

impl RunMeta {
    pub fn new(dim: Dim, explorers: u64, source: RandomSource) -> Self {
        RunMeta {
            dim,
            n: None,
            stop_radius: None,
            explorers,
            seed: source.base_seed,
            stream: source.stream_id,
            generator: GENERATOR_ID.to_string(),
        }
    }
}

/// Versioned JSON form of a cluster: metadata, then the settle order as
/// `(explorer index, site, τ)` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDump {
    pub schema: String,
    pub meta: RunMeta,
    pub occupied: usize,
    pub settle_order: Vec<(usize, Site, u64)>,
    pub stopped_on_boundary: Vec<(Site, u64)>,
}

impl ClusterDump {
    pub fn into_cluster(self) -> Result<Cluster> {
        if self.schema != CLUSTER_SCHEMA {
            return Err(IdlaError::InvalidInput(format!("unknown cluster schema {}", self.schema)));
        }
        let order = self.settle_order.into_iter().map(|(explorer, site, time)| Settlement { explorer, site, time }).collect();
        Ok(Cluster::from_parts(self.meta.dim, order, self.stopped_on_boundary.into_iter().collect()))
    }
}

#[inline]
fn walk_to_vacancy(occ: &Occupancy, start: Site, rng: &mut StepRng, cap: u64) -> Result<(Site, u64)> {
    let mut pos = start;
    let mut t = 0u64;
    while occ.contains(&pos) {
        if t >= cap {
            return Err(IdlaError::StepCapExceeded { cap });
        }
        pos = rng.step_from(&pos);
        t += 1;
    }
    Ok((pos, t))
}

/// Internal DLA cluster of `η`.
pub fn grow(eta: &Configuration, source: RandomSource) -> Result<Cluster> {
    grow_with_cap(eta, source, DEFAULT_STEP_CAP)
}

pub fn grow_with_cap(eta: &Configuration, source: RandomSource, step_cap: u64) -> Result<Cluster> {
    if eta.total() == 0 {
        return Err(IdlaError::InvalidInput("configuration must hold at least one explorer".into()));
    }
    let dim = eta.dim();
    let mut cluster = Cluster::new(dim, eta.total());
    let mut rng = source.walker(dim);
    for (k, start) in eta.starts().enumerate() {
        let (site, t) = walk_to_vacancy(&cluster.occupied, start, &mut rng, step_cap)?;
        cluster.settle(k, site, t);
    }
    Ok(cluster)
}

/// Internal DLA with explorers frozen on `∂B(0,R)`: returns `A_R(η)` with
/// the frozen explorers recorded in `stopped_on_boundary`.
pub fn grow_stopped(eta: &Configuration, radius: f64, source: RandomSource) -> Result<Cluster> {
    grow_stopped_with_cap(eta, radius, source, DEFAULT_STEP_CAP)
}

pub fn grow_stopped_with_cap(eta: &Configuration, radius: f64, source: RandomSource, step_cap: u64) -> Result<Cluster> {
    let dim = eta.dim();
    let ball = Ball::centered(dim, radius)?;
    check_support(eta, &ball)?;
    let cutoff = ball.radius.cutoff();
    let mut cluster = Cluster::new(dim, eta.total());
    let mut rng = source.walker(dim);
    for (k, start) in eta.starts().enumerate() {
        let mut pos = start;
        let mut t = 0u64;
        loop {
            if pos.norm2() >= cutoff {
                cluster.stop(pos);
                break;
            }
            if !cluster.occupied.contains(&pos) {
                cluster.settle(k, pos, t);
                break;
            }
            if t >= step_cap {
                return Err(IdlaError::StepCapExceeded { cap: step_cap });
            }
            pos = rng.step_from(&pos);
            t += 1;
        }
    }
    Ok(cluster)
}

fn check_support(eta: &Configuration, ball: &Ball) -> Result<()> {
    for (s, _) in eta.iter() {
        if !ball.contains(s) {
            return Err(IdlaError::ConfigOutsideDomain { site: s.to_string(), radius: ball.radius.value() });
        }
    }
    Ok(())
}

/// Inner and outer error radii of a cluster relative to `B(0,n)`, with the
/// exact squared norms they were read from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRadii {
    pub n: f64,
    /// `δ_I(n)`, in `[0, n]`.
    pub inner: f64,
    /// `δ_O(n) >= 0`.
    pub outer: f64,
    /// Squared norm of the closest unoccupied site.
    pub hole_norm2: u64,
    /// Squared norm of the farthest occupied site (`None` for an empty cluster).
    pub max_norm2: Option<u64>,
}

/// `δ_I(n) = n - sup{r >= 0 : B(0,r) ⊂ A}`. The supremum is the norm of the
/// closest unoccupied site; the result is clamped to `[0, n]`.
pub fn inner_error(cluster: &Cluster, n: f64) -> f64 {
    let hole = (cluster.min_hole_norm2() as f64).sqrt();
    (n - hole).clamp(0.0, n.max(0.0))
}

/// `δ_O(n) = inf{r >= 0 : A ⊂ B(0,r)} - n`. With strict balls the infimum
/// is the largest occupied norm (not attained); clamped at 0.
pub fn outer_error(cluster: &Cluster, n: f64) -> f64 {
    let far = cluster.max_norm2().map(|q| (q as f64).sqrt()).unwrap_or(0.0);
    (far - n).max(0.0)
}

pub fn error_radii(cluster: &Cluster, n: f64) -> ErrorRadii {
    ErrorRadii {
        n,
        inner: inner_error(cluster, n),
        outer: outer_error(cluster, n),
        hole_norm2: cluster.min_hole_norm2(),
        max_norm2: cluster.max_norm2(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitMode {
    /// `M_R(η,·)`: free simple random walks.
    Walkers,
    /// `W_R(η,·)`: explorers obeying the aggregation rule.
    Explorers,
}

#[derive(Clone, Debug)]
pub struct HitCounts {
    pub counts: BTreeMap<Site, u64>,
    /// `A_R(η)` when explorers were run.
    pub cluster: Option<Cluster>,
}

struct TargetTally {
    index: HashMap<Site, usize>,
    sites: Vec<Site>,
    counts: Vec<u64>,
    stamp: Vec<usize>,
}

impl TargetTally {
    fn new(targets: &[Site]) -> Self {
        let mut sites: Vec<Site> = targets.to_vec();
        sites.sort();
        sites.dedup();
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let n = sites.len();
        TargetTally { index, sites, counts: vec![0; n], stamp: vec![usize::MAX; n] }
    }

    #[inline]
    fn visit(&mut self, walk: usize, s: &Site) {
        if let Some(&i) = self.index.get(s) {
            if self.stamp[i] != walk {
                self.stamp[i] = walk;
                self.counts[i] += 1;
            }
        }
    }

    fn into_map(self) -> BTreeMap<Site, u64> {
        self.sites.into_iter().zip(self.counts).collect()
    }
}

fn check_targets(targets: &[Site], ball: &Ball) -> Result<()> {
    for t in targets {
        if !ball.contains(t) && !ball.on_boundary(t) {
            return Err(IdlaError::InvalidInput(format!("target {t} is neither in B(0,{}) nor on its boundary", ball.radius.value())));
        }
    }
    Ok(())
}

/// Number of walks (or explorers) started from `η` that visit each target
/// at or before the time they exit `B(0,R)`. Explorers stop counting once
/// settled.
pub fn count_hits(eta: &Configuration, radius: f64, targets: &[Site], mode: HitMode, source: RandomSource) -> Result<HitCounts> {
    let dim = eta.dim();
    let ball = Ball::centered(dim, radius)?;
    check_support(eta, &ball)?;
    check_targets(targets, &ball)?;
    let cutoff = ball.radius.cutoff();
    let mut tally = TargetTally::new(targets);
    let mut rng = source.walker(dim);
    let cap = DEFAULT_STEP_CAP;
    match mode {
        HitMode::Walkers => {
            for (k, start) in eta.starts().enumerate() {
                let mut pos = start;
                let mut t = 0u64;
                loop {
                    tally.visit(k, &pos);
                    if pos.norm2() >= cutoff {
                        break;
                    }
                    if t >= cap {
                        return Err(IdlaError::StepCapExceeded { cap });
                    }
                    pos = rng.step_from(&pos);
                    t += 1;
                }
            }
            Ok(HitCounts { counts: tally.into_map(), cluster: None })
        }
        HitMode::Explorers => {
            let cluster = explorer_pass(eta, cutoff, &mut tally, None, &mut rng, cap)?;
            Ok(HitCounts { counts: tally.into_map(), cluster: Some(cluster) })
        }
    }
}

/// Per-target tallies keyed by site.
pub type SiteCounts = BTreeMap<Site, u64>;

/// Coupled `W_R(η,·)` and `M_R(η,·)`: each walker follows its explorer's
/// trajectory up to the settling time and then continues as a free walk.
pub fn count_hits_coupled(
    eta: &Configuration,
    radius: f64,
    targets: &[Site],
    source: RandomSource,
) -> Result<(SiteCounts, SiteCounts, Cluster)> {
    let dim = eta.dim();
    let ball = Ball::centered(dim, radius)?;
    check_support(eta, &ball)?;
    check_targets(targets, &ball)?;
    let mut w_tally = TargetTally::new(targets);
    let mut m_tally = TargetTally::new(targets);
    let mut rng = source.walker(dim);
    let cluster = explorer_pass(eta, ball.radius.cutoff(), &mut w_tally, Some(&mut m_tally), &mut rng, DEFAULT_STEP_CAP)?;
    Ok((w_tally.into_map(), m_tally.into_map(), cluster))
}

fn explorer_pass(
    eta: &Configuration,
    cutoff: u64,
    tally: &mut TargetTally,
    mut walkers: Option<&mut TargetTally>,
    rng: &mut StepRng,
    cap: u64,
) -> Result<Cluster> {
    let mut cluster = Cluster::new(eta.dim(), eta.total());
    for (k, start) in eta.starts().enumerate() {
        let mut pos = start;
        let mut t = 0u64;
        let mut settled = false;
        loop {
            if let Some(m) = walkers.as_deref_mut() {
                m.visit(k, &pos);
            }
            if !settled {
                tally.visit(k, &pos);
                if pos.norm2() >= cutoff {
                    cluster.stop(pos);
                    break;
                }
                if !cluster.occupied.contains(&pos) {
                    cluster.settle(k, pos, t);
                    settled = true;
                    if walkers.is_none() {
                        break;
                    }
                }
            } else if pos.norm2() >= cutoff {
                break;
            }
            if t >= cap {
                return Err(IdlaError::StepCapExceeded { cap });
            }
            pos = rng.step_from(&pos);
            t += 1;
        }
    }
    Ok(cluster)
}
