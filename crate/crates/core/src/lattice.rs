//! Integer geometry of `Z^d`: sites, strict euclidean balls, external
//! boundaries, and the concentric shell partitions used by the wave and
//! flashing constructions.
//!
//! Ball membership never touches floating point comparisons: a radius `r`
//! is turned into the integer cutoff `ceil(r^2)` computed exactly from the
//! binary representation of `r`, and a site `y` belongs to `B(x, r)` iff
//! `|y - x|^2 < ceil(r^2)`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{IdlaError, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dim(u8);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if (2..=MAX_DIM).contains(&d) {
            Ok(Dim(d as u8))
        } else {
            Err(IdlaError::InvalidDimension(d))
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Number of nearest neighbours, `2d`.
    #[inline]
    pub fn degree(self) -> usize {
        2 * self.0 as usize
    }
}

impl TryFrom<usize> for Dim {
    type Error = IdlaError;
    fn try_from(d: usize) -> Result<Self> {
        Dim::new(d)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.get()
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of `Z^d`. Unused trailing coordinates are always zero, so the
/// derived ordering is lexicographic within a fixed dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn origin(dim: Dim) -> Self {
        Site { coords: [0; MAX_DIM], dim: dim.0 }
    }

    pub fn new(coords: &[i32]) -> Result<Self> {
        let dim = Dim::new(coords.len())?;
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { coords: c, dim: dim.0 })
    }

    /// `(r, 0, ..., 0)`.
    pub fn on_axis(dim: Dim, r: i32) -> Self {
        let mut s = Site::origin(dim);
        s.coords[0] = r;
        s
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        Dim(self.dim)
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    #[inline]
    pub fn norm2(&self) -> u64 {
        self.coords().iter().map(|&c| (c as i64 * c as i64) as u64).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    #[inline]
    pub fn dist2(&self, other: &Site) -> u64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(&a, &b)| {
                let d = a as i64 - b as i64;
                (d * d) as u64
            })
            .sum()
    }

    #[inline]
    pub fn max_abs(&self) -> i32 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Neighbour in direction `dir ∈ 0..2d`: axis `dir / 2`, sign `+` for even `dir`.
    #[inline]
    pub fn neighbor(&self, dir: usize) -> Site {
        let mut s = *self;
        if dir & 1 == 0 {
            s.coords[dir >> 1] += 1;
        } else {
            s.coords[dir >> 1] -= 1;
        }
        s
    }

    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..2 * self.dim as usize).map(move |k| self.neighbor(k))
    }

    pub fn translate(&self, by: &Site) -> Site {
        let mut s = *self;
        for i in 0..self.dim as usize {
            s.coords[i] += by.coords[i];
        }
        s
    }

    pub fn sub(&self, other: &Site) -> Site {
        let mut s = *self;
        for i in 0..self.dim as usize {
            s.coords[i] -= other.coords[i];
        }
        s
    }

    pub fn with_coord(&self, axis: usize, value: i32) -> Site {
        let mut s = *self;
        s.coords[axis] = value;
        s
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        Site::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Exact `ceil(r^2)` for a finite non-negative `r`, using the binary
/// expansion `r = m * 2^e` so that `r^2 = m^2 * 2^(2e)` is evaluated in
/// integers.
pub fn ceil_square(r: f64) -> u64 {
    assert!(r.is_finite() && r >= 0.0, "radius must be finite and non-negative, got {r}");
    if r == 0.0 {
        return 0;
    }
    let bits = r.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 { (frac, -1074i64) } else { (frac | (1u64 << 52), exp_bits - 1075) };
    let m2 = (mantissa as u128) * (mantissa as u128);
    let e2 = 2 * exp;
    if e2 >= 0 {
        let shifted = if e2 >= 128 || m2.leading_zeros() < e2 as u32 { u128::MAX } else { m2 << e2 };
        u64::try_from(shifted).unwrap_or(u64::MAX)
    } else {
        let s = (-e2) as u32;
        if s >= 128 {
            return 1;
        }
        let q = m2 >> s;
        let rem = m2 & ((1u128 << s) - 1);
        let c = if rem != 0 { q + 1 } else { q };
        u64::try_from(c).unwrap_or(u64::MAX)
    }
}

/// A non-negative real radius with its exact squared cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Radius {
    value: f64,
    cutoff: u64,
}

impl Radius {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(IdlaError::InvalidInput(format!("radius must be finite and >= 0, got {value}")));
        }
        Ok(Radius { value, cutoff: ceil_square(value) })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `ceil(r^2)`: a site at squared distance `q` is inside iff `q < cutoff`.
    #[inline]
    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    #[inline]
    pub fn admits(&self, norm2: u64) -> bool {
        norm2 < self.cutoff
    }

    /// Largest integer coordinate magnitude a member site can have.
    pub fn reach(&self) -> i32 {
        if self.cutoff == 0 {
            return -1;
        }
        let mut k = ((self.cutoff - 1) as f64).sqrt() as i64;
        while (k + 1) * (k + 1) <= (self.cutoff - 1) as i64 {
            k += 1;
        }
        while k * k > (self.cutoff - 1) as i64 {
            k -= 1;
        }
        k as i32
    }
}

impl From<Radius> for f64 {
    fn from(r: Radius) -> f64 {
        r.value
    }
}

impl TryFrom<f64> for Radius {
    type Error = IdlaError;
    fn try_from(v: f64) -> Result<Self> {
        Radius::new(v)
    }
}

/// Strict euclidean ball `B(center, r) ∩ Z^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Site,
    pub radius: Radius,
}

impl Ball {
    pub fn new(center: Site, radius: f64) -> Result<Self> {
        Ok(Ball { center, radius: Radius::new(radius)? })
    }

    pub fn centered(dim: Dim, radius: f64) -> Result<Self> {
        Ball::new(Site::origin(dim), radius)
    }

    #[inline]
    pub fn contains(&self, y: &Site) -> bool {
        self.radius.admits(y.dist2(&self.center))
    }

    pub fn sites(&self) -> Vec<Site> {
        ball_sites(&self.center, self.radius.value())
    }

    /// Sites of the external boundary `∂B`, without materializing `B`.
    pub fn on_boundary(&self, y: &Site) -> bool {
        let c = self.radius.cutoff();
        let rel = y.sub(&self.center);
        let q = rel.norm2();
        if q < c {
            return false;
        }
        // the neighbour closest to the center has squared norm q - 2 max|y_i| + 1
        let m = rel.max_abs() as u64;
        if m == 0 {
            return false;
        }
        q + 1 - 2 * m < c
    }

    pub fn boundary_sites(&self) -> Vec<Site> {
        let dim = self.center.dim();
        let reach = self.radius.reach() + 1;
        if reach <= 0 {
            return Vec::new();
        }
        box_sites(dim, reach).map(|s| s.translate(&self.center)).filter(|s| self.on_boundary(s)).collect()
    }
}

/// Iterates the cube `[-half, half]^d` in lexicographic order.
pub fn box_sites(dim: Dim, half: i32) -> impl Iterator<Item = Site> {
    let d = dim.get();
    let mut cur = if half >= 0 {
        let mut s = Site::origin(dim);
        for i in 0..d {
            s.coords[i] = -half;
        }
        Some(s)
    } else {
        None
    };
    std::iter::from_fn(move || {
        let out = cur?;
        let mut next = out;
        let mut axis = d;
        loop {
            if axis == 0 {
                cur = None;
                break;
            }
            axis -= 1;
            if next.coords[axis] < half {
                next.coords[axis] += 1;
                cur = Some(next);
                break;
            }
            next.coords[axis] = -half;
        }
        Some(out)
    })
}

/// `B(center, radius) ∩ Z^d` in lexicographic order.
pub fn ball_sites(center: &Site, radius: f64) -> Vec<Site> {
    let r = Radius::new(radius).expect("radius must be finite and non-negative");
    let reach = r.reach();
    if reach < 0 {
        return Vec::new();
    }
    box_sites(center.dim(), reach).filter(|s| r.admits(s.norm2())).map(|s| s.translate(center)).collect()
}

/// Number of lattice sites in `B(0, radius)`.
pub fn ball_volume(dim: Dim, radius: f64) -> usize {
    let r = Radius::new(radius).expect("radius must be finite and non-negative");
    let reach = r.reach();
    if reach < 0 {
        return 0;
    }
    box_sites(dim, reach).filter(|s| r.admits(s.norm2())).count()
}

/// External boundary `{z ∉ Λ : ∃ y ∈ Λ, |y - z| = 1}`, sorted.
pub fn boundary<'a, I>(region: I) -> Vec<Site>
where
    I: IntoIterator<Item = &'a Site>,
{
    let set: BTreeSet<Site> = region.into_iter().copied().collect();
    let mut out = BTreeSet::new();
    for y in &set {
        for z in y.neighbors() {
            if !set.contains(&z) {
                out.insert(z);
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShellMode {
    /// `S_0 = B(0,h)`, `S_k = B(0,(k+1)h) \ B(0,kh)`, `Σ_k = ∂B(0,kh)`.
    Inner,
    /// `S_k = B(0,n+2(k+1)h) \ B(0,n+2kh)`, `Σ_k = ∂B(0,n+(2k+1)h)`, `k >= 0`.
    Outward,
    /// `S_k = B(0,2R-2(k-1)h) \ B(0,2R-2kh)`, `Σ_k = ∂B(0,2R-(2k-1)h)`, `k = 1..=R/2h`.
    Inward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileFamily {
    /// Every sphere site is a tile center.
    All,
    /// Greedy lexicographic maximal subset whose centers are `>= h/2` apart.
    Thinned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    pub dim: Dim,
    pub mode: ShellMode,
    /// `n` for inner/outward modes, `R` for inward mode.
    pub base_radius: f64,
    pub height: f64,
    /// Ignored in inward mode, where the count is `R / 2h`.
    pub shell_count: usize,
}

/// `h(n)`: `log n` for `d = 2`, `sqrt(log n)` for `d >= 3`, floored at 1.
pub fn inner_height(dim: Dim, n: f64) -> f64 {
    let l = if n > 1.0 { n.ln() } else { 0.0 };
    let h = if dim.get() == 2 { l } else { l.sqrt() };
    h.max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPartition {
    pub dim: Dim,
    pub mode: ShellMode,
    pub base_radius: f64,
    pub height: f64,
    /// The height originally requested; differs from `height` when inward
    /// mode had to round `R / 2h` to an integer.
    pub requested_height: f64,
    pub shell_count: usize,
}

impl ShellPartition {
    pub fn new(cfg: ShellConfig) -> Result<Self> {
        if !cfg.height.is_finite() || cfg.height < 1.0 {
            return Err(IdlaError::InvalidInput(format!("shell height must be >= 1, got {}", cfg.height)));
        }
        if !cfg.base_radius.is_finite() || cfg.base_radius < 0.0 {
            return Err(IdlaError::InvalidInput(format!("base radius must be >= 0, got {}", cfg.base_radius)));
        }
        match cfg.mode {
            ShellMode::Inward => {
                let r = cfg.base_radius;
                if r < 2.0 {
                    return Err(IdlaError::InvalidInput(format!("inward mode needs R >= 2 so that h >= 1, got {r}")));
                }
                // smallest h' >= h with R / 2h' a positive integer
                let m = ((r / (2.0 * cfg.height)).floor() as usize).max(1);
                let h = r / (2.0 * m as f64);
                if h < 1.0 {
                    return Err(IdlaError::InvalidInput(format!("inward mode: adjusted height {h} < 1")));
                }
                Ok(ShellPartition { dim: cfg.dim, mode: cfg.mode, base_radius: r, height: h, requested_height: cfg.height, shell_count: m })
            }
            _ => {
                if cfg.shell_count == 0 {
                    return Err(IdlaError::InvalidInput("shell_count must be >= 1".into()));
                }
                Ok(ShellPartition {
                    dim: cfg.dim,
                    mode: cfg.mode,
                    base_radius: cfg.base_radius,
                    height: cfg.height,
                    requested_height: cfg.height,
                    shell_count: cfg.shell_count,
                })
            }
        }
    }

    /// Inner-mode partition with `h = h(n)` and enough shells to cover `B(0, n + h)`.
    pub fn inner_for(dim: Dim, n: f64) -> Result<Self> {
        let h = inner_height(dim, n);
        let count = ((n / h).floor() as usize) + 2;
        ShellPartition::new(ShellConfig { dim, mode: ShellMode::Inner, base_radius: n, height: h, shell_count: count })
    }

    /// Valid shell indices.
    pub fn indices(&self) -> std::ops::Range<usize> {
        match self.mode {
            ShellMode::Inward => 1..self.shell_count + 1,
            _ => 0..self.shell_count,
        }
    }

    fn check_index(&self, k: usize) {
        assert!(self.indices().contains(&k), "shell index {k} out of range {:?}", self.indices());
    }

    /// `(inner, outer)` radii with `S_k = B(0, outer) \ B(0, inner)`.
    pub fn shell_radii(&self, k: usize) -> (f64, f64) {
        self.check_index(k);
        let h = self.height;
        let k = k as f64;
        match self.mode {
            ShellMode::Inner => (k * h, (k + 1.0) * h),
            ShellMode::Outward => (self.base_radius + 2.0 * k * h, self.base_radius + 2.0 * (k + 1.0) * h),
            ShellMode::Inward => {
                let r = self.base_radius;
                (2.0 * r - 2.0 * k * h, 2.0 * r - 2.0 * (k - 1.0) * h)
            }
        }
    }

    /// Radius of the ball whose boundary is `Σ_k`.
    pub fn sphere_radius(&self, k: usize) -> f64 {
        self.check_index(k);
        let h = self.height;
        let kf = k as f64;
        match self.mode {
            ShellMode::Inner => kf * h,
            ShellMode::Outward => self.base_radius + (2.0 * kf + 1.0) * h,
            ShellMode::Inward => 2.0 * self.base_radius - (2.0 * kf - 1.0) * h,
        }
    }

    /// `(inner, outer)` radii of the region the shells tile.
    pub fn extent(&self) -> (f64, f64) {
        let first = self.indices().start;
        let last = self.indices().end - 1;
        match self.mode {
            ShellMode::Inward => (self.shell_radii(last).0, self.shell_radii(first).1),
            _ => (self.shell_radii(first).0, self.shell_radii(last).1),
        }
    }

    pub fn in_shell(&self, k: usize, y: &Site) -> bool {
        let (a, b) = self.shell_radii(k);
        let q = y.norm2();
        q < ceil_square(b) && q >= ceil_square(a)
    }

    pub fn in_sphere(&self, k: usize, y: &Site) -> bool {
        let ball = Ball { center: Site::origin(self.dim), radius: Radius::new(self.sphere_radius(k)).unwrap() };
        ball.on_boundary(y)
    }

    pub fn shell_sites(&self, k: usize) -> Vec<Site> {
        let (a, b) = self.shell_radii(k);
        let inner = ceil_square(a);
        ball_sites(&Site::origin(self.dim), b).into_iter().filter(|s| s.norm2() >= inner).collect()
    }

    pub fn sphere_sites(&self, k: usize) -> Vec<Site> {
        let ball = Ball { center: Site::origin(self.dim), radius: Radius::new(self.sphere_radius(k)).unwrap() };
        ball.boundary_sites()
    }

    /// `B(z, h/2) ∩ Σ_k`.
    pub fn tile(&self, k: usize, center: &Site) -> Vec<Site> {
        ball_sites(center, self.height / 2.0).into_iter().filter(|s| self.in_sphere(k, s)).collect()
    }

    /// `B(z, h) ∩ S_k`.
    pub fn cell(&self, k: usize, center: &Site) -> Vec<Site> {
        ball_sites(center, self.height).into_iter().filter(|s| self.in_shell(k, s)).collect()
    }

    pub fn tile_centers(&self, k: usize, family: TileFamily) -> Vec<Site> {
        let sphere = self.sphere_sites(k);
        match family {
            TileFamily::All => sphere,
            TileFamily::Thinned => {
                let sep = Radius::new(self.height / 2.0).unwrap();
                let mut chosen: Vec<Site> = Vec::new();
                for s in sphere {
                    if chosen.iter().all(|c| !sep.admits(c.dist2(&s))) {
                        chosen.push(s);
                    }
                }
                chosen
            }
        }
    }
}
