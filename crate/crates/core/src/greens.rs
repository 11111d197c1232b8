//! Exact potential theory on finite lattice domains.
//!
//! Everything reduces to the symmetric positive definite system
//! `(I - P_D) x = b`, where `P_D` is the simple-random-walk transition
//! matrix restricted to the domain `D`. It is solved matrix-free by
//! conjugate gradients.
//!
//! * Green's function: `G_D(·, z)` solves the system with `b = e_z`.
//! * Harmonic extension of boundary data `φ` on `∂D`: `b(y) = (1/2d) Σ φ(y')`
//!   over the neighbours `y' ∉ D` of `y`.
//! * Potential kernel (d = 2): harmonic extension on a large box with the
//!   origin held at zero, then the additive constant is fixed by
//!   `a(0,0) = 0` and `Δa = δ_0`.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IdlaError, Result};
use crate::lattice::{ball_sites, ceil_square, Ball, Dim, Site};

/// Largest domain solved exactly unless the caller raises it.
pub const DEFAULT_SITE_BUDGET: usize = 200_000;
/// Relative residual `‖b - Ax‖ / ‖b‖` at which CG stops.
pub const SOLVER_TOL: f64 = 1e-10;

const OUTSIDE: u32 = u32::MAX;

/// A finite set of sites with its neighbour table.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: Dim,
    sites: Vec<Site>,
    index: HashMap<Site, u32>,
    neighbors: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl Domain {
    pub fn from_sites(dim: Dim, sites: Vec<Site>, budget: usize) -> Result<Self> {
        if sites.len() > budget {
            return Err(IdlaError::DomainTooLarge { sites: sites.len(), budget });
        }
        let index: HashMap<Site, u32> = sites.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        let deg = dim.degree();
        let mut neighbors = Vec::with_capacity(sites.len() * deg);
        for s in &sites {
            for dir in 0..deg {
                neighbors.push(index.get(&s.neighbor(dir)).copied().unwrap_or(OUTSIDE));
            }
        }
        Ok(Domain { dim, sites, index, neighbors })
    }

    /// `B(0, r)`.
    pub fn ball(dim: Dim, radius: f64, budget: usize) -> Result<Self> {
        let ball = Ball::centered(dim, radius)?;
        let estimate = crate::lattice::ball_volume(dim, radius);
        if estimate > budget {
            return Err(IdlaError::DomainTooLarge { sites: estimate, budget });
        }
        Domain::from_sites(dim, ball.sites(), budget)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).map(|&i| i as usize)
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    /// Outer vertex boundary of the domain, sorted.
    pub fn boundary(&self) -> Vec<Site> {
        crate::lattice::boundary(self.sites.iter())
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let deg = self.dim.degree();
        let w = 1.0 / deg as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in &self.neighbors[i * deg..(i + 1) * deg] {
                if j != OUTSIDE {
                    acc += x[j as usize];
                }
            }
            *o = x[i] - w * acc;
        }
    }

    /// Conjugate gradients on `(I - P_D) x = b`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Solution> {
        let n = self.len();
        assert_eq!(b.len(), n);
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(Solution { values: vec![0.0; n], residual: 0.0, iterations: 0 });
        }
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let max_iter = 20 * n + 1000;
        for it in 1..=max_iter {
            self.apply(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= tol * bnorm {
                // recompute the true residual to guard against drift
                self.apply(&x, &mut ap);
                let true_res = b.iter().zip(&ap).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() / bnorm;
                if true_res <= tol * 10.0 {
                    return Ok(Solution { values: x, residual: true_res, iterations: it });
                }
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        Err(IdlaError::SolverNotConverged { tol, residual: rr.sqrt() / bnorm, iterations: max_iter })
    }

    /// `G_D(·, z)` as a vector over the domain; zero vector if `z ∉ D`.
    pub fn green_column(&self, z: &Site) -> Result<Vec<f64>> {
        let mut b = vec![0.0; self.len()];
        match self.index_of(z) {
            Some(i) => b[i] = 1.0,
            None => return Ok(b),
        }
        Ok(self.solve(&b, SOLVER_TOL)?.values)
    }

    /// Harmonic function on `D` equal to `phi` on `∂D`.
    pub fn harmonic_extension<F: Fn(&Site) -> f64>(&self, phi: F, tol: f64) -> Result<Solution> {
        let deg = self.dim.degree();
        let w = 1.0 / deg as f64;
        let b: Vec<f64> = self
            .sites
            .iter()
            .map(|s| (0..deg).map(|dir| s.neighbor(dir)).filter(|y| !self.contains(y)).map(|y| w * phi(&y)).sum())
            .collect();
        self.solve(&b, tol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `G(·, z)` in `B(0, n)`, kept for repeated lookups.
#[derive(Clone, Debug)]
pub struct GreenTable {
    domain: Domain,
    target: Site,
    column: Vec<f64>,
}

impl GreenTable {
    pub fn new(dim: Dim, n: f64, z: Site) -> Result<Self> {
        let domain = Domain::ball(dim, n, DEFAULT_SITE_BUDGET)?;
        let column = domain.green_column(&z)?;
        Ok(GreenTable { domain, target: z, column })
    }

    pub fn target(&self) -> Site {
        self.target
    }

    /// `G_n(y, z)`; zero when `y` is outside the ball.
    pub fn get(&self, y: &Site) -> f64 {
        self.domain.index_of(y).map(|i| self.column[i]).unwrap_or(0.0)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

/// Expected visits to `z` from `y` before leaving `B(0, n)`.
pub fn green_function(dim: Dim, n: f64, y: &Site, z: &Site) -> Result<f64> {
    let ball = Ball::centered(dim, n)?;
    if !ball.contains(y) || !ball.contains(z) {
        return Ok(0.0);
    }
    Ok(GreenTable::new(dim, n, *z)?.get(y))
}

/// `P_y(H_z < H_{∂B(0,R)}) = G_R(y,z) / G_R(z,z)`.
pub fn hitting_probability(dim: Dim, y: &Site, z: &Site, radius: f64) -> Result<f64> {
    if y == z {
        return Ok(1.0);
    }
    let ball = Ball::centered(dim, radius)?;
    if !ball.contains(y) || !ball.contains(z) {
        return Ok(0.0);
    }
    let t = GreenTable::new(dim, radius, *z)?;
    Ok((t.get(y) / t.get(z)).clamp(0.0, 1.0))
}

/// Targets with `n - 1 <= |z| < n`: the axis site `(⌈n⌉-1, 0, ..)` and the
/// non-negative site closest to the diagonal (smallest `max_abs`, then
/// lexicographic).
pub fn near_boundary_targets(dim: Dim, n: f64) -> Vec<Site> {
    let lo = if n >= 1.0 { ceil_square(n - 1.0) } else { 0 };
    let hi = ceil_square(n);
    let in_shell = |s: &Site| s.norm2() >= lo && s.norm2() < hi;
    let mut out = Vec::new();
    let axis = Site::on_axis(dim, n.ceil() as i32 - 1);
    if in_shell(&axis) {
        out.push(axis);
    }
    let diagonal = ball_sites(&Site::origin(dim), n)
        .into_iter()
        .filter(|s| in_shell(s) && s.coords().iter().all(|&c| c >= 0))
        .min_by(|a, b| a.max_abs().cmp(&b.max_abs()).then_with(|| a.cmp(b)));
    if let Some(z) = diagonal {
        if !out.contains(&z) {
            out.push(z);
        }
    }
    out
}

/// `| |B(0,R)| G_n(0,z) - Σ_{y ∈ B(0,R)} G_n(y,z) |`.
pub fn mean_value_gap(dim: Dim, n: f64, radius: f64, z: &Site) -> Result<f64> {
    let mut failed = Vec::new();
    if radius < n - n.cbrt() {
        failed.push(format!("R = {radius} < n - n^(1/3) = {}", n - n.cbrt()));
    }
    if radius > n {
        failed.push(format!("R = {radius} > n = {n}"));
    }
    if n - z.norm() > 1.0 {
        failed.push(format!("n - |z| = {} > 1", n - z.norm()));
    }
    if !failed.is_empty() {
        return Err(IdlaError::PreconditionViolated(failed.join("; ")));
    }
    let table = GreenTable::new(dim, n, *z)?;
    let inner = ball_sites(&Site::origin(dim), radius);
    let g0 = table.get(&Site::origin(dim));
    let sum: f64 = inner.iter().map(|y| table.get(y)).sum();
    Ok((inner.len() as f64 * g0 - sum).abs())
}

/// Exit distribution `P_y(S(H(Λ)) = ·)`.
pub fn harmonic_measure(y: &Site, absorbing: &HashSet<Site>, budget: usize) -> Result<BTreeMap<Site, f64>> {
    if absorbing.contains(y) {
        return Ok([(*y, 1.0)].into_iter().collect());
    }
    let dim = y.dim();
    // connected component of y in the complement of Λ
    let mut seen: HashSet<Site> = HashSet::new();
    let mut queue = VecDeque::from([*y]);
    seen.insert(*y);
    while let Some(s) = queue.pop_front() {
        for nb in s.neighbors() {
            if !absorbing.contains(&nb) && seen.insert(nb) {
                if seen.len() > budget {
                    return Err(IdlaError::DomainTooLarge { sites: seen.len(), budget });
                }
                queue.push_back(nb);
            }
        }
    }
    let mut sites: Vec<Site> = seen.into_iter().collect();
    sites.sort();
    let domain = Domain::from_sites(dim, sites, budget)?;
    let g = domain.green_column(y)?;
    let w = 1.0 / dim.degree() as f64;
    let mut out: BTreeMap<Site, f64> = BTreeMap::new();
    for (i, s) in domain.sites().iter().enumerate() {
        for nb in s.neighbors() {
            if absorbing.contains(&nb) {
                *out.entry(nb).or_insert(0.0) += w * g[i];
            }
        }
    }
    Ok(out)
}

/// `κ = (2γ + log 8) / π`, the additive constant of the d = 2 kernel.
pub fn kernel_constant() -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    (2.0 * EULER_GAMMA + 8f64.ln()) / std::f64::consts::PI
}

/// `(2/π) log|z| + κ`.
pub fn kernel_asymptotic(z: &Site) -> f64 {
    2.0 / std::f64::consts::PI * z.norm().ln() + kernel_constant()
}

/// Potential kernel `a(0,·)` of the planar walk: exact table on
/// `|z|_∞ <= exact_range`, asymptotic formula beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialKernel {
    /// Half-width of the solve box; the box has side `2·box_half + 1`.
    pub box_half: i32,
    pub exact_range: i32,
    /// Fitted additive constant; compare with [`kernel_constant`].
    pub fitted_constant: f64,
    pub residual: f64,
    table: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    /// `max |a(z) - asym(z)|·|z|²` over the whole range.
    pub k_g: f64,
    pub k_g_low: f64,
    pub k_g_high: f64,
    pub split: f64,
    pub sites: usize,
}

pub const DEFAULT_KERNEL_BOX: i32 = 200;
pub const DEFAULT_KERNEL_RANGE: i32 = 100;
const KERNEL_TOL: f64 = 1e-13;

impl PotentialKernel {
    pub fn compute(box_half: i32, exact_range: i32) -> Result<Self> {
        if exact_range >= box_half || exact_range < 1 {
            return Err(IdlaError::InvalidInput("need 1 <= exact_range < box_half".into()));
        }
        let dim = Dim::new(2)?;
        let origin = Site::origin(dim);
        let sites: Vec<Site> = crate::lattice::box_sites(dim, box_half - 1).filter(|s| *s != origin).collect();
        let domain = Domain::from_sites(dim, sites, usize::MAX)?;
        let log_data = |s: &Site| if *s == origin { 0.0 } else { 2.0 / std::f64::consts::PI * s.norm().ln() };
        let one_data = |s: &Site| if *s == origin { 0.0 } else { 1.0 };
        let u = domain.harmonic_extension(log_data, KERNEL_TOL)?;
        let v = domain.harmonic_extension(one_data, KERNEL_TOL)?;
        let ring: Vec<usize> = origin.neighbors().map(|e| domain.index_of(&e).expect("neighbour in box")).collect();
        let su: f64 = ring.iter().map(|&i| u.values[i]).sum();
        let sv: f64 = ring.iter().map(|&i| v.values[i]).sum();
        // (1/4) Σ_e a(e) = 1 with a = u + C v
        let c = (4.0 - su) / sv;
        let side = (2 * exact_range + 1) as usize;
        let mut table = vec![0.0; side * side];
        for x in -exact_range..=exact_range {
            for y in -exact_range..=exact_range {
                let s = Site::new(&[x, y])?;
                let val = match domain.index_of(&s) {
                    Some(i) => u.values[i] + c * v.values[i],
                    None => 0.0,
                };
                table[Self::slot(exact_range, x, y)] = val;
            }
        }
        Ok(PotentialKernel { box_half, exact_range, fitted_constant: c, residual: u.residual.max(v.residual), table })
    }

    fn slot(range: i32, x: i32, y: i32) -> usize {
        let side = (2 * range + 1) as usize;
        (x + range) as usize * side + (y + range) as usize
    }

    pub fn is_exact(&self, z: &Site) -> bool {
        z.max_abs() <= self.exact_range
    }

    /// Exact value if tabulated.
    pub fn exact(&self, z: &Site) -> Option<f64> {
        self.is_exact(z).then(|| self.table[Self::slot(self.exact_range, z.coord(0), z.coord(1))])
    }

    pub fn value(&self, z: &Site) -> Result<f64> {
        if z.dim().get() != 2 {
            return Err(IdlaError::WrongDimension { required: 2, got: z.dim().get() });
        }
        Ok(self.exact(z).unwrap_or_else(|| kernel_asymptotic(z)))
    }

    /// Fits `K_g` on `rmin <= |z| <= rmax`, also separately on each half.
    pub fn fit_error(&self, rmin: f64, rmax: f64) -> KernelFit {
        let split = 0.5 * (rmin + rmax);
        let (mut all, mut lo, mut hi, mut count) = (0.0f64, 0.0f64, 0.0f64, 0usize);
        let r = self.exact_range.min(rmax.ceil() as i32);
        for x in -r..=r {
            for y in -r..=r {
                let s = Site::new(&[x, y]).expect("d = 2");
                let norm = s.norm();
                if norm < rmin || norm > rmax {
                    continue;
                }
                let k = (self.exact(&s).expect("in range") - kernel_asymptotic(&s)).abs() * norm * norm;
                all = all.max(k);
                if norm < split {
                    lo = lo.max(k);
                } else {
                    hi = hi.max(k);
                }
                count += 1;
            }
        }
        KernelFit { k_g: all, k_g_low: lo, k_g_high: hi, split, sites: count }
    }

    pub fn cache_file_name(box_half: i32, exact_range: i32) -> String {
        format!("potential_kernel_d2_box{}_exact{}.txt", 2 * box_half + 1, exact_range)
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "# idla potential kernel table v1")?;
        writeln!(
            f,
            "# d=2 box={} exact_range={} residual={:e} constant={:.17e}",
            2 * self.box_half + 1,
            self.exact_range,
            self.residual,
            self.fitted_constant
        )?;
        writeln!(f, "# x y a")?;
        for x in -self.exact_range..=self.exact_range {
            for y in -self.exact_range..=self.exact_range {
                writeln!(f, "{x} {y} {:.17e}", self.table[Self::slot(self.exact_range, x, y)])?;
            }
        }
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |m: &str| IdlaError::InvalidInput(format!("{}: {m}", path.display()));
        let header = text.lines().nth(1).ok_or_else(|| bad("missing header"))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for kv in header.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("header lacks {k}")));
        let side: i32 = get("box")?.parse().map_err(|_| bad("box"))?;
        let exact_range: i32 = get("exact_range")?.parse().map_err(|_| bad("exact_range"))?;
        let residual: f64 = get("residual")?.parse().map_err(|_| bad("residual"))?;
        let fitted_constant: f64 = get("constant")?.parse().map_err(|_| bad("constant"))?;
        let n = (2 * exact_range + 1) as usize;
        let mut table = vec![f64::NAN; n * n];
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let mut it = line.split_whitespace();
            let mut next = || it.next().ok_or_else(|| bad("short row"));
            let x: i32 = next()?.parse().map_err(|_| bad("x"))?;
            let y: i32 = next()?.parse().map_err(|_| bad("y"))?;
            let a: f64 = next()?.parse().map_err(|_| bad("a"))?;
            if x.abs() > exact_range || y.abs() > exact_range {
                return Err(bad("row outside range"));
            }
            table[Self::slot(exact_range, x, y)] = a;
        }
        if table.iter().any(|v| v.is_nan()) {
            return Err(bad("incomplete table"));
        }
        Ok(PotentialKernel { box_half: (side - 1) / 2, exact_range, fitted_constant, residual, table })
    }

    /// Reads the cached table from `dir`, computing and writing it if absent.
    pub fn load_or_compute(dir: &Path, box_half: i32, exact_range: i32) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_file_name(box_half, exact_range));
        if path.exists() {
            if let Ok(k) = Self::read_cache(&path) {
                return Ok(k);
            }
        }
        let k = Self::compute(box_half, exact_range)?;
        fs::create_dir_all(dir)?;
        k.write_cache(&path)?;
        Ok(k)
    }
}

/// `a(0, z)` from a kernel table (d = 2 only).
pub fn potential_kernel(kernel: &PotentialKernel, z: &Site) -> Result<f64> {
    kernel.value(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn d(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    #[test]
    fn unit_ball_green_is_one() {
        let o = Site::origin(d(2));
        assert_eq!(green_function(d(2), 1.0, &o, &o).unwrap(), 1.0);
        let out = Site::on_axis(d(2), 5);
        assert_eq!(green_function(d(2), 3.0, &out, &o).unwrap(), 0.0);
    }

    #[test]
    fn nine_site_ball_against_elimination() {
        // B(0,2) in d=2: origin, 4 axis sites at distance 1, 4 diagonal sites.
        // By symmetry g0 = 1 + g1, g1 = (g0 + 2 g2)/4, g2 = 2 g1 / 4.
        // So g1 = g0/4 + g1/4, g1 = g0/3, g0 = 1 + g0/3, g0 = 3/2.
        let o = Site::origin(d(2));
        let g = green_function(d(2), 2.0, &o, &o).unwrap();
        assert!((g - 1.5).abs() < 1e-9, "{g}");
    }

    #[test]
    fn green_is_symmetric() {
        let t1 = GreenTable::new(d(3), 5.0, Site::new(&[1, 2, 0]).unwrap()).unwrap();
        let t2 = GreenTable::new(d(3), 5.0, Site::new(&[-2, 0, 1]).unwrap()).unwrap();
        let a = t1.get(&Site::new(&[-2, 0, 1]).unwrap());
        let b = t2.get(&Site::new(&[1, 2, 0]).unwrap());
        assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        assert!(a > 0.0);
    }

    #[test]
    fn hitting_probability_edges() {
        let o = Site::origin(d(2));
        let z = Site::new(&[2, 1]).unwrap();
        assert_eq!(hitting_probability(d(2), &z, &z, 5.0).unwrap(), 1.0);
        let b = Site::on_axis(d(2), 5);
        assert_eq!(hitting_probability(d(2), &b, &o, 5.0).unwrap(), 0.0);
        let p = hitting_probability(d(2), &z, &o, 5.0).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn degenerate_gap_is_zero() {
        let o = Site::origin(d(2));
        assert_eq!(mean_value_gap(d(2), 1.0, 1.0, &o).unwrap(), 0.0);
    }

    #[test]
    fn gap_preconditions_are_named() {
        let z = Site::on_axis(d(2), 9);
        let e = mean_value_gap(d(2), 10.0, 5.0, &z).unwrap_err();
        assert!(matches!(e, IdlaError::PreconditionViolated(ref m) if m.contains("n^(1/3)")));
        let e = mean_value_gap(d(2), 10.0, 10.0, &Site::on_axis(d(2), 3)).unwrap_err();
        assert!(matches!(e, IdlaError::PreconditionViolated(ref m) if m.contains("|z|")));
    }

    #[test]
    fn harmonic_measure_sums_to_one_and_is_symmetric() {
        let dim = d(2);
        let ball = Ball::centered(dim, 6.0).unwrap();
        let lambda: HashSet<Site> = ball.boundary_sites().into_iter().collect();
        let o = Site::origin(dim);
        let hm = harmonic_measure(&o, &lambda, 10_000).unwrap();
        let total: f64 = hm.values().sum();
        assert!((total - 1.0).abs() < 1e-8);
        let a = hm[&Site::new(&[6, 0]).unwrap()];
        let b = hm[&Site::new(&[0, -6]).unwrap()];
        assert!((a - b).abs() < 1e-9);
        let inside = Site::on_axis(dim, 6);
        assert_eq!(harmonic_measure(&inside, &lambda, 10).unwrap()[&inside], 1.0);
    }

    #[test]
    fn harmonic_measure_of_unbounded_component_is_refused() {
        let dim = d(3);
        let lambda: HashSet<Site> = [Site::on_axis(dim, 3)].into_iter().collect();
        assert!(matches!(harmonic_measure(&Site::origin(dim), &lambda, 5_000), Err(IdlaError::DomainTooLarge { .. })));
    }

    #[test]
    fn kernel_matches_closed_form_values() {
        // Known exact values: a(1,0)=1, a(1,1)=4/π, a(2,0)=4-8/π.
        let k = PotentialKernel::compute(120, 30).unwrap();
        let v = |x, y| k.value(&Site::new(&[x, y]).unwrap()).unwrap();
        assert_eq!(v(0, 0), 0.0);
        assert!((v(1, 0) - 1.0).abs() < 1e-4, "{}", v(1, 0));
        assert!((v(1, 1) - 4.0 / PI).abs() < 1e-4, "{}", v(1, 1));
        assert!((v(2, 0) - (4.0 - 8.0 / PI)).abs() < 1e-4, "{}", v(2, 0));
        assert!((k.fitted_constant - kernel_constant()).abs() < 1e-3);
        assert!(matches!(k.value(&Site::origin(d(3))), Err(IdlaError::WrongDimension { required: 2, got: 3 })));
    }

    #[test]
    fn kernel_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let k = PotentialKernel::load_or_compute(dir.path(), 20, 5).unwrap();
        let path = dir.path().join(PotentialKernel::cache_file_name(20, 5));
        assert!(path.exists());
        let back = PotentialKernel::read_cache(&path).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn near_boundary_targets_sit_in_the_last_unit_shell() {
        for dim in [2, 3] {
            for n in [5.0, 7.5, 12.0] {
                let zs = near_boundary_targets(Dim::new(dim).unwrap(), n);
                assert_eq!(zs.len(), 2);
                for z in zs {
                    assert!(z.norm() < n && n - z.norm() <= 1.0);
                }
            }
        }
    }
}
