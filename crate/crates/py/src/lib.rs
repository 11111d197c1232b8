//! Python module `idla`. Sites cross the boundary as tuples of ints; long
//! simulations release the interpreter lock.

use idla_core::aggregation::{error_radii, grow as core_grow, grow_stopped, Cluster as CoreCluster, Configuration, RunMeta};
use idla_core::experiments::{self, CoveringPlacement, OriginPlacement};
use idla_core::flashing::flashing_grow;
use idla_core::greens;
use idla_core::lattice::{inner_height, Dim, Site};
use idla_core::tails::{self, Tail, TailBoundInput};
use idla_core::walk::RandomSource;
use idla_core::waves::grow_by_waves as core_waves;
use idla_core::IdlaError as CoreError;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(idla, IdlaError, PyException, "Simulation precondition, budget or solver failure.");

fn err(e: CoreError) -> PyErr {
    match e {
        CoreError::InvalidDimension(_)
        | CoreError::DimensionMismatch { .. }
        | CoreError::InvalidInput(_)
        | CoreError::WrongDimension { .. }
        | CoreError::LambdaOutOfRange { .. }
        | CoreError::ConfigOutsideDomain { .. } => PyValueError::new_err(e.to_string()),
        other => IdlaError::new_err(other.to_string()),
    }
}

fn dim(d: usize) -> PyResult<Dim> {
    Dim::new(d).map_err(err)
}

fn site(coords: Vec<i32>) -> PyResult<Site> {
    Site::new(&coords).map_err(err)
}

/// `(k, radius, settled, paused)` for one wave.
type WaveRow = (usize, f64, usize, u64);

/// `(n, mean δ_I, mean δ_O, inner ratio, outer ratio)` for one scan point.
type ScanPoint = (f64, f64, f64, f64, f64);

fn tuple(s: &Site) -> Vec<i32> {
    s.coords().to_vec()
}

/// A grown cluster.
#[pyclass(module = "idla", frozen)]
struct Cluster {
    inner: CoreCluster,
    meta: RunMeta,
}

#[pymethods]
impl Cluster {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim().get()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, coords: Vec<i32>) -> PyResult<bool> {
        Ok(self.inner.contains(&site(coords)?))
    }

    fn __repr__(&self) -> String {
        format!("Cluster(dim={}, sites={}, stopped={})", self.dim(), self.inner.len(), self.inner.total_stopped())
    }

    /// Occupied sites in lexicographic order.
    fn sites(&self) -> Vec<Vec<i32>> {
        let mut v: Vec<Site> = self.inner.sites();
        v.sort();
        v.iter().map(tuple).collect()
    }

    /// `(explorer, site, settling time)` in settling order.
    fn settle_order(&self) -> Vec<(usize, Vec<i32>, u64)> {
        self.inner.settle_order().iter().map(|s| (s.explorer, tuple(&s.site), s.time)).collect()
    }

    fn stopped_on_boundary(&self) -> Vec<(Vec<i32>, u64)> {
        self.inner.stopped_on_boundary().iter().map(|(s, k)| (tuple(s), *k)).collect()
    }

    /// `(inner error, outer error)` relative to `B(0, n)`.
    fn error_radii(&self, n: f64) -> (f64, f64) {
        let e = error_radii(&self.inner, n);
        (e.inner, e.outer)
    }

    /// Versioned JSON dump, readable by `idla subdivide --cluster`.
    fn to_json(&self) -> PyResult<String> {
        let dump = self.inner.to_dump(self.meta.clone());
        serde_json::to_string(&dump).map_err(|e| IdlaError::new_err(e.to_string()))
    }
}

/// Grow `|B(0,n)|` (or `count`) explorers from the origin, optionally frozen
/// on the boundary of `B(0, stop_radius)`.
#[pyfunction]
#[pyo3(signature = (dim, n=None, count=None, seed=0, stream=0, stop_radius=None))]
fn grow(
    py: Python<'_>,
    dim: usize,
    n: Option<f64>,
    count: Option<u64>,
    seed: u64,
    stream: u64,
    stop_radius: Option<f64>,
) -> PyResult<Cluster> {
    let d = self::dim(dim)?;
    let eta = match (n, count) {
        (Some(n), None) => Configuration::ball_mass(d, n),
        (None, Some(c)) => Configuration::point(Site::origin(d), c),
        _ => return Err(PyValueError::new_err("give exactly one of n and count")),
    };
    let src = RandomSource::new(seed, stream);
    let inner = py
        .detach(|| match stop_radius {
            Some(r) => grow_stopped(&eta, r, src),
            None => core_grow(&eta, src),
        })
        .map_err(err)?;
    let mut meta = RunMeta::new(d, eta.total(), src);
    meta.n = n;
    meta.stop_radius = stop_radius;
    Ok(Cluster { inner, meta })
}

/// Grow wave by wave; returns the cluster and `(k, radius, settled, paused)` per wave.
#[pyfunction]
#[pyo3(signature = (dim, n, seed=0, stream=0))]
fn grow_by_waves(py: Python<'_>, dim: usize, n: f64, seed: u64, stream: u64) -> PyResult<(Cluster, Vec<WaveRow>)> {
    let d = self::dim(dim)?;
    let src = RandomSource::new(seed, stream);
    let run = py.detach(|| core_waves(d, n, src)).map_err(err)?;
    let waves = run.waves.iter().map(|w| (w.k, w.radius, w.settled, w.total_paused())).collect();
    let mut meta = RunMeta::new(d, run.cluster.len() as u64, src);
    meta.n = Some(n);
    Ok((Cluster { inner: run.cluster, meta }, waves))
}

/// Coupled flashing run; returns a dict of per-run diagnostics.
#[pyfunction]
#[pyo3(signature = (dim, n, height=None, seed=0, stream=0))]
fn flashing_run<'py>(py: Python<'py>, dim: usize, n: f64, height: Option<f64>, seed: u64, stream: u64) -> PyResult<Bound<'py, PyDict>> {
    let d = self::dim(dim)?;
    let h = height.unwrap_or_else(|| inner_height(d, n));
    let run = py.detach(|| flashing_grow(d, n, h, RandomSource::new(seed, stream))).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("height", h)?;
    out.set_item("explorers", run.t_plain.len())?;
    out.set_item("order_violations", run.order_violations().len())?;
    out.set_item("min_delay", run.min_delay())?;
    out.set_item("evictions", run.evictions)?;
    out.set_item("plain_sites", run.plain.len())?;
    out.set_item("flashing_sites", run.flashing.len())?;
    Ok(out)
}

#[pyfunction]
fn green_function(dim: usize, n: f64, y: Vec<i32>, z: Vec<i32>) -> PyResult<f64> {
    greens::green_function(self::dim(dim)?, n, &site(y)?, &site(z)?).map_err(err)
}

/// Probability that a walk from `y` visits `z` before leaving `B(0, radius)`.
#[pyfunction]
fn hitting_probability(dim: usize, y: Vec<i32>, z: Vec<i32>, radius: f64) -> PyResult<f64> {
    greens::hitting_probability(self::dim(dim)?, &site(y)?, &site(z)?, radius).map_err(err)
}

#[pyfunction]
fn mean_value_gap(dim: usize, n: f64, radius: f64, z: Vec<i32>) -> PyResult<f64> {
    greens::mean_value_gap(self::dim(dim)?, n, radius, &site(z)?).map_err(err)
}

/// Exact potential kernel of the planar walk on a finite box.
#[pyclass(module = "idla", frozen)]
struct PotentialKernel {
    inner: greens::PotentialKernel,
}

#[pymethods]
impl PotentialKernel {
    #[new]
    #[pyo3(signature = (box_half=greens::DEFAULT_KERNEL_BOX, exact_range=greens::DEFAULT_KERNEL_RANGE))]
    fn new(py: Python<'_>, box_half: i32, exact_range: i32) -> PyResult<Self> {
        let inner = py.detach(|| greens::PotentialKernel::compute(box_half, exact_range)).map_err(err)?;
        Ok(PotentialKernel { inner })
    }

    #[getter]
    fn fitted_constant(&self) -> f64 {
        self.inner.fitted_constant
    }

    fn __call__(&self, z: Vec<i32>) -> PyResult<f64> {
        greens::potential_kernel(&self.inner, &site(z)?).map_err(err)
    }

    /// `(K_g, K_g on the low half, K_g on the high half)` over `rmin <= |z| <= rmax`.
    fn fit_error(&self, rmin: f64, rmax: f64) -> (f64, f64, f64) {
        let f = self.inner.fit_error(rmin, rmax);
        (f.k_g, f.k_g_low, f.k_g_high)
    }
}

fn bound(tail: Tail, mu: f64, xi: f64, c: f64, kappa: f64, s2: f64, lambda: Option<f64>) -> PyResult<(f64, f64, f64)> {
    let input = TailBoundInput { mu, xi, c, kappa, s2 };
    let b = match (tail, lambda) {
        (_, None) => tails::optimize_lambda(&input, tail),
        (Tail::Lower, Some(l)) => tails::lower_tail_bound(&input, l),
        (Tail::Upper, Some(l)) => tails::upper_tail_bound(&input, l),
    }
    .map_err(err)?;
    Ok((b.lambda, b.bound, b.log_bound))
}

/// `(lambda, bound, log bound)`; optimizes over `lambda` when it is omitted.
#[pyfunction]
#[pyo3(signature = (mu, xi, c=0.0, kappa=2.0, s2=0.0, lambda_=None))]
fn lower_tail_bound(mu: f64, xi: f64, c: f64, kappa: f64, s2: f64, lambda_: Option<f64>) -> PyResult<(f64, f64, f64)> {
    bound(Tail::Lower, mu, xi, c, kappa, s2, lambda_)
}

#[pyfunction]
#[pyo3(signature = (mu, xi, s2=0.0, lambda_=None))]
fn upper_tail_bound(mu: f64, xi: f64, s2: f64, lambda_: Option<f64>) -> PyResult<(f64, f64, f64)> {
    bound(Tail::Upper, mu, xi, 0.0, 2.0, s2, lambda_)
}

/// Per-n means of the error radii: `[(n, mean inner, mean outer, inner ratio, outer ratio)]`.
#[pyfunction]
#[pyo3(signature = (dim, n_list, trials, seed=0, stream=0))]
fn scan_fluctuations(py: Python<'_>, dim: usize, n_list: Vec<f64>, trials: u64, seed: u64, stream: u64) -> PyResult<Vec<ScanPoint>> {
    let d = self::dim(dim)?;
    let scan = py.detach(|| experiments::scan_fluctuations(d, &n_list, trials, RandomSource::new(seed, stream))).map_err(err)?;
    Ok(scan.stats.iter().map(|s| (s.n, s.inner.mean, s.outer.mean, s.inner_ratio, s.outer_ratio)).collect())
}

/// `(successes, trials)` for non-covering of `B(0,R)`.
#[pyfunction]
#[pyo3(signature = (dim, radius, a, trials, seed=0, alpha=experiments::DEFAULT_COVERING_ALPHA))]
fn probe_covering(py: Python<'_>, dim: usize, radius: f64, a: f64, trials: u64, seed: u64, alpha: f64) -> PyResult<(u64, u64)> {
    let d = self::dim(dim)?;
    let r = py
        .detach(|| {
            experiments::probe_covering(d, radius, a, trials, alpha, CoveringPlacement::UniformHalfBall, RandomSource::from_seed(seed))
        })
        .map_err(err)?;
    Ok((r.successes, r.trials))
}

/// `(successes, trials)` for the origin joining the cluster; `stacked` puts
/// every explorer on `(R, 0, ..)`, otherwise they spread over `∂B(0,R)`.
#[pyfunction]
#[pyo3(signature = (dim, radius, beta, trials, seed=0, stacked=true))]
fn probe_origin_hit(py: Python<'_>, dim: usize, radius: f64, beta: f64, trials: u64, seed: u64, stacked: bool) -> PyResult<(u64, u64)> {
    let d = self::dim(dim)?;
    let placement = if stacked { OriginPlacement::Stacked } else { OriginPlacement::UniformBoundary };
    let r = py.detach(|| experiments::probe_origin_hit(d, radius, beta, trials, placement, RandomSource::from_seed(seed))).map_err(err)?;
    Ok((r.successes, r.trials))
}

/// `(flashing crossings, plain crossings, containment violations, trials)`.
#[pyfunction]
#[pyo3(signature = (dim, radius, density, trials, seed=0, height=idla_core::flashing::DEFAULT_TRAP_HEIGHT))]
fn probe_traps(
    py: Python<'_>,
    dim: usize,
    radius: f64,
    density: f64,
    trials: u64,
    seed: u64,
    height: f64,
) -> PyResult<(u64, u64, u64, u64)> {
    let d = self::dim(dim)?;
    let r = py.detach(|| experiments::probe_traps(d, radius, density, trials, height, RandomSource::from_seed(seed))).map_err(err)?;
    Ok((r.flash_crossed, r.plain_crossed, r.containment_violations, r.trials))
}

/// Shell subdivision of `B(z, R)`; `counts(k, heights)` returns `N_k`.
/// Returns `(heights, counts, L)`.
#[pyfunction]
#[pyo3(signature = (radius, gamma, total, counts, dim=2))]
fn subdivide(radius: f64, gamma: f64, total: u64, counts: Bound<'_, PyAny>, dim: usize) -> PyResult<(Vec<f64>, Vec<u64>, usize)> {
    let d = self::dim(dim)?;
    let mut failure = None;
    let result =
        experiments::subdivide(d, radius, gamma, total, |k, h| match counts.call1((k, h.to_vec())).and_then(|v| v.extract::<u64>()) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                // outside the admissible range, so the recursion stops here
                u64::MAX
            }
        });
    if let Some(e) = failure {
        return Err(e);
    }
    let s = result.map_err(err)?;
    Ok((s.heights, s.counts, s.l))
}

#[pymodule]
fn idla(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IdlaError", m.py().get_type::<IdlaError>())?;
    m.add_class::<Cluster>()?;
    m.add_class::<PotentialKernel>()?;
    m.add_function(wrap_pyfunction!(grow, m)?)?;
    m.add_function(wrap_pyfunction!(grow_by_waves, m)?)?;
    m.add_function(wrap_pyfunction!(flashing_run, m)?)?;
    m.add_function(wrap_pyfunction!(green_function, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_probability, m)?)?;
    m.add_function(wrap_pyfunction!(mean_value_gap, m)?)?;
    m.add_function(wrap_pyfunction!(lower_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(upper_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(scan_fluctuations, m)?)?;
    m.add_function(wrap_pyfunction!(probe_covering, m)?)?;
    m.add_function(wrap_pyfunction!(probe_origin_hit, m)?)?;
    m.add_function(wrap_pyfunction!(probe_traps, m)?)?;
    m.add_function(wrap_pyfunction!(subdivide, m)?)?;
    m.add("GENERATOR", idla_core::walk::GENERATOR_ID)?;
    Ok(())
}
