use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use idla_core::aggregation::{error_radii, grow, grow_stopped, ClusterDump, Configuration, RunMeta};
use idla_core::experiments::{
    fit_decay, origin_decay_variable, probe_covering, probe_origin_hit, probe_traps, scan_fluctuations, subdivide, subdivide_cluster,
    CoveringPlacement, DecayFit, OriginPlacement, ScanStats, Subdivision,
};
use idla_core::flashing::{flashing_grow_with, FlashingConfig};
use idla_core::greens::{
    green_function, hitting_probability, kernel_asymptotic, kernel_constant, mean_value_gap, near_boundary_targets, KernelFit,
    PotentialKernel,
};
use idla_core::lattice::{inner_height, Dim, Site, TileFamily};
use idla_core::tails::{default_grid, lower_tail_bound, optimize_lambda, upper_tail_bound, validate_bound, Bound, Tail, TailBoundInput};
use idla_core::walk::RandomSource;
use idla_core::waves::{grow_by_waves, wave_tile_stats, MuOptions};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::output::{cell, coord_columns, opt_cell, Run, Table};
use crate::{report, CliError};

pub fn dispatch(cli: Cli, argv: Vec<String>, config: BTreeMap<String, String>) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    let out_dir = cli.out_dir;
    let make = |name: &str| Run::new(out_dir.clone(), name, argv.clone(), config.clone(), threads);
    pool.install(|| match cli.command {
        Command::Grow(a) => cmd_grow(a, make("grow")),
        Command::Scan(a) => cmd_scan(a, make("scan")),
        Command::Probe { kind } => match kind {
            ProbeKind::Covering(a) => cmd_covering(a, make("probe_covering")),
            ProbeKind::Origin(a) => cmd_origin(a, make("probe_origin")),
            ProbeKind::Traps(a) => cmd_traps(a, make("probe_traps")),
        },
        Command::Greens { kind } => match kind {
            GreensKind::Value(a) => cmd_green_value(a, make("greens_value")),
            GreensKind::MeanValue(a) => cmd_mean_value(a, make("greens_mean_value")),
            GreensKind::Kernel(a) => cmd_kernel(a, make("greens_kernel")),
        },
        Command::Tails { kind } => match kind {
            TailsKind::Lower(a) => cmd_bound(a, Tail::Lower, make("tails_lower")),
            TailsKind::Upper(a) => cmd_bound(a, Tail::Upper, make("tails_upper")),
            TailsKind::Grid(a) => cmd_tail_grid(a, make("tails_grid")),
        },
        Command::Waves(a) => cmd_waves(a, make("waves")),
        Command::Flash(a) => cmd_flash(a, make("flash")),
        Command::Subdivide(a) => cmd_subdivide(a, make("subdivide")),
        Command::Report(a) => {
            let dir = a.in_dir.clone().unwrap_or_else(|| out_dir.clone());
            report::run(&dir, make("report"))
        }
    })
}

fn dim(d: usize) -> Result<Dim, CliError> {
    Ok(Dim::new(d)?)
}

fn site(dim: Dim, coords: &[i32], flag: &str) -> Result<Site, CliError> {
    if coords.len() != dim.get() {
        return Err(CliError::Usage(format!("--{flag} needs {} coordinates, got {}", dim.get(), coords.len())));
    }
    Ok(Site::new(coords)?)
}

fn source(run: &mut Run, s: &Seeded) -> RandomSource {
    run.seed = Some((s.seed, s.stream));
    RandomSource::new(s.seed, s.stream)
}

fn coords(s: &Site) -> Vec<String> {
    s.coords().iter().map(cell).collect()
}

fn cmd_grow(a: GrowArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let (eta, n) = match (a.n, a.count) {
        (Some(n), None) => (Configuration::ball_mass(dim, n), Some(n)),
        (None, Some(c)) => (Configuration::point(Site::origin(dim), c), None),
        _ => return Err(CliError::Usage("give exactly one of --n and --count".into())),
    };
    let src = source(&mut run, &a.seeded);
    let cluster = match a.stop_radius {
        Some(r) => grow_stopped(&eta, r, src)?,
        None => grow(&eta, src)?,
    };
    let mut meta = RunMeta::new(dim, eta.total(), src);
    meta.n = n;
    meta.stop_radius = a.stop_radius;
    let dump = cluster.to_dump(meta);
    let ext = if a.format == Format::Json { "json" } else { "csv" };
    let path = a.out.unwrap_or_else(|| run.dir.join(format!("cluster.{ext}")));
    match a.format {
        Format::Json => run.write_compact_json_at(&path, &dump)?,
        Format::Csv => {
            let mut cols = vec!["kind".to_string(), "explorer".into()];
            cols.extend(coord_columns("x", dim.get()));
            cols.push("value".into());
            let mut t = Table::new("idla.cluster.csv/1", cols);
            for (explorer, s, time) in &dump.settle_order {
                let mut row = vec!["settled".into(), cell(explorer)];
                row.extend(coords(s));
                row.push(cell(time));
                t.push(row);
            }
            for (s, k) in &dump.stopped_on_boundary {
                let mut row = vec!["stopped".into(), String::new()];
                row.extend(coords(s));
                row.push(cell(k));
                t.push(row);
            }
            run.write_table_at(&path, &t)?;
        }
    }
    print!("{} explorers, {} settled, {} stopped", eta.total(), cluster.len(), cluster.total_stopped());
    if let Some(n) = n {
        let e = error_radii(&cluster, n);
        print!(", inner error {:.4}, outer error {:.4}", e.inner, e.outer);
    }
    println!(" -> {}", path.display());
    run.finish()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSummary {
    pub dim: Dim,
    pub trials: u64,
    pub seed: u64,
    pub stream: u64,
    pub stats: Vec<ScanStats>,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

fn cmd_scan(a: ScanArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let scan = scan_fluctuations(dim, &a.n_list, a.trials, src)?;
    let mut t = Table::new("idla.scan/1", ["n", "trial", "delta_inner", "delta_outer"]);
    for r in &scan.rows {
        t.push(vec![cell(r.n), cell(r.trial), cell(r.inner), cell(r.outer)]);
    }
    run.write_table("scan.csv", &t)?;
    let summary = ScanSummary {
        dim,
        trials: a.trials,
        seed: src.base_seed,
        stream: src.stream_id,
        stats: scan.stats.clone(),
        alpha_hat: scan.alpha_hat,
        beta_hat: scan.beta_hat,
    };
    run.write_json("scan_summary.json", "idla.scan.summary/1", &summary)?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "n", "mean dI", "mean dO", "dI/norm", "dO/norm");
    for s in &scan.stats {
        let flag = if s.degenerate { " (absolute)" } else { "" };
        println!("{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}{flag}", s.n, s.inner.mean, s.outer.mean, s.inner_ratio, s.outer_ratio);
    }
    println!("alpha_hat = {:.4}, beta_hat = {:.4}", scan.alpha_hat, scan.beta_hat);
    run.finish()?;
    Ok(())
}

/// JSON companion of every probe table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub probe: String,
    pub decay_variable: String,
    pub x: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub results: serde_json::Value,
}

const PROBE_COLUMNS: [&str; 13] = [
    "probe",
    "dim",
    "radius",
    "parameter",
    "value",
    "explorers",
    "placement",
    "trials",
    "seed",
    "stream",
    "successes",
    "frequency",
    "wilson_halfwidth",
];

fn probe_table(results: &[idla_core::experiments::ProbeResult]) -> Table {
    let mut t = Table::new("idla.probe/1", PROBE_COLUMNS);
    for r in results {
        t.push(vec![
            r.probe.clone(),
            cell(r.dim.get()),
            cell(r.radius),
            r.parameter.clone(),
            cell(r.value),
            cell(r.explorers),
            r.placement.clone(),
            cell(r.trials),
            cell(r.base_seed),
            cell(r.stream),
            cell(r.successes),
            cell(r.frequency),
            cell(r.wilson_halfwidth),
        ]);
    }
    t
}

fn print_probe(results: &[idla_core::experiments::ProbeResult], fit: &Option<DecayFit>) {
    for r in results {
        println!(
            "R = {} {} = {}: {}/{} (frequency {:.4} ± {:.4})",
            r.radius, r.parameter, r.value, r.successes, r.trials, r.frequency, r.wilson_halfwidth
        );
    }
    print_fit(fit);
}

fn print_fit(fit: &Option<DecayFit>) {
    if let Some(f) = fit {
        println!(
            "log-frequency slope {:.5} (intercept {:.4}, r2 {:.3}, {} zero cells)",
            f.fit.slope, f.fit.intercept, f.fit.r2, f.zero_cells
        );
    }
}

fn finish_probe(
    mut run: Run,
    name: &str,
    table: Table,
    variable: &str,
    x: Vec<f64>,
    fit: Option<DecayFit>,
    results: serde_json::Value,
) -> Result<(), CliError> {
    run.write_table(&format!("{name}.csv"), &table)?;
    let summary = ProbeSummary { probe: name.trim_start_matches("probe_").into(), decay_variable: variable.into(), x, fit, results };
    run.write_json(&format!("{name}.json"), "idla.probe.summary/1", &summary)?;
    run.finish()?;
    Ok(())
}

fn cmd_covering(a: CoveringArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let placement = match a.placement {
        CoveringPlacementArg::UniformHalfBall => CoveringPlacement::UniformHalfBall,
        CoveringPlacementArg::Origin => CoveringPlacement::Origin,
    };
    let results =
        a.a.iter()
            .enumerate()
            .map(|(i, &v)| probe_covering(dim, a.radius, v, a.trials, a.alpha, placement, src.child(i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
    let k: Vec<u64> = results.iter().map(|r| r.successes).collect();
    let n: Vec<u64> = results.iter().map(|r| r.trials).collect();
    let fit = fit_decay(&a.a, &k, &n);
    print_probe(&results, &fit);
    let json = serde_json::to_value(&results)?;
    finish_probe(run, "probe_covering", probe_table(&results), "A", a.a, fit, json)
}

fn cmd_origin(a: OriginArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let placement = match a.placement {
        OriginPlacementArg::Stacked => OriginPlacement::Stacked,
        OriginPlacementArg::UniformBoundary => OriginPlacement::UniformBoundary,
    };
    let results = a
        .radius
        .iter()
        .enumerate()
        .map(|(i, &r)| probe_origin_hit(dim, r, a.beta, a.trials, placement, src.child(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let x: Vec<f64> = a.radius.iter().map(|&r| origin_decay_variable(dim, r)).collect();
    let k: Vec<u64> = results.iter().map(|r| r.successes).collect();
    let n: Vec<u64> = results.iter().map(|r| r.trials).collect();
    let fit = fit_decay(&x, &k, &n);
    print_probe(&results, &fit);
    let variable = if dim.get() == 2 { "R^2/log R" } else { "R^2" };
    let json = serde_json::to_value(&results)?;
    finish_probe(run, "probe_origin", probe_table(&results), variable, x, fit, json)
}

fn cmd_traps(a: TrapArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let results = a
        .density
        .iter()
        .enumerate()
        .map(|(i, &rho)| probe_traps(dim, a.radius, rho, a.trials, a.height, src.child(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "idla.probe.traps/1",
        [
            "dim",
            "radius",
            "density",
            "height",
            "trials",
            "seed",
            "stream",
            "mean_trap_free",
            "flash_crossed",
            "flash_frequency",
            "flash_halfwidth",
            "plain_crossed",
            "plain_frequency",
            "plain_halfwidth",
            "containment_violations",
        ],
    );
    for r in &results {
        t.push(vec![
            cell(r.dim.get()),
            cell(r.radius),
            cell(r.density),
            cell(r.height),
            cell(r.trials),
            cell(r.base_seed),
            cell(r.stream),
            cell(r.mean_trap_free),
            cell(r.flash_crossed),
            cell(r.flash_frequency),
            cell(r.flash_halfwidth),
            cell(r.plain_crossed),
            cell(r.plain_frequency),
            cell(r.plain_halfwidth),
            cell(r.containment_violations),
        ]);
        println!(
            "density {}: flashing {:.4} ± {:.4}, plain {:.4} ± {:.4}, containment violations {}",
            r.density, r.flash_frequency, r.flash_halfwidth, r.plain_frequency, r.plain_halfwidth, r.containment_violations
        );
    }
    let d = dim.get() as f64;
    let x: Vec<f64> = results.iter().map(|r| (a.radius.powf(d) / r.mean_trap_free.max(1.0)).powf(1.0 / (d - 1.0))).collect();
    let k: Vec<u64> = results.iter().map(|r| r.flash_crossed).collect();
    let n: Vec<u64> = results.iter().map(|r| r.trials).collect();
    let fit = fit_decay(&x, &k, &n);
    print_fit(&fit);
    let json = serde_json::to_value(&results)?;
    finish_probe(run, "probe_traps", t, "(R^d/|V|)^(1/(d-1))", x, fit, json)
}

#[derive(Serialize)]
struct GreenValue {
    dim: Dim,
    n: f64,
    y: Site,
    z: Site,
    green: f64,
    hitting_probability: f64,
}

fn cmd_green_value(a: GreenValueArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let (y, z) = (site(dim, &a.y, "y")?, site(dim, &a.z, "z")?);
    let g = green_function(dim, a.n, &y, &z)?;
    let p = hitting_probability(dim, &y, &z, a.n)?;
    println!("G_{}({y}, {z}) = {g:.12}", a.n);
    println!("P_{y}(hit {z} before leaving B(0,{})) = {p:.12}", a.n);
    run.write_json("greens_value.json", "idla.greens.value/1", &GreenValue { dim, n: a.n, y, z, green: g, hitting_probability: p })?;
    run.finish()?;
    Ok(())
}

/// `(n, z, gap)` for `R = n` and both near-boundary targets of every `n`.
pub fn mean_value_rows(dim: Dim, n_min: u32, n_max: u32) -> Result<Vec<(f64, Site, f64)>, CliError> {
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let n = n as f64;
        for z in near_boundary_targets(dim, n) {
            rows.push((n, z, mean_value_gap(dim, n, n, &z)?));
        }
    }
    Ok(rows)
}

fn cmd_mean_value(a: MeanValueArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let rows = mean_value_rows(dim, a.n_min, a.n_max)?;
    let mut cols = vec!["n".to_string(), "radius".into()];
    cols.extend(coord_columns("z", dim.get()));
    cols.push("gap".into());
    let mut t = Table::new("idla.greens.mean_value/1", cols);
    for (n, z, gap) in &rows {
        let mut row = vec![cell(n), cell(n)];
        row.extend(coords(z));
        row.push(cell(gap));
        t.push(row);
        println!("n = {n:>3}  z = {z:<14} gap = {gap:.6}");
    }
    run.write_table("greens_mean_value.csv", &t)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct KernelSummary {
    box_half: i32,
    exact_range: i32,
    fitted_constant: f64,
    asymptotic_constant: f64,
    solver_residual: f64,
    rmin: f64,
    rmax: f64,
    fit: KernelFit,
}

fn cmd_kernel(a: KernelArgs, mut run: Run) -> Result<(), CliError> {
    let kernel = match &a.cache_dir {
        Some(dir) => PotentialKernel::load_or_compute(dir, a.box_half, a.range)?,
        None => PotentialKernel::compute(a.box_half, a.range)?,
    };
    let fit = kernel.fit_error(a.rmin, a.rmax);
    let mut t = Table::new("idla.greens.kernel/1", ["x", "y", "norm", "exact", "asymptotic", "residual", "scaled_residual"]);
    let top = a.rmax.ceil() as i32;
    for x in 0..=top {
        for y in 0..=x {
            let z = Site::new(&[x, y])?;
            let r = z.norm();
            if r < a.rmin || r > a.rmax {
                continue;
            }
            let Some(exact) = kernel.exact(&z) else { continue };
            let asym = kernel_asymptotic(&z);
            let res = exact - asym;
            t.push(vec![cell(x), cell(y), cell(r), cell(exact), cell(asym), cell(res), cell(res.abs() * r * r)]);
        }
    }
    println!("fitted constant {:.9} (closed form {:.9})", kernel.fitted_constant, kernel_constant());
    println!("K_g = {:.5} (low half {:.5}, high half {:.5}, split at {})", fit.k_g, fit.k_g_low, fit.k_g_high, fit.split);
    run.write_table("greens_kernel.csv", &t)?;
    let summary = KernelSummary {
        box_half: kernel.box_half,
        exact_range: kernel.exact_range,
        fitted_constant: kernel.fitted_constant,
        asymptotic_constant: kernel_constant(),
        solver_residual: kernel.residual,
        rmin: a.rmin,
        rmax: a.rmax,
        fit,
    };
    run.write_json("greens_kernel.json", "idla.greens.kernel.fit/1", &summary)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct BoundReport {
    tail: Tail,
    input: TailBoundInput,
    optimized: bool,
    bound: Bound,
}

fn cmd_bound(a: BoundArgs, tail: Tail, mut run: Run) -> Result<(), CliError> {
    let input = TailBoundInput { mu: a.mu, xi: a.xi, c: a.c, kappa: a.kappa, s2: a.s2 };
    let bound = match (a.optimize, a.lambda) {
        (true, _) => optimize_lambda(&input, tail)?,
        (false, Some(l)) if tail == Tail::Lower => lower_tail_bound(&input, l)?,
        (false, Some(l)) => upper_tail_bound(&input, l)?,
        (false, None) => return Err(CliError::Usage("give --lambda or --optimize".into())),
    };
    println!("lambda = {:.5}  bound = {:.4e}  log bound = {:.6}", bound.lambda, bound.bound, bound.log_bound);
    let name = if tail == Tail::Lower { "tails_lower.json" } else { "tails_upper.json" };
    run.write_json(name, "idla.tails.bound/1", &BoundReport { tail, input, optimized: a.optimize, bound })?;
    run.finish()?;
    Ok(())
}

fn cmd_tail_grid(a: TailGridArgs, mut run: Run) -> Result<(), CliError> {
    let src = source(&mut run, &a.seeded);
    let cells = default_grid();
    let checks = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| validate_bound(&c.spec, c.xi, c.c, c.kappa, c.tail, a.trials, src.child(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "idla.tails.grid/1",
        [
            "cell",
            "tail",
            "m_terms",
            "l_terms",
            "mu",
            "s2",
            "xi",
            "c",
            "kappa",
            "lambda",
            "log_bound",
            "bound",
            "trials",
            "hits",
            "frequency",
            "holds",
        ],
    );
    for (i, (c, v)) in cells.iter().zip(&checks).enumerate() {
        t.push(vec![
            cell(i),
            cell(if c.tail == Tail::Lower { "lower" } else { "upper" }),
            cell(c.spec.m.len()),
            cell(c.spec.l.len()),
            cell(v.input.mu),
            cell(v.input.s2),
            cell(v.input.xi),
            cell(v.input.c),
            cell(v.input.kappa),
            cell(v.bound.lambda),
            cell(v.bound.log_bound),
            cell(v.bound.bound),
            cell(v.trials),
            cell(v.hits),
            cell(v.frequency),
            cell(v.holds),
        ]);
    }
    run.write_table("tails_grid.csv", &t)?;
    let held = checks.iter().filter(|v| v.holds).count();
    println!("{held}/{} cells within bound + 3 standard errors", checks.len());
    run.finish()?;
    Ok(())
}

fn cmd_waves(a: WavesArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let wr = grow_by_waves(dim, a.n, src.child(0))?;
    let mut t = Table::new("idla.waves/1", ["k", "radius", "settled", "paused_sites", "paused_explorers"]);
    for w in &wr.waves {
        t.push(vec![cell(w.k), cell(w.radius), cell(w.settled), cell(w.paused.len()), cell(w.total_paused())]);
    }
    run.write_table("waves.csv", &t)?;
    let e = error_radii(&wr.cluster, a.n);
    println!(
        "h = {:.4}, {} waves, |A| = {}, inner error {:.4}, outer error {:.4}",
        wr.height,
        wr.waves.len(),
        wr.cluster.len(),
        e.inner,
        e.outer
    );
    if let Some(k) = a.tiles {
        let opts = MuOptions { mc_trials: a.mc_trials, ..MuOptions::default() };
        let stats = wave_tile_stats(&wr, k, TileFamily::Thinned, a.l, opts, src.child(1))?;
        let mut cols = vec!["k".to_string()];
        cols.extend(coord_columns("c", dim.get()));
        cols.extend(["w", "mu", "mu_halfwidth", "exclusion_radius"].map(String::from));
        let mut tt = Table::new("idla.waves.tiles/1", cols);
        for s in &stats {
            let mut row = vec![cell(s.k)];
            row.extend(coords(&s.center));
            row.extend([cell(s.w), cell(s.mu), cell(s.mu_halfwidth), cell(s.exclusion_radius)]);
            tt.push(row);
        }
        println!("wave {k}: {} tiles", tt.len());
        run.write_table("waves_tiles.csv", &tt)?;
    }
    run.finish()?;
    Ok(())
}

fn cmd_flash(a: FlashArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let h = a.height.unwrap_or_else(|| inner_height(dim, a.n));
    let cfg = FlashingConfig { settle_on_return: a.settle_on_return, ..FlashingConfig::default() };
    let runs = (0..a.trials).into_par_iter().map(|t| flashing_grow_with(dim, a.n, h, cfg, src.child(t))).collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "idla.flash/1",
        ["trial", "explorers", "order_violations", "min_delay", "evictions", "plain_outside", "flash_outside", "flash_stopped"],
    );
    let mut violations = 0;
    for (i, r) in runs.iter().enumerate() {
        let outside = |c: &idla_core::aggregation::Cluster| c.len() - c.count_within(a.n);
        violations += r.order_violations().len();
        t.push(vec![
            cell(i),
            cell(r.t_plain.len()),
            cell(r.order_violations().len()),
            opt_cell(r.min_delay()),
            cell(r.evictions),
            cell(outside(&r.plain)),
            cell(outside(&r.flashing)),
            cell(r.flashing.total_stopped()),
        ]);
    }
    run.write_table("flash.csv", &t)?;
    println!("{} coupled runs, h = {h:.4}, {violations} order violations", runs.len());
    run.finish()?;
    Ok(())
}

fn subdivision_row(i: u64, s: &Subdivision) -> Vec<String> {
    let join = |v: Vec<String>| v.join(";");
    vec![
        cell(i),
        cell(s.l),
        cell(s.middle_sum()),
        cell(s.heights[s.l + 1]),
        join(s.heights.iter().map(cell).collect()),
        join(s.counts.iter().map(cell).collect()),
    ]
}

fn cmd_subdivide(a: SubdivideArgs, mut run: Run) -> Result<(), CliError> {
    let dim = dim(a.dim)?;
    let src = source(&mut run, &a.seeded);
    let mut t = Table::new("idla.subdivide/1", ["run", "l", "middle_sum", "last_height", "heights", "counts"]);
    if let Some(path) = &a.cluster {
        let dump: ClusterDump = serde_json::from_str(&fs::read_to_string(path)?)?;
        let total = a.total.unwrap_or(dump.meta.explorers);
        let cluster = dump.into_cluster()?;
        let center = match &a.center {
            Some(c) => site(cluster.dim(), c, "center")?,
            None => Site::origin(cluster.dim()),
        };
        let s = subdivide_cluster(&cluster, &center, a.radius, a.gamma, total)?;
        println!("L = {}, heights {:?}", s.l, s.heights);
        t.push(subdivision_row(0, &s));
    } else {
        let h0 = a.radius / 4.0;
        let total = a.total.unwrap_or_else(|| (h0.powi(dim.get() as i32) / a.gamma).floor().max(0.0) as u64);
        let subs = (0..a.runs)
            .into_par_iter()
            .map(|i| {
                let mut rng = src.child(i).rng();
                subdivide(dim, a.radius, a.gamma, total, |k, h| {
                    let lo = (h[k].floor() as u64).min(total);
                    rng.random_range(lo..=total)
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (i, s) in subs.iter().enumerate() {
            t.push(subdivision_row(i as u64, s));
        }
        let max_l = subs.iter().map(|s| s.l).max().unwrap_or(0);
        println!("{} subdivisions of R = {} with |eta| = {total}; all invariants hold; max L = {max_l}", subs.len(), a.radius);
    }
    run.write_table("subdivide.csv", &t)?;
    run.finish()?;
    Ok(())
}

pub fn probe_json_files(dir: &std::path::Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let name = p.file_name().and_then(|s| s.to_str()).unwrap_or("");
                    name.starts_with("probe_") && name.ends_with(".json") && !name.ends_with(".manifest.json")
                })
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}
