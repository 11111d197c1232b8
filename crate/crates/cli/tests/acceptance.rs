//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always shown. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 3 12`.

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use idla_cli::commands::mean_value_rows;
use idla_core::aggregation::{count_hits, grow, inner_error, Configuration, HitMode};
use idla_core::experiments::{probe_covering, probe_traps, scan_fluctuations, subdivide, CoveringPlacement, DEFAULT_COVERING_ALPHA};
use idla_core::flashing::flashing_grow;
use idla_core::greens::{kernel_constant, PotentialKernel, DEFAULT_KERNEL_BOX, DEFAULT_KERNEL_RANGE};
use idla_core::lattice::{inner_height, Dim, Site};
use idla_core::stats::ks_two_sample;
use idla_core::tails::{default_grid, validate_bound};
use idla_core::walk::RandomSource;
use idla_core::waves::grow_by_waves;
use rand::Rng;
use rayon::prelude::*;

const CONSERVATION_RUNS: u64 = 1000;
const CONSERVATION_MAX_N: u64 = 10_000;
const COUPLED_RUNS: u64 = 200;
const KS_SIZE: f64 = 1e-3;
const IDENTITY_SAMPLES: u64 = 5000;
const WAVE_TRIALS: u64 = 2000;
const MEAN_VALUE_GROWTH: f64 = 2.0;
const KERNEL_RANGE: (f64, f64) = (5.0, 20.0);
const KERNEL_STABILITY: f64 = 0.2;
const TAIL_TRIALS: u64 = 10_000;
const PROBE_TRIALS: u64 = 1000;
const TRAP_PROBES: u64 = 10_000;
const SCAN_TRIALS: u64 = 100;
const SCAN_SPREAD: f64 = 2.0;
const SUBDIVISION_RUNS: u64 = 1000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn d(n: usize) -> Dim {
    Dim::new(n).unwrap()
}

fn conservation() -> Outcome {
    let failures: Vec<String> = (0..CONSERVATION_RUNS)
        .into_par_iter()
        .filter_map(|i| {
            let src = RandomSource::new(1, i);
            let mut rng = src.child(0).rng();
            let dim = d(2 + (i % 2) as usize);
            // log-uniform N in [1, 10^4], with every tenth run at the cap
            let n = if i % 10 == 0 { CONSERVATION_MAX_N } else { (10f64.powf(rng.random_range(0.0..4.0))).round() as u64 };
            let eta = match i % 3 {
                0 => Configuration::point(Site::origin(dim), n),
                1 => {
                    let mut eta = Configuration::empty(dim);
                    let mut left = n;
                    while left > 0 {
                        let k = rng.random_range(1..=left);
                        let c: Vec<i32> = (0..dim.get()).map(|_| rng.random_range(-8..=8)).collect();
                        eta.add(Site::new(&c).unwrap(), k);
                        left -= k;
                    }
                    eta
                }
                _ => {
                    let mut eta = Configuration::empty(dim);
                    for j in 0..n {
                        eta.add(Site::on_axis(dim, (j % 17) as i32 - 8), 1);
                    }
                    eta
                }
            };
            let c = grow(&eta, src.child(1)).ok()?;
            let distinct: HashSet<Site> = c.settle_order().iter().map(|s| s.site).collect();
            let explorers: HashSet<usize> = c.settle_order().iter().map(|s| s.explorer).collect();
            let ok = c.len() as u64 == n && distinct.len() == c.len() && explorers.len() == c.len();
            (!ok).then(|| format!("run {i}: N = {n}, |A| = {}", c.len()))
        })
        .collect();
    let first = failures.first().map(|f| format!(", first: {f}")).unwrap_or_default();
    outcome(failures.is_empty(), format!("{CONSERVATION_RUNS} runs, {} failures{first}", failures.len()))
}

fn coupling_order() -> Outcome {
    let ns = [4.0, 6.0, 8.0, 10.0, 12.0, 15.0];
    let stats: Vec<(usize, u64)> = (0..COUPLED_RUNS)
        .into_par_iter()
        .map(|i| {
            let dim = d(2 + (i % 2) as usize);
            let n = ns[(i / 2) as usize % ns.len()];
            let run = flashing_grow(dim, n, inner_height(dim, n), RandomSource::new(2, i)).unwrap();
            (run.order_violations().len(), run.evictions)
        })
        .collect();
    let violations: usize = stats.iter().map(|s| s.0).sum();
    let evictions: u64 = stats.iter().map(|s| s.1).sum();
    outcome(violations == 0, format!("{COUPLED_RUNS} coupled runs, {violations} violations of T* >= T ({evictions} evictions)"))
}

fn boundary_identity() -> Outcome {
    let dim = d(2);
    let n = 8.0;
    let eta = Configuration::ball_mass(dim, n);
    let z = Site::new(&[8, 0]).unwrap();
    let pairs: Vec<(f64, f64)> = (0..IDENTITY_SAMPLES)
        .into_par_iter()
        .map(|t| {
            let src = RandomSource::new(3, t);
            let w = count_hits(&eta, n, &[z], HitMode::Explorers, src.child(0)).unwrap();
            let a = Configuration::indicator(dim, &w.cluster.unwrap().sites());
            let m_a = count_hits(&a, n, &[z], HitMode::Walkers, src.child(1)).unwrap();
            let m = count_hits(&eta, n, &[z], HitMode::Walkers, src.child(2)).unwrap();
            ((w.counts[&z] + m_a.counts[&z]) as f64, m.counts[&z] as f64)
        })
        .collect();
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let ks = ks_two_sample(&lhs, &rhs);
    outcome(!ks.rejects(KS_SIZE), format!("z = {z}, D = {:.4}, p = {:.3}, critical {:.4}", ks.statistic, ks.p_value, ks.critical(KS_SIZE)))
}

fn wave_equivalence() -> Outcome {
    let dim = d(2);
    let n = 12.0;
    let eta = Configuration::ball_mass(dim, n);
    let pairs: Vec<(f64, f64)> = (0..WAVE_TRIALS)
        .into_par_iter()
        .map(|t| {
            let a = inner_error(&grow(&eta, RandomSource::new(4, t)).unwrap(), n);
            let b = inner_error(&grow_by_waves(dim, n, RandomSource::new(5, t)).unwrap().cluster, n);
            (a, b)
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let ks = ks_two_sample(&a, &b);
    outcome(!ks.rejects(KS_SIZE), format!("inner error, D = {:.4}, p = {:.3}", ks.statistic, ks.p_value))
}

fn mean_value() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [d(2), d(3)] {
        let rows = mean_value_rows(dim, 5, 30).unwrap();
        let max_in = |lo: f64, hi: f64| rows.iter().filter(|r| r.0 >= lo && r.0 <= hi).map(|r| r.2).fold(0.0, f64::max);
        let (early, late) = (max_in(5.0, 15.0), max_in(16.0, 30.0));
        pass &= late <= MEAN_VALUE_GROWTH * early;
        parts.push(format!("d={}: max gap {late:.3} (n 16..30) vs {early:.3} (n 5..15)", dim.get()));
    }
    outcome(pass, parts.join("; "))
}

fn potential_kernel() -> Outcome {
    let k = PotentialKernel::compute(DEFAULT_KERNEL_BOX, DEFAULT_KERNEL_RANGE).unwrap();
    let f = k.fit_error(KERNEL_RANGE.0, KERNEL_RANGE.1);
    let ratio = f.k_g_high / f.k_g_low;
    let pass = (ratio - 1.0).abs() <= KERNEL_STABILITY && f.k_g.is_finite() && f.sites > 0;
    outcome(
        pass,
        format!(
            "K_g = {:.5} over {} sites; halves {:.5} / {:.5} (ratio {ratio:.3}); constant {:.8} vs {:.8}",
            f.k_g,
            f.sites,
            f.k_g_low,
            f.k_g_high,
            k.fitted_constant,
            kernel_constant()
        ),
    )
}

fn tail_dominance() -> Outcome {
    let cells = default_grid();
    let checks: Vec<bool> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| validate_bound(&c.spec, c.xi, c.c, c.kappa, c.tail, TAIL_TRIALS, RandomSource::new(7, i as u64)).unwrap().holds)
        .collect();
    let held = checks.iter().filter(|&&h| h).count();
    outcome(held == cells.len(), format!("{held}/{} cells within bound + 3 standard errors", cells.len()))
}

fn covering() -> Outcome {
    let freq: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&a| {
            probe_covering(
                d(3),
                6.0,
                a,
                PROBE_TRIALS,
                DEFAULT_COVERING_ALPHA,
                CoveringPlacement::UniformHalfBall,
                RandomSource::new(8, a as u64),
            )
            .unwrap()
            .frequency
        })
        .collect();
    let pass = freq.windows(2).all(|w| w[1] <= w[0]) && freq[2] <= freq[0];
    outcome(pass, format!("non-covering frequency at A = 1,2,3: {freq:?}"))
}

fn traps() -> Outcome {
    let per = TRAP_PROBES.div_ceil(3);
    let res: Vec<_> = [0.2, 0.5, 0.8]
        .iter()
        .enumerate()
        .map(|(i, &rho)| probe_traps(d(2), 12.0, rho, per, 2.0, RandomSource::new(9, i as u64)).unwrap())
        .collect();
    // trap-free annulus: plain crossings actually occur, so containment is
    // exercised rather than vacuous
    let open = probe_traps(d(2), 12.0, 1.0, PROBE_TRIALS, 2.0, RandomSource::new(9, 3)).unwrap();
    let violations: u64 = res.iter().map(|r| r.containment_violations).sum::<u64>() + open.containment_violations;
    let freq: Vec<f64> = res.iter().map(|r| r.flash_frequency).collect();
    let plain: Vec<f64> = res.iter().map(|r| r.plain_frequency).collect();
    let pass = violations == 0 && freq.windows(2).all(|w| w[1] > w[0]);
    let shown = |v: &[f64]| v.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(", ");
    outcome(
        pass,
        format!(
            "{} probes, {violations} containment violations ({} plain crossings at density 1); crossing [{}] (plain [{}])",
            per * 3 + open.trials,
            open.plain_crossed,
            shown(&freq),
            shown(&plain)
        ),
    )
}

fn fluctuation_scaling() -> Outcome {
    let ns = [10.0, 15.0, 20.0, 25.0, 30.0];
    let scan = scan_fluctuations(d(3), &ns, SCAN_TRIALS, RandomSource::new(10, 0)).unwrap();
    let env: Vec<f64> = scan.stats.iter().map(|s| s.normalizer).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, means) in [
        ("inner", scan.stats.iter().map(|s| s.inner.mean).collect::<Vec<_>>()),
        ("outer", scan.stats.iter().map(|s| s.outer.mean).collect()),
    ] {
        let ratios: Vec<f64> = means.iter().zip(&env).map(|(m, e)| m / e).collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        let spread = hi / lo;
        // growth of the mean between any two n stays within the envelope
        let within = (0..ns.len()).all(|i| (i + 1..ns.len()).all(|j| means[j] / means[i] <= SCAN_SPREAD * env[j] / env[i]));
        pass &= spread < SCAN_SPREAD && within;
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        parts.push(format!("{name} ratios [{}] spread {spread:.3}", shown.join(", ")));
    }
    outcome(pass, parts.join("; "))
}

fn subdivisions() -> Outcome {
    let dim = d(2);
    let bad: Vec<String> = (0..SUBDIVISION_RUNS)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = RandomSource::new(11, i).rng();
            let r: f64 = rng.random_range(4.0..400.0);
            let h0 = r / 4.0;
            // γ <= h_0 keeps [floor(h_0), h_0^2/γ] non-empty
            let gamma: f64 = rng.random_range(1.0..=h0.min(4.0));
            let hi = (h0 * h0 / gamma).floor() as u64;
            let lo = h0.floor() as u64;
            let total = rng.random_range(lo..=hi);
            let s = match subdivide(dim, r, gamma, total, |k, h| rng.random_range((h[k].floor() as u64).min(total)..=total)) {
                Ok(s) => s,
                Err(e) => return Some(format!("run {i}: {e}")),
            };
            let mid = s.middle_sum();
            let ok = s.heights[..=s.l].iter().all(|&h| h >= 1.0)
                && mid >= r / 2.0 - 1e-9
                && mid <= 0.75 * r + 1e-9
                && s.heights[s.l + 1] >= -1e-9;
            (!ok).then(|| format!("run {i}: {:?}", s.heights))
        })
        .collect();
    let first = bad.first().map(|f| format!(", first: {f}")).unwrap_or_default();
    outcome(bad.is_empty(), format!("{SUBDIVISION_RUNS} randomized runs, {} invariant failures{first}", bad.len()))
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn reproducibility() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_idla");
    let commands: [&[&str]; 10] = [
        &["grow", "--dim", "2", "--n", "10", "--seed", "42"],
        &["grow", "--dim", "3", "--count", "500", "--stop-radius", "5", "--seed", "1", "--format", "csv"],
        &["scan", "--dim", "3", "--n-list", "4,6,8", "--trials", "20", "--seed", "7"],
        &["probe", "traps", "--dim", "2", "--radius", "6", "--density", "0.5,0.8", "--trials", "200", "--seed", "3"],
        &["probe", "origin", "--dim", "2", "--radius", "3,5", "--trials", "200", "--seed", "3"],
        &["tails", "grid", "--trials", "500", "--seed", "5"],
        &["waves", "--dim", "2", "--n", "10", "--tiles", "2", "--seed", "4"],
        &["flash", "--dim", "3", "--n", "6", "--trials", "4", "--seed", "6"],
        &["subdivide", "--radius", "60", "--runs", "50", "--seed", "8"],
        &["greens", "mean-value", "--dim", "2", "--n-min", "5", "--n-max", "8"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (i, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, threads) in [(0, "1"), (1, "3")] {
            let dir = root.path().join(format!("{i}_{rep}"));
            let status = Command::new(exe)
                .args(*cmd)
                .args(["--threads", threads, "--out-dir"])
                .arg(&dir)
                .stdout(std::process::Stdio::null())
                .status()
                .unwrap();
            if !status.success() {
                mismatches.push(format!("`{}` exited with {status}", cmd.join(" ")));
            }
            outputs.push(data_files(&dir));
        }
        files += outputs[0].len();
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            mismatches.push(cmd.join(" "));
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{} commands, {files} data files byte-identical across re-runs", commands.len())
    } else {
        format!("{} of {} commands differ: {}", mismatches.len(), commands.len(), mismatches.join("; "))
    };
    outcome(mismatches.is_empty(), detail)
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("conservation and uniqueness", conservation),
        ("coupling order", coupling_order),
        ("boundary identity", boundary_identity),
        ("wave equivalence", wave_equivalence),
        ("mean-value property", mean_value),
        ("potential kernel", potential_kernel),
        ("tail-bound dominance", tail_dominance),
        ("covering probe", covering),
        ("trap probe", traps),
        ("fluctuation scaling", fluctuation_scaling),
        ("subdivision invariants", subdivisions),
        ("reproducibility", reproducibility),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {k:>2} {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
