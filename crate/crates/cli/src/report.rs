use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::commands::{probe_json_files, ProbeSummary, ScanSummary};
use crate::output::{cell, Run, Table};
use crate::CliError;

/// Tables of normalized error ratios and probe decay fits from whatever
/// summaries `dir` holds, plus a plain-text rendering of both.
pub fn run(dir: &Path, mut out: Run) -> Result<(), CliError> {
    let mut text = String::new();
    let scan_path = dir.join("scan_summary.json");
    let mut ratios = Table::new(
        "idla.report.ratios/1",
        ["dim", "n", "normalizer", "degenerate", "mean_inner", "mean_outer", "max_inner", "max_outer", "inner_ratio", "outer_ratio"],
    );
    if scan_path.exists() {
        let scan: ScanSummary = serde_json::from_str(&fs::read_to_string(&scan_path)?)?;
        writeln!(text, "Error radii, d = {}, {} trials per n (seed {})", scan.dim.get(), scan.trials, scan.seed).unwrap();
        writeln!(text, "{:>6} {:>10} {:>10} {:>10} {:>10}", "n", "mean dI", "mean dO", "dI ratio", "dO ratio").unwrap();
        for s in &scan.stats {
            ratios.push(vec![
                cell(scan.dim.get()),
                cell(s.n),
                cell(s.normalizer),
                cell(s.degenerate),
                cell(s.inner.mean),
                cell(s.outer.mean),
                cell(s.inner.max),
                cell(s.outer.max),
                cell(s.inner_ratio),
                cell(s.outer_ratio),
            ]);
            writeln!(text, "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", s.n, s.inner.mean, s.outer.mean, s.inner_ratio, s.outer_ratio)
                .unwrap();
        }
        writeln!(text, "alpha_hat = {:.4}  beta_hat = {:.4}\n", scan.alpha_hat, scan.beta_hat).unwrap();
    }
    let mut fits = Table::new("idla.report.fits/1", ["probe", "decay_variable", "cells", "zero_cells", "slope", "intercept", "r2"]);
    for path in probe_json_files(dir) {
        let p: ProbeSummary = serde_json::from_str(&fs::read_to_string(&path)?)?;
        let (zero, slope, icpt, r2) = match &p.fit {
            Some(f) => (cell(f.zero_cells), cell(f.fit.slope), cell(f.fit.intercept), cell(f.fit.r2)),
            None => Default::default(),
        };
        writeln!(text, "probe {}: log-frequency against {} over {} cells: slope {}", p.probe, p.decay_variable, p.x.len(), slope).unwrap();
        fits.push(vec![p.probe.clone(), p.decay_variable.clone(), cell(p.x.len()), zero, slope, icpt, r2]);
    }
    if ratios.is_empty() && fits.is_empty() {
        return Err(CliError::Usage(format!("no scan_summary.json or probe_*.json in {}", dir.display())));
    }
    out.write_table("report_ratios.csv", &ratios)?;
    out.write_table("report_fits.csv", &fits)?;
    out.write_text("report.txt", &text)?;
    print!("{text}");
    out.finish()?;
    Ok(())
}
