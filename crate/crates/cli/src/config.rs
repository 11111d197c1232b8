//! `key = value` config files. Each entry becomes the flag `--key value`
//! inserted right after the subcommand, ahead of the user's own flags, so
//! that anything given on the command line wins.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::CliError;

const GLOBAL_WITH_VALUE: [&str; 3] = ["--config", "--threads", "--out-dir"];
const NESTED: [&str; 3] = ["probe", "greens", "tails"];

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key {:?}", i + 1, k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

/// Value of `--config`, in either `--config x` or `--config=x` form.
pub fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Position just past the subcommand path (`probe traps`, `grow`, ...).
fn insertion_point(argv: &[String]) -> usize {
    let mut i = 1;
    let mut depth = 0;
    while i < argv.len() {
        let a = argv[i].as_str();
        if GLOBAL_WITH_VALUE.contains(&a) {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            i += 1;
            continue;
        }
        depth += 1;
        i += 1;
        if depth > 1 || !NESTED.contains(&a) {
            break;
        }
    }
    i.min(argv.len())
}

pub fn inject(argv: &[String], entries: &BTreeMap<String, String>) -> Vec<String> {
    let mut extra = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => {
                extra.push(format!("--{k}"));
                extra.push(v.clone());
            }
        }
    }
    let at = insertion_point(argv);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}
