use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use idla_core::walk::GENERATOR_ID;
use serde::Serialize;

use crate::CliError;

pub const MANIFEST_SCHEMA: &str = "idla.manifest/1";

/// Comma-separated table with a `# schema` header and a pointer to the run
/// manifest. Cells are pre-rendered strings.
pub struct Table {
    schema: &'static str,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(schema: &'static str, columns: impl IntoIterator<Item = S>) -> Self {
        Table { schema, columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn render(&self, manifest: &str) -> String {
        let mut s = format!("# schema: {}\n# manifest: {manifest}\n", self.schema);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Renders a cell; integers and floats use Rust's shortest round-trip form.
pub fn cell<T: Display>(v: T) -> String {
    v.to_string()
}

pub fn opt_cell<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Axis-labelled coordinate columns `x1..xd`.
pub fn coord_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    command: &'a str,
    argv: &'a [String],
    config: &'a BTreeMap<String, String>,
    seed: Option<u64>,
    stream: Option<u64>,
    generator: &'static str,
    version: &'static str,
    threads: usize,
    started_unix: u64,
    finished_unix: u64,
    outputs: &'a [String],
}

/// Collects the files one command writes, then records them in
/// `<command>.manifest.json`. Data files never contain timestamps.
pub struct Run {
    pub dir: PathBuf,
    pub command: String,
    pub argv: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub threads: usize,
    pub seed: Option<(u64, u64)>,
    started: u64,
    outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Run {
    pub fn new(dir: PathBuf, command: &str, argv: Vec<String>, config: BTreeMap<String, String>, threads: usize) -> Self {
        Run { dir, command: command.to_string(), argv, config, threads, seed: None, started: now(), outputs: Vec::new() }
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    fn target(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        let path = self.target(name);
        self.write_at(&path, table.render(&self.manifest_name()))?;
        Ok(path)
    }

    /// Pretty JSON object with `schema` and `manifest` fields added.
    pub fn write_json<T: Serialize>(&mut self, name: &str, schema: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.target(name);
        self.json_at(&path, Some(schema), value, true)?;
        Ok(path)
    }

    /// Single-line JSON, for large payloads such as cluster dumps that
    /// carry their own schema tag.
    pub fn write_compact_json_at<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        self.json_at(path, None, value, false)
    }

    fn json_at<T: Serialize>(&mut self, path: &Path, schema: Option<&str>, value: &T, pretty: bool) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("manifest".into(), self.manifest_name().into());
            if let Some(s) = schema {
                map.insert("schema".into(), s.into());
            }
        }
        let mut text = if pretty { serde_json::to_string_pretty(&v)? } else { serde_json::to_string(&v)? };
        text.push('\n');
        self.write_at(path, text)
    }

    pub fn write_table_at(&mut self, path: &Path, table: &Table) -> Result<(), CliError> {
        self.write_at(path, table.render(&self.manifest_name()))
    }

    /// Plain text prefixed with a `manifest:` line.
    pub fn write_text(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.target(name);
        self.write_at(&path, format!("manifest: {}\n\n{body}", self.manifest_name()))?;
        Ok(path)
    }

    fn write_at(&mut self, path: &Path, text: String) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
        self.record(path);
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir)?;
        let m = Manifest {
            schema: MANIFEST_SCHEMA,
            command: &self.command,
            argv: &self.argv,
            config: &self.config,
            seed: self.seed.map(|s| s.0),
            stream: self.seed.map(|s| s.1),
            generator: GENERATOR_ID,
            version: env!("CARGO_PKG_VERSION"),
            threads: self.threads,
            started_unix: self.started,
            finished_unix: now(),
            outputs: &self.outputs,
        };
        let path = self.target(&self.manifest_name());
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(path)
    }
}
