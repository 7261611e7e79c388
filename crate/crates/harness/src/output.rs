//! Artifact files and the run summary. Every file starts with a provenance
//! header carrying the config hash and the seed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// One comparison against a pinned tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// The threshold the value was compared with.
    pub limit: f64,
    /// How `value` relates to `limit`, in words.
    pub rule: String,
    pub passed: bool,
    /// Informational checks are reported but do not gate the exit status.
    pub gating: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, rule: "value <= limit".into(), passed: value <= limit, gating: true }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, rule: "value >= limit".into(), passed: value >= limit, gating: true }
    }

    /// A yes/no property; `value` is 1 when it holds.
    pub fn holds(name: impl Into<String>, ok: bool, rule: impl Into<String>) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), limit: 1.0, rule: rule.into(), passed: ok, gating: true }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub suite: String,
    pub config_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.gating && !c.passed)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
        let mut s = format!("{:<6} {:<width$} {:>14} {:>14}  rule\n", "status", "check", "value", "limit");
        for c in &self.checks {
            let status = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            let _ = writeln!(s, "{status:<6} {:<width$} {:>14.6e} {:>14.6e}  {}", c.name, c.value, c.limit, c.rule);
        }
        s
    }
}

/// Writes tab-separated tables into one directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    suite: String,
    config_hash: String,
    seed: u64,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, suite: &str, config_hash: &str, seed: u64) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), suite: suite.into(), config_hash: config_hash.into(), seed, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn header(&self, meta: &[(&str, String)]) -> String {
        let mut s = format!("# spikewin {}\n# config_hash: {}\n# seed: {}\n", self.suite, self.config_hash, self.seed);
        for (k, v) in meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }

    pub fn table<R>(&mut self, name: &str, meta: &[(&str, String)], columns: &[&str], rows: R) -> io::Result<()>
    where
        R: IntoIterator<Item = Vec<String>>,
    {
        let mut s = self.header(meta);
        s.push_str(&columns.join("\t"));
        s.push('\n');
        for row in rows {
            s.push_str(&row.join("\t"));
            s.push('\n');
        }
        fs::write(self.dir.join(name), s)?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn finish(mut self, config_name: &str, checks: Vec<Check>) -> io::Result<Summary> {
        self.written.push("summary.json".into());
        let summary = Summary {
            suite: self.suite.clone(),
            config_name: config_name.into(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            passed: checks.iter().all(|c| c.passed || !c.gating),
            checks,
            artifacts: self.written.clone(),
        };
        let json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
        fs::write(self.dir.join("summary.json"), json + "\n")?;
        Ok(summary)
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn counts_label(c: &[usize]) -> String {
    c.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}
