//! CSV tables and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};

/// Decimal places for every floating-point field.
pub const PRECISION: usize = 6;

/// Fixed-precision, locale-independent rendering. Negative zero prints as zero
/// so that sign noise never changes the bytes of a report.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let s = format!("{x:.PRECISION$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Quotes a text field when it would otherwise break the row.
pub fn text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        write_file(dir, name, &self.render())
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// A pass/fail statement about an experiment's output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Worst solver and energy figures seen across every trial of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hygiene {
    pub trials: usize,
    pub max_residual: f64,
    /// Largest element power `f . v`; never positive for a dissipative law.
    pub max_power: f64,
    pub fallback_steps: usize,
}

impl Default for Hygiene {
    fn default() -> Self {
        Self {
            trials: 0,
            max_residual: 0.0,
            max_power: f64::NEG_INFINITY,
            fallback_steps: 0,
        }
    }
}

impl Hygiene {
    pub fn record(&mut self, rec: &terradapt::terra::TrialRecord) {
        self.trials += 1;
        self.max_residual = self.max_residual.max(rec.max_residual);
        self.max_power = self.max_power.max(rec.max_power);
        self.fallback_steps += rec.fallback_steps;
    }

    pub fn merge(&mut self, other: &Hygiene) {
        self.trials += other.trials;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_power = self.max_power.max(other.max_power);
        self.fallback_steps += other.fallback_steps;
    }
}

/// What one experiment produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub experiment: Experiment,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    /// Sub-runs that errored; the rest of the experiment still completed.
    pub failures: Vec<String>,
    pub tau0: Option<f64>,
    pub hygiene: Hygiene,
}

impl Outcome {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            files: Vec::new(),
            checks: Vec::new(),
            failures: Vec::new(),
            tau0: None,
            hygiene: Hygiene::default(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        for f in &self.failures {
            let _ = writeln!(s, "ERROR {f}");
        }
        s
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    seed: Option<u64>,
    tau0: Option<f64>,
    succeeded: bool,
    outputs: Vec<String>,
    failures: &'a [String],
    checks: &'a [Check],
    config: &'a ExperimentConfig,
}

pub const MANIFEST_NAME: &str = "run_manifest.toml";

/// Writes the manifest: the resolved config with every default filled in,
/// the crate version, the seed, tau0 and what the run produced.
pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<PathBuf> {
    let outputs = outcome
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let m = Manifest {
        experiment: outcome.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        tau0: outcome.tau0,
        succeeded: outcome.succeeded(),
        outputs,
        failures: &outcome.failures,
        checks: &outcome.checks,
        config: cfg,
    };
    let body = toml::to_string(&m).context("serializing the run manifest")?;
    write_file(dir, MANIFEST_NAME, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_fixed_precision() {
        assert_eq!(num(1.0), "1.000000");
        assert_eq!(num(-0.5), "-0.500000");
        assert_eq!(num(-1e-12), "0.000000");
        assert_eq!(num(-0.0), "0.000000");
        assert_eq!(num(2.0f64.sqrt()), "1.414214");
    }

    #[test]
    fn text_fields_are_quoted_only_when_needed() {
        assert_eq!(text("ok"), "ok");
        assert_eq!(text("a, b"), "\"a, b\"");
        assert_eq!(text("say \"hi\","), "\"say \"\"hi\"\",\"");
    }

    #[test]
    fn table_renders_header_first() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "a,b\n1,2\n");
    }
}
