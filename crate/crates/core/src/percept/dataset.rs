//! Labelled (median load, phase) samples and their CSV form.

use std::io::{BufRead, Write};

use super::knn::{DepthClass, LabeledFeature};
use super::load::BodyJoint;
use crate::error::{invalid, Result};

pub const DATASET_HEADER: &str = "joint,phi_rad,tau_m_pct,depth_mm,trial_id,cycle_id";

/// One per-cycle feature sample from one joint of one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetRow {
    pub joint: BodyJoint,
    pub phi: f64,
    pub tau_m: f64,
    pub depth: DepthClass,
    pub trial_id: usize,
    pub cycle_id: usize,
}

impl DatasetRow {
    pub fn feature(&self) -> LabeledFeature {
        LabeledFeature {
            tau_m: self.tau_m,
            phi: self.phi,
            label: self.depth,
        }
    }
}

pub fn write_dataset<W: Write>(rows: &[DatasetRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DATASET_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.9},{:.9},{},{},{}",
            r.joint.name(),
            r.phi,
            r.tau_m,
            r.depth.depth_mm(),
            r.trial_id,
            r.cycle_id
        )?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<DatasetRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| invalid(e.to_string()))?
        .unwrap_or_default();
    if header.trim() != DATASET_HEADER {
        return Err(invalid(format!("unexpected dataset header {header:?}")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| invalid(format!("dataset line {}: bad {what}", n + 2));
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 6 {
            return Err(bad("column count"));
        }
        let num = |i: usize, what: &str| cols[i].parse::<f64>().map_err(|_| bad(what));
        let idx = |i: usize, what: &str| cols[i].parse::<usize>().map_err(|_| bad(what));
        rows.push(DatasetRow {
            joint: BodyJoint::parse(cols[0]).ok_or_else(|| bad("joint"))?,
            phi: num(1, "phi_rad")?,
            tau_m: num(2, "tau_m_pct")?,
            depth: DepthClass::from_depth_mm(num(3, "depth_mm")?).ok_or_else(|| bad("depth class"))?,
            trial_id: idx(4, "trial_id")?,
            cycle_id: idx(5, "cycle_id")?,
        });
    }
    Ok(rows)
}
