use std::f64::consts::PI;
use std::path::Path;

use anyhow::{Context, Result};
use terradapt::percept::BodyJoint;
use terradapt::terra::{torque_vs_rft_ratio, TorqueRatioRow};

use super::{par_map, worker_count};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, Check, Outcome, Table};

/// Lower-joint torque at full granular drag relative to the mean of the
/// other two joints, as required of the traveling-wave gait.
pub const CONCENTRATION_RATIO: f64 = 1.4;
/// Largest spread, as max/min, among the joint medians of a standing wave on
/// rigid ground.
pub const UNIFORM_SPREAD: f64 = 1.25;

/// Noise-free median |torque| per joint as the ground goes from Coulomb
/// friction (rho = 0) to granular drag (rho = 1).
pub fn run_model_torque(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let m = &cfg.model_torque;
    let sim = cfg.sim_config();
    let runs = par_map(&m.phases, worker_count(cfg, m.phases.len()), |&phi| {
        torque_vs_rft_ratio(&sim, &cfg.gait_with_phase(phi), &m.ratios)
    });

    let mut outcome = Outcome::new(Experiment::ModelTorque);
    let mut table = Table::new(&["phi_rad", "rho", "joint", "median_tau_tilde"]);
    let mut by_phase: Vec<(f64, Vec<TorqueRatioRow>)> = Vec::new();
    for (&phi, res) in m.phases.iter().zip(runs) {
        let rows = res.with_context(|| format!("torque sweep at phi {phi:.4}"))?;
        for r in &rows {
            outcome.hygiene.trials += 1;
            outcome.hygiene.max_residual = outcome.hygiene.max_residual.max(r.max_residual);
            outcome.hygiene.max_power = outcome.hygiene.max_power.max(r.max_power);
            for j in BodyJoint::ALL {
                table.push(vec![num(phi), num(r.rho), j.name().into(), num(r.median_abs_torque[j.index()])]);
            }
        }
        by_phase.push((phi, rows));
    }
    table.rows.sort_by(|a, b| {
        let key = |r: &Vec<String>| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap());
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then_with(|| joint_rank(&a[2]).cmp(&joint_rank(&b[2])))
    });

    let find = |target: f64| by_phase.iter().find(|(p, _)| (p - target).abs() < 1e-9).map(|(_, r)| r);
    if let Some(rows) = find(-PI / 3.0) {
        outcome.checks.extend(concentration_checks(rows));
    }
    if let Some(row) = find(0.0).and_then(|rows| rows.iter().find(|r| r.rho == 0.0)) {
        outcome.checks.push(uniformity_check(row));
    }

    outcome.files.push(table.write(out, "model_torque.csv")?);
    Ok(outcome)
}

fn joint_rank(name: &str) -> usize {
    BodyJoint::parse(name).map_or(usize::MAX, |j| j.index())
}

/// Checks for the traveling wave: lower-joint torque rises with rho and
/// ends well above the other joints.
pub fn concentration_checks(rows: &[TorqueRatioRow]) -> Vec<Check> {
    let (u, l, t) = (BodyJoint::Upper.index(), BodyJoint::Lower.index(), BodyJoint::Tail.index());
    let lower: Vec<f64> = rows.iter().map(|r| r.median_abs_torque[l]).collect();
    let rising = lower.windows(2).all(|w| w[1] > w[0]);
    let mut checks = vec![Check::new(
        "lower-joint torque rises with rho at phi = -pi/3",
        rising,
        format!("lower medians {}", lower.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")),
    )];
    if let Some(r) = rows.iter().find(|r| r.rho == 1.0) {
        let others = 0.5 * (r.median_abs_torque[u] + r.median_abs_torque[t]);
        let ratio = r.median_abs_torque[l] / others;
        checks.push(Check::new(
            "lower-joint torque concentration at rho = 1, phi = -pi/3",
            ratio >= CONCENTRATION_RATIO,
            format!("lower / mean(upper, tail) = {ratio:.3} (need >= {CONCENTRATION_RATIO})"),
        ));
    }
    checks
}

/// Check for the standing wave on rigid ground: all three joints alike.
pub fn uniformity_check(row: &TorqueRatioRow) -> Check {
    let v = row.median_abs_torque;
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = hi / lo;
    Check::new(
        "joint torques alike at rho = 0, phi = 0",
        spread <= UNIFORM_SPREAD,
        format!(
            "upper/lower/tail = {:.4}/{:.4}/{:.4}, max/min = {spread:.3} (need <= {UNIFORM_SPREAD})",
            v[0], v[1], v[2]
        ),
    )
}
