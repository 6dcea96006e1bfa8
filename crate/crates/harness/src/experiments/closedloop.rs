use std::path::Path;

use anyhow::Result;
use terradapt::control::FeedbackController;
use terradapt::gait::optimal_phase_for_depth;
use terradapt::seed::derive_seed;
use terradapt::terra::{simulate_trial, GaitSource, SimConfig, TerrainProfile};

use super::{par_map, resolve_tau0, worker_count};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, Check, Outcome, Table};

struct Case {
    index: usize,
    depth: f64,
    initial: f64,
}

/// Feedback runs on constant-depth beds from each initial phase.
///
/// The trial simply continues from cycle to cycle. `reset_pose_every` puts
/// the body back at the start, as when a hardware run is restarted from the
/// edge of the arena with the last phase.
pub fn run_closedloop(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.require_seed(Experiment::Closedloop)?;
    let c = &cfg.closedloop;
    let tau0 = resolve_tau0(cfg, seed)?;
    let params = cfg.controller.calibrated(tau0);
    let sim = SimConfig {
        reset_pose_every: c.reset_pose_every,
        ..cfg.sim_config()
    };
    let mut cases = Vec::new();
    for &depth in &c.depths_mm {
        for &initial in &c.initial_phases {
            cases.push(Case {
                index: cases.len(),
                depth,
                initial,
            });
        }
    }
    let runs = par_map(&cases, worker_count(cfg, cases.len()), |case| {
        let mut ctrl = FeedbackController::new(params, case.initial)?;
        ctrl.joint = cfg.calibration.joint;
        let terrain = TerrainProfile::constant(case.depth)?;
        let gait = GaitSource::Adaptive {
            initial: cfg.gait_with_phase(ctrl.state.phi),
            controller: &mut ctrl,
        };
        simulate_trial(&sim, gait, &terrain, c.cycles, derive_seed(seed, case.index as u64))
    });

    let mut outcome = Outcome::new(Experiment::Closedloop);
    outcome.tau0 = Some(tau0);
    let joint = cfg.calibration.joint.index();
    let mut series = Table::new(&["depth_mm", "phi_init_rad", "cycle", "phi_rad", "tau_m_pct", "speed_blc"]);
    let mut summary = Table::new(&[
        "depth_mm",
        "phi_init_rad",
        "final_phi_rad",
        "target_phi_rad",
        "final_error_rad",
        "max_error_rad",
        "tau0_pct",
    ]);
    for (case, res) in cases.iter().zip(runs) {
        let rec = match res {
            Ok(r) => r,
            Err(e) => {
                outcome
                    .failures
                    .push(format!("depth {} mm from phi {:.4}: {e}", case.depth, case.initial));
                continue;
            }
        };
        outcome.hygiene.record(&rec);
        for cy in &rec.cycles {
            series.push(vec![
                num(case.depth),
                num(case.initial),
                cy.cycle.to_string(),
                num(cy.phase),
                num(cy.median_load[joint]),
                num(cy.speed_blc),
            ]);
        }
        let target = optimal_phase_for_depth(case.depth)?;
        let final_error = (rec.final_phase - target).abs();
        let max_error = rec
            .cycles
            .iter()
            .map(|cy| cy.phase)
            .chain([rec.final_phase])
            .map(|p| (p - target).abs())
            .fold(0.0, f64::max);
        summary.push(vec![
            num(case.depth),
            num(case.initial),
            num(rec.final_phase),
            num(target),
            num(final_error),
            num(max_error),
            num(tau0),
        ]);
        outcome.checks.push(Check::new(
            format!("closed loop at {} mm from phi {:.4}", case.depth, case.initial),
            final_error <= c.tolerance,
            format!("final phi {:.4} vs target {target:.4}, error {final_error:.4} (tolerance {:.4})", rec.final_phase, c.tolerance),
        ));
        if (case.initial - target).abs() <= c.tolerance {
            outcome.checks.push(Check::new(
                format!("closed loop at {} mm stays near phi {:.4}", case.depth, case.initial),
                max_error <= c.tolerance,
                format!("largest error over the run {max_error:.4}"),
            ));
        }
    }
    super::sweep::sort_rows(&mut series.rows, 3);
    super::sweep::sort_rows(&mut summary.rows, 2);
    outcome.files.push(series.write(out, "closedloop.csv")?);
    outcome.files.push(summary.write(out, "closedloop_summary.csv")?);
    Ok(outcome)
}
