use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use terradapt::control::FeedbackController;
use terradapt::seed::derive_seed;
use terradapt::terra::{simulate_trial, GaitSource, TerrainProfile};

use super::{mean, par_map, resolve_tau0, worker_count};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, Check, Outcome, Table};

/// A rival mode must be at least this much slower than adaptive in its bad
/// window.
pub const SLOWDOWN: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Adaptive,
    Fixed(f64),
}

impl Mode {
    fn label(self) -> String {
        match self {
            Mode::Adaptive => "adaptive".into(),
            Mode::Fixed(p) => format!("fixed_{}", num(p)),
        }
    }
}

struct Segments {
    mode: Mode,
    start: f64,
    end: f64,
    overall: f64,
    end_phase: f64,
}

/// Adaptive and fixed gaits crossing flat ground onto a ramp into deep beads.
pub fn run_transition(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.require_seed(Experiment::Transition)?;
    let t = &cfg.transition;
    let tau0 = resolve_tau0(cfg, seed)?;
    let params = cfg.controller.calibrated(tau0);
    let sim = cfg.sim_config();
    let terrain = TerrainProfile::ramp(t.flat_length, t.ramp_length, t.depth_mm)?;
    let modes: Vec<Mode> = std::iter::once(Mode::Adaptive)
        .chain(t.fixed_phases.iter().map(|&p| Mode::Fixed(p)))
        .collect();
    let indexed: Vec<(usize, Mode)> = modes.iter().copied().enumerate().collect();
    let runs = par_map(&indexed, worker_count(cfg, modes.len()), |&(i, mode)| {
        let trial_seed = derive_seed(seed, i as u64);
        match mode {
            Mode::Fixed(p) => simulate_trial(&sim, GaitSource::Fixed(cfg.gait_with_phase(p)), &terrain, t.cycles, trial_seed),
            Mode::Adaptive => {
                let mut ctrl = FeedbackController::new(params, t.adaptive_initial_phase)?;
                ctrl.joint = cfg.calibration.joint;
                let gait = GaitSource::Adaptive {
                    initial: cfg.gait_with_phase(ctrl.state.phi),
                    controller: &mut ctrl,
                };
                simulate_trial(&sim, gait, &terrain, t.cycles, trial_seed)
            }
        }
    });

    let mut outcome = Outcome::new(Experiment::Transition);
    outcome.tau0 = Some(tau0);
    let joint = cfg.calibration.joint.index();
    let mut series = Table::new(&["cycle", "mode", "phi_rad", "tau_m_pct", "speed_blc", "x_position_m"]);
    let mut segments = Vec::new();
    let window = |w: [usize; 2], v: &[f64]| mean(&v[w[0] - 1..w[1]]);
    for (&mode, res) in modes.iter().zip(runs) {
        let rec = match res {
            Ok(r) => r,
            Err(e) => {
                outcome.failures.push(format!("{}: {e}", mode.label()));
                continue;
            }
        };
        outcome.hygiene.record(&rec);
        for cy in &rec.cycles {
            series.push(vec![
                (cy.cycle + 1).to_string(),
                mode.label(),
                num(cy.phase),
                num(cy.median_load[joint]),
                num(cy.speed_blc),
                num(cy.end_x),
            ]);
        }
        let speeds: Vec<f64> = rec.cycles.iter().map(|c| c.speed_blc).collect();
        let phases: Vec<f64> = rec.cycles.iter().map(|c| c.phase).collect();
        segments.push(Segments {
            mode,
            start: window(t.start_window, &speeds),
            end: window(t.end_window, &speeds),
            overall: mean(&speeds),
            end_phase: window(t.end_window, &phases),
        });
    }

    let mut summary = Table::new(&["mode", "start_mean_blc", "end_mean_blc", "overall_mean_blc", "end_mean_phi_rad"]);
    for s in &segments {
        summary.push(vec![s.mode.label(), num(s.start), num(s.end), num(s.overall), num(s.end_phase)]);
    }
    outcome.checks.extend(transition_checks(&segments));

    outcome.files.push(series.write(out, "transition.csv")?);
    outcome.files.push(summary.write(out, "transition_summary.csv")?);
    Ok(outcome)
}

fn transition_checks(segments: &[Segments]) -> Vec<Check> {
    let Some(adaptive) = segments.iter().find(|s| s.mode == Mode::Adaptive) else {
        return Vec::new();
    };
    let mut checks = Vec::new();
    let best_rival = segments
        .iter()
        .filter(|s| s.mode != Mode::Adaptive)
        .map(|s| s.overall)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "adaptive has the highest overall speed",
        adaptive.overall > best_rival,
        format!("adaptive {:.4} vs best fixed {best_rival:.4} BL/cycle", adaptive.overall),
    ));
    let fixed_at = |p: f64| {
        segments
            .iter()
            .find(|s| matches!(s.mode, Mode::Fixed(q) if (q - p).abs() < 1e-9))
    };
    if let Some(s) = fixed_at(0.0) {
        checks.push(Check::new(
            "fixed phi = 0 is slower at the end",
            s.end <= SLOWDOWN * adaptive.end,
            format!("end window {:.4} vs adaptive {:.4} (ratio {:.3})", s.end, adaptive.end, s.end / adaptive.end),
        ));
    }
    if let Some(s) = fixed_at(-PI / 3.0) {
        checks.push(Check::new(
            "fixed phi = -pi/3 is slower at the start",
            s.start <= SLOWDOWN * adaptive.start,
            format!("start window {:.4} vs adaptive {:.4} (ratio {:.3})", s.start, adaptive.start, s.start / adaptive.start),
        ));
    }
    checks.push(Check::new(
        "adaptive phase heads for a traveling wave",
        adaptive.end_phase < -PI / 6.0,
        format!("end-window mean phi {:.4} rad", adaptive.end_phase),
    ));
    checks
}
