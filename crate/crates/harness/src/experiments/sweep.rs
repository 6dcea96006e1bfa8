use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use terradapt::gait::optimal_phase_for_depth;
use terradapt::seed::derive_seed;
use terradapt::terra::{simulate_trial, GaitSource, TerrainProfile, TrialRecord};

use super::{mean, par_map, worker_count};
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, text, Check, Outcome, Table};

/// One grid step of the default phase grid.
const GRID_STEP: f64 = PI / 12.0;

struct Cell {
    index: usize,
    depth: f64,
    phase: f64,
}

/// Speed over a depth x phase grid, several trials per cell.
///
/// A cell whose trial fails is reported in `sweep_cells.csv` and in the
/// outcome's failures; the other cells still run.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.require_seed(Experiment::Sweep)?;
    let s = &cfg.sweep;
    let sim = cfg.sim_config();
    let mut cells = Vec::new();
    for &depth in &s.depths_mm {
        for &phase in &s.phases {
            cells.push(Cell {
                index: cells.len(),
                depth,
                phase,
            });
        }
    }

    let results = par_map(&cells, worker_count(cfg, cells.len()), |c| {
        let terrain = TerrainProfile::constant(c.depth)?;
        (0..s.trials)
            .map(|trial| {
                let trial_seed = derive_seed(derive_seed(seed, c.index as u64), trial as u64);
                simulate_trial(&sim, GaitSource::Fixed(cfg.gait_with_phase(c.phase)), &terrain, s.cycles, trial_seed)
            })
            .collect::<terradapt::Result<Vec<TrialRecord>>>()
    });

    let mut outcome = Outcome::new(Experiment::Sweep);
    let mut trials = Table::new(&["depth_mm", "phi_rad", "trial", "cycle", "speed_blc"]);
    let mut summary = Table::new(&["depth_mm", "phi_rad", "mean_speed_blc", "status"]);
    let mut means: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for (c, res) in cells.iter().zip(results) {
        match res {
            Ok(recs) => {
                let mut speeds = Vec::new();
                for (trial, rec) in recs.iter().enumerate() {
                    outcome.hygiene.record(rec);
                    for cy in &rec.cycles {
                        speeds.push(cy.speed_blc);
                        trials.push(vec![
                            num(c.depth),
                            num(c.phase),
                            trial.to_string(),
                            cy.cycle.to_string(),
                            num(cy.speed_blc),
                        ]);
                    }
                }
                let m = mean(&speeds);
                summary.push(vec![num(c.depth), num(c.phase), num(m), "ok".into()]);
                means.push((c.depth, c.phase, Some(m)));
            }
            Err(e) => {
                let msg = format!("depth {} mm, phi {:.4}: {e}", c.depth, c.phase);
                summary.push(vec![num(c.depth), num(c.phase), String::new(), text(&format!("error: {e}"))]);
                outcome.failures.push(msg);
                means.push((c.depth, c.phase, None));
            }
        }
    }

    let mut argmax = Table::new(&["depth_mm", "argmax_phi_rad", "argmax_speed_blc", "optimal_phi_rad", "grid_steps_off"]);
    let mut depths = s.depths_mm.clone();
    depths.sort_by(f64::total_cmp);
    depths.dedup();
    for d in depths {
        let best = means
            .iter()
            .filter(|(depth, _, m)| *depth == d && m.is_some())
            .max_by(|a, b| a.2.unwrap().total_cmp(&b.2.unwrap()));
        let Some(&(_, phi, Some(speed))) = best else { continue };
        let optimum = optimal_phase_for_depth(d)?;
        let steps_off = (phi - optimum).abs() / GRID_STEP;
        argmax.push(vec![num(d), num(phi), num(speed), num(optimum), num(steps_off)]);
        outcome.checks.push(Check::new(
            format!("sweep argmax at {d} mm"),
            steps_off <= 1.0 + 1e-9,
            format!("best phi {phi:.4} rad vs optimum {optimum:.4} rad ({steps_off:.2} grid steps)"),
        ));
    }

    sort_rows(&mut trials.rows, 2);
    sort_rows(&mut summary.rows, 2);
    outcome.files.push(trials.write(out, "sweep.csv")?);
    outcome.files.push(summary.write(out, "sweep_cells.csv")?);
    outcome.files.push(argmax.write(out, "sweep_argmax.csv")?);
    Ok(outcome)
}

/// Sorts rows by their leading numeric key columns, ascending.
pub(crate) fn sort_rows(rows: &mut [Vec<String>], key_columns: usize) {
    let key = |r: &Vec<String>| -> Vec<f64> { r[..key_columns].iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect() };
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}
