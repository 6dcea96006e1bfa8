//! The six experiments. Each writes its CSVs into the output directory and
//! returns an [`Outcome`]; the caller writes the manifest.

mod calibrate;
mod classify;
mod closedloop;
mod sweep;
mod torque;
mod transition;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use terradapt::control::calibrate as measure_calibration;
use terradapt::seed::derive_seed;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{write_manifest, Outcome};

pub use calibrate::run_calibrate;
pub use classify::run_classifier_eval;
pub use closedloop::run_closedloop;
pub use sweep::run_sweep;
pub use torque::run_model_torque;
pub use transition::run_transition;

/// Seed stream reserved for calibration trials, far from any cell index.
const CALIBRATION_STREAM: u64 = 1 << 40;

/// Validates `cfg`, creates `out`, runs `experiment` and writes the manifest.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    cfg.validate(experiment)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outcome = match experiment {
        Experiment::Sweep => run_sweep(cfg, out)?,
        Experiment::ModelTorque => run_model_torque(cfg, out)?,
        Experiment::Classify => run_classifier_eval(cfg, out)?,
        Experiment::Closedloop => run_closedloop(cfg, out)?,
        Experiment::Transition => run_transition(cfg, out)?,
        Experiment::Calibrate => run_calibrate(cfg, out)?,
    };
    let manifest = write_manifest(out, cfg, &outcome)?;
    outcome.files.push(manifest);
    Ok(outcome)
}

/// The load set point: the configured value if there is one, otherwise a
/// calibration run on the configured joint and gait.
pub(crate) fn resolve_tau0(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    if let Some(t) = cfg.controller.tau0 {
        return Ok(t);
    }
    let cal = measure_calibration(
        &cfg.sim_config(),
        &cfg.gait_with_phase(cfg.calibration.phase),
        cfg.calibration.joint,
        derive_seed(seed, CALIBRATION_STREAM),
    )
    .context("calibrating tau0")?;
    Ok(cal.tau0)
}

fn worker_count(cfg: &ExperimentConfig, jobs: usize) -> usize {
    let wanted = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    wanted.clamp(1, jobs.max(1))
}

/// Maps `f` over `items` on up to `threads` workers. Results come back in
/// input order whatever the scheduling, so reports never depend on it.
pub(crate) fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
