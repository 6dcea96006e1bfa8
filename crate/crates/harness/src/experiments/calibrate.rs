use std::path::Path;

use anyhow::Result;
use terradapt::control::calibrate;
use terradapt::percept::BodyJoint;
use terradapt::seed::derive_seed;

use super::CALIBRATION_STREAM;
use crate::config::{Experiment, ExperimentConfig};
use crate::report::{num, Outcome, Table};

/// Suspended and deep-bed loads for every joint, and the set point between
/// them. The manifest's tau0 is the configured controller joint's.
pub fn run_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.require_seed(Experiment::Calibrate)?;
    let sim = cfg.sim_config();
    let gait = cfg.gait_with_phase(cfg.calibration.phase);
    let mut outcome = Outcome::new(Experiment::Calibrate);
    let mut table = Table::new(&["joint", "air_load_pct", "max_terrain_load_pct", "tau0_pct"]);
    for joint in BodyJoint::ALL {
        match calibrate(&sim, &gait, joint, derive_seed(seed, CALIBRATION_STREAM)) {
            Ok(cal) => {
                table.push(vec![joint.name().into(), num(cal.air_load), num(cal.max_terrain_load), num(cal.tau0)]);
                if joint == cfg.calibration.joint {
                    outcome.tau0 = Some(cal.tau0);
                }
            }
            Err(e) => outcome.failures.push(format!("{} joint: {e}", joint.name())),
        }
    }
    outcome.files.push(table.write(out, "calibration.csv")?);
    Ok(outcome)
}
