//! Per-cycle linear body-phase feedback.
//!
//! `phi(n+1) = phi(n) + b1 (tau_m(n) - tau0) - k (phi(n) - phi0)`, clamped to
//! the commanded gait range. With `b1 < 0`, loads above `tau0` (deeper media)
//! push the gait toward a traveling wave.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gait::{GaitParams, BODY_JOINTS, MAX_DEPTH_MM};
use crate::percept::{BodyJoint, LoadSeries};
use crate::seed::derive_seed;
use crate::terra::{simulate_trial, GaitSource, PhaseController, SimConfig, TerrainProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Load gain, radians per load percent.
    pub b1: f64,
    /// Pull toward `phi0`, per cycle.
    pub k: f64,
    /// Load set point, percent; set by calibration.
    pub tau0: Option<f64>,
    pub phi0: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            b1: -0.004,
            k: 0.005,
            tau0: None,
            phi0: -PI / 6.0,
            phi_min: -PI / 2.0,
            phi_max: 0.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(invalid(format!("controller k = {} outside (0, 1)", self.k)));
        }
        if !self.b1.is_finite() {
            return Err(invalid("controller b1 must be finite"));
        }
        if !(self.phi_min < self.phi_max) {
            return Err(invalid("phase clamp must satisfy phi_min < phi_max"));
        }
        if !(self.phi_min..=self.phi_max).contains(&self.phi0) {
            return Err(invalid("phi0 must lie inside the phase clamp"));
        }
        Ok(())
    }

    pub fn calibrated(self, tau0: f64) -> Self {
        Self {
            tau0: Some(tau0),
            ..self
        }
    }

    pub fn clamp(&self, phi: f64) -> f64 {
        phi.clamp(self.phi_min, self.phi_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phi: f64,
    pub cycles: usize,
    /// (phase used, median load observed) per completed cycle.
    pub history: Vec<(f64, f64)>,
}

impl ControllerState {
    pub fn new(phi: f64) -> Self {
        Self {
            phi,
            cycles: 0,
            history: Vec::new(),
        }
    }
}

/// Applies one controller update and returns the new phase.
pub fn update_phase(s: &mut ControllerState, tau_m: f64, p: &ControllerParams) -> Result<f64> {
    let tau0 = p.tau0.ok_or(Error::Uncalibrated)?;
    let next = p.clamp(s.phi + p.b1 * (tau_m - tau0) - p.k * (s.phi - p.phi0));
    s.history.push((s.phi, tau_m));
    s.cycles += 1;
    s.phi = next;
    Ok(next)
}

/// Steady-state phase for a constant median load.
pub fn fixed_point(tau_m: f64, p: &ControllerParams) -> Result<f64> {
    if p.k == 0.0 {
        return Err(invalid("k = 0 has no fixed point"));
    }
    let tau0 = p.tau0.ok_or(Error::Uncalibrated)?;
    Ok(p.clamp(p.phi0 + p.b1 / p.k * (tau_m - tau0)))
}

/// Load set point halfway between the suspended and deepest-terrain loads.
pub fn calibrate_tau0(air_load: f64, max_terrain_load: f64) -> Result<f64> {
    if !(air_load.is_finite() && max_terrain_load.is_finite()) {
        return Err(Error::Calibration("calibration loads must be finite".into()));
    }
    if air_load >= max_terrain_load {
        return Err(Error::Calibration(format!(
            "suspended load {air_load} is not below terrain load {max_terrain_load}"
        )));
    }
    Ok(0.5 * (air_load + max_terrain_load))
}

/// Outcome of the two calibration trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub air_load: f64,
    pub max_terrain_load: f64,
    pub tau0: f64,
}

/// Cycles per calibration trial.
pub const CALIBRATION_CYCLES: usize = 3;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Measures the suspended and deepest-terrain loads on `joint` under `gait`
/// and places `tau0` halfway between them.
///
/// A suspended body meets no ground, so every joint torque is zero; that
/// series still goes through the full sensing pipeline. The terrain trial
/// runs at the deepest modeled bed.
pub fn calibrate(cfg: &SimConfig, gait: &GaitParams, joint: BodyJoint, seed: u64) -> Result<Calibration> {
    let steps = cfg.steps_per_cycle;
    let air = LoadSeries::uniform(joint, vec![0.0; CALIBRATION_CYCLES * steps], steps)?;
    let air_load = mean(&cfg.sensing.cycle_medians(&air, derive_seed(seed, 0))?);

    let deep = TerrainProfile::constant(MAX_DEPTH_MM)?;
    let rec = simulate_trial(cfg, GaitSource::Fixed(*gait), &deep, CALIBRATION_CYCLES, derive_seed(seed, 1))?;
    let loads: Vec<f64> = rec.cycles.iter().map(|c| c.median_load[joint.index()]).collect();
    let max_terrain_load = mean(&loads);

    Ok(Calibration {
        air_load,
        max_terrain_load,
        tau0: calibrate_tau0(air_load, max_terrain_load)?,
    })
}

/// Feedback controller driven by one joint's median load.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackController {
    pub params: ControllerParams,
    pub state: ControllerState,
    pub joint: BodyJoint,
}

impl FeedbackController {
    pub fn new(params: ControllerParams, initial_phase: f64) -> Result<Self> {
        params.validate()?;
        params.tau0.ok_or(Error::Uncalibrated)?;
        Ok(Self {
            state: ControllerState::new(params.clamp(initial_phase)),
            params,
            joint: BodyJoint::Lower,
        })
    }
}

impl PhaseController for FeedbackController {
    fn next_phase(&mut self, _cycle: usize, median_load: &[f64; BODY_JOINTS], _phase: f64) -> Result<f64> {
        update_phase(&mut self.state, median_load[self.joint.index()], &self.params)
    }
}
