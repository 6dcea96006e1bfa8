//! Experiment configuration: one TOML file with a section per module.
//!
//! Every field has a default, so an empty file (or no file) runs the
//! standard protocol. Unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use terradapt::control::ControllerParams;
use terradapt::gait::{GaitParams, MAX_DEPTH_MM};
use terradapt::percept::{BodyJoint, DepthClass, LoadPipeline};
use terradapt::terra::{GroundModel, Integrator, RobotModel, SimConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("`{key}` is empty: the experiment has nothing to run")]
    EmptyGrid { key: String },

    #[error("the {experiment} experiment adds sensor noise, so `seed` is required (set it in the config or pass --seed)")]
    MissingSeed { experiment: Experiment },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sweep,
    ModelTorque,
    Classify,
    Closedloop,
    Transition,
    Calibrate,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sweep,
        Experiment::ModelTorque,
        Experiment::Classify,
        Experiment::Closedloop,
        Experiment::Transition,
        Experiment::Calibrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::ModelTorque => "model-torque",
            Experiment::Classify => "classify",
            Experiment::Closedloop => "closedloop",
            Experiment::Transition => "transition",
            Experiment::Calibrate => "calibrate",
        }
    }

    /// Whether results depend on the sensor-noise generator.
    pub fn is_noisy(self) -> bool {
        self != Experiment::ModelTorque
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The seven phases named in the sweep figures, 0 down to -pi/2.
pub fn default_phase_grid() -> Vec<f64> {
    (0..7).map(|i| -(i as f64) * PI / 12.0).collect()
}

fn default_depths() -> Vec<f64> {
    vec![0.0, 20.0, 40.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub depths_mm: Vec<f64>,
    pub phases: Vec<f64>,
    pub trials: usize,
    pub cycles: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            depths_mm: default_depths(),
            phases: default_phase_grid(),
            trials: 3,
            cycles: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelTorqueConfig {
    pub phases: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl Default for ModelTorqueConfig {
    fn default() -> Self {
        Self {
            phases: vec![0.0, -PI / 3.0],
            ratios: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub depths_mm: Vec<f64>,
    pub phases: Vec<f64>,
    pub trials: usize,
    pub cycles: usize,
    pub k: usize,
    /// Share of samples used for training; the rest are held out.
    pub train_fraction: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            depths_mm: default_depths(),
            phases: default_phase_grid(),
            trials: 10,
            cycles: 5,
            k: 6,
            train_fraction: 0.5,
        }
    }
}

/// How the load set point is measured before any feedback run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Body phase offset of the calibration gait.
    pub phase: f64,
    /// Joint whose load drives the controller.
    pub joint: BodyJoint,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            phase: 0.0,
            joint: BodyJoint::Lower,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedLoopConfig {
    pub depths_mm: Vec<f64>,
    pub initial_phases: Vec<f64>,
    pub cycles: usize,
    /// Put the body back at the start every this many cycles.
    pub reset_pose_every: Option<usize>,
    /// Allowed distance between the final phase and the depth's optimum.
    pub tolerance: f64,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            depths_mm: vec![0.0, 40.0],
            initial_phases: vec![0.0, -PI / 3.0],
            cycles: 24,
            reset_pose_every: None,
            tolerance: PI / 12.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionConfig {
    /// Length of flat ground before the slope starts, m.
    pub flat_length: f64,
    pub ramp_length: f64,
    pub depth_mm: f64,
    pub cycles: usize,
    pub adaptive_initial_phase: f64,
    pub fixed_phases: Vec<f64>,
    /// First and last cycle (1-based, inclusive) of the Start window.
    pub start_window: [usize; 2],
    pub end_window: [usize; 2],
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self {
            flat_length: 0.6,
            ramp_length: 0.6,
            depth_mm: 40.0,
            cycles: 25,
            adaptive_initial_phase: 0.0,
            fixed_phases: vec![0.0, -PI / 3.0],
            start_window: [1, 3],
            end_window: [22, 25],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every trial derives its own stream from it.
    pub seed: Option<u64>,
    pub steps_per_cycle: usize,
    pub integrator: Integrator,
    /// Worker threads for independent trials; 0 uses every core.
    pub threads: usize,
    pub robot: RobotModel,
    pub ground: GroundModel,
    pub sensing: LoadPipeline,
    /// Base gait; experiments override `body_phase` per run.
    pub gait: GaitParams,
    pub controller: ControllerParams,
    pub calibration: CalibrationConfig,
    pub sweep: SweepConfig,
    pub model_torque: ModelTorqueConfig,
    pub classify: ClassifyConfig,
    pub closedloop: ClosedLoopConfig,
    pub transition: TransitionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            steps_per_cycle: 100,
            integrator: Integrator::default(),
            threads: 0,
            robot: RobotModel::default(),
            ground: GroundModel::default(),
            sensing: LoadPipeline::default(),
            gait: GaitParams::default(),
            controller: ControllerParams::default(),
            calibration: CalibrationConfig::default(),
            sweep: SweepConfig::default(),
            model_torque: ModelTorqueConfig::default(),
            classify: ClassifyConfig::default(),
            closedloop: ClosedLoopConfig::default(),
            transition: TransitionConfig::default(),
        }
    }
}

fn check_depths(key: &str, depths: &[f64]) -> Result<(), ConfigError> {
    if depths.is_empty() {
        return Err(ConfigError::EmptyGrid { key: key.into() });
    }
    match depths.iter().find(|d| !(0.0..=MAX_DEPTH_MM).contains(*d)) {
        Some(d) => Err(invalid(key, format!("depth {d} mm outside [0, {MAX_DEPTH_MM}]"))),
        None => Ok(()),
    }
}

fn check_phases(key: &str, phases: &[f64]) -> Result<(), ConfigError> {
    if phases.is_empty() {
        return Err(ConfigError::EmptyGrid { key: key.into() });
    }
    match phases.iter().find(|p| !(-PI..=PI).contains(*p)) {
        Some(p) => Err(invalid(key, format!("phase {p} rad outside [-pi, pi]"))),
        None => Ok(()),
    }
}

fn check_positive(key: &str, n: usize) -> Result<(), ConfigError> {
    if n == 0 {
        return Err(invalid(key, "must be at least 1"));
    }
    Ok(())
}

fn check_window(key: &str, w: [usize; 2], cycles: usize) -> Result<(), ConfigError> {
    if !(1 <= w[0] && w[0] <= w[1] && w[1] <= cycles) {
        return Err(invalid(key, format!("window {w:?} must satisfy 1 <= first <= last <= {cycles}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Simulator settings shared by every experiment.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            robot: self.robot.clone(),
            ground: self.ground,
            sensing: self.sensing,
            steps_per_cycle: self.steps_per_cycle,
            integrator: self.integrator,
            ..SimConfig::default()
        }
    }

    pub fn gait_with_phase(&self, phase: f64) -> GaitParams {
        GaitParams {
            body_phase: phase,
            ..self.gait
        }
    }

    pub fn require_seed(&self, experiment: Experiment) -> Result<u64, ConfigError> {
        match (self.seed, experiment.is_noisy()) {
            (Some(s), _) => Ok(s),
            (None, false) => Ok(0),
            (None, true) => Err(ConfigError::MissingSeed { experiment }),
        }
    }

    /// Checks the shared sections and the section `experiment` reads.
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        self.require_seed(experiment)?;
        if self.steps_per_cycle < 4 {
            return Err(invalid("steps_per_cycle", "must be at least 4"));
        }
        self.robot.validate().map_err(|e| invalid("robot", e))?;
        self.ground.validate().map_err(|e| invalid("ground", e))?;
        self.sensing.validate().map_err(|e| invalid("sensing", e))?;
        self.gait.validate().map_err(|e| invalid("gait", e))?;

        match experiment {
            Experiment::Sweep => {
                let s = &self.sweep;
                check_depths("sweep.depths_mm", &s.depths_mm)?;
                check_phases("sweep.phases", &s.phases)?;
                check_positive("sweep.trials", s.trials)?;
                check_positive("sweep.cycles", s.cycles)?;
            }
            Experiment::ModelTorque => {
                let m = &self.model_torque;
                check_phases("model_torque.phases", &m.phases)?;
                if m.ratios.is_empty() {
                    return Err(ConfigError::EmptyGrid {
                        key: "model_torque.ratios".into(),
                    });
                }
                if let Some(r) = m.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                    return Err(invalid("model_torque.ratios", format!("ratio {r} outside [0, 1]")));
                }
            }
            Experiment::Classify => {
                let c = &self.classify;
                check_depths("classify.depths_mm", &c.depths_mm)?;
                if let Some(d) = c.depths_mm.iter().find(|d| DepthClass::from_depth_mm(**d).is_none()) {
                    return Err(invalid("classify.depths_mm", format!("{d} mm is not a class depth (0, 20 or 40)")));
                }
                check_phases("classify.phases", &c.phases)?;
                check_positive("classify.trials", c.trials)?;
                check_positive("classify.cycles", c.cycles)?;
                check_positive("classify.k", c.k)?;
                if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
                    return Err(invalid("classify.train_fraction", "must lie in (0, 1)"));
                }
            }
            Experiment::Closedloop => {
                self.validate_feedback()?;
                let c = &self.closedloop;
                check_depths("closedloop.depths_mm", &c.depths_mm)?;
                check_phases("closedloop.initial_phases", &c.initial_phases)?;
                let p = &self.controller;
                if let Some(phi) = c.initial_phases.iter().find(|x| !(p.phi_min..=p.phi_max).contains(*x)) {
                    return Err(invalid(
                        "closedloop.initial_phases",
                        format!("{phi} outside the controller clamp [{}, {}]", p.phi_min, p.phi_max),
                    ));
                }
                check_positive("closedloop.cycles", c.cycles)?;
                if c.reset_pose_every == Some(0) {
                    return Err(invalid("closedloop.reset_pose_every", "must be at least 1"));
                }
                if !(c.tolerance > 0.0) {
                    return Err(invalid("closedloop.tolerance", "must be positive"));
                }
            }
            Experiment::Transition => {
                self.validate_feedback()?;
                let t = &self.transition;
                if !(t.flat_length >= 0.0 && t.flat_length.is_finite()) {
                    return Err(invalid("transition.flat_length", "must be a non-negative length"));
                }
                if !(t.ramp_length > 0.0 && t.ramp_length.is_finite()) {
                    return Err(invalid("transition.ramp_length", "must be positive"));
                }
                if !(t.depth_mm > 0.0 && t.depth_mm <= MAX_DEPTH_MM) {
                    return Err(invalid("transition.depth_mm", format!("must lie in (0, {MAX_DEPTH_MM}]")));
                }
                check_positive("transition.cycles", t.cycles)?;
                let p = &self.controller;
                if !(p.phi_min..=p.phi_max).contains(&t.adaptive_initial_phase) {
                    return Err(invalid("transition.adaptive_initial_phase", "outside the controller clamp"));
                }
                check_phases("transition.fixed_phases", &t.fixed_phases)?;
                check_window("transition.start_window", t.start_window, t.cycles)?;
                check_window("transition.end_window", t.end_window, t.cycles)?;
            }
            Experiment::Calibrate => self.validate_feedback()?,
        }
        Ok(())
    }

    fn validate_feedback(&self) -> Result<(), ConfigError> {
        self.controller.validate().map_err(|e| invalid("controller", e))?;
        if let Some(t) = self.controller.tau0 {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid("controller.tau0", "must be a positive load percentage"));
            }
        }
        let cal = &self.calibration;
        if !(-PI..=PI).contains(&cal.phase) {
            return Err(invalid("calibration.phase", "outside [-pi, pi]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_protocol() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig {
            seed: Some(3),
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[sweep]\ntrails = 3\n").is_err());
    }

    #[test]
    fn messages_name_the_offending_key() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[sweep]\ndepths_mm = [0.0, 55.0]\n").unwrap();
        let msg = cfg.validate(Experiment::Sweep).unwrap_err().to_string();
        assert!(msg.contains("sweep.depths_mm"), "{msg}");

        let cfg = ExperimentConfig::from_toml("seed = 1\n[sensing]\nalpha = 1.5\n").unwrap();
        let msg = cfg.validate(Experiment::Classify).unwrap_err().to_string();
        assert!(msg.contains("`sensing`") && msg.contains("alpha"), "{msg}");

        let cfg = ExperimentConfig::from_toml("[model_torque]\nratios = [0.0, 1.2]\n").unwrap();
        let msg = cfg.validate(Experiment::ModelTorque).unwrap_err().to_string();
        assert!(msg.contains("model_torque.ratios"), "{msg}");
    }

    #[test]
    fn empty_grid_is_a_usage_error() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[sweep]\nphases = []\n").unwrap();
        assert!(matches!(cfg.validate(Experiment::Sweep), Err(ConfigError::EmptyGrid { .. })));
    }

    #[test]
    fn noisy_experiments_need_a_seed() {
        let cfg = ExperimentConfig::default();
        for e in Experiment::ALL {
            assert_eq!(cfg.validate(e).is_ok(), !e.is_noisy(), "{e}");
        }
    }

    #[test]
    fn classify_rejects_depths_between_classes() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[classify]\ndepths_mm = [0.0, 30.0]\n").unwrap();
        let msg = cfg.validate(Experiment::Classify).unwrap_err().to_string();
        assert!(msg.contains("classify.depths_mm"), "{msg}");
    }

    #[test]
    fn initial_phase_must_respect_the_clamp() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[closedloop]\ninitial_phases = [0.3]\n").unwrap();
        let msg = cfg.validate(Experiment::Closedloop).unwrap_err().to_string();
        assert!(msg.contains("closedloop.initial_phases"), "{msg}");
    }
}
