//! Time stepping and whole trials.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::body::{
    belly_stations, build_contacts, BlendSource, BodyShape, BodyState, Pose, Twist,
};
use super::ground::{element_reaction_force, GroundModel};
use super::robot::{RobotModel, SEGMENTS};
use super::solver::{solve_contacts, SolverSettings};
use super::terrain::TerrainProfile;
use super::torque::{compute_joint_torques, ElementForce};
use crate::error::{invalid, Error, Result};
use crate::gait::{BodyWave, GaitCommand, GaitParams, BODY_JOINTS};
use crate::percept::{BodyJoint, LoadPipeline, LoadSeries};
use crate::seed::derive_seed;

/// Anything that can command the body at a point in time.
pub trait CommandSource {
    fn command(&self, t: f64) -> GaitCommand;
}

impl CommandSource for BodyWave {
    fn command(&self, t: f64) -> GaitCommand {
        BodyWave::command(self, t)
    }
}

/// Chooses the next cycle's body phase offset from the last cycle's loads.
pub trait PhaseController {
    /// `median_load` holds the cycle's median load per body joint, percent.
    fn next_phase(&mut self, cycle: usize, median_load: &[f64; BODY_JOINTS], phase: f64) -> Result<f64>;
}

pub enum GaitSource<'a> {
    Fixed(GaitParams),
    Adaptive {
        initial: GaitParams,
        controller: &'a mut dyn PhaseController,
    },
}

/// Time integration of the body pose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Pose advanced with the twist solved at the start of the step.
    Euler,
    /// Pose advanced with the twist solved at the half step.
    #[default]
    Midpoint,
}

/// Everything about a trial except the gait, terrain, length and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub robot: RobotModel,
    pub ground: GroundModel,
    pub sensing: LoadPipeline,
    pub steps_per_cycle: usize,
    pub blend: BlendSource,
    pub initial_pose: Pose,
    /// Return the body to `initial_pose` every this many cycles.
    pub reset_pose_every: Option<usize>,
    /// Blend window for phase changes, as a fraction of a cycle.
    pub phase_switch_fraction: f64,
    pub solver_fallback: bool,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            robot: RobotModel::default(),
            ground: GroundModel::default(),
            sensing: LoadPipeline::default(),
            steps_per_cycle: 100,
            blend: BlendSource::Terrain,
            initial_pose: Pose::default(),
            reset_pose_every: None,
            phase_switch_fraction: BodyWave::DEFAULT_SWITCH_FRACTION,
            solver_fallback: true,
            integrator: Integrator::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.ground.validate()?;
        self.sensing.validate()?;
        if self.steps_per_cycle < 4 {
            return Err(invalid("steps_per_cycle must be at least 4"));
        }
        if let BlendSource::Fixed(rho) = self.blend {
            if !(0.0..=1.0).contains(&rho) {
                return Err(invalid(format!("fixed blend {rho} outside [0, 1]")));
            }
        }
        if self.reset_pose_every == Some(0) {
            return Err(invalid("reset_pose_every must be positive"));
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let mut s = SolverSettings::new(
            self.ground.mu * self.robot.weight(),
            self.robot.body_length(),
        );
        s.grid_fallback = self.solver_fallback;
        s
    }

    /// `mu m g BL`, the torque nondimensionalization.
    pub fn torque_scale(&self) -> f64 {
        self.ground.mu * self.robot.weight() * self.robot.body_length()
    }
}

/// Result of advancing the body by one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: BodyState,
    pub twist: Twist,
    /// Scaled force/moment residual of the accepted balance.
    pub residual: f64,
    /// Largest per-element `F . v`; never positive for a dissipative law.
    pub max_power: f64,
    /// Nondimensional joint torques at the start of the step.
    pub torques: [f64; BODY_JOINTS],
    /// Mean belly position at the start of the step.
    pub centroid: Vector2<f64>,
    pub forces: Vec<ElementForce>,
    pub saturated: bool,
    pub used_fallback: bool,
}


/// World position of the belly centroid.
pub fn body_centroid(pose: &Pose, joint_angles: &[f64; BODY_JOINTS], robot: &RobotModel) -> Vector2<f64> {
    let shape = BodyShape::new(joint_angles, &[0.0; BODY_JOINTS], robot.segment_length);
    let stations = belly_stations(robot);
    let mut sum = Vector2::zeros();
    for seg in 0..SEGMENTS {
        for &s in &stations {
            sum += shape.point(seg, s, 0.0).0;
        }
    }
    pose.origin() + pose.rotation() * (sum / (stations.len() * SEGMENTS) as f64)
}

/// Advances the body by `dt` and moves the joints to their commanded values
/// at `t + dt`.
///
/// Euler solves the twist at the start of the step with the analytic joint
/// rates. Midpoint solves it once at the half step, with the joint angles
/// there, the secant joint rates over the step, and the pose predicted from
/// the warm-start twist; the secant keeps saturation corners from biasing
/// the displacement.
pub fn step<S: CommandSource + ?Sized>(
    state: &BodyState,
    source: &S,
    dt: f64,
    cfg: &SimConfig,
    terrain: &TerrainProfile,
    warm_start: Twist,
) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(invalid(format!("timestep must be positive, got {dt}")));
    }
    let robot = &cfg.robot;
    let pose = state.pose;
    let advance = |q: &Twist, h: f64| Pose {
        x: pose.x + q.vx * h,
        y: pose.y + q.vy * h,
        theta: pose.theta + q.wz * h,
    };
    let t_next = state.t + dt;
    let cmd = source.command(state.t);
    let next_cmd = source.command(t_next);
    let (at, angles, rates, legs) = match cfg.integrator {
        Integrator::Euler => (pose, state.joint_angles, cmd.joint_rates, state.leg_contact),
        Integrator::Midpoint => {
            let mid = source.command(state.t + 0.5 * dt);
            let secant = [0, 1, 2].map(|j| (next_cmd.joint_angles[j] - cmd.joint_angles[j]) / dt);
            (advance(&warm_start, 0.5 * dt), mid.joint_angles, secant, mid.leg_contact)
        }
    };
    let shape = BodyShape::new(&angles, &rates, robot.segment_length);
    let contacts = build_contacts(&at, &shape, &legs, robot, terrain, &cfg.ground, cfg.blend)?;
    let sol = solve_contacts(&contacts, warm_start, &cfg.solver_settings())?;
    let q = sol.twist;

    let mut max_power = f64::NEG_INFINITY;
    let forces: Vec<ElementForce> = contacts
        .iter()
        .map(|c| {
            let v = c.velocity(&q);
            let f = element_reaction_force(v, c.heading, c.normal_load, &c.ground);
            max_power = max_power.max(f.dot(&v));
            ElementForce {
                segment: c.segment,
                position: c.position(&at),
                force: f,
            }
        })
        .collect();
    let rot = at.rotation();
    let joints = [1, 2, 3].map(|n| at.origin() + rot * shape.joint(n));
    let torques = compute_joint_torques(&joints, &forces, cfg.torque_scale());

    let next = BodyState::from_command(advance(&q, dt), &next_cmd, t_next);
    if !next.is_finite() {
        return Err(invalid("body state became non-finite"));
    }
    Ok(StepOutcome {
        next,
        twist: q,
        residual: sol.residual,
        max_power,
        torques,
        centroid: body_centroid(&pose, &state.joint_angles, robot),
        forces,
        saturated: cmd.saturated,
        used_fallback: sol.used_fallback,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub t: f64,
    pub pose: Pose,
    pub centroid: [f64; 2],
    pub joint_angles: [f64; BODY_JOINTS],
    /// Nondimensional joint torques.
    pub torque: [f64; BODY_JOINTS],
    /// Effective body phase offset at this instant.
    pub phase: f64,
    pub twist: Twist,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: usize,
    /// Commanded body phase offset for this cycle.
    pub phase: f64,
    pub start_x: f64,
    pub end_x: f64,
    /// Body lengths per cycle.
    pub speed_blc: f64,
    /// Per-joint median of the processed load, percent.
    pub median_load: [f64; BODY_JOINTS],
    /// Depth under the centroid at the end of the cycle, mm.
    pub depth_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub steps_per_cycle: usize,
    pub dt: f64,
    pub body_length: f64,
    pub terrain: String,
    pub samples: Vec<StepSample>,
    pub cycles: Vec<CycleSummary>,
    pub final_pose: Pose,
    pub final_centroid: [f64; 2],
    /// Commanded phase after the last controller update.
    pub final_phase: f64,
    pub max_residual: f64,
    pub max_power: f64,
    pub saturated_steps: usize,
    pub fallback_steps: usize,
}

impl TrialRecord {
    /// Nondimensional torque history of one body joint as a cycle-bounded series.
    pub fn torque_series(&self, joint: BodyJoint) -> Result<LoadSeries> {
        LoadSeries::uniform(
            joint,
            self.samples.iter().map(|s| s.torque[joint.index()]).collect(),
            self.steps_per_cycle,
        )
    }
}

/// Seed of the noise stream for one joint of one trial.
pub fn joint_noise_seed(trial_seed: u64, joint: BodyJoint) -> u64 {
    derive_seed(trial_seed, joint.index() as u64)
}

/// Runs `n_cycles` gait cycles from the configured initial pose.
///
/// With an adaptive gait source the controller is consulted at every cycle
/// boundary with that cycle's median loads, and its answer is commanded for
/// the next cycle.
pub fn simulate_trial(
    cfg: &SimConfig,
    gait: GaitSource<'_>,
    terrain: &TerrainProfile,
    n_cycles: usize,
    seed: u64,
) -> Result<TrialRecord> {
    cfg.validate()?;
    if n_cycles == 0 {
        return Err(invalid("a trial needs at least one cycle"));
    }
    let (initial, mut controller) = match gait {
        GaitSource::Fixed(g) => (g, None),
        GaitSource::Adaptive {
            initial,
            controller,
        } => (initial, Some(controller)),
    };
    let mut wave = BodyWave::new(initial)?.with_switch_fraction(cfg.phase_switch_fraction)?;
    let steps = cfg.steps_per_cycle;
    let period = initial.period();
    let dt = period / steps as f64;
    let bl = cfg.robot.body_length();

    let mut state = BodyState::from_command(cfg.initial_pose, &wave.command(0.0), 0.0);
    let mut warm = Twist::default();
    let mut samples = Vec::with_capacity(n_cycles * steps);
    let mut cycles = Vec::with_capacity(n_cycles);
    let mut torque_hist: [Vec<f64>; BODY_JOINTS] = Default::default();
    let (mut max_residual, mut max_power) = (0.0f64, f64::NEG_INFINITY);
    let (mut saturated_steps, mut fallback_steps) = (0, 0);

    for c in 0..n_cycles {
        let phase = wave.target_phase();
        let start_x = body_centroid(&state.pose, &state.joint_angles, &cfg.robot).x;
        for s in 0..steps {
            let k = c * steps + s;
            state.t = k as f64 * dt;
            let out = step(&state, &wave, dt, cfg, terrain, warm).map_err(|e| Error::Trial {
                cycle: c,
                step: s,
                source: Box::new(e),
            })?;
            samples.push(StepSample {
                t: state.t,
                pose: state.pose,
                centroid: [out.centroid.x, out.centroid.y],
                joint_angles: state.joint_angles,
                torque: out.torques,
                phase: wave.phase_at(state.t),
                twist: out.twist,
                residual: out.residual,
            });
            for (hist, &tau) in torque_hist.iter_mut().zip(&out.torques) {
                hist.push(tau);
            }
            max_residual = max_residual.max(out.residual);
            max_power = max_power.max(out.max_power);
            saturated_steps += usize::from(out.saturated);
            fallback_steps += usize::from(out.used_fallback);
            warm = out.twist;
            state = out.next;
        }
        state.t = ((c + 1) * steps) as f64 * dt;
        let end = body_centroid(&state.pose, &state.joint_angles, &cfg.robot);
        let mut median_load = [0.0; BODY_JOINTS];
        for joint in BodyJoint::ALL {
            let series = LoadSeries::uniform(joint, torque_hist[joint.index()].clone(), steps)?;
            let medians = cfg
                .sensing
                .cycle_medians(&series, joint_noise_seed(seed, joint))?;
            median_load[joint.index()] = medians[c];
        }
        cycles.push(CycleSummary {
            cycle: c,
            phase,
            start_x,
            end_x: end.x,
            speed_blc: (end.x - start_x) / bl,
            median_load,
            depth_mm: terrain.depth_at(end.x),
        });
        if let Some(ctrl) = controller.as_deref_mut() {
            let next = ctrl.next_phase(c, &median_load, phase)?;
            wave.set_phase(next, state.t)?;
        }
        if cfg
            .reset_pose_every
            .is_some_and(|every| (c + 1) % every == 0 && c + 1 < n_cycles)
        {
            state.pose = cfg.initial_pose;
        }
    }

    Ok(TrialRecord {
        seed,
        steps_per_cycle: steps,
        dt,
        body_length: bl,
        terrain: terrain.label().to_string(),
        samples,
        cycles,
        final_pose: state.pose,
        final_centroid: {
            let c = body_centroid(&state.pose, &state.joint_angles, &cfg.robot);
            [c.x, c.y]
        },
        final_phase: wave.target_phase(),
        max_residual,
        max_power,
        saturated_steps,
        fallback_steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedSummary {
    pub per_cycle: Vec<f64>,
    pub mean: f64,
}

/// Forward speed in body lengths per cycle, per cycle and averaged.
pub fn speed_bl_per_cycle(record: &TrialRecord) -> Result<SpeedSummary> {
    if record.cycles.is_empty() || record.samples.len() < record.steps_per_cycle {
        return Err(invalid("trial record holds no complete cycle"));
    }
    if record.samples.len() != record.cycles.len() * record.steps_per_cycle {
        return Err(invalid("trial record ends mid-cycle"));
    }
    let per_cycle: Vec<f64> = record
        .cycles
        .iter()
        .map(|c| (c.end_x - c.start_x) / record.body_length)
        .collect();
    let mean = per_cycle.iter().sum::<f64>() / per_cycle.len() as f64;
    Ok(SpeedSummary { per_cycle, mean })
}

/// Median absolute joint torque over one noise-free cycle, per blend ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorqueRatioRow {
    pub rho: f64,
    pub median_abs_torque: [f64; BODY_JOINTS],
    pub max_residual: f64,
    pub max_power: f64,
}

/// Runs one cycle per blend ratio with every belly element in granular
/// contact and the ground law fixed at that ratio.
pub fn torque_vs_rft_ratio(cfg: &SimConfig, gait: &GaitParams, ratios: &[f64]) -> Result<Vec<TorqueRatioRow>> {
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(invalid(format!("blend ratio {r} outside [0, 1]")));
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let terrain = TerrainProfile::constant(crate::gait::MAX_DEPTH_MM)?;
    sorted
        .into_iter()
        .map(|rho| {
            let run = SimConfig {
                blend: BlendSource::Fixed(rho),
                sensing: cfg.sensing.noise_free(),
                ..cfg.clone()
            };
            let rec = simulate_trial(&run, GaitSource::Fixed(*gait), &terrain, 1, 0)?;
            let mut med = [0.0; BODY_JOINTS];
            for (j, m) in med.iter_mut().enumerate() {
                let abs: Vec<f64> = rec.samples.iter().map(|s| s.torque[j].abs()).collect();
                *m = crate::percept::load::median(&abs).unwrap_or(0.0);
            }
            Ok(TorqueRatioRow {
                rho,
                median_abs_torque: med,
                max_residual: rec.max_residual,
                max_power: rec.max_power,
            })
        })
        .collect()
}
