//! Planar quasi-static locomotion over rigid ground and granular media.

pub mod body;
pub mod ground;
pub mod robot;
pub mod solver;
pub mod terrain;
pub mod torque;
pub mod trial;

pub use body::{build_contacts, BlendSource, BodyShape, BodyState, Contact, ContactKind, Pose, Twist};
pub use ground::{blend_ratio, element_reaction_force, GroundModel};
pub use robot::{LegMount, RobotModel, GRAVITY, SEGMENTS};
pub use solver::{solve_contacts, SolverSettings, RESIDUAL_TOLERANCE};
pub use terrain::TerrainProfile;
pub use torque::{compute_joint_torques, ElementForce};
pub use trial::{
    simulate_trial, speed_bl_per_cycle, step, Integrator, torque_vs_rft_ratio, CommandSource, CycleSummary,
    GaitSource, PhaseController, SimConfig, SpeedSummary, StepOutcome, TorqueRatioRow, TrialRecord,
};

use crate::error::Result;
use crate::gait::BODY_JOINTS;

/// Solves the quasi-static twist for a body configuration.
pub fn solve_quasistatic_velocity(
    state: &BodyState,
    joint_rates: &[f64; BODY_JOINTS],
    terrain: &TerrainProfile,
    cfg: &SimConfig,
    warm_start: Twist,
) -> Result<solver::Solution> {
    let shape = BodyShape::new(&state.joint_angles, joint_rates, cfg.robot.segment_length);
    let contacts = build_contacts(
        &state.pose,
        &shape,
        &state.leg_contact,
        &cfg.robot,
        terrain,
        &cfg.ground,
        cfg.blend,
    )?;
    solve_contacts(&contacts, warm_start, &cfg.solver_settings())
}
