//! Commanded body-wave and leg trajectories.
//!
//! Body joint `n` (1 = upper, 2 = lower, 3 = tail) follows
//! `alpha_n(t) = A cos(w t + (n - 1) phi)`. A negative `phi` makes joint
//! `n` lead joint `n + 1`, so the wave travels from head to tail; `phi = 0`
//! is a standing wave. Legs trot: the diagonal pairs (LF, RH) and (RF, LH)
//! alternate stance windows half a cycle apart.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Number of actuated body joints.
pub const BODY_JOINTS: usize = 3;

/// Deepest bead depth, in millimetres, covered by the depth models.
pub const MAX_DEPTH_MM: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LegId {
    LeftFore,
    RightFore,
    LeftHind,
    RightHind,
}

impl LegId {
    pub const ALL: [LegId; 4] = [
        LegId::LeftFore,
        LegId::RightFore,
        LegId::LeftHind,
        LegId::RightHind,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_fore(self) -> bool {
        matches!(self, LegId::LeftFore | LegId::RightFore)
    }

    pub fn is_left(self) -> bool {
        matches!(self, LegId::LeftFore | LegId::LeftHind)
    }

    /// 0 for the (LF, RH) pair, 1 for the (RF, LH) pair.
    pub fn diagonal_pair(self) -> usize {
        match self {
            LegId::LeftFore | LegId::RightHind => 0,
            LegId::RightFore | LegId::LeftHind => 1,
        }
    }

    /// The same leg on the other side of the body.
    pub fn mirrored(self) -> LegId {
        match self {
            LegId::LeftFore => LegId::RightFore,
            LegId::RightFore => LegId::LeftFore,
            LegId::LeftHind => LegId::RightHind,
            LegId::RightHind => LegId::LeftHind,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LegId::LeftFore => "LF",
            LegId::RightFore => "RF",
            LegId::LeftHind => "LH",
            LegId::RightHind => "RH",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegPhase {
    Stance,
    Swing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegCommand {
    pub phase: LegPhase,
    /// Shoulder angle below horizontal, radians.
    pub beta: f64,
}

/// Parameters that fully determine the commanded joint trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    /// Body-wave amplitude `A`, radians.
    pub amplitude: f64,
    /// Angular frequency `w`, rad/s.
    pub frequency: f64,
    /// Body phase offset `phi` between consecutive joints, radians.
    pub body_phase: f64,
    pub beta_land: f64,
    pub beta_lift: f64,
    /// Fraction of the cycle each leg spends in stance.
    pub duty: f64,
    /// Cycle phase at which the (LF, RH) pair enters stance.
    pub stance_offset: f64,
    /// Fraction of the cycle over which a leg ramps between lift and land.
    pub swing_ramp: f64,
    /// Symmetric hardware limit on body joint angles; `None` disables clamping.
    pub joint_limit: Option<f64>,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            frequency: 1.0,
            body_phase: 0.0,
            beta_land: PI / 3.0,
            beta_lift: 0.0,
            duty: 0.5,
            stance_offset: 0.0,
            swing_ramp: 0.05,
            joint_limit: Some(PI / 4.0),
        }
    }
}

impl GaitParams {
    pub fn with_phase(body_phase: f64) -> Self {
        Self {
            body_phase,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(invalid(format!("frequency must be positive, got {}", self.frequency)));
        }
        if !(-PI / 2.0..=0.0).contains(&self.body_phase) {
            return Err(invalid(format!(
                "body phase {} outside [-pi/2, 0]",
                self.body_phase
            )));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(invalid(format!("duty {} outside (0, 1]", self.duty)));
        }
        if !(self.beta_land > 0.0 && self.beta_land <= PI / 2.0) {
            return Err(invalid(format!("beta_land {} outside (0, pi/2]", self.beta_land)));
        }
        if !(0.0..self.beta_land).contains(&self.beta_lift) {
            return Err(invalid(format!(
                "beta_lift {} must lie in [0, beta_land)",
                self.beta_lift
            )));
        }
        if !(0.0..0.5).contains(&self.swing_ramp) {
            return Err(invalid(format!("swing_ramp {} outside [0, 0.5)", self.swing_ramp)));
        }
        if let Some(limit) = self.joint_limit {
            if !(limit > 0.0) {
                return Err(invalid(format!("joint limit must be positive, got {limit}")));
            }
        }
        Ok(())
    }

    /// Duration of one gait cycle in seconds.
    pub fn period(&self) -> f64 {
        TAU / self.frequency
    }

    /// True when the unclamped command would exceed the joint limit.
    pub fn saturates(&self) -> bool {
        self.joint_limit.is_some_and(|lim| self.amplitude > lim)
    }
}

fn check_joint(n: usize) -> Result<()> {
    if (1..=BODY_JOINTS).contains(&n) {
        Ok(())
    } else {
        Err(invalid(format!("body joint index {n} outside 1..=3")))
    }
}

/// Raw body joint angle `A cos(w t + (n - 1) phi)`, before any clamping.
pub fn body_joint_angle(n: usize, t: f64, g: &GaitParams) -> Result<f64> {
    check_joint(n)?;
    Ok(g.amplitude * (g.frequency * t + (n - 1) as f64 * g.body_phase).cos())
}

/// Time derivative of [`body_joint_angle`].
pub fn body_joint_rate(n: usize, t: f64, g: &GaitParams) -> Result<f64> {
    check_joint(n)?;
    Ok(-g.amplitude * g.frequency * (g.frequency * t + (n - 1) as f64 * g.body_phase).sin())
}

/// Wraps an angle to `[0, 2pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Progress through the stance window of `pair`, in cycle fractions.
/// Returns `Some(s)` with `s` in `[0, duty)` while in stance.
fn stance_progress(pair: usize, cycle_phase: f64, g: &GaitParams) -> Option<f64> {
    let start = g.stance_offset + pair as f64 * PI;
    let s = wrap_phase(cycle_phase - start) / TAU;
    (s < g.duty).then_some(s)
}

/// Shoulder command for `leg` at cycle phase `t` (radians, wrapped to one cycle).
///
/// Stance windows are half-open, so a boundary instant belongs to the pair
/// entering stance. Each transition is a linear ramp of `swing_ramp` cycles
/// starting at the window boundary.
pub fn leg_command(leg: LegId, t: f64, g: &GaitParams) -> Result<LegCommand> {
    if !t.is_finite() {
        return Err(invalid(format!("cycle phase {t} is not finite")));
    }
    let phase = wrap_phase(t);
    let ramp = g.swing_ramp;
    let span = g.beta_land - g.beta_lift;
    let ramp_frac = |s: f64| if ramp > 0.0 { (s / ramp).min(1.0) } else { 1.0 };
    match stance_progress(leg.diagonal_pair(), phase, g) {
        Some(s) => Ok(LegCommand {
            phase: LegPhase::Stance,
            beta: g.beta_lift + span * ramp_frac(s),
        }),
        None => {
            // fraction of the cycle since this leg lifted off
            let start = g.stance_offset + leg.diagonal_pair() as f64 * PI;
            let since_lift = wrap_phase(phase - start) / TAU - g.duty;
            Ok(LegCommand {
                phase: LegPhase::Swing,
                beta: g.beta_land - span * ramp_frac(since_lift),
            })
        }
    }
}

/// Fraction of full ground contact implied by a shoulder angle.
pub fn contact_weight(beta: f64, g: &GaitParams) -> f64 {
    ((beta - g.beta_lift) / (g.beta_land - g.beta_lift)).clamp(0.0, 1.0)
}

/// Best body phase offset for a bead depth in millimetres: `-(pi/120) d`.
pub fn optimal_phase_for_depth(depth_mm: f64) -> Result<f64> {
    if !(0.0..=MAX_DEPTH_MM).contains(&depth_mm) {
        return Err(Error::OutOfModelRange {
            quantity: "depth_mm",
            value: depth_mm,
            min: 0.0,
            max: MAX_DEPTH_MM,
        });
    }
    Ok(-PI / 120.0 * depth_mm)
}

/// Commanded joint angles, rates and leg contact at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaitCommand {
    pub joint_angles: [f64; BODY_JOINTS],
    pub joint_rates: [f64; BODY_JOINTS],
    /// Contact weight per leg in [0, 1], indexed by [`LegId::index`].
    pub leg_contact: [f64; 4],
    /// Whether any joint is held at its limit.
    pub saturated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct PhaseRamp {
    from: f64,
    to: f64,
    start: f64,
    duration: f64,
}

/// A body wave whose phase offset may be changed while it runs.
///
/// A change is blended linearly over `switch_duration` seconds so the
/// commanded joint angles stay continuous.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyWave {
    params: GaitParams,
    ramp: Option<PhaseRamp>,
    switch_duration: f64,
}

impl BodyWave {
    /// Default blend window for phase switches, as a fraction of a cycle.
    pub const DEFAULT_SWITCH_FRACTION: f64 = 0.1;

    pub fn new(params: GaitParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            switch_duration: Self::DEFAULT_SWITCH_FRACTION * params.period(),
            params,
            ramp: None,
        })
    }

    pub fn with_switch_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(invalid(format!("switch fraction {fraction} outside [0, 1]")));
        }
        self.switch_duration = fraction * self.params.period();
        Ok(self)
    }

    pub fn params(&self) -> &GaitParams {
        &self.params
    }

    /// Target body phase offset (the value after any running blend ends).
    pub fn target_phase(&self) -> f64 {
        self.params.body_phase
    }

    /// Commands a new phase offset starting at time `t`.
    pub fn set_phase(&mut self, phase: f64, t: f64) -> Result<()> {
        if !(-PI / 2.0..=0.0).contains(&phase) {
            return Err(invalid(format!("body phase {phase} outside [-pi/2, 0]")));
        }
        let current = self.phase_at(t);
        if phase != current && self.switch_duration > 0.0 {
            self.ramp = Some(PhaseRamp {
                from: current,
                to: phase,
                start: t,
                duration: self.switch_duration,
            });
        } else {
            self.ramp = None;
        }
        self.params.body_phase = phase;
        Ok(())
    }

    /// Effective phase offset at time `t` and its time derivative.
    fn phase_and_rate(&self, t: f64) -> (f64, f64) {
        match self.ramp {
            Some(r) if t < r.start + r.duration => {
                let s = ((t - r.start) / r.duration).max(0.0);
                (r.from + (r.to - r.from) * s, (r.to - r.from) / r.duration)
            }
            _ => (self.params.body_phase, 0.0),
        }
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase_and_rate(t).0
    }

    pub fn command(&self, t: f64) -> GaitCommand {
        let g = &self.params;
        let (phi, phi_rate) = self.phase_and_rate(t);
        let mut joint_angles = [0.0; BODY_JOINTS];
        let mut joint_rates = [0.0; BODY_JOINTS];
        let mut saturated = false;
        for j in 0..BODY_JOINTS {
            let arg = g.frequency * t + j as f64 * phi;
            let raw = g.amplitude * arg.cos();
            let raw_rate = -g.amplitude * arg.sin() * (g.frequency + j as f64 * phi_rate);
            match g.joint_limit {
                Some(limit) if raw.abs() > limit => {
                    joint_angles[j] = limit.copysign(raw);
                    joint_rates[j] = 0.0;
                    saturated = true;
                }
                _ => {
                    joint_angles[j] = raw;
                    joint_rates[j] = raw_rate;
                }
            }
        }
        let cycle_phase = wrap_phase(g.frequency * t);
        let mut leg_contact = [0.0; 4];
        for leg in LegId::ALL {
            // the phase is finite here, leg_command cannot fail
            let cmd = leg_command(leg, cycle_phase, g).expect("finite cycle phase");
            leg_contact[leg.index()] = contact_weight(cmd.beta, g);
        }
        GaitCommand {
            joint_angles,
            joint_rates,
            leg_contact,
            saturated,
        }
    }
}
