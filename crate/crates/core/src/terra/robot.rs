use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gait::LegId;

pub const GRAVITY: f64 = 9.81;

/// Body segments, numbered head (0) to tail (3).
pub const SEGMENTS: usize = 4;

/// Where a leg's foot sits on the body while in stance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegMount {
    pub segment: usize,
    /// Distance behind the segment's front joint, metres.
    pub along: f64,
    /// Distance to the left of the segment axis, metres (negative is right).
    pub lateral: f64,
}

/// Planar four-segment body with two leg girdles.
///
/// Fore legs hang off segment 1 and hind legs off segment 3. Joint `n`
/// connects segment `n - 1` to segment `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    pub segment_length: f64,
    pub mass: f64,
    pub belly_elements_per_segment: usize,
    /// Share of body weight carried by the belly on rigid ground.
    pub flat_belly_load_fraction: f64,
    /// Foot positions indexed by [`LegId::index`].
    pub legs: [LegMount; 4],
}

impl Default for RobotModel {
    fn default() -> Self {
        let mount = |leg: LegId| LegMount {
            segment: if leg.is_fore() { 1 } else { 3 },
            // fore legs at the rear of segment 1, hind legs at the front of segment 3
            along: if leg.is_fore() { 0.1125 } else { 0.0 },
            lateral: if leg.is_left() { 0.06 } else { -0.06 },
        };
        Self {
            segment_length: 0.1125,
            mass: 0.6,
            belly_elements_per_segment: 10,
            flat_belly_load_fraction: 0.2,
            legs: LegId::ALL.map(mount),
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_length > 0.0) {
            return Err(invalid("segment_length must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(invalid("mass must be positive"));
        }
        if self.belly_elements_per_segment < 2 {
            return Err(invalid("belly_elements_per_segment must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.flat_belly_load_fraction) {
            return Err(invalid("flat_belly_load_fraction must lie in [0, 1)"));
        }
        for leg in LegId::ALL {
            let m = &self.legs[leg.index()];
            let expected = if leg.is_fore() { 1 } else { 3 };
            if m.segment != expected {
                return Err(invalid(format!(
                    "{} leg must attach to segment {expected}, got {}",
                    leg.label(),
                    m.segment
                )));
            }
            if !(0.0..=self.segment_length).contains(&m.along) {
                return Err(invalid(format!("{} leg mount lies off its segment", leg.label())));
            }
        }
        Ok(())
    }

    pub fn body_length(&self) -> f64 {
        self.segment_length * SEGMENTS as f64
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// The left-right reflection of this robot.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for leg in LegId::ALL {
            let m = self.legs[leg.mirrored().index()];
            out.legs[leg.index()] = LegMount {
                lateral: -m.lateral,
                ..m
            };
        }
        out
    }
}
