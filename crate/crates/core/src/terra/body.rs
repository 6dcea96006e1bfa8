//! Body kinematics and ground contacts.
//!
//! The body frame has its origin at joint 1 and its x axis along the mean
//! segment heading. Segment `i` runs backward from its front point `F_i`
//! along heading `psi_i`, where consecutive headings differ by the joint
//! angle between them.

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use super::ground::{blend_ratio, GroundModel};
use super::robot::{RobotModel, SEGMENTS};
use super::terrain::TerrainProfile;
use crate::error::{Error, Result};
use crate::gait::{GaitCommand, LegId, BODY_JOINTS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn rotation(&self) -> Rotation2<f64> {
        Rotation2::new(self.theta)
    }

    pub fn origin(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Planar body twist in the world frame: velocity of the body-frame origin
/// and yaw rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub pose: Pose,
    pub joint_angles: [f64; BODY_JOINTS],
    /// Leg contact weights in [0, 1], indexed by [`LegId::index`].
    pub leg_contact: [f64; 4],
    /// Simulation time, seconds.
    pub t: f64,
}

impl BodyState {
    pub fn from_command(pose: Pose, cmd: &GaitCommand, t: f64) -> Self {
        Self {
            pose,
            joint_angles: cmd.joint_angles,
            leg_contact: cmd.leg_contact,
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.x.is_finite()
            && self.pose.y.is_finite()
            && self.pose.theta.is_finite()
            && self.joint_angles.iter().all(|a| a.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactKind {
    Belly,
    Foot(LegId),
}

/// One ground-contacting element, resolved in world-aligned axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub kind: ContactKind,
    pub segment: usize,
    /// Offset from the body-frame origin, world axes.
    pub offset: Vector2<f64>,
    /// Velocity due to shape change alone, world axes.
    pub shape_velocity: Vector2<f64>,
    /// Element long-axis heading, world frame.
    pub heading: f64,
    pub normal_load: f64,
    pub ground: GroundModel,
}

impl Contact {
    pub fn position(&self, pose: &Pose) -> Vector2<f64> {
        pose.origin() + self.offset
    }

    /// World velocity of this element under body twist `q`.
    pub fn velocity(&self, q: &Twist) -> Vector2<f64> {
        Vector2::new(q.vx - q.wz * self.offset.y, q.vy + q.wz * self.offset.x) + self.shape_velocity
    }
}

/// Segment front points and headings in the body frame, with their rates.
///
/// The frame sits at joint 1 and is turned to the mean segment heading, so a
/// symmetric gait keeps the frame's x axis on its average direction of travel.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyShape {
    pub front: [Vector2<f64>; SEGMENTS],
    pub front_rate: [Vector2<f64>; SEGMENTS],
    pub heading: [f64; SEGMENTS],
    pub heading_rate: [f64; SEGMENTS],
    pub segment_length: f64,
}

fn unit(psi: f64) -> Vector2<f64> {
    Vector2::new(psi.cos(), psi.sin())
}

fn normal(psi: f64) -> Vector2<f64> {
    Vector2::new(-psi.sin(), psi.cos())
}

impl BodyShape {
    pub fn new(joint_angles: &[f64; BODY_JOINTS], joint_rates: &[f64; BODY_JOINTS], l: f64) -> Self {
        let mut heading = [0.0; SEGMENTS];
        let mut heading_rate = [0.0; SEGMENTS];
        for i in 1..SEGMENTS {
            heading[i] = heading[i - 1] + joint_angles[i - 1];
            heading_rate[i] = heading_rate[i - 1] + joint_rates[i - 1];
        }
        // the frame follows the mean segment heading
        let mean = heading.iter().sum::<f64>() / SEGMENTS as f64;
        let mean_rate = heading_rate.iter().sum::<f64>() / SEGMENTS as f64;
        for i in 0..SEGMENTS {
            heading[i] -= mean;
            heading_rate[i] -= mean_rate;
        }
        let mut front = [Vector2::zeros(); SEGMENTS];
        let mut front_rate = [Vector2::zeros(); SEGMENTS];
        front[0] = unit(heading[0]) * l;
        front_rate[0] = normal(heading[0]) * (l * heading_rate[0]);
        for i in 2..SEGMENTS {
            let prev = i - 1;
            front[i] = front[prev] - unit(heading[prev]) * l;
            front_rate[i] = front_rate[prev] - normal(heading[prev]) * (l * heading_rate[prev]);
        }
        Self {
            front,
            front_rate,
            heading,
            heading_rate,
            segment_length: l,
        }
    }

    /// Point `along` behind the front of segment `i`, `lateral` to its left.
    pub fn point(&self, i: usize, along: f64, lateral: f64) -> (Vector2<f64>, Vector2<f64>) {
        let psi = self.heading[i];
        let w = self.heading_rate[i];
        let pos = self.front[i] - unit(psi) * along + normal(psi) * lateral;
        let vel = self.front_rate[i] - normal(psi) * (along * w) - unit(psi) * (lateral * w);
        (pos, vel)
    }

    /// Body-frame location of joint `n` (1-based).
    pub fn joint(&self, n: usize) -> Vector2<f64> {
        self.front[n]
    }

    /// Tail tip in the body frame.
    pub fn tail_tip(&self) -> Vector2<f64> {
        self.point(SEGMENTS - 1, self.segment_length, 0.0).0
    }
}

/// Belly element centres along each segment, as distances behind its front.
pub fn belly_stations(robot: &RobotModel) -> Vec<f64> {
    let n = robot.belly_elements_per_segment;
    let ds = robot.segment_length / n as f64;
    (0..n).map(|k| (k as f64 + 0.5) * ds).collect()
}

/// Where the ground law comes from for belly elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlendSource {
    /// `blend_ratio(depth)` under each element.
    Terrain,
    /// Every belly element is in granular contact with this fixed blend.
    Fixed(f64),
}

/// Builds the world-axis contact set for a body configuration.
///
/// On a terrain profile the belly meets one ground law, blended by the mean
/// of the blend ratios under its elements. Each belly element owns an equal
/// share of the body weight: on rigid ground it carries the configured
/// flat-ground fraction of that share and hands the rest to the stance feet,
/// and in beads the part it keeps grows with the blend until a fully buried
/// belly carries everything. Feet split the handed-over weight by contact
/// weight. With a fixed blend, belly elements and stance feet share the
/// weight uniformly.
pub fn build_contacts(
    pose: &Pose,
    shape: &BodyShape,
    leg_contact: &[f64; 4],
    robot: &RobotModel,
    terrain: &TerrainProfile,
    ground: &GroundModel,
    blend: BlendSource,
) -> Result<Vec<Contact>> {
    let rot = pose.rotation();
    let stations = belly_stations(robot);
    let n_belly = stations.len() * SEGMENTS;
    let f = robot.flat_belly_load_fraction;

    let mut points = Vec::with_capacity(n_belly);
    for seg in 0..SEGMENTS {
        for &s in &stations {
            let (pos, vel) = shape.point(seg, s, 0.0);
            points.push((seg, rot * pos, rot * vel));
        }
    }
    let (w, rho) = match blend {
        BlendSource::Fixed(rho) => (1.0, rho),
        BlendSource::Terrain => {
            let mut sum = 0.0;
            for (_, offset, _) in &points {
                sum += blend_ratio(terrain.depth_at(pose.x + offset.x))?;
            }
            let rho = sum / n_belly as f64;
            ((f + (1.0 - f) * rho) / n_belly as f64, rho)
        }
    };

    let mut contacts = Vec::with_capacity(n_belly + 4);
    let mut weights = Vec::with_capacity(n_belly + 4);
    for (seg, offset, vel) in points {
        weights.push(w);
        contacts.push(Contact {
            kind: ContactKind::Belly,
            segment: seg,
            offset,
            shape_velocity: vel,
            heading: pose.theta + shape.heading[seg],
            normal_load: 0.0,
            ground: ground.with_blend(rho),
        });
    }
    for leg in LegId::ALL {
        let c = leg_contact[leg.index()];
        if c <= 0.0 {
            continue;
        }
        let m = robot.legs[leg.index()];
        let (pos, vel) = shape.point(m.segment, m.along, m.lateral);
        weights.push(c);
        contacts.push(Contact {
            kind: ContactKind::Foot(leg),
            segment: m.segment,
            offset: rot * pos,
            shape_velocity: rot * vel,
            heading: pose.theta + shape.heading[m.segment],
            normal_load: 0.0,
            ground: ground.with_blend(0.0),
        });
    }
    if matches!(blend, BlendSource::Terrain) {
        // feet take whatever the belly does not; with no foot down the
        // normalization below puts it all back on the belly
        let belly: f64 = weights[..n_belly].iter().sum();
        let feet: f64 = weights[n_belly..].iter().sum();
        if feet > 0.0 {
            for w in &mut weights[n_belly..] {
                *w *= (1.0 - belly) / feet;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    let per_weight = robot.weight() / total;
    for (c, w) in contacts.iter_mut().zip(&weights) {
        c.normal_load = w * per_weight;
    }
    Ok(contacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn straight_body_layout() {
        let shape = BodyShape::new(&[0.0; 3], &[0.0; 3], 0.1);
        assert_abs_diff_eq!(shape.front[0], Vector2::new(0.1, 0.0));
        assert_abs_diff_eq!(shape.joint(1), Vector2::zeros());
        assert_abs_diff_eq!(shape.joint(2), Vector2::new(-0.1, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(shape.joint(3), Vector2::new(-0.2, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(shape.tail_tip(), Vector2::new(-0.3, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn frame_follows_mean_heading() {
        let shape = BodyShape::new(&[0.4, -0.1, 0.3], &[1.0, 0.5, -2.0], 0.1);
        assert_abs_diff_eq!(shape.heading.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.heading_rate.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.heading[1] - shape.heading[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.heading[3] - shape.heading[2], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.joint(1), Vector2::zeros());
        assert_abs_diff_eq!(shape.joint(2).norm(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn shape_velocity_matches_finite_difference() {
        let angles = [0.3, -0.2, 0.5];
        let rates = [0.7, 1.1, -0.4];
        let h = 1e-7;
        let shape = BodyShape::new(&angles, &rates, 0.1125);
        let at = |s: f64| {
            let a = [0, 1, 2].map(|j| angles[j] + s * rates[j]);
            BodyShape::new(&a, &rates, 0.1125)
        };
        let (up, dn) = (at(h), at(-h));
        for seg in 0..SEGMENTS {
            let (_, vel) = shape.point(seg, 0.05, 0.03);
            let fd = (up.point(seg, 0.05, 0.03).0 - dn.point(seg, 0.05, 0.03).0) / (2.0 * h);
            assert_abs_diff_eq!(vel, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn flat_ground_load_split() {
        let robot = RobotModel::default();
        let shape = BodyShape::new(&[0.0; 3], &[0.0; 3], robot.segment_length);
        let legs = [1.0, 0.0, 0.0, 1.0];
        let contacts = build_contacts(
            &Pose::default(),
            &shape,
            &legs,
            &robot,
            &TerrainProfile::flat(),
            &GroundModel::default(),
            BlendSource::Terrain,
        )
        .unwrap();
        let belly: f64 = contacts
            .iter()
            .filter(|c| c.kind == ContactKind::Belly)
            .map(|c| c.normal_load)
            .sum();
        let total: f64 = contacts.iter().map(|c| c.normal_load).sum();
        assert_abs_diff_eq!(total, robot.weight(), epsilon = 1e-12);
        assert_abs_diff_eq!(belly / total, 0.2, epsilon = 1e-12);
    }

    fn loads(depth: f64, legs: [f64; 4]) -> (Vec<f64>, Vec<f64>) {
        let robot = RobotModel::default();
        let shape = BodyShape::new(&[0.0; 3], &[0.0; 3], robot.segment_length);
        let contacts = build_contacts(
            &Pose::default(),
            &shape,
            &legs,
            &robot,
            &TerrainProfile::constant(depth).unwrap(),
            &GroundModel::default(),
            BlendSource::Terrain,
        )
        .unwrap();
        let (belly, feet): (Vec<&Contact>, Vec<&Contact>) = contacts.iter().partition(|c| c.kind == ContactKind::Belly);
        (
            belly.iter().map(|c| c.normal_load).collect(),
            feet.iter().map(|c| c.normal_load).collect(),
        )
    }

    #[test]
    fn buried_belly_keeps_more_weight() {
        let w = RobotModel::default().weight();
        // rho = 0.5: the belly keeps 0.2 + 0.8 * 0.5 of the weight
        let (belly, feet) = loads(20.0, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(belly.len(), 40);
        for b in &belly {
            assert_abs_diff_eq!(*b, 0.6 * w / 40.0, epsilon = 1e-12);
        }
        for f in &feet {
            assert_abs_diff_eq!(*f, 0.2 * w, epsilon = 1e-12);
        }
        let (belly, feet) = loads(0.0, [1.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(belly.iter().sum::<f64>(), 0.2 * w, epsilon = 1e-12);
        assert_abs_diff_eq!(feet.iter().sum::<f64>(), 0.8 * w, epsilon = 1e-12);
        let (belly, feet) = loads(40.0, [1.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(belly.iter().sum::<f64>(), w, epsilon = 1e-12);
        assert!(feet.iter().all(|&f| f.abs() < 1e-12));
        // no foot down: the belly carries everything
        let (belly, _) = loads(0.0, [0.0; 4]);
        assert_abs_diff_eq!(belly.iter().sum::<f64>(), w, epsilon = 1e-12);
    }

    #[test]
    fn belly_blend_is_the_mean_under_the_body() {
        let robot = RobotModel::default();
        let shape = BodyShape::new(&[0.0; 3], &[0.0; 3], robot.segment_length);
        // straight body from x = 0.1125 (head tip) back to -0.3375 (tail)
        let terrain = TerrainProfile::piecewise("step", vec![(-0.2, 0.0), (-0.1999999, 40.0)]).unwrap();
        let contacts = build_contacts(
            &Pose::default(),
            &shape,
            &[0.0; 4],
            &robot,
            &terrain,
            &GroundModel::default(),
            BlendSource::Terrain,
        )
        .unwrap();
        let expected: f64 = contacts
            .iter()
            .map(|c| blend_ratio(terrain.depth_at(c.offset.x)).unwrap())
            .sum::<f64>()
            / contacts.len() as f64;
        assert!(expected > 0.5 && expected < 1.0);
        for c in &contacts {
            assert_abs_diff_eq!(c.ground.blend, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_contact_is_degenerate() {
        let robot = RobotModel {
            flat_belly_load_fraction: 0.0,
            ..RobotModel::default()
        };
        let shape = BodyShape::new(&[0.0; 3], &[0.0; 3], robot.segment_length);
        let err = build_contacts(
            &Pose::default(),
            &shape,
            &[0.0; 4],
            &robot,
            &TerrainProfile::flat(),
            &GroundModel::default(),
            BlendSource::Terrain,
        )
        .unwrap_err();
        assert_eq!(err, Error::DegenerateSupport);
    }
}
