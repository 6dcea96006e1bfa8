use nalgebra::Vector2;

use crate::gait::BODY_JOINTS;

/// Resolved reaction force on one ground element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementForce {
    pub segment: usize,
    pub position: Vector2<f64>,
    pub force: Vector2<f64>,
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Nondimensional body joint torques `tau_j / (mu m g BL)`.
///
/// Joint `j` carries the yaw moment, about its own axis, of every reaction
/// force acting on the segments behind it (segments `j..`), feet included.
pub fn compute_joint_torques(
    joints: &[Vector2<f64>; BODY_JOINTS],
    elements: &[ElementForce],
    torque_scale: f64,
) -> [f64; BODY_JOINTS] {
    let mut tau = [0.0; BODY_JOINTS];
    for e in elements {
        for (j, joint) in joints.iter().enumerate() {
            if e.segment > j {
                tau[j] += cross(e.position - joint, e.force);
            }
        }
    }
    tau.map(|t| t / torque_scale)
}
