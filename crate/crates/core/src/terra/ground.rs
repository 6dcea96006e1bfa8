use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gait::MAX_DEPTH_MM;

/// Ground reaction law: a blend of anisotropic linear drag (granular RFT)
/// and regularized Coulomb friction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundModel {
    /// Drag coefficient along an element's long axis, N s/m per element.
    pub rft_par_coeff: f64,
    /// Drag coefficient across an element, N s/m per element.
    pub rft_perp_coeff: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Share of granular drag in the blend: 0 is rigid ground, 1 is deep media.
    pub blend: f64,
    /// Slip speed below which Coulomb friction is smoothed, m/s.
    pub slip_regularization: f64,
}

impl Default for GroundModel {
    fn default() -> Self {
        Self {
            rft_par_coeff: 3.2,
            rft_perp_coeff: 8.0,
            mu: 0.3,
            blend: 0.0,
            slip_regularization: 1e-4,
        }
    }
}

impl GroundModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rft_par_coeff > 0.0 && self.rft_perp_coeff > self.rft_par_coeff) {
            return Err(invalid(format!(
                "drag coefficients must satisfy perp ({}) > par ({}) > 0",
                self.rft_perp_coeff, self.rft_par_coeff
            )));
        }
        if !(self.mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return Err(invalid(format!("blend {} outside [0, 1]", self.blend)));
        }
        if !(self.slip_regularization > 0.0) {
            return Err(invalid("slip_regularization must be positive"));
        }
        Ok(())
    }

    pub fn with_blend(self, blend: f64) -> Self {
        Self { blend, ..self }
    }

    /// Drag anisotropy `C_perp / C_par`.
    pub fn anisotropy(&self) -> f64 {
        self.rft_perp_coeff / self.rft_par_coeff
    }

    /// Linear drag tensor for an element with the given axis heading.
    fn drag_tensor(&self, heading: f64) -> Matrix2<f64> {
        let (s, c) = heading.sin_cos();
        let t = Vector2::new(c, s);
        let n = Vector2::new(-s, c);
        t * t.transpose() * self.rft_par_coeff + n * n.transpose() * self.rft_perp_coeff
    }
}

/// Granular share of the ground law at a bead depth: `min(d / 40, 1)`.
pub fn blend_ratio(depth_mm: f64) -> Result<f64> {
    if !(depth_mm >= 0.0) {
        return Err(invalid(format!("depth must be non-negative, got {depth_mm}")));
    }
    Ok((depth_mm / MAX_DEPTH_MM).min(1.0))
}

/// Reaction force on a ground element moving with planar velocity `v`.
///
/// Coulomb part: `-mu N v / (|v| + eps)`. Drag part: `-C_par v_par - C_perp v_perp`
/// in the element frame. Both are dissipative, so `F . v <= 0`.
pub fn element_reaction_force(
    v: Vector2<f64>,
    heading: f64,
    normal_load: f64,
    gm: &GroundModel,
) -> Vector2<f64> {
    let rho = gm.blend;
    let mut f = Vector2::zeros();
    if rho > 0.0 {
        f -= gm.drag_tensor(heading) * v * rho;
    }
    if rho < 1.0 && normal_load > 0.0 {
        let speed = v.norm();
        f -= v * ((1.0 - rho) * gm.mu * normal_load / (speed + gm.slip_regularization));
    }
    f
}

/// Force, its velocity Jacobian, and the dissipation potential of one element.
///
/// The force is minus the gradient of a convex potential, so the summed
/// balance problem is a smooth convex minimization.
pub(crate) fn element_force_jacobian(
    v: Vector2<f64>,
    heading: f64,
    normal_load: f64,
    gm: &GroundModel,
) -> (Vector2<f64>, Matrix2<f64>, f64) {
    let rho = gm.blend;
    let mut f = Vector2::zeros();
    let mut jac = Matrix2::zeros();
    let mut potential = 0.0;
    if rho > 0.0 {
        let d = gm.drag_tensor(heading) * rho;
        f -= d * v;
        jac -= d;
        potential += 0.5 * v.dot(&(d * v));
    }
    if rho < 1.0 && normal_load > 0.0 {
        let eps = gm.slip_regularization;
        let scale = (1.0 - rho) * gm.mu * normal_load;
        let speed = v.norm();
        let denom = speed + eps;
        f -= v * (scale / denom);
        jac -= Matrix2::identity() * (scale / denom);
        if speed > 0.0 {
            jac += v * v.transpose() * (scale / (speed * denom * denom));
        }
        potential += scale * (speed - eps * (speed / eps).ln_1p());
    }
    (f, jac, potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn deep() -> GroundModel {
        GroundModel::default().with_blend(1.0)
    }

    #[test]
    fn blend_examples() {
        assert_eq!(blend_ratio(0.0).unwrap(), 0.0);
        assert_eq!(blend_ratio(40.0).unwrap(), 1.0);
        assert_eq!(blend_ratio(20.0).unwrap(), 0.5);
        assert_eq!(blend_ratio(75.0).unwrap(), 1.0);
        assert!(blend_ratio(-0.1).is_err());
    }

    #[test]
    fn axial_drag() {
        let gm = deep();
        let f = element_reaction_force(Vector2::new(0.1, 0.0), 0.0, 1.0, &gm);
        assert_abs_diff_eq!(f.x, -gm.rft_par_coeff * 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(f.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lateral_drag_exceeds_axial() {
        let gm = deep();
        let axial = element_reaction_force(Vector2::new(0.1, 0.0), 0.0, 1.0, &gm);
        let lateral = element_reaction_force(Vector2::new(0.0, 0.1), 0.0, 1.0, &gm);
        assert_abs_diff_eq!(lateral.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lateral.y, -gm.rft_perp_coeff * 0.1, epsilon = 1e-15);
        assert!(lateral.norm() > axial.norm());
    }

    #[test]
    fn coulomb_limit() {
        let gm = GroundModel {
            mu: 0.5,
            slip_regularization: 1e-12,
            ..GroundModel::default()
        };
        let f = element_reaction_force(Vector2::new(0.1, 0.0), 0.3, 2.0, &gm);
        assert_abs_diff_eq!(f.x, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.y, 0.0, epsilon = 1e-15);
        let still = element_reaction_force(Vector2::zeros(), 0.0, 2.0, &gm);
        assert_eq!(still, Vector2::zeros());
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let gm = GroundModel::default().with_blend(0.35);
        let v = Vector2::new(0.013, -0.021);
        let (f, jac, _) = element_force_jacobian(v, 0.7, 0.4, &gm);
        assert_abs_diff_eq!(f, element_reaction_force(v, 0.7, 0.4, &gm), epsilon = 1e-15);
        let h = 1e-8;
        for k in 0..2 {
            let mut dv = Vector2::zeros();
            dv[k] = h;
            let fd = (element_reaction_force(v + dv, 0.7, 0.4, &gm)
                - element_reaction_force(v - dv, 0.7, 0.4, &gm))
                / (2.0 * h);
            assert_abs_diff_eq!(jac.column(k).into_owned(), fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn force_is_minus_potential_gradient() {
        let gm = GroundModel::default().with_blend(0.6);
        let v = Vector2::new(-0.04, 0.02);
        let (f, _, _) = element_force_jacobian(v, -1.1, 0.9, &gm);
        let h = 1e-7;
        for k in 0..2 {
            let mut dv = Vector2::zeros();
            dv[k] = h;
            let up = element_force_jacobian(v + dv, -1.1, 0.9, &gm).2;
            let dn = element_force_jacobian(v - dv, -1.1, 0.9, &gm).2;
            assert_abs_diff_eq!(-(up - dn) / (2.0 * h), f[k], epsilon = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn dissipative(vx in -1.0..1.0f64, vy in -1.0..1.0f64, heading in -4.0..4.0f64,
                       n in 0.0..5.0f64, rho in 0.0..=1.0f64) {
            let gm = GroundModel::default().with_blend(rho);
            let v = Vector2::new(vx, vy);
            let f = element_reaction_force(v, heading, n, &gm);
            prop_assert!(f.dot(&v) <= 0.0);
        }

        #[test]
        fn blend_is_monotone(a in 0.0..100.0f64, b in 0.0..100.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(blend_ratio(lo).unwrap() <= blend_ratio(hi).unwrap());
        }
    }
}
