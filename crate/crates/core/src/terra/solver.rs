//! Quasi-static force and yaw-moment balance.
//!
//! Every element force is minus the velocity gradient of a convex
//! dissipation potential, so the body twist that balances forces is the
//! unique minimizer of the summed potential. Damped Newton with an Armijo
//! line search finds it; a coarse grid search seeds a second attempt if
//! Newton stalls.

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

use super::body::{Contact, Twist};
use super::ground::element_force_jacobian;
use crate::error::{Error, Result};

/// Accepted nondimensional residual on net force and moment.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Newton stops once the scaled residual falls below this.
    pub tolerance: f64,
    /// Force scale `mu m g`.
    pub force_scale: f64,
    /// Length scale for moments (body length).
    pub length_scale: f64,
    pub grid_fallback: bool,
}

impl SolverSettings {
    pub fn new(force_scale: f64, length_scale: f64) -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-10,
            force_scale,
            length_scale,
            grid_fallback: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Balance {
    /// Net (Fx, Fy, Mz) on the body, newtons and newton-metres.
    pub net: Vector3<f64>,
    /// d(net)/d(twist), negative definite.
    pub jacobian: Matrix3<f64>,
    pub potential: f64,
}

fn lever(c: &Contact) -> Matrix2x3<f64> {
    Matrix2x3::new(1.0, 0.0, -c.offset.y, 0.0, 1.0, c.offset.x)
}

fn to_vec(q: &Twist) -> Vector3<f64> {
    Vector3::new(q.vx, q.vy, q.wz)
}

fn to_twist(v: &Vector3<f64>) -> Twist {
    Twist {
        vx: v[0],
        vy: v[1],
        wz: v[2],
    }
}

/// Net ground reaction on the body under twist `q`.
pub fn balance(contacts: &[Contact], q: &Twist) -> Balance {
    let mut net = Vector3::zeros();
    let mut jacobian = Matrix3::zeros();
    let mut potential = 0.0;
    for c in contacts {
        let v = c.velocity(q);
        let (f, jf, p) = element_force_jacobian(v, c.heading, c.normal_load, &c.ground);
        let g = lever(c);
        net += g.transpose() * f;
        jacobian += g.transpose() * jf * g;
        potential += p;
    }
    Balance {
        net,
        jacobian,
        potential,
    }
}

/// Nondimensional residual norm of a net (Fx, Fy, Mz).
pub fn scaled_residual(net: &Vector3<f64>, s: &SolverSettings) -> f64 {
    let f = Vector2::new(net[0], net[1]).norm() / s.force_scale;
    let m = net[2].abs() / (s.force_scale * s.length_scale);
    f.max(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solution {
    pub twist: Twist,
    pub residual: f64,
    pub iterations: usize,
    pub used_fallback: bool,
}

fn newton(contacts: &[Contact], start: Twist, s: &SolverSettings) -> (Twist, f64, usize) {
    let mut q = to_vec(&start);
    let mut b = balance(contacts, &start);
    let mut res = scaled_residual(&b.net, s);
    for it in 0..s.max_iterations {
        if res <= s.tolerance {
            return (to_twist(&q), res, it);
        }
        let hess = -b.jacobian;
        let Some(step) = hess.cholesky().map(|c| c.solve(&b.net)) else {
            return (to_twist(&q), res, it);
        };
        // directional derivative of the potential along the step
        let slope = -b.net.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = q + step * alpha;
            let tb = balance(contacts, &to_twist(&trial));
            let tres = scaled_residual(&tb.net, s);
            let decrease = tb.potential <= b.potential + 1e-4 * alpha * slope;
            // near the minimum the potential difference drowns in rounding,
            // so fall back to a plain residual decrease there
            let flat = (tb.potential - b.potential).abs() <= 1e-12 * b.potential.abs().max(1e-300);
            if decrease || (flat && tres < res) {
                q = trial;
                b = tb;
                res = tres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return (to_twist(&q), res, it + 1);
        }
    }
    (to_twist(&q), res, s.max_iterations)
}

/// Brute-force minimizer of the scaled residual over a box of twists:
/// a `n^3` grid followed by one refinement grid around the best cell.
pub fn grid_search(
    contacts: &[Contact],
    center: Twist,
    half_width: [f64; 3],
    n: usize,
    s: &SolverSettings,
) -> Twist {
    let search = |c: Vector3<f64>, hw: [f64; 3]| {
        let mut best = (f64::INFINITY, c);
        let step = |k: usize, i: usize| {
            if n > 1 {
                -hw[k] + 2.0 * hw[k] * i as f64 / (n - 1) as f64
            } else {
                0.0
            }
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let q = c + Vector3::new(step(0, i), step(1, j), step(2, k));
                    let r = scaled_residual(&balance(contacts, &to_twist(&q)).net, s);
                    if r < best.0 {
                        best = (r, q);
                    }
                }
            }
        }
        best.1
    };
    let cell = |k: usize| 2.0 * half_width[k] / (n.max(2) - 1) as f64;
    let coarse = search(to_vec(&center), half_width);
    let fine = search(coarse, [cell(0), cell(1), cell(2)]);
    to_twist(&fine)
}

/// Solves for the body twist that balances all ground reaction forces.
pub fn solve_contacts(contacts: &[Contact], warm_start: Twist, s: &SolverSettings) -> Result<Solution> {
    if contacts.is_empty() || contacts.iter().all(|c| c.normal_load <= 0.0 && c.ground.blend <= 0.0) {
        return Err(Error::DegenerateSupport);
    }
    let (twist, residual, iterations) = newton(contacts, warm_start, s);
    if residual <= RESIDUAL_TOLERANCE {
        return Ok(Solution {
            twist,
            residual,
            iterations,
            used_fallback: false,
        });
    }
    if !s.grid_fallback {
        return Err(Error::SolverFailure {
            iterations,
            residual,
        });
    }
    let reach = contacts
        .iter()
        .map(|c| c.offset.norm())
        .fold(0.0, f64::max)
        .max(1e-3);
    let vmax = contacts
        .iter()
        .map(|c| c.shape_velocity.norm())
        .fold(0.0, f64::max)
        .max(1e-3);
    let seed = grid_search(
        contacts,
        Twist::default(),
        [2.0 * vmax, 2.0 * vmax, 2.0 * vmax / reach],
        50,
        s,
    );
    let (twist, residual, more) = newton(contacts, seed, s);
    if residual <= RESIDUAL_TOLERANCE {
        Ok(Solution {
            twist,
            residual,
            iterations: iterations + more,
            used_fallback: true,
        })
    } else {
        Err(Error::SolverFailure {
            iterations: iterations + more,
            residual,
        })
    }
}
