use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gait::MAX_DEPTH_MM;

/// Bead depth along the arena's x axis, piecewise linear between knots and
/// constant beyond the first and last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainProfile {
    label: String,
    /// (x in metres, depth in millimetres), strictly increasing in x.
    knots: Vec<(f64, f64)>,
}

impl TerrainProfile {
    pub fn piecewise(label: impl Into<String>, knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("terrain needs at least one knot"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid("terrain knots must be strictly increasing in x"));
            }
        }
        if let Some(&(_, d)) = knots
            .iter()
            .find(|(x, d)| !x.is_finite() || !(0.0..=MAX_DEPTH_MM).contains(d))
        {
            return Err(invalid(format!("terrain depth {d} outside [0, 40] mm")));
        }
        Ok(Self {
            label: label.into(),
            knots,
        })
    }

    pub fn flat() -> Self {
        Self {
            label: "flat".into(),
            knots: vec![(0.0, 0.0)],
        }
    }

    pub fn constant(depth_mm: f64) -> Result<Self> {
        Self::piecewise(format!("constant {depth_mm} mm"), vec![(0.0, depth_mm)])
    }

    /// Flat ground up to `flat_until`, then a linear slope reaching `depth_mm`
    /// over `ramp_length`, then constant.
    pub fn ramp(flat_until: f64, ramp_length: f64, depth_mm: f64) -> Result<Self> {
        if !(ramp_length > 0.0) {
            return Err(invalid("ramp length must be positive"));
        }
        Self::piecewise(
            format!("flat to {flat_until} m, ramp {ramp_length} m to {depth_mm} mm"),
            vec![(flat_until, 0.0), (flat_until + ramp_length, depth_mm)],
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn depth_at(&self, x: f64) -> f64 {
        let first = self.knots[0];
        if x <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            let ((x0, d0), (x1, d1)) = (w[0], w[1]);
            if x <= x1 {
                return d0 + (d1 - d0) * (x - x0) / (x1 - x0);
            }
        }
        self.knots[self.knots.len() - 1].1
    }
}
