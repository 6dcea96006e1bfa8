//! Servo-load signals: torque-to-load conversion, sensor noise, smoothing,
//! rectification and per-cycle medians.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;

/// Saturation of the servo load register, percent of stall torque.
pub const LOAD_LIMIT_PCT: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyJoint {
    Upper,
    Lower,
    Tail,
}

impl BodyJoint {
    pub const ALL: [BodyJoint; 3] = [BodyJoint::Upper, BodyJoint::Lower, BodyJoint::Tail];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyJoint::Upper => "upper",
            BodyJoint::Lower => "lower",
            BodyJoint::Tail => "tail",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|j| j.name() == s)
    }
}

/// A per-timestep load signal for one body joint.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadSeries {
    pub joint: BodyJoint,
    /// Load, signed percent of stall torque.
    pub samples: Vec<f64>,
    /// Cycle `c` spans `samples[bounds[c]..bounds[c + 1]]`.
    pub bounds: Vec<usize>,
}

impl LoadSeries {
    pub fn new(joint: BodyJoint, samples: Vec<f64>, bounds: Vec<usize>) -> Result<Self> {
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("cycle boundaries must be strictly increasing"));
        }
        if bounds.last().is_some_and(|&b| b > samples.len()) {
            return Err(invalid("cycle boundary beyond the end of the series"));
        }
        Ok(Self {
            joint,
            samples,
            bounds,
        })
    }

    /// Evenly spaced cycles of `per_cycle` samples covering the whole series.
    pub fn uniform(joint: BodyJoint, samples: Vec<f64>, per_cycle: usize) -> Result<Self> {
        if per_cycle == 0 {
            return Err(invalid("per_cycle must be positive"));
        }
        let bounds = (0..=samples.len() / per_cycle).map(|c| c * per_cycle).collect();
        Self::new(joint, samples, bounds)
    }

    pub fn cycles(&self) -> usize {
        self.bounds.len().saturating_sub(1)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            joint: self.joint,
            samples: self.samples.iter().map(|&x| f(x)).collect(),
            bounds: self.bounds.clone(),
        }
    }
}

/// Linear torque-to-load map `gain * tau`, clipped to the register range.
pub fn torque_to_load(series: &LoadSeries, gain: f64) -> Result<LoadSeries> {
    if !(gain > 0.0) {
        return Err(invalid(format!("load gain must be positive, got {gain}")));
    }
    Ok(series.map(|t| (gain * t).clamp(-LOAD_LIMIT_PCT, LOAD_LIMIT_PCT)))
}

/// Multiplicative sensor noise: each sample becomes `x (1 + cov z)`.
pub fn add_sensor_noise(series: &LoadSeries, cov: f64, seed: u64) -> Result<LoadSeries> {
    if !(cov >= 0.0) {
        return Err(invalid(format!("noise CoV must be non-negative, got {cov}")));
    }
    if cov == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = seed::rng(seed);
    let samples = series
        .samples
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x * (1.0 + cov * z)
        })
        .collect();
    Ok(LoadSeries {
        samples,
        ..series.clone()
    })
}

/// First-order exponential smoothing, seeded with the first sample.
pub fn lowpass(series: &LoadSeries, alpha: f64) -> Result<LoadSeries> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("smoothing factor {alpha} outside (0, 1]")));
    }
    let Some(&first) = series.samples.first() else {
        return Err(invalid("cannot filter an empty series"));
    };
    let mut y = first;
    let samples = series
        .samples
        .iter()
        .map(|&x| {
            y = alpha * x + (1.0 - alpha) * y;
            y
        })
        .collect();
    Ok(LoadSeries {
        samples,
        ..series.clone()
    })
}

pub fn rectify(series: &LoadSeries) -> LoadSeries {
    series.map(f64::abs)
}

/// Median with the mean-of-middle convention for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median of one cycle's samples.
pub fn cycle_median(series: &LoadSeries, cycle: usize) -> Result<f64> {
    if cycle >= series.cycles() {
        return Err(invalid(format!(
            "cycle {cycle} out of range (series has {} cycles)",
            series.cycles()
        )));
    }
    let window = &series.samples[series.bounds[cycle]..series.bounds[cycle + 1]];
    median(window).ok_or_else(|| invalid("empty cycle"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    LowpassThenRectify,
    RectifyThenLowpass,
}

/// Raw torque to per-cycle median load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadPipeline {
    /// Load percent per unit nondimensional torque.
    pub gain: f64,
    pub noise_cov: f64,
    pub alpha: f64,
    pub order: PipelineOrder,
}

impl Default for LoadPipeline {
    fn default() -> Self {
        Self {
            gain: 55.0,
            noise_cov: 0.13,
            alpha: 0.2,
            order: PipelineOrder::LowpassThenRectify,
        }
    }
}

impl LoadPipeline {
    pub fn noise_free(self) -> Self {
        Self {
            noise_cov: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0) {
            return Err(invalid("load gain must be positive"));
        }
        if !(self.noise_cov >= 0.0) {
            return Err(invalid("noise_cov must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Torque series to the rectified, filtered load signal.
    pub fn process(&self, torque: &LoadSeries, seed: u64) -> Result<LoadSeries> {
        let raw = add_sensor_noise(&torque_to_load(torque, self.gain)?, self.noise_cov, seed)?;
        Ok(match self.order {
            PipelineOrder::LowpassThenRectify => rectify(&lowpass(&raw, self.alpha)?),
            PipelineOrder::RectifyThenLowpass => lowpass(&rectify(&raw), self.alpha)?,
        })
    }

    /// Median load of every complete cycle.
    pub fn cycle_medians(&self, torque: &LoadSeries, seed: u64) -> Result<Vec<f64>> {
        let processed = self.process(torque, seed)?;
        (0..processed.cycles())
            .map(|c| cycle_median(&processed, c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(v: &[f64]) -> LoadSeries {
        let bounds = if v.is_empty() { vec![0] } else { vec![0, v.len()] };
        LoadSeries::new(BodyJoint::Lower, v.to_vec(), bounds).unwrap()
    }

    #[test]
    fn load_is_linear_and_clipped() {
        let s = series(&[0.0, 0.01, -0.02, 0.5]);
        let once = torque_to_load(&s, 100.0).unwrap();
        let twice = torque_to_load(&s, 200.0).unwrap();
        assert_eq!(once.samples[..3], [0.0, 1.0, -2.0]);
        for k in 0..3 {
            assert_abs_diff_eq!(twice.samples[k], 2.0 * once.samples[k]);
        }
        assert_eq!(twice.samples[3], LOAD_LIMIT_PCT);
        assert!(torque_to_load(&s, 0.0).is_err());
        let zero = torque_to_load(&series(&[0.0; 5]), 3.0).unwrap();
        assert!(zero.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noise_free_and_repeatable() {
        let s = series(&[1.0, -2.0, 3.0]);
        assert_eq!(add_sensor_noise(&s, 0.0, 9).unwrap(), s);
        assert_eq!(
            add_sensor_noise(&s, 0.13, 9).unwrap(),
            add_sensor_noise(&s, 0.13, 9).unwrap()
        );
        assert_ne!(
            add_sensor_noise(&s, 0.13, 9).unwrap(),
            add_sensor_noise(&s, 0.13, 10).unwrap()
        );
    }

    #[test]
    fn lowpass_examples() {
        let s = series(&[0.3, -1.0, 2.5, 7.0]);
        assert_eq!(lowpass(&s, 1.0).unwrap(), s);
        let c = lowpass(&series(&[4.0; 10]), 0.3).unwrap();
        assert!(c.samples.iter().all(|&x| (x - 4.0).abs() < 1e-15));
        // filter at rest (x[0] = 0), then a unit step: the j-th step sample
        // is 1 - 0.5^(j + 1)
        let mut step = vec![0.0];
        step.extend([1.0; 12]);
        let y = lowpass(&series(&step), 0.5).unwrap();
        for k in 1..step.len() {
            let j = k - 1;
            assert_abs_diff_eq!(y.samples[k], 1.0 - 0.5f64.powi(j as i32 + 1), epsilon = 1e-15);
        }
        assert!(lowpass(&series(&[]), 0.5).is_err());
        assert!(lowpass(&s, 0.0).is_err());
    }

    #[test]
    fn rectify_examples() {
        assert_eq!(rectify(&series(&[-3.0, 2.0, -1.0])).samples, [3.0, 2.0, 1.0]);
        let pos = series(&[0.0, 1.5, 2.0]);
        assert_eq!(rectify(&pos), pos);
    }

    #[test]
    fn median_examples() {
        assert_eq!(cycle_median(&series(&[1.0, 2.0, 3.0, 4.0, 5.0]), 0).unwrap(), 3.0);
        assert_eq!(cycle_median(&series(&[1.0, 2.0, 3.0, 4.0]), 0).unwrap(), 2.5);
        assert!(cycle_median(&series(&[1.0]), 1).is_err());
        let two = LoadSeries::uniform(BodyJoint::Tail, vec![5.0, 1.0, 9.0, 2.0, 4.0, 3.0], 3).unwrap();
        assert_eq!(cycle_median(&two, 0).unwrap(), 5.0);
        assert_eq!(cycle_median(&two, 1).unwrap(), 3.0);
    }

    #[test]
    fn bounds_are_validated() {
        assert!(LoadSeries::new(BodyJoint::Upper, vec![0.0; 4], vec![0, 2, 2]).is_err());
        assert!(LoadSeries::new(BodyJoint::Upper, vec![0.0; 4], vec![0, 5]).is_err());
    }

    #[test]
    fn empirical_cov_near_nominal() {
        let s = LoadSeries::uniform(BodyJoint::Lower, vec![40.0; 100_000], 100).unwrap();
        let noisy = add_sensor_noise(&s, 0.13, 2024).unwrap();
        let n = noisy.samples.len() as f64;
        let mean = noisy.samples.iter().sum::<f64>() / n;
        let var = noisy.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_abs_diff_eq!(var.sqrt() / mean, 0.13, epsilon = 0.005);
    }

    proptest! {
        #[test]
        fn rectify_idempotent(v in proptest::collection::vec(-100.0..100.0f64, 0..50)) {
            let once = rectify(&series(&v));
            prop_assert_eq!(rectify(&once), once);
        }

        #[test]
        fn median_permutation_invariant(mut v in proptest::collection::vec(-50.0..50.0f64, 1..40), seed in 0u64..1000) {
            let m = median(&v).unwrap();
            use rand::seq::SliceRandom;
            v.shuffle(&mut seed::rng(seed));
            prop_assert_eq!(median(&v).unwrap(), m);
        }
    }
}
