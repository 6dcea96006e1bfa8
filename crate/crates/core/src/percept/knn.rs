//! K-nearest-neighbour depth classification over (median load, phase offset).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bead depth class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepthClass {
    Flat,
    Shallow,
    Deep,
}

impl DepthClass {
    pub const ALL: [DepthClass; 3] = [DepthClass::Flat, DepthClass::Shallow, DepthClass::Deep];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn depth_mm(self) -> f64 {
        match self {
            DepthClass::Flat => 0.0,
            DepthClass::Shallow => 20.0,
            DepthClass::Deep => 40.0,
        }
    }

    pub fn from_depth_mm(depth: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.depth_mm() == depth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeature {
    /// Median load, percent.
    pub tau_m: f64,
    /// Commanded body phase offset, radians.
    pub phi: f64,
    pub label: DepthClass,
}

/// A trained KNN model with z-scored features.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthClassifier {
    k: usize,
    mean: [f64; 2],
    scale: [f64; 2],
    points: Vec<[f64; 2]>,
    labels: Vec<DepthClass>,
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

pub fn knn_train(data: &[LabeledFeature], k: usize) -> Result<DepthClassifier> {
    if data.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if k == 0 || k > data.len() {
        return Err(invalid(format!(
            "k = {k} must lie in 1..={} (training size)",
            data.len()
        )));
    }
    if data.iter().any(|d| !d.tau_m.is_finite() || !d.phi.is_finite()) {
        return Err(invalid("training features must be finite"));
    }
    let (m0, s0) = mean_and_scale(data.iter().map(|d| d.tau_m));
    let (m1, s1) = mean_and_scale(data.iter().map(|d| d.phi));
    let mean = [m0, m1];
    let scale = [s0, s1];
    Ok(DepthClassifier {
        k,
        mean,
        scale,
        points: data
            .iter()
            .map(|d| [(d.tau_m - m0) / s0, (d.phi - m1) / s1])
            .collect(),
        labels: data.iter().map(|d| d.label).collect(),
    })
}

impl DepthClassifier {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Feature standardization as (mean, scale) per dimension.
    pub fn standardization(&self) -> ([f64; 2], [f64; 2]) {
        (self.mean, self.scale)
    }

    pub fn standardize(&self, tau_m: f64, phi: f64) -> [f64; 2] {
        [
            (tau_m - self.mean[0]) / self.scale[0],
            (phi - self.mean[1]) / self.scale[1],
        ]
    }

    /// Squared standardized distances from a query to every training point.
    pub fn distances(&self, tau_m: f64, phi: f64) -> Vec<f64> {
        let q = self.standardize(tau_m, phi);
        self.points
            .iter()
            .map(|p| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
            .collect()
    }

    pub fn labels(&self) -> &[DepthClass] {
        &self.labels
    }
}

/// Majority vote over neighbours listed nearest first. Ties go to the class
/// with the nearest member, then to the shallower class.
pub fn vote(neighbours_nearest_first: &[DepthClass]) -> DepthClass {
    let mut counts = [0usize; 3];
    let mut first_seen = [usize::MAX; 3];
    for (rank, c) in neighbours_nearest_first.iter().enumerate() {
        counts[c.index()] += 1;
        first_seen[c.index()] = first_seen[c.index()].min(rank);
    }
    DepthClass::ALL
        .into_iter()
        .filter(|c| counts[c.index()] > 0)
        .min_by(|a, b| {
            counts[b.index()]
                .cmp(&counts[a.index()])
                .then(first_seen[a.index()].cmp(&first_seen[b.index()]))
                .then(a.cmp(b))
        })
        .expect("at least one neighbour")
}

/// Predicted depth class for a (median load, phase) query.
///
/// Neighbours are ordered by standardized distance, then training index.
pub fn knn_classify(c: &DepthClassifier, tau_m: f64, phi: f64) -> DepthClass {
    let d = c.distances(tau_m, phi);
    let key = |&i: &usize| (d[i], i);
    let cmp = |a: &usize, b: &usize| {
        let (da, ia) = key(a);
        let (db, ib) = key(b);
        da.total_cmp(&db).then(ia.cmp(&ib))
    };
    let mut idx: Vec<usize> = (0..d.len()).collect();
    if c.k < idx.len() {
        idx.select_nth_unstable_by(c.k - 1, cmp);
        idx.truncate(c.k);
    }
    idx.sort_by(cmp);
    let neighbours: Vec<DepthClass> = idx.iter().map(|&i| c.labels[i]).collect();
    vote(&neighbours)
}

/// Row-major confusion matrix: rows are true classes, columns predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn row_total(&self, class: DepthClass) -> usize {
        self.counts[class.index()].iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_depth_mm,pred_0mm,pred_20mm,pred_40mm\n");
        for c in DepthClass::ALL {
            let row = self.counts[c.index()];
            let _ = writeln!(out, "{},{},{},{}", c.depth_mm(), row[0], row[1], row[2]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:>10} {:>8} {:>8} {:>8}\n", "true\\pred", "0mm", "20mm", "40mm");
        for c in DepthClass::ALL {
            let row = self.counts[c.index()];
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>8} {:>8}",
                format!("{}mm", c.depth_mm()),
                row[0],
                row[1],
                row[2]
            );
        }
        let _ = writeln!(out, "accuracy {:.4}", self.accuracy());
        out
    }
}

pub fn evaluate(c: &DepthClassifier, test: &[LabeledFeature]) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(invalid("test set is empty"));
    }
    let mut m = ConfusionMatrix::default();
    for f in test {
        let pred = knn_classify(c, f.tau_m, f.phi);
        m.counts[f.label.index()][pred.index()] += 1;
    }
    Ok(m)
}

/// Piecewise-linear depth estimate from median load, built from the two
/// class boundaries of a classifier along a fixed-phase probe line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDepthEstimator {
    /// Load at the flat/shallow boundary, mapped to 10 mm.
    pub lower_boundary: f64,
    /// Load at the shallow/deep boundary, mapped to 30 mm.
    pub upper_boundary: f64,
}

impl LinearDepthEstimator {
    pub fn estimate(&self, tau_m: f64) -> f64 {
        let slope = 20.0 / (self.upper_boundary - self.lower_boundary);
        (10.0 + slope * (tau_m - self.lower_boundary)).clamp(0.0, 40.0)
    }
}

/// Number of probe points along the load axis.
const PROBE_POINTS: usize = 2001;

fn bisect(c: &DepthClassifier, phi: f64, mut lo: f64, mut hi: f64) -> f64 {
    let left = knn_classify(c, lo, phi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if knn_classify(c, mid, phi) == left {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans the load axis at phase `phi` and fits the linear depth map.
///
/// Fails with a structure error unless the decision regions along the probe
/// run flat, shallow, deep exactly once each, in that order.
pub fn depth_from_load_linear(c: &DepthClassifier, phi: f64) -> Result<LinearDepthEstimator> {
    let (mean, scale) = c.standardization();
    let (lo, hi) = c
        .points
        .iter()
        .map(|p| p[0] * scale[0] + mean[0])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.25 * (hi - lo).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);
    let probe: Vec<f64> = (0..PROBE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (PROBE_POINTS - 1) as f64)
        .collect();
    let labels: Vec<DepthClass> = probe.iter().map(|&t| knn_classify(c, t, phi)).collect();
    let mut runs: Vec<(DepthClass, usize)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if runs.last().is_none_or(|&(prev, _)| prev != l) {
            runs.push((l, i));
        }
    }
    let sequence: Vec<DepthClass> = runs.iter().map(|r| r.0).collect();
    if sequence != DepthClass::ALL {
        return Err(Error::Structure(format!(
            "decision regions along the load axis at phi = {phi:.4} run {sequence:?}, expected flat, shallow, deep"
        )));
    }
    let boundary = |run: usize| {
        let i = runs[run].1;
        bisect(c, phi, probe[i - 1], probe[i])
    };
    Ok(LinearDepthEstimator {
        lower_boundary: boundary(1),
        upper_boundary: boundary(2),
    })
}
