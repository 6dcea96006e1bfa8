use std::path::Path;

use anyhow::Result;
use rand::seq::SliceRandom;
use terradapt::percept::{
    evaluate, knn_train, write_dataset, BodyJoint, DatasetRow, DepthClass, LabeledFeature,
};
use terradapt::seed::{derive_seed, rng};
use terradapt::terra::{simulate_trial, GaitSource, TerrainProfile, TrialRecord};

use super::{par_map, worker_count};
use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::report::{num, write_file, Check, Outcome, Table};

/// Lowest acceptable lower-joint accuracy.
pub const LOWER_ACCURACY: f64 = 0.9;

/// Seed stream for the train/test shuffle.
const SPLIT_STREAM: u64 = 1 << 41;

struct Job {
    index: usize,
    depth: f64,
    phase: f64,
    trial: usize,
}

/// Simulates the synthetic protocol, splits samples with a seeded shuffle,
/// trains one KNN per joint and scores it on the held-out samples.
pub fn run_classifier_eval(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let seed = cfg.require_seed(Experiment::Classify)?;
    let c = &cfg.classify;
    let sim = cfg.sim_config();
    let mut jobs = Vec::new();
    for &depth in &c.depths_mm {
        for &phase in &c.phases {
            for trial in 0..c.trials {
                jobs.push(Job {
                    index: jobs.len(),
                    depth,
                    phase,
                    trial,
                });
            }
        }
    }
    let records = par_map(&jobs, worker_count(cfg, jobs.len()), |j| {
        let terrain = TerrainProfile::constant(j.depth)?;
        simulate_trial(&sim, GaitSource::Fixed(cfg.gait_with_phase(j.phase)), &terrain, c.cycles, derive_seed(seed, j.index as u64))
    });

    let mut outcome = Outcome::new(Experiment::Classify);
    // one sample per (trial, cycle); each holds a row per joint
    let mut samples: Vec<[DatasetRow; 3]> = Vec::new();
    for (j, res) in jobs.iter().zip(records) {
        let rec: TrialRecord = match res {
            Ok(r) => r,
            Err(e) => {
                outcome
                    .failures
                    .push(format!("depth {} mm, phi {:.4}, trial {}: {e}", j.depth, j.phase, j.trial));
                continue;
            }
        };
        outcome.hygiene.record(&rec);
        let label = DepthClass::from_depth_mm(j.depth).expect("validated class depth");
        for cy in &rec.cycles {
            samples.push(BodyJoint::ALL.map(|joint| DatasetRow {
                joint,
                phi: cy.phase,
                tau_m: cy.median_load[joint.index()],
                depth: label,
                trial_id: j.trial,
                cycle_id: cy.cycle,
            }));
        }
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng(derive_seed(seed, SPLIT_STREAM)));
    let n_train = ((samples.len() as f64) * c.train_fraction).round() as usize;
    let (train, test) = order.split_at(n_train);
    for (name, part) in [("training", train), ("test", test)] {
        for class in DepthClass::ALL {
            if !part.iter().any(|&i| samples[i][0].depth == class) {
                return Err(ConfigError::DegenerateDataset(format!(
                    "the {name} split has no {} mm samples",
                    class.depth_mm()
                ))
                .into());
            }
        }
    }

    let mut summary = Table::new(&["joint", "k", "train_samples", "test_samples", "accuracy"]);
    let mut accuracy = [0.0; 3];
    for joint in BodyJoint::ALL {
        let features = |idx: &[usize]| -> Vec<LabeledFeature> { idx.iter().map(|&i| samples[i][joint.index()].feature()).collect() };
        let model = knn_train(&features(train), c.k)?;
        let m = evaluate(&model, &features(test))?;
        accuracy[joint.index()] = m.accuracy();
        summary.push(vec![
            joint.name().into(),
            c.k.to_string(),
            train.len().to_string(),
            test.len().to_string(),
            num(m.accuracy()),
        ]);
        outcome.files.push(write_file(out, &format!("confusion_{}.csv", joint.name()), &m.to_csv())?);
        outcome.files.push(write_file(out, &format!("confusion_{}.txt", joint.name()), &m.to_text())?);
    }

    let (u, l, t) = (accuracy[0], accuracy[1], accuracy[2]);
    outcome.checks.push(Check::new(
        "lower-joint accuracy",
        l >= LOWER_ACCURACY,
        format!("{l:.4} (need >= {LOWER_ACCURACY})"),
    ));
    outcome.checks.push(Check::new(
        "lower joint classifies best",
        l > u && l > t,
        format!("upper {u:.4}, lower {l:.4}, tail {t:.4}"),
    ));

    let mut rows: Vec<DatasetRow> = samples.iter().flatten().copied().collect();
    rows.sort_by(|a, b| {
        a.depth
            .cmp(&b.depth)
            .then(a.phi.total_cmp(&b.phi))
            .then(a.trial_id.cmp(&b.trial_id))
            .then(a.cycle_id.cmp(&b.cycle_id))
            .then(a.joint.cmp(&b.joint))
    });
    let mut buf = Vec::new();
    write_dataset(&rows, &mut buf)?;
    outcome.files.push(write_file(out, "classify_dataset.csv", &String::from_utf8(buf)?)?);
    outcome.files.push(summary.write(out, "classify_summary.csv")?);
    Ok(outcome)
}
