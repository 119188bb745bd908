//! XOR learnability self-test.

use serde::{Deserialize, Serialize};

use crate::booleanizer::BooleanFeatureVector;
use crate::error::Result;
use crate::tm::{LabeledLiterals, LiteralSet, TMHyperparams, TsetlinMachine};

/// The four XOR patterns over two features, each repeated `replicas` times.
pub fn xor_dataset(replicas: usize) -> LabeledLiterals {
    let mut inputs = Vec::with_capacity(4 * replicas);
    let mut labels = Vec::with_capacity(4 * replicas);
    for _ in 0..replicas {
        for (a, b) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
            inputs.push(LiteralSet::from_features(&BooleanFeatureVector::from(vec![a, b])));
            labels.push((a ^ b) as usize);
        }
    }
    LabeledLiterals::new(inputs, labels)
}

pub fn xor_hyperparams(seed: u64, epochs: usize) -> TMHyperparams {
    TMHyperparams {
        s: 3.9,
        threshold: 10,
        states_per_action: 100,
        clauses_per_class: 20,
        epochs,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XorReport {
    pub seed: u64,
    pub epochs: usize,
    /// First epoch at which training accuracy reached 100%.
    pub first_perfect_epoch: Option<usize>,
    pub final_train_acc: f64,
}

impl XorReport {
    pub fn passed(&self) -> bool {
        self.first_perfect_epoch.is_some()
    }
}

/// Trains on XOR (400 samples) and reports when training accuracy first hit 100%.
pub fn xor_selftest(seed: u64, epochs: usize) -> Result<(XorReport, TsetlinMachine)> {
    let data = xor_dataset(100);
    let mut tm = TsetlinMachine::new(2, 2, xor_hyperparams(seed, epochs))?;
    let outcome = tm.fit(&data, None, None, |_| {})?;
    let first_perfect_epoch = outcome
        .trace
        .iter()
        .find(|r| r.train_acc == Some(100.0))
        .map(|r| r.epoch);
    let final_train_acc = outcome
        .trace
        .last()
        .and_then(|r| r.train_acc)
        .unwrap_or_else(|| tm.accuracy(&data, &mut Default::default()).unwrap_or(0.0));
    Ok((
        XorReport {
            seed,
            epochs,
            first_perfect_epoch,
            final_train_acc,
        },
        tm,
    ))
}
