use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};

use super::bank::{ClauseBank, EvalMode, LiteralSet, Polarity};
use super::{OpCounters, TMHyperparams};

/// Literal sets paired with class labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledLiterals {
    pub inputs: Vec<LiteralSet>,
    pub labels: Vec<usize>,
}

impl LabeledLiterals {
    pub fn new(inputs: Vec<LiteralSet>, labels: Vec<usize>) -> Self {
        assert_eq!(inputs.len(), labels.len());
        LabeledLiterals { inputs, labels }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Accuracies (percent) after one epoch plus a snapshot of training op counts.
/// A split that was not supplied or is empty reports `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub counters: OpCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub trace: Vec<EpochReport>,
    /// Operations spent on feedback during training.
    pub training: OpCounters,
    /// Operations spent measuring per-epoch accuracies.
    pub inference: OpCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsetlinMachine {
    hyper: TMHyperparams,
    bank: ClauseBank,
}

impl TsetlinMachine {
    pub fn new(n_classes: usize, n_features: usize, hyper: TMHyperparams) -> Result<Self> {
        hyper.validate()?;
        if n_classes == 0 {
            return Err(KwsError::InvalidConfig("need at least one class".into()));
        }
        Ok(TsetlinMachine {
            bank: ClauseBank::new(n_classes, hyper.clauses_per_class, n_features, hyper.states_per_action),
            hyper,
        })
    }

    pub fn from_bank(bank: ClauseBank, hyper: TMHyperparams) -> Result<Self> {
        hyper.validate()?;
        if bank.clauses_per_class() != hyper.clauses_per_class || bank.states_per_action() != hyper.states_per_action {
            return Err(KwsError::InvalidConfig(
                "clause bank shape disagrees with hyperparameters".into(),
            ));
        }
        Ok(TsetlinMachine { hyper, bank })
    }

    pub fn hyperparams(&self) -> &TMHyperparams {
        &self.hyper
    }

    pub fn bank(&self) -> &ClauseBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut ClauseBank {
        &mut self.bank
    }

    pub fn n_classes(&self) -> usize {
        self.bank.n_classes()
    }

    pub fn n_features(&self) -> usize {
        self.bank.n_features()
    }

    /// Infer-mode class sums, one per class.
    pub fn class_sums(&self, literals: &LiteralSet, counters: &mut OpCounters) -> Vec<i64> {
        (0..self.n_classes())
            .map(|k| self.bank.class_vote(k, literals, EvalMode::Infer, counters))
            .collect()
    }

    /// Argmax of the class sums; ties go to the lowest class index.
    pub fn predict_counted(&self, literals: &LiteralSet, counters: &mut OpCounters) -> usize {
        argmax_lowest(&self.class_sums(literals, counters))
    }

    pub fn predict(&self, literals: &LiteralSet) -> usize {
        self.predict_counted(literals, &mut OpCounters::default())
    }

    /// Percentage of correctly classified inputs, `None` for an empty set.
    pub fn accuracy(&self, data: &LabeledLiterals, counters: &mut OpCounters) -> Option<f64> {
        if data.is_empty() {
            return None;
        }
        let (correct, ops) = data
            .inputs
            .par_iter()
            .zip(&data.labels)
            .map(|(x, &y)| {
                let mut ops = OpCounters::default();
                let hit = (self.predict_counted(x, &mut ops) == y) as usize;
                (hit, ops)
            })
            .reduce(|| (0, OpCounters::default()), |a, b| (a.0 + b.0, a.1 + b.1));
        *counters += ops;
        Some(100.0 * correct as f64 / data.len() as f64)
    }

    /// Confusion counts, `matrix[true][predicted]`.
    pub fn confusion(&self, data: &LabeledLiterals) -> Vec<Vec<u64>> {
        let k = self.n_classes();
        let mut m = vec![vec![0u64; k]; k];
        for (x, &y) in data.inputs.iter().zip(&data.labels) {
            m[y][self.predict(x)] += 1;
        }
        m
    }

    /// One training step on a single labelled input.
    ///
    /// RNG order: target-class clause selections, the negative-class draw,
    /// negative-class clause selections, then the per-literal draws of each
    /// Type I feedback in the order the clauses were visited.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        literals: &LiteralSet,
        target: usize,
        rng: &mut R,
        counters: &mut OpCounters,
    ) {
        let k = self.n_classes();
        assert!(target < k, "target class {target} out of range");
        let m = self.hyper.clauses_per_class;
        let t = self.hyper.threshold as i64;
        let polarities = self.bank.polarities();

        let target_out = self.bank.class_outputs(target, literals, EvalMode::Train, counters);
        let v = super::class_sum(&target_out, &polarities).clamp(-t, t);
        let p_target = (t - v) as f64 / (2 * t) as f64;
        let target_sel: Vec<bool> = (0..m).map(|_| rng.random::<f64>() < p_target).collect();

        let negative = if k > 1 {
            let mut n = rng.random_range(0..k - 1);
            if n >= target {
                n += 1;
            }
            let out = self.bank.class_outputs(n, literals, EvalMode::Train, counters);
            let v = super::class_sum(&out, &polarities).clamp(-t, t);
            let p = (t + v) as f64 / (2 * t) as f64;
            let sel: Vec<bool> = (0..m).map(|_| rng.random::<f64>() < p).collect();
            Some((n, out, sel))
        } else {
            None
        };

        let s = self.hyper.s;
        for j in (0..m).filter(|&j| target_sel[j]) {
            match Polarity::of_clause(j) {
                Polarity::Positive => self
                    .bank
                    .type_i_feedback(target, j, literals, target_out[j], s, rng, counters),
                Polarity::Negative => self.bank.type_ii_feedback(target, j, literals, target_out[j], counters),
            }
        }
        if let Some((n, out, sel)) = negative {
            for j in (0..m).filter(|&j| sel[j]) {
                match Polarity::of_clause(j) {
                    Polarity::Positive => self.bank.type_ii_feedback(n, j, literals, out[j], counters),
                    Polarity::Negative => self.bank.type_i_feedback(n, j, literals, out[j], s, rng, counters),
                }
            }
        }
    }

    /// Trains for `hyperparams.epochs` epochs, visiting the training set in a
    /// freshly shuffled order each epoch. `on_epoch` sees every report as it is produced.
    pub fn fit<F: FnMut(&EpochReport)>(
        &mut self,
        train: &LabeledLiterals,
        test: Option<&LabeledLiterals>,
        validation: Option<&LabeledLiterals>,
        mut on_epoch: F,
    ) -> Result<FitOutcome> {
        for (x, &y) in train.inputs.iter().zip(&train.labels) {
            if x.len() != self.bank.n_literals() {
                return Err(KwsError::Dimension {
                    expected: self.bank.n_literals(),
                    got: x.len(),
                });
            }
            if y >= self.n_classes() {
                return Err(KwsError::InvalidConfig(format!("label {y} out of range")));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.hyper.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut training = OpCounters::default();
        let mut inference = OpCounters::default();
        let mut trace = Vec::with_capacity(self.hyper.epochs);

        for epoch in 1..=self.hyper.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                self.update(&train.inputs[i], train.labels[i], &mut rng, &mut training);
            }
            let report = EpochReport {
                epoch,
                train_acc: self.accuracy(train, &mut inference),
                test_acc: test.and_then(|d| self.accuracy(d, &mut inference)),
                val_acc: validation.and_then(|d| self.accuracy(d, &mut inference)),
                counters: training,
            };
            on_epoch(&report);
            trace.push(report);
        }

        Ok(FitOutcome {
            trace,
            training,
            inference,
        })
    }
}

fn argmax_lowest(values: &[i64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
