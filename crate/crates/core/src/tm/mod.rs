//! Multiclass Tsetlin Machine.
//!
//! Each class owns `m` clauses; clause `j` votes `+1` when `j` is even and
//! `-1` when odd. A clause is the conjunction of the literals whose Tsetlin
//! Automaton currently chooses Include. Literals are the `F` Boolean features
//! followed by their `F` negations.

mod automaton;
mod bank;
mod feedback;
mod machine;
mod persist;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

pub use automaton::{ta_transition, Action, Event, TAState};
pub use bank::{class_sum, evaluate_clause, make_literals, ClauseBank, EvalMode, LiteralSet, Polarity};
pub use machine::{EpochReport, FitOutcome, LabeledLiterals, TsetlinMachine};
pub use persist::{load_model, save_model, KwsModel, MODEL_FORMAT_VERSION};

use crate::error::{KwsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TMHyperparams {
    pub s: f64,
    #[serde(rename = "T")]
    pub threshold: u32,
    /// States per action, `N`. Each automaton holds a value in `1..=2N`.
    #[serde(rename = "N")]
    pub states_per_action: u16,
    #[serde(rename = "m")]
    pub clauses_per_class: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TMHyperparams {
    fn default() -> Self {
        TMHyperparams {
            s: 3.9,
            threshold: 23,
            states_per_action: 100,
            clauses_per_class: 450,
            epochs: 200,
            seed: 42,
        }
    }
}

impl TMHyperparams {
    /// Largest `N` whose states fit the one-byte-per-automaton model file.
    pub const MAX_STATES_PER_ACTION: u16 = 128;

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KwsError::InvalidConfig(msg));
        if !self.s.is_finite() || self.s <= 1.0 {
            return bad(format!("s must be > 1, got {}", self.s));
        }
        if self.threshold == 0 {
            return bad("threshold T must be >= 1".into());
        }
        if self.states_per_action == 0 || self.states_per_action > Self::MAX_STATES_PER_ACTION {
            return bad(format!(
                "states per action N must lie in 1..={}, got {}",
                Self::MAX_STATES_PER_ACTION,
                self.states_per_action
            ));
        }
        if self.clauses_per_class == 0 || !self.clauses_per_class.is_multiple_of(2) {
            return bad(format!(
                "clauses per class must be even and positive, got {}",
                self.clauses_per_class
            ));
        }
        Ok(())
    }
}

/// Deterministic operation counts used as an energy proxy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub clause_evaluations: u64,
    /// Reward/Penalty events delivered to automata, including saturated ones.
    pub ta_updates: u64,
    /// Clause-level feedbacks issued, `type_i_feedbacks + type_ii_feedbacks`.
    pub feedback_events: u64,
    pub type_i_feedbacks: u64,
    pub type_ii_feedbacks: u64,
}

impl Add for OpCounters {
    type Output = OpCounters;

    fn add(mut self, rhs: OpCounters) -> OpCounters {
        self += rhs;
        self
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: OpCounters) {
        self.clause_evaluations += rhs.clause_evaluations;
        self.ta_updates += rhs.ta_updates;
        self.feedback_events += rhs.feedback_events;
        self.type_i_feedbacks += rhs.type_i_feedbacks;
        self.type_ii_feedbacks += rhs.type_ii_feedbacks;
    }
}
