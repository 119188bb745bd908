use crate::booleanizer::BooleanFeatureVector;
use crate::error::{KwsError, Result};

use super::automaton::{Action, TAState};
use super::OpCounters;

/// Train mode lets a clause with no included literal output 1 so it can
/// still receive Type I feedback; Infer mode silences it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn of_clause(j: usize) -> Polarity {
        if j.is_multiple_of(2) {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

/// `[x_0 .. x_{F-1}, ¬x_0 .. ¬x_{F-1}]`.
pub fn make_literals(features: &BooleanFeatureVector) -> Vec<u8> {
    let f = &features.bits;
    f.iter().copied().chain(f.iter().map(|&b| 1 - (b & 1))).collect()
}

/// Literals of one input, both as bytes and packed 64 to a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralSet {
    bits: Vec<u8>,
    packed: Vec<u64>,
}

impl LiteralSet {
    pub fn from_features(features: &BooleanFeatureVector) -> Self {
        Self::from_literals(make_literals(features))
    }

    /// Wraps an already-built `2F` literal vector.
    pub fn from_literals(bits: Vec<u8>) -> Self {
        let mut packed = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                packed[i / 64] |= 1 << (i % 64);
            }
        }
        LiteralSet { bits, packed }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.bits.len() / 2
    }
}

/// Clause output from a row of automata, evaluated literal by literal.
pub fn evaluate_clause(ta_row: &[TAState], literals: &[u8], mode: EvalMode, counters: &mut OpCounters) -> u8 {
    assert_eq!(ta_row.len(), literals.len(), "TA row and literal lengths differ");
    counters.clause_evaluations += 1;
    let mut any_included = false;
    for (ta, &lit) in ta_row.iter().zip(literals) {
        if ta.action() == Action::Include {
            any_included = true;
            if lit == 0 {
                return 0;
            }
        }
    }
    match (any_included, mode) {
        (true, _) | (false, EvalMode::Train) => 1,
        (false, EvalMode::Infer) => 0,
    }
}

/// `Σ polarity_j · output_j`.
pub fn class_sum(outputs: &[u8], polarities: &[Polarity]) -> i64 {
    assert_eq!(outputs.len(), polarities.len());
    outputs.iter().zip(polarities).map(|(&o, p)| o as i64 * p.sign()).sum()
}

/// Automata for every class, clause and literal (`K × m × 2F`), with a
/// packed include mask per clause kept in sync with the states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseBank {
    n_classes: usize,
    clauses_per_class: usize,
    n_features: usize,
    states_per_action: u16,
    states: Vec<u16>,
    include: Vec<u64>,
    words: usize,
}

impl ClauseBank {
    /// All automata start at `N`, the Exclude side of the boundary.
    pub fn new(n_classes: usize, clauses_per_class: usize, n_features: usize, states_per_action: u16) -> Self {
        let literals = 2 * n_features;
        let states = vec![states_per_action; n_classes * clauses_per_class * literals];
        Self::from_states_unchecked(n_classes, clauses_per_class, n_features, states_per_action, states)
    }

    pub fn from_states(
        n_classes: usize,
        clauses_per_class: usize,
        n_features: usize,
        states_per_action: u16,
        states: Vec<u16>,
    ) -> Result<Self> {
        let expected = n_classes * clauses_per_class * 2 * n_features;
        if states.len() != expected {
            return Err(KwsError::Dimension {
                expected,
                got: states.len(),
            });
        }
        let max = 2 * states_per_action;
        if let Some(bad) = states.iter().find(|&&v| v == 0 || v > max) {
            return Err(KwsError::Parse(format!("TA state {bad} outside 1..={max}")));
        }
        Ok(Self::from_states_unchecked(
            n_classes,
            clauses_per_class,
            n_features,
            states_per_action,
            states,
        ))
    }

    fn from_states_unchecked(
        n_classes: usize,
        clauses_per_class: usize,
        n_features: usize,
        states_per_action: u16,
        states: Vec<u16>,
    ) -> Self {
        let literals = 2 * n_features;
        let words = literals.div_ceil(64);
        let mut include = vec![0u64; n_classes * clauses_per_class * words];
        if literals > 0 {
            for (clause, row) in states.chunks_exact(literals).enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    if v > states_per_action {
                        include[clause * words + k / 64] |= 1 << (k % 64);
                    }
                }
            }
        }
        ClauseBank {
            n_classes,
            clauses_per_class,
            n_features,
            states_per_action,
            states,
            include,
            words,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn clauses_per_class(&self) -> usize {
        self.clauses_per_class
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_literals(&self) -> usize {
        2 * self.n_features
    }

    pub fn states_per_action(&self) -> u16 {
        self.states_per_action
    }

    /// Raw state values, class-major then clause then literal.
    pub fn states(&self) -> &[u16] {
        &self.states
    }

    pub fn polarities(&self) -> Vec<Polarity> {
        (0..self.clauses_per_class).map(Polarity::of_clause).collect()
    }

    fn clause_id(&self, class: usize, clause: usize) -> usize {
        debug_assert!(class < self.n_classes && clause < self.clauses_per_class);
        class * self.clauses_per_class + clause
    }

    pub fn row(&self, class: usize, clause: usize) -> &[u16] {
        let l = self.n_literals();
        let id = self.clause_id(class, clause);
        &self.states[id * l..(id + 1) * l]
    }

    pub fn ta_row(&self, class: usize, clause: usize) -> Vec<TAState> {
        self.row(class, clause)
            .iter()
            .map(|&v| TAState::new(v, self.states_per_action).expect("bank holds valid states"))
            .collect()
    }

    pub fn state(&self, class: usize, clause: usize, literal: usize) -> TAState {
        let v = self.row(class, clause)[literal];
        TAState::new(v, self.states_per_action).expect("bank holds valid states")
    }

    /// Overwrites one automaton, keeping the include mask in sync.
    pub fn set_state(&mut self, class: usize, clause: usize, literal: usize, state: TAState) {
        assert_eq!(state.states_per_action(), self.states_per_action);
        let id = self.clause_id(class, clause);
        self.write(id, literal, state.value());
    }

    fn write(&mut self, id: usize, literal: usize, value: u16) {
        let l = self.n_literals();
        self.states[id * l + literal] = value;
        let word = &mut self.include[id * self.words + literal / 64];
        let bit = 1u64 << (literal % 64);
        if value > self.states_per_action {
            *word |= bit;
        } else {
            *word &= !bit;
        }
    }

    /// Applies a Reward or Penalty to one automaton.
    pub(crate) fn apply(&mut self, id: usize, literal: usize, event: super::Event, counters: &mut OpCounters) {
        let old = self.states[id * self.n_literals() + literal];
        let state = TAState::new(old, self.states_per_action).expect("bank holds valid states");
        let next = super::ta_transition(state, event, counters).value();
        if next != old {
            self.write(id, literal, next);
        }
    }

    pub(crate) fn id(&self, class: usize, clause: usize) -> usize {
        self.clause_id(class, clause)
    }

    pub(crate) fn action_at(&self, id: usize, literal: usize) -> Action {
        if self.states[id * self.n_literals() + literal] > self.states_per_action {
            Action::Include
        } else {
            Action::Exclude
        }
    }

    pub fn clause_output(
        &self,
        class: usize,
        clause: usize,
        literals: &LiteralSet,
        mode: EvalMode,
        counters: &mut OpCounters,
    ) -> u8 {
        assert_eq!(literals.len(), self.n_literals(), "literal count mismatch");
        counters.clause_evaluations += 1;
        let id = self.clause_id(class, clause);
        let mask = &self.include[id * self.words..(id + 1) * self.words];
        let mut any_included = false;
        for (&inc, &lit) in mask.iter().zip(&literals.packed) {
            if inc & !lit != 0 {
                return 0;
            }
            any_included |= inc != 0;
        }
        match (any_included, mode) {
            (true, _) | (false, EvalMode::Train) => 1,
            (false, EvalMode::Infer) => 0,
        }
    }

    pub fn class_outputs(
        &self,
        class: usize,
        literals: &LiteralSet,
        mode: EvalMode,
        counters: &mut OpCounters,
    ) -> Vec<u8> {
        (0..self.clauses_per_class)
            .map(|j| self.clause_output(class, j, literals, mode, counters))
            .collect()
    }

    pub fn class_vote(&self, class: usize, literals: &LiteralSet, mode: EvalMode, counters: &mut OpCounters) -> i64 {
        (0..self.clauses_per_class)
            .map(|j| self.clause_output(class, j, literals, mode, counters) as i64 * Polarity::of_clause(j).sign())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_with_includes(n_literals: usize, includes: &[usize], n: u16) -> Vec<TAState> {
        (0..n_literals)
            .map(|k| TAState::new(if includes.contains(&k) { n + 1 } else { n }, n).unwrap())
            .collect()
    }

    #[test]
    fn literals_append_negations() {
        assert_eq!(make_literals(&vec![1, 0].into()), vec![1, 0, 0, 1]);
        assert_eq!(make_literals(&vec![0, 0, 0].into()), vec![0, 0, 0, 1, 1, 1]);
        let x: BooleanFeatureVector = vec![1, 0, 1, 1].into();
        let negated = make_literals(&x)[4..].to_vec();
        let twice = make_literals(&negated.into());
        assert_eq!(&twice[4..], &x.bits[..]);
    }

    #[test]
    fn clause_evaluation_cases() {
        let mut c = OpCounters::default();
        let lits = make_literals(&vec![1, 0].into());
        // x1 and ¬x2
        assert_eq!(
            evaluate_clause(&row_with_includes(4, &[0, 3], 100), &lits, EvalMode::Infer, &mut c),
            1
        );
        // x2
        assert_eq!(
            evaluate_clause(&row_with_includes(4, &[1], 100), &lits, EvalMode::Infer, &mut c),
            0
        );
        let empty = row_with_includes(4, &[], 100);
        assert_eq!(evaluate_clause(&empty, &lits, EvalMode::Infer, &mut c), 0);
        assert_eq!(evaluate_clause(&empty, &lits, EvalMode::Train, &mut c), 1);
        assert_eq!(c.clause_evaluations, 4);
    }

    #[test]
    fn class_sum_cases() {
        let pol: Vec<Polarity> = (0..4).map(Polarity::of_clause).collect();
        assert_eq!(class_sum(&[1, 1, 0, 1], &pol), -1);
        assert_eq!(class_sum(&[0, 0, 0, 0], &pol), 0);
        assert_eq!(class_sum(&[1, 1, 1, 1], &pol), 0);
    }

    #[test]
    fn packed_masks_track_states() {
        let mut bank = ClauseBank::new(1, 2, 40, 3);
        let lits = LiteralSet::from_features(&vec![1; 40].into());
        let mut c = OpCounters::default();
        assert_eq!(bank.clause_output(0, 0, &lits, EvalMode::Infer, &mut c), 0);

        // include ¬x_39, which sits in the second mask word and is 0 here
        bank.set_state(0, 0, 79, TAState::new(4, 3).unwrap());
        assert_eq!(bank.clause_output(0, 0, &lits, EvalMode::Infer, &mut c), 0);
        assert_eq!(bank.clause_output(0, 0, &lits, EvalMode::Train, &mut c), 0);
        bank.set_state(0, 0, 79, TAState::new(3, 3).unwrap());
        bank.set_state(0, 0, 39, TAState::new(6, 3).unwrap());
        assert_eq!(bank.clause_output(0, 0, &lits, EvalMode::Infer, &mut c), 1);

        let rebuilt = ClauseBank::from_states(1, 2, 40, 3, bank.states().to_vec()).unwrap();
        assert_eq!(rebuilt, bank);
    }

    #[test]
    fn from_states_validates() {
        assert!(ClauseBank::from_states(1, 2, 1, 3, vec![1; 3]).is_err());
        assert!(ClauseBank::from_states(1, 2, 1, 3, vec![7, 1, 1, 1]).is_err());
    }
}
