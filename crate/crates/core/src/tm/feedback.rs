//! Type I and Type II clause feedback.
//!
//! Type I (against false negatives), one RNG draw per literal in literal order:
//!
//! | clause | literal | draw below  | Include TA | Exclude TA |
//! |--------|---------|-------------|------------|------------|
//! | 1      | 1       | (s - 1) / s | Reward     | Penalty    |
//! | 1      | 0       | 1 / s       | Penalty    | Reward     |
//! | 0      | any     | 1 / s       | Penalty    | Reward     |
//!
//! Type II (against false positives) is deterministic: when the clause fires,
//! every Exclude automaton whose literal is 0 gets a Penalty.

use rand::Rng;

use super::automaton::{Action, Event};
use super::bank::{ClauseBank, LiteralSet};
use super::OpCounters;

impl ClauseBank {
    #[allow(clippy::too_many_arguments)]
    pub fn type_i_feedback<R: Rng + ?Sized>(
        &mut self,
        class: usize,
        clause: usize,
        literals: &LiteralSet,
        clause_output: u8,
        s: f64,
        rng: &mut R,
        counters: &mut OpCounters,
    ) {
        let id = self.id(class, clause);
        let strong = (s - 1.0) / s;
        let weak = 1.0 / s;
        counters.type_i_feedbacks += 1;
        counters.feedback_events += 1;
        for (k, &lit) in literals.bits().iter().enumerate() {
            let draw: f64 = rng.random();
            let action = self.action_at(id, k);
            let event = if clause_output == 1 && lit == 1 {
                (draw < strong).then_some(match action {
                    Action::Include => Event::Reward,
                    Action::Exclude => Event::Penalty,
                })
            } else {
                (draw < weak).then_some(match action {
                    Action::Include => Event::Penalty,
                    Action::Exclude => Event::Reward,
                })
            };
            if let Some(event) = event {
                self.apply(id, k, event, counters);
            }
        }
    }

    pub fn type_ii_feedback(
        &mut self,
        class: usize,
        clause: usize,
        literals: &LiteralSet,
        clause_output: u8,
        counters: &mut OpCounters,
    ) {
        counters.type_ii_feedbacks += 1;
        counters.feedback_events += 1;
        if clause_output == 0 {
            return;
        }
        let id = self.id(class, clause);
        for (k, &lit) in literals.bits().iter().enumerate() {
            if lit == 0 && self.action_at(id, k) == Action::Exclude {
                self.apply(id, k, Event::Penalty, counters);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tm::{EvalMode, TAState};

    #[test]
    fn type_ii_pushes_zero_literals_toward_include() {
        let mut bank = ClauseBank::new(1, 2, 2, 100);
        let lits = LiteralSet::from_literals(vec![1, 0, 0, 1]);
        let mut c = OpCounters::default();
        bank.type_ii_feedback(0, 0, &lits, 1, &mut c);
        assert_eq!(bank.row(0, 0), &[100, 101, 101, 100]);
        assert_eq!(c.ta_updates, 2);
    }

    #[test]
    fn type_ii_on_silent_clause_is_inaction() {
        let mut bank = ClauseBank::new(1, 2, 2, 100);
        let before = bank.clone();
        let lits = LiteralSet::from_literals(vec![1, 0, 0, 1]);
        bank.type_ii_feedback(0, 0, &lits, 0, &mut OpCounters::default());
        assert_eq!(bank, before);
    }

    #[test]
    fn repeated_type_ii_silences_clause_on_that_input() {
        let n = 5;
        let mut bank = ClauseBank::new(1, 2, 3, n);
        // clause includes x_0 only
        bank.set_state(0, 0, 0, TAState::new(n + 3, n).unwrap());
        let lits = LiteralSet::from_literals(vec![1, 0, 1, 0, 1, 0]);
        let mut c = OpCounters::default();
        let mut steps = 0;
        while bank.clause_output(0, 0, &lits, EvalMode::Infer, &mut c) == 1 {
            bank.type_ii_feedback(0, 0, &lits, 1, &mut c);
            steps += 1;
            assert!(steps <= 2 * n as usize, "never converged");
        }
        // the first penalty crosses the boundary from N
        assert_eq!(steps, 1);
    }

    #[test]
    fn type_i_is_seed_deterministic() {
        let lits = LiteralSet::from_literals(vec![1, 0, 1, 0, 1, 0, 0, 1]);
        let run = |seed| {
            let mut bank = ClauseBank::new(1, 2, 4, 10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                bank.type_i_feedback(0, 0, &lits, 1, 3.9, &mut rng, &mut OpCounters::default());
            }
            bank
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn type_i_with_firing_clause_learns_the_input() {
        // with s very large, literals equal to 1 are pushed to Include almost surely
        let lits = LiteralSet::from_literals(vec![1, 0, 0, 1]);
        let mut bank = ClauseBank::new(1, 2, 2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            bank.type_i_feedback(0, 0, &lits, 1, 1e9, &mut rng, &mut OpCounters::default());
        }
        assert_eq!(bank.row(0, 0), &[20, 10, 10, 20]);
    }
}
