use crate::error::{KwsError, Result};

use super::OpCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Exclude,
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Reward,
    Penalty,
}

/// A two-action Tsetlin Automaton state in `1..=2N`.
/// `1..=N` selects Exclude, `N+1..=2N` selects Include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TAState {
    value: u16,
    states_per_action: u16,
}

impl TAState {
    pub fn new(value: u16, states_per_action: u16) -> Result<Self> {
        if states_per_action == 0 || value == 0 || value > 2 * states_per_action {
            return Err(KwsError::InvalidConfig(format!(
                "TA state {value} outside 1..={}",
                2 * states_per_action as u32
            )));
        }
        Ok(TAState {
            value,
            states_per_action,
        })
    }

    pub fn value(self) -> u16 {
        self.value
    }

    pub fn states_per_action(self) -> u16 {
        self.states_per_action
    }

    pub fn action(self) -> Action {
        if self.value > self.states_per_action {
            Action::Include
        } else {
            Action::Exclude
        }
    }

    /// Reward deepens the current action, Penalty moves toward (and across) the center.
    pub fn transition(self, event: Event) -> TAState {
        let max = 2 * self.states_per_action;
        let value = match (self.action(), event) {
            (Action::Exclude, Event::Reward) => self.value.saturating_sub(1).max(1),
            (Action::Include, Event::Reward) => (self.value + 1).min(max),
            (Action::Exclude, Event::Penalty) => self.value + 1,
            (Action::Include, Event::Penalty) => self.value - 1,
        };
        TAState { value, ..self }
    }
}

pub fn ta_transition(state: TAState, event: Event, counters: &mut OpCounters) -> TAState {
    counters.ta_updates += 1;
    state.transition(event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_crossing_and_saturation() {
        let mut c = OpCounters::default();
        let s = TAState::new(100, 100).unwrap();
        assert_eq!(s.action(), Action::Exclude);
        let crossed = ta_transition(s, Event::Penalty, &mut c);
        assert_eq!((crossed.value(), crossed.action()), (101, Action::Include));

        assert_eq!(
            ta_transition(TAState::new(1, 100).unwrap(), Event::Reward, &mut c).value(),
            1
        );
        assert_eq!(
            ta_transition(TAState::new(200, 100).unwrap(), Event::Reward, &mut c).value(),
            200
        );
        assert_eq!(c.ta_updates, 3);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(TAState::new(0, 3).is_err());
        assert!(TAState::new(7, 3).is_err());
        assert!(TAState::new(6, 3).is_ok());
    }
}
