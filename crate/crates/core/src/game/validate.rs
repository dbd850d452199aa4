use std::fmt;

use super::{ObservationId, OneSidedPosg, Player, StateId};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotNormalized {
        state: String,
        action: String,
        sum: f64,
    },
    ProbabilityOutOfRange {
        state: String,
        action: String,
        successor: String,
        prob: f64,
    },
    Deadlock {
        state: String,
    },
    Alternation {
        state: String,
        action: String,
        successor: String,
    },
    Discount {
        value: f64,
    },
    MissingObservation {
        state: String,
    },
    ObservedDeceiverState {
        state: String,
    },
    InconsistentActions {
        observation: String,
        first: String,
        second: String,
    },
    NonFiniteCost {
        state: String,
        action: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotNormalized { state, action, sum } => {
                write!(f, "distribution not normalized at ({state}, {action}): sum = {sum}")
            }
            Violation::ProbabilityOutOfRange {
                state,
                action,
                successor,
                prob,
            } => write!(
                f,
                "probability out of range at ({state}, {action}) -> {successor}: {prob}"
            ),
            Violation::Deadlock { state } => write!(f, "deadlock: {state} has no enabled action"),
            Violation::Alternation {
                state,
                action,
                successor,
            } => write!(
                f,
                "bipartite alternation broken: ({state}, {action}) -> {successor} stays with the same player"
            ),
            Violation::Discount { value } => write!(f, "discount {value} is not in [0, 1)"),
            Violation::MissingObservation { state } => {
                write!(f, "infiltrator state {state} has no observation")
            }
            Violation::ObservedDeceiverState { state } => {
                write!(f, "deceiver state {state} carries an observation")
            }
            Violation::InconsistentActions {
                observation,
                first,
                second,
            } => write!(
                f,
                "observation {observation}: states {first} and {second} enable different actions"
            ),
            Violation::NonFiniteCost { state, action } => {
                write!(f, "non-finite cost at ({state}, {action})")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of the model and reports all violations.
pub fn validate(posg: &OneSidedPosg) -> ValidationReport {
    let game = posg.game();
    let name = |s: StateId| game.state(s).name.clone();
    let mut violations = Vec::new();

    let g = game.discount();
    if !(0.0..1.0).contains(&g) {
        violations.push(Violation::Discount { value: g });
    }

    for s in 0..game.num_states() {
        let player = game.player(s);
        if game.choices(s).is_empty() && !posg.is_target(s) {
            violations.push(Violation::Deadlock { state: name(s) });
        }
        match (player, posg.observation(s)) {
            (Player::Infiltrator, None) => violations.push(Violation::MissingObservation { state: name(s) }),
            (Player::Deceiver, Some(_)) => violations.push(Violation::ObservedDeceiverState { state: name(s) }),
            _ => {}
        }
        for c in game.choices(s) {
            let action = game.action_name(c.action).to_string();
            if !c.cost.is_finite() {
                violations.push(Violation::NonFiniteCost {
                    state: name(s),
                    action: action.clone(),
                });
            }
            let mut sum = 0.0;
            for &(t, p) in &c.successors {
                sum += p;
                if !(-TOL..=1.0 + TOL).contains(&p) || !p.is_finite() {
                    violations.push(Violation::ProbabilityOutOfRange {
                        state: name(s),
                        action: action.clone(),
                        successor: name(t),
                        prob: p,
                    });
                }
                if p > 0.0 && game.player(t) == player {
                    violations.push(Violation::Alternation {
                        state: name(s),
                        action: action.clone(),
                        successor: name(t),
                    });
                }
            }
            if (sum - 1.0).abs() > TOL {
                violations.push(Violation::NotNormalized {
                    state: name(s),
                    action,
                    sum,
                });
            }
        }
    }

    // States sharing an observation must enable the same actions. Absorbing
    // targets without actions are exempt.
    let mut reference: Vec<Option<StateId>> = vec![None; posg.num_observations()];
    for s in posg.infiltrator_states() {
        let Some(z) = posg.observation(s) else { continue };
        if posg.is_target(s) && game.choices(s).is_empty() {
            continue;
        }
        let z: ObservationId = z;
        match reference[z] {
            None => reference[z] = Some(s),
            Some(r) => {
                if !game.enabled(r).eq(game.enabled(s)) {
                    violations.push(Violation::InconsistentActions {
                        observation: posg.observations()[z].clone(),
                        first: name(r),
                        second: name(s),
                    });
                }
            }
        }
    }

    ValidationReport { violations }
}
