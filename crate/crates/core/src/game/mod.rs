//! One-sided partially observable stochastic games.
//!
//! States are split between the *deceiver*, who sees the full state, and the
//! *infiltrator*, who only sees an observation of it. Every transition
//! alternates between the two players. Costs are signed losses of the deceiver;
//! the discount factor is applied once per round, on deceiver moves.

mod eval;
mod json;
mod strategy;
mod validate;

pub use eval::{
    best_response_deceiver, evaluate_cost, induced_chain, simulate_observations, worst_case_value, CostVector,
    InducedChain, ResponseMdp,
};
pub(crate) use eval::{sample_index, RESIDUAL_TOL, TIE_TOL};
pub use json::{read_posg, write_posg, PosgDocument};
pub use strategy::{DeceiverStrategy, InfiltratorStrategy};
pub use validate::{validate, ValidationReport, Violation};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;
pub type ObservationId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Deceiver,
    Infiltrator,
}

/// One enabled action of a state: its successor distribution and cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: ActionId,
    pub successors: Vec<(StateId, f64)>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub name: String,
    pub player: Player,
    /// Sorted by action id.
    pub choices: Vec<Choice>,
}

/// Turn-based stochastic game with state-action costs and a discount factor.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticGame {
    states: Vec<State>,
    actions: Vec<String>,
    initial: StateId,
    discount: f64,
}

impl StochasticGame {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> &State {
        &self.states[s]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn player(&self, s: StateId) -> Player {
        self.states[s].player
    }

    pub fn choices(&self, s: StateId) -> &[Choice] {
        &self.states[s].choices
    }

    pub fn choice(&self, s: StateId, a: ActionId) -> Option<&Choice> {
        let choices = &self.states[s].choices;
        choices.binary_search_by_key(&a, |c| c.action).ok().map(|i| &choices[i])
    }

    pub fn enabled(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.states[s].choices.iter().map(|c| c.action)
    }

    pub fn max_abs_cost(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.choices.iter())
            .map(|c| c.cost.abs())
            .fold(0.0, f64::max)
    }
}

/// A stochastic game together with the infiltrator's observation function and
/// the target set.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSidedPosg {
    game: StochasticGame,
    observations: Vec<String>,
    observation_of: Vec<Option<ObservationId>>,
    targets: Vec<bool>,
}

impl OneSidedPosg {
    pub fn game(&self) -> &StochasticGame {
        &self.game
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn observation(&self, s: StateId) -> Option<ObservationId> {
        self.observation_of[s]
    }

    pub fn observation_id(&self, name: &str) -> Option<ObservationId> {
        self.observations.iter().position(|z| z == name)
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets[s]
    }

    pub fn targets(&self) -> impl Iterator<Item = StateId> + '_ {
        self.targets.iter().enumerate().filter_map(|(s, &t)| t.then_some(s))
    }

    pub fn num_states(&self) -> usize {
        self.game.num_states()
    }

    pub fn deceiver_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states()).filter(|&s| self.game.player(s) == Player::Deceiver)
    }

    pub fn infiltrator_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states()).filter(|&s| self.game.player(s) == Player::Infiltrator)
    }

    /// Enabled actions at observation `z`, taken from the first non-target
    /// infiltrator state carrying it (all such states agree on valid models).
    pub fn observation_actions(&self, z: ObservationId) -> Vec<ActionId> {
        let states: Vec<StateId> = self
            .infiltrator_states()
            .filter(|&s| self.observation_of[s] == Some(z))
            .collect();
        let pick = states
            .iter()
            .copied()
            .find(|&s| !self.targets[s] && !self.game.choices(s).is_empty())
            .or_else(|| states.iter().copied().find(|&s| !self.game.choices(s).is_empty()));
        pick.map(|s| self.game.enabled(s).collect()).unwrap_or_default()
    }

    /// Deceiver states where the deceiver actually has to decide.
    pub fn decision_states(&self) -> Vec<StateId> {
        self.deceiver_states()
            .filter(|&s| !self.targets[s] && self.game.choices(s).len() >= 2)
            .collect()
    }
}

/// Incremental construction of a [`OneSidedPosg`].
///
/// The builder only rejects structural mistakes (unknown names, costs on
/// actions without transitions). Semantic checks are left to [`validate`].
#[derive(Clone, Debug)]
pub struct PosgBuilder {
    names: Vec<String>,
    players: Vec<Player>,
    actions: Vec<String>,
    observations: Vec<String>,
    observation_of: Vec<Option<ObservationId>>,
    transitions: BTreeMap<(StateId, ActionId), BTreeMap<StateId, f64>>,
    costs: BTreeMap<(StateId, ActionId), f64>,
    targets: Vec<bool>,
    initial: Option<StateId>,
    discount: f64,
}

impl PosgBuilder {
    pub fn new(discount: f64) -> Self {
        Self {
            names: Vec::new(),
            players: Vec::new(),
            actions: Vec::new(),
            observations: Vec::new(),
            observation_of: Vec::new(),
            transitions: BTreeMap::new(),
            costs: BTreeMap::new(),
            targets: Vec::new(),
            initial: None,
            discount,
        }
    }

    pub fn state(&mut self, name: impl Into<String>, player: Player) -> StateId {
        let id = self.names.len();
        self.names.push(name.into());
        self.players.push(player);
        self.observation_of.push(None);
        self.targets.push(false);
        id
    }

    /// Interns an action name.
    pub fn action(&mut self, name: &str) -> ActionId {
        match self.actions.iter().position(|a| a == name) {
            Some(a) => a,
            None => {
                self.actions.push(name.to_string());
                self.actions.len() - 1
            }
        }
    }

    /// Interns an observation name and assigns it to `s`.
    pub fn observe(&mut self, s: StateId, observation: &str) -> ObservationId {
        let z = match self.observations.iter().position(|z| z == observation) {
            Some(z) => z,
            None => {
                self.observations.push(observation.to_string());
                self.observations.len() - 1
            }
        };
        self.observation_of[s] = Some(z);
        z
    }

    /// Adds probability mass; repeated calls for the same edge accumulate.
    pub fn transition(&mut self, from: StateId, action: ActionId, to: StateId, prob: f64) -> &mut Self {
        *self
            .transitions
            .entry((from, action))
            .or_default()
            .entry(to)
            .or_insert(0.0) += prob;
        self
    }

    pub fn cost(&mut self, state: StateId, action: ActionId, cost: f64) -> &mut Self {
        self.costs.insert((state, action), cost);
        self
    }

    pub fn target(&mut self, s: StateId) -> &mut Self {
        self.targets[s] = true;
        self
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn build(self) -> Result<OneSidedPosg> {
        let n = self.names.len();
        if n == 0 {
            return Err(Error::Malformed("model has no states".into()));
        }
        let initial = self
            .initial
            .ok_or_else(|| Error::Malformed("no initial state".into()))?;
        let mut seen = std::collections::HashSet::new();
        for name in &self.names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Malformed(format!("duplicate state id `{name}`")));
            }
        }
        for &(s, a) in self.costs.keys() {
            if !self.transitions.contains_key(&(s, a)) {
                return Err(Error::Malformed(format!(
                    "cost given for `{}` at `{}` which has no transitions",
                    self.actions[a], self.names[s]
                )));
            }
        }
        let mut states: Vec<State> = self
            .names
            .into_iter()
            .zip(self.players)
            .map(|(name, player)| State {
                name,
                player,
                choices: Vec::new(),
            })
            .collect();
        for ((s, a), succ) in self.transitions {
            if s >= n || succ.keys().any(|&t| t >= n) {
                return Err(Error::Malformed("transition references unknown state".into()));
            }
            states[s].choices.push(Choice {
                action: a,
                successors: succ.into_iter().collect(),
                cost: self.costs.get(&(s, a)).copied().unwrap_or(0.0),
            });
        }
        Ok(OneSidedPosg {
            game: StochasticGame {
                states,
                actions: self.actions,
                initial,
                discount: self.discount,
            },
            observations: self.observations,
            observation_of: self.observation_of,
            targets: self.targets,
        })
    }
}

impl OneSidedPosg {
    /// Rebuilds the model through a builder, e.g. to append states in tests.
    pub fn to_builder(&self) -> PosgBuilder {
        let mut b = PosgBuilder::new(self.game.discount);
        b.actions = self.game.actions.clone();
        b.observations = self.observations.clone();
        for (s, st) in self.game.states.iter().enumerate() {
            b.state(st.name.clone(), st.player);
            b.observation_of[s] = self.observation_of[s];
            b.targets[s] = self.targets[s];
            for c in &st.choices {
                for &(t, p) in &c.successors {
                    b.transition(s, c.action, t, p);
                }
                b.cost(s, c.action, c.cost);
            }
        }
        b.initial(self.game.initial);
        b
    }
}
