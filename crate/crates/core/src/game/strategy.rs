use std::collections::BTreeMap;

use super::{ActionId, ObservationId, OneSidedPosg, Player, StateId};
use crate::error::{Error, Result};

/// Deterministic memoryless deceiver strategy: one action per deceiver state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeceiverStrategy {
    choice: Vec<Option<ActionId>>,
}

impl DeceiverStrategy {
    /// Builds a strategy from explicit choices. Deceiver states without an
    /// entry take their lowest-index action.
    pub fn new(posg: &OneSidedPosg, choices: &BTreeMap<StateId, ActionId>) -> Result<Self> {
        let game = posg.game();
        let mut choice = vec![None; game.num_states()];
        for s in posg.deceiver_states() {
            choice[s] = match choices.get(&s) {
                Some(&a) => {
                    if game.choice(s, a).is_none() {
                        return Err(Error::StrategyMismatch(format!(
                            "action {} is not enabled at `{}`",
                            game.actions()
                                .get(a)
                                .map_or_else(|| a.to_string(), |n| format!("`{n}`")),
                            game.state(s).name
                        )));
                    }
                    Some(a)
                }
                None => game.enabled(s).next(),
            };
        }
        if let Some((&s, _)) = choices
            .iter()
            .find(|(&s, _)| s >= game.num_states() || game.player(s) != Player::Deceiver)
        {
            return Err(Error::StrategyMismatch(format!("state {s} is not a deceiver state")));
        }
        Ok(Self { choice })
    }

    /// Every deceiver state takes its lowest-index action.
    pub fn first_actions(posg: &OneSidedPosg) -> Self {
        Self::new(posg, &BTreeMap::new()).expect("first actions are always enabled")
    }

    pub(crate) fn from_raw(choice: Vec<Option<ActionId>>) -> Self {
        Self { choice }
    }

    pub fn action(&self, s: StateId) -> Option<ActionId> {
        self.choice.get(s).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<ActionId>] {
        &self.choice
    }

    /// `state name -> action name`, the serialized form.
    pub fn to_named(&self, posg: &OneSidedPosg) -> BTreeMap<String, String> {
        let game = posg.game();
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(s, a)| a.map(|a| (game.state(s).name.clone(), game.action_name(a).to_string())))
            .collect()
    }

    pub fn from_named(posg: &OneSidedPosg, named: &BTreeMap<String, String>) -> Result<Self> {
        let game = posg.game();
        let mut choices = BTreeMap::new();
        for (state, action) in named {
            let s = game
                .state_id(state)
                .ok_or_else(|| Error::StrategyMismatch(format!("unknown state `{state}`")))?;
            let a = game
                .action_id(action)
                .ok_or_else(|| Error::StrategyMismatch(format!("unknown action `{action}`")))?;
            choices.insert(s, a);
        }
        Self::new(posg, &choices)
    }
}

/// Randomized memoryless observation-based infiltrator strategy, i.e. the
/// table of observation-action probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct InfiltratorStrategy {
    rows: Vec<Option<Vec<(ActionId, f64)>>>,
    memory_nodes: usize,
}

impl InfiltratorStrategy {
    /// `rows[z]` is the action distribution at observation `z`, or `None`
    /// when the strategy leaves `z` undefined.
    pub fn new(rows: Vec<Option<Vec<(ActionId, f64)>>>, memory_nodes: usize) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| {
                r.map(|mut r| {
                    r.sort_by_key(|&(a, _)| a);
                    r
                })
            })
            .collect();
        Self { rows, memory_nodes }
    }

    pub fn uniform(posg: &OneSidedPosg) -> Self {
        let rows = (0..posg.num_observations())
            .map(|z| {
                let acts = posg.observation_actions(z);
                if acts.is_empty() {
                    return None;
                }
                let w = 1.0 / acts.len() as f64;
                Some(acts.into_iter().map(|a| (a, w)).collect())
            })
            .collect();
        Self::new(rows, 1)
    }

    /// The only strategy of a model whose observations each enable a single
    /// action (e.g. an instantiated parametric model).
    pub fn forced(posg: &OneSidedPosg) -> Result<Self> {
        let rows = (0..posg.num_observations())
            .map(|z| match posg.observation_actions(z).as_slice() {
                [a] => Ok(Some(vec![(*a, 1.0)])),
                [] => Ok(None),
                _ => Err(Error::StrategyMismatch(format!(
                    "observation `{}` offers a choice",
                    posg.observations()[z]
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Self::new(rows, 1))
    }

    pub fn with_memory_nodes(mut self, k: usize) -> Self {
        self.memory_nodes = k;
        self
    }

    pub fn memory_nodes(&self) -> usize {
        self.memory_nodes
    }

    pub fn num_observations(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, z: ObservationId) -> Option<&[(ActionId, f64)]> {
        self.rows.get(z).and_then(|r| r.as_deref())
    }

    pub fn prob(&self, z: ObservationId, a: ActionId) -> f64 {
        self.row(z)
            .and_then(|r| r.iter().find(|&&(b, _)| b == a))
            .map_or(0.0, |&(_, p)| p)
    }

    /// Checks normalization and that the support stays inside the enabled
    /// actions of each observation.
    pub fn check(&self, posg: &OneSidedPosg) -> Result<()> {
        if self.rows.len() != posg.num_observations() {
            return Err(Error::StrategyMismatch(format!(
                "strategy covers {} observations, model has {}",
                self.rows.len(),
                posg.num_observations()
            )));
        }
        for (z, row) in self.rows.iter().enumerate() {
            let Some(row) = row else { continue };
            let name = &posg.observations()[z];
            let enabled = posg.observation_actions(z);
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&(_, p)| !(0.0..=1.0 + 1e-9).contains(&p)) {
                return Err(Error::StrategyMismatch(format!(
                    "distribution at observation `{name}` sums to {sum}"
                )));
            }
            if let Some(&(a, _)) = row.iter().find(|&&(a, p)| p > 0.0 && !enabled.contains(&a)) {
                return Err(Error::StrategyMismatch(format!(
                    "action `{}` is not enabled at observation `{name}`",
                    posg.game().action_name(a)
                )));
            }
        }
        Ok(())
    }
}
