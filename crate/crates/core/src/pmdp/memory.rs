//! Finite memory for the infiltrator by unfolding it into the state space.
//!
//! The unfolded game pairs every state with a memory node. The infiltrator
//! picks an action together with its next node, observes the node it is in,
//! and the deceiver sees the node as part of the state (transparent memory).
//! A memoryless strategy on the unfolding is a finite-state controller on the
//! original game.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{
    simulate_observations, validate, ActionId, DeceiverStrategy, InfiltratorStrategy, ObservationId, OneSidedPosg,
    Player, PosgBuilder, StateId,
};

/// The unfolded game plus maps back to the original.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryUnfolding {
    pub posg: OneSidedPosg,
    pub k: usize,
    /// Unfolded state → (original state, memory node).
    pub state_origin: Vec<(StateId, usize)>,
    /// Unfolded action → (original action, next memory node). Deceiver
    /// actions keep their original id and carry no node.
    pub action_origin: Vec<(ActionId, Option<usize>)>,
    /// Unfolded observation → (original observation, memory node).
    pub observation_origin: Vec<(ObservationId, usize)>,
}

impl MemoryUnfolding {
    pub fn state(&self, s: StateId, m: usize) -> StateId {
        s * self.k + m
    }

    pub fn observation(&self, z: ObservationId, m: usize) -> Option<ObservationId> {
        self.observation_origin.iter().position(|&o| o == (z, m))
    }

    /// Unfolded id of the infiltrator action `(a, next node)`.
    pub fn memory_action(&self, a: ActionId, next: usize) -> Option<ActionId> {
        self.action_origin.iter().position(|&o| o == (a, Some(next)))
    }

    /// Copies a deceiver strategy of the original game onto every memory node.
    pub fn lift_deceiver(&self, delta: &DeceiverStrategy) -> DeceiverStrategy {
        let choices = self
            .state_origin
            .iter()
            .enumerate()
            .filter_map(|(s, &(orig, _))| delta.action(orig).map(|a| (s, a)))
            .collect();
        DeceiverStrategy::new(&self.posg, &choices).expect("deceiver actions are copied unchanged")
    }
}

/// Builds the `k`-memory unfolding; `k = 1` is isomorphic to the input.
pub fn unfold_memory(posg: &OneSidedPosg, k: usize) -> Result<MemoryUnfolding> {
    if k == 0 {
        return Err(Error::Domain("memory size must be at least 1".into()));
    }
    let report = validate(posg);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let game = posg.game();
    let mut b = PosgBuilder::new(game.discount());
    let mut action_origin: Vec<(ActionId, Option<usize>)> = Vec::new();
    for (a, name) in game.actions().iter().enumerate() {
        b.action(name);
        action_origin.push((a, None));
    }
    let mut infiltrator_actions: Vec<ActionId> = posg.infiltrator_states().flat_map(|s| game.enabled(s)).collect();
    infiltrator_actions.sort_unstable();
    infiltrator_actions.dedup();
    let mut pair = BTreeMap::new();
    for &a in &infiltrator_actions {
        for next in 0..k {
            let id = b.action(&format!("{}/m{next}", game.action_name(a)));
            debug_assert_eq!(id, action_origin.len());
            action_origin.push((a, Some(next)));
            pair.insert((a, next), id);
        }
    }

    let mut observation_origin = Vec::new();
    for z in 0..posg.num_observations() {
        for m in 0..k {
            observation_origin.push((z, m));
        }
    }
    let obs_name = |z: ObservationId, m: usize| format!("{}@m{m}", posg.observations()[z]);

    let mut state_origin = Vec::with_capacity(posg.num_states() * k);
    for s in 0..posg.num_states() {
        for m in 0..k {
            let u = b.state(format!("{}@{m}", game.state(s).name), game.player(s));
            state_origin.push((s, m));
            if posg.is_target(s) {
                b.target(u);
            }
        }
    }
    // Intern observations in (z, m) order before assigning them.
    for &(z, m) in &observation_origin {
        if let Some(s) = posg.infiltrator_states().find(|&s| posg.observation(s) == Some(z)) {
            b.observe(s * k + m, &obs_name(z, m));
        }
    }
    for s in posg.infiltrator_states() {
        let z = posg.observation(s).expect("validated");
        for m in 0..k {
            b.observe(s * k + m, &obs_name(z, m));
        }
    }

    for s in 0..posg.num_states() {
        for c in game.choices(s) {
            for m in 0..k {
                let u = s * k + m;
                match game.player(s) {
                    Player::Deceiver => {
                        for &(t, p) in &c.successors {
                            b.transition(u, c.action, t * k + m, p);
                        }
                        b.cost(u, c.action, c.cost);
                    }
                    Player::Infiltrator => {
                        for next in 0..k {
                            let a = pair[&(c.action, next)];
                            for &(t, p) in &c.successors {
                                b.transition(u, a, t * k + next, p);
                            }
                            b.cost(u, a, c.cost);
                        }
                    }
                }
            }
        }
    }
    b.initial(game.initial() * k);
    let unfolded = b.build()?;
    let observation_origin = unfolded
        .observations()
        .iter()
        .map(|name| {
            observation_origin
                .iter()
                .copied()
                .find(|&(z, m)| obs_name(z, m) == *name)
                .expect("every unfolded observation has an origin")
        })
        .collect();
    Ok(MemoryUnfolding {
        posg: unfolded,
        k,
        state_origin,
        action_origin,
        observation_origin,
    })
}

/// Next-node distribution per played action.
pub type MemoryUpdate = BTreeMap<ActionId, Vec<(usize, f64)>>;

/// Finite-state controller: in node `n` observing `z`, play `a` with
/// probability `action_map[n][z](a)` and move to node `n'` with probability
/// `memory_update[n][z][a](n')`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteStateController {
    pub initial_node: usize,
    pub action_map: Vec<Vec<Vec<(ActionId, f64)>>>,
    pub memory_update: Vec<Vec<MemoryUpdate>>,
}

impl FiniteStateController {
    pub fn nodes(&self) -> usize {
        self.action_map.len()
    }

    /// Samples an action and the next node.
    pub fn step<R: Rng + ?Sized>(&self, node: usize, z: ObservationId, rng: &mut R) -> (ActionId, usize) {
        let row = &self.action_map[node][z];
        let a = row[crate::game::sample_index(row.iter().map(|&(_, p)| p), rng)].0;
        let next = match self.memory_update[node][z].get(&a) {
            Some(dist) => dist[crate::game::sample_index(dist.iter().map(|&(_, p)| p), rng)].0,
            None => node,
        };
        (a, next)
    }

    /// Recomposes the memoryless strategy on the unfolding:
    /// `σ((z, n), (a, n')) = action_map[n][z](a) · memory_update[n][z][a](n')`.
    pub fn unfolded_strategy(&self, unfolding: &MemoryUnfolding) -> InfiltratorStrategy {
        let rows = unfolding
            .observation_origin
            .iter()
            .map(|&(z, n)| {
                let row = &self.action_map[n][z];
                if row.is_empty() {
                    return None;
                }
                let mut out = Vec::new();
                for &(a, pa) in row {
                    let update = self.memory_update[n][z].get(&a);
                    for next in 0..unfolding.k {
                        let pn = update.map_or(if next == n { 1.0 } else { 0.0 }, |d| {
                            d.iter().find(|&&(m, _)| m == next).map_or(0.0, |&(_, p)| p)
                        });
                        if let Some(ua) = unfolding.memory_action(a, next) {
                            out.push((ua, pa * pn));
                        }
                    }
                }
                Some(out)
            })
            .collect();
        InfiltratorStrategy::new(rows, 1).with_memory_nodes(unfolding.k)
    }

    /// One play on the original game with the controller's memory threaded
    /// through; returns the observation-action trace.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        posg: &OneSidedPosg,
        deceiver: &DeceiverStrategy,
        steps: usize,
        rng: &mut R,
    ) -> Result<Vec<(ObservationId, ActionId)>> {
        let mut node = self.initial_node;
        simulate_observations(
            posg,
            deceiver,
            |z, rng: &mut R| {
                let (a, next) = self.step(node, z, rng);
                node = next;
                a
            },
            steps,
            rng,
        )
    }
}

/// Factors a memoryless strategy on the unfolding into a `k`-node controller.
/// Nodes whose action marginal is zero keep their memory (Dirac on the
/// current node).
pub fn fsc_from_unfolded(unfolding: &MemoryUnfolding, strategy: &InfiltratorStrategy) -> Result<FiniteStateController> {
    strategy.check(&unfolding.posg)?;
    let k = unfolding.k;
    let num_obs = unfolding
        .observation_origin
        .iter()
        .map(|&(z, _)| z + 1)
        .max()
        .unwrap_or(0);
    let mut action_map = vec![vec![Vec::new(); num_obs]; k];
    let mut memory_update = vec![vec![BTreeMap::new(); num_obs]; k];
    for (uz, &(z, n)) in unfolding.observation_origin.iter().enumerate() {
        let Some(row) = strategy.row(uz) else {
            if unfolding.posg.observation_actions(uz).is_empty() {
                continue;
            }
            return Err(Error::IncompleteStrategy {
                state: unfolding.posg.observations()[uz].clone(),
            });
        };
        let mut joint: BTreeMap<ActionId, Vec<(usize, f64)>> = BTreeMap::new();
        for &(ua, p) in row {
            let (a, next) = unfolding.action_origin[ua];
            let next = next.ok_or_else(|| {
                Error::StrategyMismatch(format!(
                    "`{}` is not an infiltrator action",
                    unfolding.posg.game().action_name(ua)
                ))
            })?;
            joint.entry(a).or_default().push((next, p));
        }
        // Every enabled original action appears, even with zero mass.
        for &ua in &unfolding.posg.observation_actions(uz) {
            if let (a, Some(_)) = unfolding.action_origin[ua] {
                joint.entry(a).or_default();
            }
        }
        for (a, dist) in joint {
            let marginal: f64 = dist.iter().map(|&(_, p)| p).sum();
            action_map[n][z].push((a, marginal));
            let update = if marginal > 0.0 {
                let mut d: Vec<(usize, f64)> = dist
                    .into_iter()
                    .filter(|&(_, p)| p > 0.0)
                    .map(|(m, p)| (m, p / marginal))
                    .collect();
                d.sort_by_key(|&(m, _)| m);
                d
            } else {
                vec![(n, 1.0)]
            };
            memory_update[n][z].insert(a, update);
        }
    }
    Ok(FiniteStateController {
        initial_node: 0,
        action_map,
        memory_update,
    })
}
