//! Exact depth-first branch-and-bound over deterministic deceiver strategies.
//!
//! A node fixes the action at a prefix of the branching order. Its lower
//! bound is the largest, over infiltrator strategies, of the deceiver's
//! optimal cost when the unfixed states may respond to each strategy
//! separately. The incumbent comes from completing the node greedily.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    worst_case_value, ActionId, DeceiverStrategy, InfiltratorStrategy, OneSidedPosg, Player, ResponseMdp, StateId,
};

use super::milp::{check_strategies, MilpProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnbOptions {
    /// A node is pruned when its bound is within this (relative) margin of
    /// the incumbent.
    pub prune_tol: f64,
    /// Stop after this many nodes; the result then reports a positive gap.
    pub node_limit: Option<usize>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            prune_tol: 1e-9,
            node_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnbResult {
    pub strategy: DeceiverStrategy,
    /// Exact worst-case value of `strategy`.
    pub value: f64,
    /// First infiltrator strategy attaining the worst case.
    pub attaining_index: usize,
    pub nodes_explored: usize,
    /// Incumbent minus the best proven lower bound.
    pub proof_gap: f64,
}

/// Serialized solve result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub strategy: BTreeMap<String, String>,
    pub value: f64,
    pub attaining_index: usize,
    pub nodes_explored: usize,
    pub proof_gap: f64,
}

impl BnbResult {
    pub fn report(&self, posg: &OneSidedPosg) -> SolveReport {
        SolveReport {
            strategy: self.strategy.to_named(posg),
            value: self.value,
            attaining_index: self.attaining_index,
            nodes_explored: self.nodes_explored,
            proof_gap: self.proof_gap,
        }
    }
}

/// Node bounds for a fixed game and strategy set.
pub struct RobustBound {
    mdps: Vec<ResponseMdp>,
    initial: StateId,
}

/// A node's bound with the data the search reuses.
pub struct NodeBound {
    pub value: f64,
    /// Strategy attaining the bound.
    pub attaining: usize,
    /// Minimizing cost vector per strategy.
    pub values: Vec<Vec<f64>>,
}

impl RobustBound {
    pub fn new(posg: &OneSidedPosg, strategies: &[InfiltratorStrategy]) -> Result<Self> {
        check_strategies(posg, strategies)?;
        Ok(Self {
            mdps: strategies
                .iter()
                .map(|s| ResponseMdp::new(posg, s))
                .collect::<Result<_>>()?,
            initial: posg.game().initial(),
        })
    }

    /// `max_i min_{completions} c^i_init` for the partial assignment `fixed`.
    pub fn lower_bound(&self, fixed: &[Option<ActionId>]) -> Result<NodeBound> {
        self.bound_from(fixed, None)
    }

    fn bound_from(&self, fixed: &[Option<ActionId>], warm: Option<&[Vec<f64>]>) -> Result<NodeBound> {
        let values = self
            .mdps
            .iter()
            .enumerate()
            .map(|(i, m)| m.minimize(fixed, warm.map(|w| w[i].as_slice())))
            .collect::<Result<Vec<_>>>()?;
        let (attaining, value) =
            values
                .iter()
                .map(|v| v[self.initial])
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, v)| if v > best.1 { (i, v) } else { best },
                );
        Ok(NodeBound {
            value,
            attaining,
            values,
        })
    }
}

struct Search<'a> {
    posg: &'a OneSidedPosg,
    strategies: &'a [InfiltratorStrategy],
    bound: RobustBound,
    order: Vec<StateId>,
    opts: &'a BnbOptions,
    incumbent: (f64, usize, DeceiverStrategy),
    nodes: usize,
    /// Smallest bound among nodes abandoned because of the node limit.
    open_bound: f64,
}

impl Search<'_> {
    fn complete(&self, fixed: &[Option<ActionId>], node: &NodeBound) -> DeceiverStrategy {
        let mdp = &self.bound.mdps[node.attaining];
        let x = &node.values[node.attaining];
        let choice = (0..fixed.len())
            .map(|s| {
                fixed[s].or_else(|| match self.posg.game().player(s) {
                    Player::Deceiver => mdp.greedy_action(s, x).or_else(|| self.posg.game().enabled(s).next()),
                    Player::Infiltrator => None,
                })
            })
            .collect();
        DeceiverStrategy::from_raw(choice)
    }

    fn offer(&mut self, delta: DeceiverStrategy) -> Result<()> {
        let (v, i) = worst_case_value(self.posg, &delta, self.strategies)?;
        if v < self.incumbent.0 {
            self.incumbent = (v, i, delta);
        }
        Ok(())
    }

    fn pruned(&self, lb: f64) -> bool {
        let inc = self.incumbent.0;
        lb >= inc - self.opts.prune_tol * (1.0 + inc.abs())
    }

    fn explore(&mut self, depth: usize, fixed: &mut Vec<Option<ActionId>>, parent: &[Vec<f64>]) -> Result<()> {
        let node = self.bound.bound_from(fixed, Some(parent))?;
        if self.opts.node_limit.is_some_and(|l| self.nodes >= l) {
            self.open_bound = self.open_bound.min(node.value);
            return Ok(());
        }
        self.nodes += 1;
        if self.pruned(node.value) {
            return Ok(());
        }
        self.offer(self.complete(fixed, &node))?;
        if depth == self.order.len() || self.pruned(node.value) {
            return Ok(());
        }
        let s = self.order[depth];
        // Most promising action against the attaining strategy first.
        let mut children = self.bound.mdps[node.attaining].q_values(s, &node.values[node.attaining]);
        children.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (a, _) in children {
            fixed[s] = Some(a);
            self.explore(depth + 1, fixed, &node.values)?;
            fixed[s] = None;
        }
        Ok(())
    }
}

/// Deceiver states with a real choice, most successors first.
fn branching_order(posg: &OneSidedPosg) -> Vec<StateId> {
    let game = posg.game();
    let mut order: Vec<(usize, StateId)> = posg
        .deceiver_states()
        .filter(|&s| !posg.is_target(s) && game.choices(s).len() >= 2)
        .map(|s| {
            let mut succ: Vec<StateId> = game
                .choices(s)
                .iter()
                .flat_map(|c| c.successors.iter().map(|&(t, _)| t))
                .collect();
            succ.sort_unstable();
            succ.dedup();
            (succ.len(), s)
        })
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, s)| s).collect()
}

/// Minimizes the worst case over `strategies` exactly.
pub fn solve_robust(posg: &OneSidedPosg, strategies: &[InfiltratorStrategy], opts: &BnbOptions) -> Result<BnbResult> {
    let bound = RobustBound::new(posg, strategies)?;
    let game = posg.game();
    let order = branching_order(posg);
    // States outside the order have at most one action (or are targets).
    let mut fixed: Vec<Option<ActionId>> = (0..game.num_states())
        .map(|s| match game.player(s) {
            Player::Deceiver if !order.contains(&s) => game.enabled(s).next(),
            _ => None,
        })
        .collect();
    let root = bound.lower_bound(&fixed)?;
    let mut search = Search {
        posg,
        strategies,
        bound,
        order,
        opts,
        incumbent: (f64::INFINITY, 0, DeceiverStrategy::first_actions(posg)),
        nodes: 0,
        open_bound: f64::INFINITY,
    };
    let first = search.complete(&fixed, &root);
    search.offer(first)?;
    search.explore(0, &mut fixed, &root.values)?;
    let (value, attaining_index, strategy) = search.incumbent;
    let proof_gap = if search.open_bound.is_finite() {
        (value - search.open_bound.max(root.value)).max(0.0)
    } else {
        0.0
    };
    Ok(BnbResult {
        strategy,
        value,
        attaining_index,
        nodes_explored: search.nodes,
        proof_gap,
    })
}

/// [`solve_robust`] for a program built by `build_milp` on the same inputs.
pub fn solve_milp_bnb(
    posg: &OneSidedPosg,
    strategies: &[InfiltratorStrategy],
    problem: &MilpProblem,
    opts: &BnbOptions,
) -> Result<BnbResult> {
    if problem.num_strategies != strategies.len() || problem.cost.first().map(Vec::len) != Some(posg.num_states()) {
        return Err(Error::StrategyMismatch("program was built for different inputs".into()));
    }
    solve_robust(posg, strategies, opts)
}

/// Largest number of deceiver strategies [`brute_force_robust`] enumerates.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Enumerates every deterministic deceiver strategy and returns the
/// lexicographically first minimizer of the worst case. States are ordered
/// by index and actions by id; targets keep their first action.
pub fn brute_force_robust(posg: &OneSidedPosg, strategies: &[InfiltratorStrategy]) -> Result<(DeceiverStrategy, f64)> {
    check_strategies(posg, strategies)?;
    let game = posg.game();
    let free: Vec<(StateId, Vec<ActionId>)> = posg
        .deceiver_states()
        .filter(|&s| !posg.is_target(s))
        .map(|s| (s, game.enabled(s).collect::<Vec<_>>()))
        .filter(|(_, acts)| !acts.is_empty())
        .collect();
    let size = free
        .iter()
        .try_fold(1u128, |acc, (_, acts)| acc.checked_mul(acts.len() as u128))
        .unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { size });
    }
    let mdps = strategies
        .iter()
        .map(|s| ResponseMdp::new(posg, s))
        .collect::<Result<Vec<_>>>()?;
    let base: Vec<Option<ActionId>> = (0..game.num_states())
        .map(|s| match game.player(s) {
            Player::Deceiver => game.enabled(s).next(),
            Player::Infiltrator => None,
        })
        .collect();
    let init = game.initial();
    let mut digits = vec![0usize; free.len()];
    let mut best: Option<(f64, Vec<Option<ActionId>>)> = None;
    loop {
        let mut policy = base.clone();
        for ((s, acts), &d) in free.iter().zip(&digits) {
            policy[*s] = Some(acts[d]);
        }
        let mut worst = f64::NEG_INFINITY;
        for m in &mdps {
            worst = worst.max(m.evaluate_raw(&policy, None)?[init]);
        }
        if best.as_ref().is_none_or(|(v, _)| worst < *v) {
            best = Some((worst, policy));
        }
        // Last state varies fastest, so visiting order is lexicographic.
        let mut k = free.len();
        loop {
            if k == 0 {
                let (v, p) = best.expect("at least one strategy");
                return Ok((DeceiverStrategy::from_raw(p), v));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < free[k].1.len() {
                break;
            }
            digits[k] = 0;
        }
    }
}
