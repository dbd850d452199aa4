use std::ops::Index;

use rand::Rng;

use super::{ActionId, DeceiverStrategy, InfiltratorStrategy, ObservationId, OneSidedPosg, Player, StateId};
use crate::error::{Error, Result};

/// Bound on the distance to the fixed point, relative to the magnitude of the
/// values.
pub(crate) const RESIDUAL_TOL: f64 = 1e-11;
const MAX_SWEEPS: usize = 1_000_000;
/// Two actions whose Bellman values differ by less than this (relative) are tied.
pub(crate) const TIE_TOL: f64 = 1e-10;

/// Expected discounted cost-to-target per state.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVector {
    pub values: Vec<f64>,
}

impl CostVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Index<StateId> for CostVector {
    type Output = f64;

    fn index(&self, s: StateId) -> &f64 {
        &self.values[s]
    }
}

#[derive(Clone, Debug)]
struct Move {
    action: ActionId,
    cost: f64,
    successors: Vec<(StateId, f64)>,
}

#[derive(Clone, Debug)]
enum Node {
    /// Target state, or a state without any enabled action.
    Absorbing,
    /// Infiltrator state whose observation the strategy leaves undefined.
    Undefined,
    Deceiver(Vec<Move>),
    Infiltrator {
        cost: f64,
        successors: Vec<(StateId, f64)>,
    },
}

/// The deceiver's decision problem once the infiltrator strategy is fixed:
/// infiltrator states become chance nodes mixing their actions.
#[derive(Clone, Debug)]
pub struct ResponseMdp {
    initial: StateId,
    discount: f64,
    nodes: Vec<Node>,
}

impl ResponseMdp {
    pub fn new(posg: &OneSidedPosg, strategy: &InfiltratorStrategy) -> Result<Self> {
        strategy.check(posg)?;
        let game = posg.game();
        let nodes = (0..game.num_states())
            .map(|s| {
                if posg.is_target(s) || game.choices(s).is_empty() {
                    return Node::Absorbing;
                }
                match game.player(s) {
                    Player::Deceiver => Node::Deceiver(
                        game.choices(s)
                            .iter()
                            .map(|c| Move {
                                action: c.action,
                                cost: c.cost,
                                successors: c.successors.clone(),
                            })
                            .collect(),
                    ),
                    Player::Infiltrator => {
                        let Some(row) = posg.observation(s).and_then(|z| strategy.row(z)) else {
                            return Node::Undefined;
                        };
                        let mut cost = 0.0;
                        let mut mix: Vec<(StateId, f64)> = Vec::new();
                        for &(a, w) in row {
                            if w == 0.0 {
                                continue;
                            }
                            let c = game.choice(s, a).expect("support checked against enabled actions");
                            cost += w * c.cost;
                            for &(t, p) in &c.successors {
                                match mix.iter_mut().find(|(u, _)| *u == t) {
                                    Some(e) => e.1 += w * p,
                                    None => mix.push((t, w * p)),
                                }
                            }
                        }
                        mix.sort_by_key(|&(t, _)| t);
                        Node::Infiltrator { cost, successors: mix }
                    }
                }
            })
            .collect();
        Ok(Self {
            initial: game.initial(),
            discount: game.discount(),
            nodes,
        })
    }

    pub fn num_states(&self) -> usize {
        self.nodes.len()
    }

    fn q(&self, opt: &Move, x: &[f64]) -> f64 {
        opt.cost + self.discount * opt.successors.iter().map(|&(t, p)| p * x[t]).sum::<f64>()
    }

    /// Bellman values of every enabled action at deceiver state `s`.
    pub fn q_values(&self, s: StateId, x: &[f64]) -> Vec<(ActionId, f64)> {
        match &self.nodes[s] {
            Node::Deceiver(opts) => opts.iter().map(|o| (o.action, self.q(o, x))).collect(),
            _ => Vec::new(),
        }
    }

    /// Lowest-index action whose Bellman value ties the minimum.
    pub fn greedy_action(&self, s: StateId, x: &[f64]) -> Option<ActionId> {
        let qs = self.q_values(s, x);
        let min = qs.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
        qs.iter()
            .find(|&&(_, q)| q <= min + TIE_TOL * (1.0 + min.abs()))
            .map(|&(a, _)| a)
    }

    fn chance_value(&self, cost: f64, successors: &[(StateId, f64)], x: &[f64]) -> f64 {
        cost + successors.iter().map(|&(t, p)| p * x[t]).sum::<f64>()
    }

    /// Fails if a state reachable under `policy` (`None` = any action) has no
    /// decision or no infiltrator distribution.
    fn check_reachable(&self, posg: &OneSidedPosg, policy: &[Option<ActionId>]) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        let mut push = |t: StateId, stack: &mut Vec<StateId>| {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        };
        while let Some(s) = stack.pop() {
            let missing = || Error::IncompleteStrategy {
                state: posg.game().state(s).name.clone(),
            };
            match &self.nodes[s] {
                Node::Absorbing => {}
                Node::Undefined => return Err(missing()),
                Node::Infiltrator { successors, .. } => {
                    for &(t, p) in successors {
                        if p > 0.0 {
                            push(t, &mut stack);
                        }
                    }
                }
                Node::Deceiver(opts) => {
                    let chosen = policy.get(s).copied().flatten();
                    for o in opts.iter().filter(|o| chosen.is_none_or(|a| a == o.action)) {
                        for &(t, p) in &o.successors {
                            if p > 0.0 {
                                push(t, &mut stack);
                            }
                        }
                    }
                    if let Some(a) = chosen {
                        if !opts.iter().any(|o| o.action == a) {
                            return Err(missing());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Gauss-Seidel sweeps of `step` until the distance to the fixed point is
    /// below tolerance. Two consecutive moves contract by the discount, so a
    /// residual `r` leaves an error of at most `2r / (1 - γ)`.
    fn iterate(&self, x: &mut [f64], step: impl Fn(StateId, &[f64]) -> f64) -> Result<()> {
        let tol = RESIDUAL_TOL * (1.0 - self.discount) / 2.0;
        let mut residual = f64::INFINITY;
        for sweep in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for s in 0..x.len() {
                let v = step(s, x);
                delta = delta.max((v - x[s]).abs());
                scale = scale.max(v.abs());
                x[s] = v;
            }
            if delta <= tol * scale || sweep % 64 == 63 {
                residual = (0..x.len()).map(|s| (step(s, x) - x[s]).abs()).fold(0.0, f64::max);
                if residual <= tol * scale {
                    return Ok(());
                }
            }
            if !delta.is_finite() {
                break;
            }
        }
        Err(Error::FixedPointNotReached {
            sweeps: MAX_SWEEPS,
            residual,
        })
    }

    pub(crate) fn evaluate_raw(&self, policy: &[Option<ActionId>], warm: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut x = warm.map_or_else(|| vec![0.0; self.nodes.len()], <[f64]>::to_vec);
        self.iterate(&mut x, |s, x| match &self.nodes[s] {
            Node::Absorbing | Node::Undefined => 0.0,
            Node::Infiltrator { cost, successors } => self.chance_value(*cost, successors, x),
            Node::Deceiver(opts) => match policy[s].and_then(|a| opts.iter().find(|o| o.action == a)) {
                Some(o) => self.q(o, x),
                None => 0.0,
            },
        })?;
        Ok(x)
    }

    /// Cost vector of a fixed deceiver strategy.
    pub fn evaluate(&self, posg: &OneSidedPosg, strategy: &DeceiverStrategy) -> Result<CostVector> {
        self.check_reachable(posg, strategy.as_slice())?;
        Ok(CostVector {
            values: self.evaluate_raw(strategy.as_slice(), None)?,
        })
    }

    /// Minimizing fixed point where states with `fixed[s] = Some(a)` must play
    /// `a` and every other deceiver state picks freely.
    pub fn minimize(&self, fixed: &[Option<ActionId>], warm: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut x = warm.map_or_else(|| vec![0.0; self.nodes.len()], <[f64]>::to_vec);
        self.iterate(&mut x, |s, x| match &self.nodes[s] {
            Node::Absorbing | Node::Undefined => 0.0,
            Node::Infiltrator { cost, successors } => self.chance_value(*cost, successors, x),
            Node::Deceiver(opts) => match fixed[s] {
                Some(a) => opts.iter().find(|o| o.action == a).map_or(0.0, |o| self.q(o, x)),
                None => opts.iter().map(|o| self.q(o, x)).fold(f64::INFINITY, f64::min),
            },
        })?;
        Ok(x)
    }

    /// Optimal deceiver response by policy iteration, warm-started from value
    /// iteration. Ties go to the lowest action index.
    pub fn best_response(&self, posg: &OneSidedPosg) -> Result<(DeceiverStrategy, CostVector)> {
        let n = self.nodes.len();
        self.check_reachable(posg, &vec![None; n])?;
        let free = vec![None; n];
        let x = self.minimize(&free, None)?;
        let greedy = |x: &[f64]| -> Vec<Option<ActionId>> {
            (0..n)
                .map(|s| match posg.game().player(s) {
                    Player::Deceiver => self.greedy_action(s, x).or_else(|| posg.game().enabled(s).next()),
                    Player::Infiltrator => None,
                })
                .collect()
        };
        let mut policy = greedy(&x);
        let mut values = self.evaluate_raw(&policy, Some(&x))?;
        loop {
            let mut changed = false;
            for (s, node) in self.nodes.iter().enumerate() {
                let Node::Deceiver(_) = node else { continue };
                let qs = self.q_values(s, &values);
                let current = qs
                    .iter()
                    .find(|&&(a, _)| Some(a) == policy[s])
                    .map_or(f64::INFINITY, |&(_, q)| q);
                let min = qs.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
                if min < current - TIE_TOL * (1.0 + min.abs()) {
                    policy[s] = self.greedy_action(s, &values);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            values = self.evaluate_raw(&policy, Some(&values))?;
        }
        let canonical = greedy(&values);
        if canonical != policy {
            policy = canonical;
            values = self.evaluate_raw(&policy, Some(&values))?;
        }
        Ok((DeceiverStrategy::from_raw(policy), CostVector { values }))
    }
}

/// Markov chain induced by fixing both strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedChain {
    /// Successor distribution per state; empty for absorbing states.
    pub transitions: Vec<Vec<(StateId, f64)>>,
    pub cost: Vec<f64>,
    /// Discount applied when leaving each state (γ on deceiver states, 1 on
    /// infiltrator states).
    pub discount: Vec<f64>,
}

pub fn induced_chain(
    posg: &OneSidedPosg,
    deceiver: &DeceiverStrategy,
    infiltrator: &InfiltratorStrategy,
) -> Result<InducedChain> {
    let mdp = ResponseMdp::new(posg, infiltrator)?;
    mdp.check_reachable(posg, deceiver.as_slice())?;
    let n = mdp.num_states();
    let mut chain = InducedChain {
        transitions: vec![Vec::new(); n],
        cost: vec![0.0; n],
        discount: vec![1.0; n],
    };
    for (s, node) in mdp.nodes.iter().enumerate() {
        match node {
            Node::Absorbing | Node::Undefined => {}
            Node::Infiltrator { cost, successors } => {
                chain.cost[s] = *cost;
                chain.transitions[s] = successors.clone();
            }
            Node::Deceiver(opts) => {
                chain.discount[s] = mdp.discount;
                if let Some(o) = deceiver.action(s).and_then(|a| opts.iter().find(|o| o.action == a)) {
                    chain.cost[s] = o.cost;
                    chain.transitions[s] = o.successors.clone();
                }
            }
        }
    }
    Ok(chain)
}

/// Expected discounted cost of every state under both strategies.
pub fn evaluate_cost(
    posg: &OneSidedPosg,
    deceiver: &DeceiverStrategy,
    infiltrator: &InfiltratorStrategy,
) -> Result<CostVector> {
    ResponseMdp::new(posg, infiltrator)?.evaluate(posg, deceiver)
}

/// Cost-minimizing deceiver strategy against a fixed infiltrator strategy.
pub fn best_response_deceiver(
    posg: &OneSidedPosg,
    infiltrator: &InfiltratorStrategy,
) -> Result<(DeceiverStrategy, CostVector)> {
    ResponseMdp::new(posg, infiltrator)?.best_response(posg)
}

/// Largest initial-state cost over `strategies` and the first index attaining it.
pub fn worst_case_value(
    posg: &OneSidedPosg,
    deceiver: &DeceiverStrategy,
    strategies: &[InfiltratorStrategy],
) -> Result<(f64, usize)> {
    if strategies.is_empty() {
        return Err(Error::NoStrategies);
    }
    let init = posg.game().initial();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, sigma) in strategies.iter().enumerate() {
        let v = evaluate_cost(posg, deceiver, sigma)?[init];
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let weights: Vec<f64> = weights.into_iter().collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Samples one play and returns the infiltrator's observation-action
/// sequence, stopping after `steps` infiltrator moves or at a target.
///
/// `infiltrator` is called once per infiltrator move with the current
/// observation and may keep its own memory.
pub fn simulate_observations<R: Rng + ?Sized>(
    posg: &OneSidedPosg,
    deceiver: &DeceiverStrategy,
    mut infiltrator: impl FnMut(ObservationId, &mut R) -> ActionId,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<(ObservationId, ActionId)>> {
    let game = posg.game();
    let mut trace = Vec::with_capacity(steps);
    let mut s = game.initial();
    while trace.len() < steps && !posg.is_target(s) && !game.choices(s).is_empty() {
        let a = match game.player(s) {
            Player::Deceiver => deceiver.action(s).ok_or_else(|| Error::IncompleteStrategy {
                state: game.state(s).name.clone(),
            })?,
            Player::Infiltrator => {
                let z = posg.observation(s).ok_or_else(|| Error::IncompleteStrategy {
                    state: game.state(s).name.clone(),
                })?;
                let a = infiltrator(z, rng);
                trace.push((z, a));
                a
            }
        };
        let choice = game
            .choice(s, a)
            .ok_or_else(|| Error::StrategyMismatch(format!("action {} not enabled at {}", a, game.state(s).name)))?;
        let i = sample_index(choice.successors.iter().map(|&(_, p)| p), rng);
        s = choice.successors[i].0;
    }
    Ok(trace)
}
