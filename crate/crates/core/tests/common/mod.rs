//! Helpers shared by the integration tests: random instances and oracles
//! that do not go through the library's own solvers.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use posg_deception::game::{ActionId, DeceiverStrategy, InfiltratorStrategy, OneSidedPosg, Player, StateId};
use posg_deception::samples::{random_posg, RandomGameSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_game(
    rng: &mut ChaCha8Rng,
    max_deceiver: usize,
    max_infiltrator: usize,
    max_actions: usize,
) -> OneSidedPosg {
    let spec = RandomGameSpec::random(rng, max_deceiver, max_infiltrator, max_actions);
    random_posg(rng, &spec)
}

/// Random full-support strategy; with probability 1/4 a row is a point mass.
pub fn random_strategy(posg: &OneSidedPosg, rng: &mut ChaCha8Rng) -> InfiltratorStrategy {
    let rows = (0..posg.num_observations())
        .map(|z| {
            let acts = posg.observation_actions(z);
            if acts.is_empty() {
                return None;
            }
            if rng.random_bool(0.25) {
                let pick = acts[rng.random_range(0..acts.len())];
                return Some(acts.iter().map(|&a| (a, if a == pick { 1.0 } else { 0.0 })).collect());
            }
            let w: Vec<f64> = acts.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            Some(acts.iter().zip(w).map(|(&a, x)| (a, x / total)).collect())
        })
        .collect();
    InfiltratorStrategy::new(rows, 1)
}

/// Deceiver states the strategy space ranges over: non-target states with a
/// choice.
pub fn free_deceiver_states(posg: &OneSidedPosg) -> Vec<StateId> {
    let g = posg.game();
    posg.deceiver_states()
        .filter(|&s| !posg.is_target(s) && !g.choices(s).is_empty())
        .collect()
}

/// Every deterministic deceiver strategy.
pub fn all_deceiver_strategies(posg: &OneSidedPosg) -> Vec<DeceiverStrategy> {
    let g = posg.game();
    let states = free_deceiver_states(posg);
    let mut out = vec![BTreeMap::new()];
    for &s in &states {
        out = out
            .into_iter()
            .flat_map(|m: BTreeMap<StateId, ActionId>| {
                g.enabled(s).map(move |a| {
                    let mut m = m.clone();
                    m.insert(s, a);
                    m
                })
            })
            .collect();
    }
    out.iter().map(|m| DeceiverStrategy::new(posg, m).unwrap()).collect()
}

pub fn random_deceiver(posg: &OneSidedPosg, rng: &mut ChaCha8Rng) -> DeceiverStrategy {
    let g = posg.game();
    let choices = free_deceiver_states(posg)
        .into_iter()
        .map(|s| {
            let acts: Vec<_> = g.enabled(s).collect();
            (s, acts[rng.random_range(0..acts.len())])
        })
        .collect();
    DeceiverStrategy::new(posg, &choices).unwrap()
}

/// Costs of a strategy pair from one dense linear solve of `(I - P) x = c`,
/// where deceiver rows carry the discount and targets are pinned to zero.
pub fn dense_costs(posg: &OneSidedPosg, delta: &DeceiverStrategy, sigma: &InfiltratorStrategy) -> Vec<f64> {
    let g = posg.game();
    let n = g.num_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut c = DVector::<f64>::zeros(n);
    for s in 0..n {
        if posg.is_target(s) || g.choices(s).is_empty() {
            continue;
        }
        let weighted: Vec<(f64, f64)> = match g.player(s) {
            Player::Deceiver => {
                let act = delta.action(s).unwrap();
                g.choices(s)
                    .iter()
                    .map(|ch| (if ch.action == act { 1.0 } else { 0.0 }, g.discount()))
                    .collect()
            }
            Player::Infiltrator => {
                let z = posg.observation(s).unwrap();
                g.choices(s).iter().map(|ch| (sigma.prob(z, ch.action), 1.0)).collect()
            }
        };
        for (ch, (w, gamma)) in g.choices(s).iter().zip(weighted) {
            c[s] += w * ch.cost;
            for &(t, p) in &ch.successors {
                a[(s, t)] -= w * gamma * p;
            }
        }
    }
    a.lu().solve(&c).expect("nonsingular system").iter().copied().collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
