//! Small hand-built and random models used by the examples and tests.

use rand::seq::index::sample;
use rand::Rng;

use crate::game::{OneSidedPosg, Player, PosgBuilder, StateId};

/// Six-state game where two infiltrator states share an observation.
///
/// `s0` (observation `blue`) has three actions, `s1` and `s3` (observation
/// `red`) two each; `s2`, `s4`, `s5` belong to the deceiver.
pub fn reduction_demo() -> OneSidedPosg {
    reduction_demo_builder().build().expect("well-formed sample")
}

/// [`reduction_demo`] with `s2` as an absorbing target.
pub fn reduction_demo_with_target() -> OneSidedPosg {
    let mut b = reduction_demo_builder();
    b.target(2);
    b.build().expect("well-formed sample")
}

fn reduction_demo_builder() -> PosgBuilder {
    use Player::{Deceiver, Infiltrator};
    let mut b = PosgBuilder::new(0.9);
    let s: Vec<StateId> = [
        ("s0", Infiltrator),
        ("s1", Infiltrator),
        ("s2", Deceiver),
        ("s3", Infiltrator),
        ("s4", Deceiver),
        ("s5", Deceiver),
    ]
    .into_iter()
    .map(|(name, p)| b.state(name, p))
    .collect();
    b.observe(s[0], "blue");
    b.observe(s[1], "red");
    b.observe(s[3], "red");
    let (a1, a2, a3) = (b.action("a1"), b.action("a2"), b.action("a3"));
    let (b1, b2) = (b.action("b1"), b.action("b2"));

    b.transition(s[0], a1, s[5], 1.0).cost(s[0], a1, 1.0);
    b.transition(s[0], a2, s[2], 0.5)
        .transition(s[0], a2, s[4], 0.5)
        .cost(s[0], a2, 2.0);
    b.transition(s[0], a3, s[4], 1.0);
    b.transition(s[1], a1, s[2], 1.0).cost(s[1], a1, 3.0);
    b.transition(s[1], a2, s[5], 0.5)
        .transition(s[1], a2, s[2], 0.5)
        .cost(s[1], a2, 1.0);
    b.transition(s[3], a1, s[2], 1.0);
    b.transition(s[3], a2, s[4], 1.0).cost(s[3], a2, 2.0);

    b.transition(s[2], b1, s[3], 1.0).cost(s[2], b1, 1.0);
    b.transition(s[4], b1, s[3], 1.0).cost(s[4], b1, 1.0);
    b.transition(s[4], b2, s[0], 1.0).cost(s[4], b2, 0.5);
    b.transition(s[5], b1, s[1], 1.0);
    b.transition(s[5], b2, s[0], 1.0).cost(s[5], b2, 2.0);
    b.initial(s[0]);
    b
}

/// Every strategy pair costs exactly `value`: the deceiver pays it once and the
/// play then ends in a target.
pub fn constant_game(value: f64) -> OneSidedPosg {
    let mut b = PosgBuilder::new(0.9);
    let d = b.state("d", Player::Deceiver);
    let i = b.state("i", Player::Infiltrator);
    let t = b.state("t", Player::Deceiver);
    b.observe(i, "z");
    let (x, y) = (b.action("x"), b.action("y"));
    for a in [x, y] {
        b.transition(d, a, i, 1.0).cost(d, a, value);
        b.transition(i, a, t, 1.0);
    }
    b.target(t);
    b.initial(d);
    b.build().expect("well-formed sample")
}

/// Shape of a random bipartite game.
#[derive(Clone, Debug)]
pub struct RandomGameSpec {
    pub deceiver_states: usize,
    pub infiltrator_states: usize,
    pub max_actions: usize,
    pub observations: usize,
    pub discount: f64,
    /// Costs are drawn uniformly from `[-cost_range, cost_range]`.
    pub cost_range: f64,
    pub targets: usize,
}

impl RandomGameSpec {
    /// Sizes drawn within the given caps, at least one state of each kind.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        max_deceiver: usize,
        max_infiltrator: usize,
        max_actions: usize,
    ) -> Self {
        let infiltrator_states = rng.random_range(1..=max_infiltrator);
        Self {
            deceiver_states: rng.random_range(1..=max_deceiver),
            infiltrator_states,
            max_actions,
            observations: rng.random_range(1..=infiltrator_states),
            discount: rng.random_range(0.3..0.95),
            cost_range: 5.0,
            targets: rng.random_range(0..=1),
        }
    }
}

fn distribution<R: Rng + ?Sized>(rng: &mut R, pool: &[StateId]) -> Vec<(StateId, f64)> {
    if pool.len() >= 2 && rng.random_bool(0.6) {
        let picked = sample(rng, pool.len(), 2);
        let p: f64 = rng.random_range(0.1..0.9);
        vec![(pool[picked.index(0)], p), (pool[picked.index(1)], 1.0 - p)]
    } else {
        vec![(pool[rng.random_range(0..pool.len())], 1.0)]
    }
}

fn action_subset<R: Rng + ?Sized>(rng: &mut R, max_actions: usize) -> Vec<usize> {
    let m = rng.random_range(1..=max_actions);
    let mut acts = sample(rng, max_actions, m).into_vec();
    acts.sort_unstable();
    acts
}

/// Random valid game: deceiver states `d*` come first (`d0` is initial),
/// followed by infiltrator states `i*`.
pub fn random_posg<R: Rng + ?Sized>(rng: &mut R, spec: &RandomGameSpec) -> OneSidedPosg {
    let mut b = PosgBuilder::new(spec.discount);
    let actions: Vec<_> = (0..spec.max_actions).map(|a| b.action(&format!("a{a}"))).collect();
    let deceivers: Vec<StateId> = (0..spec.deceiver_states)
        .map(|j| b.state(format!("d{j}"), Player::Deceiver))
        .collect();
    let infiltrators: Vec<StateId> = (0..spec.infiltrator_states)
        .map(|j| b.state(format!("i{j}"), Player::Infiltrator))
        .collect();
    let obs_actions: Vec<Vec<usize>> = (0..spec.observations)
        .map(|_| action_subset(rng, spec.max_actions))
        .collect();
    let cost = |rng: &mut R| (rng.random_range(-spec.cost_range..=spec.cost_range) * 100.0).round() / 100.0;

    for (j, &s) in infiltrators.iter().enumerate() {
        let z = if j < spec.observations {
            j
        } else {
            rng.random_range(0..spec.observations)
        };
        b.observe(s, &format!("z{z}"));
        for &a in &obs_actions[z] {
            for (t, p) in distribution(rng, &deceivers) {
                b.transition(s, actions[a], t, p);
            }
            let c = cost(rng);
            b.cost(s, actions[a], c);
        }
    }
    for &s in &deceivers {
        for a in action_subset(rng, spec.max_actions) {
            for (t, p) in distribution(rng, &infiltrators) {
                b.transition(s, actions[a], t, p);
            }
            let c = cost(rng);
            b.cost(s, actions[a], c);
        }
    }
    let total = b.num_states();
    if total > 1 {
        for t in sample(rng, total - 1, spec.targets.min(total - 1)).into_iter() {
            b.target(t + 1);
        }
    }
    b.initial(deceivers[0]);
    b.build().expect("well-formed random game")
}
