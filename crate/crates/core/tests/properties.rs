//! Randomized invariants of evaluation, reduction, unfolding, synthesis,
//! robust solving and network generation.

mod common;

use std::collections::BTreeMap;

use common::{all_deceiver_strategies, free_deceiver_states, random_deceiver, random_game, random_strategy, rng};
use posg_deception::game::{
    best_response_deceiver, evaluate_cost, validate, worst_case_value, DeceiverStrategy, InfiltratorStrategy,
    OneSidedPosg, Player, PosgBuilder, StateId,
};
use posg_deception::netsec::{generate, state_count, DetectionProbabilities, NetworkConfig, Pending};
use posg_deception::pmdp::{instantiate, instantiation_of, istrat, posg_to_pmdp, unfold_memory};
use posg_deception::robust::{solve_robust, BnbOptions, RobustBound};
use posg_deception::synthesis::{generate_strategy_set, verify_strong, SynthesisConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Game in which every play visits each infiltrator state at most once and
/// every infiltrator state has its own observation.
fn layered_game(r: &mut ChaCha8Rng) -> OneSidedPosg {
    let mut b = PosgBuilder::new(r.random_range(0.5..0.95));
    let acts: Vec<_> = (0..3).map(|a| b.action(&format!("a{a}"))).collect();
    let target = b.state("t", Player::Deceiver);
    b.target(target);
    let mut next = vec![target];
    for layer in (0..3).rev() {
        let infiltrators: Vec<StateId> = (0..r.random_range(1..=3))
            .map(|j| {
                let s = b.state(format!("i{layer}_{j}"), Player::Infiltrator);
                b.observe(s, &format!("z{layer}_{j}"));
                for &a in &acts[..r.random_range(2..=3)] {
                    b.transition(s, a, next[r.random_range(0..next.len())], 1.0);
                    b.cost(s, a, r.random_range(-5.0..5.0));
                }
                s
            })
            .collect();
        let width = if layer == 0 { 1 } else { r.random_range(1..=2) };
        next = (0..width)
            .map(|j| {
                let s = b.state(format!("d{layer}_{j}"), Player::Deceiver);
                for &a in &acts[..r.random_range(1..=2)] {
                    let t = infiltrators[r.random_range(0..infiltrators.len())];
                    b.transition(s, a, t, 1.0);
                    b.cost(s, a, r.random_range(0.0..5.0));
                }
                s
            })
            .collect();
    }
    b.initial(next[0]);
    b.build().unwrap()
}

fn reachable(posg: &OneSidedPosg) -> Vec<bool> {
    let g = posg.game();
    let mut seen = vec![false; g.num_states()];
    let mut stack = vec![g.initial()];
    seen[g.initial()] = true;
    while let Some(s) = stack.pop() {
        for c in g.choices(s) {
            for &(t, p) in &c.successors {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    seen
}

fn with_row(sigma: &InfiltratorStrategy, z: usize, row: Vec<(usize, f64)>) -> InfiltratorStrategy {
    let rows = (0..sigma.num_observations())
        .map(|y| {
            if y == z {
                Some(row.clone())
            } else {
                sigma.row(y).map(<[_]>::to_vec)
            }
        })
        .collect();
    InfiltratorStrategy::new(rows, 1)
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn evaluation_is_a_fixed_point(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let sigma = random_strategy(&posg, &mut r);
        let delta = random_deceiver(&posg, &mut r);
        let x = evaluate_cost(&posg, &delta, &sigma).unwrap().values;
        let g = posg.game();
        for s in 0..g.num_states() {
            if posg.is_target(s) || g.choices(s).is_empty() {
                prop_assert_eq!(x[s], 0.0);
                continue;
            }
            let backup = |c: &posg_deception::game::Choice, gamma: f64| {
                c.cost + gamma * c.successors.iter().map(|&(t, p)| p * x[t]).sum::<f64>()
            };
            let rhs = match g.player(s) {
                Player::Deceiver => backup(g.choice(s, delta.action(s).unwrap()).unwrap(), g.discount()),
                Player::Infiltrator => {
                    let z = posg.observation(s).unwrap();
                    g.choices(s).iter().map(|c| sigma.prob(z, c.action) * backup(c, 1.0)).sum()
                }
            };
            prop_assert!((rhs - x[s]).abs() <= 1e-8, "state {s}: {rhs} vs {}", x[s]);
        }
    }

    #[test]
    fn best_response_beats_every_deterministic_strategy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 4, 6, 3);
        let sigma = random_strategy(&posg, &mut r);
        let (_, best) = best_response_deceiver(&posg, &sigma).unwrap();
        for delta in all_deceiver_strategies(&posg) {
            let x = evaluate_cost(&posg, &delta, &sigma).unwrap();
            for s in 0..posg.num_states() {
                prop_assert!(best[s] <= x[s] + 1e-8);
            }
        }
    }

    #[test]
    fn single_visit_observation_enters_affinely(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = layered_game(&mut r);
        let sigma = random_strategy(&posg, &mut r);
        let delta = random_deceiver(&posg, &mut r);
        let z = r.random_range(0..posg.num_observations());
        let acts = posg.observation_actions(z);
        let (a, b) = (acts[0], acts[1]);
        let mass = sigma.prob(z, a) + sigma.prob(z, b);
        let value = |t: f64| {
            let row = acts
                .iter()
                .map(|&c| {
                    let p = if c == a { t * mass } else if c == b { (1.0 - t) * mass } else { sigma.prob(z, c) };
                    (c, p)
                })
                .collect();
            evaluate_cost(&posg, &delta, &with_row(&sigma, z, row)).unwrap()[posg.game().initial()]
        };
        let (v0, vh, v1) = (value(0.0), value(0.5), value(1.0));
        prop_assert!(close(vh, (v0 + v1) / 2.0, 1e-9), "{v0} {vh} {v1}");
    }

    #[test]
    fn scaling_costs_scales_values(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let sigma = random_strategy(&posg, &mut r);
        let delta = random_deceiver(&posg, &mut r);
        let mut b = posg.to_builder();
        let g = posg.game();
        for s in 0..g.num_states() {
            for c in g.choices(s) {
                b.cost(s, c.action, alpha * c.cost);
            }
        }
        let scaled = b.build().unwrap();
        let x = evaluate_cost(&posg, &delta, &sigma).unwrap();
        let y = evaluate_cost(&scaled, &delta, &sigma).unwrap();
        for s in 0..g.num_states() {
            prop_assert!(close(alpha * x[s], y[s], 1e-8));
        }
        let (d0, _) = best_response_deceiver(&posg, &sigma).unwrap();
        let (d1, _) = best_response_deceiver(&scaled, &sigma).unwrap();
        prop_assert_eq!(d0, d1);
    }

    #[test]
    fn unreachable_states_do_not_matter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let sigma = random_strategy(&posg, &mut r);
        let delta = random_deceiver(&posg, &mut r);
        let mut b = posg.to_builder();
        let act = b.action("a0");
        let d = b.state("extra_d", Player::Deceiver);
        let i = b.state("extra_i", Player::Infiltrator);
        b.observe(i, "extra_z");
        b.transition(d, act, i, 1.0).cost(d, act, 50.0);
        b.transition(i, act, d, 0.5).transition(i, act, posg.game().initial(), 0.5).cost(i, act, -7.0);
        let bigger = b.build().unwrap();
        let mut rows: Vec<_> = (0..posg.num_observations()).map(|z| sigma.row(z).map(<[_]>::to_vec)).collect();
        rows.push(Some(vec![(act, 1.0)]));
        let sigma2 = InfiltratorStrategy::new(rows, 1);
        let delta2 = DeceiverStrategy::from_named(&bigger, &delta.to_named(&posg)).unwrap();
        let init = posg.game().initial();
        let v = evaluate_cost(&posg, &delta, &sigma).unwrap()[init];
        let w = evaluate_cost(&bigger, &delta2, &sigma2).unwrap()[init];
        prop_assert!(close(v, w, 1e-9));
        let v = best_response_deceiver(&posg, &sigma).unwrap().1[init];
        let w = best_response_deceiver(&bigger, &sigma2).unwrap().1[init];
        prop_assert!(close(v, w, 1e-9));
    }

    #[test]
    fn instantiated_rows_are_distributions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let pmdp = posg_to_pmdp(&posg).unwrap();
        let u = instantiation_of(&pmdp, &random_strategy(&posg, &mut r));
        prop_assert!(pmdp.is_well_defined(&u));
        let mdp = instantiate(&pmdp, &u).unwrap();
        let g = mdp.game();
        for s in 0..g.num_states() {
            for c in g.choices(s) {
                let total: f64 = c.successors.iter().map(|&(_, p)| p).sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
            }
        }
        let expected: usize = (0..posg.num_observations())
            .map(|z| posg.observation_actions(z).len().saturating_sub(1))
            .sum();
        prop_assert_eq!(pmdp.parameters().len(), expected);
    }

    #[test]
    fn reduction_preserves_every_deceiver_strategy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 4, 6, 3);
        let pmdp = posg_to_pmdp(&posg).unwrap();
        let u = instantiation_of(&pmdp, &random_strategy(&posg, &mut r));
        let sigma = istrat(&pmdp, &u).unwrap();
        let mdp = instantiate(&pmdp, &u).unwrap();
        let forced = InfiltratorStrategy::forced(&mdp).unwrap();
        for delta in all_deceiver_strategies(&posg) {
            let on_mdp = DeceiverStrategy::from_named(&mdp, &delta.to_named(&posg)).unwrap();
            let a = evaluate_cost(&mdp, &on_mdp, &forced).unwrap();
            let b = evaluate_cost(&posg, &delta, &sigma).unwrap();
            prop_assert!(common::max_abs_diff(&a.values, &b.values) <= 1e-8);
        }
    }

    #[test]
    fn unfolding_projects_onto_the_original(seed in any::<u64>(), k in 1usize..=3) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 4, 6, 3);
        let unf = unfold_memory(&posg, k).unwrap();
        let (g, h) = (posg.game(), unf.posg.game());
        prop_assert_eq!(h.num_states(), k * g.num_states());
        prop_assert_eq!(unf.state_origin[h.initial()].0, g.initial());
        for s in 0..h.num_states() {
            let (o, _) = unf.state_origin[s];
            prop_assert_eq!(h.player(s), g.player(o));
            prop_assert_eq!(unf.posg.is_target(s), posg.is_target(o));
            prop_assert_eq!(unf.posg.observation(s).map(|z| unf.observation_origin[z].0), posg.observation(o));
            for c in h.choices(s) {
                let (a, _) = unf.action_origin[c.action];
                let orig = g.choice(o, a).expect("projected action exists");
                prop_assert_eq!(c.cost, orig.cost);
                let mut projected = BTreeMap::<StateId, f64>::new();
                for &(t, p) in &c.successors {
                    *projected.entry(unf.state_origin[t].0).or_default() += p;
                }
                for &(t, p) in &orig.successors {
                    prop_assert!((projected.remove(&t).unwrap_or(0.0) - p).abs() <= 1e-12);
                }
                prop_assert!(projected.values().all(|&p| p == 0.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn verified_value_bounds_every_response(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 4, 6, 3);
        let pmdp = posg_to_pmdp(&posg).unwrap();
        let u = instantiation_of(&pmdp, &random_strategy(&posg, &mut r));
        let (_, value) = verify_strong(&posg, &u, f64::NEG_INFINITY).unwrap();
        let sigma = istrat(&pmdp, &u).unwrap();
        let init = posg.game().initial();
        for delta in all_deceiver_strategies(&posg) {
            prop_assert!(value <= evaluate_cost(&posg, &delta, &sigma).unwrap()[init] + 1e-8);
        }
    }

    #[test]
    fn robust_value_is_optimal_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let set: Vec<_> = (0..4).map(|_| random_strategy(&posg, &mut r)).collect();
        let opts = BnbOptions::default();
        let mut previous = f64::NEG_INFINITY;
        for n in 1..=set.len() {
            let solved = solve_robust(&posg, &set[..n], &opts).unwrap();
            prop_assert!(solved.value >= previous - 1e-9);
            previous = solved.value;
            for delta in all_deceiver_strategies(&posg) {
                prop_assert!(solved.value <= worst_case_value(&posg, &delta, &set[..n]).unwrap().0 + 1e-9);
            }
        }
    }

    #[test]
    fn bounds_grow_along_a_branch(seed in any::<u64>()) {
        let mut r = rng(seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let set: Vec<_> = (0..3).map(|_| random_strategy(&posg, &mut r)).collect();
        let bound = RobustBound::new(&posg, &set).unwrap();
        let mut fixed = vec![None; posg.num_states()];
        let mut last = bound.lower_bound(&fixed).unwrap().value;
        let mut states = free_deceiver_states(&posg);
        let g = posg.game();
        while !states.is_empty() {
            let s = states.swap_remove(r.random_range(0..states.len()));
            let acts: Vec<_> = g.enabled(s).collect();
            fixed[s] = Some(acts[r.random_range(0..acts.len())]);
            let now = bound.lower_bound(&fixed).unwrap().value;
            prop_assert!(now >= last - 1e-9 * (1.0 + last.abs()));
            last = now;
        }
    }

    #[test]
    fn synthesized_sets_are_sorted_and_verified(seed in any::<u64>()) {
        let posg = random_game(&mut rng(seed), 4, 6, 3);
        let cfg = SynthesisConfig { count: 4, restarts: 8, seed, ..SynthesisConfig::default() };
        if let Ok(result) = generate_strategy_set(&posg, &cfg) {
            let values: Vec<f64> = result.strategies.iter().map(|s| s.value).collect();
            prop_assert!(values.windows(2).all(|w| w[0] >= w[1]));
            for s in &result.strategies {
                let (strong, v) = verify_strong(&result.unfolding.posg, &s.instantiation, result.threshold).unwrap();
                prop_assert!(strong && (v - s.value).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn networks_are_valid_and_count_affinely(
        n in 1usize..=10,
        compromise in 0.0f64..=1.0,
        exfiltrate in 0.0f64..=1.0,
        wait in 0.0f64..=1.0,
    ) {
        let config = NetworkConfig {
            detection: DetectionProbabilities { compromise, exfiltrate, wait, ..DetectionProbabilities::default() },
            ..NetworkConfig::with_layers(n)
        };
        let net = generate(&config).unwrap();
        prop_assert!(validate(&net.posg).is_valid());
        prop_assert_eq!(net.posg.num_states(), state_count(n));
        prop_assert_eq!(net.metadata.states, 5 * n + 2);
        for s in 0..net.posg.num_states() {
            for t in 0..net.posg.num_states() {
                let (a, b) = (net.labels[s], net.labels[t]);
                if a.position == b.position && a.mover == b.mover && a.pending == b.pending {
                    prop_assert_eq!(net.posg.observation(s), net.posg.observation(t));
                }
            }
        }
    }

    #[test]
    fn undetectable_infiltrator_leaves_no_choice(n in 1usize..=8) {
        let config = NetworkConfig {
            detection: DetectionProbabilities { compromise: 0.0, exfiltrate: 0.0, wait: 0.0, takedown: 0.0 },
            ..NetworkConfig::with_layers(n)
        };
        let net = generate(&config).unwrap();
        let seen = reachable(&net.posg);
        let g = net.posg.game();
        for s in (0..g.num_states()).filter(|&s| seen[s]) {
            let l = net.labels[s];
            prop_assert!(!l.detected, "{} reachable", g.state(s).name);
            prop_assert_eq!(l.pending, Pending::None);
            if l.mover == Player::Deceiver && !net.posg.is_target(s) {
                prop_assert_eq!(g.choices(s).len(), 1);
            }
        }
    }
}

/// The single-visit restriction above matters: on a loop the value is a
/// ratio in the strategy entry, not an affine function.
#[test]
fn revisited_observation_is_not_affine() {
    let mut b = PosgBuilder::new(0.5);
    let d = b.state("d", Player::Deceiver);
    let i = b.state("i", Player::Infiltrator);
    let t = b.state("t", Player::Deceiver);
    b.observe(i, "z");
    b.target(t);
    let (x, y) = (b.action("x"), b.action("y"));
    b.transition(d, x, i, 1.0).cost(d, x, 1.0);
    b.transition(i, x, d, 1.0);
    b.transition(i, y, t, 1.0);
    b.initial(d);
    let posg = b.build().unwrap();
    let delta = DeceiverStrategy::first_actions(&posg);
    let value = |p: f64| {
        let sigma = InfiltratorStrategy::new(vec![Some(vec![(x, p), (y, 1.0 - p)])], 1);
        evaluate_cost(&posg, &delta, &sigma).unwrap()[d]
    };
    // 1 / (1 - p/2) at p = 0, 1/2, 1.
    let (v0, vh, v1) = (value(0.0), value(0.5), value(1.0));
    assert!((v0 - 1.0).abs() < 1e-9 && (vh - 4.0 / 3.0).abs() < 1e-9 && (v1 - 2.0).abs() < 1e-9);
    assert!((vh - (v0 + v1) / 2.0).abs() > 0.1);
}
