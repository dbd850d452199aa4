//! Runs the eight acceptance criteria and prints one PASS/FAIL line each.
//! Exits nonzero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use common::{all_deceiver_strategies, dense_costs, max_abs_diff, random_deceiver, random_game, random_strategy, rng};
use posg_deception::game::{
    best_response_deceiver, evaluate_cost, simulate_observations, DeceiverStrategy, InfiltratorStrategy, OneSidedPosg,
};
use posg_deception::harness::{cmd_experiment, cmd_synth, run_experiment, ExperimentSpec, OutputFormat};
use posg_deception::netsec::{generate, NetworkConfig};
use posg_deception::pmdp::{
    fsc_from_unfolded, instantiate, instantiation_of, istrat, posg_to_pmdp, unfold_memory, ParametricMdp,
};
use posg_deception::robust::{
    brute_force_robust, build_milp, check_big_m, compute_big_m, solve_milp_bnb, solve_robust, BnbOptions,
};
use posg_deception::samples;
use posg_deception::synthesis::{generate_strategy_set, verify_strong, SynthesisConfig};
use posg_deception::Error;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Big-M slack at the exact costs of `delta`; returns the smallest slack
/// relative to M.
fn big_m_ok(posg: &OneSidedPosg, set: &[InfiltratorStrategy], delta: &DeceiverStrategy) -> Result<f64, String> {
    let problem = build_milp(posg, set, compute_big_m(posg)).map_err(err)?;
    let check = check_big_m(&problem, posg, set, delta).map_err(err)?;
    ensure(check.holds(), || {
        format!("big-M slack {} below 1e-6 M = {}", check.min_slack, 1e-6 * check.big_m)
    })?;
    ensure(check.max_violation <= 1e-6 * (1.0 + check.big_m), || {
        format!("exact solution violates a row by {}", check.max_violation)
    })?;
    Ok(check.min_slack / check.big_m)
}

fn criterion_1_and_6a() -> Result<(String, String), String> {
    let mut worst = 0.0f64;
    let mut min_rel_slack = f64::INFINITY;
    for seed in 0..200u64 {
        let mut r = rng(1000 + seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let n = r.random_range(1..=4);
        let set: Vec<_> = (0..n).map(|_| random_strategy(&posg, &mut r)).collect();
        let problem = build_milp(&posg, &set, compute_big_m(&posg)).map_err(err)?;
        let solved = solve_milp_bnb(&posg, &set, &problem, &BnbOptions::default()).map_err(err)?;
        let (_, brute) = brute_force_robust(&posg, &set).map_err(err)?;
        let diff = (solved.value - brute).abs();
        ensure(diff <= 1e-6, || {
            format!("game {seed}: search {} vs enumeration {brute}", solved.value)
        })?;
        worst = worst.max(diff);
        min_rel_slack =
            min_rel_slack.min(big_m_ok(&posg, &set, &solved.strategy).map_err(|e| format!("game {seed}: {e}"))?);
    }
    Ok((
        format!("200 games, largest difference {worst:.2e}"),
        format!("smallest deactivated slack {min_rel_slack:.3} M"),
    ))
}

fn criterion_2() -> Outcome {
    let (mut eval_diff, mut br_diff) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let sigma = random_strategy(&posg, &mut r);
        let delta = random_deceiver(&posg, &mut r);
        let iterative = evaluate_cost(&posg, &delta, &sigma).map_err(err)?;
        let d = max_abs_diff(&iterative.values, &dense_costs(&posg, &delta, &sigma));
        ensure(d <= 1e-8, || {
            format!("game {seed}: evaluation differs from the linear solve by {d:e}")
        })?;
        eval_diff = eval_diff.max(d);

        let (_, best) = best_response_deceiver(&posg, &sigma).map_err(err)?;
        let mut enumerated = vec![f64::INFINITY; posg.num_states()];
        for delta in all_deceiver_strategies(&posg) {
            for (m, v) in enumerated.iter_mut().zip(dense_costs(&posg, &delta, &sigma)) {
                *m = m.min(v);
            }
        }
        let d = max_abs_diff(&best.values, &enumerated);
        ensure(d <= 1e-8, || {
            format!("game {seed}: best response differs from enumeration by {d:e}")
        })?;
        br_diff = br_diff.max(d);
    }
    Ok(format!(
        "100 games, evaluation {eval_diff:.2e}, best response {br_diff:.2e}"
    ))
}

fn transition_expr(pmdp: &ParametricMdp, from: &str, to: &str) -> String {
    let find = |name: &str| (0..pmdp.num_states()).find(|&s| pmdp.state_name(s) == name).unwrap();
    let (s, t) = (find(from), find(to));
    pmdp.choices(s)[0]
        .successors
        .iter()
        .find(|(u, _)| *u == t)
        .map(|(_, e)| e.display(&pmdp.parameter_names()).to_string())
        .unwrap_or_default()
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng(3000 + seed);
        let posg = random_game(&mut r, 5, 8, 3);
        let pmdp = posg_to_pmdp(&posg).map_err(err)?;
        let u = instantiation_of(&pmdp, &random_strategy(&posg, &mut r));
        let mdp = instantiate(&pmdp, &u).map_err(err)?;
        let forced = InfiltratorStrategy::forced(&mdp).map_err(err)?;
        let sigma = istrat(&pmdp, &u).map_err(err)?;
        for _ in 0..5 {
            let delta = random_deceiver(&posg, &mut r);
            let on_mdp = DeceiverStrategy::from_named(&mdp, &delta.to_named(&posg)).map_err(err)?;
            let a = evaluate_cost(&mdp, &on_mdp, &forced).map_err(err)?;
            let b = evaluate_cost(&posg, &delta, &sigma).map_err(err)?;
            let d = max_abs_diff(&a.values, &b.values);
            ensure(d <= 1e-8, || {
                format!("game {seed}: instantiated model differs by {d:e}")
            })?;
            worst = worst.max(d);
        }
    }
    let pmdp = posg_to_pmdp(&samples::reduction_demo()).map_err(err)?;
    let expected = [
        ("s5", "1 - p_blue_1 - p_blue_2"),
        ("s4", "p_blue_1 + 1/2*p_blue_2"),
        ("s2", "1/2*p_blue_2"),
    ];
    for (to, want) in expected {
        let got = transition_expr(&pmdp, "s0", to);
        ensure(got == want, || format!("s0 -> {to}: got {got}, expected {want}"))?;
    }
    Ok(format!(
        "50 games, largest difference {worst:.2e}; s0 expressions exact"
    ))
}

fn criterion_4() -> Outcome {
    let mut games: Vec<(String, OneSidedPosg)> = vec![("demo".into(), samples::reduction_demo_with_target())];
    for n in [2, 3, 4] {
        games.push((
            format!("network {n}"),
            generate(&NetworkConfig::with_layers(n)).map_err(err)?.posg,
        ));
    }
    for seed in 0..8u64 {
        games.push((format!("random {seed}"), random_game(&mut rng(4000 + seed), 4, 6, 3)));
    }
    let (mut checked, mut runs) = (0usize, 0usize);
    for (name, posg) in &games {
        for k in [1, 2] {
            let cfg = SynthesisConfig {
                count: 5,
                restarts: 16,
                memory: k,
                seed: 3,
                ..SynthesisConfig::default()
            };
            let result = match generate_strategy_set(posg, &cfg) {
                Ok(r) => r,
                Err(Error::NoStrongStrategy { .. }) => continue,
                Err(e) => return Err(format!("{name} k={k}: {e}")),
            };
            runs += 1;
            let game = &result.unfolding.posg;
            for s in &result.strategies {
                let (strong, value) = verify_strong(game, &s.instantiation, result.threshold).map_err(err)?;
                ensure(strong && s.strong, || {
                    format!("{name} k={k}: restart {} does not re-verify", s.restart)
                })?;
                ensure((value - s.value).abs() <= 1e-8, || {
                    format!("{name} k={k}: value {} re-verifies as {value}", s.value)
                })?;
                let (at, _) = verify_strong(game, &s.instantiation, value).map_err(err)?;
                let (above, _) = verify_strong(game, &s.instantiation, value.next_up()).map_err(err)?;
                ensure(at && !above, || {
                    format!("{name} k={k}: threshold boundary not exact at {value}")
                })?;
                checked += 1;
            }
        }
    }
    ensure(runs >= games.len(), || {
        format!("only {runs} of {} runs found strong strategies", 2 * games.len())
    })?;
    Ok(format!(
        "{checked} strategies from {runs} runs re-verified; boundary exact"
    ))
}

fn criterion_5_and_6b() -> Result<(String, String), String> {
    let spec = ExperimentSpec::default();
    let report = run_experiment(&spec).map_err(err)?;
    for c in &report.checks {
        ensure(c.passed, || format!("{}: {}", c.name, c.violations.join("; ")))?;
    }
    let optimal: BTreeMap<(usize, u64, usize), f64> = report
        .rows
        .iter()
        .filter(|r| r.policy == "optimal")
        .map(|r| ((r.k, r.seed, r.n), r.worst_case_value.unwrap()))
        .collect();
    let net = generate(&NetworkConfig::with_layers(4)).map_err(err)?;
    let mut min_rel_slack = f64::INFINITY;
    let mut instances = 0;
    for &k in &spec.memory {
        for &seed in &spec.seeds {
            let result = generate_strategy_set(&net.posg, &spec.synthesis_config(k, seed)).map_err(err)?;
            let all = result.infiltrator_strategies();
            let game = &result.unfolding.posg;
            for &n in &spec.strategies {
                let set = &all[..n.min(all.len())];
                let solved = solve_robust(game, set, &BnbOptions::default()).map_err(err)?;
                ensure(solved.value == optimal[&(k, seed, n)], || {
                    format!("k={k} seed={seed} N={n}: rerun differs")
                })?;
                min_rel_slack = min_rel_slack.min(big_m_ok(game, set, &solved.strategy)?);
                instances += 1;
            }
        }
    }
    let table: Vec<String> = optimal
        .iter()
        .map(|((k, s, n), v)| format!("k{k}/s{s}/N{n}={v:.2}"))
        .collect();
    Ok((
        format!(
            "{} rows, orderings hold; optimal {}",
            report.rows.len(),
            table.join(" ")
        ),
        format!("{instances} network instances, smallest deactivated slack {min_rel_slack:.3} M"),
    ))
}

fn isomorphic_k1(posg: &OneSidedPosg) -> Result<(), String> {
    let unf = unfold_memory(posg, 1).map_err(err)?;
    let (g, h) = (posg.game(), unf.posg.game());
    ensure(
        h.num_states() == g.num_states() && unf.posg.num_observations() == posg.num_observations(),
        || "sizes differ".into(),
    )?;
    ensure(h.initial() == g.initial() && h.discount() == g.discount(), || {
        "initial state or discount differs".into()
    })?;
    for s in 0..g.num_states() {
        ensure(unf.state_origin[s] == (s, 0), || {
            format!("state {s} is not mapped to itself")
        })?;
        ensure(
            h.player(s) == g.player(s) && unf.posg.is_target(s) == posg.is_target(s),
            || format!("state {s} differs"),
        )?;
        ensure(
            unf.posg.observation(s).map(|z| unf.observation_origin[z].0) == posg.observation(s),
            || format!("observation of state {s} differs"),
        )?;
        let mapped: Vec<_> = h
            .choices(s)
            .iter()
            .map(|c| (unf.action_origin[c.action].0, c.cost, c.successors.clone()))
            .collect();
        let original: Vec<_> = g
            .choices(s)
            .iter()
            .map(|c| (c.action, c.cost, c.successors.clone()))
            .collect();
        ensure(mapped == original, || format!("choices of state {s} differ"))?;
    }
    Ok(())
}

/// Two-sample chi-square p-value over trace categories, pooling rare ones.
fn homogeneity_p_value(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> f64 {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    let (mut cells, mut pooled) = (Vec::new(), (0u64, 0u64));
    for k in keys {
        let (x, y) = (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0));
        if x + y < 20 {
            pooled = (pooled.0 + x, pooled.1 + y);
        } else {
            cells.push((x, y));
        }
    }
    if pooled.0 + pooled.1 > 0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| (x as f64 - y as f64).powi(2) / (x + y) as f64)
        .sum();
    ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat)
}

fn criterion_7() -> Outcome {
    let mut games = vec![samples::reduction_demo(), samples::reduction_demo_with_target()];
    games.push(generate(&NetworkConfig::with_layers(3)).map_err(err)?.posg);
    for seed in 0..20u64 {
        games.push(random_game(&mut rng(7000 + seed), 5, 8, 3));
    }
    for (i, posg) in games.iter().enumerate() {
        isomorphic_k1(posg).map_err(|e| format!("game {i}, k=1: {e}"))?;
    }

    const SAMPLES: usize = 20_000;
    let mut min_p = 1.0f64;
    for (i, posg) in games.iter().take(6).enumerate() {
        let mut r = rng(7100 + i as u64);
        let unf = unfold_memory(posg, 2).map_err(err)?;
        let sigma = random_strategy(&unf.posg, &mut r);
        let fsc = fsc_from_unfolded(&unf, &sigma).map_err(err)?;
        let delta = random_deceiver(posg, &mut r);
        let lifted = unf.lift_deceiver(&delta);
        let (mut via_fsc, mut via_unfolded) = (BTreeMap::new(), BTreeMap::new());
        for _ in 0..SAMPLES {
            let trace = fsc.simulate(posg, &delta, 4, &mut r).map_err(err)?;
            *via_fsc.entry(format!("{trace:?}")).or_insert(0u64) += 1;
            let trace = simulate_observations(
                &unf.posg,
                &lifted,
                |z, r: &mut rand_chacha::ChaCha8Rng| {
                    let row = sigma.row(z).expect("live observation");
                    let mut x: f64 = r.random();
                    for &(a, p) in row {
                        x -= p;
                        if x < 0.0 {
                            return a;
                        }
                    }
                    row.last().unwrap().0
                },
                4,
                &mut r,
            )
            .map_err(err)?;
            let original: Vec<_> = trace
                .iter()
                .map(|&(z, a)| (unf.observation_origin[z].0, unf.action_origin[a].0))
                .collect();
            *via_unfolded.entry(format!("{original:?}")).or_insert(0u64) += 1;
        }
        let p = homogeneity_p_value(&via_fsc, &via_unfolded);
        ensure(p > 1e-4, || {
            format!("game {i}: controller traces differ from the unfolding (p = {p:.2e})")
        })?;
        min_p = min_p.min(p);
    }
    Ok(format!(
        "{} games isomorphic at k=1; k=2 traces agree (smallest p = {min_p:.3})",
        games.len()
    ))
}

fn criterion_8() -> Outcome {
    let posg = generate(&NetworkConfig::with_layers(4)).map_err(err)?.posg;
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let same = |file: &str| {
        let read = |d: &tempfile::TempDir| std::fs::read(d.path().join(file)).unwrap();
        read(&dirs[0]) == read(&dirs[1])
    };
    for k in [1, 2] {
        let cfg = SynthesisConfig {
            count: 20,
            restarts: 40,
            memory: k,
            seed: 11,
            ..SynthesisConfig::default()
        };
        for d in &dirs {
            cmd_synth(&posg, &cfg, d.path()).map_err(err)?;
        }
        for f in ["strategies.json", "synthesis.json"] {
            ensure(same(f), || format!("k={k}: {f} differs between runs"))?;
        }
    }
    let spec = ExperimentSpec {
        layers: vec![3],
        strategies: vec![2, 5, 10],
        seeds: vec![0, 1],
        ..ExperimentSpec::default()
    };
    for (format, file) in [(OutputFormat::Csv, "rows.csv"), (OutputFormat::Json, "rows.json")] {
        for d in &dirs {
            cmd_experiment(&spec, format, d.path()).map_err(err)?;
        }
        for f in [file, "checks.json", "provenance.json"] {
            ensure(same(f), || format!("{f} differs between runs"))?;
        }
    }
    Ok("strategy sets and experiment outputs byte-identical".into())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut line = |n: &str, name: &str, outcome: Outcome, secs: f64| match outcome {
        Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
        Err(detail) => {
            failed += 1;
            println!("FAIL criterion {n} ({name}): {detail} [{secs:.1}s]");
        }
    };
    let split = |r: Result<(String, String), String>| match r {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(e.clone()), Err(e)),
    };

    let t = Instant::now();
    let (c1, c6a) = split(criterion_1_and_6a());
    let t1 = t.elapsed().as_secs_f64();
    line("1", "search equals enumeration", c1, t1);
    let t = Instant::now();
    line("2", "evaluation oracles", criterion_2(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    line("3", "reduction soundness", criterion_3(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    line(
        "4",
        "strong strategies re-verify",
        criterion_4(),
        t.elapsed().as_secs_f64(),
    );
    let t = Instant::now();
    let (c5, c6b) = split(criterion_5_and_6b());
    let t5 = t.elapsed().as_secs_f64();
    line("5", "network trends", c5, t5);
    let c6 = match (c6a, c6b) {
        (Ok(a), Ok(b)) => Ok(format!("random games: {a}; {b}")),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    line("6", "big-M rows slack", c6, t1 + t5);
    let t = Instant::now();
    line("7", "memory unfolding", criterion_7(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    line("8", "determinism", criterion_8(), t.elapsed().as_secs_f64());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
