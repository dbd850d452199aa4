//! Writes the fixed-strategy deceiver program and the symbolic robust program
//! in LP format, then solves the first with the bundled LP solver.

use posg_deception::robust::{
    build_milp, build_robust_milp_export, compute_big_m, count_robust_rows, milp_to_lp, parse_lp,
};
use posg_deception::samples;
use posg_deception::synthesis::{generate_strategy_set, SynthesisConfig};

fn main() -> posg_deception::Result<()> {
    let posg = samples::reduction_demo_with_target();
    let result = generate_strategy_set(
        &posg,
        &SynthesisConfig {
            count: 3,
            ..SynthesisConfig::default()
        },
    )?;
    let game = &result.unfolding.posg;
    let problem = build_milp(game, &result.infiltrator_strategies(), compute_big_m(game))?;
    let text = milp_to_lp(&problem)?;
    println!("{text}");

    let lp = parse_lp(&text)?;
    let (value, x) = lp.solve()?;
    let delta = problem.decode(game, &x);
    println!("solver value {:.6}", value);
    println!("deceiver {:?}", delta.to_named(game));

    let robust = build_robust_milp_export(&posg, compute_big_m(&posg))?;
    println!("robust program rows: {:?}", count_robust_rows(&robust));
    Ok(())
}
