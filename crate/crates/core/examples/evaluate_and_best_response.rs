//! Evaluates a fixed strategy pair and computes the deceiver's best response
//! to a uniformly random infiltrator.

use posg_deception::game::{best_response_deceiver, evaluate_cost, DeceiverStrategy, InfiltratorStrategy};
use posg_deception::samples;

fn main() -> posg_deception::Result<()> {
    let posg = samples::reduction_demo_with_target();
    let g = posg.game();
    let sigma = InfiltratorStrategy::uniform(&posg);

    let first = DeceiverStrategy::first_actions(&posg);
    let costs = evaluate_cost(&posg, &first, &sigma)?;
    println!("first-action deceiver: {:.6}", costs[g.initial()]);

    let (best, best_costs) = best_response_deceiver(&posg, &sigma)?;
    println!("best response: {:.6}", best_costs[g.initial()]);
    for (state, action) in best.to_named(&posg) {
        println!("  {state} -> {action}");
    }
    Ok(())
}
