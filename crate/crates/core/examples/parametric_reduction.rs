//! Reduces a small game to a parametric MDP, prints the symbolic transition
//! expressions, and checks that instantiating the parameters gives the same
//! cost as playing the corresponding infiltrator strategy.

use posg_deception::game::{evaluate_cost, DeceiverStrategy};
use posg_deception::pmdp::{instantiate, istrat, posg_to_pmdp, Instantiation};
use posg_deception::samples;

fn main() -> posg_deception::Result<()> {
    let posg = samples::reduction_demo();
    let pmdp = posg_to_pmdp(&posg)?;
    let names = pmdp.parameter_names();
    println!("parameters: {}", names.join(", "));
    for s in 0..pmdp.num_states() {
        for ch in pmdp.choices(s) {
            for (t, e) in &ch.successors {
                println!(
                    "{} --{}--> {}: {}",
                    pmdp.state_name(s),
                    pmdp.actions()[ch.action],
                    pmdp.state_name(*t),
                    e.display(&names)
                );
            }
        }
    }

    let u = Instantiation::new(vec![0.2, 0.4, 0.5]);
    let delta = DeceiverStrategy::first_actions(&posg);
    let mdp = instantiate(&pmdp, &u)?;
    let via_mdp = evaluate_cost(&mdp, &delta, &posg_deception::game::InfiltratorStrategy::forced(&mdp)?)?;
    let via_game = evaluate_cost(&posg, &delta, &istrat(&pmdp, &u)?)?;
    println!(
        "cost at the initial state: instantiated {:.10}, game {:.10}",
        via_mdp[0], via_game[0]
    );
    Ok(())
}
