//! Unfolds a game for a two-node infiltrator controller, maps a strategy on
//! the unfolding back to a controller, and replays it on the original game.

use posg_deception::game::{DeceiverStrategy, InfiltratorStrategy};
use posg_deception::pmdp::{fsc_from_unfolded, unfold_memory};
use posg_deception::samples;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> posg_deception::Result<()> {
    let posg = samples::reduction_demo_with_target();
    let unfolding = unfold_memory(&posg, 2)?;
    println!(
        "{} states, {} observations -> {} states, {} observations",
        posg.num_states(),
        posg.num_observations(),
        unfolding.posg.num_states(),
        unfolding.posg.num_observations()
    );

    let sigma = InfiltratorStrategy::uniform(&unfolding.posg);
    let fsc = fsc_from_unfolded(&unfolding, &sigma)?;
    println!(
        "controller with {} nodes, starting in node {}",
        fsc.nodes(),
        fsc.initial_node
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trace = fsc.simulate(&posg, &DeceiverStrategy::first_actions(&posg), 8, &mut rng)?;
    let g = posg.game();
    for (z, a) in trace {
        println!("  observe {} play {}", posg.observations()[z], g.action_name(a));
    }
    Ok(())
}
