//! Finds the deceiver strategy with the smallest worst-case cost over a set
//! of infiltrator strategies, and compares it with the fixed baselines.

use posg_deception::game::worst_case_value;
use posg_deception::netsec::{baseline_strategy, generate, unfolded_labels, Baseline, NetworkConfig};
use posg_deception::robust::{brute_force_robust, solve_robust, BnbOptions};
use posg_deception::synthesis::{generate_strategy_set, SynthesisConfig};

fn main() -> posg_deception::Result<()> {
    let net = generate(&NetworkConfig::with_layers(4))?;
    let cfg = SynthesisConfig {
        count: 10,
        ..SynthesisConfig::default()
    };
    let result = generate_strategy_set(&net.posg, &cfg)?;
    let game = &result.unfolding.posg;
    let set = result.infiltrator_strategies();

    let best = solve_robust(game, &set, &BnbOptions::default())?;
    println!(
        "optimal worst case {:.4} after {} nodes",
        best.value, best.nodes_explored
    );
    println!("exhaustive check   {:.4}", brute_force_robust(game, &set)?.1);
    let labels = unfolded_labels(&net.labels, &result.unfolding);
    for kind in [Baseline::AlwaysEngage, Baseline::AlwaysBlock] {
        let delta = baseline_strategy(game, &labels, kind)?;
        println!("{:<18} {:.4}", kind.name(), worst_case_value(game, &delta, &set)?.0);
    }
    Ok(())
}
