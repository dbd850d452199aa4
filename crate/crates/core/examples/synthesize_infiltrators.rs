//! Synthesizes a set of infiltrator strategies that each guarantee at least
//! the uniform strategy's value against every deceiver response.

use posg_deception::netsec::{generate, NetworkConfig};
use posg_deception::synthesis::{generate_strategy_set, verify_strong, SynthesisConfig};

fn main() -> posg_deception::Result<()> {
    let net = generate(&NetworkConfig::with_layers(3))?;
    let cfg = SynthesisConfig {
        count: 5,
        restarts: 20,
        seed: 1,
        ..SynthesisConfig::default()
    };
    let result = generate_strategy_set(&net.posg, &cfg)?;
    println!("threshold {:.4}", result.threshold);
    for s in &result.strategies {
        let (strong, value) = verify_strong(&result.unfolding.posg, &s.instantiation, result.threshold)?;
        println!(
            "restart {:>2}: value {:.4} strong {strong} (recheck {value:.4})",
            s.restart, s.value
        );
    }
    println!("{:?}", result.stats);
    Ok(())
}
