//! A small sweep over memory size and strategy-set size on a 3-layer network.

use posg_deception::harness::{run_experiment, ExperimentSpec};

fn main() -> posg_deception::Result<()> {
    let spec = ExperimentSpec {
        layers: vec![3],
        memory: vec![1, 2],
        strategies: vec![2, 5, 10],
        seeds: vec![0],
        ..ExperimentSpec::default()
    };
    let report = run_experiment(&spec)?;
    println!("{:>2} {:>3} {:<14} {:>10}", "k", "N", "policy", "value");
    for r in &report.rows {
        let v = r
            .worst_case_value
            .map_or_else(|| r.status.clone(), |v| format!("{v:.4}"));
        println!("{:>2} {:>3} {:<14} {:>10}", r.k, r.n, r.policy, v);
    }
    for c in &report.checks {
        println!("{}: {}", c.name, if c.passed { "ok" } else { "violated" });
    }
    Ok(())
}
