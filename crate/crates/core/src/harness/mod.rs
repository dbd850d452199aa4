//! Command implementations behind the `deception` binary, usable as a
//! library. Every command writes its artifacts into an output directory;
//! deterministic artifacts never contain timings, which go to
//! `timings.csv` instead.

mod experiment;

pub use experiment::{
    cmd_experiment, run_experiment, CheckResult, ExperimentReport, ExperimentRow, ExperimentSpec, OutputFormat,
    TimingRow,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    read_posg, validate, worst_case_value, write_posg, DeceiverStrategy, OneSidedPosg, ValidationReport,
};
use crate::netsec::{baseline_strategy, generate, unfolded_labels, Baseline, NetworkConfig, NetworkGame, NetworkState};
use crate::robust::{
    build_milp, build_robust_milp_export, compute_big_m, export_milp, solve_robust, BnbOptions, SolveReport,
};
use crate::synthesis::{
    generate_strategy_set, read_strategy_set, realize_strategy_set, write_strategy_set, StrategyEntry, StrategyFamily,
    SynthesisConfig, SynthesisResult,
};

pub const MODEL_FILE: &str = "model.json";
pub const LABELS_FILE: &str = "labels.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const STRATEGIES_FILE: &str = "strategies.json";
pub const SYNTHESIS_FILE: &str = "synthesis.json";
pub const SOLVE_FILE: &str = "solve.json";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Numerical tolerances in force, for provenance records.
pub fn tolerances() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("fixed_point_error", crate::game::RESIDUAL_TOL),
        ("action_tie", crate::game::TIE_TOL),
        ("well_defined", crate::pmdp::WELL_DEFINED_TOL),
        ("bnb_prune", BnbOptions::default().prune_tol),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seeds: Vec<u64>,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub config: serde_json::Value,
}

pub fn write_provenance(dir: &Path, command: &str, seeds: Vec<u64>, config: serde_json::Value) -> Result<()> {
    let p = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        seeds,
        tolerances: tolerances(),
        config,
    };
    write_json(&p, &dir.join(PROVENANCE_FILE))
}

fn write_timings(dir: &Path, rows: &[(String, f64)]) -> Result<()> {
    let path = dir.join(TIMINGS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
    let io = |e: csv::Error| Error::io(&path, e.into());
    w.write_record(["stage", "seconds"]).map_err(io)?;
    for (stage, secs) in rows {
        w.write_record([stage.as_str(), &secs.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Reads a model and rejects it unless it validates.
pub fn load_model(path: &Path) -> Result<OneSidedPosg> {
    let posg = read_posg(path)?;
    let report = validate(&posg);
    if report.is_valid() {
        Ok(posg)
    } else {
        Err(Error::InvalidModel(report))
    }
}

pub fn cmd_validate(path: &Path) -> Result<ValidationReport> {
    Ok(validate(&read_posg(path)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LabelEntry {
    state: usize,
    name: String,
    #[serde(flatten)]
    label: NetworkState,
}

pub fn write_labels(posg: &OneSidedPosg, labels: &[NetworkState], path: &Path) -> Result<()> {
    let entries: Vec<LabelEntry> = labels
        .iter()
        .enumerate()
        .map(|(s, &label)| LabelEntry {
            state: s,
            name: posg.game().state(s).name.clone(),
            label,
        })
        .collect();
    write_json(&entries, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<NetworkState>> {
    let entries: Vec<LabelEntry> = read_json(path)?;
    if entries.iter().enumerate().any(|(i, e)| e.state != i) {
        return Err(Error::Malformed(format!(
            "{}: labels must list states 0, 1, 2, ... in order",
            path.display()
        )));
    }
    Ok(entries.into_iter().map(|e| e.label).collect())
}

/// Writes the generated game, its labels and metadata into `out`.
pub fn cmd_generate(config: &NetworkConfig, out: &Path) -> Result<NetworkGame> {
    let net = generate(config)?;
    ensure_dir(out)?;
    write_posg(&net.posg, &out.join(MODEL_FILE))?;
    write_labels(&net.posg, &net.labels, &out.join(LABELS_FILE))?;
    write_json(&net.metadata, &out.join(METADATA_FILE))?;
    write_provenance(out, "generate", Vec::new(), serde_json::to_value(config)?)?;
    Ok(net)
}

/// Deterministic summary of a synthesis run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub threshold: f64,
    pub k: usize,
    pub requested: usize,
    pub returned: usize,
    pub strong: usize,
    pub restarts: usize,
    pub failed_restarts: usize,
    pub strong_candidates: usize,
    pub ccp_iterations: usize,
}

impl SynthSummary {
    pub fn new(result: &SynthesisResult, cfg: &SynthesisConfig) -> Self {
        Self {
            threshold: result.threshold,
            k: result.unfolding.k,
            requested: cfg.count,
            returned: result.strategies.len(),
            strong: result.strategies.iter().filter(|s| s.strong).count(),
            restarts: result.stats.restarts,
            failed_restarts: result.stats.failed_restarts,
            strong_candidates: result.stats.strong_candidates,
            ccp_iterations: result.stats.ccp_iterations,
        }
    }
}

/// Synthesizes a strategy set and writes `strategies.json` and
/// `synthesis.json` into `out`.
pub fn cmd_synth(posg: &OneSidedPosg, cfg: &SynthesisConfig, out: &Path) -> Result<SynthesisResult> {
    let started = Instant::now();
    let result = generate_strategy_set(posg, cfg)?;
    ensure_dir(out)?;
    write_strategy_set(&result.entries(), &out.join(STRATEGIES_FILE))?;
    write_json(&SynthSummary::new(&result, cfg), &out.join(SYNTHESIS_FILE))?;
    write_provenance(out, "synth", vec![cfg.seed], serde_json::to_value(cfg)?)?;
    write_timings(out, &[("synthesis".into(), started.elapsed().as_secs_f64())])?;
    Ok(result)
}

/// Solve result for the strategies of one memory size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySolve {
    pub k: usize,
    #[serde(flatten)]
    pub report: SolveReport,
}

/// Robust solve over a strategy set that may mix memory sizes. Each size is
/// solved on its own unfolding; the overall value is the largest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub value: f64,
    pub solves: Vec<MemorySolve>,
}

pub fn solve_families(families: &[StrategyFamily], opts: &BnbOptions) -> Result<SolveOutput> {
    let solves = families
        .iter()
        .map(|f| {
            let r = solve_robust(&f.unfolding.posg, &f.strategies, opts)?;
            Ok(MemorySolve {
                k: f.unfolding.k,
                report: r.report(&f.unfolding.posg),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let value = solves.iter().map(|s| s.report.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(SolveOutput { value, solves })
}

pub fn cmd_solve(posg: &OneSidedPosg, entries: &[StrategyEntry], opts: &BnbOptions, out: &Path) -> Result<SolveOutput> {
    let started = Instant::now();
    let families = realize_strategy_set(posg, entries)?;
    let output = solve_families(&families, opts)?;
    ensure_dir(out)?;
    write_json(&output, &out.join(SOLVE_FILE))?;
    write_provenance(out, "solve", Vec::new(), serde_json::to_value(opts)?)?;
    write_timings(out, &[("solve".into(), started.elapsed().as_secs_f64())])?;
    Ok(output)
}

pub fn read_strategies(path: &Path) -> Result<Vec<StrategyEntry>> {
    read_strategy_set(path)
}

/// A deceiver policy to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Solve for the robust optimum first.
    Optimal,
    Baseline(Baseline),
    /// A `solve.json` output or a plain `{state: action}` map.
    File(PathBuf),
}

impl Policy {
    pub fn parse(text: &str) -> Self {
        match text {
            "optimal" => Policy::Optimal,
            "always_engage" => Policy::Baseline(Baseline::AlwaysEngage),
            "always_block" => Policy::Baseline(Baseline::AlwaysBlock),
            path => Policy::File(PathBuf::from(path)),
        }
    }
}

/// A deceiver strategy for `family`'s unfolding, read from a named map over
/// either the unfolded or the original states.
fn strategy_for(
    posg: &OneSidedPosg,
    family: &StrategyFamily,
    named: &BTreeMap<String, String>,
) -> Result<DeceiverStrategy> {
    DeceiverStrategy::from_named(&family.unfolding.posg, named).or_else(|unfolded_err| {
        DeceiverStrategy::from_named(posg, named)
            .map(|d| family.unfolding.lift_deceiver(&d))
            .map_err(|_| unfolded_err)
    })
}

/// Worst case of `policy` over the strategy set: the largest value over all
/// memory sizes.
pub fn evaluate_policy(
    posg: &OneSidedPosg,
    labels: Option<&[NetworkState]>,
    policy: &Policy,
    entries: &[StrategyEntry],
    opts: &BnbOptions,
) -> Result<f64> {
    let families = realize_strategy_set(posg, entries)?;
    if *policy == Policy::Optimal {
        return Ok(solve_families(&families, opts)?.value);
    }
    let file: Option<serde_json::Value> = match policy {
        Policy::File(path) => Some(read_json(path)?),
        _ => None,
    };
    let mut worst = f64::NEG_INFINITY;
    for family in &families {
        let game = &family.unfolding.posg;
        let delta = match (policy, &file) {
            (Policy::Baseline(kind), _) => {
                let labels = labels.ok_or_else(|| Error::Domain("baseline policies need state labels".into()))?;
                if labels.len() != posg.num_states() {
                    return Err(Error::StrategyMismatch(format!(
                        "{} labels for {} states",
                        labels.len(),
                        posg.num_states()
                    )));
                }
                baseline_strategy(game, &unfolded_labels(labels, &family.unfolding), *kind)?
            }
            (_, Some(value)) => {
                let named: BTreeMap<String, String> = if let Some(solves) = value.get("solves") {
                    let solves: Vec<MemorySolve> = serde_json::from_value(solves.clone())?;
                    solves
                        .into_iter()
                        .find(|s| s.k == family.unfolding.k)
                        .ok_or_else(|| {
                            Error::StrategyMismatch(format!(
                                "policy file has no strategy for memory {}",
                                family.unfolding.k
                            ))
                        })?
                        .report
                        .strategy
                } else {
                    serde_json::from_value(value.clone())?
                };
                strategy_for(posg, family, &named)?
            }
            _ => unreachable!("optimal handled above"),
        };
        worst = worst.max(worst_case_value(game, &delta, &family.strategies)?.0);
    }
    Ok(worst)
}

/// Writes the fixed-strategy program for the strategies of memory `k` (the
/// only memory size present when `k` is `None`).
pub fn cmd_export_milp(posg: &OneSidedPosg, entries: &[StrategyEntry], k: Option<usize>, path: &Path) -> Result<()> {
    let families = realize_strategy_set(posg, entries)?;
    let family = match k {
        Some(k) => families
            .iter()
            .find(|f| f.unfolding.k == k)
            .ok_or_else(|| Error::Domain(format!("strategy set has no strategies with memory {k}")))?,
        None if families.len() == 1 => &families[0],
        None => {
            return Err(Error::Domain(
                "strategy set mixes memory sizes; choose one with --k".into(),
            ))
        }
    };
    let game = &family.unfolding.posg;
    let problem = build_milp(game, &family.strategies, compute_big_m(game))?;
    export_milp(&problem, path)
}

pub fn cmd_export_robust_milp(posg: &OneSidedPosg, path: &Path) -> Result<()> {
    let text = build_robust_milp_export(posg, compute_big_m(posg))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
