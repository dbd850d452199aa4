//! Parameter sweeps over network size, memory, strategy-set size and seed.
//!
//! For each (layers, k, seed) cell the largest strategy set is synthesized
//! once and smaller sets are its prefixes, so the optimal value can only grow
//! with the set size. Cells run in parallel; rows come out in spec order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, load_model, read_labels, write_json, write_provenance};
use crate::error::{Error, Result};
use crate::game::{worst_case_value, InfiltratorStrategy, OneSidedPosg};
use crate::netsec::{baseline_strategy, generate, unfolded_labels, Baseline, NetworkConfig, NetworkState};
use crate::robust::{solve_robust, BnbOptions};
use crate::synthesis::{generate_strategy_set, SynthesisConfig, SynthesisResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Network sizes to generate. Ignored when `model` is set.
    pub layers: Vec<usize>,
    /// A model file to use instead of generated networks.
    pub model: Option<PathBuf>,
    /// State labels for `model`; without them only the optimal policy is run.
    pub labels: Option<PathBuf>,
    /// Settings for generated networks other than the layer count.
    pub network: NetworkConfig,
    pub memory: Vec<usize>,
    /// Strategy-set sizes, strictly increasing.
    pub strategies: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Synthesis restarts per cell; defaults to `max(40, 2 * largest size)`.
    pub restarts: Option<usize>,
    pub threshold: Option<f64>,
    pub allow_weak_fill: bool,
    /// Tolerance of the ordering checks.
    pub tol: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            layers: vec![4],
            model: None,
            labels: None,
            network: NetworkConfig::default(),
            memory: vec![1, 2],
            strategies: vec![5, 20, 50],
            seeds: vec![0, 1, 2],
            restarts: None,
            threshold: None,
            allow_weak_fill: false,
            tol: 1e-6,
        }
    }
}

impl ExperimentSpec {
    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Domain(format!("experiment: {m}")));
        if self.model.is_none() && (self.layers.is_empty() || self.layers.contains(&0)) {
            return fail("layers must be a nonempty list of positive sizes");
        }
        if self.labels.is_some() && self.model.is_none() {
            return fail("labels given without a model");
        }
        if self.memory.is_empty() || self.memory.contains(&0) {
            return fail("memory must be a nonempty list of positive sizes");
        }
        if self.strategies.is_empty() || self.strategies[0] == 0 {
            return fail("strategy-set sizes must be a nonempty list of positive sizes");
        }
        if self.strategies.windows(2).any(|w| w[0] >= w[1]) {
            return fail("strategy-set sizes must be strictly increasing");
        }
        if self.seeds.is_empty() {
            return fail("seeds must be nonempty");
        }
        if self.restarts == Some(0) {
            return fail("restarts must be at least 1");
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return fail("tol must be a nonnegative number");
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    /// Synthesis settings of the cell with memory `k` and `seed`.
    pub fn synthesis_config(&self, k: usize, seed: u64) -> SynthesisConfig {
        let largest = *self.strategies.last().expect("checked nonempty");
        SynthesisConfig {
            threshold: self.threshold,
            count: largest,
            restarts: self.restarts.unwrap_or((2 * largest).max(40)),
            seed,
            memory: k,
            allow_weak_fill: self.allow_weak_fill,
            ..SynthesisConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    /// `None` for a model read from file.
    pub layers: Option<usize>,
    pub k: usize,
    /// Requested strategy-set size.
    pub n: usize,
    /// Strategies actually in the set; below `n` when synthesis found fewer.
    pub strategies: usize,
    pub policy: String,
    pub worst_case_value: Option<f64>,
    pub nodes_explored: Option<usize>,
    pub seed: u64,
    /// `ok`, or the error that stopped this row.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub layers: Option<usize>,
    pub k: usize,
    pub n: Option<usize>,
    pub seed: u64,
    pub stage: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub timings: Vec<TimingRow>,
    pub checks: Vec<CheckResult>,
}

impl ExperimentReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Instance {
    layers: Option<usize>,
    posg: OneSidedPosg,
    labels: Option<Vec<NetworkState>>,
}

fn instances(spec: &ExperimentSpec) -> Result<Vec<Instance>> {
    if let Some(model) = &spec.model {
        let posg = load_model(model)?;
        let labels = spec.labels.as_deref().map(read_labels).transpose()?;
        if labels.as_ref().is_some_and(|l| l.len() != posg.num_states()) {
            return Err(Error::StrategyMismatch("labels do not cover the model's states".into()));
        }
        return Ok(vec![Instance {
            layers: None,
            posg,
            labels,
        }]);
    }
    spec.layers
        .iter()
        .map(|&n| {
            let mut config = spec.network.clone();
            config.layers = n;
            let net = generate(&config)?;
            Ok(Instance {
                layers: Some(n),
                posg: net.posg,
                labels: Some(net.labels),
            })
        })
        .collect()
}

fn status_of(e: &Error) -> String {
    format!("error: {e}")
}

struct CellOutput {
    rows: Vec<ExperimentRow>,
    timings: Vec<TimingRow>,
}

fn run_cell(spec: &ExperimentSpec, inst: &Instance, k: usize, seed: u64) -> CellOutput {
    let mut policies = vec!["optimal".to_string()];
    if inst.labels.is_some() {
        policies.extend([Baseline::AlwaysEngage, Baseline::AlwaysBlock].map(|b| b.name().to_string()));
    }
    let row = |n: usize, strategies: usize, policy: &str| ExperimentRow {
        layers: inst.layers,
        k,
        n,
        strategies,
        policy: policy.to_string(),
        worst_case_value: None,
        nodes_explored: None,
        seed,
        status: "ok".into(),
    };
    let timing = |n: Option<usize>, stage: &str, t: Instant| TimingRow {
        layers: inst.layers,
        k,
        n,
        seed,
        stage: stage.into(),
        wall_time_s: t.elapsed().as_secs_f64(),
    };

    let started = Instant::now();
    let synthesized = generate_strategy_set(&inst.posg, &spec.synthesis_config(k, seed));
    let mut out = CellOutput {
        rows: Vec::new(),
        timings: vec![timing(None, "synthesis", started)],
    };
    let result = match synthesized {
        Ok(r) => r,
        Err(e) => {
            for &n in &spec.strategies {
                for p in &policies {
                    out.rows.push(ExperimentRow {
                        status: status_of(&e),
                        ..row(n, 0, p)
                    });
                }
            }
            return out;
        }
    };
    let all = result.infiltrator_strategies();
    for &n in &spec.strategies {
        let set = &all[..n.min(all.len())];
        let started = Instant::now();
        for p in &policies {
            let mut r = row(n, set.len(), p);
            match evaluate_row(inst, &result, set, p) {
                Ok((value, nodes)) => {
                    r.worst_case_value = Some(value);
                    r.nodes_explored = nodes;
                }
                Err(e) => r.status = status_of(&e),
            }
            out.rows.push(r);
        }
        out.timings.push(timing(Some(n), "solve_and_evaluate", started));
    }
    out
}

fn evaluate_row(
    inst: &Instance,
    result: &SynthesisResult,
    set: &[InfiltratorStrategy],
    policy: &str,
) -> Result<(f64, Option<usize>)> {
    let game = &result.unfolding.posg;
    let baseline = match policy {
        "optimal" => {
            let r = solve_robust(game, set, &BnbOptions::default())?;
            return Ok((r.value, Some(r.nodes_explored)));
        }
        "always_engage" => Baseline::AlwaysEngage,
        "always_block" => Baseline::AlwaysBlock,
        other => return Err(Error::Domain(format!("unknown policy {other}"))),
    };
    let labels = inst.labels.as_deref().expect("baselines only run with labels");
    let delta = baseline_strategy(game, &unfolded_labels(labels, &result.unfolding), baseline)?;
    Ok((worst_case_value(game, &delta, set)?.0, None))
}

fn checks(spec: &ExperimentSpec, rows: &[ExperimentRow]) -> Vec<CheckResult> {
    let tol = spec.tol;
    let key = |r: &ExperimentRow| (r.layers, r.k, r.seed);
    let mut ordering = Vec::new();
    let mut monotone = Vec::new();
    let mut failed = Vec::new();
    for r in rows.iter().filter(|r| r.status != "ok") {
        failed.push(format!(
            "layers {:?} k {} n {} seed {} {}: {}",
            r.layers, r.k, r.n, r.seed, r.policy, r.status
        ));
    }
    for opt in rows.iter().filter(|r| r.policy == "optimal") {
        let Some(v) = opt.worst_case_value else { continue };
        for base in rows
            .iter()
            .filter(|b| b.policy != "optimal" && key(b) == key(opt) && b.n == opt.n)
        {
            if let Some(b) = base.worst_case_value {
                if v > b + tol * (1.0 + b.abs()) {
                    ordering.push(format!(
                        "layers {:?} k {} n {} seed {}: optimal {v} above {} {b}",
                        opt.layers, opt.k, opt.n, opt.seed, base.policy
                    ));
                }
            }
        }
        if let Some(prev) = rows
            .iter()
            .filter(|p| p.policy == "optimal" && key(p) == key(opt) && p.n < opt.n)
            .filter_map(|p| p.worst_case_value.map(|w| (p.n, w)))
            .max_by_key(|&(n, _)| n)
        {
            if v < prev.1 - tol * (1.0 + prev.1.abs()) {
                monotone.push(format!(
                    "layers {:?} k {} seed {}: n {} gives {v} below n {} value {}",
                    opt.layers, opt.k, opt.seed, opt.n, prev.0, prev.1
                ));
            }
        }
    }
    [
        ("optimal_not_above_baselines", ordering),
        ("optimal_nondecreasing_in_n", monotone),
        ("all_rows_ok", failed),
    ]
    .into_iter()
    .map(|(name, violations)| CheckResult {
        name: name.into(),
        passed: violations.is_empty(),
        violations,
    })
    .collect()
}

/// Runs every cell of `spec` and checks the orderings on the results.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.check()?;
    let insts = instances(spec)?;
    let cells: Vec<(usize, usize, u64)> = (0..insts.len())
        .flat_map(|i| {
            spec.memory
                .iter()
                .flat_map(move |&k| spec.seeds.iter().map(move |&s| (i, k, s)))
        })
        .collect();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(i, k, s)| run_cell(spec, &insts[i], k, s))
        .collect();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        timings.extend(o.timings);
    }
    let checks = checks(spec, &rows);
    Ok(ExperimentReport { rows, timings, checks })
}

fn write_csv<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for item in items {
        w.serialize(item).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs the sweep and writes rows, checks, timings and provenance to `out`.
pub fn cmd_experiment(spec: &ExperimentSpec, format: OutputFormat, out: &Path) -> Result<ExperimentReport> {
    let report = run_experiment(spec)?;
    ensure_dir(out)?;
    match format {
        OutputFormat::Csv => write_csv(&report.rows, &out.join("rows.csv"))?,
        OutputFormat::Json => write_json(&report.rows, &out.join("rows.json"))?,
    }
    write_json(&report.checks, &out.join("checks.json"))?;
    write_csv(&report.timings, &out.join(super::TIMINGS_FILE))?;
    write_provenance(out, "experiment", spec.seeds.clone(), serde_json::to_value(spec)?)?;
    Ok(report)
}
