//! Synthesis of diverse, sufficiently strong infiltrator strategies.
//!
//! A strategy is *strong* for a threshold `κ` when the deceiver's best
//! response against it still costs at least `κ`. Candidates come from the
//! sequential linearization started at random points of the parameter
//! simplex; every candidate is checked exactly before it is kept.

mod ccp;
mod nlp;

pub use ccp::{ccp_solve, project, CcpOutcome};
pub use nlp::{build_nlp, build_nlp_with_form, AffineExpr, BellmanRow, NlpForm, NlpProblem};

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{best_response_deceiver, validate, InfiltratorStrategy, OneSidedPosg};
use crate::pmdp::{istrat, posg_to_pmdp, unfold_memory, Instantiation, MemoryUnfolding, ParametricMdp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Strength threshold `κ`; `None` uses the value of the uniform strategy.
    pub threshold: Option<f64>,
    /// Number of strategies wanted.
    pub count: usize,
    pub restarts: usize,
    pub ccp_max_iters: usize,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub convergence_tol: f64,
    /// Initial L∞ trust-region radius on the parameters.
    pub trust_radius: f64,
    /// Minimum L∞ distance between kept parameter vectors.
    pub dedup_distance: f64,
    pub seed: u64,
    /// Memory nodes of the infiltrator.
    pub memory: usize,
    /// Pad with the best weak candidates when too few strong ones are found.
    pub allow_weak_fill: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            count: 10,
            restarts: 40,
            ccp_max_iters: 40,
            penalty_initial: 10.0,
            penalty_growth: 2.0,
            convergence_tol: 1e-6,
            trust_radius: 0.25,
            dedup_distance: 0.05,
            seed: 0,
            memory: 1,
            allow_weak_fill: false,
        }
    }
}

impl SynthesisConfig {
    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Domain(m.to_string()));
        if self.count == 0 {
            return fail("strategy count must be at least 1");
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1");
        }
        if self.memory == 0 {
            return fail("memory size must be at least 1");
        }
        if self.penalty_growth.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return fail("penalty growth must exceed 1");
        }
        if self.dedup_distance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return fail("dedup distance must be positive");
        }
        if !(self.trust_radius > 0.0 && self.convergence_tol > 0.0 && self.penalty_initial > 0.0) {
            return fail("trust radius, tolerance and initial penalty must be positive");
        }
        if self.threshold.is_some_and(f64::is_nan) {
            return fail("threshold is NaN");
        }
        Ok(())
    }
}

/// The deceiver's best-response value against `u` at the initial state, and
/// whether it reaches `κ`.
pub fn verify_strong(posg: &OneSidedPosg, u: &Instantiation, kappa: f64) -> Result<(bool, f64)> {
    verify_strong_with(posg, &posg_to_pmdp(posg)?, u, kappa)
}

/// [`verify_strong`] with the reduction of `posg` already at hand.
pub fn verify_strong_with(
    posg: &OneSidedPosg,
    pmdp: &ParametricMdp,
    u: &Instantiation,
    kappa: f64,
) -> Result<(bool, f64)> {
    let sigma = istrat(pmdp, u)?;
    let (_, values) = best_response_deceiver(posg, &sigma)?;
    let v = values[posg.game().initial()];
    Ok((v >= kappa, v))
}

/// Best-response value against the uniform infiltrator strategy; the default
/// strength threshold.
pub fn uniform_threshold(posg: &OneSidedPosg) -> Result<f64> {
    let (_, values) = best_response_deceiver(posg, &InfiltratorStrategy::uniform(posg))?;
    Ok(values[posg.game().initial()])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizedStrategy {
    pub instantiation: Instantiation,
    /// Memoryless strategy on the unfolded game.
    pub strategy: InfiltratorStrategy,
    pub value: f64,
    pub strong: bool,
    /// Restart that produced it.
    pub restart: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthesisStats {
    pub restarts: usize,
    pub failed_restarts: usize,
    pub strong_candidates: usize,
    pub ccp_iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub threshold: f64,
    pub unfolding: MemoryUnfolding,
    pub pmdp: ParametricMdp,
    /// Sorted by value, strong strategies first.
    pub strategies: Vec<SynthesizedStrategy>,
    pub stats: SynthesisStats,
}

impl SynthesisResult {
    pub fn entries(&self) -> Vec<StrategyEntry> {
        self.strategies
            .iter()
            .map(|s| StrategyEntry {
                parameters: s.instantiation.to_named(&self.pmdp),
                value: s.value,
                strong: s.strong,
                k: self.unfolding.k,
            })
            .collect()
    }

    pub fn infiltrator_strategies(&self) -> Vec<InfiltratorStrategy> {
        self.strategies.iter().map(|s| s.strategy.clone()).collect()
    }
}

/// Dirichlet(1, …, 1) draw for every observation with a choice.
fn random_start<R: Rng + ?Sized>(nlp: &NlpProblem, rng: &mut R) -> Instantiation {
    let mut values = vec![0.0; nlp.num_params()];
    for group in &nlp.weight_groups {
        let draws: Vec<f64> = group.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        for (e, x) in group.iter().zip(draws) {
            if let [(j, k)] = e.coeffs.as_slice() {
                if *k == 1.0 && e.constant == 0.0 {
                    values[*j] = x / total;
                }
            }
        }
    }
    Instantiation::new(project(nlp, &values))
}

struct Candidate {
    restart: usize,
    instantiation: Instantiation,
    value: f64,
    strong: bool,
    iterations: usize,
}

fn select(candidates: &[&Candidate], count: usize, eps: f64, kept: &mut Vec<usize>, all: &[Candidate]) {
    for c in candidates {
        if kept.len() >= count {
            return;
        }
        if kept
            .iter()
            .all(|&i| all[i].instantiation.distance(&c.instantiation) >= eps)
        {
            kept.push(c.restart);
        }
    }
}

/// Runs the full pipeline: unfold memory, reduce, optimize from random
/// starts, verify, deduplicate and rank.
pub fn generate_strategy_set(posg: &OneSidedPosg, cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    cfg.check()?;
    let report = validate(posg);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let started = Instant::now();
    let unfolding = unfold_memory(posg, cfg.memory)?;
    let game = &unfolding.posg;
    let pmdp = posg_to_pmdp(game)?;
    let threshold = match cfg.threshold {
        Some(k) => k,
        None => uniform_threshold(game)?,
    };
    let nlp = build_nlp(&pmdp, threshold)?;

    let runs: Vec<Result<Candidate>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            let start = random_start(&nlp, &mut rng);
            let out = ccp_solve(&nlp, &start, cfg)?;
            let (strong, value) = verify_strong_with(game, &pmdp, &out.instantiation, threshold)?;
            Ok(Candidate {
                restart,
                instantiation: out.instantiation,
                value,
                strong,
                iterations: out.iterations,
            })
        })
        .collect();

    let mut failed = 0;
    let mut slots: Vec<Option<Candidate>> = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(c) => slots.push(Some(c)),
            Err(_) => {
                failed += 1;
                slots.push(None);
            }
        }
    }
    // Index by restart so `kept` can refer to candidates directly.
    let all: Vec<Candidate> = slots
        .into_iter()
        .enumerate()
        .map(|(restart, c)| {
            c.unwrap_or(Candidate {
                restart,
                instantiation: Instantiation::new(Vec::new()),
                value: f64::NEG_INFINITY,
                strong: false,
                iterations: 0,
            })
        })
        .collect();
    let ok = |c: &&Candidate| !c.instantiation.values.is_empty() || nlp.num_params() == 0 && c.value.is_finite();
    let by_value = |a: &&Candidate, b: &&Candidate| b.value.total_cmp(&a.value).then(a.restart.cmp(&b.restart));

    let mut strong: Vec<&Candidate> = all.iter().filter(ok).filter(|c| c.strong).collect();
    strong.sort_by(by_value);
    let mut kept = Vec::new();
    select(&strong, cfg.count, cfg.dedup_distance, &mut kept, &all);
    if kept.is_empty() && !cfg.allow_weak_fill {
        let best_value = all.iter().filter(ok).map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoStrongStrategy { best_value });
    }
    if kept.len() < cfg.count && cfg.allow_weak_fill {
        let mut weak: Vec<&Candidate> = all.iter().filter(ok).filter(|c| !c.strong).collect();
        weak.sort_by(by_value);
        select(&weak, cfg.count, cfg.dedup_distance, &mut kept, &all);
    }

    let strategies = kept
        .iter()
        .map(|&i| {
            let c = &all[i];
            Ok(SynthesizedStrategy {
                strategy: istrat(&pmdp, &c.instantiation)?.with_memory_nodes(cfg.memory),
                instantiation: c.instantiation.clone(),
                value: c.value,
                strong: c.strong,
                restart: c.restart,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = SynthesisStats {
        restarts: cfg.restarts,
        failed_restarts: failed,
        strong_candidates: strong.len(),
        ccp_iterations: all.iter().map(|c| c.iterations).sum(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(SynthesisResult {
        threshold,
        unfolding,
        pmdp,
        strategies,
        stats,
    })
}

/// One line of a strategy-set file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub parameters: BTreeMap<String, f64>,
    pub value: f64,
    pub strong: bool,
    pub k: usize,
}

pub fn write_strategy_set(entries: &[StrategyEntry], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_strategy_set(path: &Path) -> Result<Vec<StrategyEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Strategies of one memory size, as memoryless strategies on the matching
/// unfolding.
#[derive(Clone, Debug)]
pub struct StrategyFamily {
    pub unfolding: MemoryUnfolding,
    pub strategies: Vec<InfiltratorStrategy>,
}

/// Rebuilds strategy-set entries against `posg`, grouped by memory size in
/// ascending order. File order is preserved within a group.
pub fn realize_strategy_set(posg: &OneSidedPosg, entries: &[StrategyEntry]) -> Result<Vec<StrategyFamily>> {
    if entries.is_empty() {
        return Err(Error::NoStrategies);
    }
    let mut by_k: BTreeMap<usize, Vec<&StrategyEntry>> = BTreeMap::new();
    for e in entries {
        by_k.entry(e.k).or_default().push(e);
    }
    by_k.into_iter()
        .map(|(k, group)| {
            let unfolding = unfold_memory(posg, k)?;
            let pmdp = posg_to_pmdp(&unfolding.posg)?;
            let strategies = group
                .into_iter()
                .map(|e| {
                    let u = Instantiation::from_named(&pmdp, &e.parameters)
                        .map_err(|err| Error::StrategyMismatch(format!("memory {k}: {err}")))?;
                    Ok(istrat(&pmdp, &u)?.with_memory_nodes(k))
                })
                .collect::<Result<_>>()?;
            Ok(StrategyFamily { unfolding, strategies })
        })
        .collect()
}
