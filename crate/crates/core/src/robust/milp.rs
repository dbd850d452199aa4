//! The mixed-integer program for a deceiver strategy that minimizes the
//! worst case over a fixed set of infiltrator strategies.

use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{evaluate_cost, ActionId, DeceiverStrategy, InfiltratorStrategy, OneSidedPosg, Player, StateId};

use super::lp::{write_lp, LinearProgram, Sense, VarKind};

/// `2·Cmax·(1+γ)/(1−γ) + 1`, with `Cmax` the largest absolute state-action cost.
///
/// Every cost vector of the game is bounded by `2·Cmax/(1−γ)` in absolute
/// value (on deceiver states by `Cmax·(1+γ)/(1−γ)`), so the left-hand side of
/// a big-M row never exceeds `2·Cmax·(1+γ)/(1−γ)`. With this `M` every
/// deactivated row stays slack by at least one.
pub fn compute_big_m(posg: &OneSidedPosg) -> f64 {
    let g = posg.game();
    let gamma = g.discount();
    2.0 * g.max_abs_cost() * (1.0 + gamma) / (1.0 - gamma) + 1.0
}

/// The pair of rows that bind `c^i_s` to action `a` when `δ^s_a = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BigMPair {
    pub strategy: usize,
    pub state: StateId,
    pub action: ActionId,
    /// Row `c ≥ C + γ Σ P c − M (1 − δ)`.
    pub lower_row: usize,
    /// Row `c ≤ C + γ Σ P c + M (1 − δ)`.
    pub upper_row: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    pub big_m: f64,
    pub num_strategies: usize,
    /// Per deceiver state: its action binaries.
    pub delta: Vec<Vec<(ActionId, usize)>>,
    /// `cost[i][s]` is the variable `c^i_s`.
    pub cost: Vec<Vec<usize>>,
    /// Epigraph variable of the worst case.
    pub t: usize,
    pub big_m_pairs: Vec<BigMPair>,
    pub initial: StateId,
}

impl MilpProblem {
    /// The program's variable vector for a deceiver strategy and the exact
    /// cost vectors it induces against each strategy.
    pub fn assignment(&self, delta: &DeceiverStrategy, costs: &[Vec<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.lp.vars.len()];
        for (s, vars) in self.delta.iter().enumerate() {
            for &(a, j) in vars {
                x[j] = f64::from(u8::from(delta.action(s) == Some(a)));
            }
        }
        for (i, row) in self.cost.iter().enumerate() {
            for (s, &j) in row.iter().enumerate() {
                x[j] = costs[i][s];
            }
        }
        x[self.t] = costs
            .iter()
            .zip(&self.cost)
            .map(|(c, _)| c[self.initial])
            .fold(f64::NEG_INFINITY, f64::max);
        x
    }

    /// Reads the deceiver strategy off a (rounded) program solution.
    pub fn decode(&self, posg: &OneSidedPosg, x: &[f64]) -> DeceiverStrategy {
        let choice = (0..posg.num_states())
            .map(|s| {
                let vars = self.delta.get(s)?;
                vars.iter()
                    .max_by(|a, b| x[a.1].total_cmp(&x[b.1]).then(b.0.cmp(&a.0)))
                    .map(|&(a, _)| a)
            })
            .collect();
        DeceiverStrategy::from_raw(choice)
    }
}

/// Checks that every strategy is complete where the game needs it and that
/// they all share one memory size.
pub(crate) fn check_strategies(posg: &OneSidedPosg, strategies: &[InfiltratorStrategy]) -> Result<()> {
    let Some(first) = strategies.first() else {
        return Err(Error::NoStrategies);
    };
    for (i, sigma) in strategies.iter().enumerate() {
        sigma
            .check(posg)
            .map_err(|e| Error::StrategyMismatch(format!("strategy {i}: {e}")))?;
        if sigma.memory_nodes() != first.memory_nodes() {
            return Err(Error::StrategyMismatch(format!(
                "strategy {i} has {} memory nodes, strategy 0 has {}",
                sigma.memory_nodes(),
                first.memory_nodes()
            )));
        }
        for s in posg.infiltrator_states() {
            if posg.is_target(s) || posg.game().choices(s).is_empty() {
                continue;
            }
            let z = posg.observation(s).expect("infiltrator states observe");
            if sigma.row(z).is_none() {
                return Err(Error::StrategyMismatch(format!(
                    "strategy {i} has no distribution for observation `{}`",
                    posg.observations()[z]
                )));
            }
        }
    }
    Ok(())
}

/// Builds the program: one-hot deceiver binaries shared by `N` cost blocks,
/// exact expectation rows on infiltrator states, big-M rows on deceiver
/// states, and `t ≥ c^i_init`.
pub fn build_milp(posg: &OneSidedPosg, strategies: &[InfiltratorStrategy], big_m: f64) -> Result<MilpProblem> {
    check_strategies(posg, strategies)?;
    let game = posg.game();
    let n = game.num_states();
    let gamma = game.discount();
    let init = game.initial();

    let mut lp = LinearProgram::new(true);
    lp.comments.push(format!(
        "worst case over {} infiltrator strategies; big-M {}",
        strategies.len(),
        big_m
    ));
    for s in 0..n {
        lp.comments.push(format!("state {s} = {}", game.state(s).name));
    }
    for (a, name) in game.actions().iter().enumerate() {
        lp.comments.push(format!("action {a} = {name}"));
    }

    let delta: Vec<Vec<(ActionId, usize)>> = (0..n)
        .map(|s| match game.player(s) {
            Player::Deceiver => game
                .enabled(s)
                .map(|a| (a, lp.add_var(format!("d_{s}_{a}"), 0.0, 1.0, VarKind::Binary)))
                .collect(),
            Player::Infiltrator => Vec::new(),
        })
        .collect();
    let cost: Vec<Vec<usize>> = (0..strategies.len())
        .map(|i| {
            (0..n)
                .map(|s| {
                    lp.add_var(
                        format!("c_{i}_{s}"),
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        VarKind::Continuous,
                    )
                })
                .collect()
        })
        .collect();
    let t = lp.add_var("t", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
    lp.objective = vec![(t, 1.0)];

    for (s, vars) in delta.iter().enumerate() {
        if !vars.is_empty() {
            lp.add_row(
                format!("onehot_{s}"),
                vars.iter().map(|&(_, j)| (j, 1.0)).collect(),
                Sense::Eq,
                1.0,
            );
        }
    }

    let mut pairs = Vec::new();
    for (i, sigma) in strategies.iter().enumerate() {
        let c = &cost[i];
        for s in posg.targets() {
            lp.add_row(format!("target_{i}_{s}"), vec![(c[s], 1.0)], Sense::Eq, 0.0);
        }
        for s in 0..n {
            if posg.is_target(s) || game.choices(s).is_empty() {
                continue;
            }
            match game.player(s) {
                Player::Infiltrator => {
                    // c_s - Σ_a σ(a) Σ_t P c_t = Σ_a σ(a) C(s,a)
                    let z = posg.observation(s).expect("infiltrator states observe");
                    let mut terms = vec![(c[s], 1.0)];
                    let mut rhs = 0.0;
                    for &(a, w) in sigma.row(z).expect("checked") {
                        let Some(ch) = game.choice(s, a).filter(|_| w > 0.0) else {
                            continue;
                        };
                        rhs += w * ch.cost;
                        for &(u, p) in &ch.successors {
                            terms.push((c[u], -w * p));
                        }
                    }
                    lp.add_row(format!("mix_{i}_{s}"), merge(terms), Sense::Eq, rhs);
                }
                Player::Deceiver => {
                    for ch in game.choices(s) {
                        let a = ch.action;
                        let d = delta[s].iter().find(|&&(b, _)| b == a).expect("binary per action").1;
                        // c_s - γ Σ P c - M δ  ≥  C - M
                        let mut terms = vec![(c[s], 1.0)];
                        terms.extend(ch.successors.iter().map(|&(u, p)| (c[u], -gamma * p)));
                        let terms = merge(terms);
                        let mut lower = terms.clone();
                        lower.push((d, -big_m));
                        let mut upper = terms;
                        upper.push((d, big_m));
                        let lower_row = lp.add_row(format!("lo_{i}_{s}_{a}"), lower, Sense::Ge, ch.cost - big_m);
                        let upper_row = lp.add_row(format!("hi_{i}_{s}_{a}"), upper, Sense::Le, ch.cost + big_m);
                        pairs.push(BigMPair {
                            strategy: i,
                            state: s,
                            action: a,
                            lower_row,
                            upper_row,
                        });
                    }
                }
            }
        }
        lp.add_row(format!("tmax_{i}"), vec![(t, 1.0), (c[init], -1.0)], Sense::Ge, 0.0);
    }

    Ok(MilpProblem {
        lp,
        big_m,
        num_strategies: strategies.len(),
        delta,
        cost,
        t,
        big_m_pairs: pairs,
        initial: init,
    })
}

/// Sums coefficients of repeated variables, keeping first-appearance order.
fn merge(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, k) in terms {
        match out.iter_mut().find(|(v, _)| *v == j) {
            Some(e) => e.1 += k,
            None => out.push((j, k)),
        }
    }
    out.retain(|&(_, k)| k != 0.0);
    out
}

/// LP-format text of the program.
pub fn milp_to_lp(problem: &MilpProblem) -> Result<String> {
    if problem.num_strategies == 0 {
        return Err(Error::NoStrategies);
    }
    Ok(write_lp(&problem.lp))
}

pub fn export_milp(problem: &MilpProblem, path: &Path) -> Result<()> {
    let text = milp_to_lp(problem)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Slack of the deactivated big-M rows at the exact solution of `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct BigMCheck {
    /// Smallest slack over all deactivated rows; infinite if there are none.
    pub min_slack: f64,
    pub big_m: f64,
    /// Largest violation of any row at the exact solution.
    pub max_violation: f64,
}

impl BigMCheck {
    pub fn holds(&self) -> bool {
        self.min_slack >= 1e-6 * self.big_m
    }
}

/// Plugs the exact cost vectors of `delta` into the program and measures the
/// deactivated big-M rows.
pub fn check_big_m(
    problem: &MilpProblem,
    posg: &OneSidedPosg,
    strategies: &[InfiltratorStrategy],
    delta: &DeceiverStrategy,
) -> Result<BigMCheck> {
    let costs = strategies
        .iter()
        .map(|sigma| Ok(evaluate_cost(posg, delta, sigma)?.values))
        .collect::<Result<Vec<_>>>()?;
    let x = problem.assignment(delta, &costs);
    let min_slack = problem
        .big_m_pairs
        .iter()
        .filter(|p| delta.action(p.state) != Some(p.action))
        .flat_map(|p| [p.lower_row, p.upper_row])
        .map(|r| problem.lp.rows[r].slack(&x))
        .fold(f64::INFINITY, f64::min);
    Ok(BigMCheck {
        min_slack,
        big_m: problem.big_m,
        max_violation: problem.lp.max_violation(&x),
    })
}
