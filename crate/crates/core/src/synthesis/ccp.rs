//! Penalty sequential linearization of the certifying program.
//!
//! Each iteration linearizes the bilinear products `P(p) · c` around the
//! current point, solves the resulting LP inside a trust region with
//! penalized slacks on the Bellman rows, projects the parameters back onto
//! the probability simplex and recomputes the exact cost vector. A step is
//! kept only if it does not lower the (threshold-capped) value.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use super::nlp::{AffineExpr, NlpForm, NlpProblem};
use super::SynthesisConfig;
use crate::error::{Error, Result};
use crate::pmdp::Instantiation;

/// Weight on the L1 step length, keeps the LP from wandering along flat
/// directions.
const STEP_WEIGHT: f64 = 1e-6;
const ACCEPT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CcpOutcome {
    pub instantiation: Instantiation,
    /// Exact cost vector at the returned parameters.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Penalty weight used by each LP.
    pub penalty_history: Vec<f64>,
    /// Largest Bellman slack of each LP solution.
    pub slack_history: Vec<f64>,
    pub converged: bool,
}

impl CcpOutcome {
    pub fn value(&self, nlp: &NlpProblem) -> f64 {
        self.values[nlp.initial]
    }
}

/// Clamps action weights at zero and renormalizes each observation.
pub fn project(nlp: &NlpProblem, p: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    for group in &nlp.weight_groups {
        let w: Vec<f64> = group.iter().map(|e| e.eval(p).max(0.0)).collect();
        let total: f64 = w.iter().sum();
        for (e, &x) in group.iter().zip(&w) {
            if let Some(j) = single_parameter(e) {
                out[j] = if total > 0.0 {
                    x / total
                } else {
                    1.0 / group.len() as f64
                };
            }
        }
    }
    out
}

fn single_parameter(e: &AffineExpr) -> Option<usize> {
    match e.coeffs.as_slice() {
        [(j, c)] if *c == 1.0 && e.constant == 0.0 => Some(*j),
        _ => None,
    }
}

fn value_bound(nlp: &NlpProblem) -> f64 {
    let cmax = nlp
        .rows
        .iter()
        .map(|r| r.cost.constant.abs() + r.cost.coeffs.iter().map(|(_, c)| c.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let gamma = nlp
        .rows
        .iter()
        .map(|r| r.discount)
        .filter(|&g| g < 1.0)
        .fold(0.0, f64::max);
    4.0 * (cmax + 1.0) / (1.0 - gamma)
}

struct LpStep {
    params: Vec<f64>,
    max_slack: f64,
}

fn linearized_step(
    nlp: &NlpProblem,
    p0: &[f64],
    c0: &[f64],
    radius: f64,
    penalty: f64,
    aim: f64,
    bound: f64,
) -> Result<LpStep> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut is_target = vec![false; nlp.num_states];
    for &t in &nlp.targets {
        is_target[t] = true;
    }
    let c: Vec<Option<Variable>> = (0..nlp.num_states)
        .map(|s| (!is_target[s]).then(|| lp.add_var(if s == nlp.initial { 1.0 } else { 0.0 }, (-bound, bound))))
        .collect();
    let p: Vec<Variable> = p0
        .iter()
        .map(|&x| lp.add_var(0.0, ((x - radius).max(0.0), (x + radius).min(1.0))))
        .collect();
    for (j, &x) in p0.iter().enumerate() {
        let e = lp.add_var(-STEP_WEIGHT, (0.0, f64::INFINITY));
        lp.add_constraint([(p[j], 1.0), (e, -1.0)], ComparisonOp::Le, x);
        lp.add_constraint([(p[j], -1.0), (e, -1.0)], ComparisonOp::Le, -x);
    }
    for w in nlp.normalization_rows() {
        if w.is_constant() {
            continue;
        }
        let terms: Vec<(Variable, f64)> = w.coeffs.iter().map(|&(j, k)| (p[j], -k)).collect();
        lp.add_constraint(terms, ComparisonOp::Le, w.constant);
    }
    if let Some(ci) = c[nlp.initial] {
        lp.add_constraint([(ci, 1.0)], ComparisonOp::Le, aim);
    }

    let mut slacks = Vec::with_capacity(nlp.rows.len());
    for row in &nlp.rows {
        if is_target[row.state] {
            continue;
        }
        // c_s - cost(p) - γ Σ_t [P_t(p0) c_t + (P_t(p) - P_t(p0)) c0_t] - slack <= 0
        let mut c_coef = vec![0.0; nlp.num_states];
        let mut p_coef = vec![0.0; p0.len()];
        c_coef[row.state] += 1.0;
        let mut rhs = row.cost.constant;
        for &(j, k) in &row.cost.coeffs {
            p_coef[j] -= k;
        }
        for (t, e) in &row.successors {
            if is_target[*t] {
                continue;
            }
            c_coef[*t] -= row.discount * e.eval(p0);
            for &(j, k) in &e.coeffs {
                p_coef[j] -= row.discount * k * c0[*t];
                rhs -= row.discount * k * p0[j] * c0[*t];
            }
        }
        let slack = lp.add_var(-penalty, (0.0, f64::INFINITY));
        slacks.push(slack);
        let mut terms: Vec<(Variable, f64)> = vec![(slack, -1.0)];
        terms.extend(
            c_coef
                .iter()
                .enumerate()
                .filter(|&(_, &k)| k != 0.0)
                .map(|(s, &k)| (c[s].expect("non-target"), k)),
        );
        terms.extend(
            p_coef
                .iter()
                .enumerate()
                .filter(|&(_, &k)| k != 0.0)
                .map(|(j, &k)| (p[j], k)),
        );
        lp.add_constraint(terms, ComparisonOp::Le, rhs);
    }

    let solution = lp
        .solve()
        .map_err(|e| Error::Internal(format!("linearized subproblem: {e}")))?
        .into_solution()
        .map_err(|_| Error::Internal("linearized subproblem interrupted".into()))?;
    Ok(LpStep {
        params: p.iter().map(|&v| solution.var_value(v).clamp(0.0, 1.0)).collect(),
        max_slack: slacks.iter().map(|&v| solution.var_value(v)).fold(0.0, f64::max),
    })
}

/// Runs the sequential linearization from `start`.
pub fn ccp_solve(nlp: &NlpProblem, start: &Instantiation, cfg: &SynthesisConfig) -> Result<CcpOutcome> {
    if nlp.form != NlpForm::Certifying {
        return Err(Error::Domain(
            "sequential linearization needs the certifying program".into(),
        ));
    }
    if start.values.len() != nlp.num_params() {
        return Err(Error::Malformed(format!(
            "start has {} values, program has {} parameters",
            start.values.len(),
            nlp.num_params()
        )));
    }
    let bound = value_bound(nlp);
    let aim = if nlp.threshold.is_finite() {
        nlp.threshold + 1e-6 * (1.0 + nlp.threshold.abs())
    } else {
        bound
    };
    let mut p = project(nlp, &start.values);
    let mut c = nlp.tight_values(&p, None)?;
    let mut radius = cfg.trust_radius;
    let mut penalty = cfg.penalty_initial;
    let mut out = CcpOutcome {
        instantiation: Instantiation::new(Vec::new()),
        values: Vec::new(),
        iterations: 0,
        penalty_history: Vec::new(),
        slack_history: Vec::new(),
        converged: nlp.num_params() == 0,
    };
    while !out.converged && out.iterations < cfg.ccp_max_iters {
        out.iterations += 1;
        let step = linearized_step(nlp, &p, &c, radius, penalty, aim, bound)?;
        out.penalty_history.push(penalty);
        out.slack_history.push(step.max_slack);
        if step.max_slack >= cfg.convergence_tol {
            penalty *= cfg.penalty_growth;
        }
        let candidate = project(nlp, &step.params);
        let moved = candidate.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < cfg.convergence_tol {
            out.converged = true;
            break;
        }
        let values = nlp.tight_values(&candidate, Some(&c))?;
        let merit = |v: &[f64]| v[nlp.initial].min(aim);
        if merit(&values) >= merit(&c) - ACCEPT_SLACK {
            p = candidate;
            c = values;
        } else {
            radius *= 0.5;
            if radius < cfg.convergence_tol {
                out.converged = true;
            }
        }
    }
    out.instantiation = Instantiation::new(p);
    out.values = c;
    Ok(out)
}
