//! The nonlinear program over cost variables and parameters whose feasible
//! points certify the strength of a parametric infiltrator strategy.

use crate::error::{Error, Result};
use crate::game::{ActionId, Player, StateId};
use crate::pmdp::{to_f64, ParamId, ParametricMdp, PolynomialExpr};

const MAX_SWEEPS: usize = 1_000_000;

/// `constant + Σ coeff · p`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub coeffs: Vec<(ParamId, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            coeffs: Vec::new(),
        }
    }

    fn from_poly(e: &PolynomialExpr) -> Result<Self> {
        if e.degree() > 1 {
            return Err(Error::UnsupportedDegree(e.degree()));
        }
        Ok(Self {
            constant: to_f64(&e.constant_term()),
            coeffs: e.params().map(|p| (p, to_f64(&e.linear_coeff(p)))).collect(),
        })
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, c)| c * p[j]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// How the Bellman rows are oriented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlpForm {
    /// `c_s >= C + γ Σ P c` on every row. Feasible points bound the
    /// cost from above, which says nothing about the deceiver's minimum.
    AsPrinted,
    /// `c_s <= C + γ_s Σ P c` with the discount only on deceiver rows. Every
    /// feasible `c` is a lower bound on the deceiver's optimal cost, so
    /// `c_init >= κ` certifies the strategy.
    Certifying,
}

/// One Bellman row: `c_state` against `cost + discount · Σ P(t) · c_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanRow {
    pub state: StateId,
    pub action: ActionId,
    pub cost: AffineExpr,
    pub discount: f64,
    pub successors: Vec<(StateId, AffineExpr)>,
}

impl BellmanRow {
    pub fn rhs(&self, c: &[f64], p: &[f64]) -> f64 {
        self.cost.eval(p) + self.discount * self.successors.iter().map(|(t, e)| e.eval(p) * c[*t]).sum::<f64>()
    }
}

/// Maximize `c_init` subject to `c_init <= threshold`, `c = 0` on targets,
/// every action weight `>= 0`, and the Bellman rows.
#[derive(Clone, Debug, PartialEq)]
pub struct NlpProblem {
    pub form: NlpForm,
    pub num_states: usize,
    pub initial: StateId,
    pub threshold: f64,
    pub targets: Vec<StateId>,
    pub parameter_names: Vec<String>,
    /// Action weights of each observation with a choice; all must be `>= 0`.
    /// Their sum is one by construction.
    pub weight_groups: Vec<Vec<AffineExpr>>,
    pub rows: Vec<BellmanRow>,
}

impl NlpProblem {
    pub fn num_params(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn normalization_rows(&self) -> impl Iterator<Item = &AffineExpr> {
        self.weight_groups.iter().flatten()
    }

    /// Threshold, boundary, normalization and Bellman rows.
    pub fn constraint_count(&self) -> usize {
        1 + self.targets.len() + self.normalization_rows().count() + self.rows.len()
    }

    /// Largest violation of any constraint at `(c, p)`.
    pub fn max_violation(&self, c: &[f64], p: &[f64]) -> f64 {
        let mut worst = (c[self.initial] - self.threshold).max(0.0);
        for &t in &self.targets {
            worst = worst.max(c[t].abs());
        }
        for w in self.normalization_rows() {
            worst = worst.max(-w.eval(p));
        }
        for r in &self.rows {
            let gap = c[r.state] - r.rhs(c, p);
            worst = worst.max(match self.form {
                NlpForm::AsPrinted => -gap,
                NlpForm::Certifying => gap,
            });
        }
        worst
    }

    /// The extreme fixed point of the Bellman rows at parameters `p`: the
    /// largest feasible `c` for the certifying form (the deceiver's optimal
    /// cost) and the smallest for the printed form.
    pub fn tight_values(&self, p: &[f64], warm: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut by_state: Vec<Vec<&BellmanRow>> = vec![Vec::new(); self.num_states];
        for r in &self.rows {
            by_state[r.state].push(r);
        }
        let mut c = warm.map_or_else(|| vec![0.0; self.num_states], <[f64]>::to_vec);
        let pick = |a: f64, b: f64| match self.form {
            NlpForm::Certifying => a.min(b),
            NlpForm::AsPrinted => a.max(b),
        };
        let init = match self.form {
            NlpForm::Certifying => f64::INFINITY,
            NlpForm::AsPrinted => f64::NEG_INFINITY,
        };
        let gamma = self.rows.iter().map(|r| r.discount).fold(0.0, f64::max);
        let tol = crate::game::RESIDUAL_TOL * (1.0 - gamma).max(f64::EPSILON) / 2.0;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for s in 0..self.num_states {
                let v = if by_state[s].is_empty() {
                    0.0
                } else {
                    by_state[s].iter().map(|r| r.rhs(&c, p)).fold(init, pick)
                };
                delta = delta.max((v - c[s]).abs());
                scale = scale.max(v.abs());
                c[s] = v;
            }
            residual = delta;
            if delta <= tol * scale {
                return Ok(c);
            }
            if !delta.is_finite() {
                break;
            }
        }
        Err(Error::FixedPointNotReached {
            sweeps: MAX_SWEEPS,
            residual,
        })
    }
}

/// Builds the certifying program used by the synthesis.
pub fn build_nlp(pmdp: &ParametricMdp, threshold: f64) -> Result<NlpProblem> {
    build_nlp_with_form(pmdp, threshold, NlpForm::Certifying)
}

pub fn build_nlp_with_form(pmdp: &ParametricMdp, threshold: f64, form: NlpForm) -> Result<NlpProblem> {
    let degree = pmdp.degree();
    if degree > 1 {
        return Err(Error::UnsupportedDegree(degree));
    }
    let mut weight_groups = Vec::new();
    for z in 0..pmdp.observations().len() {
        if pmdp.observation_actions(z).len() >= 2 {
            weight_groups.push(
                pmdp.action_weights(z)
                    .iter()
                    .map(|(_, f)| AffineExpr::from_poly(f))
                    .collect::<Result<_>>()?,
            );
        }
    }
    let mut rows = Vec::new();
    for s in 0..pmdp.num_states() {
        if pmdp.is_target(s) {
            continue;
        }
        let discount = match (form, pmdp.player(s)) {
            (NlpForm::AsPrinted, _) | (NlpForm::Certifying, Player::Deceiver) => pmdp.discount(),
            (NlpForm::Certifying, Player::Infiltrator) => 1.0,
        };
        for c in pmdp.choices(s) {
            rows.push(BellmanRow {
                state: s,
                action: c.action,
                cost: AffineExpr::from_poly(&c.cost)?,
                discount,
                successors: c
                    .successors
                    .iter()
                    .map(|(t, e)| Ok((*t, AffineExpr::from_poly(e)?)))
                    .collect::<Result<_>>()?,
            });
        }
    }
    Ok(NlpProblem {
        form,
        num_states: pmdp.num_states(),
        initial: pmdp.initial(),
        threshold,
        targets: (0..pmdp.num_states()).filter(|&s| pmdp.is_target(s)).collect(),
        parameter_names: pmdp.parameter_names(),
        weight_groups,
        rows,
    })
}
