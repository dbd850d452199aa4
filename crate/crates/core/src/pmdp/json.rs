//! JSON form of a parametric MDP: the POSG document plus a parameter list,
//! with probabilities and costs that may be polynomial expressions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::poly::{parse_rational, to_f64, PolynomialExpr};
use super::reduction::{Parameter, ParametricChoice, ParametricMdp};
use crate::error::{Error, Result};
use crate::game::{Player, StateId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    /// Exact rational, e.g. `"1/2"`.
    pub coef: String,
    pub params: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprEntry {
    pub terms: Vec<TermEntry>,
}

/// A number, a decimal string, or an expression object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Text(String),
    Number(f64),
    Expr(ExprEntry),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub observation: String,
    pub action_index: usize,
    pub action: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub id: String,
    pub player: Player,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub state: String,
    pub action: String,
    pub cost: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmdpDocument {
    pub states: Vec<StateEntry>,
    pub actions: Vec<String>,
    pub parameters: Vec<ParameterEntry>,
    /// Enabled source actions per observation, needed to rebuild the
    /// dependent weight `1 - Σ p`.
    pub observation_actions: BTreeMap<String, Vec<String>>,
    pub transitions: Vec<TransitionEntry>,
    pub costs: Vec<CostEntry>,
    pub initial: String,
    pub targets: Vec<String>,
    pub discount: f64,
}

fn encode(e: &PolynomialExpr, names: &[String], as_text: bool) -> Value {
    if e.is_constant() {
        let c = to_f64(&e.constant_term());
        return if as_text {
            Value::Text(format!("{c}"))
        } else {
            Value::Number(c)
        };
    }
    Value::Expr(ExprEntry {
        terms: e
            .terms()
            .map(|(mono, coef)| TermEntry {
                coef: coef.to_string(),
                params: mono.iter().map(|&p| names[p].clone()).collect(),
            })
            .collect(),
    })
}

fn decode(v: &Value, params: &BTreeMap<&str, usize>) -> Result<PolynomialExpr> {
    match v {
        Value::Number(x) => Ok(PolynomialExpr::from_f64(*x)),
        Value::Text(t) => parse_rational(t)
            .map(PolynomialExpr::constant)
            .ok_or_else(|| Error::Malformed(format!("`{t}` is not a number"))),
        Value::Expr(entry) => {
            let mut e = PolynomialExpr::zero();
            for term in &entry.terms {
                let coef = parse_rational(&term.coef)
                    .ok_or_else(|| Error::Malformed(format!("`{}` is not a rational", term.coef)))?;
                let mono = term
                    .params
                    .iter()
                    .map(|p| {
                        params
                            .get(p.as_str())
                            .copied()
                            .ok_or_else(|| Error::Malformed(format!("unknown parameter `{p}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                e.add_term(mono, coef);
            }
            Ok(e)
        }
    }
}

impl PmdpDocument {
    pub fn from_pmdp(m: &ParametricMdp) -> Self {
        let names = m.parameter_names();
        let mut transitions = Vec::new();
        let mut costs = Vec::new();
        for s in 0..m.num_states() {
            for c in m.choices(s) {
                let action = m.actions[c.action].clone();
                for (t, e) in &c.successors {
                    transitions.push(TransitionEntry {
                        from: m.names[s].clone(),
                        action: action.clone(),
                        to: m.names[*t].clone(),
                        prob: encode(e, &names, true),
                    });
                }
                if !c.cost.is_zero() {
                    costs.push(CostEntry {
                        state: m.names[s].clone(),
                        action,
                        cost: encode(&c.cost, &names, false),
                    });
                }
            }
        }
        Self {
            states: (0..m.num_states())
                .map(|s| StateEntry {
                    id: m.names[s].clone(),
                    player: m.players[s],
                    observation: m.observation_of[s].map(|z| m.observations[z].clone()),
                })
                .collect(),
            actions: m.actions.clone(),
            parameters: m
                .parameters
                .iter()
                .map(|p| ParameterEntry {
                    name: p.name.clone(),
                    observation: m.observations[p.observation].clone(),
                    action_index: p.index,
                    action: m.actions[p.action].clone(),
                })
                .collect(),
            observation_actions: m
                .observations
                .iter()
                .zip(&m.observation_actions)
                .map(|(z, acts)| (z.clone(), acts.iter().map(|&a| m.actions[a].clone()).collect()))
                .collect(),
            transitions,
            costs,
            initial: m.names[m.initial].clone(),
            targets: (0..m.num_states())
                .filter(|&s| m.targets[s])
                .map(|s| m.names[s].clone())
                .collect(),
            discount: m.discount,
        }
    }

    pub fn to_pmdp(&self) -> Result<ParametricMdp> {
        let malformed = |what: &str, name: &str| Error::Malformed(format!("unknown {what} `{name}`"));
        let state_ids: BTreeMap<&str, StateId> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        if state_ids.len() != self.states.len() {
            return Err(Error::Malformed("duplicate state id".into()));
        }
        let state = |n: &str| state_ids.get(n).copied().ok_or_else(|| malformed("state", n));
        let action = |n: &str| {
            self.actions
                .iter()
                .position(|a| a == n)
                .ok_or_else(|| malformed("action", n))
        };
        if self.actions.is_empty() {
            return Err(Error::Malformed("action list is empty".into()));
        }

        let mut observations: Vec<String> = Vec::new();
        let observation_of: Vec<Option<usize>> = self
            .states
            .iter()
            .map(|s| {
                s.observation
                    .as_ref()
                    .map(|z| match observations.iter().position(|o| o == z) {
                        Some(i) => i,
                        None => {
                            observations.push(z.clone());
                            observations.len() - 1
                        }
                    })
            })
            .collect();
        let observation = |n: &str| {
            observations
                .iter()
                .position(|o| o == n)
                .ok_or_else(|| malformed("observation", n))
        };

        let parameters = self
            .parameters
            .iter()
            .map(|p| {
                Ok(Parameter {
                    name: p.name.clone(),
                    observation: observation(&p.observation)?,
                    index: p.action_index,
                    action: action(&p.action)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let param_ids: BTreeMap<&str, usize> = parameters
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        let mut observation_actions = vec![Vec::new(); observations.len()];
        for (z, acts) in &self.observation_actions {
            let z = observation(z)?;
            let mut ids = acts.iter().map(|a| action(a)).collect::<Result<Vec<_>>>()?;
            ids.sort_unstable();
            observation_actions[z] = ids;
        }

        let mut grouped: BTreeMap<(StateId, usize), ParametricChoice> = BTreeMap::new();
        for t in &self.transitions {
            let (s, a) = (state(&t.from)?, action(&t.action)?);
            let c = grouped.entry((s, a)).or_insert_with(|| ParametricChoice {
                action: a,
                successors: Vec::new(),
                cost: PolynomialExpr::zero(),
            });
            c.successors.push((state(&t.to)?, decode(&t.prob, &param_ids)?));
        }
        for c in &self.costs {
            let key = (state(&c.state)?, action(&c.action)?);
            let choice = grouped.get_mut(&key).ok_or_else(|| {
                Error::Malformed(format!("cost for `{}` at `{}` without transitions", c.action, c.state))
            })?;
            choice.cost = decode(&c.cost, &param_ids)?;
        }
        let mut choices = vec![Vec::new(); self.states.len()];
        for ((s, _), mut c) in grouped {
            c.successors.sort_by_key(|&(t, _)| t);
            choices[s].push(c);
        }
        let mut targets = vec![false; self.states.len()];
        for t in &self.targets {
            targets[state(t)?] = true;
        }
        Ok(ParametricMdp {
            names: self.states.iter().map(|s| s.id.clone()).collect(),
            players: self.states.iter().map(|s| s.player).collect(),
            observation_of,
            observations,
            actions: self.actions.clone(),
            choices,
            parameters,
            observation_actions,
            targets,
            initial: state(&self.initial)?,
            discount: self.discount,
        })
    }
}

pub fn write_pmdp(pmdp: &ParametricMdp, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&PmdpDocument::from_pmdp(pmdp))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_pmdp(path: &Path) -> Result<ParametricMdp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<PmdpDocument>(&text)?.to_pmdp()
}
