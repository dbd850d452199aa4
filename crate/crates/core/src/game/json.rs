//! JSON interchange format for one-sided POSGs.
//!
//! Probabilities are written as decimal strings (shortest round-trip form) so
//! the text does not depend on platform float formatting. Readers accept both
//! strings and plain numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OneSidedPosg, Player, PosgBuilder};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEntry {
    pub id: String,
    pub player: Player,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Text(String),
    Number(f64),
}

impl Decimal {
    pub fn from_f64(x: f64) -> Self {
        Decimal::Text(format!("{x}"))
    }

    pub fn value(&self) -> Result<f64> {
        match self {
            Decimal::Number(x) => Ok(*x),
            Decimal::Text(t) => t
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("`{t}` is not a decimal number"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: Decimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub state: String,
    pub action: String,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosgDocument {
    pub states: Vec<StateEntry>,
    pub actions: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
    pub costs: Vec<CostEntry>,
    pub initial: String,
    pub targets: Vec<String>,
    pub discount: f64,
}

impl PosgDocument {
    pub fn from_posg(posg: &OneSidedPosg) -> Self {
        let game = posg.game();
        let name = |s: usize| game.state(s).name.clone();
        let mut transitions = Vec::new();
        let mut costs = Vec::new();
        for s in 0..game.num_states() {
            for c in game.choices(s) {
                let action = game.action_name(c.action).to_string();
                for &(t, p) in &c.successors {
                    transitions.push(TransitionEntry {
                        from: name(s),
                        action: action.clone(),
                        to: name(t),
                        prob: Decimal::from_f64(p),
                    });
                }
                if c.cost != 0.0 {
                    costs.push(CostEntry {
                        state: name(s),
                        action,
                        cost: c.cost,
                    });
                }
            }
        }
        Self {
            states: (0..game.num_states())
                .map(|s| StateEntry {
                    id: name(s),
                    player: game.player(s),
                    observation: posg.observation(s).map(|z| posg.observations()[z].clone()),
                })
                .collect(),
            actions: game.actions().to_vec(),
            transitions,
            costs,
            initial: name(game.initial()),
            targets: posg.targets().map(name).collect(),
            discount: game.discount(),
        }
    }

    pub fn to_posg(&self) -> Result<OneSidedPosg> {
        let mut b = PosgBuilder::new(self.discount);
        let mut ids = std::collections::HashMap::new();
        for a in &self.actions {
            b.action(a);
        }
        for st in &self.states {
            let s = b.state(st.id.clone(), st.player);
            if ids.insert(st.id.as_str(), s).is_some() {
                return Err(Error::Malformed(format!("duplicate state id `{}`", st.id)));
            }
            if let Some(z) = &st.observation {
                b.observe(s, z);
            }
        }
        let state = |id: &str| {
            ids.get(id)
                .copied()
                .ok_or_else(|| Error::Malformed(format!("unknown state `{id}`")))
        };
        let known_action = |a: &str| {
            if self.actions.iter().any(|x| x == a) {
                Ok(())
            } else {
                Err(Error::Malformed(format!("unknown action `{a}`")))
            }
        };
        for t in &self.transitions {
            known_action(&t.action)?;
            let a = b.action(&t.action);
            b.transition(state(&t.from)?, a, state(&t.to)?, t.prob.value()?);
        }
        for c in &self.costs {
            known_action(&c.action)?;
            let a = b.action(&c.action);
            b.cost(state(&c.state)?, a, c.cost);
        }
        for t in &self.targets {
            b.target(state(t)?);
        }
        b.initial(state(&self.initial)?);
        b.build()
    }
}

pub fn write_posg(posg: &OneSidedPosg, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&PosgDocument::from_posg(posg))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_posg(path: &Path) -> Result<OneSidedPosg> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: PosgDocument = serde_json::from_str(&text)?;
    doc.to_posg()
}
