use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::poly::{rational, to_f64, ParamId, PolynomialExpr};
use crate::error::{Error, OffendingEntry, Result};
use crate::game::{validate, ActionId, InfiltratorStrategy, ObservationId, OneSidedPosg, Player, PosgBuilder, StateId};

pub(crate) const WELL_DEFINED_TOL: f64 = 1e-9;

/// Name of the single action left at each infiltrator state after the reduction.
pub const BOTTOM: &str = "bot";

/// Probability `p^z_i` of the infiltrator playing one particular action when
/// observing `z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub observation: ObservationId,
    /// Position `i >= 1` among the parameters of `observation`.
    pub index: usize,
    /// Action whose probability the parameter is.
    pub action: ActionId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricChoice {
    pub action: ActionId,
    pub successors: Vec<(StateId, PolynomialExpr)>,
    pub cost: PolynomialExpr,
}

/// MDP whose transition probabilities and costs are polynomials over
/// parameters. Produced from a POSG by collapsing each infiltrator state into a
/// single action whose distribution mixes the original actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricMdp {
    pub(crate) names: Vec<String>,
    pub(crate) players: Vec<Player>,
    pub(crate) observation_of: Vec<Option<ObservationId>>,
    pub(crate) observations: Vec<String>,
    /// Source actions followed by [`BOTTOM`].
    pub(crate) actions: Vec<String>,
    pub(crate) choices: Vec<Vec<ParametricChoice>>,
    pub(crate) parameters: Vec<Parameter>,
    /// Enabled source actions per observation, ascending.
    pub(crate) observation_actions: Vec<Vec<ActionId>>,
    pub(crate) targets: Vec<bool>,
    pub(crate) initial: StateId,
    pub(crate) discount: f64,
}

impl ParametricMdp {
    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn player(&self, s: StateId) -> Player {
        self.players[s]
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn bottom(&self) -> ActionId {
        self.actions.len() - 1
    }

    pub fn choices(&self, s: StateId) -> &[ParametricChoice] {
        &self.choices[s]
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    pub fn parameter_id(&self, name: &str) -> Option<ParamId> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn observation_actions(&self, z: ObservationId) -> &[ActionId] {
        &self.observation_actions[z]
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets[s]
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Largest degree of any transition or cost expression.
    pub fn degree(&self) -> usize {
        self.choices
            .iter()
            .flatten()
            .flat_map(|c| c.successors.iter().map(|(_, e)| e).chain([&c.cost]))
            .map(PolynomialExpr::degree)
            .max()
            .unwrap_or(0)
    }

    /// Parameters of observation `z`, in index order.
    pub fn parameters_of(&self, z: ObservationId) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.parameters.len()).filter(move |&p| self.parameters[p].observation == z)
    }

    /// Probability expression of each enabled source action at `z`.
    ///
    /// The lowest-index action carries `1 - Σ p`; parameter `p_i` belongs to
    /// the `i`-th action counted from the highest index down.
    pub fn action_weights(&self, z: ObservationId) -> Vec<(ActionId, PolynomialExpr)> {
        let acts = &self.observation_actions[z];
        if acts.len() <= 1 {
            return acts.iter().map(|&a| (a, PolynomialExpr::one())).collect();
        }
        let mut dependent = PolynomialExpr::one();
        let mut out: Vec<(ActionId, PolynomialExpr)> = Vec::with_capacity(acts.len());
        for p in self.parameters_of(z) {
            let e = PolynomialExpr::param(p);
            dependent = &dependent - &e;
            out.push((self.parameters[p].action, e));
        }
        out.push((acts[0], dependent));
        out.sort_by_key(|&(a, _)| a);
        out
    }
}

/// Parameter values indexed like [`ParametricMdp::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Instantiation {
    pub values: Vec<f64>,
}

impl Instantiation {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Every observation mixes its actions uniformly.
    pub fn uniform(pmdp: &ParametricMdp) -> Self {
        Self {
            values: pmdp
                .parameters
                .iter()
                .map(|p| 1.0 / pmdp.observation_actions[p.observation].len() as f64)
                .collect(),
        }
    }

    pub fn to_named(&self, pmdp: &ParametricMdp) -> BTreeMap<String, f64> {
        pmdp.parameters
            .iter()
            .zip(&self.values)
            .map(|(p, &v)| (p.name.clone(), v))
            .collect()
    }

    pub fn from_named(pmdp: &ParametricMdp, named: &BTreeMap<String, f64>) -> Result<Self> {
        if let Some(extra) = named.keys().find(|n| pmdp.parameter_id(n).is_none()) {
            return Err(Error::Malformed(format!("unknown parameter `{extra}`")));
        }
        let values = pmdp
            .parameters
            .iter()
            .map(|p| {
                named
                    .get(&p.name)
                    .copied()
                    .ok_or_else(|| Error::Malformed(format!("no value for parameter `{}`", p.name)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { values })
    }

    /// L∞ distance between two valuations of the same model.
    pub fn distance(&self, other: &Instantiation) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn parameter_name(observation: &str, index: usize) -> String {
    format!("p_{observation}_{index}")
}

/// Reduces a POSG to a pMDP: deceiver states keep their actions with constant
/// expressions, and each infiltrator state collapses into one action whose
/// successor expression is `Σ_i f_i · P(s, a_i, ·)` with `f` the parametric
/// action distribution of its observation. Costs become `Σ_i f_i · C(s, a_i)`.
pub fn posg_to_pmdp(posg: &OneSidedPosg) -> Result<ParametricMdp> {
    let report = validate(posg);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let game = posg.game();
    let mut actions = game.actions().to_vec();
    let mut bottom = BOTTOM.to_string();
    while actions.contains(&bottom) {
        bottom.push('_');
    }
    actions.push(bottom);
    let bottom_id = actions.len() - 1;

    let observation_actions: Vec<Vec<ActionId>> = (0..posg.num_observations())
        .map(|z| posg.observation_actions(z))
        .collect();
    let mut parameters = Vec::new();
    for (z, acts) in observation_actions.iter().enumerate() {
        let m = acts.len();
        for i in 1..m {
            parameters.push(Parameter {
                name: parameter_name(&posg.observations()[z], i),
                observation: z,
                index: i,
                action: acts[m - i],
            });
        }
    }

    let mut pmdp = ParametricMdp {
        names: game.states().iter().map(|s| s.name.clone()).collect(),
        players: game.states().iter().map(|s| s.player).collect(),
        observation_of: (0..posg.num_states()).map(|s| posg.observation(s)).collect(),
        observations: posg.observations().to_vec(),
        actions,
        choices: Vec::with_capacity(posg.num_states()),
        parameters,
        observation_actions,
        targets: (0..posg.num_states()).map(|s| posg.is_target(s)).collect(),
        initial: game.initial(),
        discount: game.discount(),
    };

    let weights: Vec<Vec<(ActionId, PolynomialExpr)>> =
        (0..posg.num_observations()).map(|z| pmdp.action_weights(z)).collect();
    for s in 0..posg.num_states() {
        let choices = match (game.player(s), posg.observation(s)) {
            (Player::Infiltrator, Some(z)) if !game.choices(s).is_empty() => {
                let mut succ: BTreeMap<StateId, PolynomialExpr> = BTreeMap::new();
                let mut cost = PolynomialExpr::zero();
                for (a, f) in &weights[z] {
                    let c = game.choice(s, *a).expect("observation actions are enabled");
                    cost = &cost + &f.scale(&rational(c.cost));
                    for &(t, p) in &c.successors {
                        let term = f.scale(&rational(p));
                        let e = succ.entry(t).or_default();
                        *e = &*e + &term;
                    }
                }
                vec![ParametricChoice {
                    action: bottom_id,
                    successors: succ.into_iter().collect(),
                    cost,
                }]
            }
            _ => game
                .choices(s)
                .iter()
                .map(|c| ParametricChoice {
                    action: c.action,
                    successors: c
                        .successors
                        .iter()
                        .map(|&(t, p)| (t, PolynomialExpr::from_f64(p)))
                        .collect(),
                    cost: PolynomialExpr::from_f64(c.cost),
                })
                .collect(),
        };
        pmdp.choices.push(choices);
    }
    Ok(pmdp)
}

fn check_length(pmdp: &ParametricMdp, u: &Instantiation) -> Result<()> {
    if u.values.len() != pmdp.parameters.len() {
        return Err(Error::Malformed(format!(
            "instantiation has {} values, model has {} parameters",
            u.values.len(),
            pmdp.parameters.len()
        )));
    }
    Ok(())
}

/// Substitutes `u` into every expression. Infiltrator states keep a single
/// action ([`BOTTOM`]) and their observation, so the result is an MDP for the
/// deceiver.
pub fn instantiate(pmdp: &ParametricMdp, u: &Instantiation) -> Result<OneSidedPosg> {
    check_length(pmdp, u)?;
    let exact: Vec<BigRational> = u.values.iter().map(|&v| rational(v)).collect();
    let mut offending = Vec::new();
    let mut b = PosgBuilder::new(pmdp.discount);
    for a in &pmdp.actions {
        b.action(a);
    }
    for s in 0..pmdp.num_states() {
        b.state(pmdp.names[s].clone(), pmdp.players[s]);
        if let Some(z) = pmdp.observation_of[s] {
            b.observe(s, &pmdp.observations[z]);
        }
        if pmdp.targets[s] {
            b.target(s);
        }
    }
    for s in 0..pmdp.num_states() {
        for c in &pmdp.choices[s] {
            let mut sum = BigRational::zero();
            for (t, e) in &c.successors {
                let v = e.eval_exact(&exact);
                let p = to_f64(&v);
                if !(-WELL_DEFINED_TOL..=1.0 + WELL_DEFINED_TOL).contains(&p) {
                    offending.push(OffendingEntry {
                        state: pmdp.names[s].clone(),
                        successor: Some(pmdp.names[*t].clone()),
                        value: p,
                    });
                }
                sum += v;
                if p != 0.0 {
                    b.transition(s, c.action, *t, p);
                }
            }
            let total = to_f64(&sum);
            if (total - 1.0).abs() > WELL_DEFINED_TOL {
                offending.push(OffendingEntry {
                    state: pmdp.names[s].clone(),
                    successor: None,
                    value: total,
                });
            }
            if c.successors.iter().all(|(_, e)| to_f64(&e.eval_exact(&exact)) == 0.0) {
                continue;
            }
            b.cost(s, c.action, to_f64(&c.cost.eval_exact(&exact)));
        }
    }
    if !offending.is_empty() {
        return Err(Error::IllDefined(offending));
    }
    b.initial(pmdp.initial);
    b.build()
}

/// The memoryless infiltrator strategy encoded by `u`, on the source POSG's
/// observation and action spaces.
pub fn istrat(pmdp: &ParametricMdp, u: &Instantiation) -> Result<InfiltratorStrategy> {
    check_length(pmdp, u)?;
    let exact: Vec<BigRational> = u.values.iter().map(|&v| rational(v)).collect();
    let mut offending = Vec::new();
    let mut rows = Vec::with_capacity(pmdp.observations.len());
    for z in 0..pmdp.observations.len() {
        if pmdp.observation_actions[z].is_empty() {
            rows.push(None);
            continue;
        }
        let mut row = Vec::new();
        for (a, f) in pmdp.action_weights(z) {
            let v = f.eval_exact(&exact);
            let p = to_f64(&v);
            if !(-WELL_DEFINED_TOL..=1.0 + WELL_DEFINED_TOL).contains(&p) {
                offending.push(OffendingEntry {
                    state: pmdp.observations[z].clone(),
                    successor: Some(pmdp.actions[a].clone()),
                    value: p,
                });
            }
            row.push((a, p.clamp(0.0, 1.0)));
        }
        rows.push(Some(row));
    }
    if !offending.is_empty() {
        return Err(Error::IllDefined(offending));
    }
    Ok(InfiltratorStrategy::new(rows, 1))
}

/// Inverse of [`istrat`]: reads the parameter values off a strategy table.
pub fn instantiation_of(pmdp: &ParametricMdp, strategy: &InfiltratorStrategy) -> Instantiation {
    Instantiation {
        values: pmdp
            .parameters
            .iter()
            .map(|p| strategy.prob(p.observation, p.action))
            .collect(),
    }
}

impl ParametricMdp {
    /// True when every action weight under `u` lies in `[0, 1]` up to the
    /// well-definedness tolerance, evaluated exactly.
    pub fn is_well_defined(&self, u: &Instantiation) -> bool {
        if u.values.len() != self.parameters.len() {
            return false;
        }
        let exact: Vec<BigRational> = u.values.iter().map(|&v| rational(v)).collect();
        (0..self.observations.len()).all(|z| {
            self.action_weights(z).iter().all(|(_, f)| {
                let v = to_f64(&f.eval_exact(&exact));
                (-WELL_DEFINED_TOL..=1.0 + WELL_DEFINED_TOL).contains(&v)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{evaluate_cost, DeceiverStrategy};
    use crate::samples;

    fn demo() -> (OneSidedPosg, ParametricMdp) {
        let posg = samples::reduction_demo();
        let pmdp = posg_to_pmdp(&posg).unwrap();
        (posg, pmdp)
    }

    fn expr(pmdp: &ParametricMdp, from: &str, to: &str) -> String {
        let s = pmdp.names.iter().position(|n| n == from).unwrap();
        let t = pmdp.names.iter().position(|n| n == to).unwrap();
        let e = &pmdp.choices(s)[0].successors.iter().find(|(u, _)| *u == t).unwrap().1;
        e.display(&pmdp.parameter_names()).to_string()
    }

    #[test]
    fn three_action_state_gets_two_parameters() {
        let (_, pmdp) = demo();
        assert_eq!(pmdp.parameters().len(), 3);
        assert_eq!(expr(&pmdp, "s0", "s5"), "1 - p_blue_1 - p_blue_2");
        assert_eq!(expr(&pmdp, "s0", "s4"), "p_blue_1 + 1/2*p_blue_2");
        assert_eq!(expr(&pmdp, "s0", "s2"), "1/2*p_blue_2");
    }

    #[test]
    fn shared_observation_shares_the_parameter() {
        let (_, pmdp) = demo();
        assert_eq!(expr(&pmdp, "s3", "s4"), "p_red_1");
        assert_eq!(expr(&pmdp, "s3", "s2"), "1 - p_red_1");
        assert_eq!(expr(&pmdp, "s1", "s5"), "1/2*p_red_1");
        assert_eq!(expr(&pmdp, "s1", "s2"), "1 - 1/2*p_red_1");
        assert!(pmdp.degree() <= 1);
    }

    #[test]
    fn instantiation_substitutes_values() {
        let (_, pmdp) = demo();
        let u = Instantiation::from_named(
            &pmdp,
            &[("p_blue_1", 0.2), ("p_blue_2", 0.4), ("p_red_1", 0.5)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
        .unwrap();
        let mdp = instantiate(&pmdp, &u).unwrap();
        let g = mdp.game();
        let c = &g.choices(0)[0];
        let p = |name: &str| {
            let t = g.state_id(name).unwrap();
            c.successors.iter().find(|(u, _)| *u == t).unwrap().1
        };
        assert!((p("s5") - 0.4).abs() < 1e-15);
        assert!((p("s4") - 0.4).abs() < 1e-15);
        assert!((p("s2") - 0.2).abs() < 1e-15);
    }

    #[test]
    fn negative_dependent_weight_is_ill_defined() {
        let (_, pmdp) = demo();
        let u = Instantiation::new(vec![0.7, 0.5, 0.5]);
        let err = instantiate(&pmdp, &u).unwrap_err();
        let Error::IllDefined(entries) = err else {
            panic!("{err}")
        };
        assert!(entries
            .iter()
            .any(|e| e.state == "s0" && e.successor.as_deref() == Some("s5")));
        assert!(!pmdp.is_well_defined(&u));
    }

    #[test]
    fn uniform_values_give_uniform_rows() {
        let (posg, pmdp) = demo();
        let sigma = istrat(&pmdp, &Instantiation::uniform(&pmdp)).unwrap();
        let uniform = InfiltratorStrategy::uniform(&posg);
        for z in 0..posg.num_observations() {
            let row = sigma.row(z).unwrap();
            assert!((row.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
            for &(a, p) in row {
                assert!((p - uniform.prob(z, a)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn parameter_maps_to_the_higher_action() {
        let (posg, pmdp) = demo();
        let z = posg.observation_id("red").unwrap();
        let g = posg.game();
        let u = Instantiation::new(vec![0.2, 0.4, 0.3]);
        let sigma = istrat(&pmdp, &u).unwrap();
        assert!((sigma.prob(z, g.action_id("a2").unwrap()) - 0.3).abs() < 1e-15);
        assert!((sigma.prob(z, g.action_id("a1").unwrap()) - 0.7).abs() < 1e-15);
        assert_eq!(instantiation_of(&pmdp, &sigma), u);
    }

    #[test]
    fn single_action_states_add_no_parameters() {
        let posg = samples::constant_game(7.0);
        let mut b = posg.to_builder();
        let d = b.state("d2", Player::Deceiver);
        let i = b.state("i2", Player::Infiltrator);
        b.observe(i, "solo");
        let x = b.action("x");
        b.transition(d, x, i, 1.0)
            .transition(i, x, d, 0.25)
            .transition(i, x, 2, 0.75);
        let posg = b.build().unwrap();
        let pmdp = posg_to_pmdp(&posg).unwrap();
        assert_eq!(pmdp.parameters().len(), 1);
        let s = posg.game().state_id("i2").unwrap();
        let succ = &pmdp.choices(s)[0].successors;
        assert!(succ.iter().all(|(_, e)| e.is_constant()));
    }

    #[test]
    fn reduction_preserves_values() {
        let (posg, pmdp) = demo();
        let u = Instantiation::new(vec![0.1, 0.6, 0.8]);
        let delta = DeceiverStrategy::first_actions(&posg);
        let direct = evaluate_cost(&posg, &delta, &istrat(&pmdp, &u).unwrap()).unwrap();
        let mdp = instantiate(&pmdp, &u).unwrap();
        let reduced = evaluate_cost(&mdp, &delta, &InfiltratorStrategy::forced(&mdp).unwrap()).unwrap();
        for s in 0..posg.num_states() {
            assert!((direct[s] - reduced[s]).abs() < 1e-9);
        }
    }
}
