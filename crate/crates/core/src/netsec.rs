//! Generator for the layered network-security deception game.
//!
//! An infiltrator moves through `n` network layers; a defender who has
//! detected the infiltrator either engages (lets it proceed into a decoy) or
//! blocks. The infiltrator sees its own layer but never whether it has been
//! detected.
//!
//! Each round is played as two moves. The defender moves first at
//! `(x, d)`: a single `pass` action when undetected, `engage` or `block`
//! when detected. The infiltrator then moves from a state that records the
//! defender's choice, and pays the joint loss of the round:
//!
//! | detected | infiltrator | defender | loss      |
//! |----------|-------------|----------|-----------|
//! | no       | compromise  |          | −2        |
//! | no       | exfiltrate  |          | 15·i      |
//! | no       | takedown    |          | 25·i      |
//! | yes      | compromise  | engage   | −4        |
//! | yes      | exfiltrate  | engage   | −2        |
//! | yes      | takedown    | engage   | 25·i      |
//! | yes      | compromise  | block    | −2        |
//! | yes      | exfiltrate  | block    | 0         |
//! | yes      | takedown    | block    | 0         |
//!
//! `wait` costs nothing. Compromise advances one layer unless blocked;
//! takedown sends the infiltrator back outside, undetected. An undetected
//! action is noticed with its detection probability. Reaching layer `n`
//! ends the game.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionId, DeceiverStrategy, OneSidedPosg, Player, PosgBuilder, StateId};
use crate::pmdp::MemoryUnfolding;

pub const COMPROMISE: &str = "compromise";
pub const EXFILTRATE: &str = "exfiltrate";
pub const TAKEDOWN: &str = "takedown";
pub const WAIT: &str = "wait";
pub const PASS: &str = "pass";
pub const ENGAGE: &str = "engage";
pub const BLOCK: &str = "block";

/// `constant + per_layer · i` at layer `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub per_layer: f64,
}

impl LayerCost {
    pub const fn fixed(c: f64) -> Self {
        Self {
            constant: c,
            per_layer: 0.0,
        }
    }

    pub const fn per_layer(k: f64) -> Self {
        Self {
            constant: 0.0,
            per_layer: k,
        }
    }

    pub fn at(&self, layer: usize) -> f64 {
        self.constant + self.per_layer * layer as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub undetected_compromise: LayerCost,
    pub undetected_exfiltrate: LayerCost,
    pub undetected_takedown: LayerCost,
    pub engaged_compromise: LayerCost,
    pub engaged_exfiltrate: LayerCost,
    pub engaged_takedown: LayerCost,
    pub blocked_compromise: LayerCost,
    pub blocked_exfiltrate: LayerCost,
    pub blocked_takedown: LayerCost,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            undetected_compromise: LayerCost::fixed(-2.0),
            undetected_exfiltrate: LayerCost::per_layer(15.0),
            undetected_takedown: LayerCost::per_layer(25.0),
            engaged_compromise: LayerCost::fixed(-4.0),
            engaged_exfiltrate: LayerCost::fixed(-2.0),
            engaged_takedown: LayerCost::per_layer(25.0),
            blocked_compromise: LayerCost::fixed(-2.0),
            blocked_exfiltrate: LayerCost::fixed(0.0),
            blocked_takedown: LayerCost::fixed(0.0),
        }
    }
}

impl CostTable {
    fn entries(&self) -> [LayerCost; 9] {
        [
            self.undetected_compromise,
            self.undetected_exfiltrate,
            self.undetected_takedown,
            self.engaged_compromise,
            self.engaged_exfiltrate,
            self.engaged_takedown,
            self.blocked_compromise,
            self.blocked_exfiltrate,
            self.blocked_takedown,
        ]
    }

    /// Every value the table charges on layers `0..n`.
    pub fn charged_values(&self, n: usize) -> Vec<f64> {
        (0..n)
            .flat_map(|i| self.entries().map(|c| c.at(i)))
            .chain([0.0])
            .collect()
    }
}

/// Probability that an undetected action gets noticed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionProbabilities {
    pub compromise: f64,
    pub exfiltrate: f64,
    pub wait: f64,
    /// Recorded for completeness; a takedown always restarts undetected.
    pub takedown: f64,
}

impl Default for DetectionProbabilities {
    fn default() -> Self {
        Self {
            compromise: 0.5,
            exfiltrate: 0.1,
            wait: 0.0,
            takedown: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub layers: usize,
    pub detection: DetectionProbabilities,
    pub discount: f64,
    pub costs: CostTable,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layers: 4,
            detection: DetectionProbabilities::default(),
            discount: 0.9,
            costs: CostTable::default(),
        }
    }
}

impl NetworkConfig {
    pub fn with_layers(layers: usize) -> Self {
        Self {
            layers,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Domain("the network needs at least one layer".into()));
        }
        let d = &self.detection;
        for (name, p) in [
            ("compromise", d.compromise),
            ("exfiltrate", d.exfiltrate),
            ("wait", d.wait),
            ("takedown", d.takedown),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("detection probability of {name} is {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Domain(format!("discount {} is outside [0, 1)", self.discount)));
        }
        if self
            .costs
            .entries()
            .iter()
            .any(|c| !c.constant.is_finite() || !c.per_layer.is_finite())
        {
            return Err(Error::Domain("cost table has a non-finite entry".into()));
        }
        Ok(())
    }

    /// Reads a JSON or TOML file (by extension); missing fields take defaults.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pending {
    None,
    Engage,
    Block,
}

/// What a generated state stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NetworkState {
    pub position: usize,
    pub detected: bool,
    pub mover: Player,
    pub pending: Pending,
}

impl NetworkState {
    fn name(&self) -> String {
        let d = if self.detected { "det" } else { "undet" };
        match (self.mover, self.pending) {
            (Player::Deceiver, _) => format!("D_x{}_{d}", self.position),
            (Player::Infiltrator, Pending::None) => format!("I_x{}_{d}", self.position),
            (Player::Infiltrator, Pending::Engage) => format!("I_x{}_{d}_engage", self.position),
            (Player::Infiltrator, Pending::Block) => format!("I_x{}_{d}_block", self.position),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetadata {
    pub layers: usize,
    pub states: usize,
    /// `5n + 2`.
    pub closed_form_states: String,
    pub deceiver_choice_states: usize,
    pub infiltrator_state_actions: usize,
    pub config: NetworkConfig,
}

/// Closed-form state count of an `n`-layer network.
pub fn state_count(n: usize) -> usize {
    5 * n + 2
}

#[derive(Clone, Debug)]
pub struct NetworkGame {
    pub posg: OneSidedPosg,
    /// Indexed by state id.
    pub labels: Vec<NetworkState>,
    pub metadata: NetworkMetadata,
}

pub fn generate(config: &NetworkConfig) -> Result<NetworkGame> {
    config.check()?;
    let n = config.layers;
    let det = &config.detection;
    let costs = &config.costs;
    let mut b = PosgBuilder::new(config.discount);
    let mut labels = Vec::with_capacity(state_count(n));
    let mut add = |b: &mut PosgBuilder, label: NetworkState| {
        labels.push(label);
        b.state(label.name(), label.mover)
    };
    let deceiver = |x: usize, d: bool| NetworkState {
        position: x,
        detected: d,
        mover: Player::Deceiver,
        pending: Pending::None,
    };
    let infiltrator = |x: usize, d: bool, pending: Pending| NetworkState {
        position: x,
        detected: d,
        mover: Player::Infiltrator,
        pending,
    };

    // D[x][d] for x in 0..=n, then infiltrator states per layer below n.
    let mut dstate = vec![[0; 2]; n + 1];
    for (x, slot) in dstate.iter_mut().enumerate() {
        for d in [false, true] {
            slot[usize::from(d)] = add(&mut b, deceiver(x, d));
        }
    }
    let mut undetected = vec![0; n];
    let mut engaged = vec![0; n];
    let mut blocked = vec![0; n];
    for x in 0..n {
        undetected[x] = add(&mut b, infiltrator(x, false, Pending::None));
        engaged[x] = add(&mut b, infiltrator(x, true, Pending::Engage));
        blocked[x] = add(&mut b, infiltrator(x, true, Pending::Block));
    }

    let [compromise, exfiltrate, takedown, wait] = [COMPROMISE, EXFILTRATE, TAKEDOWN, WAIT].map(|a| b.action(a));
    let [pass, engage, block] = [PASS, ENGAGE, BLOCK].map(|a| b.action(a));
    let restart = dstate[0][0];

    for x in 0..n {
        let obs = format!("x{x}");
        for s in [undetected[x], engaged[x], blocked[x]] {
            b.observe(s, &obs);
        }
        b.transition(dstate[x][0], pass, undetected[x], 1.0);
        b.transition(dstate[x][1], engage, engaged[x], 1.0);
        b.transition(dstate[x][1], block, blocked[x], 1.0);

        // Undetected moves; a detection flips d on arrival.
        let noticed = |b: &mut PosgBuilder, a: ActionId, to: usize, p: f64| {
            if p < 1.0 {
                b.transition(undetected[x], a, dstate[to][0], 1.0 - p);
            }
            if p > 0.0 {
                b.transition(undetected[x], a, dstate[to][1], p);
            }
        };
        noticed(&mut b, compromise, x + 1, det.compromise);
        noticed(&mut b, exfiltrate, x, det.exfiltrate);
        noticed(&mut b, wait, x, det.wait);
        b.transition(undetected[x], takedown, restart, 1.0);
        b.cost(undetected[x], compromise, costs.undetected_compromise.at(x));
        b.cost(undetected[x], exfiltrate, costs.undetected_exfiltrate.at(x));
        b.cost(undetected[x], takedown, costs.undetected_takedown.at(x));

        let here = dstate[x][1];
        b.transition(engaged[x], compromise, dstate[x + 1][1], 1.0);
        b.transition(engaged[x], exfiltrate, here, 1.0);
        b.transition(engaged[x], wait, here, 1.0);
        b.transition(engaged[x], takedown, restart, 1.0);
        b.cost(engaged[x], compromise, costs.engaged_compromise.at(x));
        b.cost(engaged[x], exfiltrate, costs.engaged_exfiltrate.at(x));
        b.cost(engaged[x], takedown, costs.engaged_takedown.at(x));

        b.transition(blocked[x], compromise, here, 1.0);
        b.transition(blocked[x], exfiltrate, here, 1.0);
        b.transition(blocked[x], wait, here, 1.0);
        b.transition(blocked[x], takedown, restart, 1.0);
        b.cost(blocked[x], compromise, costs.blocked_compromise.at(x));
        b.cost(blocked[x], exfiltrate, costs.blocked_exfiltrate.at(x));
        b.cost(blocked[x], takedown, costs.blocked_takedown.at(x));
    }
    for d in [0, 1] {
        b.target(dstate[n][d]);
    }
    b.initial(restart);
    let posg = b.build()?;
    let metadata = NetworkMetadata {
        layers: n,
        states: posg.num_states(),
        closed_form_states: "5n+2".into(),
        deceiver_choice_states: n,
        infiltrator_state_actions: 12 * n,
        config: config.clone(),
    };
    Ok(NetworkGame { posg, labels, metadata })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    AlwaysEngage,
    AlwaysBlock,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::AlwaysEngage => "always_engage",
            Baseline::AlwaysBlock => "always_block",
        }
    }
}

/// Labels of an unfolded network game: each state inherits the label of the
/// state it copies.
pub fn unfolded_labels(labels: &[NetworkState], unfolding: &MemoryUnfolding) -> Vec<NetworkState> {
    unfolding.state_origin.iter().map(|&(s, _)| labels[s]).collect()
}

/// Engages (or blocks) in every detected defender state. `labels` must
/// describe `posg`, which may be a memory unfolding of a generated game.
pub fn baseline_strategy(posg: &OneSidedPosg, labels: &[NetworkState], kind: Baseline) -> Result<DeceiverStrategy> {
    let foreign = |why: String| Error::StrategyMismatch(format!("not a generated network game: {why}"));
    if labels.len() != posg.num_states() {
        return Err(foreign(format!(
            "{} labels for {} states",
            labels.len(),
            posg.num_states()
        )));
    }
    let g = posg.game();
    let want = match kind {
        Baseline::AlwaysEngage => ENGAGE,
        Baseline::AlwaysBlock => BLOCK,
    };
    let want = g
        .action_id(want)
        .ok_or_else(|| foreign(format!("no `{want}` action")))?;
    let pass = g.action_id(PASS).ok_or_else(|| foreign("no `pass` action".into()))?;
    let mut choices = std::collections::BTreeMap::<StateId, ActionId>::new();
    for s in posg.deceiver_states() {
        if posg.is_target(s) {
            continue;
        }
        let l = &labels[s];
        if l.mover != Player::Deceiver {
            return Err(foreign(format!(
                "label of `{}` is not a defender state",
                g.state(s).name
            )));
        }
        let a = if l.detected { want } else { pass };
        if g.choice(s, a).is_none() {
            return Err(foreign(format!("`{}` lacks `{}`", g.state(s).name, g.action_name(a))));
        }
        choices.insert(s, a);
    }
    DeceiverStrategy::new(posg, &choices)
}
