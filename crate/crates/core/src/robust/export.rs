//! Annotated text of the full robust program, in which the infiltrator's
//! observation-based probabilities stay symbolic. It documents the problem
//! that the fixed-strategy program approximates; nothing solves it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{validate, OneSidedPosg, Player};

/// Marker appended to rows whose coefficients depend on the symbolic
/// infiltrator probabilities.
pub const UNCERTAIN: &str = "[uncertain]";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RobustRowCounts {
    pub target: usize,
    pub simplex: usize,
    pub onehot: usize,
    pub mix: usize,
    pub ge: usize,
    pub le: usize,
}

impl RobustRowCounts {
    /// Row counts the program must have for `posg`.
    pub fn expected(posg: &OneSidedPosg) -> Self {
        let g = posg.game();
        let live = |s: &usize| !posg.is_target(*s) && !g.choices(*s).is_empty();
        let deceiver_actions: usize = posg.deceiver_states().filter(live).map(|s| g.choices(s).len()).sum();
        Self {
            target: posg.targets().count(),
            simplex: (0..posg.num_observations())
                .filter(|&z| !posg.observation_actions(z).is_empty())
                .count(),
            onehot: posg.deceiver_states().filter(|&s| !g.choices(s).is_empty()).count(),
            mix: posg.infiltrator_states().filter(live).count(),
            ge: deceiver_actions,
            le: deceiver_actions,
        }
    }

    pub fn total(&self) -> usize {
        self.target + self.simplex + self.onehot + self.mix + self.ge + self.le
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn signed(out: &mut String, k: f64, var: &str) {
    let sign = if k.is_sign_negative() { '-' } else { '+' };
    let _ = write!(out, " {sign} {} {var}", num(k.abs()));
}

/// Writes the robust program for `posg` with `σ_<z>_<a>` left symbolic and
/// the big-M constant `m`.
pub fn build_robust_milp_export(posg: &OneSidedPosg, m: f64) -> Result<String> {
    let report = validate(posg);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let g = posg.game();
    let gamma = g.discount();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ Robust program over every memoryless observation-based infiltrator strategy."
    );
    let _ = writeln!(
        out,
        "\\ sigma_<z>_<a> are uncertain, not decision variables; rows using them carry a marker."
    );
    let _ = writeln!(out, "\\ big-M {}", num(m));
    for s in 0..g.num_states() {
        let _ = writeln!(out, "\\ state {s} = {}", g.state(s).name);
    }
    for (z, name) in posg.observations().iter().enumerate() {
        let _ = writeln!(out, "\\ observation {z} = {name}");
    }
    for (a, name) in g.actions().iter().enumerate() {
        let _ = writeln!(out, "\\ action {a} = {name}");
    }
    let _ = writeln!(out, "Minimize\n obj: + 1 c_{}\nSubject To", g.initial());

    for s in posg.targets() {
        let _ = writeln!(out, " target_{s}: + 1 c_{s} = 0");
    }
    for z in 0..posg.num_observations() {
        let acts = posg.observation_actions(z);
        if acts.is_empty() {
            continue;
        }
        let _ = write!(out, " simplex_{z}:");
        for a in acts {
            let _ = write!(out, " + 1 sigma_{z}_{a}");
        }
        out.push_str(" = 1\n");
    }
    for s in posg.deceiver_states() {
        if g.choices(s).is_empty() {
            continue;
        }
        let _ = write!(out, " onehot_{s}:");
        for a in g.enabled(s) {
            let _ = write!(out, " + 1 d_{s}_{a}");
        }
        out.push_str(" = 1\n");
    }
    for s in 0..g.num_states() {
        if posg.is_target(s) || g.choices(s).is_empty() {
            continue;
        }
        match g.player(s) {
            Player::Infiltrator => {
                let z = posg.observation(s).expect("infiltrator states observe");
                let _ = write!(out, " mix_{s}: + 1 c_{s}");
                for ch in g.choices(s) {
                    let _ = write!(out, " - sigma_{z}_{} * ( {}", ch.action, num(ch.cost));
                    for &(t, p) in &ch.successors {
                        signed(&mut out, p, &format!("c_{t}"));
                    }
                    out.push_str(" )");
                }
                let _ = writeln!(out, " = 0 {UNCERTAIN}");
            }
            Player::Deceiver => {
                for (tag, sense, rhs_sign) in [("ge", ">=", -1.0), ("le", "<=", 1.0)] {
                    for ch in g.choices(s) {
                        let a = ch.action;
                        let _ = write!(out, " {tag}_{s}_{a}: + 1 c_{s}");
                        for &(t, p) in &ch.successors {
                            signed(&mut out, -gamma * p, &format!("c_{t}"));
                        }
                        signed(&mut out, -rhs_sign * m, &format!("d_{s}_{a}"));
                        let _ = writeln!(out, " {sense} {}", num(ch.cost + rhs_sign * m));
                    }
                }
            }
        }
    }
    out.push_str("Bounds\n");
    for s in 0..g.num_states() {
        let _ = writeln!(out, " c_{s} free");
    }
    out.push_str("Binaries\n");
    for s in posg.deceiver_states() {
        for a in g.enabled(s) {
            let _ = writeln!(out, " d_{s}_{a}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Counts the rows of an exported document by name prefix.
pub fn count_robust_rows(text: &str) -> RobustRowCounts {
    let mut c = RobustRowCounts::default();
    for line in text.lines() {
        let Some((name, _)) = line.trim().split_once(':') else {
            continue;
        };
        let slot = match name.split('_').next() {
            Some("target") => &mut c.target,
            Some("simplex") => &mut c.simplex,
            Some("onehot") => &mut c.onehot,
            Some("mix") => &mut c.mix,
            Some("ge") => &mut c.ge,
            Some("le") => &mut c.le,
            _ => continue,
        };
        *slot += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn counts_match_the_model() {
        let posg = samples::reduction_demo_with_target();
        let text = build_robust_milp_export(&posg, 10.0).unwrap();
        let counts = count_robust_rows(&text);
        assert_eq!(counts, RobustRowCounts::expected(&posg));
        assert_eq!(counts.simplex, 2);
        assert_eq!(counts.target, 1);
    }

    #[test]
    fn single_observation_gives_one_simplex_row() {
        let posg = samples::constant_game(1.0);
        let text = build_robust_milp_export(&posg, 5.0).unwrap();
        assert_eq!(count_robust_rows(&text).simplex, 1);
    }

    #[test]
    fn uncertainty_marks_exactly_the_mix_rows() {
        let posg = samples::reduction_demo();
        let text = build_robust_milp_export(&posg, 10.0).unwrap();
        for line in text.lines().filter(|l| l.contains(UNCERTAIN)) {
            let name = line.trim().split(':').next().unwrap();
            assert!(name.starts_with("mix_"), "{line}");
        }
        let marked_mix = text
            .lines()
            .filter(|l| l.trim().starts_with("mix_") && l.contains(UNCERTAIN))
            .count();
        assert_eq!(marked_mix, count_robust_rows(&text).mix);
    }
}
