use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cfg::{Cfg, NodeKind};
use super::{Tds, TaintEnv};
use crate::lang::{BinOp, Expr, Location, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexConfig {
    /// Body of a character class (without brackets) used as filler.
    pub filler: String,
}

impl Default for RegexConfig {
    fn default() -> Self {
        RegexConfig {
            filler: "a-z0-9".into(),
        }
    }
}

/// One pattern per input parameter, plus the literals that went into each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputPatterns {
    pub patterns: Vec<String>,
    pub literals: Vec<BTreeSet<u8>>,
}

/// Builds an input grammar for each input parameter from the character
/// literals that tainted data is compared against on the path of `t`.
///
/// Conditions considered are branches at TDS locations and the branches the
/// TDS locations are control dependent on. A literal is attributed to the
/// input(s) whose binding starts a TDS of the compared variable.
pub fn derive_input_regex(p: &Program, env: &TaintEnv, t: &Tds, cfg: &RegexConfig) -> InputPatterns {
    let graph = Cfg::build(p);
    let ancestors = graph.control_ancestors();
    let on_path: BTreeSet<Location> = t.labels().iter().copied().collect();

    let mut branches = BTreeSet::new();
    for (n, node) in graph.nodes.iter().enumerate() {
        let Some(l) = node.label else { continue };
        if !on_path.contains(&l) {
            continue;
        }
        if matches!(node.kind, NodeKind::Branch { .. }) {
            branches.insert(n);
        }
        branches.extend(ancestors[n].iter().copied());
    }

    let bindings = p.input_bindings();
    let mut literals = vec![BTreeSet::new(); p.inputs.len()];
    for n in branches {
        let node = &graph.nodes[n];
        let NodeKind::Branch { cond } = &node.kind else { continue };
        let l = node.label.expect("branches are labelled");
        let mut found = Vec::new();
        comparisons(cond, &mut found);
        for (side, c) in found {
            if c == 0 {
                continue;
            }
            let mut sources = BTreeSet::new();
            for v in side.vars() {
                let Some(info) = env.get(l, v) else { continue };
                for tds in &info.tds_set {
                    sources.insert(tds.labels()[0]);
                }
            }
            for (i, b) in bindings.iter().enumerate() {
                if sources.contains(b) {
                    literals[i].insert(c);
                }
            }
        }
    }

    let patterns = literals
        .iter()
        .map(|lits| {
            let mut class = cfg.filler.clone();
            for &c in lits {
                class.push_str(&escape(c));
            }
            format!("[{class}]*")
        })
        .collect();
    InputPatterns { patterns, literals }
}

/// `(expr, literal)` for every `expr == 'c'` / `expr != 'c'` in `e`.
fn comparisons<'a>(e: &'a Expr, out: &mut Vec<(&'a Expr, u8)>) {
    match e {
        Expr::Binary(BinOp::Eq | BinOp::Ne, a, b) => match (&**a, &**b) {
            (x, Expr::Char(c)) | (Expr::Char(c), x) => out.push((x, *c)),
            _ => {
                comparisons(a, out);
                comparisons(b, out);
            }
        },
        Expr::Binary(_, a, b) => {
            comparisons(a, out);
            comparisons(b, out);
        }
        Expr::Unary(_, a) => comparisons(a, out),
        _ => {}
    }
}

fn escape(c: u8) -> String {
    match c {
        b'\\' | b']' | b'[' | b'^' | b'-' | b'&' | b'~' => format!("\\{}", c as char),
        0x21..=0x7e => (c as char).to_string(),
        _ => format!("\\x{c:02x}"),
    }
}
