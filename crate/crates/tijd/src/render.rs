//! Rendering of labeled models: the text layout used when reporting
//! results (one line per open predicate) and a JSON form for machine
//! consumption.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::solver::AbductiveModel;
use crate::term::Term;

fn atom_text(pred: &str, args: &[Term]) -> String {
    if args.is_empty() {
        return pred.to_string();
    }
    let parts: Vec<String> = args.iter().map(|t| t.to_string()).collect();
    format!("{}({})", pred, parts.join(","))
}

/// One line per nonempty open predicate, `name: [atom,atom]`, sorted by
/// predicate and then by atom. Deterministic for a given model.
pub fn render_text(model: &AbductiveModel) -> String {
    let mut out = String::new();
    for (p, set) in &model.abduced {
        if set.is_empty() {
            continue;
        }
        let atoms: Vec<String> = set.iter().map(|a| atom_text(p, a)).collect();
        out.push_str(&format!("{}: [{}]\n", p, atoms.join(",")));
    }
    out
}

/// A term in the JSON rendering. Calendar time points and intervals get
/// explicit shapes; everything else is a symbol, number, or compound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonTerm {
    Timestamp { year: i64, month: i64, day: i64, hour: i64 },
    Interval { start: Box<JsonTerm>, end: Box<JsonTerm> },
    Compound { functor: String, args: Vec<JsonTerm> },
    Int(i64),
    Symbol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonAtom {
    pub functor: String,
    pub args: Vec<JsonTerm>,
}

/// Predicate name to atom list, in stable (sorted) key order.
pub type JsonModel = BTreeMap<String, Vec<JsonAtom>>;

pub fn json_term(t: &Term) -> JsonTerm {
    match t {
        Term::Int(n) => JsonTerm::Int(*n),
        Term::Var(v) => JsonTerm::Symbol(v.clone()),
        Term::App(f, args) => match (f.as_str(), args.as_slice()) {
            ("ts", [Term::Int(y), Term::Int(m), Term::Int(d), Term::Int(h)]) => {
                JsonTerm::Timestamp { year: *y, month: *m, day: *d, hour: *h }
            }
            ("int", [a, b]) => JsonTerm::Interval {
                start: Box::new(json_term(a)),
                end: Box::new(json_term(b)),
            },
            (_, []) => JsonTerm::Symbol(f.clone()),
            _ => JsonTerm::Compound {
                functor: f.clone(),
                args: args.iter().map(json_term).collect(),
            },
        },
    }
}

/// The term a [`JsonTerm`] denotes, for round-tripping.
pub fn term_of_json(j: &JsonTerm) -> Term {
    match j {
        JsonTerm::Int(n) => Term::Int(*n),
        JsonTerm::Symbol(s) => Term::constant(s.clone()),
        JsonTerm::Timestamp { year, month, day, hour } => Term::app(
            "ts",
            vec![
                Term::Int(*year),
                Term::Int(*month),
                Term::Int(*day),
                Term::Int(*hour),
            ],
        ),
        JsonTerm::Interval { start, end } => {
            Term::app("int", vec![term_of_json(start), term_of_json(end)])
        }
        JsonTerm::Compound { functor, args } => {
            Term::App(functor.clone(), args.iter().map(term_of_json).collect())
        }
    }
}

pub fn render_json(model: &AbductiveModel) -> JsonModel {
    model
        .abduced
        .iter()
        .filter(|(_, set)| !set.is_empty())
        .map(|(p, set)| {
            let atoms = set
                .iter()
                .map(|args| JsonAtom {
                    functor: p.clone(),
                    args: args.iter().map(json_term).collect(),
                })
                .collect();
            (p.clone(), atoms)
        })
        .collect()
}
