//! The shipped Dutch temporal-semantics theory and the sentence encoder.
//!
//! The knowledge base lives in plain theory-language files under `kb/`
//! and is also embedded in the binary as the default when no `--kb`
//! paths are given. [`encode_sentence`] turns a structured sentence
//! description into the input facts the theory expects.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Rule, Statement, Theory, TheoryError};
use crate::parse::{ParseError, parse_statements, parse_term};
use crate::term::Term;

/// The default knowledge base, file by file.
pub const DEFAULT_KB: &[(&str, &str)] = &[
    ("lexicon", include_str!("../kb/lexicon")),
    ("tense", include_str!("../kb/tense")),
    ("aspect", include_str!("../kb/aspect")),
    ("adjuncts", include_str!("../kb/adjuncts")),
    ("time", include_str!("../kb/time")),
];

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}:{line}:{col}: {message}", line = err.line, col = err.col, message = err.message)]
    Parse { path: String, err: ParseError },
    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("invalid sentence description: {0}")]
    Description(String),
}

/// Parses and merges named theory sources into one validated theory.
pub fn load_sources<'a>(
    sources: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Theory, KbError> {
    let mut stmts: Vec<Statement> = Vec::new();
    for (name, src) in sources {
        stmts.extend(
            parse_statements(src)
                .map_err(|err| KbError::Parse { path: name.to_string(), err })?,
        );
    }
    Ok(Theory::from_statements(stmts)?)
}

/// The embedded default knowledge base.
pub fn default_kb() -> Theory {
    load_sources(DEFAULT_KB.iter().copied()).expect("embedded knowledge base must load")
}

/// Loads theory files from disk, merged in the given order.
pub fn load_kb(paths: &[impl AsRef<Path>]) -> Result<Theory, KbError> {
    let mut named = Vec::new();
    for p in paths {
        let path = p.as_ref().display().to_string();
        let src = fs::read_to_string(p.as_ref())
            .map_err(|err| KbError::Io { path: path.clone(), err })?;
        named.push((path, src));
    }
    load_sources(named.iter().map(|(n, s)| (n.as_str(), s.as_str())))
}

/// A tokenized single-clause sentence: which words occur, in which verb
/// forms, and how the tokens hang together.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceDescription {
    pub clause: String,
    pub verb_tokens: Vec<VerbToken>,
    pub main_verb: String,
    #[serde(default)]
    pub aux_verbs: Vec<AuxEdge>,
    #[serde(default)]
    pub adjuncts: Vec<AdjunctToken>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerbToken {
    pub token: String,
    pub word: String,
    pub form: String,
}

/// An auxiliary verb token and the token it takes as complement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxEdge {
    pub aux: String,
    pub complement: String,
}

/// An adjunct token and its word, written in term syntax (`gisteren`,
/// `om(4)`, `na(a1)`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjunctToken {
    pub token: String,
    pub word: String,
}

const VERB_FORMS: &[&str] = &["past_participle", "present_tense", "past_tense", "infinitive"];

/// Emits the input facts for a sentence description: the clause and its
/// structure edges, then the word and form of every token.
pub fn encode_sentence(desc: &SentenceDescription) -> Result<Vec<Rule>, KbError> {
    let err = |m: String| KbError::Description(m);

    let token_names: Vec<&str> = desc.verb_tokens.iter().map(|t| t.token.as_str()).collect();
    if !token_names.contains(&desc.main_verb.as_str()) {
        return Err(err(format!("main verb {} is not a verb token", desc.main_verb)));
    }
    for t in &desc.verb_tokens {
        if !VERB_FORMS.contains(&t.form.as_str()) {
            return Err(err(format!("unknown verb form {} on token {}", t.form, t.token)));
        }
    }
    // the auxiliaries must stack into a single chain over the main verb
    let mut chain = vec![desc.main_verb.as_str()];
    let mut edges: Vec<&AuxEdge> = desc.aux_verbs.iter().collect();
    while let Some(pos) = edges
        .iter()
        .position(|e| e.complement == *chain.last().unwrap())
    {
        let e = edges.remove(pos);
        if !token_names.contains(&e.aux.as_str()) {
            return Err(err(format!("auxiliary {} is not a verb token", e.aux)));
        }
        chain.push(e.aux.as_str());
    }
    if let Some(e) = edges.first() {
        return Err(err(format!(
            "auxiliary {} does not continue the verb chain",
            e.aux
        )));
    }
    if chain.len() != desc.verb_tokens.len() {
        return Err(err("every verb token must be on the auxiliary chain".into()));
    }

    let c = || Term::constant(desc.clause.clone());
    let mut facts = vec![
        Rule::fact("clause", vec![c()]),
        Rule::fact("main_verb", vec![c(), Term::constant(desc.main_verb.clone())]),
    ];
    for e in &desc.aux_verbs {
        facts.push(Rule::fact(
            "aux_verb",
            vec![Term::constant(e.aux.clone()), Term::constant(e.complement.clone())],
        ));
    }
    for a in &desc.adjuncts {
        facts.push(Rule::fact("s_adjunct", vec![c(), Term::constant(a.token.clone())]));
    }
    for t in &desc.verb_tokens {
        facts.push(Rule::fact(
            "verbt_word",
            vec![Term::constant(t.token.clone()), Term::constant(t.word.clone())],
        ));
    }
    for a in &desc.adjuncts {
        let word = parse_term(&a.word).map_err(|e| {
            err(format!("adjunct word {} does not parse: {}", a.word, e.message))
        })?;
        if !word.is_ground() {
            return Err(err(format!("adjunct word {} contains variables", a.word)));
        }
        facts.push(Rule::fact("adjt_word", vec![Term::constant(a.token.clone()), word]));
    }
    for t in &desc.verb_tokens {
        facts.push(Rule::fact(
            "vform",
            vec![Term::constant(t.token.clone()), Term::constant(t.form.clone())],
        ));
    }
    Ok(facts)
}

/// The facts rendered back as a theory-language source file.
pub fn facts_to_source(facts: &[Rule]) -> String {
    let mut out = String::new();
    for f in facts {
        out.push_str(&f.to_string());
        out.push('\n');
    }
    out
}
