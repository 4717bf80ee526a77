//! Formulas, rules, open-function declarations, and validated theories.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::term::Term;

/// Interval relations and properties interpreted directly by the numeric
/// layer. They may not be defined or declared by a theory.
pub const BUILTIN_PREDICATES: &[(&str, usize)] = &[
    ("overlap", 2),
    ("within", 2),
    ("before", 2),
    ("meets", 2),
    ("after", 2),
    ("not_before", 2),
    ("day_a", 1),
    ("hour", 1),
    ("bounded", 1),
    ("point", 1),
    ("hour_of_day", 2),
    ("int", 1),
];

pub fn is_builtin_predicate(name: &str) -> bool {
    BUILTIN_PREDICATES.iter().any(|(n, _)| *n == name)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(String, Vec<Term>),
    Eq(Term, Term),
    True,
    False,
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>, args: Vec<Term>) -> Formula {
        Formula::Atom(name.into(), args)
    }

    pub fn and(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::True,
            1 => fs.pop().unwrap(),
            _ => Formula::And(fs),
        }
    }

    pub fn or(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::False,
            1 => fs.pop().unwrap(),
            _ => Formula::Or(fs),
        }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(vars: Vec<String>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Exists(vars, Box::new(f))
        }
    }

    pub fn forall(vars: Vec<String>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Forall(vars, Box::new(f))
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match self {
            Formula::Atom(_, args) => {
                for a in args {
                    let mut vs = Vec::new();
                    a.vars(&mut vs);
                    for v in vs {
                        if !bound.contains(&v) && !out.contains(&v) {
                            out.push(v);
                        }
                    }
                }
            }
            Formula::Eq(l, r) => {
                let mut vs = Vec::new();
                l.vars(&mut vs);
                r.vars(&mut vs);
                for v in vs {
                    if !bound.contains(&v) && !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            Formula::True | Formula::False => {}
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(bound, out);
                }
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(vs, f) | Formula::Forall(vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Applies a variable renaming (capture is the caller's concern; used
    /// with globally fresh targets only).
    pub fn rename(&self, map: &HashMap<String, String>) -> Formula {
        fn rt(t: &Term, map: &HashMap<String, String>) -> Term {
            match t {
                Term::Var(v) => match map.get(v) {
                    Some(n) => Term::Var(n.clone()),
                    None => t.clone(),
                },
                Term::Int(_) => t.clone(),
                Term::App(f, args) => {
                    Term::App(f.clone(), args.iter().map(|a| rt(a, map)).collect())
                }
            }
        }
        match self {
            Formula::Atom(p, args) => {
                Formula::Atom(p.clone(), args.iter().map(|a| rt(a, map)).collect())
            }
            Formula::Eq(l, r) => Formula::Eq(rt(l, map), rt(r, map)),
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Not(f) => Formula::not(f.rename(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.rename(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.rename(map)).collect()),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.rename(map)), Box::new(b.rename(map)))
            }
            Formula::Iff(a, b) => Formula::Iff(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Formula::Exists(vs, f) => Formula::Exists(
                vs.iter().map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone())).collect(),
                Box::new(f.rename(map)),
            ),
            Formula::Forall(vs, f) => Formula::Forall(
                vs.iter().map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone())).collect(),
                Box::new(f.rename(map)),
            ),
        }
    }

    /// Applies a substitution to every term position.
    pub fn apply(&self, s: &crate::term::Substitution) -> Formula {
        match self {
            Formula::Atom(p, args) => {
                Formula::Atom(p.clone(), args.iter().map(|a| s.apply(a)).collect())
            }
            Formula::Eq(l, r) => Formula::Eq(s.apply(l), s.apply(r)),
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Not(f) => Formula::not(f.apply(s)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.apply(s)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.apply(s)).collect()),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.apply(s)), Box::new(b.apply(s)))
            }
            Formula::Iff(a, b) => Formula::Iff(Box::new(a.apply(s)), Box::new(b.apply(s))),
            Formula::Exists(vs, f) => Formula::Exists(vs.clone(), Box::new(f.apply(s))),
            Formula::Forall(vs, f) => Formula::Forall(vs.clone(), Box::new(f.apply(s))),
        }
    }
}

// precedence levels: 0 implication/equivalence, 1 disjunction,
// 2 conjunction, 3 negation, 4 primary
fn fmt_prec(f: &Formula, level: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let needs = |have: u8| level > have;
    match f {
        Formula::Atom(p, args) => {
            write!(out, "{p}")?;
            if !args.is_empty() {
                write!(out, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(out, ",")?;
                    }
                    write!(out, "{a}")?;
                }
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Eq(l, r) => write!(out, "{l} = {r}"),
        Formula::True => write!(out, "true"),
        Formula::False => write!(out, "false"),
        Formula::Not(g) => {
            if needs(3) {
                write!(out, "(")?;
            }
            write!(out, "not ")?;
            fmt_prec(g, 3, out)?;
            if needs(3) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::And(fs) => {
            if needs(2) {
                write!(out, "(")?;
            }
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(out, " & ")?;
                }
                fmt_prec(g, 3, out)?;
            }
            if needs(2) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Or(fs) => {
            if needs(1) {
                write!(out, "(")?;
            }
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(out, " ; ")?;
                }
                fmt_prec(g, 2, out)?;
            }
            if needs(1) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Implies(a, b) => {
            if needs(0) {
                write!(out, "(")?;
            }
            fmt_prec(a, 1, out)?;
            write!(out, " => ")?;
            fmt_prec(b, 0, out)?;
            if needs(0) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Iff(a, b) => {
            if needs(0) {
                write!(out, "(")?;
            }
            fmt_prec(a, 1, out)?;
            write!(out, " <=> ")?;
            fmt_prec(b, 0, out)?;
            if needs(0) {
                write!(out, ")")?;
            }
            Ok(())
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            // quantifier bodies extend maximally to the right, so any
            // non-trailing occurrence is parenthesized
            if needs(0) {
                write!(out, "(")?;
            }
            let kw = if matches!(f, Formula::Exists(..)) { "exists" } else { "forall" };
            write!(out, "{kw}({})$ ", vs.join(","))?;
            fmt_prec(g, 0, out)?;
            if needs(0) {
                write!(out, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

/// One rule of a definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub head: (String, Vec<Term>),
    pub body: Formula,
}

impl Rule {
    pub fn fact(name: impl Into<String>, args: Vec<Term>) -> Rule {
        Rule { head: (name.into(), args), body: Formula::True }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = Formula::Atom(self.head.0.clone(), self.head.1.clone());
        fmt_prec(&head, 4, f)?;
        write!(f, " <- ")?;
        fmt_prec(&self.body, 0, f)?;
        write!(f, ".")
    }
}

/// `of name:: t1(_), ..., tn(_) -> t(_).`
#[derive(Debug, Clone, PartialEq)]
pub struct OpenFunctionDecl {
    pub name: String,
    pub domain_types: Vec<String>,
    pub range_type: String,
}

impl fmt::Display for OpenFunctionDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "of {}:: ", self.name)?;
        for (i, t) in self.domain_types.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}(_)")?;
        }
        if !self.domain_types.is_empty() {
            write!(f, " ")?;
        }
        write!(f, "-> {}(_).", self.range_type)
    }
}

/// One statement of a theory file.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Rule(Rule),
    Axiom(Formula),
    OpenFunction(OpenFunctionDecl),
}

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("arity clash for `{name}`: used with {first} and {second} arguments")]
    ArityClash { name: String, first: usize, second: usize },
    #[error("predicate `{0}` is both defined by rules and declared as an open function")]
    DefinedAndOpen(String),
    #[error("recursive definition through `{0}`; only non-recursive definitions are supported")]
    Recursive(String),
    #[error("`{0}` is a built-in interval predicate and may not be defined or declared")]
    BuiltinRedefined(String),
    #[error("rule for `{0}` has an implication, equivalence or forall in its body")]
    InvalidRuleBody(String),
    #[error("open function `{0}` declared more than once")]
    DuplicateDeclaration(String),
}

/// A validated theory: definitions, first order axioms, open-function
/// declarations, and the inferred set of open predicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Theory {
    pub definitions: IndexMap<String, Vec<Rule>>,
    pub axioms: Vec<Formula>,
    pub open_functions: Vec<OpenFunctionDecl>,
    pub open_predicates: BTreeSet<String>,
    pub pred_arity: HashMap<String, usize>,
    pub functor_arity: HashMap<String, usize>,
}

impl Theory {
    pub fn from_statements(stmts: Vec<Statement>) -> Result<Theory, TheoryError> {
        let mut t = Theory::default();
        for (name, arity) in BUILTIN_PREDICATES {
            t.pred_arity.insert(name.to_string(), *arity);
        }
        for stmt in stmts {
            t.add_statement(stmt)?;
        }
        t.finish()?;
        Ok(t)
    }

    /// Merges another batch of statements into an existing theory, then
    /// re-validates. Rules for the same predicate accumulate.
    pub fn merge_statements(&mut self, stmts: Vec<Statement>) -> Result<(), TheoryError> {
        for stmt in stmts {
            self.add_statement(stmt)?;
        }
        self.finish()
    }

    fn add_statement(&mut self, stmt: Statement) -> Result<(), TheoryError> {
        match stmt {
            Statement::Rule(rule) => {
                let (name, args) = &rule.head;
                if is_builtin_predicate(name) {
                    return Err(TheoryError::BuiltinRedefined(name.clone()));
                }
                self.note_pred(name, args.len())?;
                for a in args {
                    self.note_term(a)?;
                }
                check_rule_body(&rule.body).map_err(|_| TheoryError::InvalidRuleBody(name.clone()))?;
                self.note_formula(&rule.body)?;
                self.definitions.entry(name.clone()).or_default().push(rule);
            }
            Statement::Axiom(f) => {
                // free variables are implicitly universally quantified
                let closed = Formula::forall(f.free_vars(), f);
                self.note_formula(&closed)?;
                self.axioms.push(closed);
            }
            Statement::OpenFunction(decl) => {
                if is_builtin_predicate(&decl.name) {
                    return Err(TheoryError::BuiltinRedefined(decl.name.clone()));
                }
                if self.open_functions.iter().any(|d| d.name == decl.name) {
                    return Err(TheoryError::DuplicateDeclaration(decl.name.clone()));
                }
                self.note_pred(&decl.name, decl.domain_types.len() + 1)?;
                for ty in decl.domain_types.iter().chain([&decl.range_type]) {
                    if !is_builtin_predicate(ty) {
                        self.note_pred(ty, 1)?;
                    }
                }
                self.open_functions.push(decl);
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), TheoryError> {
        for decl in &self.open_functions {
            if self.definitions.contains_key(&decl.name) {
                return Err(TheoryError::DefinedAndOpen(decl.name.clone()));
            }
        }
        self.check_acyclic()?;
        self.open_predicates = self
            .pred_arity
            .keys()
            .filter(|p| !self.definitions.contains_key(*p) && !is_builtin_predicate(p))
            .cloned()
            .collect();
        Ok(())
    }

    fn note_pred(&mut self, name: &str, arity: usize) -> Result<(), TheoryError> {
        match self.pred_arity.get(name) {
            Some(&a) if a != arity => Err(TheoryError::ArityClash {
                name: name.to_string(),
                first: a,
                second: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.pred_arity.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    fn note_term(&mut self, t: &Term) -> Result<(), TheoryError> {
        if let Term::App(name, args) = t {
            match self.functor_arity.get(name) {
                Some(&a) if a != args.len() => {
                    return Err(TheoryError::ArityClash {
                        name: name.clone(),
                        first: a,
                        second: args.len(),
                    })
                }
                Some(_) => {}
                None => {
                    self.functor_arity.insert(name.clone(), args.len());
                }
            }
            for a in args {
                self.note_term(a)?;
            }
        }
        Ok(())
    }

    fn note_formula(&mut self, f: &Formula) -> Result<(), TheoryError> {
        match f {
            Formula::Atom(p, args) => {
                self.note_pred(p, args.len())?;
                for a in args {
                    self.note_term(a)?;
                }
                Ok(())
            }
            Formula::Eq(l, r) => {
                self.note_term(l)?;
                self.note_term(r)
            }
            Formula::True | Formula::False => Ok(()),
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => self.note_formula(g),
            Formula::And(fs) | Formula::Or(fs) => {
                for g in fs {
                    self.note_formula(g)?;
                }
                Ok(())
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                self.note_formula(a)?;
                self.note_formula(b)
            }
        }
    }

    fn check_acyclic(&self) -> Result<(), TheoryError> {
        // depth-first search over the dependency graph of defined
        // predicates through positive and negative body literals
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            InProgress,
            Done,
        }
        fn preds_of(f: &Formula, out: &mut HashSet<String>) {
            match f {
                Formula::Atom(p, _) => {
                    out.insert(p.clone());
                }
                Formula::Eq(..) | Formula::True | Formula::False => {}
                Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => preds_of(g, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| preds_of(g, out)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    preds_of(a, out);
                    preds_of(b, out);
                }
            }
        }
        fn visit(
            p: &str,
            theory: &Theory,
            marks: &mut HashMap<String, Mark>,
        ) -> Result<(), TheoryError> {
            match marks.get(p) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::InProgress) => return Err(TheoryError::Recursive(p.to_string())),
                None => {}
            }
            marks.insert(p.to_string(), Mark::InProgress);
            if let Some(rules) = theory.definitions.get(p) {
                let mut deps = HashSet::new();
                for r in rules {
                    preds_of(&r.body, &mut deps);
                }
                for d in deps {
                    if theory.definitions.contains_key(&d) {
                        visit(&d, theory, marks)?;
                    }
                }
            }
            marks.insert(p.to_string(), Mark::Done);
            Ok(())
        }
        let mut marks = HashMap::new();
        for p in self.definitions.keys() {
            visit(p, self, &mut marks)?;
        }
        Ok(())
    }

    pub fn is_defined(&self, pred: &str) -> bool {
        self.definitions.contains_key(pred)
    }

    pub fn is_open(&self, pred: &str) -> bool {
        self.open_predicates.contains(pred)
    }

    /// Pretty-prints the theory; parsing the result yields an equal theory.
    pub fn print(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for d in &self.open_functions {
            writeln!(out, "{d}").unwrap();
        }
        for rules in self.definitions.values() {
            for r in rules {
                writeln!(out, "{r}").unwrap();
            }
        }
        for a in &self.axioms {
            writeln!(out, "fol {a}.").unwrap();
        }
        out
    }
}

fn check_rule_body(f: &Formula) -> Result<(), ()> {
    match f {
        Formula::Implies(..) | Formula::Iff(..) | Formula::Forall(..) => Err(()),
        Formula::Atom(..) | Formula::Eq(..) | Formula::True | Formula::False => Ok(()),
        Formula::Not(g) | Formula::Exists(_, g) => check_rule_body(g),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                check_rule_body(g)?;
            }
            Ok(())
        }
    }
}
