//! Terms and substitutions under unique-names semantics.
//!
//! Every functor acts as a constructor: two compounds with different
//! functors (or different arities) denote distinct objects, and integer
//! constants unify only with equal integers or with variables.

use std::collections::HashMap;
use std::fmt;

/// A first order term. Constants are zero-arity compounds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Int(i64),
    App(String, Vec<Term>),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Term {
        Term::App(name.into(), Vec::new())
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(name.into(), args)
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects variable names in left-to-right order of first occurrence.
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|x| x == v) {
                    out.push(v.clone());
                }
            }
            Term::Int(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.vars(out);
                }
            }
        }
    }

    /// True if the variable occurs anywhere in the term.
    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Int(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(n) => write!(f, "{n}"),
            Term::App(name, args) => {
                write!(f, "{name}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

/// A triangular substitution: bindings may map variables to terms that
/// themselves contain bound variables; [`Substitution::apply`] resolves
/// chains fully, so applying twice equals applying once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Substitution {
    bindings: HashMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    /// Names of all bound variables, in no particular order.
    pub fn bound_vars(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }

    /// Follows variable-to-variable chains without descending into compounds.
    pub fn walk<'a>(&'a self, t: &'a Term) -> &'a Term {
        let mut cur = t;
        while let Term::Var(v) = cur {
            match self.bindings.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur
    }

    /// Full resolution of a term under the substitution.
    pub fn apply(&self, t: &Term) -> Term {
        let t = self.walk(t);
        match t {
            Term::Var(_) | Term::Int(_) => t.clone(),
            Term::App(name, args) => {
                Term::App(name.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
        }
    }

    /// Adds a binding, enforcing the occurs check. Returns false when the
    /// binding would create a cyclic term.
    pub fn bind(&mut self, var: &str, t: &Term) -> bool {
        let resolved = self.apply(t);
        if let Term::Var(v) = &resolved {
            if v == var {
                return true; // X = X
            }
        }
        if resolved.occurs(var) {
            return false;
        }
        self.bindings.insert(var.to_string(), resolved);
        true
    }
}

/// Most general unifier of `t1` and `t2` extending `s`, or `None` when no
/// unifier extending `s` exists. Failure is a regular outcome.
pub fn unify(t1: &Term, t2: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    if unify_in_place(t1, t2, &mut out) {
        Some(out)
    } else {
        None
    }
}

pub(crate) fn unify_in_place(t1: &Term, t2: &Term, s: &mut Substitution) -> bool {
    let a = s.walk(t1).clone();
    let b = s.walk(t2).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), _) => s.bind(x, &b),
        (_, Term::Var(y)) => s.bind(y, &a),
        (Term::Int(m), Term::Int(n)) => m == n,
        (Term::App(f, fargs), Term::App(g, gargs)) => {
            if f != g || fargs.len() != gargs.len() {
                return false; // UNA: distinct constructors, distinct objects
            }
            fargs
                .iter()
                .zip(gargs.iter())
                .all(|(x, y)| unify_in_place(x, y, s))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evt(t: Term) -> Term {
        Term::app("evt", vec![t])
    }

    #[test]
    fn unify_constructor_decomposition() {
        let s = unify(
            &evt(Term::var("W")),
            &evt(Term::constant("w1")),
            &Substitution::new(),
        )
        .unwrap();
        assert_eq!(s.apply(&Term::var("W")), Term::constant("w1"));
    }

    #[test]
    fn unify_distinct_constants_fails() {
        assert!(unify(
            &Term::constant("zijn"),
            &Term::constant("eten"),
            &Substitution::new()
        )
        .is_none());
    }

    #[test]
    fn unify_interval_pattern() {
        // int(ts(1999,1,1,0), E) against a ground interval binds E.
        let ts1 = Term::app(
            "ts",
            vec![Term::Int(1999), Term::Int(1), Term::Int(1), Term::Int(0)],
        );
        let ts2 = Term::app(
            "ts",
            vec![Term::Int(1999), Term::Int(1), Term::Int(2), Term::Int(0)],
        );
        let pat = Term::app("int", vec![ts1.clone(), Term::var("E")]);
        let grd = Term::app("int", vec![ts1, ts2.clone()]);
        let s = unify(&pat, &grd, &Substitution::new()).unwrap();
        assert_eq!(s.apply(&Term::var("E")), ts2);
    }

    #[test]
    fn apply_identity_and_binding() {
        let s = Substitution::new();
        assert_eq!(s.apply(&evt(Term::constant("w1"))), evt(Term::constant("w1")));

        let mut s = Substitution::new();
        assert!(s.bind("W", &Term::constant("w1")));
        assert_eq!(s.apply(&evt(Term::var("W"))), evt(Term::constant("w1")));
        // unbound variables untouched
        assert_eq!(s.apply(&Term::var("Y")), Term::var("Y"));
    }

    #[test]
    fn occurs_check() {
        let x = Term::var("X");
        let fx = Term::app("f", vec![Term::var("X")]);
        assert!(unify(&x, &fx, &Substitution::new()).is_none());
    }

    #[test]
    fn unifier_makes_terms_equal() {
        let t1 = Term::app("p", vec![Term::var("X"), Term::constant("a")]);
        let t2 = Term::app("p", vec![Term::constant("b"), Term::var("Y")]);
        let s = unify(&t1, &t2, &Substitution::new()).unwrap();
        assert_eq!(s.apply(&t1), s.apply(&t2));
    }

    #[test]
    fn unify_symmetry_on_ground_terms() {
        let terms = [
            Term::constant("a"),
            Term::Int(3),
            Term::app("f", vec![Term::constant("a")]),
            Term::app("f", vec![Term::constant("b")]),
            Term::app("g", vec![Term::constant("a"), Term::Int(1)]),
        ];
        for t1 in &terms {
            for t2 in &terms {
                let ab = unify(t1, t2, &Substitution::new()).is_some();
                let ba = unify(t2, t1, &Substitution::new()).is_some();
                assert_eq!(ab, ba);
                // ground unification is syntactic identity
                assert_eq!(ab, t1 == t2);
            }
        }
    }

    #[test]
    fn apply_twice_equals_once() {
        let mut s = Substitution::new();
        assert!(s.bind("X", &Term::var("Y")));
        assert!(s.bind("Y", &Term::app("f", vec![Term::var("Z")])));
        let t = Term::app("g", vec![Term::var("X"), Term::var("Z")]);
        let once = s.apply(&t);
        assert_eq!(s.apply(&once), once);
    }
}
