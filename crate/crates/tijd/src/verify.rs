//! Independent model checking.
//!
//! [`verify`] re-evaluates a generated model against the theory with
//! machinery deliberately disjoint from the solver: defined predicates are
//! computed bottom-up as their least extensions, quantifiers range over
//! the active domain (ground terms of the theory and model, plus derived
//! calendar intervals around every labeled time point), and temporal
//! atoms are evaluated arithmetically on ground hour indices. A model
//! that the solver got wrong fails here.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::completion::expand_open_function;
use crate::formula::{Formula, Theory, is_builtin_predicate};
use crate::solver::AbductiveModel;
use crate::temporal::{
    TemporalRelation, eval_property_ground, eval_relation_ground, from_hour_index, hour_index,
    valid_date,
};
use crate::term::Term;

/// A failed check, with the offending statement rendered for the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.detail)
    }
}

type Env = HashMap<String, Term>;

/// Checks that every axiom, every open-function law and the query hold in
/// the model. Returns the first violation found.
pub fn verify(
    theory: &Theory,
    query: Option<&Formula>,
    model: &AbductiveModel,
) -> Result<(), Violation> {
    let mut c = Checker::new(theory, model);
    c.compute_extensions();
    for a in &theory.axioms {
        if !c.holds(a, &Env::new()) {
            return Err(Violation { detail: format!("axiom violated: {a}") });
        }
    }
    for decl in &theory.open_functions {
        for law in expand_open_function(decl) {
            if !c.holds(&law, &Env::new()) {
                return Err(Violation {
                    detail: format!("open function law violated: {law}"),
                });
            }
        }
    }
    if let Some(q) = query {
        let closed = Formula::exists(q.free_vars(), q.clone());
        if !c.holds(&closed, &Env::new()) {
            return Err(Violation { detail: format!("query not satisfied: {q}") });
        }
    }
    Ok(())
}

/// Extensions of the given defined predicates, computed bottom-up over
/// the theory's own ground terms. Only meaningful for predicates whose
/// definitions reach no open predicate and no builtin.
pub(crate) fn ground_extensions(
    theory: &Theory,
    preds: &HashSet<String>,
) -> HashMap<String, BTreeSet<Vec<Term>>> {
    let empty = AbductiveModel {
        abduced: std::collections::BTreeMap::new(),
        assignment: Vec::new(),
        negative_assumptions: BTreeSet::new(),
    };
    let mut c = Checker::new(theory, &empty);
    let mut out = HashMap::new();
    for pred in c.topo_order() {
        if !preds.contains(&pred) {
            continue;
        }
        c.compute_extension(&pred);
        if let Some(ext) = c.ext.get(&pred) {
            out.insert(pred.clone(), ext.clone());
        }
    }
    out
}

struct Checker<'t> {
    theory: &'t Theory,
    ext: HashMap<String, BTreeSet<Vec<Term>>>,
    obj: Vec<Term>,
    ints: Vec<Term>,
    counter: u64,
}

impl<'t> Checker<'t> {
    fn new(theory: &'t Theory, model: &AbductiveModel) -> Checker<'t> {
        let mut obj: BTreeSet<Term> = BTreeSet::new();
        let mut points: BTreeSet<i64> = BTreeSet::new();

        let mut ext: HashMap<String, BTreeSet<Vec<Term>>> = HashMap::new();
        for (p, tuples) in &model.abduced {
            for args in tuples {
                for a in args {
                    collect(a, &mut obj, &mut points);
                }
            }
            ext.insert(p.clone(), tuples.clone());
        }
        for rules in theory.definitions.values() {
            for r in rules {
                for a in &r.head.1 {
                    collect(a, &mut obj, &mut points);
                }
                collect_formula(&r.body, &mut obj, &mut points);
            }
        }
        for a in &theory.axioms {
            collect_formula(a, &mut obj, &mut points);
        }

        // candidate intervals: every pair over the labeled endpoints and
        // their calendar neighbours (adjacent hours, enclosing day, the
        // days either side), so that day- and hour-shaped witnesses exist
        let mut ext_points: BTreeSet<i64> = BTreeSet::new();
        for &p in &points {
            let day = p - p.rem_euclid(24);
            for q in [p, p + 1, p - 1, p + 24, p - 24, day, day + 24, day - 24] {
                ext_points.insert(q);
            }
        }
        let pts: Vec<i64> = ext_points.into_iter().collect();
        let mut ints = Vec::new();
        for (i, &x) in pts.iter().enumerate() {
            for &y in &pts[i..] {
                ints.push(interval_term(x, y));
            }
        }

        Checker { theory, ext, obj: obj.into_iter().collect(), ints, counter: 0 }
    }

    /// Least extensions of the defined predicates, in dependency order.
    fn compute_extensions(&mut self) {
        for pred in self.topo_order() {
            self.compute_extension(&pred);
        }
    }

    fn compute_extension(&mut self, pred: &str) {
        {
            let rules = self.theory.definitions[pred].clone();
            let mut tuples: BTreeSet<Vec<Term>> = BTreeSet::new();
            for r in &rules {
                let mut envs = Vec::new();
                self.assignments(&[r.body.clone()], &Env::new(), &mut envs);
                let mut head_vars = Vec::new();
                for t in &r.head.1 {
                    t.vars(&mut head_vars);
                }
                for e in envs {
                    let open: Vec<String> = head_vars
                        .iter()
                        .filter(|v| !e.contains_key(*v))
                        .cloned()
                        .collect();
                    for e2 in self.complete(&open, &e) {
                        if let Some(args) = r
                            .head
                            .1
                            .iter()
                            .map(|t| ground(t, &e2))
                            .collect::<Option<Vec<Term>>>()
                        {
                            tuples.insert(args);
                        }
                    }
                }
            }
            self.ext.insert(pred.to_string(), tuples);
        }
    }

    fn topo_order(&self) -> Vec<String> {
        fn visit(
            pred: &str,
            theory: &Theory,
            done: &mut HashSet<String>,
            order: &mut Vec<String>,
        ) {
            if done.contains(pred) {
                return;
            }
            done.insert(pred.to_string());
            if let Some(rules) = theory.definitions.get(pred) {
                let mut deps = Vec::new();
                for r in rules {
                    body_preds(&r.body, &mut deps);
                }
                for d in deps {
                    if theory.is_defined(&d) {
                        visit(&d, theory, done, order);
                    }
                }
                order.push(pred.to_string());
            }
        }
        let mut done = HashSet::new();
        let mut order = Vec::new();
        for pred in self.theory.definitions.keys() {
            visit(pred, self.theory, &mut done, &mut order);
        }
        order
    }

    fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("_V{}", self.counter)
    }

    fn freshen(&mut self, vs: &[String], f: &Formula) -> (Vec<String>, Formula) {
        let mut map = HashMap::new();
        let mut names = Vec::new();
        for v in vs {
            let n = self.fresh();
            names.push(n.clone());
            map.insert(v.clone(), n);
        }
        (names, f.rename(&map))
    }

    /// Truth of a formula whose free variables are all bound in `env`.
    fn holds(&mut self, f: &Formula, env: &Env) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::And(fs) => fs.iter().all(|g| self.holds(g, env)),
            Formula::Or(fs) => fs.iter().any(|g| self.holds(g, env)),
            Formula::Not(g) => !self.holds(g, env),
            Formula::Implies(a, b) => !self.holds(a, env) || self.holds(b, env),
            Formula::Iff(a, b) => self.holds(a, env) == self.holds(b, env),
            Formula::Eq(l, r) => match (ground(l, env), ground(r, env)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
            Formula::Atom(p, args) => {
                let Some(vals) = args
                    .iter()
                    .map(|t| ground(t, env))
                    .collect::<Option<Vec<Term>>>()
                else {
                    return false;
                };
                if is_builtin_predicate(p) {
                    eval_builtin(p, &vals)
                } else {
                    self.ext.get(p).is_some_and(|s| s.contains(&vals))
                }
            }
            Formula::Exists(vs, g) => {
                let (_, g2) = self.freshen(vs, g);
                let mut envs = Vec::new();
                self.assignments(&[g2], env, &mut envs);
                !envs.is_empty()
            }
            Formula::Forall(vs, g) => {
                let (vs2, g2) = self.freshen(vs, g);
                if let Formula::Implies(a, c) = &g2 {
                    // enumerate the antecedent's satisfying assignments
                    let mut envs = Vec::new();
                    self.assignments(std::slice::from_ref(a), env, &mut envs);
                    let (a, c) = (a.clone(), c.clone());
                    envs.into_iter().all(|e| {
                        let open: Vec<String> = vs2
                            .iter()
                            .filter(|v| !e.contains_key(*v))
                            .cloned()
                            .collect();
                        self.complete(&open, &e)
                            .into_iter()
                            .all(|e2| !self.holds(&a, &e2) || self.holds(&c, &e2))
                    })
                } else {
                    let envs = self.complete(&vs2, env);
                    envs.into_iter().all(|e| self.holds(&g2, &e))
                }
            }
        }
    }

    /// All extensions of `env` binding `vars` to active-domain terms.
    fn complete(&self, vars: &[String], env: &Env) -> Vec<Env> {
        let mut acc = vec![env.clone()];
        for v in vars {
            let mut next = Vec::new();
            for base in &acc {
                for t in self.obj.iter().chain(self.ints.iter()) {
                    let mut e = base.clone();
                    e.insert(v.clone(), t.clone());
                    next.push(e);
                }
            }
            acc = next;
        }
        acc
    }

    /// Enumerates the assignments satisfying a conjunction, binding free
    /// variables by matching atoms against the computed extensions.
    fn assignments(&mut self, conjuncts: &[Formula], env: &Env, out: &mut Vec<Env>) {
        // structural steps first
        for (i, f) in conjuncts.iter().enumerate() {
            match f {
                Formula::True => {
                    return self.assignments(&without(conjuncts, i), env, out);
                }
                Formula::False => return,
                Formula::And(fs) => {
                    let mut rest = without(conjuncts, i);
                    for g in fs.iter().rev() {
                        rest.insert(i, g.clone());
                    }
                    return self.assignments(&rest, env, out);
                }
                Formula::Or(fs) => {
                    let rest = without(conjuncts, i);
                    for g in fs {
                        let mut c = rest.clone();
                        c.insert(i, g.clone());
                        self.assignments(&c, env, out);
                    }
                    return;
                }
                Formula::Exists(vs, g) => {
                    let (_, g2) = self.freshen(vs, g);
                    let mut rest = without(conjuncts, i);
                    rest.insert(i, g2);
                    return self.assignments(&rest, env, out);
                }
                _ => {}
            }
        }
        if conjuncts.is_empty() {
            out.push(env.clone());
            return;
        }
        // an extensional atom generates bindings
        for (i, f) in conjuncts.iter().enumerate() {
            if let Formula::Atom(p, args) = f {
                if !is_builtin_predicate(p) {
                    let tuples = self.ext.get(p).cloned().unwrap_or_default();
                    let rest = without(conjuncts, i);
                    for tuple in &tuples {
                        if tuple.len() != args.len() {
                            continue;
                        }
                        let mut e = env.clone();
                        if args
                            .iter()
                            .zip(tuple)
                            .all(|(pat, val)| match_term(pat, val, &mut e))
                        {
                            self.assignments(&rest, &e, out);
                        }
                    }
                    return;
                }
            }
        }
        // then whatever else is decidable under the current bindings
        for (i, f) in conjuncts.iter().enumerate() {
            match f {
                Formula::Eq(l, r) => {
                    let (gl, gr) = (ground(l, env), ground(r, env));
                    let rest = without(conjuncts, i);
                    match (gl, gr) {
                        (Some(a), Some(b)) => {
                            if a == b {
                                self.assignments(&rest, env, out);
                            }
                            return;
                        }
                        (Some(a), None) => {
                            let mut e = env.clone();
                            if match_term(r, &a, &mut e) {
                                self.assignments(&rest, &e, out);
                            }
                            return;
                        }
                        (None, Some(b)) => {
                            let mut e = env.clone();
                            if match_term(l, &b, &mut e) {
                                self.assignments(&rest, &e, out);
                            }
                            return;
                        }
                        (None, None) => {}
                    }
                }
                Formula::Atom(p, args) if is_builtin_predicate(p) => {
                    // enumerate unbound interval arguments over the
                    // candidate intervals, then evaluate arithmetically
                    let unbound: Vec<String> = args
                        .iter()
                        .filter_map(|t| match t {
                            Term::Var(v) if !env.contains_key(v) => Some(v.clone()),
                            _ => None,
                        })
                        .collect();
                    let all_decidable = args.iter().all(|t| {
                        ground(t, env).is_some() || matches!(t, Term::Var(_))
                    });
                    if !all_decidable {
                        continue;
                    }
                    let rest = without(conjuncts, i);
                    let p = p.clone();
                    let args = args.to_vec();
                    let mut envs = vec![env.clone()];
                    for v in &unbound {
                        let mut next = Vec::new();
                        let candidates: Vec<Term> = if p == "hour_of_day" && args.get(1) == Some(&Term::var(v.clone())) {
                            (0..24).map(Term::Int).collect()
                        } else {
                            self.ints.clone()
                        };
                        for base in &envs {
                            for t in &candidates {
                                let mut e = base.clone();
                                e.insert(v.clone(), t.clone());
                                next.push(e);
                            }
                        }
                        envs = next;
                    }
                    for e in envs {
                        let vals: Option<Vec<Term>> =
                            args.iter().map(|t| ground(t, &e)).collect();
                        if vals.is_some_and(|vs| eval_builtin(&p, &vs)) {
                            self.assignments(&rest, &e, out);
                        }
                    }
                    return;
                }
                Formula::Not(_) | Formula::Implies(..) | Formula::Iff(..) | Formula::Forall(..) => {
                    let free_bound = f.free_vars().iter().all(|v| env.contains_key(v));
                    if free_bound {
                        let rest = without(conjuncts, i);
                        if self.holds(f, env) {
                            self.assignments(&rest, env, out);
                        }
                        return;
                    }
                }
                _ => {}
            }
        }
        // nothing generates: enumerate a blocked variable over the domain
        let blocked = conjuncts[0]
            .free_vars()
            .into_iter()
            .find(|v| !env.contains_key(v));
        match blocked {
            Some(v) => {
                for e in self.complete(std::slice::from_ref(&v), env) {
                    self.assignments(conjuncts, &e, out);
                }
            }
            None => {
                // fully bound but unhandled above: fall back to truth
                let all = Formula::and(conjuncts.to_vec());
                if self.holds(&all, env) {
                    out.push(env.clone());
                }
            }
        }
    }
}

fn without(cs: &[Formula], i: usize) -> Vec<Formula> {
    cs.iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, f)| f.clone())
        .collect()
}

/// Substitutes `env` into a term; `None` when an unbound variable remains.
fn ground(t: &Term, env: &Env) -> Option<Term> {
    match t {
        Term::Var(v) => env.get(v).cloned(),
        Term::Int(n) => Some(Term::Int(*n)),
        Term::App(f, args) => Some(Term::App(
            f.clone(),
            args.iter().map(|a| ground(a, env)).collect::<Option<Vec<_>>>()?,
        )),
    }
}

/// One-way matching of a pattern with variables against a ground value.
fn match_term(pat: &Term, val: &Term, env: &mut Env) -> bool {
    match pat {
        Term::Var(v) => match env.get(v) {
            Some(bound) => bound == val,
            None => {
                env.insert(v.clone(), val.clone());
                true
            }
        },
        Term::Int(n) => matches!(val, Term::Int(m) if m == n),
        Term::App(f, args) => match val {
            Term::App(g, vargs) if f == g && args.len() == vargs.len() => args
                .iter()
                .zip(vargs)
                .all(|(p, v)| match_term(p, v, env)),
            _ => false,
        },
    }
}

fn point_of(t: &Term) -> Option<i64> {
    let Term::App(f, parts) = t else { return None };
    if f != "ts" || parts.len() != 4 {
        return None;
    }
    let mut ns = [0i64; 4];
    for (i, p) in parts.iter().enumerate() {
        let Term::Int(n) = p else { return None };
        ns[i] = *n;
    }
    if !valid_date(ns[0], ns[1], ns[2], ns[3]) {
        return None;
    }
    Some(hour_index(ns[0], ns[1], ns[2], ns[3]))
}

fn interval_of(t: &Term) -> Option<(i64, i64)> {
    let Term::App(f, parts) = t else { return None };
    if f != "int" || parts.len() != 2 {
        return None;
    }
    let (a, b) = (point_of(&parts[0])?, point_of(&parts[1])?);
    (a <= b).then_some((a, b))
}

fn interval_term(a: i64, b: i64) -> Term {
    let ts = |p: i64| {
        let (y, m, d, h) = from_hour_index(p);
        Term::app("ts", vec![Term::Int(y), Term::Int(m), Term::Int(d), Term::Int(h)])
    };
    Term::app("int", vec![ts(a), ts(b)])
}

fn eval_builtin(p: &str, args: &[Term]) -> bool {
    match p {
        "int" => interval_of(&args[0]).is_some(),
        "hour_of_day" => match (interval_of(&args[0]), &args[1]) {
            (Some((a, _)), Term::Int(n)) => a.rem_euclid(24) == *n,
            _ => false,
        },
        "day_a" | "hour" | "point" | "bounded" => interval_of(&args[0])
            .is_some_and(|i| eval_property_ground(p, i).unwrap_or(false)),
        _ => match (
            TemporalRelation::from_name(p),
            interval_of(&args[0]),
            interval_of(&args[1]),
        ) {
            (Some(tag), Some(i1), Some(i2)) => eval_relation_ground(tag, i1, i2),
            _ => false,
        },
    }
}

/// Predicate names occurring anywhere in a formula.
fn body_preds(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::Atom(p, _) => out.push(p.clone()),
        Formula::True | Formula::False | Formula::Eq(..) => {}
        Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => body_preds(g, out),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                body_preds(g, out);
            }
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            body_preds(a, out);
            body_preds(b, out);
        }
    }
}

fn collect(t: &Term, obj: &mut BTreeSet<Term>, points: &mut BTreeSet<i64>) {
    if let Some((a, b)) = interval_of(t) {
        points.insert(a);
        points.insert(b);
        return;
    }
    if let Some(p) = point_of(t) {
        points.insert(p);
        return;
    }
    match t {
        Term::Var(_) => {}
        Term::Int(_) => {
            obj.insert(t.clone());
        }
        Term::App(_, args) => {
            if t.is_ground() {
                obj.insert(t.clone());
            }
            for a in args {
                collect(a, obj, points);
            }
        }
    }
}

fn collect_formula(f: &Formula, obj: &mut BTreeSet<Term>, points: &mut BTreeSet<i64>) {
    match f {
        Formula::Atom(_, args) => {
            for a in args {
                collect(a, obj, points);
            }
        }
        Formula::Eq(l, r) => {
            collect(l, obj, points);
            collect(r, obj, points);
        }
        Formula::True | Formula::False => {}
        Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => {
            collect_formula(g, obj, points)
        }
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                collect_formula(g, obj, points);
            }
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_formula(a, obj, points);
            collect_formula(b, obj, points);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_formula, parse_theory};
    use crate::solver::{SolveOptions, enumerate};

    fn check_all(theory: &str, query: Option<&str>, expect_models: usize) {
        let t = parse_theory(theory).unwrap();
        let q = query.map(|q| parse_formula(q).unwrap());
        let opts = SolveOptions { max_models: 50, ..SolveOptions::default() };
        let e = enumerate(&t, q.as_ref(), &opts).unwrap();
        assert_eq!(e.models.len(), expect_models, "{:?}", e.floundered);
        for m in &e.models {
            verify(&t, q.as_ref(), m).unwrap();
        }
    }

    #[test]
    fn solver_models_pass_verification() {
        check_all("fol forall(X)$ p(X) => q(X). fol p(a).", None, 1);
        check_all(
            "dom(a). dom(b). rng(u). rng(v). of f:: dom(_) -> rng(_).",
            None,
            4,
        );
    }

    #[test]
    fn tampered_model_is_rejected() {
        let t = parse_theory("fol forall(X)$ p(X) => q(X). fol p(a).").unwrap();
        let e = enumerate(&t, None, &SolveOptions::default()).unwrap();
        let mut m = e.models[0].clone();
        m.abduced.remove("q");
        let err = verify(&t, None, &m).unwrap_err();
        assert!(err.detail.contains("axiom violated"));
    }

    #[test]
    fn temporal_witnesses_are_found() {
        // the enclosing day is not mentioned anywhere yet must be found
        check_all(
            "fol exists(T)$ day_a(T) & \
             within(int(ts(2000,5,22,3),ts(2000,5,22,5)), T).",
            None,
            1,
        );
    }

    #[test]
    fn temporal_consequent_checked_per_instance() {
        check_all(
            "fol p(int(ts(2001,1,1,0),ts(2001,1,2,0))). \
             fol forall(T)$ p(T) => day_a(T).",
            None,
            1,
        );
        // and a violating variant is unsatisfiable rather than verified
        let t = parse_theory(
            "fol p(int(ts(2001,1,1,0),ts(2001,1,1,5))). \
             fol forall(T)$ p(T) => day_a(T).",
        )
        .unwrap();
        let e = enumerate(&t, None, &SolveOptions::default()).unwrap();
        assert!(e.models.is_empty());
    }

    #[test]
    fn defined_predicates_use_least_extension() {
        // h holds only via p; a model must not satisfy "h(b)"
        let t = parse_theory("h(X) <- p(X). fol p(a).").unwrap();
        let e = enumerate(&t, None, &SolveOptions::default()).unwrap();
        let m = &e.models[0];
        let q_good = parse_formula("h(a)").unwrap();
        let q_bad = parse_formula("h(b)").unwrap();
        verify(&t, Some(&q_good), m).unwrap();
        assert!(verify(&t, Some(&q_bad), m).is_err());
    }

    #[test]
    fn negation_in_rule_bodies() {
        let t = parse_theory(
            "vac(a). ok(X) <- item(X) & not vac(X). item(a). item(b).",
        )
        .unwrap();
        let e = enumerate(&t, None, &SolveOptions::default()).unwrap();
        let m = &e.models[0];
        verify(&t, Some(&parse_formula("ok(b)").unwrap()), m).unwrap();
        assert!(verify(&t, Some(&parse_formula("ok(a)").unwrap()), m).is_err());
    }
}
