//! The abductive model generator.
//!
//! Starting from the axioms, the completed definitions, the open-function
//! expansions and the (possibly empty) query, the solver maintains two
//! kinds of goals: `Require(F)`, make `F` hold, and `Refute(C)`, make the
//! conjunction `C` impossible. Positive open atoms are abduced (after
//! trying to reuse an existing assumption); universally quantified
//! requirements become refutation goals whose free variables are
//! universal; a refutation blocked on an open atom is parked as a watch
//! and fires once per matching abduction — the watch's residual conjuncts
//! are the remembered disjuncts of the underlying disjunction. Search is
//! chronological backtracking over cloned states; numeric literals go to
//! the constraint store and all time variables are labeled at the end.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::formula::{Formula, Theory, is_builtin_predicate};
use crate::store::{Constraint, LabelingPolicy, Store, VarId};
use crate::temporal::{
    self, IntervalEnds, NumConstraint, TemporalRelation, days_in_month, from_hour_index,
    hour_index, valid_date,
};
use crate::term::{Substitution, Term, unify};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("search node limit of {0} exceeded")]
    NodeLimit(u64),
}

/// A generated interpretation of the open predicates, fully labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct AbductiveModel {
    /// abduced atoms per open predicate, ground after labeling
    pub abduced: BTreeMap<String, BTreeSet<Vec<Term>>>,
    /// labeled values of the numeric (hour-index) variables
    pub assignment: Vec<i64>,
    /// ground atoms that the search committed to being false
    pub negative_assumptions: BTreeSet<(String, Vec<Term>)>,
}

impl AbductiveModel {
    pub fn atoms(&self) -> impl Iterator<Item = (&str, &Vec<Term>)> {
        self.abduced
            .iter()
            .flat_map(|(p, set)| set.iter().map(move |a| (p.as_str(), a)))
    }

    pub fn contains(&self, pred: &str, args: &[Term]) -> bool {
        self.abduced.get(pred).is_some_and(|s| s.contains(args))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Model(AbductiveModel),
    Unsatisfiable,
    Floundered(String),
}

/// Result of model enumeration; `floundered` names a goal that some
/// abandoned branch could not decide, meaning the enumeration may be
/// incomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub models: Vec<AbductiveModel>,
    pub floundered: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub node_limit: u64,
    pub labeling: LabelingPolicy,
    pub max_models: usize,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            node_limit: 1_000_000,
            labeling: LabelingPolicy::default(),
            max_models: 1,
        }
    }
}

/// Generates up to `max_models` structurally distinct models.
pub fn enumerate(
    theory: &Theory,
    query: Option<&Formula>,
    opts: &SolveOptions,
) -> Result<Enumeration, SolveError> {
    let closed_names = closed_predicates(theory);
    let positive = positive_predicates(theory, &closed_names);
    let closed = crate::verify::ground_extensions(theory, &closed_names);
    let mut functional = functional_predicates(theory);
    functional.extend(theory.open_functions.iter().map(|d| d.name.clone()));
    Solver { theory, opts, closed, positive, functional }.run(query)
}

/// First model, if any.
pub fn solve(
    theory: &Theory,
    query: Option<&Formula>,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolveError> {
    let one = SolveOptions { max_models: 1, ..opts.clone() };
    let e = enumerate(theory, query, &one)?;
    Ok(match (e.models.into_iter().next(), e.floundered) {
        (Some(m), _) => SolveOutcome::Model(m),
        (None, Some(lit)) => SolveOutcome::Floundered(lit),
        (None, None) => SolveOutcome::Unsatisfiable,
    })
}

#[derive(Debug, Clone)]
enum Goal {
    Require(Formula),
    Refute(Vec<Formula>),
}

#[derive(Debug, Clone)]
struct Watch {
    pred: String,
    args: Vec<Term>,
    residual: Vec<Formula>,
}

#[derive(Debug, Clone)]
struct TsEntry {
    term: Term,
    var: VarId,
    last: Term,
}

/// A parked numeric denial: the ways the refuted conjunction can be made
/// false, each a set of endpoint constraints to assert. One alternative
/// per denial must hold in the final assignment.
type Denial = Vec<Vec<Constraint>>;

#[derive(Debug, Clone)]
struct SearchState {
    subst: Substitution,
    store: Store,
    agenda: VecDeque<Goal>,
    abduced: Vec<(String, Vec<Term>)>,
    watches: Vec<Watch>,
    fired: HashSet<(usize, usize)>,
    ts_entries: Vec<TsEntry>,
    merged: HashSet<(VarId, VarId)>,
    universals: HashSet<String>,
    denials: Vec<Denial>,
    /// choice goals put off until nothing deterministic is left, so that
    /// propagation prunes before the tree fans out
    deferred: VecDeque<Goal>,
    counter: u64,
    stall: usize,
}

impl SearchState {
    fn new() -> SearchState {
        SearchState {
            subst: Substitution::new(),
            store: Store::new(),
            agenda: VecDeque::new(),
            abduced: Vec::new(),
            watches: Vec::new(),
            fired: HashSet::new(),
            ts_entries: Vec::new(),
            merged: HashSet::new(),
            universals: HashSet::new(),
            denials: Vec::new(),
            deferred: VecDeque::new(),
            counter: 0,
            stall: 0,
        }
    }

    fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("_G{}", self.counter)
    }
}

enum Step {
    Done,
    Fail,
    Requeue(Goal),
    Branch(Vec<SearchState>),
}

struct Solver<'t> {
    theory: &'t Theory,
    opts: &'t SolveOptions,
    /// precomputed extensions of the defined predicates that depend on
    /// no open predicate and no builtin; these are evaluated directly
    /// instead of being expanded and branched over
    closed: HashMap<String, BTreeSet<Vec<Term>>>,
    /// the closed predicates defined without negation anywhere in their
    /// dependencies; only their extensions are small enough to enumerate
    /// for non-ground atoms (a negated definition holds of almost
    /// everything)
    positive: HashSet<String>,
    /// open predicates functional in their last argument
    functional: HashSet<String>,
}

/// Predicates an axiom declares functional in their last argument, i.e.
/// an axiom of the shape `forall ...$ p(xs,y) & p(xs,y2) => y = y2`.
/// Assuming a second atom over the same domain tuple is then pointless.
fn functional_predicates(theory: &Theory) -> HashSet<String> {
    let mut out = HashSet::new();
    for ax in &theory.axioms {
        let mut f = ax;
        while let Formula::Forall(_, g) = f {
            f = g;
        }
        let Formula::Implies(a, b) = f else { continue };
        let Formula::And(cs) = a.as_ref() else { continue };
        let [Formula::Atom(p, a1), Formula::Atom(q, a2)] = cs.as_slice() else { continue };
        let Formula::Eq(l, r) = b.as_ref() else { continue };
        if p != q || a1.len() != a2.len() || a1.is_empty() {
            continue;
        }
        let n = a1.len() - 1;
        if a1[..n] == a2[..n]
            && a1[n] != a2[n]
            && ((a1[n] == *l && a2[n] == *r) || (a1[n] == *r && a2[n] == *l))
        {
            out.insert(p.clone());
        }
    }
    out
}

/// Closed predicates whose definitions are negation-free, transitively.
fn positive_predicates(theory: &Theory, closed: &HashSet<String>) -> HashSet<String> {
    fn negation_free(f: &Formula) -> bool {
        match f {
            Formula::Not(_) | Formula::Implies(..) | Formula::Iff(..) => false,
            Formula::Atom(..) | Formula::Eq(..) | Formula::True | Formula::False => true,
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(negation_free),
            Formula::Exists(_, g) | Formula::Forall(_, g) => negation_free(g),
        }
    }
    let mut positive: HashSet<String> = closed
        .iter()
        .filter(|p| theory.definitions[p.as_str()].iter().all(|r| negation_free(&r.body)))
        .cloned()
        .collect();
    loop {
        let mut changed = false;
        for p in positive.clone() {
            let mut deps = Vec::new();
            for r in &theory.definitions[p.as_str()] {
                formula_preds(&r.body, &mut deps);
            }
            if deps.iter().any(|q| theory.is_defined(q) && !positive.contains(q)) {
                positive.remove(&p);
                changed = true;
            }
        }
        if !changed {
            return positive;
        }
    }
}

fn formula_preds(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::Atom(p, _) => out.push(p.clone()),
        Formula::True | Formula::False | Formula::Eq(..) => {}
        Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => formula_preds(g, out),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| formula_preds(g, out)),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            formula_preds(a, out);
            formula_preds(b, out);
        }
    }
}

/// Defined predicates whose rules reach no open predicate and no builtin.
fn closed_predicates(theory: &Theory) -> HashSet<String> {
    let mut closed: HashSet<String> = theory.definitions.keys().cloned().collect();
    loop {
        let mut changed = false;
        for (p, rules) in &theory.definitions {
            if !closed.contains(p) {
                continue;
            }
            let mut deps = Vec::new();
            for r in rules {
                formula_preds(&r.body, &mut deps);
            }
            if deps
                .iter()
                .any(|q| is_builtin_predicate(q) || !closed.contains(q))
            {
                closed.remove(p);
                changed = true;
            }
        }
        if !changed {
            return closed;
        }
    }
}

impl Solver<'_> {
    fn run(&self, query: Option<&Formula>) -> Result<Enumeration, SolveError> {
        let mut init = SearchState::new();
        if let Some(q) = query {
            init.agenda.push_back(Goal::Require(q.clone()));
        }
        for a in &self.theory.axioms {
            init.agenda.push_back(Goal::Require(a.clone()));
        }
        for decl in &self.theory.open_functions {
            for a in crate::completion::expand_open_function(decl) {
                init.agenda.push_back(Goal::Require(a));
            }
        }

        let mut models: Vec<AbductiveModel> = Vec::new();
        let mut keys: Vec<Vec<(String, String)>> = Vec::new();
        let mut floundered = None;
        let mut nodes = 0u64;
        let mut stack = vec![init];
        'branches: while let Some(mut st) = stack.pop() {
            loop {
                nodes += 1;
                if nodes > self.opts.node_limit {
                    return Err(SolveError::NodeLimit(self.opts.node_limit));
                }
                // a stalled agenda means every remaining goal is waiting on
                // a binding only a deferred choice can make
                let stalled = st.stall > st.agenda.len() + 1;
                let (goal, forced) = if stalled && !st.deferred.is_empty() {
                    st.stall = 0;
                    (st.deferred.pop_front().unwrap(), true)
                } else if let Some(g) = st.agenda.pop_front() {
                    (g, false)
                } else if let Some(g) = st.deferred.pop_front() {
                    (g, true)
                } else {
                    // structurally complete branch: label and build, keeping
                    // only minimal sets of assumptions (a model whose atoms
                    // include another model's explains nothing new)
                    let key = structural_key(&st);
                    if keys.iter().any(|k| key_subset(k, &key)) {
                        continue 'branches;
                    }
                    if let Some(m) = self.build_model(&st) {
                        let mut i = 0;
                        while i < keys.len() {
                            if key_subset(&key, &keys[i]) {
                                keys.remove(i);
                                models.remove(i);
                            } else {
                                i += 1;
                            }
                        }
                        keys.push(key);
                        models.push(m);
                        if models.len() >= self.opts.max_models {
                            break 'branches;
                        }
                    }
                    continue 'branches;
                };
                let saved = if forced { None } else { Some(goal.clone()) };
                match self.process(&mut st, goal)? {
                    Step::Done => {
                        st.stall = 0;
                    }
                    Step::Fail => continue 'branches,
                    Step::Requeue(g) => {
                        st.stall += 1;
                        if st.stall > st.agenda.len() + 1 && st.deferred.is_empty() {
                            if floundered.is_none() {
                                floundered = Some(describe_goal(&g));
                            }
                            continue 'branches;
                        }
                        st.agenda.push_back(g);
                    }
                    Step::Branch(mut alts) => {
                        st.stall = 0;
                        if alts.len() == 1 {
                            st = alts.pop().unwrap();
                        } else if !forced {
                            // put the choice off; propagation may shrink or
                            // kill it before it has to be made
                            st.deferred.push_back(saved.unwrap());
                        } else {
                            for alt in alts.into_iter().rev() {
                                stack.push(alt);
                            }
                            continue 'branches;
                        }
                    }
                }
            }
        }
        Ok(Enumeration { models, floundered })
    }

    fn process(&self, st: &mut SearchState, goal: Goal) -> Result<Step, SolveError> {
        match goal {
            Goal::Require(f) => self.require(st, f),
            Goal::Refute(conj) => self.refute(st, conj),
        }
    }

    // ---- positive mode -------------------------------------------------

    fn require(&self, st: &mut SearchState, f: Formula) -> Result<Step, SolveError> {
        let f = f.apply(&st.subst);
        Ok(match f {
            Formula::True => Step::Done,
            Formula::False => Step::Fail,
            Formula::And(fs) => {
                for g in fs.into_iter().rev() {
                    st.agenda.push_front(Goal::Require(g));
                }
                Step::Done
            }
            Formula::Or(fs) => {
                let alts = fs
                    .into_iter()
                    .map(|g| {
                        let mut alt = st.clone();
                        alt.agenda.push_front(Goal::Require(g));
                        alt
                    })
                    .collect();
                Step::Branch(alts)
            }
            Formula::Eq(l, r) => {
                if self.unify_global(st, &l, &r) {
                    Step::Done
                } else {
                    Step::Fail
                }
            }
            Formula::Not(g) => {
                if let Formula::Eq(l, r) = g.as_ref() {
                    if l.is_ground() && r.is_ground() {
                        return Ok(if l == r { Step::Fail } else { Step::Done });
                    }
                }
                if let Formula::Atom(p, gargs) = g.as_ref() {
                    if let Some(ext) = self.closed.get(p) {
                        if gargs.iter().all(Term::is_ground) {
                            return Ok(if ext.contains(gargs) {
                                Step::Fail
                            } else {
                                Step::Done
                            });
                        }
                    }
                }
                if !self.determined(st, &g) {
                    return Ok(Step::Requeue(Goal::Require(Formula::Not(g))));
                }
                for conj in pos_dnf(&g) {
                    st.agenda.push_back(Goal::Refute(conj));
                }
                Step::Done
            }
            Formula::Exists(vs, g) => {
                let g = self.rename(st, &vs, &g, false);
                st.agenda.push_front(Goal::Require(g));
                Step::Done
            }
            Formula::Forall(vs, g) => {
                let g = self.rename(st, &vs, &g, true);
                for conj in neg_dnf(&g) {
                    st.agenda.push_back(Goal::Refute(conj));
                }
                Step::Done
            }
            Formula::Implies(a, b) => {
                let mut neg = st.clone();
                for conj in pos_dnf(&a) {
                    neg.agenda.push_back(Goal::Refute(conj));
                }
                let mut pos = st.clone();
                pos.agenda.push_front(Goal::Require(*b));
                Step::Branch(vec![neg, pos])
            }
            Formula::Iff(a, b) => {
                st.agenda.push_front(Goal::Require(Formula::Implies(b.clone(), a.clone())));
                st.agenda.push_front(Goal::Require(Formula::Implies(a, b)));
                Step::Done
            }
            Formula::Atom(p, args) => {
                if is_builtin_predicate(&p) {
                    match self.assert_builtin(st, &p, &args) {
                        Ok(true) => Step::Done,
                        Ok(false) => Step::Requeue(Goal::Require(Formula::Atom(p, args))),
                        Err(()) => Step::Fail,
                    }
                } else if let Some(ext) = self
                    .closed
                    .get(&p)
                    .filter(|_| args.iter().all(Term::is_ground))
                {
                    if ext.contains(&args) { Step::Done } else { Step::Fail }
                } else if let Some(ext) =
                    self.closed.get(&p).filter(|_| self.positive.contains(&p))
                {
                    let tuples: Vec<Vec<Term>> = ext.iter().cloned().collect();
                    let mut alts = Vec::new();
                    for tuple in tuples {
                        if tuple.len() != args.len() {
                            continue;
                        }
                        let mut alt = st.clone();
                        if args
                            .iter()
                            .zip(&tuple)
                            .all(|(a, h)| self.unify_global(&mut alt, a, h))
                        {
                            alts.push(alt);
                        }
                    }
                    match alts.len() {
                        0 => Step::Fail,
                        1 => {
                            *st = alts.pop().unwrap();
                            Step::Done
                        }
                        _ => Step::Branch(alts),
                    }
                } else if self.theory.is_defined(&p) {
                    let mut alts = Vec::new();
                    for (head_args, body) in self.renamed_rules(st, &p, args.len(), false) {
                        let mut alt = st.clone();
                        if args
                            .iter()
                            .zip(&head_args)
                            .all(|(a, h)| self.unify_global(&mut alt, a, h))
                        {
                            if body != Formula::True {
                                alt.agenda.push_front(Goal::Require(body));
                            }
                            alts.push(alt);
                        }
                    }
                    match alts.len() {
                        0 => Step::Fail,
                        1 => {
                            *st = alts.pop().unwrap();
                            Step::Done
                        }
                        _ => Step::Branch(alts),
                    }
                } else {
                    self.require_open(st, p, args)
                }
            }
        })
    }

    /// A positive open atom: first try each compatible earlier assumption,
    /// then assume a fresh instance.
    fn require_open(&self, st: &SearchState, pred: String, args: Vec<Term>) -> Step {
        // an exact repeat of an existing assumption already holds
        let applied: Vec<Term> = args.iter().map(|t| st.subst.apply(t)).collect();
        if st
            .abduced
            .iter()
            .any(|(p, a)| *p == pred && a.iter().map(|t| st.subst.apply(t)).eq(applied.iter().cloned()))
        {
            return Step::Done;
        }
        // for a declared function, an assumption over the same domain
        // tuple is the only candidate: functionality would equate any
        // fresh instance with it anyway
        let functional = !args.is_empty() && self.functional.contains(&pred);
        let mut forced = false;
        let mut alts = Vec::new();
        for i in 0..st.abduced.len() {
            if st.abduced[i].0 != pred || st.abduced[i].1.len() != args.len() {
                continue;
            }
            let prior: Vec<Term> =
                st.abduced[i].1.iter().map(|t| st.subst.apply(t)).collect();
            if functional && !forced && prior[..prior.len() - 1] == applied[..args.len() - 1] {
                forced = true;
                alts.clear();
            }
            if forced && prior[..prior.len() - 1] != applied[..args.len() - 1] {
                continue;
            }
            let mut alt = st.clone();
            if args
                .iter()
                .zip(prior.iter())
                .all(|(x, y)| self.unify_global(&mut alt, x, y))
            {
                alts.push(alt);
            }
        }
        if forced {
            return if alts.is_empty() { Step::Fail } else { Step::Branch(alts) };
        }
        let mut fresh = st.clone();
        self.abduce(&mut fresh, pred, args);
        alts.push(fresh);
        Step::Branch(alts)
    }

    fn abduce(&self, st: &mut SearchState, pred: String, args: Vec<Term>) {
        let args: Vec<Term> = args.iter().map(|t| st.subst.apply(t)).collect();
        st.abduced.push((pred, args));
        let ai = st.abduced.len() - 1;
        for wi in 0..st.watches.len() {
            self.fire(st, wi, ai);
        }
    }

    // ---- negative mode -------------------------------------------------

    fn refute(&self, st: &mut SearchState, conj: Vec<Formula>) -> Result<Step, SolveError> {
        // flatten and simplify under the current bindings
        let mut cs: Vec<Formula> = Vec::new();
        let mut pending: VecDeque<Formula> =
            conj.into_iter().map(|f| f.apply(&st.subst)).collect();
        while let Some(f) = pending.pop_front() {
            match f {
                Formula::True => {}
                Formula::False => return Ok(Step::Done), // conjunction already impossible
                Formula::And(fs) => {
                    for g in fs.into_iter().rev() {
                        pending.push_front(g);
                    }
                }
                other => cs.push(other),
            }
        }
        if cs.is_empty() {
            return Ok(Step::Fail); // an empty conjunction holds; it cannot be refuted
        }

        // a disjunct conjunct splits into one refutation per disjunct
        if let Some(i) = cs.iter().position(|f| matches!(f, Formula::Or(_))) {
            let Formula::Or(ds) = cs.remove(i) else { unreachable!() };
            for d in ds {
                let mut c = cs.clone();
                c.insert(i, d);
                st.agenda.push_back(Goal::Refute(c));
            }
            return Ok(Step::Done);
        }

        // a conjunction of nothing but temporal builtins (possibly negated)
        // is not branched over: one way of falsifying it is picked when the
        // time line is labeled, after the structural choices are made
        let is_time = |t: &Term| {
            matches!(t, Term::App(f, _) if f == "int" || f == "ts")
        };
        let numeric = cs.iter().all(|f| match f {
            Formula::Atom(p, _) => is_builtin_predicate(p),
            Formula::Eq(l, r) => is_time(l) && is_time(r),
            Formula::Not(g) => match g.as_ref() {
                Formula::Atom(p, _) => is_builtin_predicate(p),
                Formula::Eq(l, r) => is_time(l) && is_time(r),
                _ => false,
            },
            _ => false,
        });
        if numeric {
            let mut alts: Denial = Vec::new();
            for f in &cs {
                // a positive conjunct contributes one violation alternative
                // per way of breaking it; a negated one contributes the
                // single alternative of making its body hold
                let (inner, positive) = match f {
                    Formula::Not(g) => (g.as_ref(), false),
                    other => (other, true),
                };
                let nums = match inner {
                    Formula::Atom(p, args) => self.builtin_constraints(st, p, args),
                    Formula::Eq(l, r) => self.time_eq_nums(st, l, r),
                    _ => unreachable!(),
                };
                match nums {
                    Err(()) if positive => return Ok(Step::Done), // conjunct impossible
                    Err(()) => {} // the negation always holds
                    Ok(None) => return Ok(Step::Requeue(Goal::Refute(cs))),
                    Ok(Some(nums)) if positive => {
                        for c in &nums {
                            for negc in negate_num(c) {
                                alts.push(vec![negc]);
                            }
                        }
                    }
                    Ok(Some(nums)) => {
                        alts.push(nums.iter().filter_map(num_to_constraint).collect());
                    }
                }
            }
            if alts.is_empty() {
                return Ok(Step::Fail); // the conjunction holds outright
            }
            st.denials.push(alts);
            return Ok(Step::Done);
        }

        // while an open or defined atom can still make progress, numeric
        // conjuncts are left alone so the conjunction can reduce to the
        // purely numeric form above instead of being branched over
        let structural = cs.iter().any(|f| {
            matches!(f, Formula::Atom(p, _) if !is_builtin_predicate(p))
        });

        for i in 0..cs.len() {
            match &cs[i] {
                Formula::Eq(l, r) => {
                    let Some(s2) = unify(l, r, &st.subst) else {
                        return Ok(Step::Done); // arguments clash: conjunction impossible
                    };
                    let new_model_binding = s2
                        .bound_vars()
                        .any(|v| st.subst.get(v).is_none() && !st.universals.contains(v));
                    if new_model_binding {
                        continue; // must wait until the model binds this variable
                    }
                    let rest: Vec<Formula> = cs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f.apply(&s2))
                        .collect();
                    st.agenda.push_back(Goal::Refute(rest));
                    return Ok(Step::Done);
                }
                Formula::Not(g) => {
                    if let Formula::Eq(l, r) = g.as_ref() {
                        if l.is_ground() && r.is_ground() {
                            if l == r {
                                return Ok(Step::Done); // the disequality is false
                            }
                            let rest = without(&cs, i);
                            st.agenda.push_back(Goal::Refute(rest));
                            return Ok(Step::Done);
                        }
                    }
                    if let Formula::Atom(p, gargs) = g.as_ref() {
                        if let Some(ext) = self.closed.get(p) {
                            if gargs.iter().all(Term::is_ground) {
                                if ext.contains(gargs) {
                                    return Ok(Step::Done); // the negation is false
                                }
                                st.agenda.push_back(Goal::Refute(without(&cs, i)));
                                return Ok(Step::Done);
                            }
                        }
                    }
                    if structural
                        && matches!(g.as_ref(), Formula::Atom(p, _) if is_builtin_predicate(p))
                    {
                        continue;
                    }
                    if !self.determined(st, g) {
                        continue;
                    }
                    // not G fails if G holds; otherwise the rest must fail.
                    // Refuting the rest first avoids assuming G's atoms
                    // when the conjunction falls apart elsewhere anyway.
                    if cs.len() == 1 {
                        st.agenda.push_front(Goal::Require((**g).clone()));
                        return Ok(Step::Done);
                    }
                    let mut pos = st.clone();
                    pos.agenda.push_front(Goal::Require((**g).clone()));
                    let mut neg = st.clone();
                    neg.agenda.push_back(Goal::Refute(without(&cs, i)));
                    return Ok(Step::Branch(vec![neg, pos]));
                }
                Formula::Exists(vs, g) => {
                    let g2 = self.rename(st, vs, g, true);
                    let mut rest = without(&cs, i);
                    rest.insert(i, g2);
                    st.agenda.push_back(Goal::Refute(rest));
                    return Ok(Step::Done);
                }
                Formula::Forall(vs, g) => {
                    if !self.determined(st, &cs[i]) {
                        continue;
                    }
                    // refuted if some instance of the body fails,
                    // or if the rest of the conjunction fails
                    let witness = Formula::exists(vs.clone(), negate((**g).clone()));
                    if cs.len() == 1 {
                        st.agenda.push_front(Goal::Require(witness));
                        return Ok(Step::Done);
                    }
                    let mut pos = st.clone();
                    pos.agenda.push_front(Goal::Require(witness));
                    let mut neg = st.clone();
                    neg.agenda.push_back(Goal::Refute(without(&cs, i)));
                    return Ok(Step::Branch(vec![neg, pos]));
                }
                Formula::Atom(p, args)
                    if self.closed.contains_key(p)
                        && (args.iter().all(Term::is_ground) || self.positive.contains(p)) =>
                {
                    let ext = &self.closed[p];
                    if args.iter().all(Term::is_ground) {
                        if ext.contains(args) {
                            // the atom holds: the rest must fail
                            st.agenda.push_back(Goal::Refute(without(&cs, i)));
                        }
                        return Ok(Step::Done);
                    }
                    let tuples: Vec<Vec<Term>> = ext
                        .iter()
                        .filter(|t| t.len() == args.len())
                        .cloned()
                        .collect();
                    let args = args.clone();
                    let rest = without(&cs, i);
                    for tuple in tuples {
                        let mut s2 = st.subst.clone();
                        if !args
                            .iter()
                            .zip(&tuple)
                            .all(|(a, h)| crate::term::unify_in_place(a, h, &mut s2))
                        {
                            continue;
                        }
                        let binds_model_var = s2
                            .bound_vars()
                            .any(|v| st.subst.get(v).is_none() && !st.universals.contains(v));
                        let conj: Vec<Formula> = if binds_model_var {
                            args.iter()
                                .zip(tuple)
                                .map(|(a, h)| Formula::Eq(a.clone(), h))
                                .chain(rest.iter().cloned())
                                .collect()
                        } else {
                            rest.iter().map(|f| f.apply(&s2)).collect()
                        };
                        st.agenda.push_back(Goal::Refute(conj));
                    }
                    return Ok(Step::Done);
                }
                Formula::Atom(p, args) if self.theory.is_defined(p) => {
                    let p = p.clone();
                    let args = args.clone();
                    let rest = without(&cs, i);
                    for (head_args, body) in self.renamed_rules(st, &p, args.len(), true) {
                        // match the head inline where this only binds
                        // rule variables; a clash discharges the instance
                        let mut s2 = st.subst.clone();
                        if !args
                            .iter()
                            .zip(&head_args)
                            .all(|(a, h)| crate::term::unify_in_place(a, h, &mut s2))
                        {
                            continue;
                        }
                        let binds_model_var = s2
                            .bound_vars()
                            .any(|v| st.subst.get(v).is_none() && !st.universals.contains(v));
                        let mut conj: Vec<Formula>;
                        if binds_model_var {
                            conj = args
                                .iter()
                                .zip(head_args)
                                .map(|(a, h)| Formula::Eq(a.clone(), h))
                                .collect();
                            conj.push(body);
                            conj.extend(rest.iter().cloned());
                        } else {
                            conj = vec![body.apply(&s2)];
                            conj.extend(rest.iter().map(|f| f.apply(&s2)));
                        }
                        st.agenda.push_back(Goal::Refute(conj));
                    }
                    return Ok(Step::Done);
                }
                Formula::Atom(p, args) if is_builtin_predicate(p) => {
                    if structural {
                        continue;
                    }
                    match self.builtin_constraints(st, p, args) {
                        Err(()) => return Ok(Step::Done), // ill-typed: cannot hold
                        Ok(None) => continue,             // arguments not determined yet
                        Ok(Some(nums)) => {
                            let rest_empty = cs.len() == 1;
                            let mut alts = Vec::new();
                            // branch per way of violating the constraint
                            for c in &nums {
                                for negc in negate_num(c) {
                                    let mut alt = st.clone();
                                    if alt.store.assert_constraint(negc).is_ok() {
                                        alts.push(alt);
                                    }
                                }
                            }
                            if rest_empty {
                                // the constraint must be violated outright
                                return Ok(Step::Branch(alts));
                            }
                            // or the constraint holds and the rest must fail
                            let mut pos = st.clone();
                            let mut ok = true;
                            for c in &nums {
                                if !assert_num(&mut pos.store, c) {
                                    ok = false;
                                    break;
                                }
                            }
                            if ok {
                                pos.agenda.push_back(Goal::Refute(without(&cs, i)));
                                alts.push(pos);
                            }
                            return Ok(if alts.is_empty() {
                                Step::Done
                            } else {
                                Step::Branch(alts)
                            });
                        }
                    }
                }
                _ => {}
            }
        }

        // blocked: park on the first open atom, to be re-examined per
        // matching abduction
        if let Some(i) = cs.iter().position(
            |f| matches!(f, Formula::Atom(p, _) if !self.theory.is_defined(p) && !is_builtin_predicate(p)),
        ) {
            let Formula::Atom(p, args) = cs.remove(i) else { unreachable!() };
            self.register_watch(st, p, args, cs);
            return Ok(Step::Done);
        }
        Ok(Step::Requeue(Goal::Refute(cs)))
    }

    fn register_watch(
        &self,
        st: &mut SearchState,
        pred: String,
        args: Vec<Term>,
        residual: Vec<Formula>,
    ) {
        st.watches.push(Watch { pred, args, residual });
        let wi = st.watches.len() - 1;
        for ai in 0..st.abduced.len() {
            self.fire(st, wi, ai);
        }
    }

    /// Requires the watched refutation to hold for one abduced atom: the
    /// pattern-vs-atom equalities plus the residual conjuncts must be
    /// jointly impossible. Watch variables are renamed apart per firing.
    fn fire(&self, st: &mut SearchState, wi: usize, ai: usize) {
        if st.watches[wi].pred != st.abduced[ai].0 || !st.fired.insert((wi, ai)) {
            return;
        }
        let w = st.watches[wi].clone();
        let mut vars: Vec<String> = Vec::new();
        for t in &w.args {
            t.vars(&mut vars);
        }
        for f in &w.residual {
            for v in f.free_vars() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        let mut map = HashMap::new();
        for v in vars {
            if st.universals.contains(&v) {
                let n = st.fresh();
                st.universals.insert(n.clone());
                map.insert(v, n);
            }
        }
        let rn = |t: &Term| Formula::Atom(String::new(), vec![t.clone()]).rename(&map);
        let mut conj: Vec<Formula> = w
            .args
            .iter()
            .zip(&st.abduced[ai].1)
            .map(|(pat, actual)| {
                let Formula::Atom(_, mut ts) = rn(pat) else { unreachable!() };
                Formula::Eq(ts.pop().unwrap(), actual.clone())
            })
            .collect();
        conj.extend(w.residual.iter().map(|f| f.rename(&map)));
        st.agenda.push_back(Goal::Refute(conj));
    }

    // ---- shared machinery ----------------------------------------------

    /// Rule heads and bodies of a defined predicate with all rule
    /// variables renamed apart.
    fn renamed_rules(
        &self,
        st: &mut SearchState,
        pred: &str,
        arity: usize,
        universal: bool,
    ) -> Vec<(Vec<Term>, Formula)> {
        let rules = self.theory.definitions.get(pred).cloned().unwrap_or_default();
        let mut out = Vec::with_capacity(rules.len());
        for r in &rules {
            if r.head.1.len() != arity {
                continue;
            }
            let mut vars: Vec<String> = Vec::new();
            for t in &r.head.1 {
                t.vars(&mut vars);
            }
            for v in r.body.free_vars() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            let mut map = HashMap::new();
            for v in vars {
                let n = st.fresh();
                if universal {
                    st.universals.insert(n.clone());
                }
                map.insert(v, n);
            }
            let head = Formula::Atom(pred.to_string(), r.head.1.clone()).rename(&map);
            let Formula::Atom(_, head_args) = head else { unreachable!() };
            out.push((head_args, r.body.rename(&map)));
        }
        out
    }

    fn rename(
        &self,
        st: &mut SearchState,
        vs: &[String],
        body: &Formula,
        universal: bool,
    ) -> Formula {
        let mut map = HashMap::new();
        for v in vs {
            let n = st.fresh();
            if universal {
                st.universals.insert(n.clone());
            }
            map.insert(v.clone(), n);
        }
        body.rename(&map)
    }

    fn unify_global(&self, st: &mut SearchState, l: &Term, r: &Term) -> bool {
        match unify(l, r, &st.subst) {
            None => false,
            Some(s) => {
                st.subst = s;
                self.sync_time(st)
            }
        }
    }

    /// True when the formula contains no free universal variable outside
    /// time-term positions; only then may it be required or split on,
    /// since requiring instantiates variables existentially.
    fn determined(&self, st: &SearchState, f: &Formula) -> bool {
        let mut hard = Vec::new();
        hard_free_vars(f, &mut Vec::new(), &mut hard);
        hard.iter().all(|v| !st.universals.contains(v))
    }

    // ---- temporal layer ------------------------------------------------

    fn assert_builtin(&self, st: &mut SearchState, p: &str, args: &[Term]) -> Result<bool, ()> {
        match self.builtin_constraints(st, p, args) {
            Err(()) => Err(()),
            Ok(None) => Ok(false),
            Ok(Some(nums)) => {
                for c in &nums {
                    if !assert_num(&mut st.store, c) {
                        return Err(());
                    }
                }
                Ok(true)
            }
        }
    }

    /// Component equality constraints between two explicit time terms.
    fn time_eq_nums(
        &self,
        st: &mut SearchState,
        l: &Term,
        r: &Term,
    ) -> Result<Option<Vec<NumConstraint<VarId>>>, ()> {
        let (l, r) = (st.subst.apply(l), st.subst.apply(r));
        match (&l, &r) {
            (Term::App(f, _), Term::App(g, _)) if f == "int" && g == "int" => {
                let Some(a) = self.interval_ends(st, &l)? else { return Ok(None) };
                let Some(b) = self.interval_ends(st, &r)? else { return Ok(None) };
                Ok(Some(vec![
                    NumConstraint::Eq(a.start, b.start),
                    NumConstraint::Eq(a.end, b.end),
                ]))
            }
            (Term::App(f, _), Term::App(g, _)) if f == "ts" && g == "ts" => Ok(Some(vec![
                NumConstraint::Eq(self.point_var(st, &l)?, self.point_var(st, &r)?),
            ])),
            _ => Err(()), // an interval is never a time stamp
        }
    }

    /// Endpoint constraints of a builtin atom. `Ok(None)` means the
    /// arguments are not determined enough yet; `Err` means the atom can
    /// never hold (a non-interval in an interval position).
    fn builtin_constraints(
        &self,
        st: &mut SearchState,
        p: &str,
        args: &[Term],
    ) -> Result<Option<Vec<NumConstraint<VarId>>>, ()> {
        match p {
            "int" => Ok(self.interval_ends(st, &args[0])?.map(|_| Vec::new())),
            "hour_of_day" => {
                let n = match st.subst.apply(&args[1]) {
                    Term::Int(n) => n,
                    Term::Var(_) => return Ok(None),
                    _ => return Err(()),
                };
                if !(0..24).contains(&n) {
                    return Err(());
                }
                let Some(ends) = self.interval_ends(st, &args[0])? else {
                    return Ok(None);
                };
                Ok(Some(temporal::compile_hour_of_day(ends, n)))
            }
            "day_a" | "hour" | "point" | "bounded" => {
                let Some(ends) = self.interval_ends(st, &args[0])? else {
                    return Ok(None);
                };
                Ok(Some(temporal::compile_property(p, ends).map_err(|_| ())?))
            }
            _ => {
                let tag = TemporalRelation::from_name(p).ok_or(())?;
                let Some(i1) = self.interval_ends(st, &args[0])? else {
                    return Ok(None);
                };
                let Some(i2) = self.interval_ends(st, &args[1])? else {
                    return Ok(None);
                };
                Ok(Some(temporal::compile_relation(tag, i1, i2)))
            }
        }
    }

    /// Resolves a term in interval position to its endpoint variables,
    /// instantiating an unbound (existential) variable with a fresh
    /// interval skeleton.
    fn interval_ends(
        &self,
        st: &mut SearchState,
        t: &Term,
    ) -> Result<Option<IntervalEnds<VarId>>, ()> {
        let applied = st.subst.apply(t);
        match applied {
            Term::App(ref f, ref parts) if f == "int" && parts.len() == 2 => {
                let start = self.point_var(st, &parts[0])?;
                let end = self.point_var(st, &parts[1])?;
                // intervals are half-open and well-formed only when nonempty
                if st.store.assert_constraint(Constraint::Lt(start, end)).is_err() {
                    return Err(());
                }
                Ok(Some(IntervalEnds { start, end }))
            }
            Term::Var(ref v) => {
                if st.universals.contains(v) {
                    return Ok(None); // a universal variable cannot be skeletonized
                }
                let skel = Term::app(
                    "int",
                    vec![
                        Term::app("ts", (0..4).map(|_| Term::var(st.fresh())).collect()),
                        Term::app("ts", (0..4).map(|_| Term::var(st.fresh())).collect()),
                    ],
                );
                if !self.unify_global(st, &applied, &skel) {
                    return Err(());
                }
                self.interval_ends(st, &skel)
            }
            _ => Err(()),
        }
    }

    /// Hour-index variable of a calendar point term, shared across equal
    /// terms.
    fn point_var(&self, st: &mut SearchState, t: &Term) -> Result<VarId, ()> {
        let applied = st.subst.apply(t);
        if let Some(e) = st.ts_entries.iter().find(|e| e.last == applied) {
            return Ok(e.var);
        }
        let var = st.store.new_var(None, None).map_err(|_| ())?;
        st.ts_entries.push(TsEntry { term: applied.clone(), var, last: applied });
        let i = st.ts_entries.len() - 1;
        if !self.assert_point_bounds(st, i) {
            return Err(());
        }
        Ok(var)
    }

    /// Re-examines every known point term after a unification: newly
    /// instantiated components become index bounds, and terms that have
    /// become equal get their index variables equated.
    fn sync_time(&self, st: &mut SearchState) -> bool {
        for i in 0..st.ts_entries.len() {
            let applied = st.subst.apply(&st.ts_entries[i].term);
            if applied != st.ts_entries[i].last {
                st.ts_entries[i].last = applied;
                if !self.assert_point_bounds(st, i) {
                    return false;
                }
            }
        }
        for i in 0..st.ts_entries.len() {
            for j in i + 1..st.ts_entries.len() {
                let (vi, vj) = (st.ts_entries[i].var, st.ts_entries[j].var);
                if vi != vj
                    && st.ts_entries[i].last == st.ts_entries[j].last
                    && st.merged.insert((vi, vj))
                    && st.store.assert_constraint(Constraint::Eq(vi, vj)).is_err()
                {
                    return false;
                }
            }
        }
        true
    }

    /// Index constraints implied by the ground components of a point term.
    fn assert_point_bounds(&self, st: &mut SearchState, i: usize) -> bool {
        let Term::App(f, parts) = &st.ts_entries[i].last else {
            return true; // still a bare variable
        };
        if f != "ts" || parts.len() != 4 {
            return false; // a non-point term in point position never holds
        }
        let var = st.ts_entries[i].var;
        let g = |t: &Term| match t {
            Term::Int(n) => Some(*n),
            _ => None,
        };
        let (y, m, d, h) = (g(&parts[0]), g(&parts[1]), g(&parts[2]), g(&parts[3]));
        let mut cs: Vec<Constraint> = Vec::new();
        match (y, m, d, h) {
            (Some(y), Some(m), Some(d), Some(h)) => {
                if !valid_date(y, m, d, h) {
                    return false;
                }
                cs.push(Constraint::EqConst(var, hour_index(y, m, d, h)));
            }
            (Some(y), Some(m), Some(d), None) => {
                if !valid_date(y, m, d, 0) {
                    return false;
                }
                cs.push(Constraint::GeConst(var, hour_index(y, m, d, 0)));
                cs.push(Constraint::LeConst(var, hour_index(y, m, d, 23)));
            }
            (Some(y), Some(m), None, _) => {
                if !(1..=12).contains(&m) {
                    return false;
                }
                cs.push(Constraint::GeConst(var, hour_index(y, m, 1, 0)));
                cs.push(Constraint::LeConst(var, hour_index(y, m, days_in_month(y, m), 23)));
            }
            (Some(y), None, _, _) => {
                cs.push(Constraint::GeConst(var, hour_index(y, 1, 1, 0)));
                cs.push(Constraint::LeConst(var, hour_index(y, 12, 31, 23)));
            }
            _ => {}
        }
        if let (Some(h), None) = (h, d.and(m).and(y)) {
            if !(0..24).contains(&h) {
                return false;
            }
            cs.push(Constraint::ModEq(var, h));
        }
        cs.into_iter().all(|c| st.store.assert_constraint(c).is_ok())
    }

    // ---- model construction ---------------------------------------------

    /// Labels the time line so that every parked denial is falsified:
    /// depth-first over one violation alternative per denial.
    fn label_denials(&self, st: &SearchState) -> Option<Vec<i64>> {
        let mut stack: Vec<(Store, usize)> = vec![(st.store.clone(), 0)];
        while let Some((s, i)) = stack.pop() {
            match st.denials.get(i) {
                None => {
                    if let Ok(values) = s.label(&self.opts.labeling) {
                        return Some(values);
                    }
                }
                Some(alts) => {
                    for alt in alts {
                        let mut s2 = s.clone();
                        if alt.iter().all(|c| s2.assert_constraint(c.clone()).is_ok()) {
                            stack.push((s2, i + 1));
                        }
                    }
                }
            }
        }
        None
    }

    fn build_model(&self, st: &SearchState) -> Option<AbductiveModel> {
        let values = self.label_denials(st)?;
        // back-fill labeled indices into the calendar components
        let mut final_subst = st.subst.clone();
        for e in &st.ts_entries {
            let applied = final_subst.apply(&e.term);
            let (y, m, d, h) = from_hour_index(values[e.var.0 - 1]);
            let ground = Term::app(
                "ts",
                vec![Term::Int(y), Term::Int(m), Term::Int(d), Term::Int(h)],
            );
            final_subst = unify(&applied, &ground, &final_subst)?;
        }
        let mut abduced: BTreeMap<String, BTreeSet<Vec<Term>>> = BTreeMap::new();
        for (p, args) in &st.abduced {
            let args: Vec<Term> = args.iter().map(|t| final_subst.apply(t)).collect();
            if args.iter().any(|t| !t.is_ground()) {
                return None; // an unconstrained variable survived labeling
            }
            abduced.entry(p.clone()).or_default().insert(args);
        }
        let mut negative_assumptions = BTreeSet::new();
        for w in &st.watches {
            if !w.residual.is_empty() {
                continue;
            }
            let args: Vec<Term> = w.args.iter().map(|t| final_subst.apply(t)).collect();
            if args.iter().all(|t| t.is_ground()) {
                if abduced.get(&w.pred).is_some_and(|s| s.contains(&args)) {
                    return None; // assumed false yet abduced: not a model
                }
                negative_assumptions.insert((w.pred.clone(), args));
            }
        }
        Some(AbductiveModel { abduced, assignment: values, negative_assumptions })
    }
}

fn without(cs: &[Formula], i: usize) -> Vec<Formula> {
    cs.iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, f)| f.clone())
        .collect()
}

/// The store form of an endpoint constraint; `Finite` holds of every
/// index variable and maps to nothing.
fn num_to_constraint(c: &NumConstraint<VarId>) -> Option<Constraint> {
    Some(match *c {
        NumConstraint::Le(a, b) => Constraint::Le(a, b),
        NumConstraint::Lt(a, b) => Constraint::Lt(a, b),
        NumConstraint::Eq(a, b) => Constraint::Eq(a, b),
        NumConstraint::OffsetEq(a, b, c) => Constraint::OffsetEq(a, b, c),
        NumConstraint::ModEq(a, r) => Constraint::ModEq(a, r),
        NumConstraint::Finite(_) => return None,
    })
}

fn assert_num(store: &mut Store, c: &NumConstraint<VarId>) -> bool {
    match num_to_constraint(c) {
        Some(mapped) => store.assert_constraint(mapped).is_ok(),
        None => true,
    }
}

/// Ways a single endpoint constraint can be violated.
fn negate_num(c: &NumConstraint<VarId>) -> Vec<Constraint> {
    match *c {
        NumConstraint::Le(a, b) => vec![Constraint::Lt(b, a)],
        NumConstraint::Lt(a, b) => vec![Constraint::Le(b, a)],
        NumConstraint::Eq(a, b) => vec![Constraint::Lt(a, b), Constraint::Lt(b, a)],
        NumConstraint::OffsetEq(a, b, c) => vec![
            Constraint::DiffLe(b, a, c - 1),
            Constraint::DiffLe(a, b, -c - 1),
        ],
        NumConstraint::ModEq(a, r) => vec![Constraint::ModNeq(a, r)],
        NumConstraint::Finite(_) => Vec::new(),
    }
}

fn describe_goal(g: &Goal) -> String {
    match g {
        Goal::Require(f) => format!("{f}"),
        Goal::Refute(cs) => {
            let parts: Vec<String> = cs.iter().map(|f| format!("{f}")).collect();
            format!("not ({})", parts.join(" & "))
        }
    }
}

/// Simplifying single-step negation.
fn negate(f: Formula) -> Formula {
    match f {
        Formula::Not(g) => *g,
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        other => Formula::not(other),
    }
}

/// Free variables outside time-term positions (components of `ts`/`int`
/// terms are carried by the constraint store instead).
fn hard_free_vars(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
    fn term_vars(t: &Term, bound: &[String], out: &mut Vec<String>) {
        match t {
            Term::Var(v) => {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Int(_) => {}
            Term::App(f, args) => {
                if f == "ts" || f == "int" {
                    return;
                }
                for a in args {
                    term_vars(a, bound, out);
                }
            }
        }
    }
    match f {
        Formula::Atom(_, args) => {
            for a in args {
                term_vars(a, bound, out);
            }
        }
        Formula::Eq(l, r) => {
            term_vars(l, bound, out);
            term_vars(r, bound, out);
        }
        Formula::True | Formula::False => {}
        Formula::Not(g) => hard_free_vars(g, bound, out),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                hard_free_vars(g, bound, out);
            }
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            hard_free_vars(a, bound, out);
            hard_free_vars(b, bound, out);
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let n = bound.len();
            bound.extend(vs.iter().cloned());
            hard_free_vars(g, bound, out);
            bound.truncate(n);
        }
    }
}

/// Disjunction of conjunctions equivalent to the formula.
fn pos_dnf(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::True => vec![vec![]],
        Formula::False => vec![],
        Formula::And(fs) => cross(fs.iter().map(pos_dnf).collect()),
        Formula::Or(fs) => fs.iter().flat_map(pos_dnf).collect(),
        Formula::Not(g) => neg_dnf(g),
        Formula::Implies(a, b) => {
            let mut out = neg_dnf(a);
            out.extend(pos_dnf(b));
            out
        }
        Formula::Iff(a, b) => {
            let mut out = cross(vec![pos_dnf(a), pos_dnf(b)]);
            out.extend(cross(vec![neg_dnf(a), neg_dnf(b)]));
            out
        }
        Formula::Exists(vs, g) => pos_dnf(g)
            .into_iter()
            .map(|c| vec![Formula::exists(vs.clone(), Formula::and(c))])
            .collect(),
        Formula::Forall(..) | Formula::Atom(..) | Formula::Eq(..) => vec![vec![f.clone()]],
    }
}

/// Disjunction of conjunctions equivalent to the formula's negation.
fn neg_dnf(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::True => vec![],
        Formula::False => vec![vec![]],
        Formula::And(fs) => fs.iter().flat_map(neg_dnf).collect(),
        Formula::Or(fs) => cross(fs.iter().map(neg_dnf).collect()),
        Formula::Not(g) => pos_dnf(g),
        Formula::Implies(a, b) => cross(vec![pos_dnf(a), neg_dnf(b)]),
        Formula::Iff(a, b) => {
            let mut out = cross(vec![pos_dnf(a), neg_dnf(b)]);
            out.extend(cross(vec![neg_dnf(a), pos_dnf(b)]));
            out
        }
        Formula::Exists(vs, g) => {
            // the negation of an existential asserts the body fails
            // everywhere; kept as a universal conjunct
            vec![vec![Formula::forall(vs.clone(), negate((**g).clone()))]]
        }
        Formula::Forall(vs, g) => neg_dnf(g)
            .into_iter()
            .map(|c| vec![Formula::exists(vs.clone(), Formula::and(c))])
            .collect(),
        Formula::Atom(..) | Formula::Eq(..) => vec![vec![Formula::not(f.clone())]],
    }
}

fn cross(parts: Vec<Vec<Vec<Formula>>>) -> Vec<Vec<Formula>> {
    let mut acc: Vec<Vec<Formula>> = vec![vec![]];
    for p in parts {
        let mut next = Vec::new();
        for base in &acc {
            for conj in &p {
                let mut c = base.clone();
                c.extend(conj.iter().cloned());
                next.push(c);
            }
        }
        acc = next;
    }
    acc
}

/// Identity of a branch up to time labeling: abduced atoms with variables
/// and calendar points wiped, sorted.
/// Whether every entry of sorted key `a` occurs in sorted key `b`.
fn key_subset(a: &[(String, String)], b: &[(String, String)]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

fn structural_key(st: &SearchState) -> Vec<(String, String)> {
    fn wipe(t: &Term) -> Term {
        match t {
            Term::Var(_) => Term::var("_"),
            Term::Int(n) => Term::Int(*n),
            Term::App(f, args) => {
                if f == "ts" {
                    Term::constant("ts")
                } else {
                    Term::App(f.clone(), args.iter().map(wipe).collect())
                }
            }
        }
    }
    let mut key: Vec<(String, String)> = st
        .abduced
        .iter()
        .map(|(p, args)| {
            let wiped: Vec<String> = args
                .iter()
                .map(|t| wipe(&st.subst.apply(t)).to_string())
                .collect();
            (p.clone(), wiped.join(","))
        })
        .collect();
    key.sort();
    key.dedup();
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_theory;
    use crate::parse::parse_formula;

    fn opts(max: usize) -> SolveOptions {
        SolveOptions { max_models: max, ..SolveOptions::default() }
    }

    fn run(theory: &str, query: Option<&str>, max: usize) -> Enumeration {
        let t = parse_theory(theory).unwrap();
        let q = query.map(|q| parse_formula(q).unwrap());
        enumerate(&t, q.as_ref(), &opts(max)).unwrap()
    }

    #[test]
    fn abduction_over_a_defined_domain() {
        let e = run("dom(a). dom(b). fol exists(X)$ dom(X) & p(X).", None, 10);
        assert_eq!(e.models.len(), 2);
        assert!(e.models[0].contains("p", &[Term::constant("a")]));
        assert!(e.models[1].contains("p", &[Term::constant("b")]));
        assert!(e.floundered.is_none());
    }

    #[test]
    fn denial_blocks_abduction() {
        let e = run(
            "dom(a). fol forall(X)$ p(X) => false. fol exists(X)$ dom(X) & p(X).",
            None,
            10,
        );
        assert!(e.models.is_empty());
        assert!(e.floundered.is_none());
    }

    #[test]
    fn completion_only_if_direction() {
        // h is defined by p alone, so "not h(a)" forbids p(a)
        let e = run("h(X) <- p(X). fol not h(a). fol p(a).", None, 10);
        assert!(e.models.is_empty());
        let e2 = run("h(X) <- p(X). fol not h(a). fol p(b).", None, 10);
        assert_eq!(e2.models.len(), 1);
        assert!(e2.models[0]
            .negative_assumptions
            .contains(&("p".to_string(), vec![Term::constant("a")])));
    }

    #[test]
    fn universal_axiom_fires_on_later_abduction() {
        // every p must be accompanied by q; q is abduced on demand
        let e = run("fol forall(X)$ p(X) => q(X). fol p(a).", None, 10);
        assert_eq!(e.models.len(), 1);
        assert!(e.models[0].contains("q", &[Term::constant("a")]));
    }

    #[test]
    fn open_function_is_total_and_functional() {
        let e = run(
            "dom(a). dom(b). rng(u). rng(v). of f:: dom(_) -> rng(_).",
            None,
            100,
        );
        // 2 choices for each of the 2 domain elements
        assert_eq!(e.models.len(), 4);
        for m in &e.models {
            let f = &m.abduced["f"];
            assert_eq!(f.len(), 2);
            let firsts: BTreeSet<&Term> = f.iter().map(|a| &a[0]).collect();
            assert_eq!(firsts.len(), 2);
        }
    }

    #[test]
    fn interval_query_is_labeled() {
        let q = "before(int(ts(2000,1,1,0),ts(2000,1,2,0)), T) & day_a(T)";
        let e = run("", Some(q), 1);
        assert_eq!(e.models.len(), 1, "{:?}", e.floundered);
    }

    #[test]
    fn contradictory_interval_query_is_unsatisfiable() {
        let q = "before(int(ts(2000,1,2,0),ts(2000,1,3,0)), T) \
                 & before(T, int(ts(2000,1,1,0),ts(2000,1,2,0))) & point(T)";
        let e = run("", Some(q), 1);
        assert!(e.models.is_empty());
        assert!(e.floundered.is_none());
    }

    #[test]
    fn equality_constraint_axiom_filters_function_choices() {
        // f maps a to some rng element, but an axiom pins the image
        let e = run(
            "dom(a). rng(u). rng(v). of f:: dom(_) -> rng(_). \
             fol forall(X,Y)$ f(X,Y) => Y = u.",
            None,
            10,
        );
        assert_eq!(e.models.len(), 1);
        assert!(e.models[0].contains("f", &[Term::constant("a"), Term::constant("u")]));
    }

    #[test]
    fn node_limit_is_an_error() {
        let t = parse_theory("dom(a). fol exists(X)$ dom(X) & p(X).").unwrap();
        let tight = SolveOptions { node_limit: 3, ..SolveOptions::default() };
        assert_eq!(enumerate(&t, None, &tight), Err(SolveError::NodeLimit(3)));
    }

    #[test]
    fn shared_time_terms_share_index_variables() {
        // two atoms naming the same point must label identically
        let q = "hour(int(ts(Y,M,D,H),E)) & within(int(ts(Y,M,D,H),E), \
                 int(ts(2001,6,1,0),ts(2001,6,2,0)))";
        let e = run("", Some(q), 1);
        assert_eq!(e.models.len(), 1);
    }

    #[test]
    fn negated_open_atom_backtracks_to_alternative() {
        let e = run(
            "dom(a). dom(b). fol not p(a). fol exists(X)$ dom(X) & p(X).",
            None,
            10,
        );
        assert_eq!(e.models.len(), 1);
        assert!(e.models[0].contains("p", &[Term::constant("b")]));
    }
}
