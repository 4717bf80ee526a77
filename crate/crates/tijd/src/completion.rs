//! Completion semantics: a definition's rules are read as an exhaustive
//! case analysis, and an open-function declaration abbreviates its
//! totality, functionality and typing axioms.

use crate::formula::{Formula, OpenFunctionDecl, Rule};
use crate::term::Term;

/// Builds the completed equivalence for a defined predicate:
///
/// ```text
/// forall(Z1,...,Zn)$ p(Z1,...,Zn) <=>
///     (exists(vars_1)$ Z1 = t11 & ... & Zn = t1n & body_1)
///   ; ...
/// ```
///
/// The universal variables are chosen fresh with respect to every rule.
/// A predicate with no rules completes to an equivalence with `false`.
pub fn complete(pred: &str, arity: usize, rules: &[Rule]) -> Formula {
    let mut used: Vec<String> = Vec::new();
    for r in rules {
        for t in &r.head.1 {
            t.vars(&mut used);
        }
        for v in r.body.free_vars() {
            if !used.contains(&v) {
                used.push(v);
            }
        }
    }
    let mut z_vars = Vec::with_capacity(arity);
    let mut n = 0usize;
    while z_vars.len() < arity {
        n += 1;
        let cand = format!("Z{n}");
        if !used.contains(&cand) {
            z_vars.push(cand);
        }
    }

    let mut disjuncts = Vec::with_capacity(rules.len());
    for r in rules {
        debug_assert_eq!(r.head.1.len(), arity);
        let mut rule_vars: Vec<String> = Vec::new();
        for t in &r.head.1 {
            t.vars(&mut rule_vars);
        }
        for v in r.body.free_vars() {
            if !rule_vars.contains(&v) {
                rule_vars.push(v);
            }
        }
        let mut conj: Vec<Formula> = z_vars
            .iter()
            .zip(&r.head.1)
            .map(|(z, t)| Formula::Eq(Term::var(z.clone()), t.clone()))
            .collect();
        if r.body != Formula::True {
            conj.push(r.body.clone());
        }
        disjuncts.push(Formula::exists(rule_vars, Formula::and(conj)));
    }

    let head = Formula::atom(pred, z_vars.iter().map(|z| Term::var(z.clone())).collect());
    Formula::forall(
        z_vars,
        Formula::Iff(Box::new(head), Box::new(Formula::or(disjuncts))),
    )
}

/// Expands `of f:: d1(_), ..., dn(_) -> r(_).` into exactly three axioms:
/// every domain tuple has an image of the range type, images are unique,
/// and every tuple in the graph is well typed.
pub fn expand_open_function(decl: &OpenFunctionDecl) -> Vec<Formula> {
    let n = decl.domain_types.len();
    let xs: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    let x_terms: Vec<Term> = xs.iter().map(|x| Term::var(x.clone())).collect();
    let typed = |terms: &[Term]| -> Vec<Formula> {
        decl.domain_types
            .iter()
            .zip(terms)
            .map(|(d, t)| Formula::atom(d.clone(), vec![t.clone()]))
            .collect()
    };
    let graph = |y: &str| {
        let mut args = x_terms.clone();
        args.push(Term::var(y));
        Formula::atom(decl.name.clone(), args)
    };

    let totality = Formula::forall(
        xs.clone(),
        Formula::Implies(
            Box::new(Formula::and(typed(&x_terms))),
            Box::new(Formula::exists(
                vec!["Y".to_string()],
                // range type first: the image is typed before it is used
                Formula::and(vec![
                    Formula::atom(decl.range_type.clone(), vec![Term::var("Y")]),
                    graph("Y"),
                ]),
            )),
        ),
    );

    let mut fun_vars = xs.clone();
    fun_vars.push("Y1".to_string());
    fun_vars.push("Y2".to_string());
    let functionality = Formula::forall(
        fun_vars,
        Formula::Implies(
            Box::new(Formula::and(vec![graph("Y1"), graph("Y2")])),
            Box::new(Formula::Eq(Term::var("Y1"), Term::var("Y2"))),
        ),
    );

    let mut typ_vars = xs;
    typ_vars.push("Y".to_string());
    let mut typing_conj = typed(&x_terms);
    typing_conj.push(Formula::atom(decl.range_type.clone(), vec![Term::var("Y")]));
    let typing = Formula::forall(
        typ_vars,
        Formula::Implies(Box::new(graph("Y")), Box::new(Formula::and(typing_conj))),
    );

    vec![totality, functionality, typing]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    // A ground evaluator over a finite interpretation, used as an oracle
    // against the completed formulas.
    struct Interp {
        domain: Vec<Term>,
        atoms: HashSet<(String, Vec<Term>)>,
    }

    fn subst(t: &Term, env: &HashMap<String, Term>) -> Term {
        match t {
            Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Int(_) => t.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| subst(a, env)).collect())
            }
        }
    }

    fn eval(f: &Formula, i: &Interp, env: &mut HashMap<String, Term>) -> bool {
        match f {
            Formula::Atom(p, args) => {
                let key = (p.clone(), args.iter().map(|a| subst(a, env)).collect());
                i.atoms.contains(&key)
            }
            Formula::Eq(l, r) => subst(l, env) == subst(r, env),
            Formula::True => true,
            Formula::False => false,
            Formula::Not(g) => !eval(g, i, env),
            Formula::And(fs) => fs.iter().all(|g| eval(g, i, env)),
            Formula::Or(fs) => fs.iter().any(|g| eval(g, i, env)),
            Formula::Implies(a, b) => !eval(a, i, env) || eval(b, i, env),
            Formula::Iff(a, b) => eval(a, i, env) == eval(b, i, env),
            Formula::Exists(vs, g) => eval_quant(vs, g, i, env, true),
            Formula::Forall(vs, g) => eval_quant(vs, g, i, env, false),
        }
    }

    fn eval_quant(
        vs: &[String],
        g: &Formula,
        i: &Interp,
        env: &mut HashMap<String, Term>,
        existential: bool,
    ) -> bool {
        if vs.is_empty() {
            return eval(g, i, env);
        }
        let (v, rest) = (&vs[0], &vs[1..]);
        let old = env.get(v).cloned();
        let mut found = !existential;
        for d in &i.domain {
            env.insert(v.clone(), d.clone());
            let r = eval_quant(rest, g, i, env, existential);
            if r == existential {
                found = existential;
                break;
            }
        }
        match old {
            Some(t) => {
                env.insert(v.clone(), t);
            }
            None => {
                env.remove(v);
            }
        }
        found
    }

    // Extension of a defined predicate computed directly from the rules:
    // the set of head instances whose body holds.
    fn rule_extension(
        arity: usize,
        rules: &[Rule],
        i: &Interp,
    ) -> HashSet<Vec<Term>> {
        let mut out = HashSet::new();
        for r in rules {
            let mut vars: Vec<String> = Vec::new();
            for t in &r.head.1 {
                t.vars(&mut vars);
            }
            for v in r.body.free_vars() {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            let mut env = HashMap::new();
            enumerate_envs(&vars, 0, i, &mut env, &mut |env| {
                if eval(&r.body, i, &mut env.clone()) {
                    let tuple: Vec<Term> = r.head.1.iter().map(|t| subst(t, env)).collect();
                    if tuple.iter().all(|t| t.is_ground()) {
                        out.insert(tuple);
                    }
                }
            });
            debug_assert_eq!(r.head.1.len(), arity);
        }
        out
    }

    fn enumerate_envs(
        vars: &[String],
        k: usize,
        i: &Interp,
        env: &mut HashMap<String, Term>,
        f: &mut impl FnMut(&HashMap<String, Term>),
    ) {
        if k == vars.len() {
            f(env);
            return;
        }
        for d in i.domain.clone() {
            env.insert(vars[k].clone(), d);
            enumerate_envs(vars, k + 1, i, env, f);
        }
        env.remove(&vars[k]);
    }

    fn completion_matches_rules(pred: &str, arity: usize, rules: &[Rule], i: &Interp) {
        let completed = complete(pred, arity, rules);
        let holds = eval(&completed, i, &mut HashMap::new());
        let expected = rule_extension(arity, rules, i);
        let actual: HashSet<Vec<Term>> = i
            .atoms
            .iter()
            .filter(|(p, _)| p == pred)
            .map(|(_, args)| args.clone())
            .collect();
        assert_eq!(
            holds,
            expected == actual,
            "completion truth disagrees with rule extension for {pred}: {completed}"
        );
    }

    fn consts(names: &[&str]) -> Vec<Term> {
        names.iter().map(|n| Term::constant(*n)).collect()
    }

    #[test]
    fn empty_definition_completes_to_false() {
        let f = complete("p", 1, &[]);
        let i = Interp { domain: consts(&["a"]), atoms: HashSet::new() };
        assert!(eval(&f, &i, &mut HashMap::new()));
        let i2 = Interp {
            domain: consts(&["a"]),
            atoms: [("p".to_string(), consts(&["a"]))].into_iter().collect(),
        };
        assert!(!eval(&f, &i2, &mut HashMap::new()));
    }

    #[test]
    fn completion_is_an_equivalence_not_just_sufficiency() {
        // p(X) <- q(X). with p(b) true but q(b) false must violate it.
        let rules = vec![Rule {
            head: ("p".into(), vec![Term::var("X")]),
            body: Formula::atom("q", vec![Term::var("X")]),
        }];
        let f = complete("p", 1, &rules);
        let i = Interp {
            domain: consts(&["a", "b"]),
            atoms: [
                ("q".to_string(), consts(&["a"])),
                ("p".to_string(), consts(&["a"])),
                ("p".to_string(), consts(&["b"])),
            ]
            .into_iter()
            .collect(),
        };
        assert!(!eval(&f, &i, &mut HashMap::new()));
    }

    #[test]
    fn fresh_universals_avoid_rule_variables() {
        // a rule that already uses Z1 must not capture the new universals
        let rules = vec![Rule {
            head: ("p".into(), vec![Term::var("Z1")]),
            body: Formula::atom("q", vec![Term::var("Z1")]),
        }];
        let f = complete("p", 1, &rules);
        if let Formula::Forall(vs, _) = &f {
            assert!(!vs.contains(&"Z1".to_string()));
        } else {
            panic!("expected a universally quantified equivalence");
        }
    }

    #[test]
    fn open_function_expands_to_three_axioms() {
        let decl = OpenFunctionDecl {
            name: "sittime".into(),
            domain_types: vec!["event".into()],
            range_type: "int".into(),
        };
        let axioms = expand_open_function(&decl);
        assert_eq!(axioms.len(), 3);
        // functionality alone: two images for one argument violate it
        let i = Interp {
            domain: consts(&["e", "t1", "t2"]),
            atoms: [
                ("sittime".to_string(), consts(&["e", "t1"])),
                ("sittime".to_string(), consts(&["e", "t2"])),
            ]
            .into_iter()
            .collect(),
        };
        assert!(!eval(&axioms[1], &i, &mut HashMap::new()));
        // typing: a graph tuple without its domain type violates axiom 3
        let i2 = Interp {
            domain: consts(&["e", "t1"]),
            atoms: [
                ("sittime".to_string(), consts(&["e", "t1"])),
                ("int".to_string(), consts(&["t1"])),
            ]
            .into_iter()
            .collect(),
        };
        assert!(!eval(&axioms[2], &i2, &mut HashMap::new()));
        // totality: a typed element without an image violates axiom 1
        let i3 = Interp {
            domain: consts(&["e"]),
            atoms: [("event".to_string(), consts(&["e"]))].into_iter().collect(),
        };
        assert!(!eval(&axioms[0], &i3, &mut HashMap::new()));
        // a proper graph satisfies all three
        let i4 = Interp {
            domain: consts(&["e", "t1"]),
            atoms: [
                ("event".to_string(), consts(&["e"])),
                ("int".to_string(), consts(&["t1"])),
                ("sittime".to_string(), consts(&["e", "t1"])),
            ]
            .into_iter()
            .collect(),
        };
        for a in &axioms {
            assert!(eval(a, &i4, &mut HashMap::new()), "{a}");
        }
    }

    #[test]
    fn zero_domain_function_is_a_typed_constant() {
        let decl = OpenFunctionDecl {
            name: "s_time".into(),
            domain_types: vec![],
            range_type: "int".into(),
        };
        let axioms = expand_open_function(&decl);
        assert_eq!(axioms.len(), 3);
        let i = Interp {
            domain: consts(&["t"]),
            atoms: [
                ("int".to_string(), consts(&["t"])),
                ("s_time".to_string(), consts(&["t"])),
            ]
            .into_iter()
            .collect(),
        };
        for a in &axioms {
            assert!(eval(a, &i, &mut HashMap::new()), "{a}");
        }
        let empty = Interp { domain: consts(&["t"]), atoms: HashSet::new() };
        assert!(!eval(&axioms[0], &empty, &mut HashMap::new()));
    }

    // Randomized agreement between the completed formula and a direct
    // rule-extension oracle over all interpretations of a tiny signature.
    #[test]
    fn completion_agrees_with_rule_extension_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let domain = consts(&["a", "b"]);
        for _ in 0..60 {
            // random rules for p/1 over open q/1, r/2
            let n_rules = rng.gen_range(0..=2);
            let mut rules = Vec::new();
            for _ in 0..n_rules {
                let head_arg = if rng.gen_bool(0.5) {
                    Term::var("X")
                } else {
                    domain[rng.gen_range(0..2)].clone()
                };
                let lit = |rng: &mut ChaCha8Rng| {
                    let a = if rng.gen_bool(0.5) {
                        Term::var("X")
                    } else {
                        Term::var("Y")
                    };
                    if rng.gen_bool(0.5) {
                        Formula::atom("q", vec![a])
                    } else {
                        Formula::atom("r", vec![a, Term::var("Y")])
                    }
                };
                let mut body = lit(&mut rng);
                if rng.gen_bool(0.5) {
                    let second = lit(&mut rng);
                    body = if rng.gen_bool(0.5) {
                        Formula::and(vec![body, second])
                    } else {
                        Formula::or(vec![body, second])
                    };
                }
                if rng.gen_bool(0.3) {
                    body = Formula::not(body);
                }
                rules.push(Rule { head: ("p".into(), vec![head_arg]), body });
            }
            // all interpretations: p ⊆ D, q ⊆ D, r ⊆ D², 2·2·16 = 256
            for mask in 0u32..256 {
                let mut atoms = HashSet::new();
                for (bit, t) in domain.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        atoms.insert(("p".to_string(), vec![t.clone()]));
                    }
                    if mask & (1 << (2 + bit)) != 0 {
                        atoms.insert(("q".to_string(), vec![t.clone()]));
                    }
                }
                for (k, (t1, t2)) in domain
                    .iter()
                    .flat_map(|t1| domain.iter().map(move |t2| (t1, t2)))
                    .enumerate()
                {
                    if mask & (1 << (4 + k)) != 0 {
                        atoms.insert(("r".to_string(), vec![t1.clone(), t2.clone()]));
                    }
                }
                let i = Interp { domain: domain.clone(), atoms };
                completion_matches_rules("p", 1, &rules, &i);
            }
        }
    }
}
