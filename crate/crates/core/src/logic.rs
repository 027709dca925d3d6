//! Classical reading of views and an exact entailment check for the monadic
//! fragment without equality.
//!
//! With `k` unary predicates every element of a model falls into one of
//! `2^k` types, and elements of the same type cannot be told apart by any
//! formula of the fragment. A model is therefore fixed by the set of
//! inhabited types, the type of each constant and the truth value of each
//! nullary predicate. Quantifiers ground to finite conjunctions and
//! disjunctions over types, and the resulting propositional problem goes to
//! a CDCL solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sat::{Lit, Solver};
use crate::view::{Quantifier, State, Term, View};

pub const DEFAULT_DOMAIN_CAP: usize = 64;

/// Hard ceiling on unary predicates, independent of any configured cap.
const MAX_UNARY: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("predicate `{predicate}` has arity {arity}; only unary and nullary predicates are supported")]
    Fragment { predicate: String, arity: usize },
    #[error("predicate `{predicate}` is used with arities {first} and {second}")]
    ArityMismatch {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("decision needs domains up to {needed} elements but the cap is {cap}")]
    BoundExceeded { needed: usize, cap: usize },
    #[error("variable `{0}` is not bound by the prefix")]
    FreeVariable(String),
}

/// Quantifier-free part of a formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prop {
    True,
    False,
    Atom { predicate: String, args: Vec<Term> },
    Not(Box<Prop>),
    And(Vec<Prop>),
    Or(Vec<Prop>),
    Implies(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn atom(predicate: impl Into<String>, args: Vec<Term>) -> Prop {
        Prop::Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn not(p: Prop) -> Prop {
        Prop::Not(Box::new(p))
    }

    pub fn implies(a: Prop, b: Prop) -> Prop {
        Prop::Implies(Box::new(a), Box::new(b))
    }

    fn collect_signature(&self, out: &mut Vec<(String, usize)>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Atom { predicate, args } => out.push((predicate.clone(), args.len())),
            Prop::Not(p) => p.collect_signature(out),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.collect_signature(out)),
            Prop::Implies(a, b) => {
                a.collect_signature(out);
                b.collect_signature(out);
            }
        }
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Atom { args, .. } => {
                for a in args {
                    if let Term::Const(c) = a {
                        out.insert(c.clone());
                    }
                }
            }
            Prop::Not(p) => p.collect_constants(out),
            Prop::And(ps) | Prop::Or(ps) => ps.iter().for_each(|p| p.collect_constants(out)),
            Prop::Implies(a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
        }
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, ps: &[Prop], op: &str, empty: &str) -> fmt::Result {
            match ps {
                [] => write!(f, "{empty}"),
                [p] => write!(f, "{p}"),
                _ => {
                    write!(f, "(")?;
                    for (i, p) in ps.iter().enumerate() {
                        if i > 0 {
                            write!(f, " {op} ")?;
                        }
                        write!(f, "{p}")?;
                    }
                    write!(f, ")")
                }
            }
        }
        match self {
            Prop::True => write!(f, "⊤"),
            Prop::False => write!(f, "⊥"),
            Prop::Atom { predicate, args } => {
                write!(f, "{predicate}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Prop::Not(p) => write!(f, "¬{p}"),
            Prop::And(ps) => join(f, ps, "∧", "⊤"),
            Prop::Or(ps) => join(f, ps, "∨", "⊥"),
            Prop::Implies(a, b) => write!(f, "({a} → {b})"),
        }
    }
}

/// A prenex formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    pub prefix: Vec<(String, Quantifier)>,
    pub matrix: Prop,
}

impl Formula {
    pub fn new(prefix: Vec<(String, Quantifier)>, matrix: Prop) -> Formula {
        Formula { prefix, matrix }
    }

    pub fn ground(matrix: Prop) -> Formula {
        Formula::new(Vec::new(), matrix)
    }

    pub fn top() -> Formula {
        Formula::ground(Prop::True)
    }

    pub fn bottom() -> Formula {
        Formula::ground(Prop::False)
    }

    /// Prenex negation: quantifiers flip and the matrix is negated.
    pub fn negation(&self) -> Formula {
        let prefix = self
            .prefix
            .iter()
            .map(|(v, q)| {
                let flipped = match q {
                    Quantifier::Universal => Quantifier::Existential,
                    Quantifier::Existential => Quantifier::Universal,
                };
                (v.clone(), flipped)
            })
            .collect();
        Formula::new(prefix, Prop::not(self.matrix.clone()))
    }

    /// Predicates with their arities, in order of first use.
    pub fn signature(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.matrix.collect_signature(&mut out);
        out
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.matrix.collect_constants(&mut out);
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, q) in &self.prefix {
            write!(f, "{q}{v} ")?;
        }
        write!(f, "{}", self.matrix)
    }
}

fn state_prop(s: &State) -> Prop {
    let lits: Vec<Prop> = s
        .literals()
        .map(|l| {
            let a = Prop::atom(l.predicate.clone(), l.args.clone());
            if l.positive {
                a
            } else {
                Prop::not(a)
            }
        })
        .collect();
    match lits.len() {
        0 => Prop::True,
        1 => lits.into_iter().next().expect("one literal"),
        _ => Prop::And(lits),
    }
}

fn states_prop(states: &BTreeSet<State>) -> Prop {
    let disjuncts: Vec<Prop> = states.iter().map(state_prop).collect();
    match disjuncts.len() {
        0 => Prop::False,
        1 => disjuncts.into_iter().next().expect("one state"),
        _ => Prop::Or(disjuncts),
    }
}

/// Reads a view as a prenex formula: the stage disjunction, guarded by the
/// supposition disjunction when the supposition is not verum.
pub fn to_classical(v: &View) -> Formula {
    let stage = states_prop(v.stage());
    let matrix = if v.has_verum_supposition() {
        stage
    } else {
        Prop::implies(states_prop(v.supposition()), stage)
    };
    Formula::new(v.prefix().to_vec(), matrix)
}

/// A finite interpretation over the domain `0..domain_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteModel {
    pub domain_size: usize,
    pub predicates: BTreeMap<String, BTreeSet<usize>>,
    pub propositions: BTreeMap<String, bool>,
    pub constants: BTreeMap<String, usize>,
}

impl FiniteModel {
    /// Evaluates a closed formula. Unknown predicates are empty, unknown
    /// propositions false and unknown constants make their atoms false.
    pub fn satisfies(&self, f: &Formula) -> bool {
        let mut env = Vec::new();
        self.eval_prefix(&f.prefix, &f.matrix, &mut env)
    }

    fn eval_prefix(
        &self,
        prefix: &[(String, Quantifier)],
        matrix: &Prop,
        env: &mut Vec<(String, usize)>,
    ) -> bool {
        let Some(((var, q), rest)) = prefix.split_first() else {
            return self.eval(matrix, env);
        };
        let check = |e: usize, env: &mut Vec<(String, usize)>| {
            env.push((var.clone(), e));
            let r = self.eval_prefix(rest, matrix, env);
            env.pop();
            r
        };
        match q {
            Quantifier::Universal => (0..self.domain_size).all(|e| check(e, env)),
            Quantifier::Existential => (0..self.domain_size).any(|e| check(e, env)),
        }
    }

    fn eval(&self, p: &Prop, env: &[(String, usize)]) -> bool {
        match p {
            Prop::True => true,
            Prop::False => false,
            Prop::Not(q) => !self.eval(q, env),
            Prop::And(ps) => ps.iter().all(|q| self.eval(q, env)),
            Prop::Or(ps) => ps.iter().any(|q| self.eval(q, env)),
            Prop::Implies(a, b) => !self.eval(a, env) || self.eval(b, env),
            Prop::Atom { predicate, args } => match args.as_slice() {
                [] => self.propositions.get(predicate).copied().unwrap_or(false),
                [t] => {
                    let elem = match t {
                        Term::Const(c) => self.constants.get(c).copied(),
                        Term::Var(v) => env.iter().rev().find(|(n, _)| n == v).map(|(_, e)| *e),
                    };
                    match (elem, self.predicates.get(predicate)) {
                        (Some(e), Some(ext)) => ext.contains(&e),
                        _ => false,
                    }
                }
                _ => false,
            },
        }
    }
}

impl fmt::Display for FiniteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "domain {{")?;
        for e in 0..self.domain_size {
            if e > 0 {
                write!(f, ",")?;
            }
            write!(f, "e{e}")?;
        }
        write!(f, "}}")?;
        for (c, e) in &self.constants {
            write!(f, "; {c}↦e{e}")?;
        }
        for (p, ext) in &self.predicates {
            let items: Vec<String> = ext.iter().map(|e| format!("e{e}")).collect();
            write!(f, "; {p}={{{}}}", items.join(","))?;
        }
        for (p, v) in &self.propositions {
            write!(f, "; {p}={v}")?;
        }
        Ok(())
    }
}

/// Symbols of a formula set, checked against the fragment.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    pub unary: Vec<String>,
    pub nullary: Vec<String>,
    pub constants: Vec<String>,
}

impl Signature {
    pub fn of(formulas: &[Formula]) -> Result<Signature, OracleError> {
        let mut arities: BTreeMap<String, usize> = BTreeMap::new();
        let mut constants = BTreeSet::new();
        for f in formulas {
            for (p, n) in f.signature() {
                if n > 1 {
                    return Err(OracleError::Fragment {
                        predicate: p,
                        arity: n,
                    });
                }
                if let Some(&m) = arities.get(&p) {
                    if m != n {
                        return Err(OracleError::ArityMismatch {
                            predicate: p,
                            first: m,
                            second: n,
                        });
                    }
                }
                arities.insert(p, n);
            }
            constants.extend(f.constants());
        }
        let (unary, nullary): (Vec<_>, Vec<_>) = arities.into_iter().partition(|(_, n)| *n == 1);
        Ok(Signature {
            unary: unary.into_iter().map(|(p, _)| p).collect(),
            nullary: nullary.into_iter().map(|(p, _)| p).collect(),
            constants: constants.into_iter().collect(),
        })
    }

    /// Domain size that suffices for any satisfiable set over this signature.
    pub fn bound(&self) -> Result<usize, OracleError> {
        if self.unary.len() > MAX_UNARY {
            return Err(OracleError::BoundExceeded {
                needed: usize::MAX,
                cap: 1 << MAX_UNARY,
            });
        }
        Ok(1 << self.unary.len())
    }
}

/// Negation normal form after grounding; constants are folded away except
/// at the root.
#[derive(Debug, Clone)]
enum G {
    T,
    F,
    Lit(u32, bool),
    And(Vec<G>),
    Or(Vec<G>),
}

fn g_and(items: impl IntoIterator<Item = G>) -> G {
    let mut out = Vec::new();
    for g in items {
        match g {
            G::T => {}
            G::F => return G::F,
            G::And(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => G::T,
        1 => out.pop().expect("one item"),
        _ => G::And(out),
    }
}

fn g_or(items: impl IntoIterator<Item = G>) -> G {
    let mut out = Vec::new();
    for g in items {
        match g {
            G::F => {}
            G::T => return G::T,
            G::Or(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => G::F,
        1 => out.pop().expect("one item"),
        _ => G::Or(out),
    }
}

#[derive(Clone, Copy)]
enum Val {
    Type(usize),
    Const(usize),
}

/// Variable layout: one inhabitation flag per type, then `P(c)` for each
/// unary predicate and constant, then the nullary predicates.
struct Grounder<'a> {
    sig: &'a Signature,
    types: usize,
}

impl<'a> Grounder<'a> {
    fn inhabited(&self, t: usize) -> u32 {
        t as u32
    }

    fn unary_const(&self, p: usize, c: usize) -> u32 {
        (self.types + p * self.sig.constants.len() + c) as u32
    }

    fn nullary(&self, p: usize) -> u32 {
        (self.types + self.sig.unary.len() * self.sig.constants.len() + p) as u32
    }

    fn num_vars(&self) -> usize {
        self.types + self.sig.unary.len() * self.sig.constants.len() + self.sig.nullary.len()
    }

    fn formula(&self, f: &Formula) -> Result<G, OracleError> {
        let mut env = Vec::new();
        self.prefix(&f.prefix, &f.matrix, &mut env)
    }

    fn prefix(
        &self,
        prefix: &[(String, Quantifier)],
        matrix: &Prop,
        env: &mut Vec<(String, Val)>,
    ) -> Result<G, OracleError> {
        let Some(((var, q), rest)) = prefix.split_first() else {
            return self.prop(matrix, env, true);
        };
        let mut parts = Vec::with_capacity(self.types);
        for t in 0..self.types {
            env.push((var.clone(), Val::Type(t)));
            let body = self.prefix(rest, matrix, env);
            env.pop();
            let body = body?;
            let flag = self.inhabited(t);
            parts.push(match q {
                Quantifier::Universal => g_or([G::Lit(flag, false), body]),
                Quantifier::Existential => g_and([G::Lit(flag, true), body]),
            });
        }
        Ok(match q {
            Quantifier::Universal => g_and(parts),
            Quantifier::Existential => g_or(parts),
        })
    }

    fn prop(&self, p: &Prop, env: &[(String, Val)], pos: bool) -> Result<G, OracleError> {
        let truth = |b: bool| if b { G::T } else { G::F };
        Ok(match p {
            Prop::True => truth(pos),
            Prop::False => truth(!pos),
            Prop::Not(q) => self.prop(q, env, !pos)?,
            Prop::And(ps) | Prop::Or(ps) => {
                let parts = ps
                    .iter()
                    .map(|q| self.prop(q, env, pos))
                    .collect::<Result<Vec<_>, _>>()?;
                if matches!(p, Prop::And(_)) == pos {
                    g_and(parts)
                } else {
                    g_or(parts)
                }
            }
            Prop::Implies(a, b) => {
                let a = self.prop(a, env, !pos)?;
                let b = self.prop(b, env, pos)?;
                if pos {
                    g_or([a, b])
                } else {
                    g_and([a, b])
                }
            }
            Prop::Atom { predicate, args } => match args.as_slice() {
                [] => {
                    let i = self.sig.nullary.binary_search(predicate).expect("in signature");
                    G::Lit(self.nullary(i), pos)
                }
                [t] => {
                    let pi = self.sig.unary.binary_search(predicate).expect("in signature");
                    let val = match t {
                        Term::Const(c) => Val::Const(
                            self.sig.constants.binary_search(c).expect("in signature"),
                        ),
                        Term::Var(v) => env
                            .iter()
                            .rev()
                            .find(|(n, _)| n == v)
                            .map(|(_, val)| *val)
                            .ok_or_else(|| OracleError::FreeVariable(v.clone()))?,
                    };
                    match val {
                        Val::Type(ty) => truth(((ty >> pi) & 1 == 1) == pos),
                        Val::Const(ci) => G::Lit(self.unary_const(pi, ci), pos),
                    }
                }
                _ => unreachable!("signature check rejects polyadic atoms"),
            },
        })
    }
}

struct Encoder {
    solver: Solver,
}

impl Encoder {
    fn fresh(&mut self) -> Lit {
        Lit::new(self.solver.new_var(), true)
    }

    fn literal(&mut self, g: &G) -> Lit {
        match g {
            G::Lit(v, pos) => Lit::new(*v, *pos),
            G::And(children) => {
                let x = self.fresh();
                for c in children {
                    let l = self.literal(c);
                    self.solver.add_clause(&[!x, l]);
                }
                x
            }
            G::Or(children) => {
                let x = self.fresh();
                let mut clause = vec![!x];
                for c in children {
                    clause.push(self.literal(c));
                }
                self.solver.add_clause(&clause);
                x
            }
            G::T | G::F => unreachable!("constants are folded before encoding"),
        }
    }

    fn assert(&mut self, g: &G) {
        match g {
            G::T => {}
            G::F => self.solver.add_clause(&[]),
            G::And(children) => children.iter().for_each(|c| self.assert(c)),
            G::Or(children) => {
                let clause: Vec<Lit> = children.iter().map(|c| self.literal(c)).collect();
                self.solver.add_clause(&clause);
            }
            G::Lit(v, pos) => self.solver.add_clause(&[Lit::new(*v, *pos)]),
        }
    }

    /// Sequential-counter encoding of "at most `n` of `xs` are true".
    fn at_most(&mut self, xs: &[Lit], n: usize) {
        if n >= xs.len() {
            return;
        }
        if n == 0 {
            for &x in xs {
                self.solver.add_clause(&[!x]);
            }
            return;
        }
        let m = xs.len();
        let s: Vec<Vec<Lit>> = (0..m - 1)
            .map(|_| (0..n).map(|_| self.fresh()).collect())
            .collect();
        self.solver.add_clause(&[!xs[0], s[0][0]]);
        for j in 1..n {
            self.solver.add_clause(&[!s[0][j]]);
        }
        for i in 1..m - 1 {
            self.solver.add_clause(&[!xs[i], s[i][0]]);
            self.solver.add_clause(&[!s[i - 1][0], s[i][0]]);
            for j in 1..n {
                self.solver.add_clause(&[!xs[i], !s[i - 1][j - 1], s[i][j]]);
                self.solver.add_clause(&[!s[i - 1][j], s[i][j]]);
            }
            self.solver.add_clause(&[!xs[i], !s[i - 1][n - 1]]);
        }
        self.solver.add_clause(&[!xs[m - 1], !s[m - 2][n - 1]]);
    }
}

struct Grounded {
    sig: Signature,
    types: usize,
    roots: Vec<G>,
}

impl Grounded {
    fn new(formulas: &[Formula]) -> Result<Grounded, OracleError> {
        let sig = Signature::of(formulas)?;
        let types = sig.bound()?;
        let g = Grounder { sig: &sig, types };
        let roots = formulas
            .iter()
            .map(|f| g.formula(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Grounded { sig, types, roots })
    }

    /// Solves with at most `limit` inhabited types.
    fn solve(&self, limit: Option<usize>) -> Option<Vec<bool>> {
        if self.roots.iter().any(|g| matches!(g, G::F)) {
            return None;
        }
        let g = Grounder {
            sig: &self.sig,
            types: self.types,
        };
        let mut enc = Encoder {
            solver: Solver::new(),
        };
        for _ in 0..g.num_vars() {
            enc.solver.new_var();
        }
        let flags: Vec<Lit> = (0..self.types)
            .map(|t| Lit::new(g.inhabited(t), true))
            .collect();
        enc.solver.add_clause(&flags);
        let k = self.sig.unary.len();
        for c in 0..self.sig.constants.len() {
            for t in 0..self.types {
                let mut clause: Vec<Lit> = (0..k)
                    .map(|p| Lit::new(g.unary_const(p, c), (t >> p) & 1 == 0))
                    .collect();
                clause.push(flags[t]);
                enc.solver.add_clause(&clause);
            }
        }
        for root in &self.roots {
            enc.assert(root);
        }
        if let Some(n) = limit {
            enc.at_most(&flags, n);
        }
        enc.solver.solve()
    }

    fn model(&self, assignment: &[bool]) -> FiniteModel {
        let g = Grounder {
            sig: &self.sig,
            types: self.types,
        };
        let inhabited: Vec<usize> = (0..self.types)
            .filter(|&t| assignment[g.inhabited(t) as usize])
            .collect();
        let element_of = |t: usize| inhabited.binary_search(&t).expect("constant type inhabited");
        let k = self.sig.unary.len();
        let constants = self
            .sig
            .constants
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let t = (0..k)
                    .filter(|&p| assignment[g.unary_const(p, ci) as usize])
                    .fold(0, |acc, p| acc | (1 << p));
                (c.clone(), element_of(t))
            })
            .collect();
        let predicates = self
            .sig
            .unary
            .iter()
            .enumerate()
            .map(|(p, name)| {
                let ext = inhabited
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| (t >> p) & 1 == 1)
                    .map(|(e, _)| e)
                    .collect();
                (name.clone(), ext)
            })
            .collect();
        let propositions = self
            .sig
            .nullary
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), assignment[g.nullary(i) as usize]))
            .collect();
        FiniteModel {
            domain_size: inhabited.len(),
            predicates,
            propositions,
            constants,
        }
    }
}

/// Entailment checker with a configurable domain cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    pub domain_cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            domain_cap: DEFAULT_DOMAIN_CAP,
        }
    }
}

impl Oracle {
    pub fn new(domain_cap: usize) -> Self {
        Oracle { domain_cap }
    }

    /// The finite-model bound for a formula set, checked against the cap.
    pub fn bound(&self, formulas: &[Formula]) -> Result<usize, OracleError> {
        let needed = Signature::of(formulas)?.bound()?;
        if needed > self.domain_cap {
            return Err(OracleError::BoundExceeded {
                needed,
                cap: self.domain_cap,
            });
        }
        Ok(needed)
    }

    pub fn satisfiable(&self, formulas: &[Formula]) -> Result<bool, OracleError> {
        self.bound(formulas)?;
        Ok(Grounded::new(formulas)?.solve(None).is_some())
    }

    pub fn entails(&self, premises: &[Formula], conclusion: &Formula) -> Result<bool, OracleError> {
        let mut all = premises.to_vec();
        all.push(conclusion.negation());
        Ok(!self.satisfiable(&all)?)
    }

    pub fn equivalent(&self, f: &Formula, g: &Formula) -> Result<bool, OracleError> {
        Ok(self.entails(std::slice::from_ref(f), g)? && self.entails(std::slice::from_ref(g), f)?)
    }

    pub fn entails_views(&self, premises: &[View], conclusion: &View) -> Result<bool, OracleError> {
        let ps: Vec<Formula> = premises.iter().map(to_classical).collect();
        self.entails(&ps, &to_classical(conclusion))
    }

    pub fn equivalent_views(&self, a: &View, b: &View) -> Result<bool, OracleError> {
        self.equivalent(&to_classical(a), &to_classical(b))
    }
}

pub fn entails(premises: &[Formula], conclusion: &Formula) -> Result<bool, OracleError> {
    Oracle::default().entails(premises, conclusion)
}

pub fn equivalent(f: &Formula, g: &Formula) -> Result<bool, OracleError> {
    Oracle::default().equivalent(f, g)
}

/// Smallest model with at most `max_domain` elements.
pub fn find_model(
    formulas: &[Formula],
    max_domain: usize,
) -> Result<Option<FiniteModel>, OracleError> {
    let grounded = Grounded::new(formulas)?;
    if grounded.solve(None).is_none() {
        return Ok(None);
    }
    for n in 1..=max_domain.min(grounded.types) {
        if let Some(a) = grounded.solve(Some(n)) {
            return Ok(Some(grounded.model(&a)));
        }
    }
    Ok(None)
}

/// Reference decision by enumerating every collapsed model: each nonempty
/// set of inhabited types with each placement of constants and nullary
/// predicates, evaluated with [`FiniteModel::satisfies`]. Exponential; meant
/// for cross-checking on small signatures.
pub fn entails_by_enumeration(
    premises: &[Formula],
    conclusion: &Formula,
) -> Result<bool, OracleError> {
    let mut all = premises.to_vec();
    all.push(conclusion.negation());
    let sig = Signature::of(&all)?;
    let types = sig.bound()?;
    if types > 8 {
        return Err(OracleError::BoundExceeded {
            needed: types,
            cap: 8,
        });
    }
    for subset in 1u32..(1 << types) {
        let inhabited: Vec<usize> = (0..types).filter(|t| subset >> t & 1 == 1).collect();
        let n = inhabited.len();
        let predicates: BTreeMap<String, BTreeSet<usize>> = sig
            .unary
            .iter()
            .enumerate()
            .map(|(p, name)| {
                let ext = (0..n).filter(|&e| inhabited[e] >> p & 1 == 1).collect();
                (name.clone(), ext)
            })
            .collect();
        let consts = sig.constants.len();
        let props = sig.nullary.len();
        let placements = n.pow(consts as u32);
        for placement in 0..placements {
            let mut rest = placement;
            let constants: BTreeMap<String, usize> = sig
                .constants
                .iter()
                .map(|c| {
                    let e = rest % n;
                    rest /= n;
                    (c.clone(), e)
                })
                .collect();
            for bits in 0u32..(1 << props) {
                let propositions = sig
                    .nullary
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.clone(), bits >> i & 1 == 1))
                    .collect();
                let m = FiniteModel {
                    domain_size: n,
                    predicates: predicates.clone(),
                    propositions,
                    constants: constants.clone(),
                };
                if all.iter().all(|f| m.satisfies(f)) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::view::parse_view;

    fn c(name: &str) -> Term {
        Term::constant(name)
    }

    fn x(name: &str) -> Term {
        Term::var(name)
    }

    fn at(p: &str, t: Term) -> Prop {
        Prop::atom(p, vec![t])
    }

    fn cl(s: &str) -> Formula {
        to_classical(&parse_view(s).unwrap())
    }

    #[test]
    fn classical_reading_of_views() {
        assert_eq!(cl("∀x {R(x)}^{Q(x)}").to_string(), "∀x (Q(x) → R(x))");
        assert_eq!(cl("{P(c()),Q(c())}").to_string(), "(P(c()) ∨ Q(c()))");
        assert_eq!(cl("{0}").matrix, Prop::True);
        assert_eq!(cl("{}").matrix, Prop::False);
        assert_eq!(cl("{~P(a())Q(a())}").to_string(), "(¬P(a()) ∧ Q(a()))");
    }

    #[test]
    fn table_one_entailments() {
        let mp = [cl("{R(x())}^{Q(x())}"), cl("{Q(x())}")];
        assert!(entails(&mp, &cl("{R(x())}")).unwrap());
        let mt = [cl("{R(x())}^{Q(x())}"), cl("{~R(x())}")];
        assert!(entails(&mt, &cl("{~Q(x())}")).unwrap());
        let qmp = [cl("∀x {R(x)}^{Q(x)}"), cl("∀x {Q(x)}^{P(x)}")];
        assert!(entails(&qmp, &cl("∀x {R(x)}^{P(x)}")).unwrap());
        let df = [cl("{Q(x())R(y()),S(x())T(y())}"), cl("{Q(x())}")];
        assert!(!entails(&df, &cl("{R(y())}")).unwrap());
    }

    #[test]
    fn spec_style_examples() {
        let all = Formula::new(
            vec![("z".into(), Quantifier::Universal)],
            Prop::implies(at("P", x("z")), at("Q", x("z"))),
        );
        assert!(entails(&[all, Formula::ground(at("P", c("c")))], &Formula::ground(at("Q", c("c")))).unwrap());
        let ex = Formula::new(vec![("z".into(), Quantifier::Existential)], at("P", x("z")));
        assert!(entails(std::slice::from_ref(&ex), &ex).unwrap());

        let pq = Formula::ground(Prop::Or(vec![at("P", c("c")), at("Q", c("c"))]));
        let qp = Formula::ground(Prop::Or(vec![at("Q", c("c")), at("P", c("c"))]));
        assert!(equivalent(&pq, &qp).unwrap());
        let p = Formula::ground(at("P", c("c")));
        let taut = Formula::ground(Prop::And(vec![
            at("P", c("c")),
            Prop::Or(vec![at("Q", c("c")), Prop::not(at("Q", c("c")))]),
        ]));
        assert!(equivalent(&p, &taut).unwrap());
        assert!(!equivalent(&p, &Formula::ground(at("Q", c("c")))).unwrap());
    }

    #[test]
    fn models() {
        let m = find_model(&[Formula::ground(at("P", c("c")))], 4).unwrap().unwrap();
        assert_eq!(m.domain_size, 1);
        assert_eq!(m.predicates["P"], BTreeSet::from([0]));
        assert_eq!(m.constants["c"], 0);

        let contra = [
            Formula::ground(at("P", c("c"))),
            Formula::ground(Prop::not(at("P", c("c")))),
        ];
        assert!(find_model(&contra, 4).unwrap().is_none());

        let fs = [
            Formula::new(vec![("x".into(), Quantifier::Existential)], at("P", x("x"))),
            Formula::new(
                vec![("y".into(), Quantifier::Universal)],
                Prop::implies(at("P", x("y")), at("Q", x("y"))),
            ),
            Formula::new(
                vec![("z".into(), Quantifier::Existential)],
                Prop::not(at("Q", x("z"))),
            ),
        ];
        let m = find_model(&fs, 4).unwrap().unwrap();
        assert_eq!(m.domain_size, 2);
        assert!(fs.iter().all(|f| m.satisfies(f)));
        assert!(find_model(&fs, 1).unwrap().is_none());
    }

    #[test]
    fn fragment_and_bound_errors() {
        let poly = Formula::ground(Prop::atom("Has", vec![c("a"), c("b")]));
        assert!(matches!(entails(&[poly.clone()], &poly), Err(OracleError::Fragment { .. })));
        let wide: Vec<Prop> = (0..7).map(|i| at(&format!("P{i}"), c("a"))).collect();
        let f = Formula::ground(Prop::And(wide));
        assert_eq!(
            entails(&[f.clone()], &f),
            Err(OracleError::BoundExceeded { needed: 128, cap: 64 })
        );
        assert!(Oracle::new(128).entails(&[f.clone()], &f).unwrap());
    }

    #[test]
    fn nullary_predicates_are_propositions() {
        let rain = Formula::ground(Prop::atom("Rain", vec![]));
        let wet = Formula::ground(Prop::atom("Wet", vec![]));
        let cond = Formula::ground(Prop::implies(rain.matrix.clone(), wet.matrix.clone()));
        assert!(entails(&[cond.clone(), rain.clone()], &wet).unwrap());
        assert!(!entails(&[cond, wet], &rain).unwrap());
    }

    #[test]
    fn free_variables_are_rejected() {
        let f = Formula::ground(at("P", x("v")));
        assert_eq!(entails(&[], &f), Err(OracleError::FreeVariable("v".into())));
    }
}
