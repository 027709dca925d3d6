//! Views: quantifier prefix, a stage of alternative states, and a
//! supposition, together with the textual notation used throughout the
//! toolkit.
//!
//! The notation is the one accepted by [`parse_view`]:
//!
//! ```text
//! view    := prefix? "{" states? "}" ("^" "{" states? "}")?
//! prefix  := (("∃"|"E"|"∀"|"A") ident)+
//! states  := "0" | state ("," state)*
//! state   := literal+
//! literal := "~"? ident "(" (term ("," term)*)? ")"
//! term    := ident "()" | ident "*"?
//! ```
//!
//! `{0}` is the verum view and `{}` the absurd view. Constants always carry
//! `()`, bare identifiers in argument position are variables, and `*` marks a
//! variable occurrence as being at issue.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable `{0}` is not declared in the prefix")]
    UndeclaredVariable(String),
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error("predicate `{predicate}` used with arity {first} and arity {second}")]
    ArityMismatch {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("`{0}` is used both as a constant and as a variable")]
    NameClash(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Quantifier {
    Universal,
    Existential,
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantifier::Universal => write!(f, "∀"),
            Quantifier::Existential => write!(f, "∃"),
        }
    }
}

/// A constant (printed `name()`) or a variable (printed `name`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(n) | Term::Var(n) => n,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    fn printed_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        let suffix: &'static [u8] = match self {
            Term::Const(_) => b"()",
            Term::Var(_) => b"",
        };
        self.name().bytes().chain(suffix.iter().copied())
    }
}

// Terms order by their printed form so that canonical output is stable.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.printed_bytes().cmp(other.printed_bytes())
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(n) => write!(f, "{n}()"),
            Term::Var(n) => write!(f, "{n}"),
        }
    }
}

/// A signed atom. Issue flags ride along with the arguments but take no part
/// in equality, hashing or ordering.
#[derive(Debug, Clone)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
    pub issues: Vec<bool>,
    pub positive: bool,
}

impl Literal {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>, positive: bool) -> Self {
        let issues = vec![false; args.len()];
        Literal {
            predicate: predicate.into(),
            args,
            issues,
            positive,
        }
    }

    pub fn pos(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self::new(predicate, args, true)
    }

    pub fn neg(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self::new(predicate, args, false)
    }

    pub fn with_issues(mut self, issues: Vec<bool>) -> Self {
        assert_eq!(issues.len(), self.args.len(), "one issue flag per argument");
        self.issues = issues;
        self
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn negated(&self) -> Literal {
        Literal {
            positive: !self.positive,
            ..self.clone()
        }
    }

    pub fn has_issue(&self) -> bool {
        self.issues.iter().any(|&b| b)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Applies `subst`; issue flags on arguments that become constants are
    /// dropped because the notation only marks variables.
    pub fn apply(&self, subst: &Substitution) -> Literal {
        let args: Vec<Term> = self.args.iter().map(|t| subst.apply_term(t)).collect();
        let issues = self
            .issues
            .iter()
            .zip(&args)
            .map(|(&flag, t)| flag && t.is_var())
            .collect();
        Literal {
            predicate: self.predicate.clone(),
            args,
            issues,
            positive: self.positive,
        }
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.positive == other.positive
            && self.predicate == other.predicate
            && self.args == other.args
    }
}

impl Eq for Literal {}

impl Hash for Literal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.predicate.hash(state);
        self.positive.hash(state);
        self.args.hash(state);
    }
}

// Canonical literal order: predicate, then negative before positive, then
// printed arguments.
impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predicate
            .cmp(&other.predicate)
            .then(self.positive.cmp(&other.positive))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            write!(f, "~")?;
        }
        write!(f, "{}(", self.predicate)?;
        for (i, (t, &flag)) in self.args.iter().zip(&self.issues).enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
            if flag && t.is_var() {
                write!(f, "*")?;
            }
        }
        write!(f, ")")
    }
}

/// A conjunction of literals with set semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(BTreeSet<Literal>);

impl State {
    pub fn new() -> Self {
        State(BTreeSet::new())
    }

    /// Inserts a literal, OR-ing issue flags into an identical literal that is
    /// already present.
    pub fn insert(&mut self, lit: Literal) {
        match self.0.take(&lit) {
            Some(mut existing) => {
                for (a, b) in existing.issues.iter_mut().zip(&lit.issues) {
                    *a |= *b;
                }
                self.0.insert(existing);
            }
            None => {
                self.0.insert(lit);
            }
        }
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, lit: &Literal) -> bool {
        self.0.contains(lit)
    }

    /// True when some literal occurs together with its negation.
    pub fn is_contradictory(&self) -> bool {
        self.0
            .iter()
            .any(|l| l.positive && self.0.contains(&l.negated()))
    }

    pub fn union(&self, other: &State) -> State {
        let mut out = self.clone();
        for l in other.literals() {
            out.insert(l.clone());
        }
        out
    }

    pub fn apply(&self, subst: &Substitution) -> State {
        if subst.is_empty() {
            return self.clone();
        }
        self.0.iter().map(|l| l.apply(subst)).collect()
    }

    pub fn is_subset(&self, other: &State) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.0
            .iter()
            .flat_map(|l| l.vars().map(str::to_owned))
            .collect()
    }
}

impl FromIterator<Literal> for State {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        let mut s = State::new();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Variable bindings produced by matching. Bindings are kept resolved, so
/// applying a substitution once is enough.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.0.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    /// Binds `var` to `term`. Returns false when the binding would be cyclic
    /// or contradict an existing binding.
    pub fn bind(&mut self, var: &str, term: Term) -> bool {
        let term = self.apply_term(&term);
        if let Some(existing) = self.0.get(var) {
            return *existing == term;
        }
        if let Term::Var(v) = &term {
            if v == var {
                return true;
            }
        }
        for value in self.0.values_mut() {
            if matches!(value, Term::Var(v) if v == var) {
                *value = term.clone();
            }
        }
        self.0.insert(var.to_owned(), term);
        true
    }
}

/// The central object: `prefix stage ^ supposition`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    prefix: Vec<(String, Quantifier)>,
    stage: BTreeSet<State>,
    supposition: BTreeSet<State>,
}

pub(crate) fn verum_states() -> BTreeSet<State> {
    BTreeSet::from([State::new()])
}

impl View {
    /// Builds a view and checks its invariants.
    pub fn new(
        prefix: Vec<(String, Quantifier)>,
        stage: BTreeSet<State>,
        supposition: BTreeSet<State>,
    ) -> Result<View, ViewError> {
        let v = View {
            prefix,
            stage,
            supposition,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn categorical(
        prefix: Vec<(String, Quantifier)>,
        stage: BTreeSet<State>,
    ) -> Result<View, ViewError> {
        Self::new(prefix, stage, verum_states())
    }

    /// Construction without validation, for callers that maintain the
    /// invariants themselves. Unused prefix variables are dropped.
    pub(crate) fn assemble(
        prefix: Vec<(String, Quantifier)>,
        stage: BTreeSet<State>,
        supposition: BTreeSet<State>,
    ) -> View {
        let mut v = View {
            prefix,
            stage,
            supposition,
        };
        let used = v.body_vars();
        v.prefix.retain(|(name, _)| used.contains(name));
        debug_assert!(v.validate().is_ok(), "assembled invalid view {v}");
        v
    }

    pub fn verum() -> View {
        View {
            prefix: Vec::new(),
            stage: verum_states(),
            supposition: verum_states(),
        }
    }

    pub fn absurd() -> View {
        View {
            prefix: Vec::new(),
            stage: BTreeSet::new(),
            supposition: verum_states(),
        }
    }

    pub fn prefix(&self) -> &[(String, Quantifier)] {
        &self.prefix
    }

    pub fn stage(&self) -> &BTreeSet<State> {
        &self.stage
    }

    pub fn supposition(&self) -> &BTreeSet<State> {
        &self.supposition
    }

    pub fn is_verum(&self) -> bool {
        self.stage == verum_states() && self.has_verum_supposition()
    }

    pub fn is_absurd(&self) -> bool {
        self.stage.is_empty()
    }

    pub fn has_verum_supposition(&self) -> bool {
        self.supposition == verum_states()
    }

    /// One alternative and no supposition.
    pub fn is_categorical(&self) -> bool {
        self.stage.len() == 1 && self.has_verum_supposition()
    }

    pub fn quantifier_of(&self, var: &str) -> Option<Quantifier> {
        self.prefix
            .iter()
            .find(|(n, _)| n == var)
            .map(|(_, q)| *q)
    }

    pub fn all_states(&self) -> impl Iterator<Item = &State> {
        self.stage.iter().chain(self.supposition.iter())
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.all_states().flat_map(|s| s.literals())
    }

    /// Variables occurring in stage or supposition.
    pub fn body_vars(&self) -> BTreeSet<String> {
        self.all_states().flat_map(|s| s.vars()).collect()
    }

    pub fn constants(&self) -> BTreeSet<String> {
        self.literals()
            .flat_map(|l| l.args.iter())
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// Predicate symbols with their arity.
    pub fn predicates(&self) -> BTreeMap<String, usize> {
        self.literals()
            .map(|l| (l.predicate.clone(), l.arity()))
            .collect()
    }

    /// Number of literal occurrences in stage plus supposition.
    pub fn atom_count(&self) -> usize {
        self.all_states().map(State::len).sum()
    }

    /// Renames variables (prefix and body) according to `map`.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> View {
        let mut subst = Substitution::new();
        for (from, to) in map {
            subst.0.insert(from.clone(), Term::Var(to.clone()));
        }
        let rename_set = |states: &BTreeSet<State>| states.iter().map(|s| s.apply(&subst)).collect();
        View {
            prefix: self
                .prefix
                .iter()
                .map(|(n, q)| (map.get(n).cloned().unwrap_or_else(|| n.clone()), *q))
                .collect(),
            stage: rename_set(&self.stage),
            supposition: rename_set(&self.supposition),
        }
    }

    fn validate(&self) -> Result<(), ViewError> {
        let mut declared = BTreeSet::new();
        for (name, _) in &self.prefix {
            if !declared.insert(name.as_str()) {
                return Err(ViewError::DuplicateVariable(name.clone()));
            }
        }
        let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
        let mut consts = BTreeSet::new();
        for lit in self.literals() {
            if lit.issues.len() != lit.args.len() {
                return Err(ViewError::Syntax {
                    pos: 0,
                    msg: format!("literal {lit} has mismatched issue flags"),
                });
            }
            check_arity(&mut arities, &lit.predicate, lit.arity())?;
            for t in &lit.args {
                match t {
                    Term::Var(v) if !declared.contains(v.as_str()) => {
                        return Err(ViewError::UndeclaredVariable(v.clone()))
                    }
                    Term::Const(c) => {
                        consts.insert(c.as_str());
                    }
                    Term::Var(_) => {}
                }
            }
        }
        if let Some(clash) = declared.iter().find(|v| consts.contains(*v)) {
            return Err(ViewError::NameClash((*clash).to_owned()));
        }
        Ok(())
    }
}

fn check_arity<'a>(
    arities: &mut BTreeMap<&'a str, usize>,
    predicate: &'a str,
    arity: usize,
) -> Result<(), ViewError> {
    match arities.get(predicate) {
        Some(&first) if first != arity => Err(ViewError::ArityMismatch {
            predicate: predicate.to_owned(),
            first,
            second: arity,
        }),
        _ => {
            arities.insert(predicate, arity);
            Ok(())
        }
    }
}

/// Checks that every predicate keeps one arity across a list of views.
pub fn check_arities<'a>(views: impl IntoIterator<Item = &'a View>) -> Result<(), ViewError> {
    let mut arities = BTreeMap::new();
    for v in views {
        for lit in v.literals() {
            check_arity(&mut arities, &lit.predicate, lit.arity())?;
        }
    }
    Ok(())
}

fn fmt_states(f: &mut fmt::Formatter<'_>, states: &BTreeSet<State>) -> fmt::Result {
    write!(f, "{{")?;
    for (i, s) in states.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{s}")?;
    }
    write!(f, "}}")
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, q) in &self.prefix {
            write!(f, "{q}{name} ")?;
        }
        fmt_states(f, &self.stage)?;
        if !self.has_verum_supposition() {
            write!(f, "^")?;
            fmt_states(f, &self.supposition)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for View {
    type Err = ViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_view(s)
    }
}

impl serde::Serialize for View {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for View {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_view(&text).map_err(serde::de::Error::custom)
    }
}

/// Canonical text of a view.
pub fn print_view(v: &View) -> String {
    v.to_string()
}

pub fn parse_view(text: &str) -> Result<View, ViewError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let view = p.view()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("trailing input"));
    }
    Ok(view)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, msg: impl Into<String>) -> ViewError {
        ViewError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ViewError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ViewError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return Err(self.error("expected identifier")),
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn quantifier(&mut self) -> Option<Quantifier> {
        self.skip_ws();
        let q = match self.peek()? {
            '∃' => Quantifier::Existential,
            '∀' => Quantifier::Universal,
            // ASCII aliases must be followed by whitespace to tell them apart
            // from an identifier.
            'E' | 'A' if self.chars.get(self.pos + 1).is_some_and(|c| c.is_whitespace()) => {
                if self.peek() == Some('E') {
                    Quantifier::Existential
                } else {
                    Quantifier::Universal
                }
            }
            _ => return None,
        };
        self.pos += 1;
        Some(q)
    }

    fn view(&mut self) -> Result<View, ViewError> {
        let mut prefix = Vec::new();
        while let Some(q) = self.quantifier() {
            let name = self.ident()?;
            prefix.push((name, q));
        }
        let stage = self.states()?;
        self.skip_ws();
        let supposition = if self.peek() == Some('^') {
            self.pos += 1;
            self.states()?
        } else {
            verum_states()
        };
        View::new(prefix, stage, supposition)
    }

    fn states(&mut self) -> Result<BTreeSet<State>, ViewError> {
        self.expect('{')?;
        let mut out = BTreeSet::new();
        self.skip_ws();
        if self.peek() == Some('}') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.insert(self.state()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some('}') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.error("expected `,` or `}`")),
            }
        }
    }

    fn state(&mut self) -> Result<State, ViewError> {
        self.skip_ws();
        if self.peek() == Some('0') {
            self.pos += 1;
            return Ok(State::new());
        }
        let mut state = State::new();
        state.insert(self.literal()?);
        loop {
            self.skip_ws();
            match self.peek() {
                Some(c) if c == '~' || c.is_ascii_alphabetic() => state.insert(self.literal()?),
                _ => return Ok(state),
            }
        }
    }

    fn literal(&mut self) -> Result<Literal, ViewError> {
        self.skip_ws();
        let positive = if self.peek() == Some('~') {
            self.pos += 1;
            false
        } else {
            true
        };
        let predicate = self.ident()?;
        self.expect('(')?;
        let mut args = Vec::new();
        let mut issues = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.pos += 1;
        } else {
            loop {
                let (t, flag) = self.term()?;
                args.push(t);
                issues.push(flag);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `)`")),
                }
            }
        }
        Ok(Literal {
            predicate,
            args,
            issues,
            positive,
        })
    }

    fn term(&mut self) -> Result<(Term, bool), ViewError> {
        let name = self.ident()?;
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                self.expect(')')?;
                Ok((Term::Const(name), false))
            }
            Some('*') => {
                self.pos += 1;
                Ok((Term::Var(name), true))
            }
            _ => Ok((Term::Var(name), false)),
        }
    }
}

/// Quantifier blocks: maximal runs of equal quantifiers, whose variables
/// commute.
fn blocks(prefix: &[(String, Quantifier)]) -> Vec<(Quantifier, Vec<&str>)> {
    let mut out: Vec<(Quantifier, Vec<&str>)> = Vec::new();
    for (name, q) in prefix {
        match out.last_mut() {
            Some((last, names)) if last == q => names.push(name),
            _ => out.push((*q, vec![name])),
        }
    }
    out
}

type Signature = BTreeMap<(String, bool, usize, bool), usize>;

fn var_signatures(v: &View) -> BTreeMap<String, Signature> {
    let mut sigs: BTreeMap<String, Signature> = BTreeMap::new();
    let parts = [(false, &v.stage), (true, &v.supposition)];
    for (in_supp, states) in parts {
        for s in states {
            for l in s.literals() {
                for (i, t) in l.args.iter().enumerate() {
                    if let Term::Var(name) = t {
                        *sigs
                            .entry(name.clone())
                            .or_default()
                            .entry((l.predicate.clone(), l.positive, i, in_supp))
                            .or_default() += 1;
                    }
                }
            }
        }
    }
    sigs
}

/// True iff a bijective, quantifier-preserving renaming of `a`'s variables
/// makes it identical to `b`. Variables within one run of equal quantifiers
/// may be permuted.
pub fn alpha_equal(a: &View, b: &View) -> bool {
    if a.stage.len() != b.stage.len()
        || a.supposition.len() != b.supposition.len()
        || a.atom_count() != b.atom_count()
        || a.constants() != b.constants()
    {
        return false;
    }
    let ba = blocks(&a.prefix);
    let bb = blocks(&b.prefix);
    if ba.len() != bb.len()
        || ba
            .iter()
            .zip(&bb)
            .any(|((qa, na), (qb, nb))| qa != qb || na.len() != nb.len())
    {
        return false;
    }
    let sa = var_signatures(a);
    let sb = var_signatures(b);
    let empty = Signature::new();
    let pairs: Vec<(&str, Vec<&str>)> = ba
        .iter()
        .zip(&bb)
        .flat_map(|((_, na), (_, nb))| {
            na.iter().map(|x| {
                let sig = sa.get(*x).unwrap_or(&empty);
                let cands = nb
                    .iter()
                    .copied()
                    .filter(|y| sb.get(*y).unwrap_or(&empty) == sig)
                    .collect();
                (*x, cands)
            })
        })
        .collect();
    let mut map = BTreeMap::new();
    let mut used = BTreeSet::new();
    search_renaming(a, b, &pairs, 0, &mut map, &mut used)
}

fn search_renaming<'a>(
    a: &View,
    b: &View,
    pairs: &[(&'a str, Vec<&'a str>)],
    i: usize,
    map: &mut BTreeMap<String, String>,
    used: &mut BTreeSet<&'a str>,
) -> bool {
    if i == pairs.len() {
        let r = a.rename(map);
        return r.stage == b.stage && r.supposition == b.supposition;
    }
    let (x, cands) = &pairs[i];
    for y in cands {
        if used.contains(y) {
            continue;
        }
        used.insert(y);
        map.insert((*x).to_owned(), (*y).to_owned());
        if search_renaming(a, b, pairs, i + 1, map, used) {
            return true;
        }
        map.remove(*x);
        used.remove(y);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> View {
        parse_view(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    const P1: &str = "∃a ∃b ∃c ∃d ∃e ∃f {Ace(a*)Has(Mary(),a)Has(c,b)King(b*),Has(John(),d)Has(f,e)Jack(e)Queen(d)}";

    #[test]
    fn parses_card_premise() {
        let p2 = v("∃g {King(g*)Has(Sally(),g)}");
        assert_eq!(p2.prefix(), &[("g".to_owned(), Quantifier::Existential)]);
        assert_eq!(p2.stage().len(), 1);
        let state = p2.stage().iter().next().unwrap();
        assert_eq!(state.len(), 2);
        let king = state.literals().find(|l| l.predicate == "King").unwrap();
        assert_eq!(king.issues, vec![true]);
        let has = state.literals().find(|l| l.predicate == "Has").unwrap();
        assert_eq!(has.issues, vec![false, false]);
        assert_eq!(has.args[0], Term::constant("Sally"));
    }

    #[test]
    fn prints_canonically() {
        assert_eq!(v("∃g {King(g*)Has(Sally(),g)}").to_string(), "∃g {Has(Sally(),g)King(g*)}");
        assert_eq!(View::verum().to_string(), "{0}");
        assert_eq!(v("{0}"), View::verum());
        assert_eq!(View::absurd().to_string(), "{}");
        assert_eq!(v("{}"), View::absurd());
    }

    #[test]
    fn negative_literals_sort_first() {
        assert_eq!(
            v("{vis(moon2()),~vis(moon2())}").to_string(),
            "{~vis(moon2()),vis(moon2())}"
        );
    }

    #[test]
    fn ascii_aliases() {
        assert_eq!(v("E x {~P(x), Q(x)}"), v("∃x {~P(x),Q(x)}"));
        assert_eq!(v("A x {P(x)}^{Q(x)}"), v("∀x {P(x)}^{Q(x)}"));
    }

    #[test]
    fn identifier_starting_with_e_is_not_a_quantifier() {
        let view = v("{Enchanted(Ex())}");
        assert_eq!(view.predicates().keys().next().unwrap(), "Enchanted");
    }

    #[test]
    fn supposition_round_trip() {
        let s = "∀x {R(x)}^{Q(x)}";
        assert_eq!(v(s).to_string(), s);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_view("{P(x)"), Err(ViewError::Syntax { .. })));
        assert!(matches!(
            parse_view("{P(x)}"),
            Err(ViewError::UndeclaredVariable(x)) if x == "x"
        ));
        assert!(matches!(
            parse_view("{P(a()),P(a(),b())}"),
            Err(ViewError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_view("∃a {P(a(),a)}"),
            Err(ViewError::NameClash(_))
        ));
        assert!(matches!(
            parse_view("∃a ∀a {P(a)}"),
            Err(ViewError::DuplicateVariable(_))
        ));
        match parse_view("{P(a())} junk") {
            Err(ViewError::Syntax { pos, .. }) => assert_eq!(pos, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atom_counts() {
        assert_eq!(v(P1).atom_count(), 8);
        assert_eq!(View::verum().atom_count(), 0);
        assert_eq!(v("{P(x())}^{Q(x())}").atom_count(), 2);
    }

    #[test]
    fn alpha_equality() {
        assert!(alpha_equal(&v("∃a {P(a)}"), &v("∃b {P(b)}")));
        assert!(!alpha_equal(&v("∃a {P(a)}"), &v("∀a {P(a)}")));
        let out = v("∃g ∃l ∃m {Ace(l*)Has(Mary(),l)Has(Sally(),g)Has(m,g)King(g*)}");
        let swapped = v("∃g ∃m ∃l {Ace(m*)Has(Mary(),m)Has(Sally(),g)Has(l,g)King(g*)}");
        assert!(alpha_equal(&out, &swapped));
        // Same block, different declaration order.
        let reordered = v("∃l ∃g ∃m {Ace(l)Has(Mary(),l)Has(Sally(),g)Has(m,g)King(g)}");
        assert!(alpha_equal(&out, &reordered));
        // Not a bijection: both variables would collapse.
        assert!(!alpha_equal(&v("∃a ∃b {P(a)Q(b)}"), &v("∃a ∃b {P(a)Q(a)}")));
        // Mixed quantifiers must keep their block order.
        assert!(!alpha_equal(
            &v("∀x ∃y {P(x)Q(y)}"),
            &v("∃y ∀x {P(x)Q(y)}")
        ));
    }

    #[test]
    fn substitution_resolves_chains() {
        let mut s = Substitution::new();
        assert!(s.bind("x", Term::var("y")));
        assert!(s.bind("y", Term::constant("c")));
        assert_eq!(s.apply_term(&Term::var("x")), Term::constant("c"));
        assert!(!s.bind("x", Term::constant("d")));
        assert!(s.bind("x", Term::constant("c")));
    }

    #[test]
    fn contradiction_detection() {
        let s = v("{P(a())~P(a())Q(a())}");
        assert!(s.stage().iter().next().unwrap().is_contradictory());
        let s = v("∃x ∃y {P(x)~P(y)}");
        assert!(!s.stage().iter().next().unwrap().is_contradictory());
    }
}
