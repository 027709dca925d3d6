//! Erotetic operations over views: matching, Update, Query, Factor and the
//! default procedure built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::view::{verum_states, Literal, Quantifier, State, Substitution, Term, View};

/// Result of matching one incoming state against one current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Number of incoming literals matched to distinct current literals.
    pub score: usize,
    /// How many of the matched pairs carry an issue flag on either side.
    pub issue_score: usize,
    pub subst: Substitution,
}

/// Unifies two literals position-wise, extending `subst`. Only variables in
/// `bindable` may be bound; when both sides are bindable variables the
/// incoming one is bound to the current term.
pub fn literal_match(
    current: &Literal,
    incoming: &Literal,
    subst: &Substitution,
    bindable: &BTreeSet<String>,
) -> Option<Substitution> {
    if current.predicate != incoming.predicate
        || current.positive != incoming.positive
        || current.args.len() != incoming.args.len()
    {
        return None;
    }
    let mut out = subst.clone();
    for (c, d) in current.args.iter().zip(&incoming.args) {
        let c = out.apply_term(c);
        let d = out.apply_term(d);
        if c == d {
            continue;
        }
        let bound = match (&c, &d) {
            (_, Term::Var(dv)) if bindable.contains(dv) => out.bind(dv, c.clone()),
            (Term::Var(cv), _) if bindable.contains(cv) => out.bind(cv, d.clone()),
            _ => false,
        };
        if !bound {
            return None;
        }
    }
    Some(out)
}

/// Maximal matching of `incoming` literals onto distinct `current` literals
/// under one substitution binding only variables in `bindable`. Among equal
/// scores the higher issue score wins, then the first found in canonical
/// order.
pub fn state_match(current: &State, incoming: &State, bindable: &BTreeSet<String>) -> MatchResult {
    let cur: Vec<&Literal> = current.literals().collect();
    let inc: Vec<&Literal> = incoming.literals().collect();
    let mut search = MatchSearch {
        cur: &cur,
        inc: &inc,
        bindable,
        used: vec![false; cur.len()],
        best: MatchResult {
            score: 0,
            issue_score: 0,
            subst: Substitution::new(),
        },
    };
    search.run(0, &Substitution::new(), 0, 0);
    search.best
}

struct MatchSearch<'a> {
    cur: &'a [&'a Literal],
    inc: &'a [&'a Literal],
    bindable: &'a BTreeSet<String>,
    used: Vec<bool>,
    best: MatchResult,
}

impl MatchSearch<'_> {
    fn run(&mut self, i: usize, subst: &Substitution, score: usize, issues: usize) {
        let remaining = self.inc.len() - i;
        if score + remaining < self.best.score
            || (score + remaining == self.best.score && issues + remaining <= self.best.issue_score)
        {
            return;
        }
        if i == self.inc.len() {
            if (score, issues) > (self.best.score, self.best.issue_score) {
                self.best = MatchResult {
                    score,
                    issue_score: issues,
                    subst: subst.clone(),
                };
            }
            return;
        }
        for j in 0..self.cur.len() {
            if self.used[j] {
                continue;
            }
            if let Some(s) = literal_match(self.cur[j], self.inc[i], subst, self.bindable) {
                let flagged = usize::from(self.cur[j].has_issue() || self.inc[i].has_issue());
                self.used[j] = true;
                self.run(i + 1, &s, score + 1, issues + flagged);
                self.used[j] = false;
            }
        }
        self.run(i + 1, subst, score, issues);
    }
}

/// Finds a substitution (over `bindable`) under which every literal of
/// `pattern` occurs in `container`.
pub fn contains_instance(
    container: &State,
    pattern: &State,
    bindable: &BTreeSet<String>,
    subst: &Substitution,
) -> Option<Substitution> {
    let cont: Vec<&Literal> = container.literals().collect();
    let pat: Vec<&Literal> = pattern.literals().collect();
    fn go(
        cont: &[&Literal],
        pat: &[&Literal],
        bindable: &BTreeSet<String>,
        subst: &Substitution,
    ) -> Option<Substitution> {
        let Some((first, rest)) = pat.split_first() else {
            return Some(subst.clone());
        };
        cont.iter().find_map(|c| {
            literal_match(c, first, subst, bindable).and_then(|s| go(cont, rest, bindable, &s))
        })
    }
    go(&cont, &pat, bindable, subst)
}

/// Which branch of Update produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Best-matching pairs merged.
    Match,
    /// No literal matched; consistent pairwise products kept.
    Product,
    /// Every product was contradictory; current view kept.
    Unchanged,
    /// Supposition of the current view discharged by the incoming view.
    Discharge,
    /// Incoming view refutes the consequent, yielding the negated supposition.
    Contrapositive,
    /// Incoming conditional's consequent matches the current antecedent.
    Chain,
    /// Current conditional's consequent matches the incoming antecedent.
    ReverseChain,
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UpdateRule::Match => "match",
            UpdateRule::Product => "product",
            UpdateRule::Unchanged => "unchanged",
            UpdateRule::Discharge => "discharge",
            UpdateRule::Contrapositive => "contrapositive",
            UpdateRule::Chain => "chain",
            UpdateRule::ReverseChain => "reverse-chain",
        };
        f.write_str(s)
    }
}

fn prefix_vars(v: &View) -> BTreeSet<String> {
    v.prefix().iter().map(|(n, _)| n.clone()).collect()
}

/// Renames the variables of `incoming` so they share no name with any
/// symbol of `current`.
pub fn rename_apart(incoming: &View, current: &View) -> View {
    let mut taken: BTreeSet<String> = prefix_vars(current);
    taken.extend(current.constants());
    taken.extend(incoming.constants());
    taken.extend(prefix_vars(incoming));
    let mut map = BTreeMap::new();
    for (name, _) in incoming.prefix() {
        if prefix_vars(current).contains(name) || current.constants().contains(name) {
            let fresh = (1..)
                .map(|i| format!("{name}{i}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded supply of names");
            taken.insert(fresh.clone());
            map.insert(name.clone(), fresh);
        }
    }
    if map.is_empty() {
        incoming.clone()
    } else {
        incoming.rename(&map)
    }
}

/// Renames variables of `v` that share a name with a constant of `other`.
fn clear_constant_clashes(v: &View, other: &View) -> View {
    let consts = other.constants();
    if !prefix_vars(v).iter().any(|n| consts.contains(n)) {
        return v.clone();
    }
    let mut taken: BTreeSet<String> = prefix_vars(v);
    taken.extend(v.constants());
    taken.extend(consts.iter().cloned());
    taken.extend(prefix_vars(other));
    let mut map = BTreeMap::new();
    for (name, _) in v.prefix() {
        if consts.contains(name) {
            let fresh = (1..)
                .map(|i| format!("{name}{i}"))
                .find(|c| !taken.contains(c))
                .expect("unbounded supply of names");
            taken.insert(fresh.clone());
            map.insert(name.clone(), fresh);
        }
    }
    v.rename(&map)
}

fn joined_prefix(a: &View, b: &View) -> Vec<(String, Quantifier)> {
    let mut out: Vec<(String, Quantifier)> = a.prefix().to_vec();
    for (name, q) in b.prefix() {
        if !out.iter().any(|(n, _)| n == name) {
            out.push((name.clone(), *q));
        }
    }
    out
}

/// Classical negation of a disjunction of states, as a disjunction of states.
pub fn negate_states(states: &BTreeSet<State>) -> BTreeSet<State> {
    let mut acc: BTreeSet<State> = verum_states();
    for s in states {
        let mut next = BTreeSet::new();
        for partial in &acc {
            for lit in s.literals() {
                let mut st = partial.clone();
                st.insert(lit.negated());
                if !st.is_contradictory() {
                    next.insert(st);
                }
            }
        }
        acc = next;
    }
    acc
}

/// Material reading of a conditional view: `{S∪Γ for each pair} ∪ ¬S`.
pub fn depose(v: &View) -> View {
    if v.has_verum_supposition() {
        return v.clone();
    }
    let mut stage = BTreeSet::new();
    for s in v.supposition() {
        for g in v.stage() {
            let st = s.union(g);
            if !st.is_contradictory() {
                stage.insert(st);
            }
        }
    }
    stage.extend(negate_states(v.supposition()));
    View::assemble(v.prefix().to_vec(), stage, verum_states())
}

fn categorical_update(current: &View, incoming: &View) -> (View, UpdateRule) {
    let bindable = prefix_vars(incoming);
    let mut scored = Vec::new();
    for g in current.stage() {
        for d in incoming.stage() {
            scored.push((g, d, state_match(g, d, &bindable)));
        }
    }
    let best = scored
        .iter()
        .map(|(_, _, m)| (m.score, m.issue_score))
        .max()
        .unwrap_or((0, 0));
    let prefix = joined_prefix(current, incoming);
    if best.0 > 0 {
        let stage = scored
            .iter()
            .filter(|(_, _, m)| (m.score, m.issue_score) == best)
            .map(|(g, d, m)| g.apply(&m.subst).union(&d.apply(&m.subst)))
            .collect();
        return (View::assemble(prefix, stage, verum_states()), UpdateRule::Match);
    }
    let stage: BTreeSet<State> = scored
        .iter()
        .map(|(g, d, _)| g.union(d))
        .filter(|s| !s.is_contradictory())
        .collect();
    if stage.is_empty() {
        (current.clone(), UpdateRule::Unchanged)
    } else {
        (View::assemble(prefix, stage, verum_states()), UpdateRule::Product)
    }
}

/// Binds `bindable` so that every state of `patterns` has an instance in
/// `container`.
fn contains_all(
    container: &State,
    patterns: &BTreeSet<State>,
    bindable: &BTreeSet<String>,
) -> Option<Substitution> {
    let mut subst = Substitution::new();
    for p in patterns {
        subst = contains_instance(container, p, bindable, &subst)?;
    }
    Some(subst)
}

fn try_discharge(current: &View, incoming: &View) -> Option<View> {
    let bindable = prefix_vars(current);
    let subst = incoming
        .stage()
        .iter()
        .find_map(|d| contains_all(d, current.supposition(), &bindable))?;
    let stage = current.stage().iter().map(|s| s.apply(&subst)).collect();
    Some(View::assemble(
        joined_prefix(current, incoming),
        stage,
        verum_states(),
    ))
}

fn try_contrapositive(current: &View, incoming: &View) -> Option<View> {
    if incoming.stage().is_empty() || current.stage().is_empty() {
        return None;
    }
    let bindable = prefix_vars(current);
    let mut subst = Substitution::new();
    for g in current.stage() {
        for d in incoming.stage() {
            subst = g.literals().find_map(|l| {
                d.literals()
                    .find_map(|m| literal_match(m, &l.negated(), &subst, &bindable))
            })?;
        }
    }
    let negated = current.supposition().iter().map(|s| s.apply(&subst)).collect();
    let stage = negate_states(&negated);
    Some(View::assemble(
        joined_prefix(current, incoming),
        stage,
        verum_states(),
    ))
}

/// Every state of `covered` contains an instance of some state of `covers`,
/// binding only `bindable`, under one shared substitution.
fn covers_states(
    covered: &BTreeSet<State>,
    covers: &BTreeSet<State>,
    bindable: &BTreeSet<String>,
) -> Option<Substitution> {
    let mut subst = Substitution::new();
    for c in covered {
        subst = covers
            .iter()
            .find_map(|p| contains_instance(c, p, bindable, &subst))?;
    }
    Some(subst)
}

fn try_chain(current: &View, incoming: &View) -> Option<View> {
    let bindable = prefix_vars(incoming);
    let subst = covers_states(incoming.stage(), current.supposition(), &bindable)?;
    let supposition = incoming
        .supposition()
        .iter()
        .map(|s| s.apply(&subst))
        .collect();
    Some(View::assemble(
        joined_prefix(current, incoming),
        current.stage().clone(),
        supposition,
    ))
}

fn try_reverse_chain(current: &View, incoming: &View) -> Option<View> {
    let bindable = prefix_vars(incoming);
    let subst = covers_states(current.stage(), incoming.supposition(), &bindable)?;
    let stage = incoming.stage().iter().map(|s| s.apply(&subst)).collect();
    Some(View::assemble(
        joined_prefix(current, incoming),
        stage,
        current.supposition().clone(),
    ))
}

/// Update with the rule that fired.
pub fn update_with_rule(current: &View, incoming: &View) -> (View, UpdateRule) {
    let current = &clear_constant_clashes(current, incoming);
    let incoming = rename_apart(incoming, current);
    match (current.has_verum_supposition(), incoming.has_verum_supposition()) {
        (true, true) => categorical_update(current, &incoming),
        (false, true) => {
            if let Some(discharged) = try_discharge(current, &incoming) {
                let (v, _) = categorical_update(&discharged, &incoming);
                (v, UpdateRule::Discharge)
            } else if let Some(v) = try_contrapositive(current, &incoming) {
                (v, UpdateRule::Contrapositive)
            } else {
                categorical_update(&depose(current), &incoming)
            }
        }
        (false, false) => {
            if let Some(v) = try_chain(current, &incoming) {
                (v, UpdateRule::Chain)
            } else if let Some(v) = try_reverse_chain(current, &incoming) {
                (v, UpdateRule::ReverseChain)
            } else {
                categorical_update(&depose(current), &depose(&incoming))
            }
        }
        (true, false) => categorical_update(current, &depose(&incoming)),
    }
}

/// Updates `current` with `incoming`.
pub fn update(current: &View, incoming: &View) -> View {
    update_with_rule(current, incoming).0
}

/// True when every alternative of `v` contains an instance of some
/// alternative of `q`.
pub fn endorses(v: &View, q: &View) -> bool {
    let v = &clear_constant_clashes(v, q);
    let q = rename_apart(q, v);
    let bindable = prefix_vars(&q);
    v.stage().iter().all(|g| {
        q.stage()
            .iter()
            .any(|s| contains_instance(g, s, &bindable, &Substitution::new()).is_some())
    })
}

/// Returns `q` when `v` endorses it, `v` otherwise.
pub fn query(v: &View, q: &View) -> View {
    if endorses(v, q) {
        q.clone()
    } else {
        v.clone()
    }
}

/// Drops contradictory alternatives (unless none would remain), alternatives
/// that strictly contain another alternative, and unused prefix variables.
pub fn factor(v: &View) -> View {
    let consistent: BTreeSet<State> = v
        .stage()
        .iter()
        .filter(|s| !s.is_contradictory())
        .cloned()
        .collect();
    let stage = if consistent.is_empty() {
        v.stage().clone()
    } else {
        consistent
    };
    let minimal = stage
        .iter()
        .filter(|s| !stage.iter().any(|o| o != *s && o.is_subset(s)))
        .cloned()
        .collect();
    View::assemble(v.prefix().to_vec(), minimal, v.supposition().clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<UpdateRule>,
    pub inputs: Vec<View>,
    pub output: View,
}

/// Ordered record of the operations behind a prediction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub steps: Vec<TraceStep>,
}

impl InferenceTrace {
    /// Re-runs every step and checks the outputs and the chaining between
    /// steps.
    pub fn replay(&self) -> Result<View, String> {
        let mut last: Option<&View> = None;
        for (i, step) in self.steps.iter().enumerate() {
            if let (Some(prev), Some(first)) = (last, step.inputs.first()) {
                if prev != first {
                    return Err(format!("step {i} does not start from the previous output"));
                }
            }
            let (out, rule) = match (step.op.as_str(), step.inputs.as_slice()) {
                ("update", [a, b]) => {
                    let (v, r) = update_with_rule(a, b);
                    (v, Some(r))
                }
                ("factor", [a]) => (factor(a), None),
                ("start", [a]) => (a.clone(), None),
                (op, inputs) => {
                    return Err(format!("step {i}: unknown op {op} with {} inputs", inputs.len()))
                }
            };
            if out != step.output || rule != step.rule {
                return Err(format!("step {i} ({}) does not reproduce", step.op));
            }
            last = Some(&step.output);
        }
        last.cloned().ok_or_else(|| "empty trace".to_owned())
    }
}

impl fmt::Display for InferenceTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            match step.rule {
                Some(rule) => write!(f, "{}[{rule}]", step.op)?,
                None => write!(f, "{}", step.op)?,
            }
            let inputs: Vec<String> = step.inputs.iter().map(View::to_string).collect();
            writeln!(f, "({}) => {}", inputs.join(", "), step.output)?;
        }
        Ok(())
    }
}

/// Default procedure: fold Update over the premises in order, then Factor.
pub fn what_follows_traced(premises: &[View]) -> (View, InferenceTrace) {
    let mut trace = InferenceTrace::default();
    let Some((first, rest)) = premises.split_first() else {
        return (View::verum(), trace);
    };
    let mut current = first.clone();
    trace.steps.push(TraceStep {
        op: "start".into(),
        rule: None,
        inputs: vec![first.clone()],
        output: current.clone(),
    });
    for p in rest {
        let (next, rule) = update_with_rule(&current, p);
        trace.steps.push(TraceStep {
            op: "update".into(),
            rule: Some(rule),
            inputs: vec![current, p.clone()],
            output: next.clone(),
        });
        current = next;
    }
    let factored = factor(&current);
    trace.steps.push(TraceStep {
        op: "factor".into(),
        rule: None,
        inputs: vec![current],
        output: factored.clone(),
    });
    (factored, trace)
}

/// ETR-predicted conclusion of a premise list. An empty list yields verum.
pub fn what_follows(premises: &[View]) -> View {
    what_follows_traced(premises).0
}

/// Whether the default procedure endorses `q` from `premises`.
pub fn does_it_follow(premises: &[View], q: &View) -> bool {
    endorses(&what_follows(premises), q)
}
