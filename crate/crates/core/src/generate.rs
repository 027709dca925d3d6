//! Seed bank, mutation rules and the problem generation loop.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::what_follows;
use crate::logic::{to_classical, Formula, Oracle, OracleError};
use crate::view::{alpha_equal, parse_view, Literal, Quantifier, State, Term, View};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("mutation {0} does not apply to this view")]
    Inapplicable(MutationKind),
    #[error("no problem found after {0} attempts")]
    Exhausted(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad problem record on line {line}: {msg}")]
    Record { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedName {
    ModusPonens,
    ModusTollens,
    QuantifiedModusPonens,
    DisjunctionFallacy,
}

impl fmt::Display for SeedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeedName::ModusPonens => "modus-ponens",
            SeedName::ModusTollens => "modus-tollens",
            SeedName::QuantifiedModusPonens => "quantified-modus-ponens",
            SeedName::DisjunctionFallacy => "disjunction-fallacy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTemplate {
    pub name: SeedName,
    pub premises: Vec<View>,
    pub conclusion: View,
}

const SEEDS: [(SeedName, &[&str], &str); 4] = [
    (
        SeedName::ModusPonens,
        &["{R(x())}^{Q(x())}", "{Q(x())}"],
        "{R(x())}",
    ),
    (
        SeedName::ModusTollens,
        &["{R(x())}^{Q(x())}", "{~R(x())}"],
        "{~Q(x())}",
    ),
    (
        SeedName::QuantifiedModusPonens,
        &["∀x {R(x)}^{Q(x)}", "∀x {Q(x)}^{P(x)}"],
        "∀x {R(x)}^{P(x)}",
    ),
    (
        SeedName::DisjunctionFallacy,
        &["{Q(x())R(x()),S(x())T(x())}", "{Q(x())}"],
        "{R(x())}",
    ),
];

/// The four original problems.
pub fn seed_bank() -> Vec<SeedTemplate> {
    SEEDS
        .iter()
        .map(|(name, premises, conclusion)| SeedTemplate {
            name: *name,
            premises: premises
                .iter()
                .map(|p| parse_view(p).expect("seed view parses"))
                .collect(),
            conclusion: parse_view(conclusion).expect("seed view parses"),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    PredicateAddition,
    ConstantAddition,
    VariableAddition,
    ConstantToVariableSubstitution,
    ConjunctiveAtomInsertion,
    DisjunctiveStateAddition,
    AtomNegation,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::PredicateAddition,
        MutationKind::ConstantAddition,
        MutationKind::VariableAddition,
        MutationKind::ConstantToVariableSubstitution,
        MutationKind::ConjunctiveAtomInsertion,
        MutationKind::DisjunctiveStateAddition,
        MutationKind::AtomNegation,
    ];
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MutationKind::PredicateAddition => "predicate-addition",
            MutationKind::ConstantAddition => "constant-addition",
            MutationKind::VariableAddition => "variable-addition",
            MutationKind::ConstantToVariableSubstitution => "constant-to-variable-substitution",
            MutationKind::ConjunctiveAtomInsertion => "conjunctive-atom-insertion",
            MutationKind::DisjunctiveStateAddition => "disjunctive-state-addition",
            MutationKind::AtomNegation => "atom-negation",
        };
        f.write_str(s)
    }
}

const PREDICATE_ALPHABET: [&str; 12] = ["P", "Q", "R", "S", "T", "U", "V", "W", "K", "L", "M", "N"];
const CONSTANT_ALPHABET: [&str; 8] = ["x", "y", "z", "w", "a", "b", "c", "d"];
const VARIABLE_ALPHABET: [&str; 8] = ["u", "v", "s", "t", "p", "q", "r", "o"];

/// Symbols that mutations may introduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pools {
    pub predicates: Vec<String>,
    pub constants: Vec<String>,
    pub variables: Vec<String>,
}

impl Pools {
    pub fn new(predicates: usize, constants: usize) -> Pools {
        let take = |xs: &[&str], n: usize| xs.iter().take(n).map(|s| s.to_string()).collect();
        Pools {
            predicates: take(&PREDICATE_ALPHABET, predicates),
            constants: take(&CONSTANT_ALPHABET, constants),
            variables: take(&VARIABLE_ALPHABET, VARIABLE_ALPHABET.len()),
        }
    }
}

impl Default for Pools {
    fn default() -> Self {
        Pools::new(6, 4)
    }
}

/// Generator settings. Every field has a default so partial config files
/// deserialize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub max_premises: usize,
    pub min_mutations: usize,
    pub max_mutations: usize,
    pub predicate_pool: usize,
    pub constant_pool: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub max_attempts: usize,
    pub backtrack_limit: usize,
    pub oracle_cap: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_premises: 5,
            min_mutations: 1,
            max_mutations: 3,
            predicate_pool: 6,
            constant_pool: 4,
            min_atoms: 4,
            max_atoms: 11,
            max_attempts: 20_000,
            backtrack_limit: 25,
            oracle_cap: crate::logic::DEFAULT_DOMAIN_CAP,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_owned()));
        if self.max_premises == 0 || self.max_attempts == 0 || self.backtrack_limit == 0 {
            return bad("max_premises, max_attempts and backtrack_limit must be positive");
        }
        if self.min_mutations == 0 || self.min_mutations > self.max_mutations {
            return bad("mutation counts must satisfy 1 <= min_mutations <= max_mutations");
        }
        if self.min_atoms == 0 || self.min_atoms > self.max_atoms {
            return bad("atom budget must satisfy 1 <= min_atoms <= max_atoms");
        }
        if !(5..=PREDICATE_ALPHABET.len()).contains(&self.predicate_pool) {
            return bad("predicate_pool must cover the seed predicates (5) and fit the alphabet (12)");
        }
        if !(1..=CONSTANT_ALPHABET.len()).contains(&self.constant_pool) {
            return bad("constant_pool must be between 1 and 8");
        }
        Ok(())
    }

    pub fn pools(&self) -> Pools {
        Pools::new(self.predicate_pool, self.constant_pool)
    }
}

/// Editable copy of a view's parts.
struct Parts {
    prefix: Vec<(String, Quantifier)>,
    stage: Vec<State>,
    supposition: Vec<State>,
}

#[derive(Clone, Copy)]
enum Slot {
    Stage(usize),
    Supposition(usize),
}

impl Parts {
    fn of(v: &View) -> Parts {
        Parts {
            prefix: v.prefix().to_vec(),
            stage: v.stage().iter().cloned().collect(),
            supposition: v.supposition().iter().cloned().collect(),
        }
    }

    fn supposition_is_verum(&self) -> bool {
        self.supposition.len() == 1 && self.supposition[0].is_empty()
    }

    /// States that may receive a new conjunct.
    fn slots(&self) -> Vec<Slot> {
        let mut out: Vec<Slot> = (0..self.stage.len()).map(Slot::Stage).collect();
        if !self.supposition_is_verum() {
            out.extend((0..self.supposition.len()).map(Slot::Supposition));
        }
        out
    }

    fn state(&self, slot: Slot) -> &State {
        match slot {
            Slot::Stage(i) => &self.stage[i],
            Slot::Supposition(i) => &self.supposition[i],
        }
    }

    fn state_mut(&mut self, slot: Slot) -> &mut State {
        match slot {
            Slot::Stage(i) => &mut self.stage[i],
            Slot::Supposition(i) => &mut self.supposition[i],
        }
    }

    fn accepts(&self, slot: Slot, lit: &Literal) -> bool {
        let s = self.state(slot);
        !s.contains(lit) && !s.contains(&lit.negated())
    }

    fn terms(&self) -> Vec<Term> {
        let set: BTreeSet<Term> = self
            .stage
            .iter()
            .chain(&self.supposition)
            .flat_map(|s| s.literals().flat_map(|l| l.args.clone()))
            .collect();
        set.into_iter().collect()
    }

    fn predicates(&self) -> BTreeSet<String> {
        self.stage
            .iter()
            .chain(&self.supposition)
            .flat_map(|s| s.literals().map(|l| l.predicate.clone()))
            .collect()
    }

    fn names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.terms().iter().map(|t| t.name().to_owned()).collect();
        out.extend(self.prefix.iter().map(|(n, _)| n.clone()));
        out
    }

    fn build(mut self) -> Option<View> {
        let used: BTreeSet<String> = self
            .stage
            .iter()
            .chain(&self.supposition)
            .flat_map(|s| s.vars())
            .collect();
        self.prefix.retain(|(n, _)| used.contains(n));
        View::new(
            self.prefix,
            self.stage.into_iter().collect(),
            self.supposition.into_iter().collect(),
        )
        .ok()
    }
}

fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> Option<&'a T> {
    items.choose(rng)
}

fn fresh(pool: &[String], used: &BTreeSet<String>) -> Vec<String> {
    pool.iter().filter(|p| !used.contains(*p)).cloned().collect()
}

fn random_quantifier<R: Rng + ?Sized>(rng: &mut R) -> Quantifier {
    if rng.gen_bool(0.5) {
        Quantifier::Universal
    } else {
        Quantifier::Existential
    }
}

fn unary(pred: &str, t: Term, positive: bool) -> Literal {
    Literal::new(pred, vec![t], positive)
}

/// Applies one structural edit of the given kind.
pub fn mutate<R: Rng + ?Sized>(
    v: &View,
    kind: MutationKind,
    pools: &Pools,
    rng: &mut R,
) -> Result<View, GenError> {
    let fail = || GenError::Inapplicable(kind);
    let mut parts = Parts::of(v);
    let slots = parts.slots();
    let terms = parts.terms();
    let preds: Vec<String> = parts.predicates().into_iter().collect();
    match kind {
        MutationKind::PredicateAddition => {
            let new = fresh(&pools.predicates, &parts.predicates());
            let p = pick(&new, rng).ok_or_else(fail)?;
            let t = pick(&terms, rng).ok_or_else(fail)?.clone();
            let slot = *pick(&slots, rng).ok_or_else(fail)?;
            parts.state_mut(slot).insert(unary(p, t, true));
        }
        MutationKind::ConstantAddition => {
            let new = fresh(&pools.constants, &parts.names());
            let c = pick(&new, rng).ok_or_else(fail)?;
            let p = pick(&preds, rng).ok_or_else(fail)?;
            let slot = *pick(&slots, rng).ok_or_else(fail)?;
            parts
                .state_mut(slot)
                .insert(unary(p, Term::constant(c.clone()), true));
        }
        MutationKind::VariableAddition => {
            let new = fresh(&pools.variables, &parts.names());
            let x = pick(&new, rng).ok_or_else(fail)?.clone();
            let p = pick(&preds, rng).ok_or_else(fail)?;
            let slot = *pick(&slots, rng).ok_or_else(fail)?;
            parts.prefix.push((x.clone(), random_quantifier(rng)));
            parts.state_mut(slot).insert(unary(p, Term::var(x), true));
        }
        MutationKind::ConstantToVariableSubstitution => {
            let consts: Vec<&Term> = terms.iter().filter(|t| !t.is_var()).collect();
            let c = (*pick(&consts, rng).ok_or_else(fail)?).clone();
            let new = fresh(&pools.variables, &parts.names());
            let x = pick(&new, rng).ok_or_else(fail)?.clone();
            let replacement = Term::var(x.clone());
            parts.prefix.push((x, random_quantifier(rng)));
            for s in parts.stage.iter_mut().chain(parts.supposition.iter_mut()) {
                *s = s
                    .literals()
                    .map(|l| {
                        let mut l = l.clone();
                        for a in &mut l.args {
                            if *a == c {
                                *a = replacement.clone();
                            }
                        }
                        l
                    })
                    .collect();
            }
        }
        MutationKind::ConjunctiveAtomInsertion => {
            let mut options = Vec::new();
            for &slot in &slots {
                for p in &preds {
                    for t in &terms {
                        for positive in [true, false] {
                            let lit = unary(p, t.clone(), positive);
                            if parts.accepts(slot, &lit) {
                                options.push((slot, lit));
                            }
                        }
                    }
                }
            }
            let (slot, lit) = pick(&options, rng).ok_or_else(fail)?.clone();
            parts.state_mut(slot).insert(lit);
        }
        MutationKind::DisjunctiveStateAddition => {
            let new = fresh(&pools.predicates, &parts.predicates());
            let p = match pick(&new, rng) {
                Some(p) => p.clone(),
                None => pick(&preds, rng).ok_or_else(fail)?.clone(),
            };
            let t = pick(&terms, rng).ok_or_else(fail)?.clone();
            let state: State = std::iter::once(unary(&p, t, true)).collect();
            if parts.stage.contains(&state) {
                return Err(fail());
            }
            parts.stage.push(state);
        }
        MutationKind::AtomNegation => {
            let mut options = Vec::new();
            let all_slots = (0..parts.stage.len())
                .map(Slot::Stage)
                .chain((0..parts.supposition.len()).map(Slot::Supposition));
            for slot in all_slots {
                for l in parts.state(slot).literals() {
                    if !parts.state(slot).contains(&l.negated()) {
                        options.push((slot, l.clone()));
                    }
                }
            }
            let (slot, lit) = pick(&options, rng).ok_or_else(fail)?.clone();
            let state = parts.state_mut(slot);
            *state = state
                .literals()
                .map(|l| if *l == lit { l.negated() } else { l.clone() })
                .collect();
        }
    }
    let out = parts.build().ok_or_else(fail)?;
    if out == *v {
        return Err(fail());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageStep {
    pub seed: SeedName,
    pub seed_premise: usize,
    pub mutations: Vec<MutationKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallacyCertificate {
    pub entailed: bool,
    pub oracle_bound_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub premises: Vec<View>,
    pub predicted: View,
    pub certificate: FallacyCertificate,
    pub lineage: Vec<LineageStep>,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversed_of: Option<String>,
}

/// Stable identifier: SHA-256 over the canonical premise notation.
pub fn problem_id(premises: &[View]) -> String {
    let mut h = Sha256::new();
    for p in premises {
        h.update(p.to_string().as_bytes());
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}

pub fn total_atoms(premises: &[View]) -> usize {
    premises.iter().map(View::atom_count).sum()
}

fn masked(l: &Literal) -> (String, bool, Vec<Option<String>>) {
    let args = l
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(_) => None,
        })
        .collect();
    (l.predicate.clone(), l.positive, args)
}

/// A prediction is non-trivial when it is neither absurd nor verum, has no
/// self-contradictory state, and says something beyond echoing a
/// single-state categorical premise.
pub fn is_nontrivial(premises: &[View], predicted: &View) -> bool {
    if predicted.stage().is_empty()
        || predicted.is_verum()
        || predicted.stage().iter().any(State::is_contradictory)
    {
        return false;
    }
    let echoed: BTreeSet<_> = premises
        .iter()
        .filter(|p| p.is_categorical() && p.stage().len() == 1)
        .flat_map(|p| p.literals().map(masked).collect::<Vec<_>>())
        .collect();
    predicted.literals().any(|l| !echoed.contains(&masked(l)))
}

fn is_single_categorical(v: &View) -> bool {
    v.is_categorical() && v.stage().len() == 1 && !v.is_verum()
}

fn classical(views: &[View]) -> Vec<Formula> {
    views.iter().map(to_classical).collect()
}

fn certify(
    oracle: &Oracle,
    premises: &[View],
    predicted: &View,
) -> Result<FallacyCertificate, OracleError> {
    let ps = classical(premises);
    let c = to_classical(predicted);
    let mut all = ps.clone();
    all.push(c.clone());
    let bound = oracle.bound(&all)?;
    Ok(FallacyCertificate {
        entailed: oracle.entails(&ps, &c)?,
        oracle_bound_used: bound,
    })
}

/// SplitMix64 step, used to derive per-problem seeds from a master seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn problem_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Runs the generation loop with its own generator seeded from `rng_seed`.
pub fn generate_problem(cfg: &GenConfig, rng_seed: u64) -> Result<Problem, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let bank = seed_bank();
    let pools = cfg.pools();
    let oracle = Oracle::new(cfg.oracle_cap);
    let mut premises: Vec<View> = Vec::new();
    let mut lineage: Vec<LineageStep> = Vec::new();
    let mut backtracks = 0;

    for _ in 0..cfg.max_attempts {
        let template = bank.choose(&mut rng).expect("non-empty bank");
        let seed_premise = rng.gen_range(0..template.premises.len());
        let mut view = template.premises[seed_premise].clone();
        let mut applied = Vec::new();
        for _ in 0..rng.gen_range(cfg.min_mutations..=cfg.max_mutations) {
            let mut kinds = MutationKind::ALL;
            kinds.shuffle(&mut rng);
            for kind in kinds {
                if let Ok(next) = mutate(&view, kind, &pools, &mut rng) {
                    view = next;
                    applied.push(kind);
                    break;
                }
            }
        }

        let mut candidate = premises.clone();
        candidate.push(view.clone());
        let atoms = total_atoms(&candidate);
        if atoms > cfg.max_atoms {
            if premises.pop().is_some() {
                lineage.pop();
            }
            backtracks += 1;
            if backtracks > cfg.backtrack_limit {
                premises.clear();
                lineage.clear();
                backtracks = 0;
            }
            continue;
        }
        let predicted = what_follows(&candidate);
        if !is_nontrivial(&candidate, &predicted) {
            continue;
        }
        premises = candidate;
        lineage.push(LineageStep {
            seed: template.name,
            seed_premise,
            mutations: applied,
        });

        if atoms >= cfg.min_atoms && is_single_categorical(&predicted) {
            if let Ok(cert) = certify(&oracle, &premises, &predicted) {
                if !cert.entailed {
                    return Ok(Problem {
                        id: problem_id(&premises),
                        premises,
                        predicted,
                        certificate: cert,
                        lineage,
                        rng_seed,
                        reversed_of: None,
                    });
                }
            }
        }
        if premises.len() >= cfg.max_premises {
            premises.pop();
            lineage.pop();
            backtracks += 1;
            if backtracks > cfg.backtrack_limit {
                premises.clear();
                lineage.clear();
                backtracks = 0;
            }
        }
    }
    Err(GenError::Exhausted(cfg.max_attempts))
}

/// Generates `count` problems with seeds derived from `cfg.seed`. Seeds that
/// repeat an earlier problem id are skipped.
pub fn generate_batch(cfg: &GenConfig, count: usize) -> Result<Vec<Problem>, GenError> {
    let mut out = Vec::with_capacity(count);
    let mut seen = BTreeSet::new();
    let mut index = 0u64;
    while out.len() < count {
        let p = generate_problem(cfg, problem_seed(cfg.seed, index))?;
        index += 1;
        if seen.insert(p.id.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// The premise-order twin, with the prediction recomputed.
pub fn reverse_premises(p: &Problem) -> Problem {
    let premises: Vec<View> = p.premises.iter().rev().cloned().collect();
    let predicted = what_follows(&premises);
    Problem {
        id: problem_id(&premises),
        predicted,
        certificate: p.certificate.clone(),
        lineage: p.lineage.iter().rev().cloned().collect(),
        rng_seed: p.rng_seed,
        reversed_of: Some(p.id.clone()),
        premises,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    AtomBudget { atoms: usize, min: usize, max: usize },
    NotCategorical { predicted: String },
    Entailed,
    CertificateMismatch,
    PredictionMismatch { stored: String, recomputed: String },
    NonMonadic { predicate: String, arity: usize },
    Trivial,
    IdMismatch { stored: String, recomputed: String },
    Oracle { message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_problem(p: &Problem, cfg: &GenConfig) -> ValidationReport {
    let mut v = Vec::new();
    let atoms = total_atoms(&p.premises);
    if atoms < cfg.min_atoms || atoms > cfg.max_atoms {
        v.push(Violation::AtomBudget {
            atoms,
            min: cfg.min_atoms,
            max: cfg.max_atoms,
        });
    }
    for view in &p.premises {
        for (pred, arity) in view.predicates() {
            if arity != 1 {
                v.push(Violation::NonMonadic {
                    predicate: pred,
                    arity,
                });
            }
        }
    }
    let recomputed = what_follows(&p.premises);
    if !alpha_equal(&recomputed, &p.predicted) {
        v.push(Violation::PredictionMismatch {
            stored: p.predicted.to_string(),
            recomputed: recomputed.to_string(),
        });
    }
    if !is_single_categorical(&p.predicted) {
        v.push(Violation::NotCategorical {
            predicted: p.predicted.to_string(),
        });
    }
    if !is_nontrivial(&p.premises, &p.predicted) {
        v.push(Violation::Trivial);
    }
    match certify(&Oracle::new(cfg.oracle_cap), &p.premises, &p.predicted) {
        Ok(cert) => {
            if cert.entailed {
                v.push(Violation::Entailed);
            }
            if cert.entailed != p.certificate.entailed {
                v.push(Violation::CertificateMismatch);
            }
        }
        Err(e) => v.push(Violation::Oracle {
            message: e.to_string(),
        }),
    }
    let id = problem_id(&p.premises);
    if id != p.id {
        v.push(Violation::IdMismatch {
            stored: p.id.clone(),
            recomputed: id,
        });
    }
    ValidationReport { violations: v }
}

/// Writes one JSON problem per line.
pub fn write_problems(path: &Path, problems: &[Problem]) -> Result<(), GenError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in problems {
        let line = serde_json::to_string(p).map_err(|e| GenError::Record {
            line: 0,
            msg: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_problems(path: &Path) -> Result<Vec<Problem>, GenError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| GenError::Record {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
