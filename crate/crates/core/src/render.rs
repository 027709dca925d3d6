//! Thematic natural-language rendering of views and prompt assembly, plus the
//! inverse parser for sentences in the rendered grammar.
//!
//! Rendered sentences follow this shape:
//!
//! ```text
//! sentence := prefix* body "."
//! prefix   := "there is some " LABEL " such that " | "for every " LABEL ", "
//! body     := "if " disj ", then " disj | disj
//! disj     := "either " state ", or " state | state (", or " state)*
//! state    := literal (" and " literal)*
//! literal  := ENTITY " is " ("not ")? ATTRIBUTE
//! ```
//!
//! The first letter of a sentence is capitalised. Variables are labelled
//! X, Y, Z, W, U, V in prefix order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::Problem;
use crate::view::{Literal, Quantifier, State, Term, View};

const BUILTIN_THEMES: &str = include_str!("../data/themes.txt");
const CLOSING: &str = include_str!("../data/closing.txt");
const LABELS: [&str; 6] = ["X", "Y", "Z", "W", "U", "V"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("theme file line {line}: {msg}")]
    ThemeFormat { line: usize, msg: String },
    #[error("unknown theme `{0}`")]
    UnknownTheme(String),
    #[error("theme `{theme}` has {available} {kind} but the problem needs {needed}")]
    Capacity {
        theme: String,
        kind: &'static str,
        available: usize,
        needed: usize,
    },
    #[error("symbol `{0}` has no mapping")]
    Unmapped(String),
    #[error("mapping is not injective: `{0}` is used twice")]
    NotInjective(String),
    #[error("cannot render {0}")]
    Unrenderable(String),
    #[error("view uses more than {} variables", LABELS.len())]
    TooManyVariables,
    #[error("could not parse sentence at byte {pos}: expected {expected}")]
    Parse { pos: usize, expected: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub name: String,
    pub preamble: String,
    pub objects: Vec<String>,
    pub attributes: Vec<String>,
}

/// Parses the plain-text theme format documented at the top of
/// `data/themes.txt`.
pub fn parse_themes(text: &str) -> Result<Vec<Theme>, RenderError> {
    let mut out: Vec<Theme> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| RenderError::ThemeFormat {
            line: i + 1,
            msg: msg.to_owned(),
        };
        let (key, value) = line.split_once(':').ok_or_else(|| err("expected `key: value`"))?;
        let value = value.trim().to_owned();
        if value.is_empty() {
            return Err(err("empty value"));
        }
        if key == "theme" {
            out.push(Theme {
                name: value,
                preamble: String::new(),
                objects: Vec::new(),
                attributes: Vec::new(),
            });
            continue;
        }
        let theme = out.last_mut().ok_or_else(|| err("entry before any `theme:` line"))?;
        match key {
            "preamble" if theme.preamble.is_empty() => theme.preamble = value,
            "preamble" => return Err(err("second preamble")),
            "object" => theme.objects.push(value),
            "attribute" => theme.attributes.push(value),
            _ => return Err(err("unknown key")),
        }
    }
    for t in &out {
        if t.preamble.is_empty() {
            return Err(RenderError::ThemeFormat {
                line: 0,
                msg: format!("theme `{}` has no preamble", t.name),
            });
        }
        for list in [&t.objects, &t.attributes] {
            let unique: BTreeSet<&String> = list.iter().collect();
            if unique.len() != list.len() {
                return Err(RenderError::ThemeFormat {
                    line: 0,
                    msg: format!("theme `{}` repeats an entry", t.name),
                });
            }
        }
    }
    Ok(out)
}

pub fn load_themes(path: &Path) -> Result<Vec<Theme>, RenderError> {
    let text = std::fs::read_to_string(path).map_err(|e| RenderError::Io(e.to_string()))?;
    parse_themes(&text)
}

/// The twelve shipped themes.
pub fn builtin_themes() -> &'static [Theme] {
    static THEMES: OnceLock<Vec<Theme>> = OnceLock::new();
    THEMES.get_or_init(|| parse_themes(BUILTIN_THEMES).expect("shipped theme file is valid"))
}

pub fn theme_by_name(name: &str) -> Result<&'static Theme, RenderError> {
    builtin_themes()
        .iter()
        .find(|t| t.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| RenderError::UnknownTheme(name.to_owned()))
}

/// The fixed instruction paragraphs that close every standard prompt.
pub fn closing_block() -> &'static str {
    CLOSING
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeMapping {
    pub theme: String,
    pub predicates: BTreeMap<String, String>,
    pub constants: BTreeMap<String, String>,
    pub rng_seed: u64,
}

impl ThemeMapping {
    pub fn new(
        theme: &str,
        predicates: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
        constants: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>,
    ) -> Result<ThemeMapping, RenderError> {
        let m = ThemeMapping {
            theme: theme.to_owned(),
            predicates: predicates.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            constants: constants.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            rng_seed: 0,
        };
        m.check_injective()?;
        Ok(m)
    }

    fn check_injective(&self) -> Result<(), RenderError> {
        for map in [&self.predicates, &self.constants] {
            let mut seen = BTreeSet::new();
            for v in map.values() {
                if !seen.insert(v) {
                    return Err(RenderError::NotInjective(v.clone()));
                }
            }
        }
        Ok(())
    }

    fn attribute(&self, predicate: &str) -> Result<&str, RenderError> {
        self.predicates
            .get(predicate)
            .map(String::as_str)
            .ok_or_else(|| RenderError::Unmapped(predicate.to_owned()))
    }

    fn entity(&self, constant: &str) -> Result<&str, RenderError> {
        self.constants
            .get(constant)
            .map(String::as_str)
            .ok_or_else(|| RenderError::Unmapped(format!("{constant}()")))
    }
}

fn problem_symbols(views: &[&View]) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut preds = BTreeSet::new();
    let mut consts = BTreeSet::new();
    for v in views {
        preds.extend(v.predicates().into_keys());
        consts.extend(v.constants());
    }
    (preds, consts)
}

/// Draws an injective mapping of the problem's predicates and constants into
/// the theme's pools, deterministically from `seed`.
pub fn bind_theme(p: &Problem, theme: &Theme, seed: u64) -> Result<ThemeMapping, RenderError> {
    let mut views: Vec<&View> = p.premises.iter().collect();
    views.push(&p.predicted);
    bind_views(&views, theme, seed)
}

pub fn bind_views(views: &[&View], theme: &Theme, seed: u64) -> Result<ThemeMapping, RenderError> {
    let (preds, consts) = problem_symbols(views);
    let capacity = |kind, available: usize, needed: usize| {
        if needed > available {
            Err(RenderError::Capacity {
                theme: theme.name.clone(),
                kind,
                available,
                needed,
            })
        } else {
            Ok(())
        }
    };
    capacity("attributes", theme.attributes.len(), preds.len())?;
    capacity("objects", theme.objects.len(), consts.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs: Vec<&String> = theme.attributes.choose_multiple(&mut rng, preds.len()).collect();
    let objs: Vec<&String> = theme.objects.choose_multiple(&mut rng, consts.len()).collect();
    Ok(ThemeMapping {
        theme: theme.name.clone(),
        predicates: preds.into_iter().zip(attrs.into_iter().cloned()).collect(),
        constants: consts.into_iter().zip(objs.into_iter().cloned()).collect(),
        rng_seed: seed,
    })
}

/// Prompt layouts. `Standard` is the full question with the closing
/// instruction block; `Brief` is the shorter worked-example layout with plain
/// disjunctions and "Also, we know that" on later premises.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    #[default]
    Standard,
    Brief,
}

struct Renderer<'a> {
    mapping: &'a ThemeMapping,
    labels: BTreeMap<String, &'static str>,
    either: bool,
}

impl<'a> Renderer<'a> {
    fn for_view(v: &View, mapping: &'a ThemeMapping, either: bool) -> Result<Self, RenderError> {
        if v.prefix().len() > LABELS.len() {
            return Err(RenderError::TooManyVariables);
        }
        let labels = v
            .prefix()
            .iter()
            .zip(LABELS)
            .map(|((name, _), l)| (name.clone(), l))
            .collect();
        Ok(Renderer {
            mapping,
            labels,
            either,
        })
    }

    fn term(&self, t: &Term) -> Result<&str, RenderError> {
        match t {
            Term::Const(c) => self.mapping.entity(c),
            Term::Var(v) => self
                .labels
                .get(v)
                .copied()
                .ok_or_else(|| RenderError::Unmapped(v.clone())),
        }
    }

    fn literal(&self, l: &Literal) -> Result<String, RenderError> {
        let [arg] = l.args.as_slice() else {
            return Err(RenderError::Unrenderable(format!(
                "{l}: only one-place predicates have a natural-language form"
            )));
        };
        let entity = self.term(arg)?;
        let attr = self.mapping.attribute(&l.predicate)?;
        let neg = if l.positive { "" } else { "not " };
        Ok(format!("{entity} is {neg}{attr}"))
    }

    fn state(&self, s: &State) -> Result<String, RenderError> {
        if s.is_empty() {
            return Err(RenderError::Unrenderable("an empty state".into()));
        }
        let parts = s
            .literals()
            .map(|l| self.literal(l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(parts.join(" and "))
    }

    fn states(&self, states: &BTreeSet<State>) -> Result<String, RenderError> {
        if states.is_empty() {
            return Err(RenderError::Unrenderable("an absurd view".into()));
        }
        let parts = states
            .iter()
            .map(|s| self.state(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match parts.len() {
            2 if self.either => format!("either {}, or {}", parts[0], parts[1]),
            _ => parts.join(", or "),
        })
    }

    fn clause(&self, v: &View) -> Result<String, RenderError> {
        let mut out = String::new();
        for (name, q) in v.prefix() {
            let label = self.labels[name];
            match q {
                Quantifier::Existential => {
                    out.push_str(&format!("there is some {label} such that "))
                }
                Quantifier::Universal => out.push_str(&format!("for every {label}, ")),
            }
        }
        let stage = self.states(v.stage())?;
        if v.has_verum_supposition() {
            out.push_str(&stage);
        } else {
            let supp = self.states(v.supposition())?;
            out.push_str(&format!("if {supp}, then {stage}"));
        }
        Ok(out)
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Lowercase clause form, without capital or final period.
pub fn render_clause(v: &View, m: &ThemeMapping) -> Result<String, RenderError> {
    Renderer::for_view(v, m, true)?.clause(v)
}

/// One full sentence for a view.
pub fn render_view(v: &View, m: &ThemeMapping) -> Result<String, RenderError> {
    Ok(format!("{}.", capitalize(&render_clause(v, m)?)))
}

fn render_with(v: &View, m: &ThemeMapping, style: PromptStyle) -> Result<String, RenderError> {
    let either = style == PromptStyle::Standard;
    Renderer::for_view(v, m, either)?.clause(v)
}

/// Assembles the full prompt for a premise list.
pub fn render_premises(
    premises: &[View],
    theme: &Theme,
    m: &ThemeMapping,
    style: PromptStyle,
) -> Result<String, RenderError> {
    let mut out = String::new();
    match style {
        PromptStyle::Standard => {
            out.push_str(&theme.preamble);
            out.push('\n');
            for p in premises {
                out.push_str(&format!("- {}.\n", capitalize(&render_with(p, m, style)?)));
            }
            out.push('\n');
            out.push_str(CLOSING);
        }
        PromptStyle::Brief => {
            out.push_str(&theme.preamble);
            out.push_str("\n\n");
            for (i, p) in premises.iter().enumerate() {
                let body = render_with(p, m, style)?;
                if i == 0 {
                    out.push_str(&format!("- {}.\n", capitalize(&body)));
                } else {
                    out.push_str(&format!("- Also, we know that {body}.\n"));
                }
            }
            out.push('\n');
            out.push_str(
                CLOSING
                    .split("\n\n")
                    .nth(1)
                    .expect("closing block has the open question paragraph"),
            );
        }
    }
    Ok(out)
}

pub fn render_prompt(
    p: &Problem,
    theme: &Theme,
    m: &ThemeMapping,
    style: PromptStyle,
) -> Result<String, RenderError> {
    render_premises(&p.premises, theme, m, style)
}

/// Parses a sentence in the rendered grammar back into a view, using the
/// inverse of `m`. Matching is case-insensitive on the first letter and
/// tolerant of a missing final period.
pub fn parse_sentence(text: &str, m: &ThemeMapping) -> Result<View, RenderError> {
    let mut entities: Vec<(String, Term)> = m
        .constants
        .iter()
        .map(|(c, e)| (e.clone(), Term::constant(c.clone())))
        .collect();
    let mut attrs: Vec<(String, String)> = m
        .predicates
        .iter()
        .map(|(p, a)| (a.clone(), p.clone()))
        .collect();
    // Longest phrase first so that "planet X" wins over the label "X".
    entities.sort_by_key(|(e, _)| std::cmp::Reverse(e.len()));
    attrs.sort_by_key(|(a, _)| std::cmp::Reverse(a.len()));
    let trimmed = text.trim().trim_end_matches('.').trim_end();
    let mut p = SentenceParser {
        src: trimmed,
        pos: 0,
        entities,
        attrs,
        prefix: Vec::new(),
    };
    let view = p.sentence()?;
    if p.pos != p.src.len() {
        return Err(p.error("end of sentence"));
    }
    Ok(view)
}

/// Variable name used for a parsed label; prefixed so it cannot collide with
/// the single-letter constants of generated problems.
fn label_var(label: &str) -> String {
    format!("v{}", label.to_lowercase())
}

struct SentenceParser<'a> {
    src: &'a str,
    pos: usize,
    entities: Vec<(String, Term)>,
    attrs: Vec<(String, String)>,
    prefix: Vec<(String, Quantifier)>,
}

impl<'a> SentenceParser<'a> {
    fn error(&self, expected: &str) -> RenderError {
        RenderError::Parse {
            pos: self.pos,
            expected: expected.to_owned(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    /// Consumes `word` if it comes next, comparing case-insensitively.
    fn eat(&mut self, word: &str) -> bool {
        let rest = self.rest();
        if rest.len() >= word.len()
            && rest.is_char_boundary(word.len())
            && rest[..word.len()].eq_ignore_ascii_case(word)
        {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, word: &str) -> Result<(), RenderError> {
        if self.eat(word) {
            Ok(())
        } else {
            Err(self.error(&format!("`{word}`")))
        }
    }

    fn label(&mut self) -> Result<String, RenderError> {
        for l in LABELS {
            if self.rest().starts_with(l) {
                self.pos += l.len();
                return Ok(label_var(l));
            }
        }
        Err(self.error("a variable label"))
    }

    fn sentence(&mut self) -> Result<View, RenderError> {
        loop {
            if self.eat("there is some ") {
                let v = self.label()?;
                self.expect(" such that ")?;
                self.prefix.push((v, Quantifier::Existential));
            } else if self.eat("for every ") {
                let v = self.label()?;
                self.expect(", ")?;
                self.prefix.push((v, Quantifier::Universal));
            } else {
                break;
            }
        }
        let (stage, supposition) = if self.eat("if ") {
            let supp = self.disjunction()?;
            self.expect(", then ")?;
            (self.disjunction()?, supp)
        } else {
            (self.disjunction()?, crate::view::verum_states())
        };
        View::new(self.prefix.clone(), stage, supposition).map_err(|e| RenderError::Parse {
            pos: self.pos,
            expected: format!("a well-formed view ({e})"),
        })
    }

    fn disjunction(&mut self) -> Result<BTreeSet<State>, RenderError> {
        let either = self.eat("either ");
        let mut out = BTreeSet::from([self.state()?]);
        while self.eat(", or ") {
            out.insert(self.state()?);
        }
        if either && out.len() < 2 {
            return Err(self.error("`, or` after `either`"));
        }
        Ok(out)
    }

    fn state(&mut self) -> Result<State, RenderError> {
        let mut s = State::new();
        s.insert(self.literal()?);
        while self.eat(" and ") {
            s.insert(self.literal()?);
        }
        Ok(s)
    }

    fn literal(&mut self) -> Result<Literal, RenderError> {
        let term = self.term()?;
        self.expect(" is ")?;
        let positive = !self.eat("not ");
        let rest = self.rest();
        let found = self.attrs.iter().find(|(a, _)| {
            rest.len() >= a.len()
                && rest.is_char_boundary(a.len())
                && rest[..a.len()].eq_ignore_ascii_case(a)
                && rest[a.len()..]
                    .chars()
                    .next()
                    .map_or(true, |c| !c.is_alphanumeric() && c != '-')
        });
        let (attr, pred) = found.ok_or_else(|| self.error("a known attribute"))?;
        let (len, pred) = (attr.len(), pred.clone());
        self.pos += len;
        Ok(Literal::new(pred, vec![term], positive))
    }

    fn term(&mut self) -> Result<Term, RenderError> {
        let rest = self.rest();
        for (e, t) in &self.entities {
            if rest.len() >= e.len()
                && rest.is_char_boundary(e.len())
                && rest[..e.len()].eq_ignore_ascii_case(e)
            {
                self.pos += e.len();
                return Ok(t.clone());
            }
        }
        for l in LABELS {
            if rest.starts_with(l) {
                let name = label_var(l);
                if self.prefix.iter().any(|(n, _)| *n == name) {
                    self.pos += l.len();
                    return Ok(Term::var(name));
                }
            }
        }
        Err(self.error("a known entity or a bound label"))
    }
}
