//! Answer parsing and verdicts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::does_it_follow;
use crate::generate::Problem;
use crate::logic::{Oracle, OracleError};
use crate::render::{parse_sentence, ThemeMapping};
use crate::view::{alpha_equal, View};

const TRANSLATOR_PROMPT: &str = include_str!("../data/translator_prompt.txt");

/// Identifies the translator prompt text in run records.
pub const TRANSLATOR_PROMPT_VERSION: &str = "translator-v1";

const CONCLUSION_LEADS: [&str; 6] = [
    "from the premises, we can conclude that",
    "from the premises we can conclude that",
    "we can conclude that",
    "it follows that",
    "therefore,",
    "therefore",
];

const NOTHING_FOLLOWS: [&str; 16] = [
    "nothing follows",
    "nothing else follows",
    "nothing can be concluded",
    "nothing definitive",
    "cannot conclude",
    "cannot definitively conclude",
    "can't conclude",
    "can not conclude",
    "cannot be concluded",
    "cannot be determined",
    "cannot infer",
    "cannot determine",
    "no conclusion",
    "not possible to conclude",
    "unable to conclude",
    "no definitive conclusion",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerStatus {
    Parsed,
    NothingFollows,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub status: AnswerStatus,
    pub conclusion: Option<View>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ParsedAnswer {
    fn parse_error(raw: &str, why: impl Into<String>) -> Self {
        ParsedAnswer {
            status: AnswerStatus::ParseError,
            conclusion: None,
            raw: raw.to_owned(),
            error: Some(why.into()),
        }
    }

    /// The conclusion as judged: nothing-follows reads as verum.
    pub fn judged_conclusion(&self) -> Option<View> {
        match self.status {
            AnswerStatus::Parsed => self.conclusion.clone(),
            AnswerStatus::NothingFollows => Some(View::verum()),
            AnswerStatus::ParseError => None,
        }
    }
}

/// The text after the last "Answer:" marker, or the whole reply when there
/// is none, with markdown emphasis removed.
pub fn answer_segment(text: &str) -> String {
    let clean: String = text.replace("**", "").replace('`', "");
    let lower = clean.to_lowercase();
    let start = lower.rfind("answer:").map_or(0, |i| i + "answer:".len());
    let segment = clean[start..].trim();
    // Keep the first paragraph only: models often add explanations below.
    segment.split("\n\n").next().unwrap_or("").trim().to_owned()
}

fn strip_lead(segment: &str) -> &str {
    let lower = segment.to_lowercase();
    for lead in CONCLUSION_LEADS {
        if lower.starts_with(lead) {
            return segment[lead.len()..].trim_start();
        }
    }
    segment
}

pub fn says_nothing_follows(text: &str) -> bool {
    let lower = text.to_lowercase().replace('\u{2019}', "'");
    NOTHING_FOLLOWS.iter().any(|p| lower.contains(p))
}

/// Parses an answer written in the rendered grammar.
pub fn parse_answer(text: &str, m: &ThemeMapping) -> ParsedAnswer {
    let segment = answer_segment(text);
    if segment.is_empty() {
        return ParsedAnswer::parse_error(text, "empty answer");
    }
    if says_nothing_follows(&segment) {
        return ParsedAnswer {
            status: AnswerStatus::NothingFollows,
            conclusion: None,
            raw: text.to_owned(),
            error: None,
        };
    }
    let body = strip_lead(&segment);
    let first_line = body.lines().next().unwrap_or("").trim();
    match parse_sentence(first_line, m) {
        Ok(v) => ParsedAnswer {
            status: AnswerStatus::Parsed,
            conclusion: Some(v),
            raw: text.to_owned(),
            error: None,
        },
        Err(e) => ParsedAnswer::parse_error(text, e.to_string()),
    }
}

/// A rewriting endpoint that maps free-form answers into the answer grammar.
pub trait Translator {
    fn translate(&self, prompt: &str) -> Result<String, String>;
}

/// The request sent to the translator. It carries the answer and the theme
/// vocabulary, never the premises.
pub fn translator_prompt(answer: &str, m: &ThemeMapping) -> String {
    let entities: Vec<&str> = m.constants.values().map(String::as_str).collect();
    let attributes: Vec<&str> = m.predicates.values().map(String::as_str).collect();
    TRANSLATOR_PROMPT
        .replace("{entities}", &entities.join("; "))
        .replace("{attributes}", &attributes.join("; "))
        .replace("{answer}", answer.trim())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("empty reply")]
    Empty,
    #[error("translator failed after {attempts} attempts: {last}")]
    Failed { attempts: usize, last: String },
}

/// Rewrites `text` into the answer grammar. Answers that already parse come
/// back unchanged; otherwise the translator is tried up to `1 + retries`
/// times until its output parses.
pub fn translate_freeform(
    text: &str,
    m: &ThemeMapping,
    translator: &dyn Translator,
    retries: usize,
) -> Result<String, TranslateError> {
    if text.trim().is_empty() {
        return Err(TranslateError::Empty);
    }
    if parse_answer(text, m).status != AnswerStatus::ParseError {
        return Ok(text.to_owned());
    }
    let prompt = translator_prompt(text, m);
    let mut last = String::new();
    for _ in 0..=retries {
        match translator.translate(&prompt) {
            Ok(reply) => {
                if parse_answer(&reply, m).status != AnswerStatus::ParseError {
                    return Ok(reply);
                }
                last = format!("unparseable rewrite: {}", reply.trim());
            }
            Err(e) => last = e,
        }
    }
    Err(TranslateError::Failed {
        attempts: retries + 1,
        last,
    })
}

/// Direct parse first, translation as a fallback.
pub fn interpret(
    text: &str,
    m: &ThemeMapping,
    translator: Option<&dyn Translator>,
    retries: usize,
) -> ParsedAnswer {
    let direct = parse_answer(text, m);
    if direct.status != AnswerStatus::ParseError {
        return direct;
    }
    let Some(t) = translator else {
        return direct;
    };
    match translate_freeform(text, m, t, retries) {
        Ok(rewritten) => ParsedAnswer {
            raw: text.to_owned(),
            ..parse_answer(&rewritten, m)
        },
        Err(e) => ParsedAnswer::parse_error(text, e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Endorsement,
    Exact,
    UpToEquivalence,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "endorsement" => Ok(Mode::Endorsement),
            "exact" => Ok(Mode::Exact),
            "up-to-equivalence" => Ok(Mode::UpToEquivalence),
            _ => Err(format!("unknown mode `{s}` (endorsement, exact, up-to-equivalence)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub logically_correct: bool,
    pub etr_predicted: bool,
    pub human_like_fallacy: bool,
    pub mode: Mode,
}

impl Verdict {
    pub fn new(logically_correct: bool, etr_predicted: bool, mode: Mode) -> Verdict {
        Verdict {
            logically_correct,
            etr_predicted,
            human_like_fallacy: etr_predicted && !logically_correct,
            mode,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.human_like_fallacy == (self.etr_predicted && !self.logically_correct)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("cannot judge an unparsed answer")]
    Unparsed,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Scores a parsed answer against a problem.
pub fn judge_response(
    p: &Problem,
    a: &ParsedAnswer,
    mode: Mode,
    oracle: &Oracle,
) -> Result<Verdict, JudgeError> {
    match a.status {
        AnswerStatus::ParseError => Err(JudgeError::Unparsed),
        // Verum is entailed by anything, and is only predicted when the
        // prediction itself is verum.
        AnswerStatus::NothingFollows => Ok(Verdict::new(true, p.predicted.is_verum(), mode)),
        AnswerStatus::Parsed => {
            let c = a.conclusion.as_ref().ok_or(JudgeError::Unparsed)?;
            judge_conclusion(p, c, mode, oracle)
        }
    }
}

pub fn judge_conclusion(
    p: &Problem,
    c: &View,
    mode: Mode,
    oracle: &Oracle,
) -> Result<Verdict, JudgeError> {
    let correct = oracle.entails_views(&p.premises, c)?;
    let predicted = match mode {
        Mode::Endorsement => does_it_follow(&p.premises, c),
        Mode::Exact => alpha_equal(c, &p.predicted),
        Mode::UpToEquivalence => oracle.equivalent_views(c, &p.predicted)?,
    };
    Ok(Verdict::new(correct, predicted, mode))
}
