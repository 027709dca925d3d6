use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use etrbench_core::generate::{reverse_premises, Problem};
use etrbench_core::judge::{
    interpret, judge_response, AnswerStatus, Mode, ParsedAnswer, Translator,
    TRANSLATOR_PROMPT_VERSION,
};
use etrbench_core::logic::Oracle;
use etrbench_core::record::{
    prompt_hash, Order, RecordKey, RecordStatus, RunRecord, RunStore, Usage,
};
use etrbench_core::render::{bind_theme, builtin_themes, render_prompt, PromptStyle, Theme, ThemeMapping};
use etrbench_core::stats::{exclusions, ExclusionManifest, PARSE_ERROR_THRESHOLD};

use crate::client::{complete_with_retries, ChatClient};
use crate::config::ModelSpec;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub max_in_flight: usize,
    pub style: PromptStyle,
    pub mode: Mode,
    pub oracle: Oracle,
    pub translator_retries: usize,
    /// Retry keys whose last record is a transport error.
    pub retry_transport_errors: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            max_in_flight: 8,
            style: PromptStyle::Standard,
            mode: Mode::Endorsement,
            oracle: Oracle::default(),
            translator_retries: 2,
            retry_transport_errors: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub skipped: usize,
    pub completed: usize,
    pub transport_errors: usize,
    pub parse_errors: usize,
}

/// The theme for a problem: its id read as a number, modulo the theme count.
pub fn theme_for(problem_id: &str, themes: &[Theme]) -> usize {
    let head = &problem_id[..problem_id.len().min(16)];
    let n = u64::from_str_radix(head, 16).unwrap_or_else(|_| {
        problem_id
            .bytes()
            .fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64))
    });
    (n % themes.len() as u64) as usize
}

/// Everything needed to send and judge one (problem, order) pair.
pub struct Prepared {
    pub problem: Problem,
    pub theme: &'static Theme,
    pub mapping: ThemeMapping,
    pub prompt: String,
}

/// Renders `p` in the given order. Both orders share the theme and mapping
/// drawn for the original problem.
pub fn prepare(p: &Problem, order: Order, style: PromptStyle) -> Result<Prepared, HarnessError> {
    let themes = builtin_themes();
    let theme = &themes[theme_for(&p.id, themes)];
    let mapping = bind_theme(p, theme, p.rng_seed).map_err(|e| HarnessError::Render(e.to_string()))?;
    let problem = match order {
        Order::Original => p.clone(),
        Order::Reversed => reverse_premises(p),
    };
    let prompt = render_prompt(&problem, theme, &mapping, style)
        .map_err(|e| HarnessError::Render(e.to_string()))?;
    Ok(Prepared {
        problem,
        theme,
        mapping,
        prompt,
    })
}

struct Job<'a> {
    spec: &'a ModelSpec,
    problem: &'a Problem,
    order: Order,
}

/// Sends every (model, problem, order) not yet in the store, judges the
/// replies and appends one record per exchange. Problems are the original
/// orders; records always carry the original problem id.
pub fn run_suite(
    models: &[ModelSpec],
    problems: &[Problem],
    client: &dyn ChatClient,
    translator: Option<&(dyn Translator + Sync)>,
    store: &RunStore,
    opts: &SuiteOptions,
) -> Result<RunSummary, HarnessError> {
    for m in models {
        m.validate()?;
    }
    if opts.max_in_flight == 0 {
        return Err(HarnessError::Config("max_in_flight must be positive".into()));
    }
    let records = store.records()?;
    let done: BTreeSet<RecordKey> = etrbench_core::record::latest(&records)
        .into_iter()
        .filter(|r| r.status == RecordStatus::Ok || !opts.retry_transport_errors)
        .map(|r| r.key())
        .collect();
    let mut jobs = Vec::new();
    let mut summary = RunSummary::default();
    for spec in models {
        for problem in problems {
            for order in Order::BOTH {
                if done.contains(&(spec.model.clone(), problem.id.clone(), order)) {
                    summary.skipped += 1;
                } else {
                    jobs.push(Job { spec, problem, order });
                }
            }
        }
    }

    let next = AtomicUsize::new(0);
    let summary = Mutex::new(summary);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);
    let workers = opts.max_in_flight.min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failure.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { return };
                let outcome = run_one(job, client, translator, opts)
                    .and_then(|r| store.append(&r).map(|_| r).map_err(HarnessError::from));
                match outcome {
                    Ok(r) => {
                        let mut sm = summary.lock().unwrap();
                        sm.completed += 1;
                        match r.status {
                            RecordStatus::TransportError => sm.transport_errors += 1,
                            RecordStatus::Ok if r.is_parse_error() => sm.parse_errors += 1,
                            RecordStatus::Ok => {}
                        }
                    }
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(summary.into_inner().unwrap())
}

fn run_one(
    job: &Job<'_>,
    client: &dyn ChatClient,
    translator: Option<&(dyn Translator + Sync)>,
    opts: &SuiteOptions,
) -> Result<RunRecord, HarnessError> {
    let prep = prepare(job.problem, job.order, opts.style)?;
    let exchange = complete_with_retries(client, job.spec, &prep.prompt);
    let mut record = RunRecord {
        problem_id: job.problem.id.clone(),
        order: job.order,
        model: job.spec.model.clone(),
        theme: prep.theme.name.clone(),
        mapping_seed: job.problem.rng_seed,
        prompt_style: opts.style,
        prompt_sha256: prompt_hash(&prep.prompt),
        raw_reply: String::new(),
        parsed: None,
        verdict: None,
        timing_ms: exchange.elapsed_ms,
        usage: Usage::default(),
        attempts: exchange.attempts,
        temperature: job.spec.temperature,
        status: RecordStatus::TransportError,
        error: None,
        translator_prompt_version: translator.map(|_| TRANSLATOR_PROMPT_VERSION.to_owned()),
    };
    let completion = match exchange.result {
        Ok(c) => c,
        Err(e) => {
            record.error = Some(e);
            return Ok(record);
        }
    };
    record.status = RecordStatus::Ok;
    record.usage = completion.usage;
    record.raw_reply = completion.text;
    let translator: Option<&dyn Translator> = translator.map(|t| t as &dyn Translator);
    let parsed = interpret(&record.raw_reply, &prep.mapping, translator, opts.translator_retries);
    if parsed.status != AnswerStatus::ParseError {
        match judge_response(&prep.problem, &parsed, opts.mode, &opts.oracle) {
            Ok(v) => record.verdict = Some(v),
            Err(e) => {
                record.parsed = Some(ParsedAnswer {
                    status: AnswerStatus::ParseError,
                    conclusion: None,
                    raw: parsed.raw,
                    error: Some(format!("judge: {e}")),
                });
                return Ok(record);
            }
        }
    }
    record.parsed = Some(parsed);
    Ok(record)
}

/// Per-model parse-error rates and the exclusions they imply.
pub fn exclusion_report(store: &RunStore) -> Result<ExclusionManifest, HarnessError> {
    Ok(exclusions(&store.records()?, PARSE_ERROR_THRESHOLD))
}

/// Re-renders every record's prompt and compares hashes. Returns the keys
/// that do not match or whose problem is missing.
pub fn verify_prompt_hashes(records: &[RunRecord], problems: &[Problem]) -> Vec<RecordKey> {
    let by_id: std::collections::BTreeMap<&str, &Problem> =
        problems.iter().map(|p| (p.id.as_str(), p)).collect();
    records
        .iter()
        .filter(|r| {
            let Some(p) = by_id.get(r.problem_id.as_str()) else {
                return true;
            };
            match prepare(p, r.order, r.prompt_style) {
                Ok(prep) => {
                    prep.theme.name != r.theme
                        || p.rng_seed != r.mapping_seed
                        || prompt_hash(&prep.prompt) != r.prompt_sha256
                }
                Err(_) => true,
            }
        })
        .map(|r| r.key())
        .collect()
}
