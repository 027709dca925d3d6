//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use etrbench_core::conformance;
use etrbench_core::generate::{
    generate_batch, problem_id, seed_bank, validate_problem, FallacyCertificate, GenConfig, Problem,
};
use etrbench_core::judge::{judge_conclusion, Mode};
use etrbench_core::logic::{entails, entails_by_enumeration, Formula, Oracle, Prop};
use etrbench_core::record::RunStore;
use etrbench_core::render::{render_prompt, render_view, theme_by_name, PromptStyle, ThemeMapping};
use etrbench_core::stats::{
    analyze, correlate, normal_cdf, pearson, ranks, spearman, two_proportion_z, CapabilityTable,
    Metric, Tail,
};
use etrbench_core::{parse_view, what_follows, Quantifier, Term, View};
use etrbench_harness::stub::{order_effect_script, StubReply, StubServer};
use etrbench_harness::{run_suite, ModelSpec, OpenAiClient, SuiteOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn engine_conformance() -> Outcome {
    // First call warms allocations; the timed figure is the second.
    let _ = conformance::card_example();
    let c = conformance::card_example();
    let fast = c.elapsed < Duration::from_millis(10);
    outcome(
        c.passed && fast,
        format!("{} in {:.2} ms", c.detail, ms(c.elapsed)),
    )
}

fn prediction_vectors() -> Outcome {
    let core = conformance::prediction_vectors();
    let extended = conformance::materials_example();
    let ok = core.iter().all(|c| c.passed);
    let names: Vec<String> = core
        .iter()
        .map(|c| format!("{} {}", c.name, if c.passed { "ok" } else { "wrong" }))
        .collect();
    let ext = if extended.passed {
        "extended materials vector: PASS".to_owned()
    } else {
        let first = extended.detail.split("; trace:").next().unwrap_or_default();
        format!("extended materials vector: DEVIATES ({first})")
    };
    outcome(ok, format!("{}; {ext}", names.join(", ")))
}

const PREDS: [&str; 3] = ["P", "Q", "R"];
const CONSTS: [&str; 2] = ["a", "b"];
const VARS: [&str; 2] = ["x", "y"];

fn random_prop(rng: &mut impl Rng, preds: usize, vars: usize, depth: u32) -> Prop {
    if depth == 0 || rng.gen_bool(0.35) {
        let t = if vars > 0 && rng.gen_bool(0.5) {
            Term::var(VARS[rng.gen_range(0..vars)])
        } else {
            Term::constant(CONSTS[rng.gen_range(0..CONSTS.len())])
        };
        return Prop::atom(PREDS[rng.gen_range(0..preds)], vec![t]);
    }
    match rng.gen_range(0..4) {
        0 => Prop::not(random_prop(rng, preds, vars, depth - 1)),
        1 => Prop::And((0..rng.gen_range(2..=3)).map(|_| random_prop(rng, preds, vars, depth - 1)).collect()),
        2 => Prop::Or((0..rng.gen_range(2..=3)).map(|_| random_prop(rng, preds, vars, depth - 1)).collect()),
        _ => Prop::implies(random_prop(rng, preds, vars, depth - 1), random_prop(rng, preds, vars, depth - 1)),
    }
}

fn random_formula(rng: &mut impl Rng, preds: usize) -> Formula {
    let vars = rng.gen_range(0..=2);
    let prefix = VARS[..vars]
        .iter()
        .map(|v| {
            let q = if rng.gen_bool(0.5) {
                Quantifier::Universal
            } else {
                Quantifier::Existential
            };
            (v.to_string(), q)
        })
        .collect();
    Formula::new(prefix, random_prop(rng, preds, vars, 3))
}

fn oracle_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut valid, mut errors) = (0, 0, 0);
    const N: usize = 1000;
    let mut first_mismatch = None;
    for _ in 0..N {
        let k = rng.gen_range(1..=3);
        let premises: Vec<Formula> = (0..rng.gen_range(0..=3)).map(|_| random_formula(&mut rng, k)).collect();
        let conclusion = random_formula(&mut rng, k);
        match (entails(&premises, &conclusion), entails_by_enumeration(&premises, &conclusion)) {
            (Ok(a), Ok(b)) if a == b => {
                agree += 1;
                valid += a as usize;
            }
            (Ok(_), Ok(_)) => {
                first_mismatch.get_or_insert_with(|| conclusion.to_string());
            }
            _ => errors += 1,
        }
    }
    let elapsed = start.elapsed();
    let mut detail = format!(
        "{agree}/{N} instances agree ({valid} valid, {} invalid), {errors} errors, {:.1} s",
        agree - valid,
        elapsed.as_secs_f64()
    );
    if let Some(m) = first_mismatch {
        detail.push_str(&format!("; first mismatch on conclusion {m}"));
    }
    outcome(agree == N && elapsed < Duration::from_secs(60), detail)
}

fn bare_problem(premises: Vec<View>) -> Problem {
    Problem {
        id: problem_id(&premises),
        predicted: what_follows(&premises),
        premises,
        certificate: FallacyCertificate {
            entailed: false,
            oracle_bound_used: 2,
        },
        lineage: Vec::new(),
        rng_seed: 0,
        reversed_of: None,
    }
}

fn template_labels() -> Outcome {
    let oracle = Oracle::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in seed_bank() {
        let name = seed.name.to_string();
        let fallacy = name == "disjunction-fallacy";
        let p = bare_problem(seed.premises.clone());
        match judge_conclusion(&p, &seed.conclusion, Mode::Endorsement, &oracle) {
            Ok(v) => {
                let right = v.etr_predicted && v.logically_correct != fallacy && v.human_like_fallacy == fallacy;
                ok &= right;
                parts.push(format!(
                    "{name}: valid={} endorsed={}",
                    v.logically_correct, v.etr_predicted
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok && parts.len() == 4, parts.join(", "))
}

fn generator_integrity() -> Outcome {
    let start = Instant::now();
    let cfg = GenConfig {
        seed: 400,
        ..GenConfig::default()
    };
    let problems = match generate_batch(&cfg, 400) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("generation failed: {e}")),
    };
    let violations: usize = problems
        .iter()
        .map(|p| validate_problem(p, &cfg).violations.len())
        .sum();
    let elapsed = start.elapsed();
    outcome(
        problems.len() == 400 && violations == 0 && elapsed < Duration::from_secs(300),
        format!(
            "{} problems, {violations} violations, {:.1} s",
            problems.len(),
            elapsed.as_secs_f64()
        ),
    )
}

const PLANETS_PROMPT: &str = "I'm an astronomer studying newly discovered celestial bodies. I've made some observations and I need to use logical reasoning to figure out what's going on. Here's what I know so far:
- Either moon 2 is not visible to the naked eye, or moon 2 is visible to the naked eye.
- Either asteroid B is visible to the naked eye, or moon 2 is visible to the naked eye.

For the purpose of this question, I want you to write what follows in English. Please be succinct, precise and clear in your answer. Write a logical statement of the form \"Answer: From the premises, we can conclude that ...\" and then clearly write your conclusion. Please be succinct, precise, and clear.

What if anything follows? I do not have an intended answer in mind, and it is possible that nothing follows. Please be succinct and precise.

I want you to answer immediately. Read the question and provide your answer in the format given.

What follows? Answer in the format that I showed you. Write \"Answer: {logical statement}\".";

const ALCHEMY_SENTENCE: &str = "Cosmic dust is transmuting and vital mercury is time-bending.";

fn renderer_snapshots() -> Outcome {
    let run = || -> Result<(bool, bool), String> {
        let p = bare_problem(vec![
            parse_view("{visibleToTheNakedEye(moon2()),~visibleToTheNakedEye(moon2())}").map_err(|e| e.to_string())?,
            parse_view("{visibleToTheNakedEye(asteroidB()),visibleToTheNakedEye(moon2())}").map_err(|e| e.to_string())?,
        ]);
        let m = ThemeMapping::new(
            "Planets",
            [("visibleToTheNakedEye", "visible to the naked eye")],
            [("moon2", "moon 2"), ("asteroidB", "asteroid B")],
        )
        .map_err(|e| e.to_string())?;
        let theme = theme_by_name("Planets").map_err(|e| e.to_string())?;
        let prompt = render_prompt(&p, theme, &m, PromptStyle::Standard).map_err(|e| e.to_string())?;

        let am = ThemeMapping::new(
            "Alchemical substances",
            [("Q", "transmuting"), ("R", "time-bending")],
            [("x", "cosmic dust"), ("y", "vital mercury")],
        )
        .map_err(|e| e.to_string())?;
        let v = parse_view("{Q(x())R(y())}").map_err(|e| e.to_string())?;
        let sentence = render_view(&v, &am).map_err(|e| e.to_string())?;
        Ok((prompt == PLANETS_PROMPT, sentence == ALCHEMY_SENTENCE))
    };
    match run() {
        Ok((a, b)) => outcome(a && b, format!("planets prompt byte-exact: {a}; alchemy sentence byte-exact: {b}")),
        Err(e) => outcome(false, e),
    }
}

fn rank_oracle(xs: &[f64]) -> Vec<f64> {
    // Average of 1-based positions among equal values, by counting.
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 100 {
        let n = rng.gen_range(4..30);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let (Ok(s), rx, ry) = (spearman(&xs, &ys), rank_oracle(&xs), rank_oracle(&ys)) else {
            continue;
        };
        if ranks(&xs) != rx {
            worst = f64::INFINITY;
        }
        worst = worst.max((s.r - pearson_oracle(&rx, &ry)).abs());
        tested += 1;
    }
    let z = two_proportion_z(30, 100, 15, 100, Tail::TwoSided).map(|t| t.z);
    let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map(|c| c.r);
    let (zok, rok) = (
        z.as_ref().is_ok_and(|z| (z - 2.540).abs() <= 1e-3),
        r.as_ref().is_ok_and(|r| (r - 0.98198).abs() <= 1e-5),
    );
    outcome(
        worst <= 1e-12 && zok && rok,
        format!(
            "spearman vs rank oracle max |diff| {worst:.1e} over {tested} vectors; z = {:?}; r = {:?}",
            z.map(|z| (z * 1e4).round() / 1e4),
            r.map(|r| (r * 1e6).round() / 1e6)
        ),
    )
}

fn stub_run() -> Outcome {
    let start = Instant::now();
    let run = || -> Result<String, String> {
        let cfg = GenConfig {
            seed: 383,
            ..GenConfig::default()
        };
        let problems = generate_batch(&cfg, 383).map_err(|e| e.to_string())?;
        let script = Arc::new(order_effect_script(&problems, PromptStyle::Standard).map_err(|e| e.to_string())?);
        let s2 = Arc::clone(&script);
        let server = StubServer::start(move |_, prompt| match s2.get(prompt) {
            Some(r) => StubReply::Text(r.clone()),
            None => StubReply::Status(404),
        })
        .map_err(|e| e.to_string())?;
        let client = OpenAiClient::unpooled(server.base_url(), "stub".into())?;
        let dir = std::env::temp_dir().join(format!("etrbench-acceptance-{}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let path = dir.join("stub.jsonl");
        let _ = std::fs::remove_file(&path);
        let store = RunStore::open(&path).map_err(|e| e.to_string())?;
        let mut spec = ModelSpec::new("stub/order-effect");
        spec.timeout_secs = 30;
        run_suite(&[spec], &problems, &client, None, &store, &SuiteOptions::default())
            .map_err(|e| e.to_string())?;
        let records = store.records().map_err(|e| e.to_string())?;
        let _ = std::fs::remove_dir_all(&dir);
        let report = analyze(&records, None, Tail::TwoSided).map_err(|e| e.to_string())?;
        let rate = report.original.first().and_then(|s| s.fallacy_rate);
        let row = report.reversal.first().ok_or("no reversal row")?;
        let p = row.test.map(|t| t.p);
        let ok = records.len() == 766
            && row.n_pairs == 383
            && rate == Some(1.0)
            && row.blocked_fraction == Some(1.0)
            && p.is_some_and(|p| p < 0.05);
        let line = format!(
            "{} records, fallacy_rate {rate:?}, blocked {:?}, p {:?}",
            records.len(),
            row.blocked_fraction,
            p
        );
        if ok {
            Ok(line)
        } else {
            Err(line)
        }
    };
    let result = run();
    let elapsed = start.elapsed();
    match result {
        Ok(d) => outcome(
            elapsed < Duration::from_secs(120),
            format!("{d}, {:.1} s", elapsed.as_secs_f64()),
        ),
        Err(e) => outcome(false, e),
    }
}

#[derive(Deserialize)]
struct BlockingRow {
    model_id: String,
    blocked_percent: f64,
    z: f64,
    p: f64,
}

fn table_fixture_determinism() -> Outcome {
    let run = || -> Result<(String, String), String> {
        let table = CapabilityTable::load(&fixtures().join("model_elo.csv")).map_err(|e| e.to_string())?;
        let mut rdr = csv::Reader::from_path(fixtures().join("reversal_blocking.csv")).map_err(|e| e.to_string())?;
        let rows: Vec<BlockingRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let outcome: BTreeMap<String, f64> = rows
            .iter()
            .map(|r| (r.model_id.clone(), r.blocked_percent / 100.0))
            .collect();
        let report = correlate(&outcome, &table, Metric::Elo);
        let rx = ranks(&report.xs);
        let ry = ranks(&report.ys);
        // Reported p against the two-sided normal p of the reported z, with z
        // known only to two decimals.
        let consistent = rows
            .iter()
            .filter(|r| {
                let p = |z: f64| 2.0 * (1.0 - normal_cdf(z));
                let (lo, hi) = (p(r.z + 0.005), p(r.z - 0.005));
                r.p >= lo * 0.995 && r.p <= hi * 1.005
            })
            .count();
        let json = serde_json::to_string(&(&report, &rx, &ry)).map_err(|e| e.to_string())?;
        let summary = format!(
            "n = {}, rho = {:.4}, r = {:.4}, {consistent}/{} reported p consistent with reported z",
            report.models.len(),
            report.spearman.map_or(f64::NAN, |c| c.r),
            report.pearson.map_or(f64::NAN, |c| c.r),
            rows.len()
        );
        Ok((json, summary))
    };
    let mut outputs = HashMap::new();
    let mut summary = String::new();
    for _ in 0..10 {
        match run() {
            Ok((json, s)) => {
                *outputs.entry(json).or_insert(0) += 1;
                summary = s;
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(
        outputs.len() == 1,
        format!(
            "{} distinct outputs over 10 runs; {summary}; the published 38-model fallacy-rate correlation is not recomputable without the raw responses",
            outputs.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 engine conformance", engine_conformance),
        ("2 prediction vectors", prediction_vectors),
        ("3 oracle correctness", oracle_correctness),
        ("4 template labels", template_labels),
        ("5 generator integrity", generator_integrity),
        ("6 renderer snapshots", renderer_snapshots),
        ("7 statistics oracles", statistics_oracles),
        ("8 end-to-end stub run", stub_run),
        ("9 capability fixture determinism", table_fixture_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let o = f();
        failed += !o.passed as usize;
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
