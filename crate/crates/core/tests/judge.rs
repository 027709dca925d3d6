use etrbench_core::generate::{
    generate_batch, problem_id, reverse_premises, seed_bank, FallacyCertificate, GenConfig, Problem,
};
use etrbench_core::judge::{
    judge_conclusion, judge_response, parse_answer, AnswerStatus, Mode, ParsedAnswer,
};
use etrbench_core::logic::Oracle;
use etrbench_core::render::{bind_theme, render_clause, theme_by_name, ThemeMapping};
use etrbench_core::view::parse_view;
use etrbench_core::{what_follows, View};

fn problem(premises: Vec<View>) -> Problem {
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

#[test]
fn seed_templates_get_their_labels() {
    let oracle = Oracle::default();
    let mut labels = Vec::new();
    for seed in seed_bank() {
        let p = problem(seed.premises.clone());
        let v = judge_conclusion(&p, &seed.conclusion, Mode::Endorsement, &oracle).unwrap();
        assert!(v.etr_predicted, "{}", seed.name);
        labels.push((seed.name.to_string(), v.logically_correct, v.human_like_fallacy));
    }
    let expected = [
        ("modus-ponens", true, false),
        ("modus-tollens", true, false),
        ("quantified-modus-ponens", true, false),
        ("disjunction-fallacy", false, true),
    ];
    let got: Vec<(&str, bool, bool)> = labels.iter().map(|(n, c, f)| (n.as_str(), *c, *f)).collect();
    assert_eq!(got, expected);
}

#[test]
fn reversed_order_nothing_follows_avoids_the_fallacy() {
    let m = ThemeMapping::new(
        "Synthetic biology",
        [("swarmForming", "swarm-forming"), ("quantumComputing", "quantum-computing")],
        [("nanohive", "nanohive"), ("chronoplast", "chronoplast")],
    )
    .unwrap();
    let p = problem(vec![
        parse_view("{swarmForming(nanohive()),~swarmForming(nanohive())}").unwrap(),
        parse_view("{swarmForming(nanohive()),quantumComputing(chronoplast())}").unwrap(),
    ]);
    let a = parse_answer(
        "Answer: From the premises, we cannot definitively conclude anything about whether nanohive is swarm-forming or not.",
        &m,
    );
    assert_eq!(a.status, AnswerStatus::NothingFollows);
    let v = judge_response(&p, &a, Mode::Endorsement, &Oracle::default()).unwrap();
    assert!(v.logically_correct);
    assert!(!v.human_like_fallacy);

    let fell = parse_answer(
        "Answer: From the premises, we can conclude that nanohive is swarm-forming.",
        &m,
    );
    let v = judge_response(&p, &fell, Mode::Endorsement, &Oracle::default()).unwrap();
    assert!(v.human_like_fallacy);
}

#[test]
fn verdicts_over_generated_corpus() {
    let oracle = Oracle::default();
    let theme = theme_by_name("Cards").unwrap();
    let problems = generate_batch(&GenConfig { seed: 31, ..GenConfig::default() }, 40).unwrap();
    for p in &problems {
        let m = bind_theme(p, theme, p.rng_seed).unwrap();
        for q in [p.clone(), reverse_premises(p)] {
            let mut candidates: Vec<View> = q.premises.clone();
            candidates.push(q.predicted.clone());
            for c in &candidates {
                let text = format!(
                    "Answer: From the premises, we can conclude that {}.",
                    render_clause(c, &m).unwrap()
                );
                let a = parse_answer(&text, &m);
                assert_eq!(a.status, AnswerStatus::Parsed, "{text}");
                let exact = judge_response(&q, &a, Mode::Exact, &oracle).unwrap();
                let endorse = judge_response(&q, &a, Mode::Endorsement, &oracle).unwrap();
                let equiv = judge_response(&q, &a, Mode::UpToEquivalence, &oracle).unwrap();
                for v in [exact, endorse, equiv] {
                    assert!(v.is_consistent());
                    assert!(!v.human_like_fallacy || (v.etr_predicted && !v.logically_correct));
                }
                assert!(!exact.etr_predicted || endorse.etr_predicted, "{text}");
                assert!(!exact.etr_predicted || equiv.etr_predicted, "{text}");
                assert_eq!(exact.logically_correct, endorse.logically_correct);
            }
            // The certified prediction is a fallacy; the reversed order may
            // predict something valid.
            let v = judge_conclusion(&q, &q.predicted, Mode::Exact, &oracle).unwrap();
            if q.reversed_of.is_none() {
                assert!(v.human_like_fallacy);
            }
            // Echoing a premise is always correct.
            let v = judge_conclusion(&q, &q.premises[0], Mode::Endorsement, &oracle).unwrap();
            assert!(v.logically_correct && !v.human_like_fallacy);
            let nothing = ParsedAnswer {
                status: AnswerStatus::NothingFollows,
                conclusion: None,
                raw: String::new(),
                error: None,
            };
            let v = judge_response(&q, &nothing, Mode::Endorsement, &oracle).unwrap();
            assert!(v.logically_correct && !v.human_like_fallacy);
        }
    }
}
