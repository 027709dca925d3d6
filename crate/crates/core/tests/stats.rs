use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use etrbench_core::judge::{AnswerStatus, Mode, ParsedAnswer, Verdict};
use etrbench_core::record::{Order, RecordStatus, RunRecord, Usage};
use etrbench_core::render::PromptStyle;
use etrbench_core::stats::{
    analyze, beta_reg, erfc, exclusions, ln_gamma, normal_cdf, pearson, reversal_effect, spearman,
    student_t_cdf, two_proportion_z, Tail, PARSE_ERROR_THRESHOLD,
};

// Brute-force average rank: number strictly below plus half the ties.
fn rank_oracle(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let below = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn distribution_functions_match_statrs() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    for i in -80..=80 {
        let z = i as f64 / 10.0;
        // statrs' erfc carries about 1e-11 of its own error.
        assert!((normal_cdf(z) - normal.cdf(z)).abs() < 1e-9, "z={z}");
        assert!((erfc(z) - statrs::function::erf::erfc(z)).abs() < 1e-9, "z={z}");
    }
    for df in [1.0, 2.0, 3.0, 5.0, 10.0, 36.0, 100.0] {
        let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -60..=60 {
            let t = i as f64 / 10.0;
            assert!((student_t_cdf(t, df) - t_dist.cdf(t)).abs() < 1e-10, "t={t} df={df}");
        }
    }
    for x in [0.1, 0.5, 1.0, 2.5, 7.0, 19.5, 100.0] {
        assert!((ln_gamma(x) - statrs::function::gamma::ln_gamma(x)).abs() < 1e-10);
    }
    for (a, b) in [(0.5, 0.5), (1.0, 3.0), (18.0, 0.5), (2.0, 9.0)] {
        for i in 1..20 {
            let x = i as f64 / 20.0;
            assert!((beta_reg(a, b, x) - statrs::function::beta::beta_reg(a, b, x)).abs() < 1e-10);
        }
    }
}

// Reference values computed independently to double precision.
#[test]
fn distribution_functions_match_reference_values() {
    for (z, cdf, erfc_z) in [
        (-3.0, 0.0013498980316300933, 1.9999779095030015),
        (-1.0, 0.15865525393145707, 1.8427007929497148),
        (0.5, 0.6914624612740131, 0.4795001221869535),
        (2.0, 0.9772498680518208, 0.004677734981047266),
        (4.0, 0.9999683287581669, 1.541725790028002e-08),
    ] {
        assert!((normal_cdf(z) - cdf).abs() < 1e-13, "z={z}");
        assert!((erfc(z) - erfc_z).abs() < 1e-13, "z={z}");
    }
    for (t, df, cdf) in [
        (2.0, 5.0, 0.9490302605850709),
        (-1.3, 36.0, 0.10093161375817186),
        (3.24, 10.0, 0.9955652917667481),
    ] {
        assert!((student_t_cdf(t, df) - cdf).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn correlation_p_values_match_t_test() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let ys = [2.1, 1.9, 3.5, 3.0, 5.2, 4.1, 6.3, 5.9];
    let c = pearson(&xs, &ys).unwrap();
    let df = 6.0;
    let t = c.r * (df / (1.0 - c.r * c.r)).sqrt();
    let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
    let expected = 2.0 * (1.0 - t_dist.cdf(t.abs()));
    assert!((c.p - expected).abs() < 1e-10);
}

#[test]
fn z_test_p_values_and_tails() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let two = two_proportion_z(30, 100, 15, 100, Tail::TwoSided).unwrap();
    assert!((two.p - 2.0 * (1.0 - normal.cdf(two.z))).abs() < 1e-12);
    let greater = two_proportion_z(30, 100, 15, 100, Tail::Greater).unwrap();
    let less = two_proportion_z(30, 100, 15, 100, Tail::Less).unwrap();
    assert!((greater.p - two.p / 2.0).abs() < 1e-12);
    assert!((greater.p + less.p - 1.0).abs() < 1e-12);
}

fn vec_with_ties() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..8).prop_map(f64::from), n),
            prop::collection::vec((0i32..8).prop_map(f64::from), n),
        )
    })
}

fn distinct_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e3f64..1e3, n),
            prop::collection::vec(-1e3f64..1e3, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spearman_is_pearson_on_brute_force_ranks((xs, ys) in vec_with_ties()) {
        let rx = rank_oracle(&xs);
        let ry = rank_oracle(&ys);
        let oracle = pearson_oracle(&rx, &ry);
        match spearman(&xs, &ys) {
            Ok(c) => prop_assert!((c.r - oracle).abs() < 1e-12, "{} vs {}", c.r, oracle),
            Err(_) => prop_assert!(oracle.is_nan()),
        }
    }

    #[test]
    fn pearson_is_affine_invariant((xs, ys) in distinct_pair(), a in 0.01f64..50.0, b in -100f64..100.0) {
        let base = pearson(&xs, &ys).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let c = pearson(&moved, &ys).unwrap();
        prop_assert!((c.r - base.r).abs() < 1e-9);
        let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
        prop_assert!((pearson(&xs, &neg).unwrap().r + base.r).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_monotone_invariant((xs, ys) in distinct_pair()) {
        let base = spearman(&xs, &ys).unwrap();
        let warped: Vec<f64> = xs.iter().map(|x| (x / 100.0).exp() + x.powi(3)).collect();
        prop_assert_eq!(spearman(&warped, &ys).unwrap().r, base.r);
    }

    #[test]
    fn z_test_is_antisymmetric(k1 in 0u64..50, k2 in 0u64..50, e1 in 0u64..50, e2 in 0u64..50) {
        let (n1, n2) = (k1 + e1 + 1, k2 + e2 + 1);
        let a = two_proportion_z(k1, n1, k2, n2, Tail::TwoSided).unwrap();
        let b = two_proportion_z(k2, n2, k1, n1, Tail::TwoSided).unwrap();
        prop_assert!((a.z + b.z).abs() < 1e-12);
        prop_assert!((a.p - b.p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p));
    }
}

fn rec(model: &str, id: usize, order: Order, outcome: Option<(bool, bool)>) -> RunRecord {
    let parsed = match outcome {
        Some(_) => ParsedAnswer {
            status: AnswerStatus::NothingFollows,
            conclusion: None,
            raw: String::new(),
            error: None,
        },
        None => ParsedAnswer {
            status: AnswerStatus::ParseError,
            conclusion: None,
            raw: String::new(),
            error: Some("unmapped".into()),
        },
    };
    RunRecord {
        problem_id: format!("p{id:03}"),
        order,
        model: model.into(),
        theme: "Cards".into(),
        mapping_seed: 0,
        prompt_style: PromptStyle::Standard,
        prompt_sha256: String::new(),
        raw_reply: String::new(),
        parsed: Some(parsed),
        verdict: outcome.map(|(c, p)| Verdict::new(c, p, Mode::Endorsement)),
        timing_ms: 0,
        usage: Usage::default(),
        attempts: 1,
        temperature: 0.0,
        status: RecordStatus::Ok,
        error: None,
        translator_prompt_version: None,
    }
}

#[test]
fn exclusion_thresholds() {
    let mut rs = Vec::new();
    for i in 0..100 {
        rs.push(rec("clean", i, Order::Original, Some((false, true))));
        rs.push(rec("noisy", i, Order::Original, if i < 21 { None } else { Some((true, false)) }));
        rs.push(rec("some", i, Order::Original, if i < 5 { None } else { Some((false, false)) }));
    }
    let m = exclusions(&rs, PARSE_ERROR_THRESHOLD);
    assert!(!m.is_excluded("clean") && m.is_excluded("noisy") && !m.is_excluded("some"));
    assert_eq!(m.responses.len(), 5);
    assert!(m.responses.iter().all(|r| r.model == "some"));
    let report = analyze(&rs, None, Tail::TwoSided).unwrap();
    let some = report.original.iter().find(|s| s.model == "some").unwrap();
    assert_eq!(some.n_answered, 95);
    assert!(report.original.iter().all(|s| s.model != "noisy"));
}

#[test]
fn reversal_blocking() {
    let mut rs = Vec::new();
    for i in 0..40 {
        rs.push(rec("always", i, Order::Original, Some((false, true))));
        rs.push(rec("always", i, Order::Reversed, Some((false, true))));
        rs.push(rec("blocked", i, Order::Original, Some((false, true))));
        rs.push(rec("blocked", i, Order::Reversed, Some((true, false))));
    }
    rs.push(rec("unpaired", 0, Order::Original, Some((false, true))));
    let m = exclusions(&rs, PARSE_ERROR_THRESHOLD);
    let rows = reversal_effect(&rs, &m, Tail::TwoSided).unwrap();
    assert_eq!(rows.len(), 2);
    let always = &rows[0];
    assert_eq!(always.blocked_fraction, Some(0.0));
    let blocked = &rows[1];
    assert_eq!(blocked.blocked_fraction, Some(1.0));
    assert!(blocked.test.unwrap().p < 0.05);

    // Aggregates do not depend on record order.
    let a = analyze(&rs, None, Tail::TwoSided).unwrap();
    let mut shuffled = rs.clone();
    shuffled.reverse();
    shuffled.swap(3, 40);
    assert_eq!(analyze(&shuffled, None, Tail::TwoSided).unwrap(), a);
}

