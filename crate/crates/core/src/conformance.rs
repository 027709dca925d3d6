//! Gold vectors for the engine, oracle and judge, runnable as a report.

use std::fmt;
use std::time::{Duration, Instant};

use crate::engine::{does_it_follow, query, update, what_follows, what_follows_traced};
use crate::generate::seed_bank;
use crate::logic::Oracle;
use crate::view::{alpha_equal, parse_view, View};

pub const CARD_P1: &str = "∃a ∃b ∃c ∃d ∃e ∃f {Ace(a*)Has(Mary(),a)Has(c,b)King(b*),Has(John(),d)Has(f,e)Jack(e)Queen(d)}";
pub const CARD_P2: &str = "∃g {King(g*)Has(Sally(),g)}";
pub const CARD_Q: &str = "∃h {Ace(h*)Has(Mary(),h)}";
pub const CARD_UPDATE: &str = "∃g ∃l ∃m {Ace(l*)Has(Mary(),l)Has(Sally(),g)Has(m,g)King(g*)}";

/// (name, premises, expected prediction)
pub const PREDICTION_VECTORS: [(&str, &[&str], &str); 3] = [
    (
        "planets",
        &["{vis(moon2()),~vis(moon2())}", "{vis(asteroidB()),vis(moon2())}"],
        "{vis(moon2())}",
    ),
    (
        "psychic-original",
        &[
            "{matterMoving(realityWarping()),spaceBending(precognition())}",
            "{matterMoving(realityWarping()),~matterMoving(realityWarping())}",
        ],
        "{matterMoving(realityWarping())}",
    ),
    (
        "bioengineering-reversed",
        &[
            "{swarmForming(nanohive()),~swarmForming(nanohive())}",
            "{swarmForming(nanohive()),quantumComputing(chronoplast())}",
        ],
        "{swarmForming(nanohive())}",
    ),
];

pub const MATERIALS_PREMISES: [&str; 5] = [
    "{~radioactive(darkonium()),radioactive(darkonium())}",
    "{electricallyInsulating(voidite()),~radioactive(darkonium())~selfRepairing(voidite())}",
    "∃x {selfRepairing(x)}",
    "{selfRepairing(voidite())~radioactive(voidite())}",
    "{~electricallyInsulating(voidite()),corrosive(voidite())electricallyInsulating(voidite())}",
];
pub const MATERIALS_PREDICTION: &str =
    "{~radioactive(darkonium())electricallyInsulating(voidite())corrosive(voidite())}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Core,
    /// Reported separately; a failure here is a documented deviation.
    Extended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub tier: Tier,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.tier) {
            (true, _) => "PASS",
            (false, Tier::Core) => "FAIL",
            (false, Tier::Extended) => "DEVIATES",
        };
        let tier = match self.tier {
            Tier::Core => "",
            Tier::Extended => " (extended)",
        };
        write!(f, "{status} {}{tier}: {}", self.name, self.detail)
    }
}

fn v(s: &str) -> View {
    parse_view(s).unwrap_or_else(|e| panic!("gold vector {s}: {e}"))
}

fn timed(name: &str, tier: Tier, f: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (passed, detail) = f();
    Check {
        name: name.to_owned(),
        tier,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn card_example() -> Check {
    timed("card-example", Tier::Core, || {
        let (p1, p2, q) = (v(CARD_P1), v(CARD_P2), v(CARD_Q));
        let out = update(&p1, &p2);
        let upd = alpha_equal(&out, &v(CARD_UPDATE));
        let qr = alpha_equal(&query(&out, &q), &q);
        let dif = does_it_follow(&[p1, p2], &q);
        (
            upd && qr && dif,
            format!("update = {out}; query returns q: {qr}; does_it_follow: {dif}"),
        )
    })
}

pub fn prediction_vectors() -> Vec<Check> {
    PREDICTION_VECTORS
        .iter()
        .map(|(name, premises, expected)| {
            timed(name, Tier::Core, || {
                let ps: Vec<View> = premises.iter().map(|s| v(s)).collect();
                let got = what_follows(&ps);
                (alpha_equal(&got, &v(expected)), format!("predicted {got}"))
            })
        })
        .collect()
}

pub fn materials_example() -> Check {
    timed("materials", Tier::Extended, || {
        let ps: Vec<View> = MATERIALS_PREMISES.iter().map(|s| v(s)).collect();
        let (got, trace) = what_follows_traced(&ps);
        let ok = alpha_equal(&got, &v(MATERIALS_PREDICTION));
        let detail = if ok {
            format!("predicted {got}")
        } else {
            format!(
                "predicted {got}, expected {MATERIALS_PREDICTION}; trace:\n{}",
                trace.to_string().trim_end()
            )
        };
        (ok, detail)
    })
}

/// The four inference templates: each conclusion is endorsed, and only the
/// disjunction fallacy is invalid.
pub fn template_labels(oracle: &Oracle) -> Vec<Check> {
    seed_bank()
        .into_iter()
        .map(|seed| {
            let name = format!("template-{}", seed.name);
            let fallacy = seed.name.to_string() == "disjunction-fallacy";
            timed(&name, Tier::Core, || {
                let endorsed = does_it_follow(&seed.premises, &seed.conclusion);
                match oracle.entails_views(&seed.premises, &seed.conclusion) {
                    Ok(valid) => (
                        endorsed && valid != fallacy,
                        format!("valid: {valid}; endorsed: {endorsed}"),
                    ),
                    Err(e) => (false, format!("oracle error: {e}")),
                }
            })
        })
        .collect()
}

pub fn run_all() -> Vec<Check> {
    let mut out = vec![card_example()];
    out.extend(prediction_vectors());
    out.extend(template_labels(&Oracle::default()));
    out.push(materials_example());
    out
}
