//! Fallacy rates, correlations, the two-proportion z-test and report output.
//!
//! Distribution functions are computed in-crate: `ln_gamma` by the Lanczos
//! approximation (g = 7, nine coefficients), the regularized incomplete beta
//! by its continued fraction evaluated with the modified Lentz method, and
//! `erfc` through the regularized upper incomplete gamma Q(1/2, x²), using
//! the power series below x² < 1.5 and the Lentz continued fraction above.
//! All three are accurate to well under 1e-10 on the ranges used here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{latest, Order, RecordStatus, RunRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance in {0}")]
    DegenerateVariance(&'static str),
    #[error("fallacy rate undefined: no logically incorrect answers")]
    UndefinedRate,
    #[error("exponential fit needs positive y values (found {0})")]
    NonPositive(f64),
    #[error("empty sample in proportion test")]
    EmptySample,
    #[error("non-finite input")]
    NonFinite,
    #[error("record check failed: {0}")]
    Record(String),
    #[error("capability table line {line}: {msg}")]
    Capability { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

// ---------------------------------------------------------------- numerics

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const TINY: f64 = 1e-300;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        ln_front.exp() * h
    }
}

pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        2.0 - gamma_q(0.5, x * x)
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// P(T ≤ t) for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn t_test_p(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    // Two-sided p: I_{df/(df+t²)}(df/2, 1/2), with t² = r² df / (1 - r²).
    beta_reg(df / 2.0, 0.5, (1.0 - r * r).max(0.0))
}

// ------------------------------------------------------------ correlations

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFew { need: 3, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation, StatsError> {
    check_pair(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateVariance("xs"));
    }
    if syy == 0.0 {
        return Err(StatsError::DegenerateVariance("ys"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p: t_test_p(r, xs.len()),
        n: xs.len(),
    })
}

/// Average ranks, 1-based; ties share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Correlation, StatsError> {
    check_pair(xs, ys)?;
    pearson(&ranks(xs), &ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub slope: f64,
    pub intercept: f64,
    /// Absent when the log-values are constant.
    pub r: Option<f64>,
    pub p: Option<f64>,
}

impl ExpFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x).exp()
    }
}

/// Least squares of ln y on x.
pub fn exp_fit(xs: &[f64], ys: &[f64]) -> Result<ExpFit, StatsError> {
    check_pair(xs, ys)?;
    if let Some(&y) = ys.iter().find(|&&y| y <= 0.0) {
        return Err(StatsError::NonPositive(y));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(xs), mean(&ly));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::DegenerateVariance("xs"));
    }
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let corr = pearson(xs, &ly).ok();
    Ok(ExpFit {
        slope,
        intercept: my - slope * mx,
        r: corr.map(|c| c.r),
        p: corr.map(|c| c.p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// Alternative: the first proportion is larger.
    Greater,
    Less,
}

impl std::str::FromStr for Tail {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-sided" => Ok(Tail::TwoSided),
            "greater" => Ok(Tail::Greater),
            "less" => Ok(Tail::Less),
            _ => Err(format!("unknown tail `{s}` (two-sided, greater, less)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p: f64,
    /// Pooled proportion was 0 or 1; z is 0 and p is 1 by convention.
    pub degenerate: bool,
}

pub fn two_proportion_z(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
    tail: Tail,
) -> Result<ZTest, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::EmptySample);
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Ok(ZTest {
            z: 0.0,
            p: 1.0,
            degenerate: true,
        });
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = (k1 as f64 / n1f - k2 as f64 / n2f) / se;
    let p = match tail {
        Tail::TwoSided => erfc(z.abs() / std::f64::consts::SQRT_2),
        Tail::Greater => normal_cdf(-z),
        Tail::Less => normal_cdf(z),
    };
    Ok(ZTest {
        z,
        p: p.min(1.0),
        degenerate: false,
    })
}

// ------------------------------------------------------------- exclusions

pub const PARSE_ERROR_THRESHOLD: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExclusion {
    pub model: String,
    pub replies: usize,
    pub parse_errors: usize,
    pub transport_errors: usize,
    pub parse_error_rate: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedResponse {
    pub model: String,
    pub problem_id: String,
    pub order: Order,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionManifest {
    pub threshold: f64,
    pub models: Vec<ModelExclusion>,
    /// Parse-error responses dropped from retained models.
    pub responses: Vec<ExcludedResponse>,
}

impl ExclusionManifest {
    pub fn is_excluded(&self, model: &str) -> bool {
        self.models.iter().any(|m| m.model == model && m.excluded)
    }
}

/// A model is excluded when more than `threshold` of its received replies
/// fail to parse. Transport errors count towards neither side.
pub fn exclusions(records: &[RunRecord], threshold: f64) -> ExclusionManifest {
    let records = latest(records);
    let mut per: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in &records {
        let e = per.entry(&r.model).or_default();
        match r.status {
            RecordStatus::TransportError => e.2 += 1,
            RecordStatus::Ok => {
                e.0 += 1;
                if r.is_parse_error() {
                    e.1 += 1;
                }
            }
        }
    }
    let models: Vec<ModelExclusion> = per
        .into_iter()
        .map(|(model, (replies, parse_errors, transport_errors))| {
            let rate = if replies == 0 {
                0.0
            } else {
                parse_errors as f64 / replies as f64
            };
            ModelExclusion {
                model: model.to_owned(),
                replies,
                parse_errors,
                transport_errors,
                parse_error_rate: rate,
                excluded: rate > threshold,
            }
        })
        .collect();
    let excluded: BTreeSet<&str> = models
        .iter()
        .filter(|m| m.excluded)
        .map(|m| m.model.as_str())
        .collect();
    let responses = records
        .iter()
        .filter(|r| r.is_parse_error() && !excluded.contains(r.model.as_str()))
        .map(|r| ExcludedResponse {
            model: r.model.clone(),
            problem_id: r.problem_id.clone(),
            order: r.order,
        })
        .collect();
    ExclusionManifest {
        threshold,
        models,
        responses,
    }
}

// ------------------------------------------------------------ aggregation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub model: String,
    pub n_answered: usize,
    pub n_incorrect: usize,
    pub n_fallacy: usize,
    /// Undefined when there are no incorrect answers.
    pub fallacy_rate: Option<f64>,
    pub correctness_rate: Option<f64>,
}

/// Fallacy rate over the judged records given. Records without a verdict
/// are skipped.
pub fn fallacy_rate(records: &[RunRecord]) -> Result<f64, StatsError> {
    let (mut incorrect, mut fallacy) = (0usize, 0usize);
    for v in records.iter().filter_map(|r| r.verdict.as_ref()) {
        if !v.logically_correct {
            incorrect += 1;
            fallacy += v.human_like_fallacy as usize;
        }
    }
    if incorrect == 0 {
        return Err(StatsError::UndefinedRate);
    }
    Ok(fallacy as f64 / incorrect as f64)
}

fn check_all(records: &[RunRecord]) -> Result<(), StatsError> {
    for r in records {
        r.check().map_err(StatsError::Record)?;
    }
    Ok(())
}

/// Per-model statistics for one presentation order, over non-excluded
/// models and parse-valid records.
pub fn model_stats(
    records: &[RunRecord],
    order: Order,
    manifest: &ExclusionManifest,
) -> Result<Vec<ModelStats>, StatsError> {
    check_all(records)?;
    let mut per: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for r in latest(records) {
        if r.order == order && !manifest.is_excluded(&r.model) {
            per.entry(r.model.clone()).or_default().push(r);
        }
    }
    Ok(per
        .into_iter()
        .map(|(model, rs)| {
            let verdicts: Vec<_> = rs.iter().filter_map(|r| r.verdict).collect();
            let n_answered = verdicts.len();
            let n_incorrect = verdicts.iter().filter(|v| !v.logically_correct).count();
            let n_fallacy = verdicts.iter().filter(|v| v.human_like_fallacy).count();
            ModelStats {
                model,
                n_answered,
                n_incorrect,
                n_fallacy,
                fallacy_rate: fallacy_rate(&rs).ok(),
                correctness_rate: (n_answered > 0)
                    .then(|| (n_answered - n_incorrect) as f64 / n_answered as f64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalRow {
    pub model: String,
    pub n_pairs: usize,
    pub fallacies_original: usize,
    pub fallacies_reversed: usize,
    /// Original-order fallacies whose reversed answer is logically correct.
    pub blocked: usize,
    pub blocked_fraction: Option<f64>,
    pub test: Option<ZTest>,
}

/// Pairs original and reversed records by problem and compares fallacy
/// counts across orders. Models with no complete pair are skipped.
pub fn reversal_effect(
    records: &[RunRecord],
    manifest: &ExclusionManifest,
    tail: Tail,
) -> Result<Vec<ReversalRow>, StatsError> {
    check_all(records)?;
    let mut per: BTreeMap<String, BTreeMap<String, [Option<crate::judge::Verdict>; 2]>> =
        BTreeMap::new();
    for r in latest(records) {
        if manifest.is_excluded(&r.model) {
            continue;
        }
        if let Some(v) = r.verdict {
            let slot = per
                .entry(r.model.clone())
                .or_default()
                .entry(r.problem_id.clone())
                .or_default();
            slot[(r.order == Order::Reversed) as usize] = Some(v);
        }
    }
    let mut rows = Vec::new();
    for (model, problems) in per {
        let pairs: Vec<_> = problems
            .values()
            .filter_map(|[a, b]| Some(((*a)?, (*b)?)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let fo = pairs.iter().filter(|(o, _)| o.human_like_fallacy).count();
        let fr = pairs.iter().filter(|(_, r)| r.human_like_fallacy).count();
        let blocked = pairs
            .iter()
            .filter(|(o, r)| o.human_like_fallacy && r.logically_correct)
            .count();
        let n = pairs.len() as u64;
        rows.push(ReversalRow {
            model,
            n_pairs: pairs.len(),
            fallacies_original: fo,
            fallacies_reversed: fr,
            blocked,
            blocked_fraction: (fo > 0).then(|| blocked as f64 / fo as f64),
            test: two_proportion_z(fo as u64, n, fr as u64, n, tail).ok(),
        });
    }
    Ok(rows)
}

// ------------------------------------------------------ capability tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Elo,
    Helm,
    Flops,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Elo, Metric::Helm, Metric::Flops];
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Elo => "elo",
            Metric::Helm => "helm",
            Metric::Flops => "flops",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "elo" => Ok(Metric::Elo),
            "helm" => Ok(Metric::Helm),
            "flops" => Ok(Metric::Flops),
            other => Err(format!("unknown metric `{other}` (elo, helm, flops)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapabilityTable {
    pub values: BTreeMap<(String, Metric), f64>,
}

#[derive(Debug, Deserialize)]
struct CapabilityRow {
    model_id: String,
    metric: String,
    value: f64,
}

impl CapabilityTable {
    /// Parses `model_id,metric,value` rows with a header line.
    pub fn from_reader(r: impl std::io::Read) -> Result<CapabilityTable, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut values = BTreeMap::new();
        for (i, row) in rdr.deserialize::<CapabilityRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| StatsError::Capability {
                line,
                msg: e.to_string(),
            })?;
            let metric: Metric = row
                .metric
                .parse()
                .map_err(|msg| StatsError::Capability { line, msg })?;
            if !row.value.is_finite() {
                return Err(StatsError::Capability {
                    line,
                    msg: "value is not finite".into(),
                });
            }
            if values.insert((row.model_id.clone(), metric), row.value).is_some() {
                return Err(StatsError::Capability {
                    line,
                    msg: format!("duplicate ({}, {metric})", row.model_id),
                });
            }
        }
        Ok(CapabilityTable { values })
    }

    pub fn load(path: &Path) -> Result<CapabilityTable, StatsError> {
        let f = std::fs::File::open(path).map_err(|e| StatsError::Io(format!("{}: {e}", path.display())))?;
        CapabilityTable::from_reader(f)
    }

    pub fn get(&self, model: &str, metric: Metric) -> Option<f64> {
        self.values.get(&(model.to_owned(), metric)).copied()
    }

    pub fn metrics(&self) -> BTreeSet<Metric> {
        self.values.keys().map(|(_, m)| *m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric: Metric,
    pub models: Vec<String>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub pearson: Option<Correlation>,
    pub spearman: Option<Correlation>,
    pub exp_fit: Option<ExpFit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn keep<T>(r: Result<T, StatsError>, what: &str, notes: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| notes.push(format!("{what}: {e}"))).ok()
}

/// Correlates `outcome` (model → value) against one capability metric over
/// the models present in both.
pub fn correlate(
    outcome: &BTreeMap<String, f64>,
    table: &CapabilityTable,
    metric: Metric,
) -> CorrelationReport {
    let mut models = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (model, &y) in outcome {
        if let Some(x) = table.get(model, metric) {
            models.push(model.clone());
            xs.push(x);
            ys.push(y);
        }
    }
    let mut notes = Vec::new();
    let pearson = keep(pearson(&xs, &ys), "pearson", &mut notes);
    let spearman = keep(spearman(&xs, &ys), "spearman", &mut notes);
    let exp_fit = keep(exp_fit(&xs, &ys), "exp_fit", &mut notes);
    CorrelationReport {
        metric,
        models,
        xs,
        ys,
        pearson,
        spearman,
        exp_fit,
        notes,
    }
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub exclusions: ExclusionManifest,
    pub original: Vec<ModelStats>,
    pub reversed: Vec<ModelStats>,
    pub reversal: Vec<ReversalRow>,
    pub correlations: Vec<CorrelationReport>,
    pub tail: Tail,
}

/// Builds the full report from a store snapshot. The result does not depend
/// on record order.
pub fn analyze(
    records: &[RunRecord],
    capabilities: Option<&CapabilityTable>,
    tail: Tail,
) -> Result<Report, StatsError> {
    let exclusions = exclusions(records, PARSE_ERROR_THRESHOLD);
    let original = model_stats(records, Order::Original, &exclusions)?;
    let reversed = model_stats(records, Order::Reversed, &exclusions)?;
    let reversal = reversal_effect(records, &exclusions, tail)?;
    let mut correlations = Vec::new();
    if let Some(table) = capabilities {
        let outcome: BTreeMap<String, f64> = original
            .iter()
            .filter_map(|s| Some((s.model.clone(), s.fallacy_rate?)))
            .collect();
        for metric in table.metrics() {
            correlations.push(correlate(&outcome, table, metric));
        }
    }
    Ok(Report {
        exclusions,
        original,
        reversed,
        reversal,
        correlations,
        tail,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl Report {
    /// One row per model.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model",
            "excluded",
            "parse_error_rate",
            "n_answered",
            "n_incorrect",
            "n_fallacy",
            "fallacy_rate",
            "correctness_rate",
            "n_pairs",
            "blocked_fraction",
            "z",
            "p",
        ])
        .expect("in-memory write");
        for m in &self.exclusions.models {
            let s = self.original.iter().find(|s| s.model == m.model);
            let rev = self.reversal.iter().find(|r| r.model == m.model);
            let test = rev.and_then(|r| r.test);
            w.write_record([
                m.model.clone(),
                m.excluded.to_string(),
                format!("{:.6}", m.parse_error_rate),
                s.map(|s| s.n_answered.to_string()).unwrap_or_default(),
                s.map(|s| s.n_incorrect.to_string()).unwrap_or_default(),
                s.map(|s| s.n_fallacy.to_string()).unwrap_or_default(),
                opt(s.and_then(|s| s.fallacy_rate)),
                opt(s.and_then(|s| s.correctness_rate)),
                rev.map(|r| r.n_pairs.to_string()).unwrap_or_default(),
                opt(rev.and_then(|r| r.blocked_fraction)),
                opt(test.map(|t| t.z)),
                test.map(|t| format!("{:.6e}", t.p)).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// A scatter plot with the linear and exponential fits.
pub fn scatter_svg(c: &CorrelationReport, y_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if c.xs.is_empty() {
        let _ = writeln!(s, r#"<text x="{PAD}" y="{PAD}">no data</text></svg>"#);
        return s;
    }
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1) = (lo(&c.xs), hi(&c.xs));
    let (y0, y1) = (lo(&c.ys).min(0.0), hi(&c.ys).max(1e-9));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        c.metric
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        xml_escape(y_label)
    );
    for v in [x0, x1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{v:.4}</text>"#,
            px(v),
            H - PAD + 16.0
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            PAD - 4.0,
            py(v) + 4.0
        );
    }
    for ((x, y), m) in c.xs.iter().zip(&c.ys).zip(&c.models) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"><title>{}</title></circle>"#,
            px(*x),
            py(*y),
            xml_escape(m)
        );
    }
    if c.pearson.is_some() {
        // Ordinary least squares line.
        let (mx, my) = (mean(&c.xs), mean(&c.ys));
        let sxx: f64 = c.xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = c.xs.iter().zip(&c.ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b = sxy / sxx;
        let a = my - b * mx;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="darkorange" stroke-width="1.5"/>"#,
            px(x0),
            py(a + b * x0),
            px(x1),
            py(a + b * x1)
        );
    }
    if let Some(fit) = c.exp_fit {
        let pts: Vec<String> = (0..=40)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / 40.0;
                format!("{:.2},{:.2}", px(x), py(fit.predict(x).min(y1 * 4.0)))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="seagreen" stroke-dasharray="5,3" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    let mut caption = Vec::new();
    if let Some(p) = c.pearson {
        caption.push(format!("r = {:.3}, p = {:.4}", p.r, p.p));
    }
    if let Some(sp) = c.spearman {
        caption.push(format!("rho = {:.3}, p = {:.4}", sp.r, sp.p));
    }
    if let Some(r) = c.exp_fit.and_then(|f| f.r) {
        caption.push(format!("exp fit r = {r:.3}"));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        PAD / 2.0,
        caption.join("; ")
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hand_computed_values() {
        let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(close(c.r, 0.981_980_506, 1e-5), "{}", c.r);
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!(close(s.r, 0.6, 1e-12));
        let z = two_proportion_z(30, 100, 15, 100, Tail::TwoSided).unwrap();
        assert!(close(z.z, 2.540, 1e-3), "{}", z.z);
        let swapped = two_proportion_z(15, 100, 30, 100, Tail::TwoSided).unwrap();
        assert_eq!(swapped.z, -z.z);
        assert_eq!(swapped.p, z.p);
        let eq = two_proportion_z(20, 100, 20, 100, Tail::TwoSided).unwrap();
        assert_eq!((eq.z, eq.p), (0.0, 1.0));
        let deg = two_proportion_z(0, 50, 0, 60, Tail::TwoSided).unwrap();
        assert!(deg.degenerate && deg.p == 1.0);
        assert_eq!(two_proportion_z(1, 0, 1, 1, Tail::TwoSided), Err(StatsError::EmptySample));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::DegenerateVariance(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFew { .. })));
        assert!(matches!(exp_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]), Err(StatsError::NonPositive(_))));
        let flat = exp_fit(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(flat.r.is_none());
    }

    #[test]
    fn exp_fit_recovers_rates() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let f = exp_fit(&xs, &ys).unwrap();
        assert!(close(f.slope, 1.0, 1e-12) && close(f.r.unwrap(), 1.0, 1e-12));
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 * (2.0 * x).exp()).collect();
        let f = exp_fit(&xs, &ys).unwrap();
        assert!(close(f.slope, 2.0, 1e-9) && close(f.intercept, 3.5f64.ln(), 1e-9));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn special_functions_at_known_points() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-13));
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
        assert!(close(ln_gamma(10.0), 362_880f64.ln(), 1e-11));
        assert!(close(erfc(0.0), 1.0, 1e-15));
        assert!(close(normal_cdf(1.959_963_984_540_054), 0.975, 1e-12));
        // t with one degree of freedom is Cauchy.
        assert!(close(student_t_cdf(1.0, 1.0), 0.75, 1e-12));
        assert!(close(beta_reg(2.0, 3.0, 0.4), 0.5248, 1e-12));
    }

    #[test]
    fn fallacy_rate_ratio() {
        use crate::judge::{Mode, Verdict};
        use crate::record::tests::record;
        let mk = |correct: bool, predicted: bool| {
            let mut r = record("m", "p", Order::Original, RecordStatus::Ok);
            r.verdict = Some(Verdict::new(correct, predicted, Mode::Endorsement));
            r
        };
        let mut rs: Vec<RunRecord> = (0..3).map(|_| mk(false, true)).collect();
        rs.extend((0..7).map(|_| mk(false, false)));
        rs.extend((0..5).map(|_| mk(true, true)));
        assert!(close(fallacy_rate(&rs).unwrap(), 0.3, 1e-15));
        assert_eq!(fallacy_rate(&rs[10..]), Err(StatsError::UndefinedRate));
        assert_eq!(fallacy_rate(&rs[..3]).unwrap(), 1.0);
    }

    #[test]
    fn capability_table_parsing() {
        let t = CapabilityTable::from_reader("model_id,metric,value\na,elo,1200\nb, ELO ,1300.5\na,helm,0.7\n".as_bytes()).unwrap();
        assert_eq!(t.get("b", Metric::Elo), Some(1300.5));
        assert_eq!(t.metrics().len(), 2);
        assert!(CapabilityTable::from_reader("model_id,metric,value\na,elo,1\na,elo,2\n".as_bytes()).is_err());
        assert!(CapabilityTable::from_reader("model_id,metric,value\na,mmlu,1\n".as_bytes()).is_err());
    }
}
