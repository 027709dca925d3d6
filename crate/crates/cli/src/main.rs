use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use etrbench_core::conformance::{self, Tier};
use etrbench_core::engine::what_follows_traced;
use etrbench_core::generate::{
    generate_batch, read_problems, validate_problem, write_problems, GenConfig, Problem,
};
use etrbench_core::judge::{interpret, judge_response, Mode};
use etrbench_core::logic::Oracle;
use etrbench_core::record::{read_records, Order, RunStore};
use etrbench_core::render::PromptStyle;
use etrbench_core::stats::{analyze, scatter_svg, CapabilityTable, Tail};
use etrbench_core::view::parse_view;
use etrbench_harness::stub::{order_effect_script, StubReply, StubServer};
use etrbench_harness::{
    prepare, run_suite, verify_prompt_hashes, ChatClient, ChatTranslator, HarnessConfig,
    ModelSpec, OpenAiClient, SuiteOptions,
};

#[derive(Parser)]
#[command(name = "etrbench", version, about = "Generate, run and score erotetic-theory fallacy problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate validated problems as JSONL.
    Generate(GenerateArgs),
    /// Print the prompt for one or all problems.
    Render(RenderArgs),
    /// Print what follows from premises in view notation, with the trace.
    Predict(PredictArgs),
    /// Parse and judge one answer against a problem.
    Judge(JudgeArgs),
    /// Run problems against chat-completion endpoints.
    Eval(EvalArgs),
    /// Compute statistics and reports from a run store.
    Analyze(AnalyzeArgs),
    /// Run the gold conformance vectors.
    Conformance,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Master seed; defaults to the config's seed, else 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Generator settings as JSON (e.g. a previous run's .gen.json sidecar).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_premises: Option<usize>,
    #[arg(long)]
    min_atoms: Option<usize>,
    #[arg(long)]
    max_atoms: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Standard,
    Brief,
}

impl From<StyleArg> for PromptStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Standard => PromptStyle::Standard,
            StyleArg::Brief => PromptStyle::Brief,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Original,
    Reversed,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Original => Order::Original,
            OrderArg::Reversed => Order::Reversed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Endorsement,
    Exact,
    UpToEquivalence,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Endorsement => Mode::Endorsement,
            ModeArg::Exact => Mode::Exact,
            ModeArg::UpToEquivalence => Mode::UpToEquivalence,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TailArg {
    TwoSided,
    Greater,
    Less,
}

impl From<TailArg> for Tail {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::TwoSided => Tail::TwoSided,
            TailArg::Greater => Tail::Greater,
            TailArg::Less => Tail::Less,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    problems: PathBuf,
    /// Problem id; all problems when omitted.
    #[arg(long)]
    id: Option<String>,
    #[arg(long, value_enum, default_value = "original")]
    order: OrderArg,
    #[arg(long, value_enum, default_value = "standard")]
    style: StyleArg,
}

#[derive(Args)]
struct PredictArgs {
    /// Premises in view notation, in order.
    #[arg(required = true)]
    premises: Vec<String>,
    /// Also print the inference trace.
    #[arg(long)]
    trace: bool,
    /// Check whether this view is endorsed.
    #[arg(long)]
    query: Option<String>,
}

#[derive(Args)]
struct JudgeArgs {
    #[arg(long)]
    problems: PathBuf,
    #[arg(long)]
    id: String,
    #[arg(long, value_enum, default_value = "original")]
    order: OrderArg,
    /// The model's answer text.
    #[arg(long)]
    answer: String,
    #[arg(long, value_enum, default_value = "endorsement")]
    mode: ModeArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Harness config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problems: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Only the first N problems.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long, value_enum)]
    style: Option<StyleArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Serve replies from an in-process stub: the predicted conclusion on
    /// original order, "nothing follows" on reversed order.
    #[arg(long)]
    stub: bool,
    #[command(flatten)]
    model: ModelFlags,
}

/// Model settings; when --model is given these define the model list.
#[derive(Args)]
struct ModelFlags {
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    reasoning: bool,
    #[arg(long)]
    thinking_budget: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    retry_attempts: Option<u32>,
    #[arg(long)]
    retry_base_delay_ms: Option<u64>,
    #[arg(long)]
    retry_max_delay_ms: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
}

impl ModelFlags {
    fn apply(&self, spec: &mut ModelSpec) {
        if let Some(p) = &self.provider {
            spec.provider = p.clone();
        }
        if let Some(v) = self.max_tokens {
            spec.max_tokens = v;
        }
        if self.reasoning {
            spec.reasoning = true;
        }
        if let Some(v) = self.thinking_budget {
            spec.thinking_budget = Some(v);
        }
        if let Some(v) = self.timeout_secs {
            spec.timeout_secs = v;
        }
        if let Some(v) = self.retry_attempts {
            spec.retry.attempts = v;
        }
        if let Some(v) = self.retry_base_delay_ms {
            spec.retry.base_delay_ms = v;
        }
        if let Some(v) = self.retry_max_delay_ms {
            spec.retry.max_delay_ms = v;
        }
        if let Some(v) = self.temperature {
            spec.temperature = v;
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    store: PathBuf,
    /// CSV with columns model_id, metric, value.
    #[arg(long)]
    capabilities: Option<PathBuf>,
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "two-sided")]
    tail: TailArg,
    /// Problems file; when given, record prompt hashes are re-checked.
    #[arg(long)]
    problems: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Render(a) => render(a),
        Command::Predict(a) => predict(a),
        Command::Judge(a) => judge(a),
        Command::Eval(a) => eval(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Conformance => run_conformance(),
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".gen.json");
    PathBuf::from(s)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let inner = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(inner).context("generator config")?
        }
        None => GenConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(v) = a.max_premises {
        cfg.max_premises = v;
    }
    if let Some(v) = a.min_atoms {
        cfg.min_atoms = v;
    }
    if let Some(v) = a.max_atoms {
        cfg.max_atoms = v;
    }
    cfg.validate()?;
    let problems = generate_batch(&cfg, a.n)?;
    let mut bad = 0;
    for p in &problems {
        let report = validate_problem(p, &cfg);
        if !report.is_ok() {
            bad += 1;
            eprintln!("{}: {:?}", p.id, report.violations);
        }
    }
    if bad > 0 {
        bail!("{bad} of {} problems failed validation", problems.len());
    }
    write_problems(&a.out, &problems)?;
    let meta = serde_json::json!({ "count": problems.len(), "config": cfg });
    std::fs::write(sidecar(&a.out), serde_json::to_string_pretty(&meta)? + "\n")?;
    println!(
        "wrote {} validated problems to {} (seed {})",
        problems.len(),
        a.out.display(),
        cfg.seed
    );
    Ok(())
}

fn load_problems(path: &Path) -> Result<Vec<Problem>> {
    read_problems(path).with_context(|| format!("reading problems from {}", path.display()))
}

fn find<'a>(problems: &'a [Problem], id: &str) -> Result<&'a Problem> {
    problems
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| anyhow!("no problem with id {id}"))
}

fn render(a: RenderArgs) -> Result<()> {
    let problems = load_problems(&a.problems)?;
    let chosen: Vec<&Problem> = match &a.id {
        Some(id) => vec![find(&problems, id)?],
        None => problems.iter().collect(),
    };
    for (i, p) in chosen.iter().enumerate() {
        let prep = prepare(p, a.order.into(), a.style.into())?;
        if chosen.len() > 1 {
            if i > 0 {
                println!();
            }
            println!("### {} ({})", p.id, prep.theme.name);
        }
        println!("{}", prep.prompt);
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let premises = a
        .premises
        .iter()
        .map(|s| parse_view(s).map_err(|e| anyhow!("{s}: {e}")))
        .collect::<Result<Vec<_>>>()?;
    let (out, trace) = what_follows_traced(&premises);
    if a.trace {
        print!("{trace}");
    }
    println!("{out}");
    if let Some(q) = a.query {
        let q = parse_view(&q).map_err(|e| anyhow!("{q}: {e}"))?;
        println!("endorsed: {}", etrbench_core::does_it_follow(&premises, &q));
    }
    Ok(())
}

fn judge(a: JudgeArgs) -> Result<()> {
    let problems = load_problems(&a.problems)?;
    let p = find(&problems, &a.id)?;
    let prep = prepare(p, a.order.into(), PromptStyle::Standard)?;
    let parsed = interpret(&a.answer, &prep.mapping, None, 0);
    println!("{}", serde_json::to_string_pretty(&parsed)?);
    match judge_response(&prep.problem, &parsed, a.mode.into(), &Oracle::default()) {
        Ok(v) => println!("{}", serde_json::to_string_pretty(&v)?),
        Err(e) => bail!("{e}"),
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(v) = &a.base_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &a.api_key_env {
        cfg.api_key_env = v.clone();
    }
    if let Some(v) = a.max_in_flight {
        cfg.max_in_flight = v;
    }
    if let Some(v) = a.style {
        cfg.prompt_style = v.into();
    }
    if let Some(v) = a.mode {
        cfg.mode = v.into();
    }
    if !a.model.models.is_empty() {
        cfg.models = a.model.models.iter().map(ModelSpec::new).collect();
    }
    for m in &mut cfg.models {
        a.model.apply(m);
    }
    if a.stub && cfg.models.is_empty() {
        cfg.models.push(ModelSpec::new("stub/order-effect"));
    }
    cfg.validate()?;
    if cfg.models.is_empty() {
        bail!("no models: pass --model or list them in the config file");
    }
    let mut problems = load_problems(&a.problems)?;
    if let Some(n) = a.limit {
        problems.truncate(n);
    }
    let store = RunStore::open(&a.store)?;
    let opts = SuiteOptions {
        max_in_flight: cfg.max_in_flight,
        style: cfg.prompt_style,
        mode: cfg.mode,
        oracle: Oracle::new(cfg.oracle_cap),
        translator_retries: cfg.translator.as_ref().map_or(0, |t| t.retries),
        retry_transport_errors: true,
    };

    let _server;
    let client: OpenAiClient = if a.stub {
        let script: Arc<HashMap<String, String>> = Arc::new(order_effect_script(&problems, cfg.prompt_style)?);
        let server = StubServer::start(move |_, prompt| match script.get(prompt) {
            Some(r) => StubReply::Text(r.clone()),
            None => StubReply::Status(404),
        })?;
        let c = OpenAiClient::unpooled(server.base_url(), "stub".into()).map_err(|e| anyhow!(e))?;
        _server = server;
        c
    } else {
        OpenAiClient::new(&cfg.base_url, cfg.api_key()?).map_err(|e| anyhow!(e))?
    };
    let translator = cfg.translator.as_ref().map(|t| ChatTranslator {
        client: &client as &dyn ChatClient,
        spec: ModelSpec::new(t.model.clone()),
    });
    let summary = run_suite(
        &cfg.models,
        &problems,
        &client,
        translator.as_ref().map(|t| t as &(dyn etrbench_core::judge::Translator + Sync)),
        &store,
        &opts,
    )?;
    println!(
        "completed {} exchanges ({} skipped as done, {} transport errors, {} parse errors); store: {}",
        summary.completed,
        summary.skipped,
        summary.transport_errors,
        summary.parse_errors,
        a.store.display()
    );
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let records = read_records(&a.store)?;
    if records.is_empty() {
        bail!("{} holds no records", a.store.display());
    }
    if let Some(p) = &a.problems {
        let problems = load_problems(p)?;
        let bad = verify_prompt_hashes(&records, &problems);
        if !bad.is_empty() {
            bail!("{} records do not match their re-rendered prompts (first: {:?})", bad.len(), bad[0]);
        }
    }
    let caps = a.capabilities.as_deref().map(CapabilityTable::load).transpose()?;
    let report = analyze(&records, caps.as_ref(), a.tail.into())?;
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::write(a.out_dir.join("summary.csv"), report.summary_csv())?;
    std::fs::write(
        a.out_dir.join("results.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(
        a.out_dir.join("exclusions.json"),
        serde_json::to_string_pretty(&report.exclusions)? + "\n",
    )?;
    for c in &report.correlations {
        std::fs::write(
            a.out_dir.join(format!("scatter-{}.svg", c.metric)),
            scatter_svg(c, "fallacy rate"),
        )?;
    }
    for m in &report.exclusions.models {
        if m.excluded {
            println!("excluded {} (parse-error rate {:.1}%)", m.model, 100.0 * m.parse_error_rate);
        }
    }
    for s in &report.original {
        let rate = s.fallacy_rate.map_or("undefined".to_owned(), |r| format!("{r:.3}"));
        println!("{}: fallacy rate {rate} over {} incorrect of {} answered", s.model, s.n_incorrect, s.n_answered);
    }
    for r in &report.reversal {
        if let (Some(b), Some(t)) = (r.blocked_fraction, r.test) {
            println!("{}: {:.2}% of fallacies blocked by reversal (z = {:.2}, p = {:.2e})", r.model, 100.0 * b, t.z, t.p);
        }
    }
    for c in &report.correlations {
        if let Some(p) = c.pearson {
            println!("{} (n = {}): r = {:.3}, p = {:.4}", c.metric, p.n, p.r, p.p);
        }
        if let Some(s) = c.spearman {
            println!("{} (n = {}): rho = {:.3}, p = {:.4}", c.metric, s.n, s.r, s.p);
        }
        for n in &c.notes {
            println!("{}: {n}", c.metric);
        }
    }
    println!("reports written to {}", a.out_dir.display());
    Ok(())
}

fn run_conformance() -> Result<()> {
    let checks = conformance::run_all();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| c.tier == Tier::Core && !c.passed).count();
    if failed > 0 {
        bail!("{failed} conformance checks failed");
    }
    Ok(())
}
