use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ranedge_core::artifacts::{self, ArtifactError};
use ranedge_core::config::{ConfigError, RunConfig, ScenarioSelection};
use ranedge_core::harness::{
    compare_scenarios, run_scenarios, AgentFactory, ExternalFactory, HarnessError, ReasonerKind, RuleFactory,
    ScenarioConfig, ScenarioReport,
};
use ranedge_core::agents::HttpTransport;
use ranedge_core::memory::{DecayForm, KeywordBands, MemoryError, MemoryStore, QueryContext, TrafficLevel};
use ranedge_core::net_math::{LatencyForm, QueueTransfer};

const USAGE: u8 = 2;
const IO: u8 = 3;
const SCENARIO: u8 = 4;

#[derive(Parser)]
#[command(name = "ranedge", version, about = "RAN/Edge negotiation experiments with debiased memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all memory scenarios and write their artifacts.
    Run(RunArgs),
    /// Re-run exactly what a manifest describes.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
    /// Score a distilled memory file against a query and print every component.
    InspectMemory {
        store: PathBuf,
        /// Query context, e.g. `traffic=high,trial=12`.
        #[arg(long)]
        query: Option<String>,
        /// Number of candidates to list.
        #[arg(long)]
        top: Option<usize>,
        /// Use recency retrieval instead of the debiased ranking.
        #[arg(long)]
        vanilla: bool,
        /// Config file providing memory weights and bandwidth bounds.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a config file and print the resolved configuration.
    ValidateConfig { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    reasoner: Option<Reasoner>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    queue_transfer: Option<Transfer>,
    #[arg(long)]
    latency_form: Option<Latency>,
    #[arg(long)]
    decay_form: Option<Decay>,
    #[arg(long)]
    force_failure_slot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    None,
    Vanilla,
    Unbiased,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reasoner {
    Rules,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transfer {
    Corrected,
    AsPrinted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Latency {
    Division,
    AsPrinted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decay {
    TimeConstant,
    AsPrinted,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Io { .. }) { IO } else { USAGE };
        Self::new(code, e)
    }
}

impl From<ArtifactError> for Failure {
    fn from(e: ArtifactError) -> Self {
        Self::new(IO, e)
    }
}

impl From<MemoryError> for Failure {
    fn from(e: MemoryError) -> Self {
        let code = match e {
            MemoryError::Io(_) => IO,
            MemoryError::InvalidParams(_) | MemoryError::NegativeAge { .. } => USAGE,
            _ => IO,
        };
        Self::new(code, e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Self::new(SCENARIO, e)
    }
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.run = None;
    let s = &mut cfg.scenario;
    if let Some(v) = args.scenario {
        s.scenario = match v {
            Scenario::None => ScenarioSelection::None,
            Scenario::Vanilla => ScenarioSelection::Vanilla,
            Scenario::Unbiased => ScenarioSelection::Unbiased,
            Scenario::All => ScenarioSelection::All,
        };
    }
    if let Some(v) = args.trials {
        s.trials = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.max_rounds {
        s.max_rounds = v;
    }
    if let Some(v) = args.reasoner {
        s.reasoner = match v {
            Reasoner::Rules => ReasonerKind::Rules,
            Reasoner::External => ReasonerKind::External,
        };
    }
    if let Some(v) = args.queue_transfer {
        cfg.digital_twin.queue_transfer = match v {
            Transfer::Corrected => QueueTransfer::Corrected,
            Transfer::AsPrinted => QueueTransfer::AsPrinted,
        };
    }
    if let Some(v) = args.latency_form {
        cfg.digital_twin.latency_form = match v {
            Latency::Division => LatencyForm::Division,
            Latency::AsPrinted => LatencyForm::AsPrinted,
        };
    }
    if let Some(v) = args.decay_form {
        cfg.memory.decay_form = match v {
            Decay::TimeConstant => DecayForm::TimeConstant,
            Decay::AsPrinted => DecayForm::AsPrinted,
        };
    }
    if args.force_failure_slot {
        cfg.memory.force_failure_slot = true;
    }
    Ok(cfg)
}

fn factory(cfg: &RunConfig) -> Result<Box<dyn AgentFactory>, Failure> {
    match cfg.scenario.reasoner {
        ReasonerKind::Rules => Ok(Box::new(RuleFactory)),
        ReasonerKind::External => {
            let transport = HttpTransport::from_env().map_err(|e| Failure::new(USAGE, e))?;
            Ok(Box::new(ExternalFactory {
                transport: Arc::new(transport),
                timeout_retries: cfg.scenario.timeout_retries,
            }))
        }
    }
}

fn execute(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let scenarios: Vec<ScenarioConfig> = cfg.scenarios()?;
    let factory = factory(cfg)?;
    let reports = run_scenarios(&scenarios, factory.as_ref())
        .into_iter()
        .collect::<Result<Vec<ScenarioReport>, _>>()?;
    let names = artifacts::write_run(out, cfg, &reports)?;
    for r in &reports {
        let a = &r.aggregate;
        println!(
            "{}: {} trials, {} agreements, {} conflicts, {} parse failures, sla violations {:.2}%",
            r.scenario, a.trials, a.agreements, a.conflict_count, a.parse_failure_count, a.sla_violation_rate
        );
    }
    if reports.len() >= 2 {
        print!("{}", compare_scenarios(&reports).to_text());
    }
    println!("wrote {} files to {}", names.len(), out.display());
    Ok(())
}

fn parse_query(text: Option<&str>, default_trial: usize) -> Result<QueryContext, Failure> {
    let mut q = QueryContext {
        traffic_level: TrafficLevel::Medium,
        trial_id: default_trial,
    };
    for pair in text.unwrap_or("").split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Failure::new(USAGE, format!("query term `{pair}` is not key=value")))?;
        match k.trim() {
            "traffic" => q.traffic_level = v.trim().parse().map_err(|e| Failure::new(USAGE, e))?,
            "trial" => {
                q.trial_id = v
                    .trim()
                    .parse()
                    .map_err(|_| Failure::new(USAGE, format!("bad trial `{v}`")))?
            }
            other => return Err(Failure::new(USAGE, format!("unknown query key `{other}`"))),
        }
    }
    Ok(q)
}

fn inspect(
    store: &Path,
    query: Option<&str>,
    top: Option<usize>,
    vanilla: bool,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !store.is_file() {
        return Err(Failure::new(IO, format!("memory store {} not found", store.display())));
    }
    let net = cfg.digital_twin.net_params();
    let strategies = MemoryStore::load_distilled(store, &KeywordBands::new(&net))?;
    let next_trial = strategies.iter().map(|s| s.trial_id() + 1).max().unwrap_or(0);
    let q = parse_query(query, next_trial)?;
    let mut params = cfg.memory.params();
    params.debiasing_enabled = !vanilla;
    if let Some(n) = top {
        params.n_top = n;
    }
    params.validate()?;
    let store = MemoryStore::from_strategies(strategies);
    let ranked = store.retrieve(&q, &params)?;
    println!(
        "query: traffic={} trial={} keywords={:?} ({} strategies stored)",
        q.traffic_level,
        q.trial_id,
        q.keywords(),
        store.len()
    );
    if ranked.is_empty() {
        println!("no matching strategies");
        return Ok(());
    }
    println!("rank trial age alpha*semantic beta*decay delta*inflection phi_base gamma*diversity phi_final outcome");
    for (i, c) in ranked.iter().enumerate() {
        println!(
            "{:>4} {:>5} {:>3} {:>14.6} {:>11.6} {:>17.6} {:>8.6} {:>15.6} {:>9.6} {}",
            i + 1,
            c.strategy.trial_id(),
            c.age,
            params.alpha * c.phi_semantic,
            params.beta * c.phi_decay,
            params.delta * c.phi_inflection,
            c.phi_base,
            c.phi_diversity,
            c.phi_final,
            c.strategy.description
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = resolve(&args)?;
            execute(&cfg, &args.out)
        }
        Command::Replay { manifest, out } => {
            let mut cfg = RunConfig::load(&manifest)?;
            cfg.run = None;
            execute(&cfg, &out)
        }
        Command::InspectMemory {
            store,
            query,
            top,
            vanilla,
            config,
        } => inspect(&store, query.as_deref(), top, vanilla, config.as_deref()),
        Command::ValidateConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            let n = cfg.scenarios()?.len();
            print!("{}", cfg.to_toml());
            println!("# ok: {n} scenario(s)");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
