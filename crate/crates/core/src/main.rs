use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use readward::agents::{train, AgentError, AgentKind, Checkpoint, StepObserver, TrainSpec};
use readward::env::GameKind;
use readward::harness::{
    compare, episode_points, final_score, run, write_curves, EventLogger, FrameDumper, HarnessError, Observers,
    RunConfig, RunReport,
};
use readward::interact::NoiseModel;
use readward::manual::{load_manual, read_manual, ContextFile, ManualError, SourceTag};
use readward::provider::ProviderSpec;
use readward::reason::{build_table, ReasonError, RewardTable};

#[derive(Parser)]
#[command(name = "readward", version, about = "Manual-driven auxiliary rewards for small arcade games")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-object contexts from a manual.
    Read(ReadArgs),
    /// Turn contexts into a reward table.
    Reason(ReasonArgs),
    /// Train one agent on one seed.
    Train(TrainArgs),
    /// Baseline vs assisted over several seeds.
    Run(RunArgs),
    /// Compare two run reports.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<GameKind>,
    /// lexical | fixture:<path> | http[:<url>]
    #[arg(long)]
    provider: Option<ProviderSpec>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(g) = self.game {
            c.game = g;
        }
        if let Some(p) = &self.provider {
            c.provider = p.clone();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct ReadArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manual: Option<PathBuf>,
    /// official | wiki | custom
    #[arg(long)]
    source_tag: Option<SourceTag>,
    #[arg(long, visible_alias = "k")]
    top_k: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Objects to build contexts for instead of the grounded game classes.
    #[arg(long, value_delimiter = ',')]
    objects: Option<Vec<String>>,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReasonArgs {
    #[command(flatten)]
    common: Common,
    /// context.json from `read`.
    #[arg(long)]
    context: PathBuf,
    #[arg(long)]
    r_p: Option<f64>,
    #[arg(long)]
    r_n: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    delayed: bool,
    /// rewards.json from `reason`; without it no auxiliary reward is given.
    #[arg(long)]
    rewards: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// e.g. miss=0.1,flip=0.2,merge=2
    #[arg(long)]
    noise: Option<NoiseModel>,
    #[arg(long, default_value = "train-out")]
    out: PathBuf,
    /// Write every frame as PGM into this directory.
    #[arg(long)]
    dump_frames: Option<PathBuf>,
    /// Append interaction events as JSON lines.
    #[arg(long)]
    log_events: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    delayed: bool,
    #[arg(long)]
    manual: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    noise: Option<NoiseModel>,
    #[arg(long)]
    r_p: Option<f64>,
    #[arg(long)]
    r_n: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write curves.svg.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference report.
    a: PathBuf,
    b: PathBuf,
    /// Print the comparison as JSON.
    #[arg(long)]
    json: bool,
}

struct Failed {
    code: u8,
    message: String,
}

impl From<HarnessError> for Failed {
    fn from(e: HarnessError) -> Self {
        Failed {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<ManualError> for Failed {
    fn from(e: ManualError) -> Self {
        let code = if matches!(e, ManualError::Provider { .. }) { 3 } else { 2 };
        Failed {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ReasonError> for Failed {
    fn from(e: ReasonError) -> Self {
        let code = if matches!(e, ReasonError::Provider { .. }) { 3 } else { 2 };
        Failed {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AgentError> for Failed {
    fn from(e: AgentError) -> Self {
        let code = if matches!(e, AgentError::Divergence(_)) { 4 } else { 2 };
        Failed {
            code,
            message: e.to_string(),
        }
    }
}

fn config_err(m: impl ToString) -> Failed {
    Failed {
        code: 2,
        message: m.to_string(),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failed> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| config_err(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_read(a: ReadArgs) -> Result<(), Failed> {
    let mut c = a.common.load()?;
    if let Some(m) = a.manual {
        c.manual = Some(m);
    }
    if let Some(t) = a.source_tag {
        c.source_tag = t;
    }
    let manual = c.manual.clone().ok_or_else(|| config_err("--manual is required"))?;
    let provider = c.provider.build().map_err(|e| Failed {
        code: 3,
        message: e.to_string(),
    })?;
    let doc = load_manual(&manual, c.source_tag)?;
    let ctx = read_manual(
        provider.as_ref(),
        &doc,
        c.game,
        a.top_k.unwrap_or(c.top_k),
        a.objects.as_deref(),
        a.max_tokens.unwrap_or(c.max_tokens),
    )?;
    write_or_print(a.out.as_deref(), &ctx.to_json())
}

fn cmd_reason(a: ReasonArgs) -> Result<(), Failed> {
    let c = a.common.load()?;
    let ctx = ContextFile::load(&a.context)?;
    let provider = c.provider.build().map_err(|e| Failed {
        code: 3,
        message: e.to_string(),
    })?;
    let table = build_table(
        provider.as_ref(),
        &ctx.contexts,
        a.r_p.unwrap_or(c.r_p),
        a.r_n.unwrap_or(c.r_n),
    )?;
    let json = serde_json::to_string_pretty(&table).map_err(config_err)? + "\n";
    write_or_print(a.out.as_deref(), &json)
}

fn cmd_train(a: TrainArgs) -> Result<(), Failed> {
    let mut c = a.common.load()?;
    if let Some(k) = a.agent {
        c.agent = k;
    }
    c.delayed |= a.delayed;
    if let Some(s) = a.steps {
        c.steps = s;
    }
    if a.noise.is_some() {
        c.noise = a.noise;
    }
    c.seeds = vec![a.seed];
    c.validate()?;
    let table = a.rewards.as_deref().map(RewardTable::load).transpose()?;
    let mut spec = TrainSpec::new(c.env_config(a.seed), c.agent, c.steps, a.seed);
    spec.noise = c.noise;
    spec.q = c.q.clone();
    spec.a2c = c.a2c.clone();

    fs::create_dir_all(&a.out).map_err(|e| config_err(format!("{}: {e}", a.out.display())))?;
    let mut observers = Observers::default();
    if let Some(d) = &a.dump_frames {
        observers.0.push(Box::new(FrameDumper::new(d)?) as Box<dyn StepObserver>);
    }
    if let Some(p) = &a.log_events {
        observers.0.push(Box::new(EventLogger::create(p)?));
    }
    let out = train(&spec, table.as_ref(), &mut observers)?;
    drop(observers);
    let points = episode_points(&out.traces);
    write_curves(&a.out.join("curves.csv"), &points)?;
    if let Some(ck) = Checkpoint::from_learner(&spec, &out.learner) {
        ck.save(&a.out.join("checkpoint.json"))?;
    }
    match final_score(&points, c.window) {
        Some(s) => println!("{} episodes, final score {s:.2}", points.len()),
        None => println!("no episode finished within {} steps", c.steps),
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failed> {
    let mut c = a.common.load()?;
    if let Some(k) = a.agent {
        c.agent = k;
    }
    c.delayed |= a.delayed;
    c.plot |= a.plot;
    if let Some(m) = a.manual {
        c.manual = Some(m);
    }
    if let Some(s) = a.seeds {
        c.seeds = s;
    }
    if let Some(s) = a.steps {
        c.steps = s;
    }
    if a.noise.is_some() {
        c.noise = a.noise;
    }
    if let Some(r) = a.r_p {
        c.r_p = r;
    }
    if let Some(r) = a.r_n {
        c.r_n = r;
    }
    if let Some(o) = a.out {
        c.out = o;
    }
    let report = run(&c)?;
    for (arm, s) in report.failures() {
        if let Some(f) = &s.failure {
            eprintln!("{arm} seed {}: {}", s.seed, f.message);
        }
    }
    for arm in &report.arms {
        let num = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.2}"));
        println!(
            "{:<9} mean {} std {} r {}",
            arm.arm.as_str(),
            num(arm.mean),
            num(arm.std),
            num(arm.correlation)
        );
    }
    if let Some(cmp) = &report.comparison {
        println!("{cmp}");
    }
    println!("report: {}", c.out.join("report.json").display());
    match report.exit_code() {
        0 => Ok(()),
        code => Err(Failed {
            code: code as u8,
            message: "some seeds failed".into(),
        }),
    }
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failed> {
    let ra = RunReport::load(&a.a)?;
    let rb = RunReport::load(&a.b)?;
    let c = compare(&ra, &rb)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&c).map_err(config_err)?);
    } else {
        println!("{c}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Read(a) => cmd_read(a),
        Command::Reason(a) => cmd_reason(a),
        Command::Train(a) => cmd_train(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
