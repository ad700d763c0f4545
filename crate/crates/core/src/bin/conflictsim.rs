use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use conflictsim::acts::ModalityEvent;
use conflictsim::affect::AffectCue;
use conflictsim::bus::{replay_reader, LogError, LogReader, ReplaySpeed, SessionEvent};
use conflictsim::catalog::{Catalog, CatalogError};
use conflictsim::conflict::{ConflictLevel, ConflictPhase};
use conflictsim::orchestrator::{
    verify_log, InitialState, Orchestrator, OrchestratorError, RatingRequest, SessionConfig, SessionMode,
};
use conflictsim::server::{self, ServerConfig};
use conflictsim::sim::{self, RunConfig, SimError, TeacherPolicy};
use serde::Deserialize;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conflictsim", version, about = "Classroom-conflict simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo episodes driven by a teacher policy.
    Run(RunArgs),
    /// Behavior catalog tools.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Print a recorded session timeline, or verify it reproduces.
    Replay(ReplayArgs),
    /// Feed a scripted input stream through a session and save its log.
    Record(RecordArgs),
    /// Start the HTTP/WebSocket server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// constant:<problem-solve|force|smooth|withdraw>, uniform, mirror, scripted:<file>
    #[arg(long, default_value = "constant:problem-solve")]
    policy: String,
    #[arg(long, default_value_t = 1000)]
    episodes: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Start levels as TASK,REL or TASK,REL,PHASE.
    #[arg(long, default_value = "4,4,1")]
    start: String,
    #[arg(long, default_value_t = conflictsim::conflict::DEFAULT_TURN_BUDGET)]
    turn_budget: u32,
    #[arg(long, default_value_t = conflictsim::acts::DEFAULT_TURNS_PER_PHASE)]
    turns_per_phase: u32,
    /// Stats JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one CSV trajectory per episode here.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    /// Write one event log per episode here.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Validate a catalog file.
    Validate { path: PathBuf },
}

#[derive(Args)]
struct ReplayArgs {
    path: PathBuf,
    /// Playback speed factor; `inf` for no pacing.
    #[arg(long, default_value = "1.0")]
    speed: ReplaySpeed,
    /// Re-feed the recorded inputs and compare student commands.
    #[arg(long)]
    verify: bool,
    /// Catalog to use instead of the one named in the log.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct RecordArgs {
    /// NDJSON input lines: {"modality": ...}, {"cue": ...} or {"rating": ...}.
    script: PathBuf,
    /// Session config (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SessionMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML config file; CONFLICTSIM_* variables override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
enum ScriptLine {
    Cue(AffectCue),
    Modality(ModalityEvent),
    Rating(RatingRequest),
}

fn parse_mode(s: &str) -> Result<SessionMode, String> {
    match s {
        "woz" => Ok(SessionMode::Woz),
        "auto" => Ok(SessionMode::Auto),
        _ => Err(format!("unknown mode {s:?} (woz or auto)")),
    }
}

fn parse_start(s: &str) -> anyhow::Result<InitialState> {
    let parts: Vec<u8> = s
        .split(',')
        .map(|p| p.trim().parse::<u8>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid --start {s:?}"))?;
    let (t, r, p) = match parts[..] {
        [t, r] => (t, r, 1),
        [t, r, p] => (t, r, p),
        _ => anyhow::bail!("--start takes TASK,REL or TASK,REL,PHASE"),
    };
    Ok(InitialState {
        task_level: ConflictLevel::new(t)?,
        rel_level: ConflictLevel::new(r)?,
        phase: ConflictPhase::new(p)?,
    })
}

/// Exit 1: the input was invalid. Exit 2: something failed while running.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn classify_orchestrator(e: OrchestratorError) -> Failure {
    match e.class() {
        conflictsim::orchestrator::ErrorClass::Internal => Failure::Runtime(e.into()),
        _ => Failure::Validation(e.into()),
    }
}

fn classify_log(e: LogError) -> Failure {
    match e {
        LogError::Io(_) => Failure::Runtime(e.into()),
        _ => Failure::Validation(e.into()),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let policy: TeacherPolicy = args.policy.parse().map_err(invalid)?;
    let config = RunConfig {
        policy,
        episodes: args.episodes,
        seed: args.seed,
        catalog_path: args.catalog,
        start: parse_start(&args.start).map_err(invalid)?,
        turn_budget: args.turn_budget,
        turns_per_phase: args.turns_per_phase,
        log_dir: args.log_dir,
    };
    let output = sim::run(&config).map_err(|e| match e {
        SimError::Setup(inner) => classify_orchestrator(inner),
        other => Failure::Runtime(other.into()),
    })?;
    let json = output.stats.to_json_pretty();
    match &args.out {
        Some(path) => std::fs::write(path, &json).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    if let Some(dir) = &args.csv_dir {
        sim::write_episode_csvs(dir, &output.episodes)?;
    }
    let s = &output.stats;
    eprintln!(
        "{} episodes: resolution rate {:.3}, mean turns {:.2}",
        s.episodes, s.resolution_rate, s.mean_turns
    );
    Ok(())
}

fn cmd_catalog_validate(path: &Path) -> Result<(), Failure> {
    match Catalog::load(path) {
        Ok(catalog) => {
            println!(
                "valid: scenario {:?}, {} parts, {} specials, {} combinations",
                catalog.scenario_id(),
                catalog.parts().len(),
                catalog.specials().len(),
                catalog.count_combinations()
            );
            Ok(())
        }
        Err(e @ CatalogError::Io { .. }) => Err(Failure::Runtime(e.into())),
        Err(CatalogError::Coverage(cells)) => {
            let list: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
            Err(invalid(anyhow::anyhow!(
                "{} uncovered cell(s):\n  {}",
                cells.len(),
                list.join("\n  ")
            )))
        }
        Err(e) => Err(invalid(e)),
    }
}

fn describe(event: &SessionEvent) -> String {
    let payload = event.payload.get();
    let mut text: String = payload.chars().take(140).collect();
    if payload.len() > text.len() {
        text.push('…');
    }
    text
}

fn cmd_replay(args: ReplayArgs) -> Result<(), Failure> {
    if args.verify {
        let log = conflictsim::bus::EventLog::load(&args.path).map_err(classify_log)?;
        let report = verify_log(&log, args.catalog.as_deref()).map_err(classify_orchestrator)?;
        if report.identical() {
            println!("identical: {} student commands reproduced", report.recorded);
            return Ok(());
        }
        return Err(invalid(anyhow::anyhow!(
            "student commands differ at index {} ({} recorded, {} replayed)",
            report.first_mismatch.unwrap_or(0),
            report.recorded,
            report.replayed
        )));
    }
    let reader = LogReader::open(&args.path).map_err(classify_log)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut write_err = None;
    let n = replay_reader(reader, args.speed, |e| {
        if write_err.is_none() {
            if let Err(err) = writeln!(
                out,
                "{:>10} ms  {:<16} #{:<4} {}",
                e.media_time_ms,
                e.topic.as_str(),
                e.seq,
                describe(e)
            ) {
                write_err = Some(err);
            }
        }
    })
    .map_err(classify_log)?;
    if let Some(err) = write_err {
        return Err(err.into());
    }
    eprintln!("{n} events");
    Ok(())
}

fn cmd_record(args: RecordArgs) -> Result<(), Failure> {
    let mut config: SessionConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| invalid(anyhow::anyhow!("invalid config: {e}")))?
        }
        None => SessionConfig {
            mode: SessionMode::Auto,
            ..SessionConfig::default()
        },
    };
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.catalog.is_some() {
        config.catalog_path = args.catalog;
    }
    config.log_path = None;
    let file = std::fs::File::open(&args.script).with_context(|| format!("cannot open {}", args.script.display()))?;
    let orchestrator = Orchestrator::new();
    let id = orchestrator
        .create_session(config)
        .map_err(classify_orchestrator)?
        .session_id;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let input: ScriptLine =
            serde_json::from_str(&line).map_err(|e| invalid(anyhow::anyhow!("script line {}: {e}", i + 1)))?;
        let result = match input {
            ScriptLine::Cue(cue) => orchestrator.submit_cue(&id, cue).map(|_| ()),
            ScriptLine::Modality(event) => orchestrator.submit_modality(&id, event).map(|_| ()),
            ScriptLine::Rating(req) => orchestrator.submit_rating_request(&id, req).map(|_| ()),
        };
        result.map_err(|e| invalid(anyhow::anyhow!("script line {}: {e}", i + 1)))?;
    }
    let summary = orchestrator.end_session(&id).map_err(classify_orchestrator)?;
    let log = orchestrator.log(&id).map_err(classify_orchestrator)?;
    log.save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    eprintln!(
        "recorded {} events ({} acts, outcome {:?}) to {}",
        log.records.len(),
        summary.act_count,
        summary.outcome,
        args.out.display()
    );
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = ServerConfig::load(args.config.as_deref()).map_err(invalid)?;
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(config))?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Catalog(CatalogCommand::Validate { path }) => cmd_catalog_validate(&path),
        Command::Replay(args) => cmd_replay(args),
        Command::Record(args) => cmd_record(args),
        Command::Serve(args) => cmd_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
