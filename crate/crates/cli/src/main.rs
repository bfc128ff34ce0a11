use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ca_core::accelerator::{
    self, Accelerator, AcceleratorError, ApproveOptions, GenReport, StagedStatus, Staging,
};
use ca_core::engine::{build_gateway, Engine, EngineError};
use ca_core::llm::{AuditLog, Gateway, LlmError, ProviderKind};
use ca_core::nlu;
use ca_core::project::{
    self, parse_project, save_project, Normalizer, ProjectConfig, ProjectError, ProjectSources,
};
use ca_core::sample;
use ca_service::{router, ChatService, SessionStore, DEFAULT_PORT};
use clap::{Args, Parser, Subcommand, ValueEnum};

const AUDIT_FILE: &str = "llm_audit.jsonl";

#[derive(Parser)]
#[command(name = "ca", version, about = "Hybrid conversational agent toolkit")]
struct Cli {
    /// Project directory.
    #[arg(long, global = true, env = "CA_PROJECT", default_value = ".")]
    project: PathBuf,
    /// LLM provider, overriding the project setting.
    #[arg(long, global = true, env = "CA_PROVIDER")]
    provider: Option<ProviderArg>,
    /// Mock fixture file, overriding the project setting.
    #[arg(long, global = true, env = "CA_FIXTURES")]
    fixtures: Option<PathBuf>,
    /// Chat-completions endpoint for the http provider.
    #[arg(long, global = true, env = "CA_LLM_ENDPOINT")]
    endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sample banking project into the project directory.
    Init {
        #[arg(long)]
        force: bool,
    },
    /// Check the project files and list every violation.
    Validate,
    /// Train the classifier and report corpus statistics.
    Train {
        /// Skip the leave-one-out evaluation.
        #[arg(long)]
        no_eval: bool,
    },
    /// Interactive conversation on stdin/stdout.
    Chat {
        #[arg(long)]
        locale: Option<String>,
        #[arg(long)]
        persona: Option<String>,
        /// Print intent, confidence and boosters after each turn.
        #[arg(long)]
        debug: bool,
    },
    /// Run the HTTP chat service.
    Serve(ServeArgs),
    /// Generate suggestions into staging.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Inspect and decide staged suggestions.
    #[command(subcommand)]
    Review(ReviewCommand),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "CA_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, env = "CA_HOST", default_value = "127.0.0.1")]
    host: String,
    /// Session storage; defaults to `<project>/data`.
    #[arg(long, env = "CA_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Allowed CORS origin; repeatable. Any origin when omitted.
    #[arg(long = "cors-origin", env = "CA_CORS_ORIGINS", value_delimiter = ',')]
    cors_origins: Vec<String>,
}

#[derive(Subcommand)]
enum GenCommand {
    Intents {
        /// Defaults to the project's domain description.
        #[arg(long)]
        domain: Option<String>,
        #[arg(short, long, default_value_t = 10)]
        n: usize,
    },
    Utterances {
        #[arg(long)]
        intent: String,
        #[arg(short, long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value = "")]
        constraints: String,
    },
    Entities {
        #[arg(long)]
        domain: Option<String>,
    },
    Synonyms {
        #[arg(long)]
        entity: String,
        #[arg(long)]
        term: String,
    },
    Persona {
        /// Defaults to the project's persona role description.
        #[arg(long)]
        role: Option<String>,
    },
    Localize {
        #[arg(long, value_delimiter = ',', required = true)]
        keys: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        locales: Vec<String>,
    },
}

#[derive(Subcommand)]
enum ReviewCommand {
    /// Pending items, or every item with --all.
    List {
        #[arg(long)]
        all: bool,
    },
    Approve {
        #[arg(required = true)]
        ids: Vec<String>,
        /// Response template for approved intents.
        #[arg(long)]
        response: Option<String>,
        /// Regex for approved entities.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long, value_enum, default_value = "verbatim")]
        normalizer: NormalizerArg,
    },
    Reject {
        #[arg(required = true)]
        ids: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizerArg {
    Verbatim,
    Digits,
    Amount,
    Date,
}

impl From<NormalizerArg> for Normalizer {
    fn from(n: NormalizerArg) -> Self {
        match n {
            NormalizerArg::Verbatim => Normalizer::Verbatim,
            NormalizerArg::Digits => Normalizer::Digits,
            NormalizerArg::Amount => Normalizer::Amount,
            NormalizerArg::Date => Normalizer::Date,
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for provider failures (including unusable model output), 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    let provider = e.chain().any(|c| {
        c.downcast_ref::<LlmError>().is_some()
            || matches!(
                c.downcast_ref::<AcceleratorError>(),
                Some(AcceleratorError::Llm { .. } | AcceleratorError::Parse { .. })
            )
            || matches!(
                c.downcast_ref::<EngineError>(),
                Some(EngineError::Provider(_))
            )
    });
    if provider {
        2
    } else {
        1
    }
}

async fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Ctx {
        dir: cli.project,
        provider: cli.provider,
        fixtures: cli.fixtures,
        endpoint: cli.endpoint,
    };
    match cli.command {
        Command::Init { force } => init(&ctx, force),
        Command::Validate => validate(&ctx),
        Command::Train { no_eval } => train(&ctx, no_eval),
        Command::Chat {
            locale,
            persona,
            debug,
        } => chat(&ctx, locale, persona, debug).await,
        Command::Serve(args) => serve(&ctx, args).await,
        Command::Gen(cmd) => generate(&ctx, cmd).await,
        Command::Review(cmd) => review(&ctx, cmd),
    }
}

struct Ctx {
    dir: PathBuf,
    provider: Option<ProviderArg>,
    fixtures: Option<PathBuf>,
    endpoint: Option<String>,
}

impl Ctx {
    /// Loads the project and applies provider overrides from flags or
    /// environment.
    fn project(&self) -> Result<ProjectConfig> {
        let mut config = project::load_project(&self.dir)
            .with_context(|| format!("loading {}", self.dir.display()))?;
        if let Some(p) = self.provider {
            config.llm.kind = match p {
                ProviderArg::Mock => ProviderKind::Mock,
                ProviderArg::Http => ProviderKind::HttpOpenaiCompatible,
            };
        }
        if let Some(f) = &self.fixtures {
            let abs =
                std::path::absolute(f).with_context(|| format!("resolving {}", f.display()))?;
            config.llm.fixtures = Some(abs);
        }
        if let Some(e) = &self.endpoint {
            config.llm.endpoint = Some(e.clone());
        }
        Ok(config)
    }

    fn gateway(&self, config: &ProjectConfig) -> Result<Gateway> {
        let audit =
            AuditLog::to_file(self.dir.join(AUDIT_FILE)).context("opening the LLM audit log")?;
        Ok(build_gateway(config, &self.dir, Arc::new(audit))?)
    }

    fn engine(&self) -> Result<Engine> {
        let config = self.project()?;
        let gateway = self.gateway(&config)?;
        Ok(Engine::new(Arc::new(config), Arc::new(gateway))?)
    }
}

fn init(ctx: &Ctx, force: bool) -> Result<ExitCode> {
    let manifest = ctx.dir.join(project::MANIFEST);
    if manifest.exists() && !force {
        bail!(
            "{} already exists (use --force to overwrite)",
            manifest.display()
        );
    }
    sample::write_banking(&ctx.dir)?;
    println!("wrote sample project to {}", ctx.dir.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(ctx: &Ctx) -> Result<ExitCode> {
    let sources = ProjectSources::read_dir(&ctx.dir)?;
    match parse_project(&sources) {
        Ok(config) => {
            println!(
                "ok: {} intents, {} entities, {} forms, {} templates",
                config.intents.len(),
                config.entities.len(),
                config.forms.len(),
                config.templates.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(ProjectError::Validation(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            println!("{} violation(s)", violations.len());
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

fn train(ctx: &Ctx, no_eval: bool) -> Result<ExitCode> {
    let config = ctx.project()?;
    let model = nlu::train(&config)?;
    println!("intents: {}", model.intents().len());
    println!("usable examples: {}", model.example_count());
    println!("vocabulary: {}", model.vocabulary().len());
    for intent in &config.intents {
        let usable = intent
            .examples
            .iter()
            .filter(|e| e.provenance.is_usable())
            .count();
        println!(
            "  {:<24} {usable:>3} / {}",
            intent.name,
            intent.examples.len()
        );
    }
    if !no_eval {
        let loo = nlu::leave_one_out(&config)?;
        match loo.accuracy() {
            Some(acc) => println!(
                "leave-one-out accuracy: {acc:.3} ({}/{})",
                loo.hits, loo.total
            ),
            None => println!("leave-one-out accuracy: n/a"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

async fn chat(
    ctx: &Ctx,
    locale: Option<String>,
    persona: Option<String>,
    debug: bool,
) -> Result<ExitCode> {
    let engine = ctx.engine()?;
    let mut state = engine.start_session();
    state.locale = locale;
    state.persona = persona;
    println!("type /handoff for a summary, /quit to leave");
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    loop {
        print!("> ");
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        match text {
            "" => continue,
            "/quit" | "/exit" => break,
            "/handoff" => {
                match engine.handoff(&state).await.0 {
                    Ok(s) => {
                        println!("Agent Action Required: {}", s.action_required);
                        println!("Summary: {}", s.summary);
                    }
                    Err(e) => println!("(handoff failed: {e})"),
                }
                continue;
            }
            _ => {}
        }
        let outcome = engine.turn(&mut state, text).await?;
        for reply in &outcome.replies {
            println!("{reply}");
        }
        if debug {
            let d = &outcome.debug;
            let boosters: Vec<String> = d
                .boosters
                .iter()
                .map(|b| format!("{:?}/{:?}", b.kind, b.guard_outcome))
                .collect();
            println!(
                "  [intent={} conf={:.3} depth={} fallbacks={} boosters={}]",
                d.prediction.intent.as_deref().unwrap_or("-"),
                d.prediction.confidence,
                d.frames.len(),
                d.fallback_count,
                boosters.join(",")
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

async fn serve(ctx: &Ctx, args: ServeArgs) -> Result<ExitCode> {
    let engine = match ctx.engine() {
        Ok(e) => e,
        Err(e) => {
            if let Some(ProjectError::Validation(v)) = e.downcast_ref::<ProjectError>() {
                eprintln!("refusing to start: project has {} violation(s)", v.len());
                for v in v {
                    eprintln!("  - {v}");
                }
                return Ok(ExitCode::from(1));
            }
            return Err(e);
        }
    };
    let data_dir = args.data_dir.unwrap_or_else(|| ctx.dir.join("data"));
    let store = SessionStore::open(&data_dir)?;
    let service = Arc::new(ChatService::new(Arc::new(engine), store));
    let app = router(service, &args.cors_origins);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("invalid address {}:{}", args.host, args.port))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &GenReport) {
    for item in &report.staged {
        println!("staged {}  {:<28} {}", item.id, item.target, item.content);
    }
    for d in &report.duplicates {
        println!("duplicate, skipped: {d}");
    }
    for f in &report.flagged {
        println!("conflict, withheld: {f}");
    }
    if report.staged.is_empty() {
        eprintln!("warning: nothing new to stage");
    }
}

async fn generate(ctx: &Ctx, cmd: GenCommand) -> Result<ExitCode> {
    let config = ctx.project()?;
    let gateway = ctx.gateway(&config)?;
    let acc = Accelerator::new(&gateway, &config);
    let mut staging = Staging::load(&ctx.dir)?;
    let report = match cmd {
        GenCommand::Intents { domain, n } => {
            let domain = domain.unwrap_or_else(|| config.domain.clone());
            acc.gen_intents(&mut staging, &domain, n).await?
        }
        GenCommand::Utterances {
            intent,
            n,
            constraints,
        } => {
            acc.gen_utterances(&mut staging, &intent, n, &constraints)
                .await?
        }
        GenCommand::Entities { domain } => {
            let domain = domain.unwrap_or_else(|| config.domain.clone());
            acc.gen_entities(&mut staging, &domain).await?
        }
        GenCommand::Synonyms { entity, term } => {
            acc.gen_synonyms(&mut staging, &entity, &term).await?
        }
        GenCommand::Persona { role } => {
            let role = role.unwrap_or_else(|| config.persona.role_description.clone());
            acc.gen_persona(&mut staging, &role).await?
        }
        GenCommand::Localize { keys, locales } => {
            acc.localize(&mut staging, &keys, &locales).await?
        }
    };
    staging.save(&ctx.dir)?;
    print_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn review(ctx: &Ctx, cmd: ReviewCommand) -> Result<ExitCode> {
    let mut staging = Staging::load(&ctx.dir)?;
    match cmd {
        ReviewCommand::List { all } => {
            let items: Vec<_> = staging
                .items
                .iter()
                .filter(|i| all || i.status == StagedStatus::Pending)
                .collect();
            println!(
                "{:<10} {:<9} {:<20} {:<28} CONTENT",
                "ID", "STATUS", "KIND", "TARGET"
            );
            for i in items {
                println!(
                    "{:<10} {:<9} {:<20} {:<28} {}",
                    i.id,
                    format!("{:?}", i.status).to_lowercase(),
                    format!("{:?}", i.kind),
                    i.target,
                    i.content
                );
            }
        }
        ReviewCommand::Approve {
            ids,
            response,
            pattern,
            normalizer,
        } => {
            let mut config = ctx.project()?;
            let opts = ApproveOptions {
                response,
                pattern,
                normalizer: normalizer.into(),
            };
            for id in &ids {
                let item = accelerator::approve(&mut config, &mut staging, id, &opts)?;
                println!("approved {} -> {}", item.id, item.target);
            }
            save_project(&config, &ctx.dir)?;
            staging.save(&ctx.dir)?;
        }
        ReviewCommand::Reject { ids } => {
            for id in &ids {
                let item = accelerator::reject(&mut staging, id)?;
                println!("rejected {}", item.id);
            }
            staging.save(&ctx.dir)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
