// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line interface. Every flag can also be set through a `CLEARWAY_*`
//! environment variable; flags win over the environment, and both win over
//! the `--config` file.

use std::ffi::OsString;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use clearway_core::artifacts::DEFAULT_CONTACT;
use clearway_core::inventory::Store;
use clearway_core::policy::{evaluate_product, EvaluationOptions, PolicyDocument};
use clearway_core::Execution;
use clearway_service::ServiceConfig;

use crate::artifacts::{render, write, Artifact, ArtifactInputs};
use crate::check::{run_check, CheckConfig};
use crate::config::{load_corpus, FileConfig};
use crate::evaluator::GateEvaluator;
use crate::inputs::{load_product, read_policy, read_store, LockfileArg, PathCheck};
use crate::report::ReportFormat;
use crate::sync::{sync_inventory, SyncConfig};

/// Exit code for bad configuration, unreadable inputs and crashes.
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "clearway", version, about = "Open source license compliance gate")]
pub struct Cli {
    /// TOML file with corpus, contact, enrichment and service settings.
    #[arg(long, global = true, env = "CLEARWAY_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a product and exit 0 (pass), 1 (fail), 2 (needs review, with --strict) or 3 (error).
    Check(CheckArgs),
    /// Register unknown dependencies, scan local sources and open clearance requests.
    Sync(SyncArgs),
    /// Write an SPDX 2.3 JSON SBOM.
    Sbom(ArtifactArgs),
    /// Write third-party notices.
    Notice(ArtifactArgs),
    /// Write the CCS manifest and written source offer.
    Ccs(ArtifactArgs),
    /// Write the CSV license list.
    Licenses(ArtifactArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProductArgs {
    /// Product manifest (JSON).
    #[arg(long, env = "CLEARWAY_MANIFEST")]
    pub manifest: Option<PathBuf>,

    /// Lockfile as <format>:<path>; formats: neutral, cargo. Repeatable.
    #[arg(long = "lockfile", env = "CLEARWAY_LOCKFILE", value_delimiter = ',')]
    pub lockfiles: Vec<LockfileArg>,

    /// SPDX 2.x JSON document to read dependencies and declared licenses from.
    #[arg(long, env = "CLEARWAY_SBOM_IN")]
    pub sbom_in: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Inventory journal (JSON lines).
    #[arg(long, env = "CLEARWAY_JOURNAL")]
    pub journal: Option<PathBuf>,

    /// Policy document (JSON).
    #[arg(long, env = "CLEARWAY_POLICY")]
    pub policy: Option<PathBuf>,

    /// Evaluation and SBOM creation time (RFC 3339); defaults to now.
    #[arg(long, env = "CLEARWAY_TIMESTAMP")]
    pub timestamp: Option<DateTime<Utc>>,

    /// Disable data-parallel scanning and evaluation.
    #[arg(long, env = "CLEARWAY_SEQUENTIAL")]
    pub sequential: bool,
}

impl EvalArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub product: ProductArgs,
    #[command(flatten)]
    pub eval: EvalArgs,

    /// Directory for artifacts and the report file.
    #[arg(long, env = "CLEARWAY_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    /// Fail (exit 2) when components still need review.
    #[arg(long, env = "CLEARWAY_STRICT")]
    pub strict: bool,

    /// A previous JSON report; only findings it does not contain count.
    #[arg(long, env = "CLEARWAY_BASELINE")]
    pub baseline: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t, env = "CLEARWAY_REPORT")]
    pub report: ReportFormat,

    /// Write artifacts even when the check fails.
    #[arg(long, env = "CLEARWAY_ARTIFACTS_ALWAYS")]
    pub artifacts_always: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SyncArgs {
    #[command(flatten)]
    pub product: ProductArgs,

    #[arg(long, env = "CLEARWAY_JOURNAL")]
    pub journal: Option<PathBuf>,

    /// Unpacked sources laid out as <dir>/<ecosystem>/<name>/<version>/.
    #[arg(long, env = "CLEARWAY_SOURCES")]
    pub sources: Option<PathBuf>,

    /// Skip the knowledge base even when configured.
    #[arg(long, env = "CLEARWAY_NO_ENRICH")]
    pub no_enrich: bool,

    #[arg(long, env = "CLEARWAY_TIMESTAMP")]
    pub timestamp: Option<DateTime<Utc>>,

    #[arg(long, env = "CLEARWAY_SEQUENTIAL")]
    pub sequential: bool,

    #[arg(long, value_enum, default_value_t, env = "CLEARWAY_REPORT")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct ArtifactArgs {
    #[command(flatten)]
    pub product: ProductArgs,
    #[command(flatten)]
    pub eval: EvalArgs,

    /// Write files here instead of printing to standard output.
    #[arg(long, env = "CLEARWAY_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub product: ProductArgs,

    #[arg(long, env = "CLEARWAY_JOURNAL")]
    pub journal: Option<PathBuf>,

    #[arg(long, env = "CLEARWAY_POLICY")]
    pub policy: Option<PathBuf>,

    /// Address to listen on, e.g. 127.0.0.1:8080.
    #[arg(long, env = "CLEARWAY_LISTEN")]
    pub listen: Option<std::net::SocketAddr>,

    /// JSON file mapping bearer tokens to identity and role.
    #[arg(long, env = "CLEARWAY_TOKENS")]
    pub tokens: Option<PathBuf>,

    /// Browser origin allowed to call the API. Repeatable.
    #[arg(long = "cors-origin", env = "CLEARWAY_CORS_ORIGIN", value_delimiter = ',')]
    pub cors_origins: Vec<String>,
}

/// Parses `args`, runs the command and returns the process exit code.
/// Never panics: a crash inside a command is reported as exit 3.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { 0 } else { EXIT_INTERNAL };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| dispatch(cli, out, err))) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INTERNAL
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            let _ = writeln!(err, "internal error: {message}");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Check(args) => check(args, &file, out, err),
        Command::Sync(args) => sync(args, &file, out),
        Command::Sbom(args) => artifact(args, Artifact::Sbom, &file, out, err),
        Command::Notice(args) => artifact(args, Artifact::Notice, &file, out, err),
        Command::Ccs(args) => artifact(args, Artifact::Ccs, &file, out, err),
        Command::Licenses(args) => artifact(args, Artifact::LicenseList, &file, out, err),
        Command::Serve(args) => serve(args, file, err),
    }
}

fn check(args: CheckArgs, file: &FileConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let cfg = CheckConfig {
        policy: args.eval.policy.clone(),
        journal: args.eval.journal.clone(),
        manifest: args.product.manifest,
        lockfiles: args.product.lockfiles,
        sbom_in: args.product.sbom_in,
        out_dir: args.out_dir,
        strict: args.strict,
        baseline: args.baseline,
        report: args.report,
        artifacts_always: args.artifacts_always,
        now: args.eval.timestamp,
        execution: args.eval.execution(),
        corpus_dir: file.corpus_dir.clone(),
        contact: file.contact.clone(),
    };
    let report = run_check(&cfg)?;
    let body = match args.report {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Text => report.to_text(),
    };
    out.write_all(body.as_bytes())?;
    if report.exit_code != 0 {
        let _ = writeln!(err, "clearway: {} (exit {})", report.status, report.exit_code);
    }
    Ok(report.exit_code)
}

fn sync(args: SyncArgs, file: &FileConfig, out: &mut dyn Write) -> Result<u8> {
    let cfg = SyncConfig {
        journal: args.journal,
        manifest: args.product.manifest,
        lockfiles: args.product.lockfiles,
        sbom_in: args.product.sbom_in,
        sources: args.sources,
        enrichment: if args.no_enrich { None } else { file.enrichment.clone() },
        now: args.timestamp,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        corpus_dir: file.corpus_dir.clone(),
    };
    let summary = sync_inventory(&cfg)?;
    let body = match args.report {
        ReportFormat::Json => format!("{}\n", serde_json::to_string_pretty(&summary)?),
        ReportFormat::Text => summary.to_text(),
    };
    out.write_all(body.as_bytes())?;
    Ok(0)
}

fn artifact(
    args: ArtifactArgs,
    which: Artifact,
    file: &FileConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8> {
    let needs_policy = matches!(which, Artifact::Notice | Artifact::Ccs);
    let mut check = PathCheck::default();
    check
        .file("--manifest", args.product.manifest.as_deref())
        .file("--journal", args.eval.journal.as_deref())
        .lockfiles(&args.product.lockfiles)
        .optional_file("--sbom-in", args.product.sbom_in.as_deref())
        .out_dir(args.out_dir.as_deref());
    if needs_policy {
        check.file("--policy", args.eval.policy.as_deref());
    } else {
        check.optional_file("--policy", args.eval.policy.as_deref());
    }
    check.finish()?;

    let now = args.eval.timestamp.unwrap_or_else(Utc::now);
    let inputs = load_product(
        args.product.manifest.as_deref().expect("validated"),
        &args.product.lockfiles,
        args.product.sbom_in.as_deref(),
    )?;
    let store: Store = read_store(args.eval.journal.as_deref().expect("validated"))?;
    let policy = match &args.eval.policy {
        Some(p) => read_policy(p)?,
        None => PolicyDocument::new(
            clearway_core::policy::DEFAULT_POLICY_VERSION,
            clearway_core::policy::Class::ReviewRequired,
        ),
    };
    let mut options = EvaluationOptions::at(now);
    options.execution = args.eval.execution();
    let evaluation = evaluate_product(&inputs.manifest, &inputs.graph, &store, &policy, &options);
    let closure = inputs.graph.product_closure(&options.scopes);
    let shipped = inputs.graph.restricted_to(&closure, &options.scopes);
    let corpus = load_corpus(file.corpus_dir.as_deref())?;
    let artifact_inputs = ArtifactInputs {
        manifest: &inputs.manifest,
        graph: &shipped,
        store: &store,
        evaluation: &evaluation,
        corpus: &corpus,
        created: now,
        contact: file.contact.as_deref().unwrap_or(DEFAULT_CONTACT),
    };
    let mut warnings = inputs.warnings.clone();
    let files = render(&artifact_inputs, which, &mut warnings);
    for w in &warnings {
        writeln!(err, "warning: {w}")?;
    }
    match &args.out_dir {
        Some(dir) => {
            for path in write(dir, &files)? {
                writeln!(out, "{}", path.display())?;
            }
        }
        // Only the primary file goes to standard output.
        None => out.write_all(files[0].1.as_bytes())?,
    }
    Ok(0)
}

fn serve(args: ServeArgs, file: FileConfig, err: &mut dyn Write) -> Result<u8> {
    let mut config: ServiceConfig = file.service.clone().unwrap_or_default();
    if let Some(j) = args.journal {
        config.journal = j;
    }
    if let Some(t) = args.tokens {
        config.token_file = t;
    }
    if let Some(l) = args.listen {
        config.listen = l;
    }
    if !args.cors_origins.is_empty() {
        config.cors_origins = args.cors_origins;
    }
    let mut check = PathCheck::default();
    check
        .creatable("--journal", Some(&config.journal))
        .file("--tokens", Some(&config.token_file))
        .optional_file("--policy", args.policy.as_deref())
        .optional_file("--manifest", args.product.manifest.as_deref())
        .lockfiles(&args.product.lockfiles);
    for p in &file.products {
        check.file("products.manifest", Some(&p.manifest));
        check.optional_file("products.sbom_in", p.sbom_in.as_deref());
    }
    check.finish()?;

    let evaluator = match &args.policy {
        None => {
            if args.product.manifest.is_some() || !file.products.is_empty() {
                bail!("product verdicts need --policy");
            }
            None
        }
        Some(path) => {
            let mut evaluator = GateEvaluator::new(read_policy(path)?, Execution::Parallel);
            if let Some(manifest) = &args.product.manifest {
                let inputs = load_product(manifest, &args.product.lockfiles, args.product.sbom_in.as_deref())?;
                evaluator.add(inputs.manifest.product_name.clone(), inputs.manifest, inputs.graph);
            }
            for p in &file.products {
                let inputs = load_product(&p.manifest, &p.lockfile_args()?, p.sbom_in.as_deref())?;
                evaluator.add(p.id.clone(), inputs.manifest, inputs.graph);
            }
            Some(Arc::new(evaluator) as Arc<dyn clearway_service::ProductEvaluator>)
        }
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(async {
        let running = clearway_service::start(&config, evaluator).await?;
        writeln!(err, "clearway: listening on http://{}", running.local_addr())?;
        running
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("serving")?;
        writeln!(err, "clearway: stopped")?;
        Ok(0)
    })
}
