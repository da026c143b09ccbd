//! Administrator command line: `ctf-vault <validate|build|flagcheck-gen|stats|serve>`.
//!
//! Exit codes: 0 success, 1 validation errors, 2 usage error, 3 runtime
//! failure.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::Config;
use crate::flagcheck::{generate_check, FlagCheckError};
use crate::registry::{category_stats, ingest_archive, validate_challenge, Finding, Ingest, RegistryError, Severity};
use crate::sandbox::{compile_build_plan, render_build_recipe, InstanceManager};
use crate::service::{http, Platform};
use crate::store::{load_solves, SolveStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliExit {
    Success = 0,
    Findings = 1,
    Usage = 2,
    Failure = 3,
}

impl CliExit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctf-vault", version, about = "Archive, rehost and serve CTF challenges")]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Emit structured JSON instead of human-readable text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest the archive and check every challenge directory.
    Validate {
        /// Archive root (defaults to `archive.root` from the config).
        root: Option<PathBuf>,
    },
    /// Render a challenge's containerfile, optionally building it.
    Build {
        challenge_id: String,
        #[arg(long)]
        root: Option<PathBuf>,
        /// Directory the `<id>.containerfile` is written to.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also build the image with the configured runtime driver.
        #[arg(long)]
        run: bool,
    },
    /// Read a flag on stdin and print a check record for it.
    FlagcheckGen {
        challenge_id: String,
        platform_flag: String,
    },
    /// Per-category coverage and solve counts.
    Stats {
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve,
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    json: bool,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> CliExit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliExit::Success,
                _ => CliExit::Usage,
            };
        }
    };
    let config = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(c) => c,
            Err(e) => {
                say!(err, "error: {e}");
                return CliExit::Usage;
            }
        },
        None => Config::default(),
    };
    let mut io = Io {
        stdin,
        out,
        err,
        json: cli.json,
    };
    match cli.command {
        Command::Validate { root } => cmd_validate(&mut io, root.as_deref().unwrap_or(&config.archive.root)),
        Command::Build {
            challenge_id,
            root,
            out,
            run,
        } => cmd_build(
            &mut io,
            &config,
            root.as_deref().unwrap_or(&config.archive.root),
            &challenge_id,
            &out,
            run,
        ),
        Command::FlagcheckGen {
            challenge_id,
            platform_flag,
        } => cmd_flagcheck_gen(&mut io, &challenge_id, &platform_flag),
        Command::Stats { root, data_dir } => cmd_stats(
            &mut io,
            root.as_deref().unwrap_or(&config.archive.root),
            data_dir.as_deref().unwrap_or(&config.data.dir),
        ),
        Command::Serve => cmd_serve(&mut io, &config),
    }
}

fn print_finding(io: &mut Io<'_>, challenge: &str, f: &Finding) {
    if io.json {
        say!(
            io.out,
            "{}",
            json!({"severity": f.severity, "challenge": challenge, "code": f.code, "message": f.message, "path": f.path})
        );
    } else {
        say!(io.out, "{} {} {} {}", f.severity, challenge, f.code, f.message);
    }
}

fn ingest_or_report(io: &mut Io<'_>, root: &Path) -> Result<Ingest, CliExit> {
    match ingest_archive(root) {
        Ok(ingest) => Ok(ingest),
        Err(e @ RegistryError::DuplicateId { .. }) => {
            let RegistryError::DuplicateId { id, .. } = &e else { unreachable!() };
            print_finding(io, id, &Finding::error("DUPLICATE_ID", e.to_string(), None));
            Err(CliExit::Findings)
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            Err(CliExit::Failure)
        }
    }
}

pub fn cmd_validate_root(root: &Path, out: &mut dyn Write, err: &mut dyn Write, json: bool) -> CliExit {
    let mut stdin = std::io::empty();
    let mut io = Io {
        stdin: &mut stdin,
        out,
        err,
        json,
    };
    cmd_validate(&mut io, root)
}

fn cmd_validate(io: &mut Io<'_>, root: &Path) -> CliExit {
    let ingest = match ingest_or_report(io, root) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let mut errors = 0;
    for f in &ingest.findings {
        errors += usize::from(f.finding.severity == Severity::Error);
        print_finding(io, &f.location, &f.finding);
    }
    for entry in ingest.registry.entries() {
        match validate_challenge(&entry.manifest, &entry.dir) {
            Ok(report) => {
                errors += report.error_count();
                for f in &report.findings {
                    print_finding(io, &report.challenge, f);
                }
            }
            Err(e) => {
                say!(io.err, "error: {}: {e}", entry.dir.display());
                return CliExit::Failure;
            }
        }
    }
    if errors == 0 {
        CliExit::Success
    } else {
        CliExit::Findings
    }
}

fn cmd_build(io: &mut Io<'_>, config: &Config, root: &Path, id: &str, out_dir: &Path, run: bool) -> CliExit {
    let ingest = match ingest_or_report(io, root) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let Some(entry) = ingest.registry.get(id) else {
        say!(io.err, "error: unknown challenge id `{id}`\n\nUsage: ctf-vault build <CHALLENGE_ID> [--root <ROOT>] [--out <DIR>] [--run]");
        return CliExit::Usage;
    };
    let report = match validate_challenge(&entry.manifest, &entry.dir) {
        Ok(r) => r,
        Err(e) => {
            say!(io.err, "error: {}: {e}", entry.dir.display());
            return CliExit::Failure;
        }
    };
    if !report.is_passing() {
        for f in &report.findings {
            print_finding(io, id, f);
        }
        return CliExit::Findings;
    }
    let plan = match compile_build_plan(&entry.manifest, &entry.dir, &config.runtime.base_image) {
        Ok(p) => p,
        Err(e) => {
            say!(io.err, "error: {e}");
            return CliExit::Findings;
        }
    };
    let recipe = render_build_recipe(&plan);
    let path = out_dir.join(format!("{id}.containerfile"));
    if let Err(e) = std::fs::create_dir_all(out_dir).and_then(|_| std::fs::write(&path, &recipe)) {
        say!(io.err, "error: {}: {e}", path.display());
        return CliExit::Failure;
    }

    let image = if run {
        let driver = config.driver();
        match driver.build(&plan, &entry.dir) {
            Ok(image) => Some(image),
            Err(e) => {
                say!(io.err, "error: {e}");
                return CliExit::Failure;
            }
        }
    } else {
        None
    };

    if io.json {
        say!(io.out, "{}", json!({"challenge": id, "recipe": path, "image": image}));
    } else {
        say!(io.out, "wrote {}", path.display());
        if let Some(image) = image {
            say!(io.out, "built {image}");
        }
    }
    CliExit::Success
}

fn cmd_flagcheck_gen(io: &mut Io<'_>, challenge_id: &str, platform_flag: &str) -> CliExit {
    let mut input = String::new();
    if let Err(e) = io.stdin.read_to_string(&mut input) {
        say!(io.err, "error: reading flag from stdin: {e}");
        return CliExit::Failure;
    }
    match generate_check(&input, platform_flag, challenge_id) {
        Ok(record) => {
            if io.json {
                say!(
                    io.out,
                    "{}",
                    json!({"algorithm": record.algorithm(), "challenge": record.challenge_id(), "digest": record.digest(), "platform_flag": record.platform_flag()})
                );
            } else {
                let _ = write!(io.out, "{record}");
            }
            CliExit::Success
        }
        Err(e @ (FlagCheckError::EmptyFlag | FlagCheckError::BadPlatformFlag | FlagCheckError::BadChallengeId(_))) => {
            say!(io.err, "error: {e}");
            CliExit::Usage
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            CliExit::Failure
        }
    }
}

fn cmd_stats(io: &mut Io<'_>, root: &Path, data_dir: &Path) -> CliExit {
    let ingest = match ingest_or_report(io, root) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let loaded = match load_solves(&data_dir.join(crate::store::SOLVE_LOG_FILE)) {
        Ok(l) => l,
        Err(e) => {
            say!(io.err, "error: {e}");
            return CliExit::Failure;
        }
    };
    let stats = category_stats(&ingest.registry, loaded.log.records());
    if io.json {
        say!(io.out, "{}", serde_json::to_string(&stats).expect("stats serialize"));
    } else {
        say!(io.out, "{:<28} {:>9} {:>9}", "Challenge Type", "Available", "Solves");
        for row in &stats.rows {
            say!(io.out, "{:<28} {:>9} {:>9}", row.label, row.available, row.solves);
        }
        say!(io.out, "{:<28} {:>9} {:>9}", "Total", stats.total.available, stats.total.solves);
        if stats.unknown_solves > 0 {
            say!(io.out, "({} solve(s) for challenges not in the archive)", stats.unknown_solves);
        }
    }
    CliExit::Success
}

/// Assembles a platform from configuration: ingest, solve log, driver.
pub fn build_platform(config: &Config) -> Result<(Platform, Vec<String>), String> {
    let ingest = ingest_archive(&config.archive.root).map_err(|e| e.to_string())?;
    let mut notes: Vec<String> = ingest
        .findings
        .iter()
        .map(|f| format!("{} {} {} {}", f.finding.severity, f.location, f.finding.code, f.finding.message))
        .collect();
    let (store, warnings) = SolveStore::open(config.solve_log_path()).map_err(|e| e.to_string())?;
    notes.extend(warnings.iter().map(|w| format!("WARNING solve log: {w:?}")));
    let instances = InstanceManager::new(config.driver(), &config.data.dir).with_quota(config.runtime.quota);
    Ok((
        Platform::new(ingest.registry, store, instances, config.runtime.base_image.clone()),
        notes,
    ))
}

fn cmd_serve(io: &mut Io<'_>, config: &Config) -> CliExit {
    let (platform, notes) = match build_platform(config) {
        Ok(p) => p,
        Err(e) => {
            say!(io.err, "error: {e}");
            return CliExit::Failure;
        }
    };
    for note in notes {
        say!(io.err, "{note}");
    }
    if config.auth.tokens.is_empty() {
        say!(io.err, "warning: no auth.tokens configured; every API request will be rejected");
    }
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            say!(io.err, "error: {e}");
            return CliExit::Failure;
        }
    };
    let app = http::router(Arc::new(platform), config.auth.tokens.clone(), config.server.ui_dir.clone());
    let result = runtime.block_on(async {
        let listener = http::bind(config.server.listen).await?;
        log::info!("listening on {}", listener.local_addr()?);
        http::serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    match result {
        Ok(()) => CliExit::Success,
        Err(e) => {
            say!(io.err, "error: {e}");
            CliExit::Failure
        }
    }
}
