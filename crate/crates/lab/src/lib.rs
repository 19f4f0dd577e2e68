//! Command-line laboratory around `minmass-core`.
//!
//! Every subcommand writes its artifacts into
//! `<out>/<subcommand>/<hash>/`, where `<hash>` digests the resolved
//! configuration, and records a `manifest.json` beside them. Exit codes:
//! 0 on success, 1 on a domain error (a JSON error object goes to stderr),
//! 2 on a usage error.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::Settings;
use output::RunDir;

#[derive(Debug, Parser)]
#[command(name = "minmass", version, about = "Minimal-mass blow-up laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ground state Q, its norms and omega
    Ground,
    /// Operator identities, coercivity and the beta(C0) sweep
    Linops,
    /// Profile expansion, beta table and residual scaling
    Profile,
    /// Reduced (lambda, b) trajectory against its closed form
    Reduced,
    /// Blow-up simulation with rate fit and verdicts
    Simulate,
    /// Checks against the latest ground run under --out
    Validate,
    /// Concurrent simulations over a (sigma, C0/omega, E0) grid
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ground => "ground",
            Command::Linops => "linops",
            Command::Profile => "profile",
            Command::Reduced => "reduced",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
            Command::Sweep => "sweep",
        }
    }
}

pub const DEFAULT_OUT: &str = "runs";

enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn execute(cli: Cli) -> Result<serde_json::Value, Failure> {
    let file = match &cli.settings.config {
        Some(path) => Settings::from_file(path).map_err(|e| Failure::Usage(format!("{e:#}")))?,
        None => Settings::default(),
    };
    let settings = cli.settings.over(file);
    let out = settings.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let cmd = cli.command;
    let domain = Failure::Domain;

    // validate re-reads the configuration of the ground run it checks
    let (cfg, ground_dir) = if cmd == Command::Validate {
        let (dir, stored) = commands::ground_settings(&out).map_err(domain)?;
        let mut cfg = stored.resolve(false).map_err(domain)?;
        cfg.seed = settings.seed.unwrap_or(0);
        (cfg, Some(dir))
    } else {
        (settings.resolve(cmd == Command::Sweep).map_err(domain)?, None)
    };

    let mut dir = RunDir::create(&out, cmd.name(), &cfg).map_err(domain)?;
    let summary = match cmd {
        Command::Ground => commands::ground(&cfg, &mut dir),
        Command::Linops => commands::linops(&cfg, &mut dir),
        Command::Profile => commands::profile(&cfg, &mut dir),
        Command::Reduced => commands::reduced(&cfg, &mut dir),
        Command::Simulate => commands::simulate(&cfg, &mut dir),
        Command::Validate => commands::validate(&cfg, ground_dir.as_deref().expect("set above"), &mut dir),
        Command::Sweep => {
            let threads = settings
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            sweep::sweep(&settings, &cfg, threads, &mut dir)
        }
    };
    // the manifest is written even when the pipeline fails part-way
    let path = dir.finish(summary.is_ok()).map_err(domain)?;
    let mut summary = summary.map_err(domain)?;
    summary["subcommand"] = json!(cmd.name());
    summary["run_dir"] = json!(path.display().to_string());
    Ok(summary)
}

/// Runs the command line `args` (program name first); returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", error_json("usage", &msg));
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("{}", error_json("domain", &format!("{e:#}")));
            1
        }
    }
}
