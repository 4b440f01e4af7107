//! `spinsol`: construct, verify and evolve spin Calogero-Moser solitons and
//! run the acceptance suite.
//!
//! Exit status is 0 when every requested check passed, 1 when a check
//! failed, 2 for configuration or I/O problems, and 10 + k for a library
//! error of kind k in [`ERROR_KINDS`]. A `manifest.json` is written in every
//! case.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;
use spinsol::suite::DEFAULT_SEED;

use config::RunConfig;

/// Library error kinds in exit-code order.
pub const ERROR_KINDS: [&str; 17] = [
    "pole-proximity",
    "dimension-mismatch",
    "charge-degenerate",
    "collision",
    "step-underflow",
    "degenerate-configuration",
    "degenerate-velocity",
    "construction-failed",
    "strip-violation",
    "grid-mismatch",
    "insufficient-decay",
    "precondition",
    "resolution-failure",
    "constraint-violation",
    "quadrature",
    "io",
    "json",
];

#[derive(Parser, Debug)]
#[command(name = "spinsol", version, about = "Spin Calogero-Moser soliton laboratory")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the ChaCha8 generator; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    /// Build certified soliton initial data.
    Construct,
    /// Certificate and PDE residuals of a stored soliton.
    Verify,
    /// Periodic sBO evolution with invariant monitoring.
    Evolve,
    /// Acceptance battery.
    Suite,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Construct => "construct",
            Verb::Verify => "verify",
            Verb::Evolve => "evolve",
            Verb::Suite => "suite",
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: String,
    message: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng: &'static str,
    seed: u64,
    threads: Option<usize>,
    /// The effective configuration, after command-line overrides.
    config: &'a RunConfig,
    status: &'static str,
    outputs: Vec<String>,
    error: Option<ErrorRecord>,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn error_record(e: &anyhow::Error) -> (ErrorRecord, u8) {
    let (kind, code) = match e.downcast_ref::<spinsol::Error>() {
        Some(le) => {
            let k = le.kind();
            let idx = ERROR_KINDS.iter().position(|s| *s == k).unwrap_or(0);
            (k.to_string(), 10 + idx as u8)
        }
        None => ("config".to_string(), 2),
    };
    (
        ErrorRecord {
            kind,
            message: format!("{e:#}"),
        },
        code,
    )
}

fn run(cli: &Cli, cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<commands::Outcome> {
    match cli.verb {
        Verb::Construct => commands::construct(cfg, seed, out),
        Verb::Verify => commands::verify(cfg, out),
        Verb::Evolve => commands::evolve(cfg, out),
        Verb::Suite => commands::suite(cfg, seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e:#}");
            return ExitCode::from(2);
        }
    };
    let out = commands::output_dir(&cfg, cli.out.clone());
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    cfg.command = Some(cli.verb.name().to_string());
    cfg.seed = Some(seed);
    cfg.out = Some(out.clone());
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("creating {}: {e}", out.display());
        return ExitCode::from(2);
    }

    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| run(&cli, &cfg, seed, &out))),
        None => run(&cli, &cfg, seed, &out),
    };

    let (status, outputs, error, code) = match result {
        Ok(o) if o.passed => ("passed", o.files, None, 0),
        Ok(o) => ("failed", o.files, None, 1),
        Err(e) => {
            let (rec, code) = error_record(&e);
            eprintln!("{}", serde_json::json!({ "error": { "kind": rec.kind, "message": rec.message } }));
            ("error", vec![], Some(rec), code)
        }
    };
    let manifest = Manifest {
        tool: "spinsol",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.verb.name(),
        rng: "ChaCha8Rng (rand_chacha), seeded with seed_from_u64",
        seed,
        threads: cfg.threads,
        config: &cfg,
        status,
        outputs,
        error,
    };
    if let Err(e) = spinsol::io::write_json(&out.join("manifest.json"), &manifest) {
        eprintln!("writing manifest: {e}");
        return ExitCode::from(2);
    }
    println!("{status}");
    ExitCode::from(code)
}
