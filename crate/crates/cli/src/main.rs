//! `aniso`: simulate fields, estimate anisotropy, test isotropy and run
//! calibration studies from the command line.
//!
//! Every run writes a JSON manifest holding the full resolved configuration;
//! `aniso replay` re-executes it. Exit codes: 0 success, 1 I/O or format
//! failure, 2 precondition or usage error, 3 numeric non-convergence.

mod commands;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aniso_core::io::RunManifest;
use aniso_core::Error;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{EstimateArgs, InvertHdArgs, LinkTableArgs, PowerArgs, SimulateArgs, TestArgs};

#[derive(Debug, Parser)]
#[command(name = "aniso", version, about = "Anisotropy estimation and isotropy testing from level sets")]
struct Cli {
    /// Where to write the run manifest (default: next to --out, or ./aniso-<command>.manifest.json).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
enum Command {
    /// Simulate an anisotropic Gaussian field and write it as GRF1 or CSV.
    Simulate(SimulateArgs),
    /// Estimate anisotropy from a field or excursion image.
    Estimate(EstimateArgs),
    /// Run the chi-squared isotropy test.
    Test(TestArgs),
    /// Calibration and power study over simulated fields.
    Power(PowerArgs),
    /// Invert a normal-covariance spectrum into anisotropy parameters.
    InvertHd(InvertHdArgs),
    /// Tabulate the link functions g and R.
    LinkTable(LinkTableArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, clap::Args)]
struct ReplayArgs {
    manifest_path: PathBuf,
    /// Redirect every output file into this directory, keeping file names.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Test(_) => "test",
            Command::Power(_) => "power",
            Command::InvertHd(_) => "invert-hd",
            Command::LinkTable(_) => "link-table",
            Command::Replay(_) => "replay",
        }
    }

    /// Fills in derived defaults so the manifest holds the resolved configuration.
    fn resolve(&mut self) -> aniso_core::Result<()> {
        match self {
            Command::Simulate(a) => a.resolve(),
            _ => Ok(()),
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Command::Simulate(a) => a.seed,
            Command::Power(a) => a.seed,
            Command::InvertHd(a) => a.seed,
            _ => 0,
        }
    }

    fn primary_output(&self) -> Option<&Path> {
        match self {
            Command::Simulate(a) => Some(&a.out),
            Command::Estimate(a) => a.out.as_deref(),
            Command::Test(a) => a.out.as_deref(),
            Command::Power(a) => Some(&a.out),
            Command::InvertHd(a) => a.out.as_deref(),
            Command::LinkTable(a) => a.out.as_deref(),
            Command::Replay(_) => None,
        }
    }

    fn run(&self) -> aniso_core::Result<()> {
        match self {
            Command::Simulate(a) => commands::simulate(a),
            Command::Estimate(a) => commands::estimate(a),
            Command::Test(a) => commands::test(a),
            Command::Power(a) => commands::power(a),
            Command::InvertHd(a) => commands::invert_hd(a),
            Command::LinkTable(a) => commands::link_table(a),
            Command::Replay(_) => unreachable!("replay is unwrapped before running"),
        }
    }
}

fn manifest_path(explicit: Option<&Path>, command: &Command) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match command.primary_output() {
        Some(out) => {
            let mut s = out.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("aniso-{}.manifest.json", command.name())),
    }
}

/// Rewrites every `out`-like path in a recorded configuration into `dir`.
fn redirect_outputs(config: &mut serde_json::Value, dir: &Path) {
    if let serde_json::Value::Object(map) = config {
        for (key, value) in map.iter_mut() {
            if key == "out" || key.ends_with("_out") {
                if let Some(name) = value.as_str().and_then(|s| Path::new(s).file_name()) {
                    *value = serde_json::Value::String(dir.join(name).to_string_lossy().into_owned());
                }
            }
        }
    }
}

fn load_replay(args: &ReplayArgs) -> aniso_core::Result<Command> {
    let manifest = RunManifest::read(&args.manifest_path)?;
    let mut config = manifest.config;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        redirect_outputs(&mut config, dir);
    }
    let tagged = serde_json::json!({ "command": manifest.command, "config": config });
    serde_json::from_value(tagged).map_err(|e| Error::Format(format!("unreadable manifest: {e}")))
}

fn execute(cli: Cli) -> aniso_core::Result<()> {
    let mut manifest_override = cli.manifest;
    let mut command = match cli.command {
        Command::Replay(args) => {
            if manifest_override.is_none() && args.out_dir.is_none() {
                // Never overwrite the manifest being replayed.
                manifest_override = Some(args.manifest_path.with_extension("replay.json"));
            }
            load_replay(&args)?
        }
        c => c,
    };
    command.resolve()?;
    command.run()?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        config: match serde_json::to_value(&command)? {
            serde_json::Value::Object(mut m) => m.remove("config").unwrap_or_default(),
            _ => serde_json::Value::Null,
        },
        seed: command.seed(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    manifest.write(manifest_path(manifest_override.as_deref(), &command))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::Format(_) => 1,
        _ => 2,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Domain(_) => "domain",
        Error::DegenerateGrid { .. } => "degenerate_grid",
        Error::EmptyLevelSet(_) => "empty_level_set",
        Error::Degenerate(_) => "degenerate",
        Error::OutsideWindow { .. } => "outside_window",
        Error::Refused(_) => "refused",
        Error::NonConvergence(_) => "non_convergence",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("ANISO_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(exit_code(&e))
        }
    }
}
