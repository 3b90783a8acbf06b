//! Command-line front end: argument parsing, configuration and dispatch.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (including any failed
//! subject in a batch), 2 on a usage error.

pub mod commands;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::commands::{execute, Outcome};
use crate::config::{Command, RunConfig, TransportSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tractalign", version, about = "Elastic registration of fiber bundles")]
struct Cli {
    /// JSON run configuration; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Log errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Generate synthetic bundles (optionally from a spec JSON file).
    Synth(Flags),
    /// Convert .tck files to archives and archives to .tck files.
    Convert(Flags),
    /// Compute a bundle's mean and code.
    Mean(Flags),
    /// Register subject bundles to a coded template.
    Register(Flags),
    /// Compare rigid and soft registrations listed in manifests.
    Eval(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Samples per fiber.
    #[arg(long)]
    samples: Option<usize>,
    /// Fibers kept per bundle.
    #[arg(long)]
    fibers: Option<usize>,
    #[arg(long)]
    basis_size: Option<usize>,
    /// `exact` or `stepwise:K`.
    #[arg(long)]
    transport: Option<TransportSpec>,
    /// Stepwise transport rescales vectors to the geodesic length.
    #[arg(long)]
    literal_rescale: bool,
    /// Keep the projected basis elements without orthonormalizing them.
    #[arg(long)]
    raw_basis: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Subjects processed in parallel.
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Number of bundles to synthesize.
    #[arg(long)]
    count: Option<usize>,
    /// Profile CSV to attach when converting a .tck file.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

impl Flags {
    fn apply(self, cfg: &mut RunConfig) {
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs;
        }
        if self.template.is_some() {
            cfg.template = self.template;
        }
        if let Some(o) = self.output {
            cfg.output = o;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = self.fibers {
            cfg.fibers = v;
        }
        if self.basis_size.is_some() {
            cfg.basis_size = self.basis_size;
        }
        if let Some(v) = self.transport {
            cfg.transport = v;
        }
        cfg.literal_rescale |= self.literal_rescale;
        cfg.raw_basis |= self.raw_basis;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.count {
            cfg.count = v;
        }
        if self.profiles.is_some() {
            cfg.profiles = self.profiles;
        }
    }
}

fn split(sub: Sub) -> (Command, Flags) {
    match sub {
        Sub::Synth(f) => (Command::Synth, f),
        Sub::Convert(f) => (Command::Convert, f),
        Sub::Mean(f) => (Command::Mean, f),
        Sub::Register(f) => (Command::Register, f),
        Sub::Eval(f) => (Command::Eval, f),
    }
}

/// Merge the config file (if any) with the flags.
fn resolve(cli: Cli) -> Result<RunConfig, String> {
    let base = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()))?;
            Some(serde_json::from_str::<RunConfig>(&text).map_err(|e| format!("parsing {}: {e}", p.display()))?)
        }
        None => None,
    };
    let cfg = match (base, cli.command) {
        (None, None) => return Err("no subcommand given (see --help)".into()),
        (Some(cfg), None) => cfg,
        (base, Some(sub)) => {
            let (command, flags) = split(sub);
            let mut cfg = base.unwrap_or_else(|| RunConfig::new(command, PathBuf::new()));
            cfg.subcommand = command;
            flags.apply(&mut cfg);
            cfg
        }
    };
    if cfg.output.as_os_str().is_empty() {
        return Err("no output directory given (use --output)".into());
    }
    cfg.validate()?;
    if cfg.output.is_file() {
        return Err(format!("output {} is a file", cfg.output.display()));
    }
    Ok(cfg)
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        match verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    // Built without reading the environment; repeated calls (tests) are fine.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    match execute(&cfg) {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::PartialFailure) => EXIT_FAILURE,
        Err(e) => {
            error!("{e:#}");
            EXIT_FAILURE
        }
    }
}
