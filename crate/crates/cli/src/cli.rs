//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sandbox", version, about = "Persona-driven sensor spoofing sandbox")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every randomized step of the command.
    #[arg(long, global = true, env = "SANDBOX_SEED")]
    pub seed: Option<u64>,
    /// JSON settings file supplying defaults for flags not given.
    #[arg(long, global = true, env = "SANDBOX_SETTINGS", value_name = "FILE")]
    pub settings: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or validate personas.
    #[command(subcommand)]
    Persona(PersonaCmd),
    /// Synthesize sensor traces.
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Run the simulated device agent.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Run audit sessions.
    #[command(subcommand)]
    Session(SessionCmd),
    /// Render diff reports.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Serve the HTTP API used by the console.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum PersonaCmd {
    /// Generate a persona.
    Gen(GenArgs),
    /// Check a persona file against the plausibility rules.
    Validate {
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Use the deterministic template generator (the default).
    #[arg(long, conflicts_with = "llm")]
    pub template: bool,
    /// Use the LLM generator.
    #[arg(long)]
    pub llm: bool,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub age: Option<u32>,
    #[arg(long)]
    pub gender: Option<String>,
    #[arg(long)]
    pub occupation: Option<String>,
    /// Place name from the built-in catalog.
    #[arg(long)]
    pub location: Option<String>,
    /// sedentary, low, moderate, moderate_high or high.
    #[arg(long)]
    pub fitness: Option<String>,
    /// day, night or rotating.
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long, env = "SANDBOX_LLM_ENDPOINT")]
    pub llm_endpoint: Option<String>,
    #[arg(long, env = "SANDBOX_LLM_MODEL")]
    pub llm_model: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TraceCmd {
    /// Synthesize a trace for a persona.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub persona: PathBuf,
    /// Window start, RFC 3339.
    #[arg(long)]
    pub start: String,
    /// Window length: `1500ms`, `90s`, `10m`, `2h` or plain milliseconds.
    #[arg(long)]
    pub duration: String,
    /// Rate override, `channel=hz`. Repeatable.
    #[arg(long = "rate", value_name = "CHANNEL=HZ")]
    pub rates: Vec<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AgentCmd {
    /// Listen for orchestrator connections until killed.
    Run(AgentArgs),
}

#[derive(Debug, Args)]
pub struct AgentArgs {
    /// Bind address; port 0 picks a free port.
    #[arg(long, env = "SANDBOX_AGENT_LISTEN")]
    pub listen: Option<String>,
    /// Agent config JSON (apps, rules, region table).
    #[arg(long, value_name = "FILE")]
    pub agent_config: Option<PathBuf>,
    /// Fault injection: drop each connection after this many spoof frames.
    #[arg(long)]
    pub drop_after_frames: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum SessionCmd {
    /// Run a session to completion.
    Run(SessionArgs),
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Session config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = "SANDBOX_CLOCK_SCALE")]
    pub clock_scale: Option<f64>,
    /// Agent endpoint, or `embedded`.
    #[arg(long, env = "SANDBOX_AGENT")]
    pub agent: Option<String>,
    #[arg(long, env = "SANDBOX_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Session length, same syntax as `trace synth --duration`.
    #[arg(long)]
    pub duration: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Show one report file, or every report of a session directory.
    Show {
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SANDBOX_LISTEN")]
    pub listen: Option<String>,
    /// Directory holding personas, traces and sessions.
    #[arg(long, env = "SANDBOX_STORE")]
    pub store: Option<PathBuf>,
}
