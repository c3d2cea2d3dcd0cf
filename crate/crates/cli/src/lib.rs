//! Command-line front end and HTTP API for the sandbox.

pub mod cli;
pub mod commands;
pub mod error;
pub mod serve;
pub mod settings;

use std::path::PathBuf;

use clap::Parser;

use cli::{AgentCmd, Cli, Command, PersonaCmd, ReportCmd, SessionCmd, TraceCmd};
use commands::Ctx;
use error::{CliError, EXIT_OK, EXIT_USAGE};
use settings::{pick, Settings, DEFAULT_LISTEN, DEFAULT_STORE};

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx { json: cli.json, seed: cli.seed, settings: Settings::load(cli.settings.as_deref())? };
    match cli.command {
        Command::Persona(PersonaCmd::Gen(args)) => commands::persona_gen(&ctx, &args),
        Command::Persona(PersonaCmd::Validate { file }) => commands::persona_validate(&ctx, &file),
        Command::Trace(TraceCmd::Synth(args)) => commands::trace_synth(&ctx, &args),
        Command::Agent(AgentCmd::Run(args)) => commands::agent_run(&ctx, &args),
        Command::Session(SessionCmd::Run(args)) => commands::session_run(&ctx, &args),
        Command::Report(ReportCmd::Show { path }) => commands::report_show(&ctx, &path),
        Command::Serve(args) => {
            let listen = pick(args.listen, ctx.settings.listen.clone(), DEFAULT_LISTEN.to_string());
            let store = pick(args.store, ctx.settings.store.clone(), PathBuf::from(DEFAULT_STORE));
            serve::serve(&listen, store, ctx.settings.llm.clone())
        }
    }
}
