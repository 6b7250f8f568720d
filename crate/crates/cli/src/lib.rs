//! Library half of the `rdpsco` binary: flag parsing, configuration and the
//! subcommands. `main.rs` only maps the result to an exit code.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::execute;
pub use config::{Command, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rdpsco", version, about = "User-level private SCO experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CommandArg {
    /// One localized robust run; writes the per-step trajectory.
    Run,
    /// Coupled neighboring runs on aligned pairs; exits 1 on a bound violation.
    Sensitivity,
    /// Utility table over an (n, m) grid and seeds.
    Sweep,
    /// Geometric median against coordinate-wise median under a tiny perturbation.
    Counterexample,
    /// The full invariant suite; exits 1 if any check fails.
    Certify,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Run => Command::Run,
            CommandArg::Sensitivity => Command::Sensitivity,
            CommandArg::Sweep => Command::Sweep,
            CommandArg::Counterexample => Command::Counterexample,
            CommandArg::Certify => Command::Certify,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Set any configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    #[arg(long, global = true)]
    pub delta: Option<String>,
    /// Output file; stdout when absent or `-`.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Sweep grid, e.g. `1024:1,2048:1`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true)]
    pub seeds: Option<String>,
    #[arg(long, global = true)]
    pub pipeline: Option<String>,
    /// List every configuration key and exit.
    #[arg(long, global = true)]
    pub list_keys: bool,
}

impl CommonArgs {
    /// `--set` entries first, then the named flags, so a named flag wins.
    pub fn assignments(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut out = self
            .set
            .iter()
            .map(|a| config::parse_assignment(a))
            .collect::<Result<Vec<_>, _>>()?;
        let named = [
            ("seed", &self.seed),
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("output", &self.out),
            ("format", &self.format),
            ("alpha", &self.alpha),
            ("grid", &self.grid),
            ("seeds", &self.seeds),
            ("pipeline", &self.pipeline),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        }
        Ok(out)
    }
}

/// Resolves the configuration from parsed flags.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.common.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?),
        None => None,
    };
    config::resolve(cli.command.into(), file.as_deref(), &cli.common.assignments()?)
}

/// Parses, resolves and runs. Returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.common.list_keys {
        for (k, doc) in config::KEYS {
            println!("{k:<20} {doc}");
        }
        return 0;
    }
    match load_config(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rdpsco {}: {e}", Command::from(cli.command).name());
            e.exit_code()
        }
    }
}
