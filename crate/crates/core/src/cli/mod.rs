//! Front end of the `grwm` binary.

pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

pub use config::{
    parse_config, resolve, Cli, ConfigError, OutputFormat, Scenario, ScenarioConfig, CONFIG_ENV,
};
pub use report::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Renders the report for `config` in its output format.
pub fn render(config: &ScenarioConfig) -> crate::Result<String> {
    Ok(report::render(&run::run(config)?, config.output_format))
}

/// Runs the binary with explicit arguments and returns the exit code.
pub fn main_with_args<I, T>(args: I, env_config: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let config = match resolve(&cli.command, env_config) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("grwm: {e}");
            return EXIT_CONFIG;
        }
    };
    let text = match render(&config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("grwm: {} scenario failed: {e}", config.scenario);
            return EXIT_RUNTIME;
        }
    };
    let written = match &config.output_path {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write to stdout: {e}")),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("grwm: {e}");
            EXIT_RUNTIME
        }
    }
}
