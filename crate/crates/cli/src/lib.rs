//! Command-line front end of `twoway-core`: channel configuration files,
//! subcommands and CSV/JSON output.

pub mod args;
pub mod commands;
pub mod config;
pub mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use serde::Serialize;

use args::{Cli, Command};
use commands::{Outcome, RunConfig};
use config::{load_channel, ChannelConfig};
use table::{config_hash, write_table};

fn emit<T: Serialize>(cli: &Cli, name: &str, channel: &ChannelConfig, args: &T, out: &Outcome) -> Result<()> {
    let hash = config_hash(&RunConfig { command: name, version: env!("CARGO_PKG_VERSION"), channel, args })?;
    if !out.diagnostics.is_empty() {
        eprint!("{}", out.diagnostics);
    }
    match &cli.output {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            write_table(&mut w, cli.format, name, &hash, &out.table)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_table(&mut w, cli.format, name, &hash, &out.table)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Run a parsed command line. Returns whether every verification check
/// passed (always true for the other commands).
pub fn run(cli: &Cli) -> Result<bool> {
    let channel = load_channel(cli.config.as_deref(), cli.preset)?;
    let params = channel.params()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| {
        let ok = match &cli.command {
            Command::Scan(a) => {
                let o = commands::scan(&params, a)?;
                emit(cli, "scan", &channel, a, &o)?;
                o.ok
            }
            Command::Boundary(a) => {
                let o = commands::boundary(a)?;
                emit(cli, "boundary", &channel, a, &o)?;
                o.ok
            }
            Command::Bounds(a) => {
                let o = commands::bounds(&params, a)?;
                emit(cli, "bounds", &channel, a, &o)?;
                o.ok
            }
            Command::Fluct(a) => {
                let o = commands::fluct(&params, a)?;
                emit(cli, "fluct", &channel, a, &o)?;
                o.ok
            }
            Command::Verify(a) => {
                let o = commands::verify(a)?;
                emit(cli, "verify", &channel, a, &o)?;
                o.ok
            }
        };
        Ok(ok)
    })
}
