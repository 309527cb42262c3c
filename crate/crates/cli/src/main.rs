// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

//! `lindloc <command> --config path [--threads n] [--emit-plot-data] [--out dir]`
//!
//! Exit status: 0 on success, 2 when a checked bound fails, 1 on any other error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{Run, Verdict};
use config::Loaded;
use output::{sha256_hex, Manifest, Output, Versions};

#[derive(Parser)]
#[command(name = "lindloc", version, about = "Batch experiments on local Lindbladians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model and compare measured locality constants with the declared ones.
    ModelValidate(Common),
    /// Evolve an initial state to each listed time.
    Evolve(Common),
    /// Basis of steady states.
    Steady(Common),
    /// Abel averages ε(ε - L)^{-1}(ρ) for each listed ε.
    Abel(Common),
    /// Spectrum of the dissipative operator and its enclosing box.
    Envelope(Common),
    /// Smallest singular values on a grid and the resolvent lemma checks.
    Pseudospec(Common),
    /// Coherence kernel between two sites.
    Kernel(Common),
    /// Check the coherence bound for an initial state.
    CoherenceBound(Common),
    /// Check Combes-Thomas bounds on a grid.
    CtVerify(Common),
    /// Monte-Carlo fractional moments or coherences over disorder.
    DisorderSweep(Common),
    /// Exponential fit of a distance series from a CSV file.
    FitDecay(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write distance against log-magnitude tables.
    #[arg(long)]
    emit_plot_data: bool,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

type Handler = fn(&mut Run) -> Result<Verdict>;

impl Command {
    fn parts(&self) -> (&'static str, &Common, Handler) {
        match self {
            Command::ModelValidate(c) => ("model-validate", c, commands::model_validate),
            Command::Evolve(c) => ("evolve", c, commands::evolve),
            Command::Steady(c) => ("steady", c, commands::steady),
            Command::Abel(c) => ("abel", c, commands::abel),
            Command::Envelope(c) => ("envelope", c, commands::envelope),
            Command::Pseudospec(c) => ("pseudospec", c, commands::pseudospec),
            Command::Kernel(c) => ("kernel", c, commands::kernel),
            Command::CoherenceBound(c) => ("coherence-bound", c, commands::coherence_bound),
            Command::CtVerify(c) => ("ct-verify", c, commands::ct_verify),
            Command::DisorderSweep(c) => ("disorder-sweep", c, commands::disorder_sweep),
            Command::FitDecay(c) => ("fit-decay", c, commands::fit_decay),
        }
    }
}

fn run(cli: &Cli) -> Result<Verdict> {
    let (name, common, command) = cli.command.parts();
    let start = Instant::now();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let loaded = Loaded::read(&common.config)?;
    let dir = match (&common.out, &loaded.config.output_dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => loaded.resolve(dir),
        (None, None) => PathBuf::from("lindloc-out"),
    };
    let mut out = Output::create(&dir)?;
    let verdict = command(&mut Run { loaded: &loaded, out: &mut out, plot: common.emit_plot_data })?;
    let files = out.files().to_vec();
    let manifest = Manifest {
        command: name,
        config_sha256: sha256_hex(&loaded.raw),
        seed: loaded.config.master_seed,
        duration_ms: start.elapsed().as_millis(),
        versions: Versions::current(),
        status: match verdict {
            Verdict::Pass => "ok",
            Verdict::Violation(_) => "violation",
        },
        files: &files,
    };
    out.json("manifest.json", &manifest)?;
    eprintln!("{name}: wrote {} file(s) to {}", files.len() + 1, out.dir().display());
    Ok(verdict)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Violation(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
