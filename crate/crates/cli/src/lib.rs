//! The `egodepth` command line.
//!
//! Exit codes: 0 on success, 1 when a command fails (unreadable input, a
//! domain error), 2 on malformed usage.

mod args;
mod commands;
mod inputs;
mod plot;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::Cli;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(egodepth::Error),
}

impl From<egodepth::Error> for CliError {
    fn from(e: egodepth::Error) -> Self {
        CliError::Run(e)
    }
}

/// Output streams and global settings shared by the commands.
pub struct Ctx<'a> {
    pub seed: u64,
    pub verbose: u8,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn out(&mut self, s: &str) {
        let _ = self.stdout.write_all(s.as_bytes());
    }

    fn info(&mut self, s: &str) {
        if self.verbose > 0 {
            let _ = writeln!(self.stderr, "{s}");
        }
    }
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(stderr, "error: --threads must be at least 1");
            return 2;
        }
        // Fails only if a pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut ctx = Ctx {
        seed: cli.seed,
        verbose: cli.verbose,
        stdout,
        stderr,
    };
    use args::Command::*;
    let result = match &cli.command {
        Synth(a) => commands::synth(&mut ctx, a),
        Warp(a) => commands::warp_cmd(&mut ctx, a),
        Icp(a) => commands::icp_cmd(&mut ctx, a),
        Loss(a) => commands::loss(&mut ctx, a),
        Optimize(a) => commands::optimize(&mut ctx, a),
        Ablate(a) => commands::ablate(&mut ctx, a),
        EvalDepth(a) => commands::eval_depth(&mut ctx, a),
        EvalOdom(a) => commands::eval_odom(&mut ctx, a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let mut cmd = <Cli as clap::CommandFactory>::command();
            let _ = writeln!(ctx.stderr, "error: {msg}\n\n{}", cmd.render_usage());
            2
        }
        Err(CliError::Run(e)) => {
            let _ = writeln!(ctx.stderr, "error: {e}");
            1
        }
    }
}
