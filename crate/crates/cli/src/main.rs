// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod svg;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{Context, Failure, Outcome};

fn run(cli: &Cli) -> Outcome {
    let tol = cli.global.tol.unwrap_or(cli.global.tol_profile.gp_tol());
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::invalid("tolerance must be positive"));
    }
    let mut ctx = Context::new(cli.global.seed, tol);
    match &cli.command {
        Command::Table(a) => commands::cmd_table(a, &mut ctx),
        Command::Trace(a) => commands::cmd_trace(a, &mut ctx),
        Command::Path(a) => commands::cmd_path(a, &mut ctx),
        Command::Conjugate(a) => commands::cmd_conjugate(a, &mut ctx),
        Command::Witness(a) => commands::cmd_witness(a, &mut ctx),
        Command::Verify(a) => commands::cmd_verify(a),
        Command::Plot(a) => commands::cmd_plot(a, &mut ctx),
    }
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.global.output {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version are not errors
            return ExitCode::from(if e.use_stderr() { commands::EXIT_INVALID as u8 } else { 0 });
        }
    };
    let (text, code) = match run(&cli) {
        Ok(text) => (Some(text), 0),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (f.output, f.code)
        }
    };
    if let Some(text) = text {
        if let Err(e) = emit(&cli, &text) {
            eprintln!("error: cannot write output: {e}");
            return ExitCode::from(commands::EXIT_INVALID as u8);
        }
    }
    ExitCode::from(code as u8)
}
