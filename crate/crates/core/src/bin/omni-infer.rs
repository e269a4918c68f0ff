use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use omni_infer::driver::{check_source, BindingReport, DriverError, DriverOptions, OracleVerdict};

#[derive(Parser)]
#[command(name = "omni-infer", version, about = "Type inference for OML programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck every top-level binding of FILE.
    Check {
        file: PathBuf,
        /// Also print the schemes of `let`s nested inside each binding.
        #[arg(long)]
        print_types: bool,
        /// Dump each binding's generated constraint to stderr.
        #[arg(long)]
        emit_constraints: bool,
        /// Print one line per applied solver rule to stderr.
        #[arg(long)]
        trace_solver: bool,
        /// Cross-check each binding against the semantic oracle.
        #[arg(long)]
        oracle_check: bool,
        /// Depth of the ground universe used by `--oracle-check`.
        #[arg(long, value_name = "N", default_value_t = 2)]
        universe_depth: usize,
    },
}

fn main() -> ExitCode {
    let Command::Check { file, print_types, emit_constraints, trace_solver, oracle_check, universe_depth } =
        Cli::parse().command;
    let src = match std::fs::read_to_string(&file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return ExitCode::from(3);
        }
    };
    let mut opts = DriverOptions { emit_constraints, ..DriverOptions::default() };
    opts.solver.trace = trace_solver;
    if oracle_check {
        opts.oracle_depth = Some(universe_depth);
    }
    let report = match check_source(&src, &opts) {
        Ok(r) => r,
        Err(e) => {
            let code = match e {
                DriverError::Parse(_) | DriverError::Declaration { .. } | DriverError::Type { .. } => 3,
            };
            eprintln!("{}: {e}", file.display());
            return ExitCode::from(code);
        }
    };
    for b in &report.bindings {
        print_binding(b, print_types);
    }
    ExitCode::from(report.exit_code() as u8)
}

fn print_binding(b: &BindingReport, print_types: bool) {
    if let Some(c) = &b.constraint {
        eprintln!("{}: constraint {c}", b.name);
    }
    for line in &b.trace {
        eprintln!("{}: {line}", b.name);
    }
    println!("{}", b.line());
    if print_types {
        for l in &b.nested {
            println!("  {} : {}", l.name, l.scheme);
        }
    }
    match &b.oracle {
        Some(OracleVerdict::Agrees { typings }) => eprintln!("{}: oracle agrees ({typings} ground typings)", b.name),
        Some(OracleVerdict::Skipped(why)) => eprintln!("{}: oracle skipped: {why}", b.name),
        _ => {}
    }
    for d in b.diagnostics() {
        eprintln!("{d}");
    }
}
