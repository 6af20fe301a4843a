use std::io::{self, BufRead, Write};

use polyqe::engine::Engine;
use polyqe::sqlfront::{ends_statement, parse_statements};

use crate::config::OutputMode;
use crate::output::print_outcome;
use crate::CliError;

/// Parses and runs every statement in `sql`, printing each result as it
/// completes. Stops at the first failure.
pub fn run_script(engine: &Engine, sql: &str, mode: OutputMode) -> Result<(), CliError> {
    let stmts = parse_statements(sql).map_err(|e| CliError::User(e.to_string()))?;
    for s in &stmts {
        let o = engine.execute_statement(s)?;
        print_outcome(&o, mode);
    }
    Ok(())
}

/// Reads `;`-terminated statements from `input` until end of input. Errors
/// are reported and the loop continues.
pub fn run(engine: &Engine, input: impl BufRead, mode: OutputMode, prompt: bool) {
    let mut buf = String::new();
    let show = |cont: bool| {
        if prompt {
            let mut err = io::stderr().lock();
            let _ = err.write_all(if cont { b"     -> " } else { b"polyqe> " });
            let _ = err.flush();
        }
    };
    show(false);
    for line in input.lines() {
        let Ok(line) = line else { break };
        buf.push_str(&line);
        buf.push('\n');
        if ends_statement(&buf) {
            submit(engine, &buf, mode);
            buf.clear();
        }
        show(!buf.trim().is_empty());
    }
    if !buf.trim().is_empty() {
        submit(engine, &buf, mode);
    }
    if prompt {
        eprintln!();
    }
}

fn submit(engine: &Engine, sql: &str, mode: OutputMode) {
    if let Err(e) = run_script(engine, sql, mode) {
        eprintln!("error: {e}");
    }
}
