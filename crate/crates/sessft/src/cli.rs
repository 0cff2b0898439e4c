//! The `sessft` command-line front end.
//!
//! Subcommands: `check` (typecheck a module), `run` (simulate a session),
//! `fidelity` (simulate under the per-step protocol monitor), `after`
//! (advance a session type past one action) and `fmt` (pretty-print).
//!
//! Exit codes are a stable contract: 0 success, 1 semantic failure (type
//! error, fidelity violation, undefined `after`), 2 input error (unreadable
//! file, parse failure, bad flags), 3 runtime failure (deadlock or crash).

use std::io::IsTerminal;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::ast::{FunId, Value};
use crate::diag::{Diagnostic, Severity};
use crate::fidelity::fidelity_run;
use crate::parser::{parse_module, parse_session_type, parse_value, print_module, SourceFile};
use crate::runtime::{
    render_trace_text, run_session, session_start, value_to_json, ProcessState, ProcessStatus,
    SchedulerPolicy, SessionVerdict,
};
use crate::session::{after_session, Action};
use crate::typecheck::{build_details, check_module};

const EXIT_OK: i32 = 0;
const EXIT_SEMANTIC: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_RUNTIME: i32 = 3;

#[derive(Parser)]
#[command(
    name = "sessft",
    version,
    about = "Session-typed mini-Elixir: typechecker, runtime and fidelity monitor"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and typecheck a module.
    Check {
        file: PathBuf,
        /// Emit diagnostics as a JSON array.
        #[arg(long)]
        json: bool,
    },
    /// Run a two-process session.
    Run {
        file: PathBuf,
        /// Server function as name/arity, e.g. pinger/1.
        #[arg(long)]
        server: String,
        /// Client function as name/arity, e.g. ponger/1.
        #[arg(long)]
        client: String,
        /// Argument value for the server (repeatable, after the pid).
        #[arg(long = "server-arg")]
        server_args: Vec<String>,
        /// Argument value for the client (repeatable, after the pid).
        #[arg(long = "client-arg")]
        client_args: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        fuel: u64,
        /// Scheduling policy: random, server-first, client-first, round-robin.
        #[arg(long, default_value = "random")]
        policy: String,
        /// Print the action trace.
        #[arg(long)]
        trace: bool,
        /// Emit the result as JSON.
        #[arg(long)]
        json: bool,
        /// Run even if the module does not typecheck.
        #[arg(long)]
        unchecked: bool,
    },
    /// Run a session under the per-step session-fidelity monitor.
    Fidelity {
        file: PathBuf,
        #[arg(long)]
        server: String,
        #[arg(long)]
        client: String,
        #[arg(long = "server-arg")]
        server_args: Vec<String>,
        #[arg(long = "client-arg")]
        client_args: Vec<String>,
        /// Number of seeds to run (0..seeds).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 1000)]
        fuel: u64,
        /// Emit reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Advance a session type past one action.
    ///
    /// Actions: `tau`, `call f/n`, `!label(v, ..)`, `?label(v, ..)`.
    After { session: String, action: String },
    /// Parse a module and print it back in canonical form.
    Fmt { file: PathBuf },
}

/// Entry point for the `sessft` binary. Returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file, json } => cmd_check(&file, json),
        Command::Run {
            file,
            server,
            client,
            server_args,
            client_args,
            seed,
            fuel,
            policy,
            trace,
            json,
            unchecked,
        } => cmd_run(
            &file,
            &server,
            &client,
            &server_args,
            &client_args,
            seed,
            fuel,
            &policy,
            trace,
            json,
            unchecked,
        ),
        Command::Fidelity {
            file,
            server,
            client,
            server_args,
            client_args,
            seeds,
            fuel,
            json,
        } => cmd_fidelity(
            &file,
            &server,
            &client,
            &server_args,
            &client_args,
            seeds,
            fuel,
            json,
        ),
        Command::After { session, action } => cmd_after(&session, &action),
        Command::Fmt { file } => cmd_fmt(&file),
    }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

fn color_enabled() -> bool {
    if std::env::var("SESSFT_COLOR").is_ok_and(|v| v == "0") {
        return false;
    }
    std::io::stdout().is_terminal()
}

fn render_diagnostic(d: &Diagnostic, file: &str) -> String {
    if color_enabled() {
        let (color, word) = match d.severity {
            Severity::Error => ("\x1b[31m", "error"),
            Severity::Warning => ("\x1b[33m", "warning"),
        };
        format!(
            "{}:{}:{}: {color}{word}\x1b[0m {} {}",
            file, d.span.line, d.span.col, d.code, d.message
        )
    } else {
        d.render(file)
    }
}

fn print_diagnostics(diags: &[Diagnostic], file: &str, as_json: bool) {
    if as_json {
        println!("{}", serde_json::to_string(diags).expect("serializable"));
    } else {
        for d in diags {
            println!("{}", render_diagnostic(d, file));
        }
    }
}

fn load_module(file: &PathBuf, as_json: bool) -> Result<(crate::ast::Module, String), i32> {
    let name = file.display().to_string();
    let contents = match std::fs::read_to_string(file) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{name}: cannot read file: {e}");
            return Err(EXIT_INPUT);
        }
    };
    match parse_module(&SourceFile::new(name.clone(), contents)) {
        Ok(m) => Ok((m, name)),
        Err(diags) => {
            print_diagnostics(&diags, &name, as_json);
            Err(EXIT_INPUT)
        }
    }
}

fn parse_fun_id(text: &str) -> Result<FunId, String> {
    let (name, arity) = text
        .rsplit_once('/')
        .ok_or_else(|| format!("`{text}` is not of the form name/arity"))?;
    let arity: usize = arity
        .parse()
        .map_err(|_| format!("`{arity}` is not a valid arity"))?;
    if name.is_empty() || arity == 0 {
        return Err(format!("`{text}` is not a valid function id"));
    }
    Ok(FunId::new(name, arity))
}

fn parse_args(texts: &[String]) -> Result<Vec<Value>, String> {
    texts
        .iter()
        .map(|t| parse_value(t).map_err(|d| format!("bad argument `{t}`: {}", d.message)))
        .collect()
}

/// Parses an action literal: `tau`, `call f/n`, `!label(v, ..)` or
/// `?label(v, ..)`. The destination pid of outputs is implicit.
pub fn parse_action(text: &str) -> Result<Action, String> {
    let text = text.trim();
    if text == "tau" {
        return Ok(Action::Tau);
    }
    if let Some(rest) = text.strip_prefix("call") {
        return parse_fun_id(rest.trim()).map(Action::Call);
    }
    let (is_output, rest) = match text.strip_prefix('!') {
        Some(rest) => (true, rest),
        None => match text.strip_prefix('?') {
            Some(rest) => (false, rest),
            None => return Err(format!("`{text}` is not an action")),
        },
    };
    let open = rest
        .find('(')
        .ok_or_else(|| format!("missing `(` in action `{text}`"))?;
    let label = rest[..open].trim();
    if label.is_empty() {
        return Err(format!("missing label in action `{text}`"));
    }
    let inner = rest[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("missing `)` in action `{text}`"))?;
    let mut payload = Vec::new();
    for part in split_top_level(inner) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v = parse_value(part).map_err(|d| format!("bad payload `{part}`: {}", d.message))?;
        payload.push(v);
    }
    Ok(if is_output {
        Action::output(crate::ast::ProcessId(0), label, payload)
    } else {
        Action::input(label, payload)
    })
}

/// Splits on commas not nested inside brackets, braces or parens.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '[' | '{' | '(' => depth += 1,
            ']' | '}' | ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn status_text(p: &ProcessState) -> String {
    match &p.status {
        ProcessStatus::Running => "running".to_string(),
        ProcessStatus::Blocked => "blocked".to_string(),
        ProcessStatus::Done(v) => format!("done {v}"),
        ProcessStatus::Crashed(e) => format!("crashed {e}"),
    }
}

fn status_json(p: &ProcessState) -> serde_json::Value {
    match &p.status {
        ProcessStatus::Running => json!({ "state": "running" }),
        ProcessStatus::Blocked => json!({ "state": "blocked" }),
        ProcessStatus::Done(v) => json!({ "state": "done", "value": value_to_json(v) }),
        ProcessStatus::Crashed(e) => json!({
            "state": "crashed",
            "code": e.code.as_str(),
            "message": e.message,
        }),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_check(file: &PathBuf, as_json: bool) -> i32 {
    let (module, name) = match load_module(file, as_json) {
        Ok(ok) => ok,
        Err(code) => return code,
    };
    match check_module(&module) {
        Ok(()) => {
            if as_json {
                println!("[]");
            } else {
                println!("{name}: ok");
            }
            EXIT_OK
        }
        Err(diags) => {
            print_diagnostics(&diags, &name, as_json);
            EXIT_SEMANTIC
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    file: &PathBuf,
    server: &str,
    client: &str,
    server_args: &[String],
    client_args: &[String],
    seed: u64,
    fuel: u64,
    policy: &str,
    trace: bool,
    as_json: bool,
    unchecked: bool,
) -> i32 {
    let (module, name) = match load_module(file, as_json) {
        Ok(ok) => ok,
        Err(code) => return code,
    };
    if !unchecked {
        if let Err(diags) = check_module(&module) {
            print_diagnostics(&diags, &name, as_json);
            eprintln!("{name}: refusing to run an ill-typed module (use --unchecked to force)");
            return EXIT_SEMANTIC;
        }
    }
    let (server_fun, client_fun) = match (parse_fun_id(server), parse_fun_id(client)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let (server_vals, client_vals) = match (parse_args(server_args), parse_args(client_args)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let policy: SchedulerPolicy = match policy.parse() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let sigma = build_details(&module.defs);
    let sys = match session_start(
        &sigma,
        &server_fun,
        &server_vals,
        &client_fun,
        &client_vals,
        seed,
    ) {
        Ok(sys) => sys,
        Err(d) => {
            print_diagnostics(&[d], &name, as_json);
            return EXIT_INPUT;
        }
    };
    let (end, verdict) = run_session(sys, policy, fuel);
    if as_json {
        let out = json!({
            "verdict": verdict.to_string(),
            "steps": end.steps_taken,
            "server": status_json(&end.server),
            "client": status_json(&end.client),
            "trace": end.trace.iter().map(|(pid, a)| {
                json!({ "pid": pid.0, "action": crate::runtime::action_to_json(a) })
            }).collect::<Vec<_>>(),
        });
        println!("{out}");
    } else {
        if trace {
            print!("{}", render_trace_text(&end.trace));
        }
        println!("server {}: {}", end.server.pid, status_text(&end.server));
        println!("client {}: {}", end.client.pid, status_text(&end.client));
        println!("verdict: {verdict}");
    }
    match verdict {
        SessionVerdict::Finished | SessionVerdict::FuelExhausted => EXIT_OK,
        SessionVerdict::Deadlock | SessionVerdict::Crashed => EXIT_RUNTIME,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fidelity(
    file: &PathBuf,
    server: &str,
    client: &str,
    server_args: &[String],
    client_args: &[String],
    seeds: u64,
    fuel: u64,
    as_json: bool,
) -> i32 {
    let (module, name) = match load_module(file, as_json) {
        Ok(ok) => ok,
        Err(code) => return code,
    };
    let (server_fun, client_fun) = match (parse_fun_id(server), parse_fun_id(client)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };
    let (server_vals, client_vals) = match (parse_args(server_args), parse_args(client_args)) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("{e}");
            return EXIT_INPUT;
        }
    };

    let mut all_hold = true;
    let mut results = Vec::new();
    for seed in 0..seeds.max(1) {
        match fidelity_run(
            &module,
            &server_fun,
            &server_vals,
            &client_fun,
            &client_vals,
            seed,
            fuel,
        ) {
            Ok(outcome) => {
                all_hold &= outcome.all_hold();
                results.push((seed, outcome));
            }
            Err(diags) => {
                print_diagnostics(&diags, &name, as_json);
                return EXIT_SEMANTIC;
            }
        }
    }

    if as_json {
        let out: Vec<_> = results
            .iter()
            .map(|(seed, o)| {
                json!({
                    "seed": seed,
                    "run": o.run_verdict.to_string(),
                    "steps": o.steps_taken,
                    "server": o.server.to_json(),
                    "client": o.client.to_json(),
                    "warnings": o.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        println!("{}", serde_json::Value::Array(out));
    } else {
        for (seed, o) in &results {
            for w in &o.warnings {
                println!("{}", render_diagnostic(w, &name));
            }
            for report in [&o.server, &o.client] {
                let verdict = if report.holds() { "holds" } else { "violated" };
                print!(
                    "seed {seed}: {} {} {}: {verdict} ({} steps)",
                    if report.pid == o.server.pid {
                        "server"
                    } else {
                        "client"
                    },
                    report.fun,
                    report.pid,
                    report.steps
                );
                match &report.violation {
                    Some(v) => println!(" — {v}"),
                    None => println!(),
                }
            }
        }
    }
    if all_hold {
        EXIT_OK
    } else {
        EXIT_SEMANTIC
    }
}

fn cmd_after(session_text: &str, action_text: &str) -> i32 {
    let session = match parse_session_type(session_text) {
        Ok(s) => s,
        Err(d) => {
            eprintln!("bad session type: {d}");
            return EXIT_INPUT;
        }
    };
    let action = match parse_action(action_text) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("bad action: {e}");
            return EXIT_INPUT;
        }
    };
    match after_session(&session, &action) {
        Some(residual) => {
            println!("{residual}");
            EXIT_OK
        }
        None => {
            println!("undefined");
            EXIT_SEMANTIC
        }
    }
}

fn cmd_fmt(file: &PathBuf) -> i32 {
    let (module, _) = match load_module(file, false) {
        Ok(ok) => ok,
        Err(code) => return code,
    };
    print!("{}", print_module(&module));
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::ProcessId;

    #[test]
    fn action_literals_parse() {
        assert_eq!(parse_action("tau").unwrap(), Action::Tau);
        assert_eq!(
            parse_action("call pinger/1").unwrap(),
            Action::Call(FunId::new("pinger", 1))
        );
        assert_eq!(
            parse_action("!ping()").unwrap(),
            Action::output(ProcessId(0), "ping", vec![])
        );
        assert_eq!(
            parse_action("?data(1, {2, true})").unwrap(),
            Action::input(
                "data",
                vec![
                    Value::int(1),
                    Value::Tuple(vec![Value::int(2), Value::Boolean(true)])
                ]
            )
        );
        assert!(parse_action("nonsense").is_err());
        assert!(parse_action("!()").is_err());
    }

    #[test]
    fn fun_ids_parse() {
        assert_eq!(parse_fun_id("pinger/1").unwrap(), FunId::new("pinger", 1));
        assert!(parse_fun_id("pinger").is_err());
        assert!(parse_fun_id("f/0").is_err());
    }

    #[test]
    fn top_level_split_respects_nesting() {
        assert_eq!(
            split_top_level("1, {2, 3}, [4, 5]"),
            vec!["1", " {2, 3}", " [4, 5]"]
        );
    }
}
