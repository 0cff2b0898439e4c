//! Simulate a two-process session and print its trace.
//!
//! ```sh
//! cargo run --example run_session
//! ```

use std::path::Path;

use sessft::ast::FunId;
use sessft::parser::{parse_module, SourceFile};
use sessft::runtime::{render_trace_text, run_session, session_start, SchedulerPolicy};
use sessft::typecheck::{build_details, check_module};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join("well_typed")
        .join("calc.exst");
    let contents = std::fs::read_to_string(&path).expect("corpus file exists");
    let module =
        parse_module(&SourceFile::new(path.display().to_string(), contents)).expect("parses");
    check_module(&module).expect("typechecks");

    let sigma = build_details(&module.defs);
    let sys = session_start(
        &sigma,
        &FunId::new("server", 1),
        &[],
        &FunId::new("client", 1),
        &[],
        42, // scheduling seed; same seed, same trace
    )
    .expect("both functions exist");

    let (end, verdict) = run_session(sys, SchedulerPolicy::Random, 200);
    print!("{}", render_trace_text(&end.trace));
    println!("server: {:?}", end.server.status);
    println!("client: {:?}", end.client.status);
    println!("verdict after {} steps: {verdict}", end.steps_taken);
}
