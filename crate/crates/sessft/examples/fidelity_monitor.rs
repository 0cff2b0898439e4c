//! Watch the session-fidelity monitor at work: every step of a monitored
//! run advances the protocol with `after` and re-typechecks the residual
//! term. A healthy module holds on every step; an injected semantic fault
//! is caught the moment it breaks the protocol.
//!
//! ```sh
//! cargo run --example fidelity_monitor
//! ```

use std::path::Path;

use sessft::ast::FunId;
use sessft::fidelity::{fidelity_run, fidelity_run_with, FidelityOptions};
use sessft::parser::{parse_module, SourceFile};
use sessft::semantics::FaultInjection;

fn load(name: &str) -> sessft::Module {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join("well_typed")
        .join(name);
    let contents = std::fs::read_to_string(&path).expect("corpus file exists");
    parse_module(&SourceFile::new(path.display().to_string(), contents)).expect("parses")
}

fn main() {
    let module = load("pinger.exst");
    let pinger = FunId::new("pinger", 1);
    let ponger = FunId::new("ponger", 1);

    println!("monitored run of pinger/ponger across five seeds:");
    for seed in 0..5 {
        let outcome = fidelity_run(&module, &pinger, &[], &ponger, &[], seed, 120)
            .expect("module typechecks");
        println!(
            "  seed {seed}: server {} in {} steps, client {} in {} steps",
            if outcome.server.holds() { "holds" } else { "violated" },
            outcome.server.steps,
            if outcome.client.holds() { "holds" } else { "violated" },
            outcome.client.steps,
        );
    }

    // Inject a bug into the semantics: sends swap their label. The monitor
    // reports the offending step and why it is a violation.
    println!("\nsame module with a label-swapping fault injected:");
    let outcome = fidelity_run_with(
        &module,
        &pinger,
        &[],
        &ponger,
        &[],
        FidelityOptions {
            fault: Some(FaultInjection::SwapSendLabel),
            fuel: 120,
            ..FidelityOptions::default()
        },
    )
    .expect("module typechecks");
    for report in [&outcome.server, &outcome.client] {
        match &report.violation {
            Some(v) => println!("  {} {}: violated at {v}", report.fun, report.pid),
            None => println!("  {} {}: holds", report.fun, report.pid),
        }
    }
}
