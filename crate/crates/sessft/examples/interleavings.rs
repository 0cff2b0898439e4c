//! Enumerate every scheduler interleaving of a short protocol.
//!
//! ```sh
//! cargo run --example interleavings
//! ```

use std::path::Path;

use sessft::ast::FunId;
use sessft::parser::{parse_module, SourceFile};
use sessft::runtime::{explore_interleavings, render_trace_text};
use sessft::typecheck::build_details;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join("well_typed")
        .join("handshake.exst");
    let contents = std::fs::read_to_string(&path).expect("corpus file exists");
    let module =
        parse_module(&SourceFile::new(path.display().to_string(), contents)).expect("parses");
    let sigma = build_details(&module.defs);

    for depth in [0, 2, 6, 12] {
        let traces = explore_interleavings(
            &sigma,
            &FunId::new("responder", 1),
            &[],
            &FunId::new("initiator", 1),
            &[],
            depth,
        )
        .expect("exploration starts");
        println!("depth {depth}: {} distinct trace(s)", traces.len());
    }

    // Show one full interleaving in detail.
    let traces = explore_interleavings(
        &sigma,
        &FunId::new("responder", 1),
        &[],
        &FunId::new("initiator", 1),
        &[],
        12,
    )
    .unwrap();
    let longest = traces.iter().max_by_key(|t| t.len()).unwrap();
    println!("\none maximal interleaving:");
    print!("{}", render_trace_text(longest));
}
