//! The session-type algebra: duality, unfolding, equivalence and the
//! `after` function that advances a protocol past an action.
//!
//! ```sh
//! cargo run --example session_algebra
//! ```

use sessft::ast::ProcessId;
use sessft::parser::parse_session_type;
use sessft::session::{after_session, dual, session_equal, unfold, Action};

fn main() {
    let s = parse_session_type("X = !ping().?pong().X").unwrap();
    println!("session:   {s}");
    println!("dual:      {}", dual(&s));
    println!("unfolded:  {}", unfold(&s));

    // Equivalence is equi-recursive: a type, its unfolding and an
    // alpha-renaming all denote the same protocol.
    let renamed = parse_session_type("Y = !ping().?pong().Y").unwrap();
    println!("\nequivalences:");
    println!("  s == unfold(s)   -> {}", session_equal(&s, &unfold(&s)));
    println!("  s == renamed     -> {}", session_equal(&s, &renamed));
    let two_step = parse_session_type("Z = !ping().?pong().!ping().?pong().Z").unwrap();
    println!("  s == two-step    -> {}", session_equal(&s, &two_step));
    let other = parse_session_type("!pong()").unwrap();
    println!("  s == !pong()     -> {}", session_equal(&s, &other));

    // `after` advances the protocol exactly on permitted actions.
    println!("\nafter:");
    let ping = Action::output(ProcessId(0), "ping", vec![]);
    let mut current = s.clone();
    for step in [ping.clone(), Action::input("pong", vec![]), ping] {
        match after_session(&current, &step) {
            Some(next) => {
                println!("  {current}  --{step}-->  {next}");
                current = next;
            }
            None => println!("  {current}  --{step}-->  undefined"),
        }
    }
    // A pong is not permitted while the protocol expects to send ping.
    let bad = Action::output(ProcessId(0), "pong", vec![]);
    println!(
        "  {}  --{bad}-->  {}",
        s,
        match after_session(&s, &bad) {
            Some(next) => next.to_string(),
            None => "undefined (protocol violation)".to_string(),
        }
    );
}
