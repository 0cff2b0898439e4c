//! A toolkit for a session-annotated mini-Elixir language.
//!
//! The library parses modules whose public functions carry binary session
//! types, statically checks each function body against its protocol,
//! executes programs under a small-step labelled transition semantics with
//! a two-process session runtime, and mechanically validates on every
//! execution step that the action performed is permitted by the protocol
//! and that the continuation stays well-typed — the session-fidelity
//! property, checked as an executable monitor rather than assumed.
//!
//! The pieces, bottom up:
//!
//! - [`ast`] — the syntax: values, patterns, expressions, terms, modules,
//!   plus free/bound variables, substitution and value typing.
//! - [`parser`] — `.exst` source files and session-type strings in, modules
//!   out, and a pretty-printer that round-trips.
//! - [`session`] — the session-type algebra: duality, equi-recursive
//!   unfolding and equivalence, and the `after` function that advances a
//!   protocol past an action.
//! - [`typecheck`] — the behavioural typechecker for modules, terms,
//!   expressions and patterns.
//! - [`semantics`] — pattern matching and the single-process step function.
//! - [`runtime`] — the two-process simulator: mailboxes, selective receive,
//!   deterministic seeded scheduling, interleaving exploration.
//! - [`fidelity`] — the per-step protocol monitor and its report types.
//! - [`cli`] — the `sessft` command-line front end.
//!
//! Each major capability has a runnable example under `examples/`; start
//! with `cargo run --example run_session`.

pub mod ast;
pub mod cli;
pub mod diag;
pub mod fidelity;
pub mod parser;
pub mod runtime;
pub mod semantics;
pub mod session;
pub mod typecheck;

pub use ast::{
    ExprType, FunDef, FunId, Label, Module, Pattern, ProcessId, SessionType, Subst, Term, Value,
    ValueType, VarName,
};
pub use diag::{Code, Diagnostic, Severity, Span};
pub use session::{after_env, after_session, dual, session_equal, unfold, well_formed, Action};
