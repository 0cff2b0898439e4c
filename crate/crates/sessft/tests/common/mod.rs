//! Deterministic generators shared by the integration suites. Everything is
//! driven by a seeded ChaCha stream so failures replay exactly.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sessft::ast::{
    BinOp, CaseBranch, Expr, ExprType, FunDef, FunId, IdPattern, Identifier, Label, Module,
    Pattern, ReceiveBranch, RecVar, SessionAnn, SessionOption, SessionType, Term, Value, VarName,
    Visibility,
};
use sessft::diag::Span;
use sessft::session::dual;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const LABELS: &[&str] = &["a", "b", "c", "d"];

// ---------------------------------------------------------------------------
// Session types
// ---------------------------------------------------------------------------

/// A well-formed session type: labels distinct per option set, recursion
/// variables bound and contractive. Depth-bounded, at most four labels per
/// branch or choice.
pub fn gen_session(rng: &mut ChaCha8Rng, depth: usize) -> SessionType {
    let mut counter = 0;
    gen_session_inner(rng, depth, &mut Vec::new(), &mut counter, true)
}

fn gen_session_inner(
    rng: &mut ChaCha8Rng,
    depth: usize,
    scope: &mut Vec<RecVar>,
    counter: &mut u32,
    must_guard: bool,
) -> SessionType {
    let can_var = !must_guard && !scope.is_empty();
    if depth == 0 {
        return if can_var && rng.gen_bool(0.5) {
            SessionType::Var(scope.choose(rng).unwrap().clone())
        } else {
            SessionType::End
        };
    }
    match rng.gen_range(0..10u8) {
        0 => SessionType::End,
        1 if can_var => SessionType::Var(scope.choose(rng).unwrap().clone()),
        2 | 3 => {
            let name = RecVar::new(format!("R{}", *counter));
            *counter += 1;
            scope.push(name.clone());
            // The body may not reduce to a bare variable of the spine.
            let body = gen_session_inner(rng, depth - 1, scope, counter, true);
            scope.pop();
            SessionType::Rec(name, Box::new(body))
        }
        n => {
            // Biased low so deep trees stay tractable; the bound is 4.
            let arm_count = rng.gen_range(1..=4usize).min(rng.gen_range(1..=4usize));
            let mut labels = LABELS.to_vec();
            labels.shuffle(rng);
            let options = labels
                .into_iter()
                .take(arm_count)
                .map(|l| SessionOption {
                    label: Label::new(l),
                    payloads: (0..rng.gen_range(0..=2usize))
                        .map(|_| gen_expr_type(rng, 1))
                        .collect(),
                    cont: gen_session_inner(rng, depth - 1, scope, counter, false),
                })
                .collect();
            if n % 2 == 0 {
                SessionType::Branch(options)
            } else {
                SessionType::Choice(options)
            }
        }
    }
}

pub fn gen_expr_type(rng: &mut ChaCha8Rng, depth: usize) -> ExprType {
    match rng.gen_range(0..if depth == 0 { 4 } else { 6 }) {
        0 => ExprType::Boolean,
        1 => ExprType::Number,
        2 => ExprType::Atom,
        3 => ExprType::Pid,
        4 => ExprType::List(Box::new(gen_expr_type(rng, depth - 1))),
        _ => ExprType::Tuple(
            (0..rng.gen_range(0..=3usize))
                .map(|_| gen_expr_type(rng, depth - 1))
                .collect(),
        ),
    }
}

/// Alpha-renames every recursion variable consistently (fresh names), which
/// preserves equivalence but not syntax.
pub fn alpha_rename(s: &SessionType) -> SessionType {
    fn walk(s: &SessionType, map: &mut Vec<(RecVar, RecVar)>) -> SessionType {
        match s {
            SessionType::End => SessionType::End,
            SessionType::Var(x) => SessionType::Var(
                map.iter()
                    .rev()
                    .find(|(from, _)| from == x)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| x.clone()),
            ),
            SessionType::Rec(x, body) => {
                let fresh = RecVar::new(format!("{}_q", x.0));
                map.push((x.clone(), fresh.clone()));
                let body = walk(body, map);
                map.pop();
                SessionType::Rec(fresh, Box::new(body))
            }
            SessionType::Branch(opts) => SessionType::Branch(walk_opts(opts, map)),
            SessionType::Choice(opts) => SessionType::Choice(walk_opts(opts, map)),
        }
    }
    fn walk_opts(
        opts: &[SessionOption],
        map: &mut Vec<(RecVar, RecVar)>,
    ) -> Vec<SessionOption> {
        opts.iter()
            .map(|o| SessionOption {
                label: o.label.clone(),
                payloads: o.payloads.clone(),
                cont: walk(&o.cont, map),
            })
            .collect()
    }
    walk(s, &mut Vec::new())
}

// ---------------------------------------------------------------------------
// Values and patterns
// ---------------------------------------------------------------------------

const ATOMS: &[&str] = &["ok", "err", "ping", "stop"];

/// An arbitrary value. `pids` controls whether pid values may appear (they
/// cannot be written in source, so generators for parseable positions
/// exclude them).
pub fn gen_value(rng: &mut ChaCha8Rng, depth: usize, pids: bool) -> Value {
    let top = if depth == 0 { 5 } else { 8 };
    match rng.gen_range(0..top) {
        0 => Value::Boolean(rng.gen()),
        1 => Value::int(rng.gen_range(-100..100)),
        2 => Value::float(f64::from(rng.gen_range(-400..400)) / 4.0),
        3 => Value::atom(*ATOMS.choose(rng).unwrap()),
        4 => {
            if pids {
                Value::Pid(sessft::ast::ProcessId(rng.gen_range(0..6)))
            } else {
                Value::EmptyList
            }
        }
        5 => Value::EmptyList,
        6 => {
            let len = rng.gen_range(0..=3);
            let mut out = Value::EmptyList;
            for _ in 0..len {
                out = Value::Cons(Box::new(gen_value(rng, depth - 1, pids)), Box::new(out));
            }
            out
        }
        _ => Value::Tuple(
            (0..rng.gen_range(0..=3usize))
                .map(|_| gen_value(rng, depth - 1, pids))
                .collect(),
        ),
    }
}

fn fresh_var(counter: &mut u32) -> VarName {
    let v = VarName::new(format!("v{counter}"));
    *counter += 1;
    v
}

fn gen_id_pattern(rng: &mut ChaCha8Rng, counter: &mut u32) -> IdPattern {
    if rng.gen_bool(0.5) {
        IdPattern::Var(fresh_var(counter))
    } else {
        IdPattern::Literal(gen_basic_value(rng))
    }
}

fn gen_basic_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..5u8) {
        0 => Value::Boolean(rng.gen()),
        1 => Value::int(rng.gen_range(-20..20)),
        2 => Value::float(f64::from(rng.gen_range(-40..40)) / 4.0),
        3 => Value::atom(*ATOMS.choose(rng).unwrap()),
        _ => Value::EmptyList,
    }
}

/// A pattern with pairwise-distinct, non-wildcard variables.
pub fn gen_pattern(rng: &mut ChaCha8Rng, counter: &mut u32) -> Pattern {
    match rng.gen_range(0..4u8) {
        0 => Pattern::Literal(gen_basic_value(rng)),
        1 => Pattern::Var(fresh_var(counter)),
        2 => Pattern::Cons(
            gen_id_pattern(rng, counter),
            gen_id_pattern(rng, counter),
        ),
        _ => Pattern::Tuple(
            (0..rng.gen_range(0..=3usize))
                .map(|_| gen_id_pattern(rng, counter))
                .collect(),
        ),
    }
}

/// A value that the pattern is guaranteed to match.
pub fn value_matching(rng: &mut ChaCha8Rng, pattern: &Pattern) -> Value {
    match pattern {
        Pattern::Literal(v) => v.clone(),
        Pattern::Var(_) => gen_value(rng, 1, true),
        Pattern::Cons(h, t) => Value::Cons(
            Box::new(value_matching_id(rng, h)),
            Box::new(match t {
                IdPattern::Literal(v) => v.clone(),
                IdPattern::Var(_) => {
                    // Tails that are bound by a variable can be any value;
                    // keep them list-shaped.
                    Value::EmptyList
                }
            }),
        ),
        Pattern::Tuple(ws) => {
            Value::Tuple(ws.iter().map(|w| value_matching_id(rng, w)).collect())
        }
    }
}

fn value_matching_id(rng: &mut ChaCha8Rng, w: &IdPattern) -> Value {
    match w {
        IdPattern::Literal(v) => v.clone(),
        IdPattern::Var(_) => gen_value(rng, 0, true),
    }
}

// ---------------------------------------------------------------------------
// Modules
// ---------------------------------------------------------------------------

const MODULE_NAMES: &[&str] = &["Alpha", "Beta", "Gamma.Inner", "Delta"];
const FUN_NAMES: &[&str] = &["f", "g", "handle", "serve"];

/// A parser-valid module: distinct function ids, annotated public functions,
/// closed bodies, distinct parameters and pattern variables. Not necessarily
/// well-typed — these exercise the parser and printer.
pub fn gen_module(rng: &mut ChaCha8Rng) -> Module {
    let mut defs: Vec<FunDef> = Vec::new();
    let mut named: Vec<(RecVar, SessionType)> = Vec::new();
    let mut used_ids = Vec::new();
    let mut counter = 0u32;
    for _ in 0..rng.gen_range(0..=3usize) {
        let name = *FUN_NAMES.choose(rng).unwrap();
        let extra_params = rng.gen_range(0..=2usize);
        let id = FunId::new(name, extra_params + 1);
        if used_ids.contains(&id) {
            continue;
        }
        used_ids.push(id.clone());

        let public = rng.gen_bool(0.7);
        let session = if public {
            // Occasionally reference an earlier named session via @dual.
            if !named.is_empty() && rng.gen_bool(0.3) {
                let (name, s) = named.choose(rng).unwrap().clone();
                Some(SessionAnn::Dual {
                    name,
                    session: dual(&s),
                })
            } else {
                let s = gen_session(rng, 3);
                if let SessionType::Rec(x, _) = &s {
                    // Later declarations shadow earlier ones, mirroring the
                    // parser's resolution.
                    named.retain(|(n, _)| n != x);
                    named.push((x.clone(), s.clone()));
                }
                Some(SessionAnn::Session(s))
            }
        } else {
            None
        };

        let dual_param = VarName::new("me");
        let params: Vec<VarName> = (0..extra_params)
            .map(|i| VarName::new(format!("p{i}")))
            .collect();
        let mut scope: Vec<VarName> = vec![dual_param.clone()];
        scope.extend(params.iter().cloned());
        let body = gen_body(rng, &mut scope, &mut counter, 2);
        defs.push(FunDef {
            id,
            visibility: if public {
                Visibility::Public
            } else {
                Visibility::Private
            },
            dual_param,
            params,
            param_types: (0..extra_params).map(|_| gen_expr_type(rng, 1)).collect(),
            return_type: gen_expr_type(rng, 1),
            body,
            session,
            span: Span::start(),
        });
    }
    Module {
        name: MODULE_NAMES.choose(rng).unwrap().to_string(),
        defs,
    }
}

/// A statement sequence desugared to a let chain.
fn gen_body(
    rng: &mut ChaCha8Rng,
    scope: &mut Vec<VarName>,
    counter: &mut u32,
    depth: usize,
) -> Term {
    let stmts = rng.gen_range(1..=3usize);
    let mut binders = Vec::new();
    let mut terms = Vec::new();
    let base_scope = scope.len();
    for i in 0..stmts {
        let last = i == stmts - 1;
        let term = gen_term(rng, scope, counter, depth);
        if !last && rng.gen_bool(0.5) {
            let x = fresh_var(counter);
            scope.push(x.clone());
            binders.push(Some(x));
        } else {
            binders.push(None);
        }
        terms.push(term);
    }
    scope.truncate(base_scope);

    // Fold right into a let chain; a bare non-final statement binds `_`.
    let mut iter = binders.into_iter().zip(terms).rev();
    let (_, last_term) = iter.next().unwrap();
    let mut acc = last_term;
    for (binder, term) in iter {
        acc = Term::Let {
            var: binder.unwrap_or_else(|| VarName::new("_")),
            bound: Box::new(term),
            body: Box::new(acc),
        };
    }
    acc
}

fn gen_term(
    rng: &mut ChaCha8Rng,
    scope: &mut Vec<VarName>,
    counter: &mut u32,
    depth: usize,
) -> Term {
    if depth == 0 {
        return Term::Expr(gen_expr(rng, scope, 1));
    }
    match rng.gen_range(0..12u8) {
        0 | 1 => {
            let branches = gen_distinct_labels(rng)
                .into_iter()
                .map(|label| {
                    let base = scope.len();
                    let patterns: Vec<Pattern> = (0..rng.gen_range(0..=2usize))
                        .map(|_| gen_pattern(rng, counter))
                        .collect();
                    for p in &patterns {
                        scope.extend(sessft::ast::pattern_vars(p));
                    }
                    let body = gen_body(rng, scope, counter, depth - 1);
                    scope.truncate(base);
                    ReceiveBranch {
                        label,
                        patterns,
                        body,
                    }
                })
                .collect();
            Term::Receive { branches }
        }
        2 | 3 => Term::Send {
            dest: gen_identifier(rng, scope),
            label: Label::new(*LABELS.choose(rng).unwrap()),
            args: (0..rng.gen_range(0..=2usize))
                .map(|_| gen_expr(rng, scope, 1))
                .collect(),
        },
        4 => Term::Call {
            fun: sessft::ast::FunName::new(*FUN_NAMES.choose(rng).unwrap()),
            dest: gen_identifier(rng, scope),
            args: (0..rng.gen_range(0..=2usize))
                .map(|_| gen_expr(rng, scope, 1))
                .collect(),
        },
        5 | 6 => {
            let scrutinee = gen_expr(rng, scope, 1);
            let branches = (0..rng.gen_range(1..=2usize))
                .map(|_| {
                    let base = scope.len();
                    let pattern = gen_pattern(rng, counter);
                    scope.extend(sessft::ast::pattern_vars(&pattern));
                    let body = gen_body(rng, scope, counter, depth - 1);
                    scope.truncate(base);
                    CaseBranch { pattern, body }
                })
                .collect();
            Term::Case {
                scrutinee,
                branches,
            }
        }
        // A nested statement block: exercises parenthesized blocks when it
        // lands in a bound position.
        7 => gen_body(rng, scope, counter, depth - 1),
        _ => Term::Expr(gen_expr(rng, scope, 2)),
    }
}

fn gen_distinct_labels(rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut labels = LABELS.to_vec();
    labels.shuffle(rng);
    labels
        .into_iter()
        .take(rng.gen_range(1..=2))
        .map(Label::new)
        .collect()
}

fn gen_identifier(rng: &mut ChaCha8Rng, scope: &[VarName]) -> Identifier {
    if !scope.is_empty() && rng.gen_bool(0.8) {
        Identifier::Var(scope.choose(rng).unwrap().clone())
    } else {
        Identifier::Val(gen_basic_value(rng))
    }
}

fn gen_expr(rng: &mut ChaCha8Rng, scope: &[VarName], depth: usize) -> Expr {
    if depth == 0 {
        return if !scope.is_empty() && rng.gen_bool(0.4) {
            Expr::Var(scope.choose(rng).unwrap().clone())
        } else {
            Expr::Val(gen_basic_value(rng))
        };
    }
    match rng.gen_range(0..10u8) {
        0 | 1 => Expr::Val(gen_basic_value(rng)),
        2 if !scope.is_empty() => Expr::Var(scope.choose(rng).unwrap().clone()),
        3 => Expr::Not(Box::new(gen_expr(rng, scope, depth - 1))),
        4..=6 => {
            let ops = [
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Div,
                BinOp::Lt,
                BinOp::Le,
                BinOp::Eq,
                BinOp::Ne,
                BinOp::And,
                BinOp::Or,
            ];
            Expr::BinOp(
                *ops.choose(rng).unwrap(),
                Box::new(gen_expr(rng, scope, depth - 1)),
                Box::new(gen_expr(rng, scope, depth - 1)),
            )
        }
        7 => {
            let mut acc = if rng.gen_bool(0.7) {
                Expr::Val(Value::EmptyList)
            } else {
                gen_expr(rng, scope, 0)
            };
            for _ in 0..rng.gen_range(0..=2) {
                acc = Expr::Cons(Box::new(gen_expr(rng, scope, depth - 1)), Box::new(acc));
            }
            acc
        }
        _ => Expr::Tuple(
            (0..rng.gen_range(0..=3usize))
                .map(|_| gen_expr(rng, scope, depth - 1))
                .collect(),
        ),
    }
}

// ---------------------------------------------------------------------------
// Corpus access
// ---------------------------------------------------------------------------

pub fn corpus_path(kind: &str, name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(kind)
        .join(name)
}

pub fn load_corpus_module(kind: &str, name: &str) -> Module {
    let path = corpus_path(kind, name);
    let contents = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    sessft::parser::parse_module(&sessft::parser::SourceFile::new(
        path.display().to_string(),
        contents,
    ))
    .unwrap_or_else(|e| panic!("{} does not parse: {e:?}", path.display()))
}

/// One well-typed corpus entry: file, server and client entry points with
/// their argument values (after the pid).
pub struct CorpusEntry {
    pub file: &'static str,
    pub server: FunId,
    pub server_args: Vec<Value>,
    pub client: FunId,
    pub client_args: Vec<Value>,
}

fn entry(file: &'static str, server: (&str, usize), client: (&str, usize)) -> CorpusEntry {
    CorpusEntry {
        file,
        server: FunId::new(server.0, server.1),
        server_args: Vec::new(),
        client: FunId::new(client.0, client.1),
        client_args: Vec::new(),
    }
}

/// The well-typed corpus with its session entry points.
pub fn well_typed_corpus() -> Vec<CorpusEntry> {
    let mut entries = vec![
        entry("pinger.exst", ("pinger", 1), ("ponger", 1)),
        entry("oneshot.exst", ("giver", 1), ("taker", 1)),
        entry("calc.exst", ("server", 1), ("client", 1)),
        entry("list_payload.exst", ("sender", 1), ("summer", 1)),
        entry("grade.exst", ("grader", 1), ("student", 1)),
        entry("counter.exst", ("server", 1), ("client", 1)),
        entry("relay.exst", ("starter", 1), ("acker", 1)),
        entry("parity.exst", ("judge", 1), ("flagger", 1)),
        entry("stats.exst", ("stats", 1), ("feeder", 1)),
        entry("handshake.exst", ("responder", 1), ("initiator", 1)),
        entry("mirror.exst", ("left", 1), ("right", 1)),
        entry("selective.exst", ("collector", 1), ("emitter", 1)),
    ];
    entries.push(CorpusEntry {
        file: "accumulate.exst",
        server: FunId::new("acc", 2),
        server_args: vec![Value::int(0)],
        client: FunId::new("poster", 1),
        client_args: Vec::new(),
    });
    entries
}
