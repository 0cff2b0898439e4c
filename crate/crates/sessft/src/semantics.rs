//! Small-step labelled transition semantics for terms and expressions,
//! plus the pattern-matching function.
//!
//! A step consumes one [`Stimulus`]: `Internal` for autonomous reductions
//! and `Deliver` to hand a mailbox message to a receive-headed term. Every
//! step produces an [`Action`] recording its side-effect. Evaluation is
//! call-by-value and strictly left to right.

use crate::ast::{
    Expr, IdPattern, Identifier, Label, Number, Pattern, ReceiveBranch, Subst, Term, Value,
};
use crate::diag::Code;
use crate::session::Action;
use crate::typecheck::FunInfoEnv;

/// What drives one step: an autonomous reduction or a delivered message.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    Internal,
    Deliver { label: Label, payload: Vec<Value> },
}

/// One transition: the action performed and the successor term.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub action: Action,
    pub next: Term,
}

/// A runtime failure, carrying its catalogue code.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeError {
    pub code: Code,
    pub message: String,
}

impl RuntimeError {
    fn new(code: Code, message: impl Into<String>) -> Self {
        RuntimeError {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.code, self.message)
    }
}

/// Result of attempting one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// The term stepped.
    Step(StepResult),
    /// The term is a value; it cannot step further.
    Done(Value),
    /// A receive with nothing consumable: a scheduling outcome, not an error.
    Blocked,
    /// The term is stuck.
    RuntimeError(RuntimeError),
}

/// Seeded semantic faults for the fidelity mutation suite. Each injects one
/// specific bug into the otherwise-correct machinery so the monitor must
/// notice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    /// Sends carry a different label than written.
    SwapSendLabel,
    /// After each step, one receive in the residual term loses a branch.
    DropReceiveBranch,
    /// `let` forgets to substitute the bound value.
    SkipLetSubstitution,
    /// Outputs are routed to the sender's own mailbox.
    DeliverToSelf,
    /// The monitor's session environment forgets call bindings.
    OmitSessionEnvExtension,
}

// ---------------------------------------------------------------------------
// Pattern matching
// ---------------------------------------------------------------------------

/// Matches a pattern list against a value list, producing the combined
/// substitution or failing. Lists of different lengths fail.
pub fn match_patterns(patterns: &[Pattern], values: &[Value]) -> Option<Subst> {
    if patterns.len() != values.len() {
        return None;
    }
    let mut subst = Subst::new();
    for (p, v) in patterns.iter().zip(values) {
        subst.extend(match_pattern(p, v)?);
    }
    Some(subst)
}

/// Matches one pattern against one value.
pub fn match_pattern(pattern: &Pattern, value: &Value) -> Option<Subst> {
    match pattern {
        Pattern::Literal(lit) => (lit == value).then(Subst::new),
        Pattern::Var(x) => {
            let mut s = Subst::new();
            s.bind(x.clone(), value.clone());
            Some(s)
        }
        Pattern::Cons(head, tail) => match value {
            Value::Cons(vh, vt) => {
                let mut s = match_id_pattern(head, vh)?;
                s.extend(match_id_pattern(tail, vt)?);
                Some(s)
            }
            _ => None,
        },
        Pattern::Tuple(ws) => match value {
            Value::Tuple(vs) if vs.len() == ws.len() => {
                let mut s = Subst::new();
                for (w, v) in ws.iter().zip(vs) {
                    s.extend(match_id_pattern(w, v)?);
                }
                Some(s)
            }
            _ => None,
        },
    }
}

fn match_id_pattern(w: &IdPattern, value: &Value) -> Option<Subst> {
    match w {
        IdPattern::Literal(lit) => (lit == value).then(Subst::new),
        IdPattern::Var(x) => {
            let mut s = Subst::new();
            s.bind(x.clone(), value.clone());
            Some(s)
        }
    }
}

// ---------------------------------------------------------------------------
// Expression reduction
// ---------------------------------------------------------------------------

/// One deterministic leftmost reduction step. Callers only invoke this on
/// non-value expressions.
pub fn reduce_expr(expr: &Expr) -> Result<Expr, RuntimeError> {
    match expr {
        Expr::Val(_) => Ok(expr.clone()),
        Expr::Var(x) => Err(RuntimeError::new(
            Code::RunUnbound,
            format!("unbound variable {x}"),
        )),
        Expr::Not(inner) => match inner.as_ref() {
            Expr::Val(Value::Boolean(b)) => Ok(Expr::Val(Value::Boolean(!b))),
            Expr::Val(v) => Err(RuntimeError::new(
                Code::RunArith,
                format!("not expects a boolean, got {v}"),
            )),
            e => Ok(Expr::Not(Box::new(reduce_expr(e)?))),
        },
        Expr::BinOp(op, lhs, rhs) => {
            if !lhs.is_value() {
                return Ok(Expr::BinOp(*op, Box::new(reduce_expr(lhs)?), rhs.clone()));
            }
            if !rhs.is_value() {
                return Ok(Expr::BinOp(*op, lhs.clone(), Box::new(reduce_expr(rhs)?)));
            }
            let v = apply_binop(*op, lhs.as_value().unwrap(), rhs.as_value().unwrap())?;
            Ok(Expr::Val(v))
        }
        Expr::Cons(head, tail) => {
            if !head.is_value() {
                return Ok(Expr::Cons(Box::new(reduce_expr(head)?), tail.clone()));
            }
            if !tail.is_value() {
                return Ok(Expr::Cons(head.clone(), Box::new(reduce_expr(tail)?)));
            }
            let v = Value::Cons(
                Box::new(head.as_value().unwrap().clone()),
                Box::new(tail.as_value().unwrap().clone()),
            );
            // Lists stay proper and homogeneous at runtime.
            v.value_type()
                .map_err(|e| RuntimeError::new(Code::RunList, e.to_string()))?;
            Ok(Expr::Val(v))
        }
        Expr::Tuple(es) => {
            if let Some(k) = es.iter().position(|e| !e.is_value()) {
                let mut next = es.clone();
                next[k] = reduce_expr(&es[k])?;
                return Ok(Expr::Tuple(next));
            }
            let vs = es
                .iter()
                .map(|e| e.as_value().unwrap().clone())
                .collect::<Vec<_>>();
            Ok(Expr::Val(Value::Tuple(vs)))
        }
    }
}

fn as_f64(n: Number) -> f64 {
    match n {
        Number::Int(i) => i as f64,
        Number::Float(x) => x,
    }
}

fn apply_binop(op: crate::ast::BinOp, lhs: &Value, rhs: &Value) -> Result<Value, RuntimeError> {
    use crate::ast::BinOp;
    if op.is_arithmetic() {
        let (a, b) = match (lhs, rhs) {
            (Value::Number(a), Value::Number(b)) => (*a, *b),
            _ => {
                return Err(RuntimeError::new(
                    Code::RunArith,
                    format!("{op} expects numbers, got {lhs} and {rhs}"),
                ))
            }
        };
        if op == BinOp::Div {
            let divisor = as_f64(b);
            if divisor == 0.0 {
                return Err(RuntimeError::new(Code::RunArith, "division by zero"));
            }
            let q = as_f64(a) / divisor;
            if !q.is_finite() {
                return Err(RuntimeError::new(Code::RunOverflow, "number overflow"));
            }
            return Ok(Value::Number(Number::Float(q)));
        }
        return match (a, b) {
            (Number::Int(x), Number::Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    BinOp::Mul => x.checked_mul(y),
                    _ => unreachable!(),
                };
                r.map(Value::int)
                    .ok_or_else(|| RuntimeError::new(Code::RunOverflow, "integer overflow"))
            }
            (a, b) => {
                let (x, y) = (as_f64(a), as_f64(b));
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    _ => unreachable!(),
                };
                if r.is_finite() {
                    Ok(Value::float(r))
                } else {
                    Err(RuntimeError::new(Code::RunOverflow, "number overflow"))
                }
            }
        };
    }
    if op.is_boolean() {
        // Both operands reduce first; `and`/`or` are strict.
        return match (lhs, rhs) {
            (Value::Boolean(a), Value::Boolean(b)) => Ok(Value::Boolean(match op {
                BinOp::And => *a && *b,
                BinOp::Or => *a || *b,
                _ => unreachable!(),
            })),
            _ => Err(RuntimeError::new(
                Code::RunArith,
                format!("{op} expects booleans, got {lhs} and {rhs}"),
            )),
        };
    }
    // Comparisons: both operands must share a type.
    if !comparable(lhs, rhs) {
        return Err(RuntimeError::new(
            Code::RunArith,
            format!("cannot compare {lhs} with {rhs}"),
        ));
    }
    let verdict = match op {
        BinOp::Eq => value_eq(lhs, rhs),
        BinOp::Ne => !value_eq(lhs, rhs),
        BinOp::Lt => value_cmp(lhs, rhs) == std::cmp::Ordering::Less,
        BinOp::Gt => value_cmp(lhs, rhs) == std::cmp::Ordering::Greater,
        BinOp::Le => value_cmp(lhs, rhs) != std::cmp::Ordering::Greater,
        BinOp::Ge => value_cmp(lhs, rhs) != std::cmp::Ordering::Less,
        _ => unreachable!(),
    };
    Ok(Value::Boolean(verdict))
}

fn comparable(a: &Value, b: &Value) -> bool {
    match (a.value_type(), b.value_type()) {
        (Ok(ta), Ok(tb)) => ta.join(&tb).is_some(),
        _ => false,
    }
}

/// Value equality as the `==` operator sees it: numeric across the
/// integer/float divide, structural everywhere else.
pub fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => as_f64(*x) == as_f64(*y),
        (Value::Boolean(x), Value::Boolean(y)) => x == y,
        (Value::Atom(x), Value::Atom(y)) => x == y,
        (Value::Pid(x), Value::Pid(y)) => x == y,
        (Value::EmptyList, Value::EmptyList) => true,
        (Value::Cons(h1, t1), Value::Cons(h2, t2)) => value_eq(h1, h2) && value_eq(t1, t2),
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| value_eq(x, y))
        }
        _ => false,
    }
}

/// Total order within one type: numbers numerically, booleans with
/// `false < true`, atoms lexicographically, pids by id, lists and tuples
/// element-wise. Only called on comparable values.
fn value_cmp(a: &Value, b: &Value) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => as_f64(*x)
            .partial_cmp(&as_f64(*y))
            .unwrap_or(Ordering::Equal),
        (Value::Boolean(x), Value::Boolean(y)) => x.cmp(y),
        (Value::Atom(x), Value::Atom(y)) => x.cmp(y),
        (Value::Pid(x), Value::Pid(y)) => x.cmp(y),
        (Value::EmptyList, Value::EmptyList) => Ordering::Equal,
        (Value::EmptyList, Value::Cons(..)) => Ordering::Less,
        (Value::Cons(..), Value::EmptyList) => Ordering::Greater,
        (Value::Cons(h1, t1), Value::Cons(h2, t2)) => {
            value_cmp(h1, h2).then_with(|| value_cmp(t1, t2))
        }
        (Value::Tuple(xs), Value::Tuple(ys)) => xs.len().cmp(&ys.len()).then_with(|| {
            xs.iter()
                .zip(ys)
                .map(|(x, y)| value_cmp(x, y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        }),
        _ => Ordering::Equal,
    }
}

// ---------------------------------------------------------------------------
// Term stepping
// ---------------------------------------------------------------------------

/// Descends the `let` spine to the receive the term is waiting on, if any.
/// A term with a receive at its redex position only steps under `Deliver`.
pub fn wants_delivery(t: &Term) -> Option<&[ReceiveBranch]> {
    match t {
        Term::Receive { branches } => Some(branches),
        Term::Let { bound, .. } => wants_delivery(bound),
        _ => None,
    }
}

/// One step of the term semantics.
pub fn step_term(sigma: &FunInfoEnv, term: &Term, stimulus: &Stimulus) -> StepOutcome {
    step_term_with(sigma, term, stimulus, None)
}

/// One step with optional fault injection (testing instrumentation).
pub fn step_term_with(
    sigma: &FunInfoEnv,
    term: &Term,
    stimulus: &Stimulus,
    fault: Option<FaultInjection>,
) -> StepOutcome {
    let outcome = step_inner(sigma, term, stimulus, fault);
    if fault.is_none() {
        // Closed terms stay closed across transitions.
        if let StepOutcome::Step(step) = &outcome {
            debug_assert!(
                !term.free_vars().is_empty() || step.next.free_vars().is_empty(),
                "step made a closed term open: {:?}",
                step.next.free_vars()
            );
        }
    }
    outcome
}

fn step_inner(
    sigma: &FunInfoEnv,
    term: &Term,
    stimulus: &Stimulus,
    fault: Option<FaultInjection>,
) -> StepOutcome {
    match term {
        Term::Expr(Expr::Val(v)) => match stimulus {
            Stimulus::Internal => StepOutcome::Done(v.clone()),
            Stimulus::Deliver { .. } => StepOutcome::Blocked,
        },
        Term::Expr(e) => match reduce_expr(e) {
            Ok(next) => StepOutcome::Step(StepResult {
                action: Action::Tau,
                next: Term::Expr(next),
            }),
            Err(e) => StepOutcome::RuntimeError(e),
        },
        Term::Let { var, bound, body } => {
            if let Some(v) = bound.as_value() {
                let mut subst = Subst::new();
                subst.bind(var.clone(), v.clone());
                let next = if fault == Some(FaultInjection::SkipLetSubstitution) {
                    body.as_ref().clone()
                } else {
                    body.substitute(&subst)
                };
                return StepOutcome::Step(StepResult {
                    action: Action::Tau,
                    next,
                });
            }
            match step_inner(sigma, bound, stimulus, fault) {
                StepOutcome::Step(step) => StepOutcome::Step(StepResult {
                    action: step.action,
                    next: Term::Let {
                        var: var.clone(),
                        bound: Box::new(step.next),
                        body: body.clone(),
                    },
                }),
                other => other,
            }
        }
        Term::Send { dest, label, args } => {
            if let Some(k) = args.iter().position(|e| !e.is_value()) {
                return match reduce_expr(&args[k]) {
                    Ok(e) => {
                        let mut next_args = args.clone();
                        next_args[k] = e;
                        StepOutcome::Step(StepResult {
                            action: Action::Tau,
                            next: Term::Send {
                                dest: dest.clone(),
                                label: label.clone(),
                                args: next_args,
                            },
                        })
                    }
                    Err(e) => StepOutcome::RuntimeError(e),
                };
            }
            let pid_value = match dest {
                Identifier::Var(x) => {
                    return StepOutcome::RuntimeError(RuntimeError::new(
                        Code::RunUnbound,
                        format!("send destination {x} is unbound"),
                    ))
                }
                Identifier::Val(v) => v.clone(),
            };
            if !matches!(pid_value, Value::Pid(_)) {
                return StepOutcome::RuntimeError(RuntimeError::new(
                    Code::RunBadPid,
                    format!("send destination {pid_value} is not a pid"),
                ));
            }
            let sent_label = if fault == Some(FaultInjection::SwapSendLabel) {
                Label::new(format!("mutated_{label}"))
            } else {
                label.clone()
            };
            let payload: Vec<Value> = args
                .iter()
                .map(|e| e.as_value().unwrap().clone())
                .collect();
            let mut tuple = vec![Value::Atom(sent_label.0.clone())];
            tuple.extend(payload.iter().cloned());
            StepOutcome::Step(StepResult {
                action: Action::Output {
                    dest: pid_value,
                    label: sent_label,
                    payload,
                },
                next: Term::Expr(Expr::Val(Value::Tuple(tuple))),
            })
        }
        Term::Receive { branches } => match stimulus {
            Stimulus::Internal => StepOutcome::Blocked,
            Stimulus::Deliver { label, payload } => {
                let branch = match branches.iter().find(|b| &b.label == label) {
                    Some(b) => b,
                    None => return StepOutcome::Blocked,
                };
                match match_patterns(&branch.patterns, payload) {
                    Some(subst) => StepOutcome::Step(StepResult {
                        action: Action::Input {
                            label: label.clone(),
                            payload: payload.clone(),
                        },
                        next: branch.body.substitute(&subst),
                    }),
                    // The message is not consumable by this branch; leave it
                    // queued and let the mailbox try another.
                    None => StepOutcome::Blocked,
                }
            }
        },
        Term::Call { fun, dest, args } => {
            if let Some(k) = args.iter().position(|e| !e.is_value()) {
                return match reduce_expr(&args[k]) {
                    Ok(e) => {
                        let mut next_args = args.clone();
                        next_args[k] = e;
                        StepOutcome::Step(StepResult {
                            action: Action::Tau,
                            next: Term::Call {
                                fun: fun.clone(),
                                dest: dest.clone(),
                                args: next_args,
                            },
                        })
                    }
                    Err(e) => StepOutcome::RuntimeError(e),
                };
            }
            let dest_value = match dest {
                Identifier::Var(x) => {
                    return StepOutcome::RuntimeError(RuntimeError::new(
                        Code::RunUnbound,
                        format!("call argument {x} is unbound"),
                    ))
                }
                Identifier::Val(v) => v.clone(),
            };
            let id = Term::call_id(fun, args);
            let info = match sigma.get(&id) {
                Some(info) => info,
                None => {
                    return StepOutcome::RuntimeError(RuntimeError::new(
                        Code::RunUnknownFun,
                        format!("no function {id}"),
                    ))
                }
            };
            let mut subst = Subst::new();
            subst.bind(info.dual.clone(), dest_value);
            for (p, a) in info.params.iter().zip(args) {
                subst.bind(p.clone(), a.as_value().unwrap().clone());
            }
            StepOutcome::Step(StepResult {
                action: Action::Call(id),
                next: info.body.substitute(&subst),
            })
        }
        Term::Case {
            scrutinee,
            branches,
        } => {
            if !scrutinee.is_value() {
                return match reduce_expr(scrutinee) {
                    Ok(e) => StepOutcome::Step(StepResult {
                        action: Action::Tau,
                        next: Term::Case {
                            scrutinee: e,
                            branches: branches.clone(),
                        },
                    }),
                    Err(e) => StepOutcome::RuntimeError(e),
                };
            }
            let v = scrutinee.as_value().unwrap();
            for b in branches {
                if let Some(subst) = match_pattern(&b.pattern, v) {
                    return StepOutcome::Step(StepResult {
                        action: Action::Tau,
                        next: b.body.substitute(&subst),
                    });
                }
            }
            StepOutcome::RuntimeError(RuntimeError::new(
                Code::RunMatch,
                format!("no case branch matches {v}"),
            ))
        }
    }
}

/// Removes the last branch of the first receive with more than one branch,
/// anywhere in the term. Fault-injection helper for the mutation suite.
pub fn drop_one_receive_branch(term: &Term) -> Term {
    fn walk(t: &Term, done: &mut bool) -> Term {
        if *done {
            return t.clone();
        }
        match t {
            Term::Receive { branches } if branches.len() > 1 => {
                *done = true;
                Term::Receive {
                    branches: branches[..branches.len() - 1].to_vec(),
                }
            }
            Term::Receive { branches } => Term::Receive {
                branches: branches
                    .iter()
                    .map(|b| ReceiveBranch {
                        label: b.label.clone(),
                        patterns: b.patterns.clone(),
                        body: walk(&b.body, done),
                    })
                    .collect(),
            },
            Term::Let { var, bound, body } => {
                let bound = walk(bound, done);
                let body = walk(body, done);
                Term::Let {
                    var: var.clone(),
                    bound: Box::new(bound),
                    body: Box::new(body),
                }
            }
            Term::Case {
                scrutinee,
                branches,
            } => Term::Case {
                scrutinee: scrutinee.clone(),
                branches: branches
                    .iter()
                    .map(|b| crate::ast::CaseBranch {
                        pattern: b.pattern.clone(),
                        body: walk(&b.body, done),
                    })
                    .collect(),
            },
            other => other.clone(),
        }
    }
    let mut done = false;
    walk(term, &mut done)
}

// ---------------------------------------------------------------------------
// Single-process driver
// ---------------------------------------------------------------------------

/// Terminal state of a bounded run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Done(Value),
    Blocked,
    RuntimeError(RuntimeError),
    FuelExhausted,
}

/// Runs a term for at most `fuel` steps, zipping the stimulus stream with
/// the steps (one stimulus per step, `Internal` once exhausted). Returns
/// the trace of actions in order.
pub fn run_term(
    sigma: &FunInfoEnv,
    term: &Term,
    stimuli: impl IntoIterator<Item = Stimulus>,
    fuel: usize,
) -> (Vec<Action>, RunOutcome) {
    let mut trace = Vec::new();
    let mut current = term.clone();
    let mut stream = stimuli.into_iter();
    for _ in 0..fuel {
        if let Some(v) = current.as_value() {
            return (trace, RunOutcome::Done(v.clone()));
        }
        let stimulus = stream.next().unwrap_or(Stimulus::Internal);
        match step_term(sigma, &current, &stimulus) {
            StepOutcome::Step(step) => {
                trace.push(step.action);
                current = step.next;
            }
            StepOutcome::Done(v) => return (trace, RunOutcome::Done(v)),
            StepOutcome::Blocked => return (trace, RunOutcome::Blocked),
            StepOutcome::RuntimeError(e) => return (trace, RunOutcome::RuntimeError(e)),
        }
    }
    if let Some(v) = current.as_value() {
        return (trace, RunOutcome::Done(v.clone()));
    }
    (trace, RunOutcome::FuelExhausted)
}
