//! The behavioural typechecker.
//!
//! A term is checked against an initial session type and yields the type of
//! the value it produces together with the residual session type — the part
//! of the protocol still outstanding. Module checking requires every public
//! function body to consume its ascribed session completely: the residual
//! must be `end`.
//!
//! Sends are only accepted towards the dual pid, receives must cover the
//! session's branch set exactly, and calls either compare against a known
//! session binding or descend into the callee body once, binding the callee
//! so its own recursive calls compare instead of descending again.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::ast::{
    Expr, ExprType, FunDef, FunId, IdPattern, Identifier, Module, Pattern, ProcessId, SessionType,
    Term, Value, ValueType, VarName, Visibility,
};
use crate::diag::{Code, Diagnostic, Span};
use crate::session::{session_equal, unfold, SessionEnv};

/// Variable binding environment Γ. Types may still be open in their list
/// element positions (the type of `[]`).
pub type VarEnv = BTreeMap<VarName, ValueType>;

/// Everything the checker and the interpreter need to know about one
/// function definition.
#[derive(Debug, Clone, PartialEq)]
pub struct FunInfo {
    pub params: Vec<VarName>,
    pub param_types: Vec<ExprType>,
    pub body: Term,
    pub return_type: ExprType,
    pub dual: VarName,
    pub span: Span,
}

/// Function information environment Σ.
pub type FunInfoEnv = BTreeMap<FunId, FunInfo>;

/// The dual-pid position of the typing judgement: a variable while checking
/// source functions, the actual pid value when re-checking instantiated
/// (closed) terms at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DualPid {
    Var(VarName),
    Pid(ProcessId),
}

impl DualPid {
    fn matches(&self, id: &Identifier) -> bool {
        match (self, id) {
            (DualPid::Var(y), Identifier::Var(x)) => y == x,
            (DualPid::Pid(p), Identifier::Val(Value::Pid(q))) => p == q,
            _ => false,
        }
    }

    fn shadowed_by(&self, x: &VarName) -> bool {
        matches!(self, DualPid::Var(y) if y == x)
    }
}

impl std::fmt::Display for DualPid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DualPid::Var(y) => write!(f, "{y}"),
            DualPid::Pid(p) => write!(f, "{p}"),
        }
    }
}

/// Result of term typing: value type and residual session.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeVerdict {
    pub ty: ValueType,
    pub residual: SessionType,
}

// ---------------------------------------------------------------------------
// Module-level helpers
// ---------------------------------------------------------------------------

/// Builds Σ: one entry per definition, public and private.
pub fn build_details(defs: &[FunDef]) -> FunInfoEnv {
    defs.iter()
        .map(|d| {
            (
                d.id.clone(),
                FunInfo {
                    params: d.params.clone(),
                    param_types: d.param_types.clone(),
                    body: d.body.clone(),
                    return_type: d.return_type.clone(),
                    dual: d.dual_param.clone(),
                    span: d.span,
                },
            )
        })
        .collect()
}

/// Builds Δ: public functions mapped to their ascribed session types.
/// `@dual` annotations already hold the computed dual.
pub fn build_sessions(defs: &[FunDef]) -> SessionEnv {
    defs.iter()
        .filter(|d| d.visibility == Visibility::Public)
        .filter_map(|d| {
            d.session
                .as_ref()
                .map(|ann| (d.id.clone(), ann.session().clone()))
        })
        .collect()
}

/// The set of public function identifiers to be checked.
pub fn build_functions(defs: &[FunDef]) -> Vec<FunId> {
    defs.iter()
        .filter(|d| d.visibility == Visibility::Public)
        .map(|d| d.id.clone())
        .collect()
}

/// Checks every public function of a module against its session type.
/// Collects one diagnostic per failing function.
pub fn check_module(module: &Module) -> Result<(), Vec<Diagnostic>> {
    let sigma = build_details(&module.defs);
    let delta = build_sessions(&module.defs);
    let mut problems = Vec::new();

    for def in &module.defs {
        if def.visibility != Visibility::Public {
            continue;
        }
        let session = match delta.get(&def.id) {
            Some(s) => s.clone(),
            None => continue, // parser guarantees an annotation; nothing to check against
        };
        let mut gamma = VarEnv::new();
        gamma.insert(def.dual_param.clone(), ValueType::Pid);
        for (p, t) in def.params.iter().zip(&def.param_types) {
            gamma.insert(p.clone(), ValueType::from(t));
        }
        let mut checker = Checker::new(&sigma);
        checker.span_stack.push(def.span);
        let result = checker.term(
            &delta,
            &gamma,
            &DualPid::Var(def.dual_param.clone()),
            &session,
            &def.body,
        );
        match result {
            Err(d) => problems.push(d),
            Ok(v) => {
                if !v.ty.fits(&def.return_type) {
                    problems.push(
                        Diagnostic::error(
                            Code::TypeReturn,
                            def.span,
                            format!(
                                "body of {} has type {} but @spec declares {}",
                                def.id, v.ty, def.return_type
                            ),
                        )
                        .with_rule("module"),
                    );
                } else if !session_equal(&v.residual, &SessionType::End) {
                    problems.push(
                        Diagnostic::error(
                            Code::TypeResidual,
                            def.span,
                            format!(
                                "{} does not fully consume its session; residual: {}",
                                def.id, v.residual
                            ),
                        )
                        .with_rule("module"),
                    );
                }
            }
        }
    }

    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

/// Checks a single term. Convenience wrapper over [`Checker`].
pub fn check_term(
    delta: &SessionEnv,
    gamma: &VarEnv,
    sigma: &FunInfoEnv,
    who: &DualPid,
    session: &SessionType,
    term: &Term,
) -> Result<TypeVerdict, Diagnostic> {
    Checker::new(sigma).term(delta, gamma, who, session, term)
}

/// Infers the type of an expression under Γ.
pub fn check_expr(gamma: &VarEnv, expr: &Expr) -> Result<ValueType, Diagnostic> {
    infer_expr(gamma, expr, Span::start())
}

/// Types a pattern against an expected type, returning the bindings it
/// introduces. The dual pid may not be shadowed.
pub fn check_pattern(
    who: &DualPid,
    pattern: &Pattern,
    expected: &ValueType,
) -> Result<VarEnv, Diagnostic> {
    let bindings = pattern_bindings(who, pattern, expected, Span::start())?;
    let mut env = VarEnv::new();
    for (x, t) in bindings {
        if env.insert(x.clone(), t).is_some() {
            return Err(Diagnostic::error(
                Code::TypeDupVar,
                Span::start(),
                format!("variable {x} bound twice in one pattern"),
            )
            .with_rule("pattern"));
        }
    }
    Ok(env)
}

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

type MemoKey = (FunId, SessionType, Vec<(FunId, SessionType)>);

/// Stateful checker: carries Σ, a memo for unknown-call body checks and a
/// guard against descending into the same body twice.
pub struct Checker<'a> {
    sigma: &'a FunInfoEnv,
    memo: HashMap<MemoKey, Result<TypeVerdict, Diagnostic>>,
    in_flight: HashSet<(FunId, SessionType)>,
    depth: usize,
    span_stack: Vec<Span>,
    /// Fault injection for the fidelity mutation suite: skip the session
    /// binding when descending into an unknown-call body.
    omit_call_binding: bool,
}

const MAX_CALL_DEPTH: usize = 128;

impl<'a> Checker<'a> {
    pub fn new(sigma: &'a FunInfoEnv) -> Self {
        Checker {
            sigma,
            memo: HashMap::new(),
            in_flight: HashSet::new(),
            depth: 0,
            span_stack: Vec::new(),
            omit_call_binding: false,
        }
    }

    /// Testing instrumentation: make the checker forget to bind callees
    /// before checking their bodies.
    pub fn with_omitted_call_binding(sigma: &'a FunInfoEnv) -> Self {
        let mut c = Checker::new(sigma);
        c.omit_call_binding = true;
        c
    }

    fn span(&self) -> Span {
        self.span_stack.last().copied().unwrap_or_else(Span::start)
    }

    fn fail(&self, code: Code, rule: &'static str, msg: String) -> Diagnostic {
        Diagnostic::error(code, self.span(), msg).with_rule(rule)
    }

    /// Checks a term against a session type. Syntax-directed: exactly one
    /// rule applies per constructor.
    pub fn term(
        &mut self,
        delta: &SessionEnv,
        gamma: &VarEnv,
        who: &DualPid,
        session: &SessionType,
        term: &Term,
    ) -> Result<TypeVerdict, Diagnostic> {
        match term {
            Term::Expr(e) => {
                let ty = infer_expr(gamma, e, self.span())?;
                Ok(TypeVerdict {
                    ty,
                    residual: session.clone(),
                })
            }
            Term::Let { var, bound, body } => {
                if who.shadowed_by(var) {
                    return Err(self.fail(
                        Code::TypeShadow,
                        "let",
                        format!("let binder {var} shadows the dual pid"),
                    ));
                }
                let first = self.term(delta, gamma, who, session, bound)?;
                let mut inner = gamma.clone();
                if !var.is_wildcard() {
                    if inner.contains_key(var) {
                        return Err(self.fail(
                            Code::TypeRebind,
                            "let",
                            format!("{var} is already bound; rebinding is not supported"),
                        ));
                    }
                    inner.insert(var.clone(), first.ty);
                }
                self.term(delta, &inner, who, &first.residual, body)
            }
            Term::Send { dest, label, args } => {
                let opts = match unfold(session) {
                    SessionType::Choice(opts) => opts,
                    other => {
                        return Err(self.fail(
                            Code::TypeChoice,
                            "choice",
                            format!("session {other} does not permit sending"),
                        ))
                    }
                };
                let opt = opts.iter().find(|o| &o.label == label).ok_or_else(|| {
                    let offered = opts
                        .iter()
                        .map(|o| format!(":{}", o.label))
                        .collect::<Vec<_>>()
                        .join(", ");
                    self.fail(
                        Code::TypeChoice,
                        "choice",
                        format!("label :{label} not offered by the session; offered: {offered}"),
                    )
                })?;
                if !who.matches(dest) {
                    return Err(self.fail(
                        Code::TypeAddressee,
                        "choice",
                        format!("wrong addressee: messages go to the dual pid {who}, not {dest}"),
                    ));
                }
                if args.len() != opt.payloads.len() {
                    return Err(self.fail(
                        Code::TypePayload,
                        "choice",
                        format!(
                            ":{label} carries {} payload(s) but {} were sent",
                            opt.payloads.len(),
                            args.len()
                        ),
                    ));
                }
                for (arg, expected) in args.iter().zip(&opt.payloads) {
                    let ty = infer_expr(gamma, arg, self.span())?;
                    if !ty.fits(expected) {
                        return Err(self.fail(
                            Code::TypePayload,
                            "choice",
                            format!(
                                "payload of :{label} has type {ty} but the session expects {expected}"
                            ),
                        ));
                    }
                }
                let mut elems = vec![ValueType::Atom];
                elems.extend(opt.payloads.iter().map(ValueType::from));
                Ok(TypeVerdict {
                    ty: ValueType::Tuple(elems),
                    residual: opt.cont.clone(),
                })
            }
            Term::Receive { branches } => {
                let opts = match unfold(session) {
                    SessionType::Branch(opts) => opts,
                    other => {
                        return Err(self.fail(
                            Code::TypeBranch,
                            "branch",
                            format!("session {other} does not permit receiving"),
                        ))
                    }
                };
                for b in branches {
                    if !opts.iter().any(|o| o.label == b.label) {
                        return Err(self.fail(
                            Code::TypeBranch,
                            "branch",
                            format!("receive branch :{} is not part of the session", b.label),
                        ));
                    }
                }
                let mut verdicts: Vec<TypeVerdict> = Vec::new();
                for opt in &opts {
                    let branch = branches.iter().find(|b| b.label == opt.label).ok_or_else(
                        || {
                            self.fail(
                                Code::TypeBranch,
                                "branch",
                                format!("receive is missing a branch for :{}", opt.label),
                            )
                        },
                    )?;
                    if branch.patterns.len() != opt.payloads.len() {
                        return Err(self.fail(
                            Code::TypePayload,
                            "branch",
                            format!(
                                "branch :{} has {} pattern(s) but the session payload has {}",
                                opt.label,
                                branch.patterns.len(),
                                opt.payloads.len()
                            ),
                        ));
                    }
                    let mut inner = gamma.clone();
                    let mut bound_here: Vec<VarName> = Vec::new();
                    for (p, t) in branch.patterns.iter().zip(&opt.payloads) {
                        let bindings =
                            pattern_bindings(who, p, &ValueType::from(t), self.span())?;
                        for (x, ty) in bindings {
                            if bound_here.contains(&x) {
                                return Err(self.fail(
                                    Code::TypeDupVar,
                                    "branch",
                                    format!("variable {x} bound twice in branch :{}", opt.label),
                                ));
                            }
                            if inner.contains_key(&x) {
                                return Err(self.fail(
                                    Code::TypeRebind,
                                    "branch",
                                    format!("{x} is already bound; rebinding is not supported"),
                                ));
                            }
                            bound_here.push(x.clone());
                            inner.insert(x, ty);
                        }
                    }
                    verdicts.push(self.term(delta, &inner, who, &opt.cont, &branch.body)?);
                }
                self.join_verdicts(verdicts, "branch")
            }
            Term::Call { fun, dest, args } => {
                let id = Term::call_id(fun, args);
                if !who.matches(dest) {
                    return Err(self.fail(
                        Code::TypeAddressee,
                        "known-call",
                        format!("call to {id} must pass the dual pid {who}, not {dest}"),
                    ));
                }
                let sigma = self.sigma;
                let info = match sigma.get(&id) {
                    Some(info) => info,
                    None => {
                        let code = if sigma.keys().any(|k| k.name == id.name) {
                            Code::TypeArity
                        } else {
                            Code::TypeUnknownFun
                        };
                        return Err(self.fail(
                            code,
                            "known-call",
                            format!("no function {id} in this module"),
                        ));
                    }
                };
                for (arg, expected) in args.iter().zip(&info.param_types) {
                    let ty = infer_expr(gamma, arg, self.span())?;
                    if !ty.fits(expected) {
                        return Err(self.fail(
                            Code::TypePayload,
                            "known-call",
                            format!(
                                "argument of {id} has type {ty} but the @spec declares {expected}"
                            ),
                        ));
                    }
                }
                if let Some(known) = delta.get(&id) {
                    // Known session: the call site must be at an equivalent
                    // point of the protocol; module checking guarantees the
                    // callee consumes it fully.
                    if !session_equal(session, known) {
                        return Err(self.fail(
                            Code::TypeCall,
                            "known-call",
                            format!(
                                "call to {id} requires session {known} but the current session is {session}"
                            ),
                        ));
                    }
                    Ok(TypeVerdict {
                        ty: ValueType::from(&info.return_type),
                        residual: SessionType::End,
                    })
                } else {
                    self.unknown_call(delta, &id, info, session)
                }
            }
            Term::Case {
                scrutinee,
                branches,
            } => {
                let scrutinee_ty = infer_expr(gamma, scrutinee, self.span())?;
                let mut verdicts = Vec::new();
                for b in branches {
                    let bindings =
                        pattern_bindings(who, &b.pattern, &scrutinee_ty, self.span())?;
                    let mut inner = gamma.clone();
                    let mut bound_here: Vec<VarName> = Vec::new();
                    for (x, ty) in bindings {
                        if bound_here.contains(&x) {
                            return Err(self.fail(
                                Code::TypeDupVar,
                                "case",
                                format!("variable {x} bound twice in one pattern"),
                            ));
                        }
                        if inner.contains_key(&x) {
                            return Err(self.fail(
                                Code::TypeRebind,
                                "case",
                                format!("{x} is already bound; rebinding is not supported"),
                            ));
                        }
                        bound_here.push(x.clone());
                        inner.insert(x, ty);
                    }
                    verdicts.push(self.term(delta, &inner, who, session, &b.body)?);
                }
                self.join_verdicts(verdicts, "case")
            }
        }
    }

    /// Call to a function with no session binding: check its body under the
    /// session in force at the call, with the callee bound so recursive
    /// calls compare against it instead of descending again.
    fn unknown_call(
        &mut self,
        delta: &SessionEnv,
        id: &FunId,
        info: &FunInfo,
        session: &SessionType,
    ) -> Result<TypeVerdict, Diagnostic> {
        let mut inner_delta = delta.clone();
        if !self.omit_call_binding {
            inner_delta.insert(id.clone(), session.clone());
        }
        let memo_key: MemoKey = (
            id.clone(),
            session.clone(),
            inner_delta
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        );
        if let Some(cached) = self.memo.get(&memo_key) {
            return cached.clone();
        }

        let flight_key = (id.clone(), session.clone());
        if !self.in_flight.insert(flight_key.clone()) {
            return Err(self.fail(
                Code::TypeRecursion,
                "unknown-call",
                format!("{id} recurses without a session binding for it"),
            ));
        }
        self.depth += 1;
        let result = if self.depth > MAX_CALL_DEPTH {
            Err(self.fail(
                Code::TypeRecursion,
                "unknown-call",
                format!("call nesting exceeds {MAX_CALL_DEPTH} while checking {id}"),
            ))
        } else {
            let mut body_gamma = VarEnv::new();
            body_gamma.insert(info.dual.clone(), ValueType::Pid);
            for (p, t) in info.params.iter().zip(&info.param_types) {
                body_gamma.insert(p.clone(), ValueType::from(t));
            }
            self.span_stack.push(info.span);
            let verdict = self.term(
                &inner_delta,
                &body_gamma,
                &DualPid::Var(info.dual.clone()),
                session,
                &info.body,
            );
            self.span_stack.pop();
            verdict.and_then(|v| {
                if !v.ty.fits(&info.return_type) {
                    Err(self.fail(
                        Code::TypeReturn,
                        "unknown-call",
                        format!(
                            "body of {id} has type {} but @spec declares {}",
                            v.ty, info.return_type
                        ),
                    ))
                } else {
                    Ok(TypeVerdict {
                        ty: ValueType::from(&info.return_type),
                        residual: v.residual,
                    })
                }
            })
        };
        self.depth -= 1;
        self.in_flight.remove(&flight_key);
        self.memo.insert(memo_key, result.clone());
        result
    }

    /// Branches must agree on one value type and one residual session.
    fn join_verdicts(
        &self,
        verdicts: Vec<TypeVerdict>,
        rule: &'static str,
    ) -> Result<TypeVerdict, Diagnostic> {
        let mut iter = verdicts.into_iter();
        let first = iter.next().expect("at least one branch");
        let mut ty = first.ty;
        for v in iter {
            ty = ty.join(&v.ty).ok_or_else(|| {
                self.fail(
                    Code::TypeJoin,
                    rule,
                    format!("branches produce incompatible types {ty} and {}", v.ty),
                )
            })?;
            if !session_equal(&v.residual, &first.residual) {
                return Err(self.fail(
                    Code::TypeJoin,
                    rule,
                    format!(
                        "branches leave different residual sessions: {} and {}",
                        first.residual, v.residual
                    ),
                ));
            }
        }
        Ok(TypeVerdict {
            ty,
            residual: first.residual,
        })
    }
}

// ---------------------------------------------------------------------------
// Expression typing
// ---------------------------------------------------------------------------

fn infer_expr(gamma: &VarEnv, expr: &Expr, span: Span) -> Result<ValueType, Diagnostic> {
    let fail = |code: Code, msg: String| Diagnostic::error(code, span, msg).with_rule("expression");
    match expr {
        Expr::Val(v) => v
            .value_type()
            .map_err(|e| fail(Code::TypeExpr, e.to_string())),
        Expr::Var(x) => gamma
            .get(x)
            .cloned()
            .ok_or_else(|| fail(Code::TypeVar, format!("unbound variable {x}"))),
        Expr::Not(inner) => {
            let t = infer_expr(gamma, inner, span)?;
            if t == ValueType::Boolean {
                Ok(ValueType::Boolean)
            } else {
                Err(fail(Code::TypeExpr, format!("not expects a boolean, got {t}")))
            }
        }
        Expr::BinOp(op, lhs, rhs) => {
            let lt = infer_expr(gamma, lhs, span)?;
            let rt = infer_expr(gamma, rhs, span)?;
            if op.is_arithmetic() {
                if lt == ValueType::Number && rt == ValueType::Number {
                    Ok(ValueType::Number)
                } else {
                    Err(fail(
                        Code::TypeExpr,
                        format!("{op} expects numbers, got {lt} and {rt}"),
                    ))
                }
            } else if op.is_boolean() {
                if lt == ValueType::Boolean && rt == ValueType::Boolean {
                    Ok(ValueType::Boolean)
                } else {
                    Err(fail(
                        Code::TypeExpr,
                        format!("{op} expects booleans, got {lt} and {rt}"),
                    ))
                }
            } else {
                // Comparisons require both operands to share one type.
                if lt.join(&rt).is_some() {
                    Ok(ValueType::Boolean)
                } else {
                    Err(fail(
                        Code::TypeExpr,
                        format!("{op} compares values of one type, got {lt} and {rt}"),
                    ))
                }
            }
        }
        Expr::Cons(head, tail) => {
            let ht = infer_expr(gamma, head, span)?;
            let tt = infer_expr(gamma, tail, span)?;
            match tt {
                ValueType::EmptyList => Ok(ValueType::List(Box::new(ht))),
                ValueType::List(elem) => {
                    let joined = ht.join(&elem).ok_or_else(|| {
                        fail(
                            Code::TypeExpr,
                            format!("list elements must share one type; head is {ht}, tail holds {elem}"),
                        )
                    })?;
                    Ok(ValueType::List(Box::new(joined)))
                }
                other => Err(fail(
                    Code::TypeExpr,
                    format!("cons tail must be a list, got {other}"),
                )),
            }
        }
        Expr::Tuple(es) => {
            let elems = es
                .iter()
                .map(|e| infer_expr(gamma, e, span))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ValueType::Tuple(elems))
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern typing
// ---------------------------------------------------------------------------

fn pattern_bindings(
    who: &DualPid,
    pattern: &Pattern,
    expected: &ValueType,
    span: Span,
) -> Result<Vec<(VarName, ValueType)>, Diagnostic> {
    let fail = |code: Code, msg: String| Diagnostic::error(code, span, msg).with_rule("pattern");
    match pattern {
        Pattern::Literal(v) => literal_fits(v, expected)
            .then_some(Vec::new())
            .ok_or_else(|| {
                fail(
                    Code::TypePattern,
                    format!("literal {v} cannot match a value of type {expected}"),
                )
            }),
        Pattern::Var(x) => bind_var(who, x, expected.clone(), span),
        Pattern::Cons(head, tail) => {
            let elem = match expected {
                ValueType::List(e) => e.as_ref().clone(),
                other => {
                    return Err(fail(
                        Code::TypePattern,
                        format!("list pattern cannot match a value of type {other}"),
                    ))
                }
            };
            let mut out = id_pattern_bindings(who, head, &elem, span)?;
            out.extend(id_pattern_bindings(
                who,
                tail,
                &ValueType::List(Box::new(elem)),
                span,
            )?);
            Ok(out)
        }
        Pattern::Tuple(ws) => {
            let elems = match expected {
                ValueType::Tuple(ts) if ts.len() == ws.len() => ts,
                other => {
                    return Err(fail(
                        Code::TypePattern,
                        format!(
                            "tuple pattern of {} element(s) cannot match a value of type {other}",
                            ws.len()
                        ),
                    ))
                }
            };
            let mut out = Vec::new();
            for (w, t) in ws.iter().zip(elems) {
                out.extend(id_pattern_bindings(who, w, t, span)?);
            }
            Ok(out)
        }
    }
}

fn id_pattern_bindings(
    who: &DualPid,
    w: &IdPattern,
    expected: &ValueType,
    span: Span,
) -> Result<Vec<(VarName, ValueType)>, Diagnostic> {
    match w {
        IdPattern::Literal(v) => literal_fits(v, expected)
            .then_some(Vec::new())
            .ok_or_else(|| {
                Diagnostic::error(
                    Code::TypePattern,
                    span,
                    format!("literal {v} cannot match a value of type {expected}"),
                )
                .with_rule("pattern")
            }),
        IdPattern::Var(x) => bind_var(who, x, expected.clone(), span),
    }
}

fn bind_var(
    who: &DualPid,
    x: &VarName,
    ty: ValueType,
    span: Span,
) -> Result<Vec<(VarName, ValueType)>, Diagnostic> {
    if who.shadowed_by(x) {
        return Err(Diagnostic::error(
            Code::TypeShadow,
            span,
            format!("pattern variable {x} shadows the dual pid"),
        )
        .with_rule("pattern"));
    }
    if x.is_wildcard() {
        Ok(Vec::new())
    } else {
        Ok(vec![(x.clone(), ty)])
    }
}

fn literal_fits(v: &Value, expected: &ValueType) -> bool {
    match v.value_type() {
        Ok(t) => t.join(expected).is_some(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BinOp, Label};
    use crate::parser::{parse_module, parse_session_type, SourceFile};

    fn var(name: &str) -> VarName {
        VarName::new(name)
    }

    fn module(src: &str) -> Module {
        parse_module(&SourceFile::new("test.exst", src)).expect("parse")
    }

    const PINGER: &str = r#"
defmodule Pinger do
  @session "X = !ping().?pong().X"
  @spec pinger(pid) :: atom
  def pinger(pid) do
    x = send(pid, {:ping})
    receive do
      {:pong} ->
        :ok
    end
    pinger(pid)
  end
end
"#;

    #[test]
    fn pinger_module_typechecks() {
        assert_eq!(check_module(&module(PINGER)), Ok(()));
    }

    #[test]
    fn wrong_label_fails_at_the_choice() {
        let src = PINGER.replace("{:ping}", "{:pong}");
        let errs = check_module(&module(&src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeChoice);
        assert_eq!(errs[0].rule, Some("choice"));
    }

    #[test]
    fn unconsumed_session_is_an_error() {
        let src = r#"
defmodule M do
  @session "!ping().?pong()"
  @spec f(pid) :: {atom}
  def f(pid) do
    send(pid, {:ping})
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeResidual);
    }

    #[test]
    fn send_to_non_dual_variable_is_rejected() {
        let src = r#"
defmodule M do
  @session "!ping()"
  @spec f(pid, pid) :: {atom}
  def f(pid, other) do
    send(other, {:ping})
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeAddressee);
    }

    #[test]
    fn expression_rules() {
        let gamma = VarEnv::new();
        // 1 + 2 : number
        let e = Expr::BinOp(
            BinOp::Add,
            Box::new(Expr::Val(Value::int(1))),
            Box::new(Expr::Val(Value::int(2))),
        );
        assert_eq!(check_expr(&gamma, &e), Ok(ValueType::Number));

        // x < 3 : boolean under {x: number}
        let mut gamma = VarEnv::new();
        gamma.insert(var("x"), ValueType::Number);
        let e = Expr::BinOp(
            BinOp::Lt,
            Box::new(Expr::Var(var("x"))),
            Box::new(Expr::Val(Value::int(3))),
        );
        assert_eq!(check_expr(&gamma, &e), Ok(ValueType::Boolean));

        // not 5 is ill-typed.
        let e = Expr::Not(Box::new(Expr::Val(Value::int(5))));
        assert_eq!(check_expr(&gamma, &e).unwrap_err().code, Code::TypeExpr);

        // Comparisons need one shared type.
        let e = Expr::BinOp(
            BinOp::Eq,
            Box::new(Expr::Val(Value::int(1))),
            Box::new(Expr::Val(Value::Boolean(true))),
        );
        assert!(check_expr(&gamma, &e).is_err());

        // [] unifies with concrete lists in cons position.
        let e = Expr::Cons(
            Box::new(Expr::Val(Value::int(1))),
            Box::new(Expr::Val(Value::EmptyList)),
        );
        assert_eq!(
            check_expr(&gamma, &e),
            Ok(ValueType::List(Box::new(ValueType::Number)))
        );
    }

    #[test]
    fn pattern_rules() {
        let who = DualPid::Var(var("y"));
        // {x, 2, z} against {number, number, boolean} binds x and z.
        let p = Pattern::Tuple(vec![
            IdPattern::Var(var("x")),
            IdPattern::Literal(Value::int(2)),
            IdPattern::Var(var("z")),
        ]);
        let t = ValueType::Tuple(vec![
            ValueType::Number,
            ValueType::Number,
            ValueType::Boolean,
        ]);
        let env = check_pattern(&who, &p, &t).unwrap();
        assert_eq!(env.get(&var("x")), Some(&ValueType::Number));
        assert_eq!(env.get(&var("z")), Some(&ValueType::Boolean));
        assert_eq!(env.len(), 2);

        // The dual pid is unshadowable.
        let p = Pattern::Var(var("y"));
        assert_eq!(
            check_pattern(&who, &p, &ValueType::Pid).unwrap_err().code,
            Code::TypeShadow
        );

        // [] against [number] binds nothing.
        let p = Pattern::Literal(Value::EmptyList);
        let t = ValueType::List(Box::new(ValueType::Number));
        assert_eq!(check_pattern(&who, &p, &t), Ok(VarEnv::new()));

        // Literal type mismatch.
        let p = Pattern::Literal(Value::Boolean(true));
        assert_eq!(
            check_pattern(&who, &p, &ValueType::Number)
                .unwrap_err()
                .code,
            Code::TypePattern
        );
    }

    #[test]
    fn expression_term_leaves_session_unchanged() {
        let m = module(PINGER);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let s = parse_session_type("end").unwrap();
        let verdict = check_term(
            &delta,
            &VarEnv::new(),
            &sigma,
            &DualPid::Var(var("y")),
            &s,
            &Term::Expr(Expr::Val(Value::int(42))),
        )
        .unwrap();
        assert_eq!(verdict.ty, ValueType::Number);
        assert_eq!(verdict.residual, SessionType::End);
    }

    #[test]
    fn session_env_helpers() {
        let m = module(PINGER);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let funs = build_functions(&m.defs);
        let id = FunId::new("pinger", 1);
        assert_eq!(funs, vec![id.clone()]);
        assert!(sigma.contains_key(&id));
        let expected = parse_session_type("X = !ping().?pong().X").unwrap();
        assert!(session_equal(delta.get(&id).unwrap(), &expected));
        let info = sigma.get(&id).unwrap();
        assert_eq!(info.dual, var("pid"));
        assert!(info.params.is_empty());
        assert_eq!(info.return_type, ExprType::Atom);
    }

    #[test]
    fn each_failing_function_gets_its_own_diagnostic() {
        let src = r#"
defmodule M do
  @session "!a()"
  @spec f(pid) :: {atom}
  def f(pid) do
    send(pid, {:wrong})
  end

  @session "!b().!c()"
  @spec g(pid) :: {atom}
  def g(pid) do
    send(pid, {:b})
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].code, Code::TypeChoice);
        assert_eq!(errs[1].code, Code::TypeResidual);
    }

    #[test]
    fn env_helpers_cover_private_and_empty_modules() {
        let empty = module("defmodule M do end");
        assert!(build_details(&empty.defs).is_empty());
        assert!(build_sessions(&empty.defs).is_empty());
        assert!(build_functions(&empty.defs).is_empty());

        let src = r#"
defmodule M do
  @session "end"
  @spec f(pid, number) :: atom
  def f(pid, n) do
    :ok
  end

  @spec g(pid) :: atom
  defp g(pid) do
    :ok
  end
end
"#;
        let m = module(src);
        // Sigma holds both public and private definitions; Delta and the
        // function set hold only the public ones.
        let sigma = build_details(&m.defs);
        assert!(sigma.contains_key(&FunId::new("f", 2)));
        assert!(sigma.contains_key(&FunId::new("g", 1)));
        let delta = build_sessions(&m.defs);
        assert_eq!(delta.len(), 1);
        assert!(delta.contains_key(&FunId::new("f", 2)));
        assert_eq!(build_functions(&m.defs), vec![FunId::new("f", 2)]);
    }

    #[test]
    fn pinger_body_checks_under_empty_gamma() {
        // The pinger body never uses the dual pid as a data expression, so
        // it checks with an empty variable environment and the variable
        // judgement identifier.
        let m = module(PINGER);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let id = FunId::new("pinger", 1);
        let verdict = check_term(
            &delta,
            &VarEnv::new(),
            &sigma,
            &DualPid::Var(var("pid")),
            delta.get(&id).unwrap(),
            &sigma.get(&id).unwrap().body,
        )
        .unwrap();
        assert_eq!(verdict.ty, ValueType::Atom);
        assert!(session_equal(&verdict.residual, &SessionType::End));
    }

    #[test]
    fn private_helper_checks_through_unknown_call() {
        let src = r#"
defmodule Counter do
  @session "X = &{?inc().X, ?stop()}"
  @spec server(pid) :: atom
  def server(pid) do
    loop(pid)
  end

  @spec loop(pid) :: atom
  defp loop(pid) do
    receive do
      {:inc} ->
        loop(pid)
      {:stop} ->
        :stopped
    end
  end
end
"#;
        assert_eq!(check_module(&module(src)), Ok(()));
    }

    #[test]
    fn omitted_call_binding_is_caught_by_the_recursion_guard() {
        let src = r#"
defmodule Counter do
  @session "X = &{?inc().X, ?stop()}"
  @spec server(pid) :: atom
  def server(pid) do
    loop(pid)
  end

  @spec loop(pid) :: atom
  defp loop(pid) do
    receive do
      {:inc} ->
        loop(pid)
      {:stop} ->
        :stopped
    end
  end
end
"#;
        let m = module(src);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let session = parse_session_type("X = &{?inc().X, ?stop()}").unwrap();
        let mut gamma = VarEnv::new();
        gamma.insert(var("pid"), ValueType::Pid);
        let body = &m.defs[0].body;

        let mut faulty = Checker::with_omitted_call_binding(&sigma);
        let err = faulty
            .term(&delta, &gamma, &DualPid::Var(var("pid")), &session, body)
            .unwrap_err();
        assert_eq!(err.code, Code::TypeRecursion);
    }

    #[test]
    fn branch_set_must_match_session_exactly() {
        // Missing branch.
        let src = r#"
defmodule M do
  @session "&{?a(), ?b()}"
  @spec f(pid) :: atom
  def f(pid) do
    receive do
      {:a} ->
        :ok
    end
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeBranch);

        // Extra branch.
        let src = r#"
defmodule M do
  @session "&{?a()}"
  @spec f(pid) :: atom
  def f(pid) do
    receive do
      {:a} ->
        :ok
      {:b} ->
        :ok
    end
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeBranch);
    }

    #[test]
    fn case_branches_join_types_and_sessions() {
        let src = r#"
defmodule M do
  @session "!r(number)"
  @spec f(pid, number) :: {atom, number}
  def f(pid, n) do
    case n < 10 do
      true ->
        send(pid, {:r, n})
      false ->
        send(pid, {:r, 0 - n})
    end
  end
end
"#;
        assert_eq!(check_module(&module(src)), Ok(()));

        // Branch result types that disagree are rejected.
        let src = r#"
defmodule M do
  @session "end"
  @spec f(pid, number) :: number
  def f(pid, n) do
    case n < 10 do
      true ->
        1
      false ->
        :nope
    end
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeJoin);
    }

    #[test]
    fn empty_list_resolves_against_concrete_branches() {
        let src = r#"
defmodule M do
  @session "end"
  @spec f(pid, boolean) :: [number]
  def f(pid, b) do
    case b do
      true ->
        []
      false ->
        [1, 2]
    end
  end
end
"#;
        assert_eq!(check_module(&module(src)), Ok(()));
    }

    #[test]
    fn known_call_requires_equivalent_session() {
        let src = r#"
defmodule M do
  @session "X = !a().X"
  @spec f(pid) :: atom
  def f(pid) do
    g(pid)
  end

  @session "Y = !b().Y"
  @spec g(pid) :: atom
  def g(pid) do
    send(pid, {:b})
    g(pid)
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeCall);
    }

    #[test]
    fn shadowing_the_dual_pid_in_a_pattern_is_rejected() {
        let src = r#"
defmodule M do
  @session "?m(number)"
  @spec f(pid) :: number
  def f(pid) do
    receive do
      {:m, pid} ->
        pid
    end
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeShadow);
    }

    #[test]
    fn verdict_holds_for_closed_terms_with_pid_judgement() {
        // The monitor checks closed terms where the dual pid is a value.
        let m = module(PINGER);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let session = delta.get(&FunId::new("pinger", 1)).unwrap().clone();
        let info = sigma.get(&FunId::new("pinger", 1)).unwrap();
        let peer = ProcessId(3);
        let mut subst = crate::ast::Subst::new();
        subst.bind(info.dual.clone(), Value::Pid(peer));
        let body = info.body.substitute(&subst);
        let verdict = check_term(
            &delta,
            &VarEnv::new(),
            &sigma,
            &DualPid::Pid(peer),
            &session,
            &body,
        )
        .unwrap();
        assert_eq!(verdict.ty, ValueType::Atom);
        assert!(session_equal(&verdict.residual, &SessionType::End));
    }

    #[test]
    fn arity_mismatch_vs_unknown_function() {
        let src = r#"
defmodule M do
  @session "end"
  @spec f(pid) :: atom
  def f(pid) do
    g(pid, 1)
  end

  @spec g(pid) :: atom
  defp g(pid) do
    :ok
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeArity);

        let src = r#"
defmodule M do
  @session "end"
  @spec f(pid) :: atom
  def f(pid) do
    ghost(pid)
  end
end
"#;
        let errs = check_module(&module(src)).unwrap_err();
        assert_eq!(errs[0].code, Code::TypeUnknownFun);
    }

    #[test]
    fn send_result_is_the_message_tuple_type() {
        let m = module(PINGER);
        let sigma = build_details(&m.defs);
        let delta = build_sessions(&m.defs);
        let s = parse_session_type("!hello(number, boolean)").unwrap();
        let verdict = check_term(
            &delta,
            &VarEnv::new(),
            &sigma,
            &DualPid::Pid(ProcessId(9)),
            &s,
            &Term::Send {
                dest: Identifier::Val(Value::Pid(ProcessId(9))),
                label: Label::new("hello"),
                args: vec![Expr::Val(Value::int(1)), Expr::Val(Value::Boolean(true))],
            },
        )
        .unwrap();
        assert_eq!(
            verdict.ty,
            ValueType::Tuple(vec![
                ValueType::Atom,
                ValueType::Number,
                ValueType::Boolean
            ])
        );
        assert_eq!(verdict.residual, SessionType::End);
    }
}
