//! Abstract syntax for the session-typed mini-Elixir language.
//!
//! This module defines expression types, session types, values, patterns,
//! expressions, terms and modules, together with the binding-related
//! operations the rest of the toolkit builds on: free and bound variables,
//! pattern variables, simultaneous substitution and value typing.
//!
//! All AST values are immutable after construction and safe to share across
//! threads.

use std::collections::BTreeSet;
use std::fmt;

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

/// A data variable name. The name `_` is a wildcard: it never binds and may
/// not be referenced.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarName(pub String);

impl VarName {
    pub fn new(name: impl Into<String>) -> Self {
        VarName(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `_` matches anything and binds nothing.
    pub fn is_wildcard(&self) -> bool {
        self.0 == "_"
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A function name (without arity).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunName(pub String);

impl FunName {
    pub fn new(name: impl Into<String>) -> Self {
        FunName(name.into())
    }
}

impl fmt::Display for FunName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Function identifier: name plus arity. The arity counts the reserved dual
/// pid parameter, so it is always at least 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunId {
    pub name: FunName,
    pub arity: usize,
}

impl FunId {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        FunId {
            name: FunName::new(name),
            arity,
        }
    }
}

impl fmt::Display for FunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A message label, written `:name` in source and `!name(..)`/`?name(..)`
/// in session types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A recursion variable in a session type, written `X`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecVar(pub String);

impl RecVar {
    pub fn new(name: impl Into<String>) -> Self {
        RecVar(name.into())
    }
}

impl fmt::Display for RecVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A runtime process identifier. Pids never appear as source literals; they
/// enter terms only through spawning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(pub u64);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#PID<{}>", self.0)
    }
}

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Expression types: the basic types plus tuples and homogeneous lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExprType {
    Boolean,
    Number,
    Atom,
    Pid,
    Tuple(Vec<ExprType>),
    List(Box<ExprType>),
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprType::Boolean => f.write_str("boolean"),
            ExprType::Number => f.write_str("number"),
            ExprType::Atom => f.write_str("atom"),
            ExprType::Pid => f.write_str("pid"),
            ExprType::Tuple(ts) => {
                f.write_str("{")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str("}")
            }
            ExprType::List(t) => write!(f, "[{t}]"),
        }
    }
}

/// The structural type of a value or expression, as far as it is determined.
///
/// `[]` inhabits every list type, so its element type stays open until the
/// context pins it down; the open shape is `EmptyList`. Everything else
/// mirrors [`ExprType`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueType {
    Boolean,
    Number,
    Atom,
    Pid,
    Tuple(Vec<ValueType>),
    List(Box<ValueType>),
    EmptyList,
}

impl ValueType {
    /// Does this shape fit the closed type `t`?
    pub fn fits(&self, t: &ExprType) -> bool {
        match (self, t) {
            (ValueType::Boolean, ExprType::Boolean)
            | (ValueType::Number, ExprType::Number)
            | (ValueType::Atom, ExprType::Atom)
            | (ValueType::Pid, ExprType::Pid) => true,
            (ValueType::EmptyList, ExprType::List(_)) => true,
            (ValueType::List(a), ExprType::List(b)) => a.fits(b),
            (ValueType::Tuple(xs), ExprType::Tuple(ys)) => {
                xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.fits(y))
            }
            _ => false,
        }
    }

    /// Least common shape of two types, if one exists. `EmptyList` is
    /// absorbed by any list type.
    pub fn join(&self, other: &ValueType) -> Option<ValueType> {
        match (self, other) {
            (a, b) if a == b => Some(a.clone()),
            (ValueType::EmptyList, ValueType::List(t))
            | (ValueType::List(t), ValueType::EmptyList) => Some(ValueType::List(t.clone())),
            (ValueType::List(a), ValueType::List(b)) => {
                Some(ValueType::List(Box::new(a.join(b)?)))
            }
            (ValueType::Tuple(xs), ValueType::Tuple(ys)) if xs.len() == ys.len() => {
                let elems = xs
                    .iter()
                    .zip(ys)
                    .map(|(x, y)| x.join(y))
                    .collect::<Option<Vec<_>>>()?;
                Some(ValueType::Tuple(elems))
            }
            _ => None,
        }
    }

    /// Convert to a closed [`ExprType`]; fails if any list element type is
    /// still open.
    pub fn as_expr_type(&self) -> Option<ExprType> {
        match self {
            ValueType::Boolean => Some(ExprType::Boolean),
            ValueType::Number => Some(ExprType::Number),
            ValueType::Atom => Some(ExprType::Atom),
            ValueType::Pid => Some(ExprType::Pid),
            ValueType::Tuple(ts) => Some(ExprType::Tuple(
                ts.iter().map(|t| t.as_expr_type()).collect::<Option<_>>()?,
            )),
            ValueType::List(t) => Some(ExprType::List(Box::new(t.as_expr_type()?))),
            ValueType::EmptyList => None,
        }
    }

    /// Does this shape still contain an open list element type?
    pub fn is_open(&self) -> bool {
        match self {
            ValueType::EmptyList => true,
            ValueType::Tuple(ts) => ts.iter().any(|t| t.is_open()),
            ValueType::List(t) => t.is_open(),
            _ => false,
        }
    }
}

impl From<&ExprType> for ValueType {
    fn from(t: &ExprType) -> Self {
        match t {
            ExprType::Boolean => ValueType::Boolean,
            ExprType::Number => ValueType::Number,
            ExprType::Atom => ValueType::Atom,
            ExprType::Pid => ValueType::Pid,
            ExprType::Tuple(ts) => ValueType::Tuple(ts.iter().map(ValueType::from).collect()),
            ExprType::List(t) => ValueType::List(Box::new(ValueType::from(t.as_ref()))),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Boolean => f.write_str("boolean"),
            ValueType::Number => f.write_str("number"),
            ValueType::Atom => f.write_str("atom"),
            ValueType::Pid => f.write_str("pid"),
            ValueType::Tuple(ts) => {
                f.write_str("{")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str("}")
            }
            ValueType::List(t) => write!(f, "[{t}]"),
            ValueType::EmptyList => f.write_str("[?]"),
        }
    }
}

// ---------------------------------------------------------------------------
// Session types
// ---------------------------------------------------------------------------

/// One labelled option of a branch or choice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionOption {
    pub label: Label,
    pub payloads: Vec<ExprType>,
    pub cont: SessionType,
}

/// Binary session types.
///
/// `Branch` (external choice, written `&{?l(..).S, ..}`) requires readiness
/// to receive any of its labelled messages; `Choice` (internal choice,
/// `+{!l(..).S, ..}`) permits sending one of them. Recursion is
/// equi-recursive: a `Rec` is used interchangeably with its unfolding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SessionType {
    Branch(Vec<SessionOption>),
    Choice(Vec<SessionOption>),
    Rec(RecVar, Box<SessionType>),
    Var(RecVar),
    End,
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

/// Runtime numbers: one numeric kind holding either a 64-bit signed integer
/// or a 64-bit float. Equality here is structural (`1` differs from `1.0`,
/// floats compare bitwise); the `==` operator of the language compares
/// numerically instead.
#[derive(Debug, Clone, Copy)]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => a == b,
            (Number::Float(a), Number::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Number {}

// Ordering for deterministic collections only: integers sort before floats,
// floats by bit pattern. The language's comparison operators order numbers
// numerically instead; see `semantics`.
impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => a.cmp(b),
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
            (Number::Int(_), Number::Float(_)) => std::cmp::Ordering::Less,
            (Number::Float(_), Number::Int(_)) => std::cmp::Ordering::Greater,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Int(i) => write!(f, "{i}"),
            Number::Float(x) => write!(f, "{x:?}"),
        }
    }
}

/// Runtime and literal values. Lists are proper at runtime: a cons tail is
/// always `EmptyList` or another `Cons`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Boolean(bool),
    Number(Number),
    Atom(String),
    Pid(ProcessId),
    EmptyList,
    Cons(Box<Value>, Box<Value>),
    Tuple(Vec<Value>),
}

/// Why a value has no structural type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueTypeError {
    /// List elements do not share a type.
    Heterogeneous,
    /// A cons tail is not a list.
    ImproperList,
}

impl fmt::Display for ValueTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueTypeError::Heterogeneous => f.write_str("list elements do not share one type"),
            ValueTypeError::ImproperList => f.write_str("cons tail is not a list"),
        }
    }
}

impl Value {
    pub fn int(i: i64) -> Self {
        Value::Number(Number::Int(i))
    }

    pub fn float(x: f64) -> Self {
        Value::Number(Number::Float(x))
    }

    pub fn atom(name: impl Into<String>) -> Self {
        Value::Atom(name.into())
    }

    /// Structural type of the value. `[]` reports the open `EmptyList`
    /// shape, which fits every list type; heterogeneous or improper lists
    /// have no type.
    pub fn value_type(&self) -> Result<ValueType, ValueTypeError> {
        match self {
            Value::Boolean(_) => Ok(ValueType::Boolean),
            Value::Number(_) => Ok(ValueType::Number),
            Value::Atom(_) => Ok(ValueType::Atom),
            Value::Pid(_) => Ok(ValueType::Pid),
            Value::EmptyList => Ok(ValueType::EmptyList),
            Value::Tuple(vs) => Ok(ValueType::Tuple(
                vs.iter().map(|v| v.value_type()).collect::<Result<_, _>>()?,
            )),
            Value::Cons(head, tail) => {
                let head_ty = head.value_type()?;
                match tail.value_type()? {
                    ValueType::EmptyList => Ok(ValueType::List(Box::new(head_ty))),
                    ValueType::List(elem) => {
                        let joined = head_ty
                            .join(&elem)
                            .ok_or(ValueTypeError::Heterogeneous)?;
                        Ok(ValueType::List(Box::new(joined)))
                    }
                    _ => Err(ValueTypeError::ImproperList),
                }
            }
        }
    }

    /// Checks the value against a closed expression type.
    pub fn has_type(&self, t: &ExprType) -> bool {
        self.value_type().map(|vt| vt.fits(t)).unwrap_or(false)
    }

    /// Basic values are the leaves of the value grammar: booleans, numbers,
    /// atoms, pids and the empty list.
    pub fn is_basic(&self) -> bool {
        !matches!(self, Value::Cons(..) | Value::Tuple(..))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Atom(a) => write!(f, ":{a}"),
            Value::Pid(p) => write!(f, "{p}"),
            Value::EmptyList => f.write_str("[]"),
            Value::Cons(h, t) => {
                // Proper lists print in element form, improper ones as cons.
                f.write_str("[")?;
                write!(f, "{h}")?;
                let mut cur = t.as_ref();
                loop {
                    match cur {
                        Value::EmptyList => break,
                        Value::Cons(h2, t2) => {
                            write!(f, ", {h2}")?;
                            cur = t2.as_ref();
                        }
                        other => {
                            write!(f, " | {other}")?;
                            break;
                        }
                    }
                }
                f.write_str("]")
            }
            Value::Tuple(vs) => {
                f.write_str("{")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Patterns
// ---------------------------------------------------------------------------

/// An identifier pattern `w`: a basic literal or a variable. These are the
/// only shapes allowed inside tuple and cons patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdPattern {
    Literal(Value),
    Var(VarName),
}

/// Patterns as they appear in `receive` and `case` branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Literal(Value),
    Var(VarName),
    Cons(IdPattern, IdPattern),
    Tuple(Vec<IdPattern>),
}

impl IdPattern {
    fn collect_vars(&self, out: &mut Vec<VarName>) {
        if let IdPattern::Var(x) = self {
            if !x.is_wildcard() && !out.contains(x) {
                out.push(x.clone());
            }
        }
    }
}

impl Pattern {
    fn collect_vars(&self, out: &mut Vec<VarName>) {
        match self {
            Pattern::Literal(_) => {}
            Pattern::Var(x) => {
                if !x.is_wildcard() && !out.contains(x) {
                    out.push(x.clone());
                }
            }
            Pattern::Cons(h, t) => {
                h.collect_vars(out);
                t.collect_vars(out);
            }
            Pattern::Tuple(ws) => {
                for w in ws {
                    w.collect_vars(out);
                }
            }
        }
    }
}

/// Ordered set of variables bound by a pattern, left to right. Wildcards
/// bind nothing and are excluded.
pub fn pattern_vars(p: &Pattern) -> Vec<VarName> {
    let mut out = Vec::new();
    p.collect_vars(&mut out);
    out
}

/// Ordered set of variables bound by a pattern list.
pub fn patterns_vars(ps: &[Pattern]) -> Vec<VarName> {
    let mut out = Vec::new();
    for p in ps {
        p.collect_vars(&mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    pub fn is_boolean(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Expressions. The parser only produces basic literals under `Val`;
/// composite values appear there through reduction and substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Val(Value),
    Var(VarName),
    Not(Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Cons(Box<Expr>, Box<Expr>),
    Tuple(Vec<Expr>),
}

impl Expr {
    pub fn is_value(&self) -> bool {
        matches!(self, Expr::Val(_))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Expr::Val(v) => Some(v),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<VarName>) {
        match self {
            Expr::Val(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Not(e) => e.collect_free(out),
            Expr::BinOp(_, l, r) | Expr::Cons(l, r) => {
                l.collect_free(out);
                r.collect_free(out);
            }
            Expr::Tuple(es) => {
                for e in es {
                    e.collect_free(out);
                }
            }
        }
    }

    fn substitute(&self, subst: &Subst) -> Expr {
        match self {
            Expr::Val(_) => self.clone(),
            Expr::Var(x) => match subst.lookup(x) {
                Some(v) => Expr::Val(v.clone()),
                None => self.clone(),
            },
            Expr::Not(e) => Expr::Not(Box::new(e.substitute(subst))),
            Expr::BinOp(op, l, r) => Expr::BinOp(
                *op,
                Box::new(l.substitute(subst)),
                Box::new(r.substitute(subst)),
            ),
            Expr::Cons(l, r) => Expr::Cons(
                Box::new(l.substitute(subst)),
                Box::new(r.substitute(subst)),
            ),
            Expr::Tuple(es) => Expr::Tuple(es.iter().map(|e| e.substitute(subst)).collect()),
        }
    }
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

/// A send destination or first call argument: a variable before
/// instantiation, a value (a pid, in well-typed programs) afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Identifier {
    Var(VarName),
    Val(Value),
}

impl Identifier {
    fn collect_free(&self, out: &mut BTreeSet<VarName>) {
        if let Identifier::Var(x) = self {
            out.insert(x.clone());
        }
    }

    fn substitute(&self, subst: &Subst) -> Identifier {
        match self {
            Identifier::Var(x) => match subst.lookup(x) {
                Some(v) => Identifier::Val(v.clone()),
                None => self.clone(),
            },
            Identifier::Val(_) => self.clone(),
        }
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identifier::Var(x) => write!(f, "{x}"),
            Identifier::Val(v) => write!(f, "{v}"),
        }
    }
}

/// One branch of a `receive`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceiveBranch {
    pub label: Label,
    pub patterns: Vec<Pattern>,
    pub body: Term,
}

/// One branch of a `case`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseBranch {
    pub pattern: Pattern,
    pub body: Term,
}

/// Terms: the statement-level syntax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Expr(Expr),
    Let {
        var: VarName,
        bound: Box<Term>,
        body: Box<Term>,
    },
    Send {
        dest: Identifier,
        label: Label,
        args: Vec<Expr>,
    },
    Receive {
        branches: Vec<ReceiveBranch>,
    },
    Call {
        fun: FunName,
        dest: Identifier,
        args: Vec<Expr>,
    },
    Case {
        scrutinee: Expr,
        branches: Vec<CaseBranch>,
    },
}

impl Term {
    /// The `FunId` a call term resolves to: name plus full arity including
    /// the leading identifier argument.
    pub fn call_id(fun: &FunName, args: &[Expr]) -> FunId {
        FunId {
            name: fun.clone(),
            arity: args.len() + 1,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Term::Expr(Expr::Val(_)))
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Term::Expr(Expr::Val(v)) => Some(v),
            _ => None,
        }
    }

    /// Free variables, with `let`, `receive` and `case` binders removed from
    /// the bodies they scope over.
    pub fn free_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<VarName>) {
        match self {
            Term::Expr(e) => e.collect_free(out),
            Term::Let { var, bound, body } => {
                bound.collect_free(out);
                let mut body_vars = BTreeSet::new();
                body.collect_free(&mut body_vars);
                body_vars.remove(var);
                out.extend(body_vars);
            }
            Term::Send { dest, args, .. } => {
                dest.collect_free(out);
                for e in args {
                    e.collect_free(out);
                }
            }
            Term::Receive { branches } => {
                for b in branches {
                    let mut body_vars = BTreeSet::new();
                    b.body.collect_free(&mut body_vars);
                    for x in patterns_vars(&b.patterns) {
                        body_vars.remove(&x);
                    }
                    out.extend(body_vars);
                }
            }
            Term::Call { dest, args, .. } => {
                dest.collect_free(out);
                for e in args {
                    e.collect_free(out);
                }
            }
            Term::Case {
                scrutinee,
                branches,
            } => {
                scrutinee.collect_free(out);
                for b in branches {
                    let mut body_vars = BTreeSet::new();
                    b.body.collect_free(&mut body_vars);
                    for x in pattern_vars(&b.pattern) {
                        body_vars.remove(&x);
                    }
                    out.extend(body_vars);
                }
            }
        }
    }

    /// Variables bound anywhere in the term: `let` binders and pattern
    /// variables of `receive` and `case` branches.
    pub fn bound_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_bound(&mut out);
        out
    }

    fn collect_bound(&self, out: &mut BTreeSet<VarName>) {
        match self {
            Term::Expr(_) | Term::Send { .. } | Term::Call { .. } => {}
            Term::Let { var, bound, body } => {
                if !var.is_wildcard() {
                    out.insert(var.clone());
                }
                bound.collect_bound(out);
                body.collect_bound(out);
            }
            Term::Receive { branches } => {
                for b in branches {
                    out.extend(patterns_vars(&b.patterns));
                    b.body.collect_bound(out);
                }
            }
            Term::Case { branches, .. } => {
                for b in branches {
                    out.extend(pattern_vars(&b.pattern));
                    b.body.collect_bound(out);
                }
            }
        }
    }

    /// Simultaneous, capture-free substitution of values for free variables.
    ///
    /// Binders mask the substitution in the subterms they scope over, and
    /// substituted values are closed, so no renaming is ever required.
    pub fn substitute(&self, subst: &Subst) -> Term {
        if subst.is_empty() {
            return self.clone();
        }
        match self {
            Term::Expr(e) => Term::Expr(e.substitute(subst)),
            Term::Let { var, bound, body } => {
                let inner = subst.masked(std::slice::from_ref(var));
                Term::Let {
                    var: var.clone(),
                    bound: Box::new(bound.substitute(subst)),
                    body: Box::new(body.substitute(&inner)),
                }
            }
            Term::Send { dest, label, args } => Term::Send {
                dest: dest.substitute(subst),
                label: label.clone(),
                args: args.iter().map(|e| e.substitute(subst)).collect(),
            },
            Term::Receive { branches } => Term::Receive {
                branches: branches
                    .iter()
                    .map(|b| {
                        let inner = subst.masked(&patterns_vars(&b.patterns));
                        ReceiveBranch {
                            label: b.label.clone(),
                            patterns: b.patterns.clone(),
                            body: b.body.substitute(&inner),
                        }
                    })
                    .collect(),
            },
            Term::Call { fun, dest, args } => Term::Call {
                fun: fun.clone(),
                dest: dest.substitute(subst),
                args: args.iter().map(|e| e.substitute(subst)).collect(),
            },
            Term::Case {
                scrutinee,
                branches,
            } => Term::Case {
                scrutinee: scrutinee.substitute(subst),
                branches: branches
                    .iter()
                    .map(|b| {
                        let inner = subst.masked(&pattern_vars(&b.pattern));
                        CaseBranch {
                            pattern: b.pattern.clone(),
                            body: b.body.substitute(&inner),
                        }
                    })
                    .collect(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Substitutions
// ---------------------------------------------------------------------------

/// An ordered list of variable-to-value bindings, applied simultaneously.
/// Domain variables are pairwise distinct; on a (malformed) duplicate the
/// first binding wins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subst(Vec<(VarName, Value)>);

impl Subst {
    pub fn new() -> Self {
        Subst(Vec::new())
    }

    pub fn single(x: VarName, v: Value) -> Self {
        Subst(vec![(x, v)])
    }

    pub fn bind(&mut self, x: VarName, v: Value) {
        if !x.is_wildcard() {
            self.0.push((x, v));
        }
    }

    pub fn extend(&mut self, other: Subst) {
        self.0.extend(other.0);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn lookup(&self, x: &VarName) -> Option<&Value> {
        self.0.iter().find(|(y, _)| y == x).map(|(_, v)| v)
    }

    pub fn bindings(&self) -> &[(VarName, Value)] {
        &self.0
    }

    /// The substitution with the given binders removed from its domain.
    fn masked(&self, binders: &[VarName]) -> Subst {
        if binders.is_empty() {
            return self.clone();
        }
        Subst(
            self.0
                .iter()
                .filter(|(x, _)| !binders.contains(x))
                .cloned()
                .collect(),
        )
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("[]");
        }
        for (x, v) in &self.0 {
            write!(f, "[{v}/{x}]")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Function definitions and modules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    Private,
}

/// Session annotation attached to a public function: either a session type
/// written out, or a reference to the dual of a previously named one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionAnn {
    /// `@session "X = S"` or `@session "S"`.
    Session(SessionType),
    /// `@dual "X"`, resolved at parse time to the dual of the session named
    /// `X` earlier in the module.
    Dual { name: RecVar, session: SessionType },
}

impl SessionAnn {
    pub fn session(&self) -> &SessionType {
        match self {
            SessionAnn::Session(s) => s,
            SessionAnn::Dual { session, .. } => session,
        }
    }
}

/// A function definition. The first parameter is always the dual pid; the
/// declared parameter types cover only the tail parameters.
#[derive(Debug, Clone)]
pub struct FunDef {
    pub id: FunId,
    pub visibility: Visibility,
    pub dual_param: VarName,
    pub params: Vec<VarName>,
    pub param_types: Vec<ExprType>,
    pub return_type: ExprType,
    pub body: Term,
    pub session: Option<SessionAnn>,
    /// Source location of the definition, excluded from structural equality.
    pub span: crate::diag::Span,
}

impl PartialEq for FunDef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.visibility == other.visibility
            && self.dual_param == other.dual_param
            && self.params == other.params
            && self.param_types == other.param_types
            && self.return_type == other.return_type
            && self.body == other.body
            && self.session == other.session
    }
}

impl Eq for FunDef {}

/// A parsed module: a name and its function definitions in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    pub defs: Vec<FunDef>,
}

impl Module {
    pub fn def(&self, id: &FunId) -> Option<&FunDef> {
        self.defs.iter().find(|d| &d.id == id)
    }
}
