//! Recursive-descent parser and pretty-printer for `.exst` modules.
//!
//! The surface syntax is a strict subset of Elixir: one `defmodule` per
//! file, `def`/`defp` with `@session`/`@dual`/`@spec` annotations,
//! `send`/`receive`/`case` and `x = t` sequencing inside `do` blocks.
//! Sequencing desugars into `let`: a bare statement binds a wildcard, and a
//! trailing assignment evaluates to the bound variable.
//!
//! Printing and parsing are inverses on the AST: `parse(print(m))` is
//! structurally equal to `m`.

mod lexer;
mod print;
mod session_text;

pub use print::{print_module, print_session};
pub use session_text::parse_session_type;

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{
    BinOp, CaseBranch, Expr, ExprType, FunDef, FunId, IdPattern, Identifier, Label, Module,
    Pattern, ReceiveBranch, RecVar, SessionAnn, SessionType, Term, Value, VarName, Visibility,
};
use crate::diag::{Code, Diagnostic, Span};
use crate::session::dual;
use lexer::{lex, Tok, Token};

/// A source file to parse.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: String,
    pub contents: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, contents: impl Into<String>) -> Self {
        SourceFile {
            path: path.into(),
            contents: contents.into(),
        }
    }
}

/// Parses a source file into a module, or reports what is wrong with it.
pub fn parse_module(src: &SourceFile) -> Result<Module, Vec<Diagnostic>> {
    let tokens = lex(&src.contents).map_err(|d| vec![d])?;
    let mut parser = Parser::new(tokens);
    let module = parser.module().map_err(|d| vec![d])?;
    let problems = validate(&module);
    if problems.is_empty() {
        Ok(module)
    } else {
        Err(problems)
    }
}

/// Parses a value literal (the expression grammar restricted to values).
pub fn parse_value(text: &str) -> Result<Value, Diagnostic> {
    let tokens = lex(text)?;
    let mut parser = Parser::new(tokens);
    let e = parser.expr()?;
    parser.skip_newlines();
    parser.expect_eof()?;
    expr_to_value(&e).ok_or_else(|| {
        Diagnostic::error(Code::ParseSyntax, Span::start(), "expected a value literal")
    })
}

fn expr_to_value(e: &Expr) -> Option<Value> {
    match e {
        Expr::Val(v) => Some(v.clone()),
        Expr::Cons(h, t) => Some(Value::Cons(
            Box::new(expr_to_value(h)?),
            Box::new(expr_to_value(t)?),
        )),
        Expr::Tuple(es) => Some(Value::Tuple(
            es.iter().map(expr_to_value).collect::<Option<_>>()?,
        )),
        _ => None,
    }
}

const RESERVED: &[&str] = &[
    "defmodule", "def", "defp", "do", "end", "receive", "case", "send", "not", "and", "or",
    "true", "false",
];

// ---------------------------------------------------------------------------
// Statement shapes (pre-desugaring)
// ---------------------------------------------------------------------------

enum Stmt {
    Assign(VarName, Term),
    Bare(Term),
}

fn desugar(stmts: Vec<Stmt>, span: Span) -> Result<Term, Diagnostic> {
    let mut iter = stmts.into_iter().rev();
    let mut acc = match iter.next() {
        None => {
            return Err(Diagnostic::error(
                Code::ParseSyntax,
                span,
                "empty body: a block must end with an expression",
            ))
        }
        Some(Stmt::Bare(t)) => t,
        // A trailing wildcard assignment is just the term: `_` cannot be
        // referenced, so there is nothing to bind.
        Some(Stmt::Assign(x, t)) if x.is_wildcard() => t,
        Some(Stmt::Assign(x, t)) => {
            // A trailing assignment evaluates to the bound variable.
            let body = Term::Expr(Expr::Var(x.clone()));
            Term::Let {
                var: x,
                bound: Box::new(t),
                body: Box::new(body),
            }
        }
    };
    for stmt in iter {
        acc = match stmt {
            Stmt::Assign(x, t) => Term::Let {
                var: x,
                bound: Box::new(t),
                body: Box::new(acc),
            },
            Stmt::Bare(t) => Term::Let {
                var: VarName::new("_"),
                bound: Box::new(t),
                body: Box::new(acc),
            },
        };
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Default)]
struct Stop {
    end_kw: bool,
    rparen: bool,
    receive_branch: bool,
    case_branch: bool,
}

struct PendingAnns {
    session: Option<(SessionAnnKind, String, Span)>,
    spec: Option<(String, Vec<ExprType>, ExprType, Span)>,
}

enum SessionAnnKind {
    Session,
    Dual,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Sessions declared with a named header, for `@dual` resolution.
    named_sessions: BTreeMap<String, SessionType>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            named_sessions: BTreeMap::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos.min(self.tokens.len() - 1)].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(Code::ParseSyntax, self.span(), msg)
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        self.err_here(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), Diagnostic> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expect_eof(&self) -> Result<(), Diagnostic> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.bump();
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), Diagnostic> {
        if self.at_keyword(word) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<(String, Span), Diagnostic> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                if RESERVED.contains(&s.as_str()) {
                    return Err(self.err_here(format!("`{s}` is a reserved word")));
                }
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    // -- module --------------------------------------------------------

    fn module(&mut self) -> Result<Module, Diagnostic> {
        self.skip_newlines();
        self.expect_keyword("defmodule")?;
        let name = match self.peek().clone() {
            Tok::UpIdent(s) => {
                self.bump();
                s
            }
            _ => return Err(self.unexpected("module name")),
        };
        self.expect_keyword("do")?;
        let mut defs = Vec::new();
        let mut pending = PendingAnns {
            session: None,
            spec: None,
        };
        loop {
            self.skip_newlines();
            match self.peek().clone() {
                Tok::Annotation(name) => {
                    let ann_span = self.span();
                    self.bump();
                    self.annotation(&name, ann_span, &mut pending)?;
                }
                Tok::Ident(kw) if kw == "def" || kw == "defp" => {
                    let def = self.function(kw == "def", &mut pending)?;
                    defs.push(def);
                }
                Tok::Ident(kw) if kw == "end" => {
                    if let Some((_, _, span)) = &pending.session {
                        return Err(Diagnostic::error(
                            Code::ParseSyntax,
                            *span,
                            "session annotation without a following definition",
                        ));
                    }
                    if let Some((_, _, _, span)) = &pending.spec {
                        return Err(Diagnostic::error(
                            Code::ParseSyntax,
                            *span,
                            "@spec annotation without a following definition",
                        ));
                    }
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected("a definition, annotation or `end`")),
            }
        }
        self.skip_newlines();
        self.expect_eof()?;
        Ok(Module { name, defs })
    }

    fn annotation(
        &mut self,
        name: &str,
        ann_span: Span,
        pending: &mut PendingAnns,
    ) -> Result<(), Diagnostic> {
        match name {
            "session" | "dual" => {
                if pending.session.is_some() {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        ann_span,
                        "duplicate session annotation",
                    ));
                }
                let str_span = self.span();
                let text = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.unexpected("a session string")),
                };
                let kind = if name == "session" {
                    SessionAnnKind::Session
                } else {
                    SessionAnnKind::Dual
                };
                pending.session = Some((kind, text, str_span));
                Ok(())
            }
            "spec" => {
                if pending.spec.is_some() {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        ann_span,
                        "duplicate @spec annotation",
                    ));
                }
                let (fname, _) = self.ident("function name in @spec")?;
                self.expect(Tok::LParen, "`(`")?;
                let mut types = Vec::new();
                if !matches!(self.peek(), Tok::RParen) {
                    types.push(self.spec_type()?);
                    while self.eat(&Tok::Comma) {
                        types.push(self.spec_type()?);
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::ColonColon, "`::`")?;
                let ret = self.spec_type()?;
                pending.spec = Some((fname, types, ret, ann_span));
                Ok(())
            }
            other => Err(Diagnostic::error(
                Code::ParseSyntax,
                ann_span,
                format!("unknown annotation `@{other}`"),
            )),
        }
    }

    fn spec_type(&mut self) -> Result<ExprType, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "boolean" => {
                    self.bump();
                    Ok(ExprType::Boolean)
                }
                "number" => {
                    self.bump();
                    Ok(ExprType::Number)
                }
                "atom" => {
                    self.bump();
                    Ok(ExprType::Atom)
                }
                "pid" => {
                    self.bump();
                    Ok(ExprType::Pid)
                }
                other => Err(self.err_here(format!("unknown type `{other}`"))),
            },
            Tok::LBracket => {
                self.bump();
                let elem = self.spec_type()?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(ExprType::List(Box::new(elem)))
            }
            Tok::LBrace => {
                self.bump();
                let mut elems = Vec::new();
                if !matches!(self.peek(), Tok::RBrace) {
                    elems.push(self.spec_type()?);
                    while self.eat(&Tok::Comma) {
                        elems.push(self.spec_type()?);
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(ExprType::Tuple(elems))
            }
            _ => Err(self.unexpected("a type")),
        }
    }

    fn function(
        &mut self,
        public: bool,
        pending: &mut PendingAnns,
    ) -> Result<FunDef, Diagnostic> {
        let def_span = self.span();
        self.bump(); // def / defp
        let (fname, _) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if !matches!(self.peek(), Tok::RParen) {
            loop {
                let (p, p_span) = self.ident("parameter name")?;
                if p == "_" {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        p_span,
                        "`_` is not allowed as a parameter",
                    ));
                }
                params.push(VarName::new(p));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        if params.is_empty() {
            return Err(Diagnostic::error(
                Code::ParseSyntax,
                def_span,
                format!("{fname} needs at least the dual pid parameter"),
            ));
        }
        self.expect_keyword("do")?;
        let body_span = self.span();
        let stmts = self.stmts(Stop {
            end_kw: true,
            ..Stop::default()
        })?;
        self.expect_keyword("end")?;
        let body = desugar(stmts, body_span)?;

        let arity = params.len();
        let id = FunId::new(fname.clone(), arity);

        // Match the pending @spec against this definition.
        let (param_types, return_type) = match pending.spec.take() {
            None => {
                return Err(Diagnostic::error(
                    Code::ParseNoSpec,
                    def_span,
                    format!("{id} has no @spec annotation"),
                ))
            }
            Some((spec_name, types, ret, spec_span)) => {
                if spec_name != fname {
                    return Err(Diagnostic::error(
                        Code::ParseNoSpec,
                        spec_span,
                        format!("@spec names {spec_name} but the definition is {fname}"),
                    ));
                }
                if types.len() != arity {
                    return Err(Diagnostic::error(
                        Code::ParseSpecArity,
                        spec_span,
                        format!(
                            "@spec for {id} lists {} parameter types but the definition has {arity}",
                            types.len()
                        ),
                    ));
                }
                if types[0] != ExprType::Pid {
                    return Err(Diagnostic::error(
                        Code::ParseSpecArity,
                        spec_span,
                        format!("the first @spec parameter of {id} must be pid"),
                    ));
                }
                (types[1..].to_vec(), ret)
            }
        };

        // Resolve the pending session annotation.
        let session = match pending.session.take() {
            None => None,
            Some((kind, text, str_span)) => match kind {
                SessionAnnKind::Session => {
                    let s = parse_session_type(&text).map_err(|d| Diagnostic {
                        span: str_span,
                        ..d
                    })?;
                    if let SessionType::Rec(x, _) = &s {
                        self.named_sessions.insert(x.0.clone(), s.clone());
                    }
                    Some(SessionAnn::Session(s))
                }
                SessionAnnKind::Dual => {
                    let name = text.trim().to_string();
                    match self.named_sessions.get(&name) {
                        Some(s) => Some(SessionAnn::Dual {
                            name: RecVar::new(name),
                            session: dual(s),
                        }),
                        None => {
                            return Err(Diagnostic::error(
                                Code::ParseSyntax,
                                str_span,
                                format!("@dual refers to unknown session `{name}`"),
                            ))
                        }
                    }
                }
            },
        };

        Ok(FunDef {
            id,
            visibility: if public {
                Visibility::Public
            } else {
                Visibility::Private
            },
            dual_param: params[0].clone(),
            params: params[1..].to_vec(),
            param_types,
            return_type,
            body,
            session,
            span: def_span,
        })
    }

    // -- statements and terms -------------------------------------------

    fn at_stop(&mut self, stop: Stop) -> bool {
        if matches!(self.peek(), Tok::Eof) {
            return true;
        }
        if stop.end_kw && self.at_keyword("end") {
            return true;
        }
        if stop.rparen && matches!(self.peek(), Tok::RParen) {
            return true;
        }
        if stop.receive_branch {
            let save = self.pos;
            let is_branch = self.receive_branch_head().is_ok();
            self.pos = save;
            if is_branch {
                return true;
            }
        }
        if stop.case_branch {
            let save = self.pos;
            let is_branch = self.pattern().and_then(|_| {
                self.expect(Tok::Arrow, "`->`")
            });
            let ok = is_branch.is_ok();
            self.pos = save;
            if ok {
                return true;
            }
        }
        false
    }

    fn stmts(&mut self, stop: Stop) -> Result<Vec<Stmt>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if self.at_stop(stop) {
                return Ok(out);
            }
            out.push(self.stmt()?);
            match self.peek() {
                Tok::Newline => {
                    self.bump();
                }
                _ => {
                    self.skip_newlines();
                    if self.at_stop(stop) {
                        return Ok(out);
                    }
                    return Err(self.unexpected("end of statement"));
                }
            }
        }
    }

    fn stmt(&mut self) -> Result<Stmt, Diagnostic> {
        if let Tok::Ident(name) = self.peek() {
            if matches!(self.peek_at(1), Tok::Assign)
                && (name == "_" || !RESERVED.contains(&name.as_str()))
            {
                let name = name.clone();
                self.bump();
                self.bump();
                let t = self.term()?;
                return Ok(Stmt::Assign(VarName::new(name), t));
            }
        }
        Ok(Stmt::Bare(self.term()?))
    }

    fn term(&mut self) -> Result<Term, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "send" => self.send_term(),
            Tok::Ident(kw) if kw == "receive" => self.receive_term(),
            Tok::Ident(kw) if kw == "case" => self.case_term(),
            Tok::Ident(name)
                if !RESERVED.contains(&name.as_str())
                    && matches!(self.peek_at(1), Tok::LParen) =>
            {
                self.call_term()
            }
            Tok::LParen => self.block_or_expr(),
            _ => Ok(Term::Expr(self.expr()?)),
        }
    }

    fn send_term(&mut self) -> Result<Term, Diagnostic> {
        self.bump(); // send
        self.expect(Tok::LParen, "`(`")?;
        let dest = self.identifier()?;
        self.expect(Tok::Comma, "`,`")?;
        self.expect(Tok::LBrace, "`{` starting the message")?;
        let label = match self.peek().clone() {
            Tok::AtomLit(l) => {
                self.bump();
                l
            }
            _ => return Err(self.unexpected("a message label like `:ping`")),
        };
        let mut args = Vec::new();
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Term::Send {
            dest,
            label: Label::new(label),
            args,
        })
    }

    fn receive_term(&mut self) -> Result<Term, Diagnostic> {
        self.bump(); // receive
        self.expect_keyword("do")?;
        let mut branches = Vec::new();
        loop {
            self.skip_newlines();
            if self.at_keyword("end") {
                self.bump();
                break;
            }
            let (label, patterns) = self.receive_branch_head()?;
            let body_span = self.span();
            let stmts = self.stmts(Stop {
                end_kw: true,
                receive_branch: true,
                ..Stop::default()
            })?;
            branches.push(ReceiveBranch {
                label,
                patterns,
                body: desugar(stmts, body_span)?,
            });
        }
        if branches.is_empty() {
            return Err(self.err_here("receive needs at least one branch"));
        }
        Ok(Term::Receive { branches })
    }

    fn receive_branch_head(&mut self) -> Result<(Label, Vec<Pattern>), Diagnostic> {
        self.expect(Tok::LBrace, "`{`")?;
        let label = match self.peek().clone() {
            Tok::AtomLit(l) => {
                self.bump();
                l
            }
            _ => return Err(self.unexpected("a branch label like `:pong`")),
        };
        let mut patterns = Vec::new();
        while self.eat(&Tok::Comma) {
            patterns.push(self.pattern()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        self.expect(Tok::Arrow, "`->`")?;
        Ok((Label::new(label), patterns))
    }

    fn case_term(&mut self) -> Result<Term, Diagnostic> {
        self.bump(); // case
        let scrutinee = self.expr()?;
        self.expect_keyword("do")?;
        let mut branches = Vec::new();
        loop {
            self.skip_newlines();
            if self.at_keyword("end") {
                self.bump();
                break;
            }
            let pattern = self.pattern()?;
            self.expect(Tok::Arrow, "`->`")?;
            let body_span = self.span();
            let stmts = self.stmts(Stop {
                end_kw: true,
                case_branch: true,
                ..Stop::default()
            })?;
            branches.push(CaseBranch {
                pattern,
                body: desugar(stmts, body_span)?,
            });
        }
        if branches.is_empty() {
            return Err(self.err_here("case needs at least one branch"));
        }
        Ok(Term::Case {
            scrutinee,
            branches,
        })
    }

    fn call_term(&mut self) -> Result<Term, Diagnostic> {
        let (fname, span) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        if matches!(self.peek(), Tok::RParen) {
            return Err(Diagnostic::error(
                Code::ParseSyntax,
                span,
                format!("call to {fname} needs the dual pid as its first argument"),
            ));
        }
        let dest = self.identifier()?;
        let mut args = Vec::new();
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Term::Call {
            fun: crate::ast::FunName::new(fname),
            dest,
            args,
        })
    }

    /// A `(` at term position: either a parenthesized block of statements
    /// or an ordinary parenthesized expression. A single bare expression
    /// followed by an operator re-parses as an expression.
    fn block_or_expr(&mut self) -> Result<Term, Diagnostic> {
        let save = self.pos;
        self.expect(Tok::LParen, "`(`")?;
        let body_span = self.span();
        let stmts = self.stmts(Stop {
            rparen: true,
            ..Stop::default()
        })?;
        self.expect(Tok::RParen, "`)`")?;
        let single_expr = matches!(stmts.as_slice(), [Stmt::Bare(Term::Expr(_))]);
        if single_expr && self.at_binop() {
            self.pos = save;
            return Ok(Term::Expr(self.expr()?));
        }
        desugar(stmts, body_span)
    }

    fn at_binop(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Plus
                | Tok::Minus
                | Tok::Star
                | Tok::Slash
                | Tok::EqEq
                | Tok::NotEq
                | Tok::Lt
                | Tok::Gt
                | Tok::Le
                | Tok::Ge
        ) || self.at_keyword("and")
            || self.at_keyword("or")
    }

    fn identifier(&mut self) -> Result<Identifier, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                if name == "_" {
                    return Err(self.err_here("`_` cannot be used as a value"));
                }
                self.bump();
                Ok(Identifier::Var(VarName::new(name)))
            }
            _ => {
                let v = self.basic_literal()?;
                Ok(Identifier::Val(v))
            }
        }
    }

    // -- patterns --------------------------------------------------------

    fn basic_literal(&mut self) -> Result<Value, Diagnostic> {
        match self.peek().clone() {
            Tok::LBracket if matches!(self.peek_at(1), Tok::RBracket) => {
                self.bump();
                self.bump();
                Ok(Value::EmptyList)
            }
            Tok::Int(i) => {
                self.bump();
                Ok(Value::int(i))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Value::float(x))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(i) => {
                        self.bump();
                        Ok(Value::int(-i))
                    }
                    Tok::Float(x) => {
                        self.bump();
                        Ok(Value::float(-x))
                    }
                    _ => Err(self.unexpected("a number after `-`")),
                }
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Value::Boolean(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Value::Boolean(false))
            }
            Tok::AtomLit(a) => {
                self.bump();
                Ok(Value::Atom(a))
            }
            _ => Err(self.unexpected("a literal")),
        }
    }

    fn id_pattern(&mut self) -> Result<IdPattern, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) || name == "_" => {
                self.bump();
                Ok(IdPattern::Var(VarName::new(name)))
            }
            Tok::LBracket if matches!(self.peek_at(1), Tok::RBracket) => {
                self.bump();
                self.bump();
                Ok(IdPattern::Literal(Value::EmptyList))
            }
            _ => Ok(IdPattern::Literal(self.basic_literal()?)),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, Diagnostic> {
        match self.peek().clone() {
            Tok::LBrace => {
                self.bump();
                let mut elems = Vec::new();
                if !matches!(self.peek(), Tok::RBrace) {
                    elems.push(self.id_pattern()?);
                    while self.eat(&Tok::Comma) {
                        elems.push(self.id_pattern()?);
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Pattern::Tuple(elems))
            }
            Tok::LBracket => {
                self.bump();
                if self.eat(&Tok::RBracket) {
                    return Ok(Pattern::Literal(Value::EmptyList));
                }
                let head = self.id_pattern()?;
                if self.eat(&Tok::Pipe) {
                    let tail = self.id_pattern()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Pattern::Cons(head, tail))
                } else {
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Pattern::Cons(head, IdPattern::Literal(Value::EmptyList)))
                }
            }
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) || name == "_" => {
                self.bump();
                Ok(Pattern::Var(VarName::new(name)))
            }
            _ => Ok(Pattern::Literal(self.basic_literal()?)),
        }
    }

    // -- expressions -----------------------------------------------------

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        self.binop_expr(1)
    }

    fn binop_at(&self) -> Option<(BinOp, u8)> {
        let op = match self.peek() {
            Tok::Ident(s) if s == "or" => BinOp::Or,
            Tok::Ident(s) if s == "and" => BinOp::And,
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::Le => BinOp::Le,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return None,
        };
        Some((op, precedence(op)))
    }

    fn binop_expr(&mut self, min_prec: u8) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary_expr()?;
        while let Some((op, prec)) = self.binop_at() {
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binop_expr(prec + 1)?;
            lhs = Expr::BinOp(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, Diagnostic> {
        if self.at_keyword("not") {
            self.bump();
            let inner = self.unary_expr()?;
            return Ok(Expr::Not(Box::new(inner)));
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> Result<Expr, Diagnostic> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Float(_) | Tok::AtomLit(_) | Tok::Minus => {
                Ok(Expr::Val(self.basic_literal()?))
            }
            Tok::Ident(s) if s == "true" || s == "false" => Ok(Expr::Val(self.basic_literal()?)),
            Tok::Ident(s) if s == "_" => Err(self.err_here("`_` cannot be used as a value")),
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(Expr::Var(VarName::new(s)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                if self.eat(&Tok::RBracket) {
                    return Ok(Expr::Val(Value::EmptyList));
                }
                let mut elems = vec![self.expr()?];
                let mut tail = None;
                loop {
                    if self.eat(&Tok::Comma) {
                        elems.push(self.expr()?);
                    } else if self.eat(&Tok::Pipe) {
                        tail = Some(self.expr()?);
                        break;
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBracket, "`]`")?;
                let mut acc = tail.unwrap_or(Expr::Val(Value::EmptyList));
                for e in elems.into_iter().rev() {
                    acc = Expr::Cons(Box::new(e), Box::new(acc));
                }
                Ok(acc)
            }
            Tok::LBrace => {
                self.bump();
                let mut elems = Vec::new();
                if !matches!(self.peek(), Tok::RBrace) {
                    elems.push(self.expr()?);
                    while self.eat(&Tok::Comma) {
                        elems.push(self.expr()?);
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Expr::Tuple(elems))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div => 5,
    }
}

// ---------------------------------------------------------------------------
// Post-parse validation
// ---------------------------------------------------------------------------

fn validate(module: &Module) -> Vec<Diagnostic> {
    let mut problems = Vec::new();

    // Unique (name, arity) pairs.
    let mut seen = BTreeSet::new();
    for def in &module.defs {
        if !seen.insert(def.id.clone()) {
            problems.push(Diagnostic::error(
                Code::ParseDupFun,
                def.span,
                format!("duplicate definition of {}", def.id),
            ));
        }
    }

    for def in &module.defs {
        // Parameters pairwise distinct.
        let mut params = vec![def.dual_param.clone()];
        for p in &def.params {
            if params.contains(p) {
                problems.push(Diagnostic::error(
                    Code::ParseDupParam,
                    def.span,
                    format!("duplicate parameter {p} in {}", def.id),
                ));
            }
            params.push(p.clone());
        }

        // Public functions carry a session; private ones must not.
        match (def.visibility, &def.session) {
            (Visibility::Public, None) => problems.push(Diagnostic::error(
                Code::ParseNoSession,
                def.span,
                format!("public function {} has no @session or @dual annotation", def.id),
            )),
            (Visibility::Private, Some(_)) => problems.push(Diagnostic::error(
                Code::ParseSessionOnPrivate,
                def.span,
                format!("private function {} cannot have a session annotation", def.id),
            )),
            _ => {}
        }

        // The body is closed apart from the parameters.
        let mut free = def.body.free_vars();
        for p in &params {
            free.remove(p);
        }
        if let Some(x) = free.into_iter().next() {
            problems.push(Diagnostic::error(
                Code::ParseFreeVar,
                def.span,
                format!("undefined variable {x} in body of {}", def.id),
            ));
        }

        check_term_shape(&def.body, def.span, &mut problems);
    }

    problems
}

/// Structural checks inside bodies: receive labels pairwise distinct and
/// pattern-list variables pairwise distinct.
fn check_term_shape(t: &Term, span: Span, problems: &mut Vec<Diagnostic>) {
    match t {
        Term::Expr(_) | Term::Send { .. } | Term::Call { .. } => {}
        Term::Let { bound, body, .. } => {
            check_term_shape(bound, span, problems);
            check_term_shape(body, span, problems);
        }
        Term::Receive { branches } => {
            let mut labels = BTreeSet::new();
            for b in branches {
                if !labels.insert(b.label.clone()) {
                    problems.push(Diagnostic::error(
                        Code::ParseDupLabel,
                        span,
                        format!("duplicate label {} in receive", b.label),
                    ));
                }
                check_pattern_list(&b.patterns, span, problems);
                check_term_shape(&b.body, span, problems);
            }
        }
        Term::Case { branches, .. } => {
            for b in branches {
                check_pattern_list(std::slice::from_ref(&b.pattern), span, problems);
                check_term_shape(&b.body, span, problems);
            }
        }
    }
}

fn check_pattern_list(ps: &[Pattern], span: Span, problems: &mut Vec<Diagnostic>) {
    let mut seen: BTreeSet<VarName> = BTreeSet::new();
    let mut report = |x: &VarName| {
        if !x.is_wildcard() && !seen.insert(x.clone()) {
            problems.push(Diagnostic::error(
                Code::ParseDupParam,
                span,
                format!("variable {x} bound twice in one pattern list"),
            ));
        }
    };
    for p in ps {
        match p {
            Pattern::Var(x) => report(x),
            Pattern::Literal(_) => {}
            Pattern::Cons(a, b) => {
                for w in [a, b] {
                    if let IdPattern::Var(x) = w {
                        report(x);
                    }
                }
            }
            Pattern::Tuple(ws) => {
                for w in ws {
                    if let IdPattern::Var(x) = w {
                        report(x);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Module {
        parse_module(&SourceFile::new("test.exst", src)).expect("module should parse")
    }

    fn parse_err(src: &str) -> Vec<Diagnostic> {
        parse_module(&SourceFile::new("test.exst", src)).expect_err("module should not parse")
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
    fn parses_the_pinger_listing() {
        let m = parse(PINGER);
        assert_eq!(m.name, "Pinger");
        assert_eq!(m.defs.len(), 1);
        let def = &m.defs[0];
        assert_eq!(def.id, FunId::new("pinger", 1));
        assert_eq!(def.dual_param, VarName::new("pid"));
        assert!(def.params.is_empty());
        assert_eq!(def.return_type, ExprType::Atom);
        // @session "X = ..." parses as rec X.(...)
        let s = def.session.as_ref().unwrap().session();
        assert!(matches!(s, SessionType::Rec(x, _) if x == &RecVar::new("X")));
        // Body: let x = send in (let _ = receive in call)
        match &def.body {
            Term::Let { var, bound, body } => {
                assert_eq!(var, &VarName::new("x"));
                assert!(matches!(bound.as_ref(), Term::Send { .. }));
                match body.as_ref() {
                    Term::Let { var, bound, body } => {
                        assert!(var.is_wildcard());
                        assert!(matches!(bound.as_ref(), Term::Receive { .. }));
                        assert!(matches!(body.as_ref(), Term::Call { .. }));
                    }
                    other => panic!("expected let, got {other:?}"),
                }
            }
            other => panic!("expected let, got {other:?}"),
        }
    }

    #[test]
    fn empty_module_parses() {
        let m = parse("defmodule M do end");
        assert_eq!(m.name, "M");
        assert!(m.defs.is_empty());
    }

    #[test]
    fn duplicate_parameter_is_rejected() {
        let errs = parse_err(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid, number, number) :: atom
  def f(pid, x, x) do
    :ok
  end
end
"#,
        );
        assert!(errs.iter().any(|d| d.code == Code::ParseDupParam));
    }

    #[test]
    fn public_function_needs_session() {
        let errs = parse_err(
            r#"
defmodule M do
  @spec f(pid) :: atom
  def f(pid) do
    :ok
  end
end
"#,
        );
        assert!(errs.iter().any(|d| d.code == Code::ParseNoSession));
    }

    #[test]
    fn spec_arity_must_match() {
        let errs = parse_err(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid, number) :: atom
  def f(pid) do
    :ok
  end
end
"#,
        );
        assert!(errs.iter().any(|d| d.code == Code::ParseSpecArity));
    }

    #[test]
    fn free_variables_in_body_are_rejected() {
        let errs = parse_err(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid) :: number
  def f(pid) do
    x + 1
  end
end
"#,
        );
        assert!(errs.iter().any(|d| d.code == Code::ParseFreeVar));
    }

    #[test]
    fn dual_resolves_against_earlier_session() {
        let m = parse(
            r#"
defmodule M do
  @session "X = !a(number).X"
  @spec f(pid) :: atom
  def f(pid) do
    :ok
  end

  @dual "X"
  @spec g(pid) :: atom
  def g(pid) do
    :ok
  end
end
"#,
        );
        let f = &m.defs[0];
        let g = &m.defs[1];
        let expected = dual(f.session.as_ref().unwrap().session());
        assert_eq!(g.session.as_ref().unwrap().session(), &expected);
    }

    #[test]
    fn duplicate_receive_labels_rejected() {
        let errs = parse_err(
            r#"
defmodule M do
  @session "&{?a(), ?b()}"
  @spec f(pid) :: atom
  def f(pid) do
    receive do
      {:a} ->
        :ok
      {:a} ->
        :ok
    end
  end
end
"#,
        );
        assert!(errs.iter().any(|d| d.code == Code::ParseDupLabel));
    }

    #[test]
    fn case_branches_and_operators() {
        let m = parse(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid, number) :: number
  def f(pid, n) do
    case n < 10 do
      true ->
        n + 1
      false ->
        n * 2 - 1
    end
  end
end
"#,
        );
        match &m.defs[0].body {
            Term::Case { branches, .. } => assert_eq!(branches.len(), 2),
            other => panic!("expected case, got {other:?}"),
        }
    }

    #[test]
    fn list_sugar_builds_cons_chains() {
        let m = parse(
            r#"
defmodule M do
  @session "!a([number])"
  @spec f(pid) :: {atom, [number]}
  def f(pid) do
    send(pid, {:a, [1, 2 | []]})
  end
end
"#,
        );
        match &m.defs[0].body {
            Term::Send { args, .. } => match &args[0] {
                Expr::Cons(h, t) => {
                    assert_eq!(h.as_ref(), &Expr::Val(Value::int(1)));
                    assert!(matches!(t.as_ref(), Expr::Cons(..)));
                }
                other => panic!("expected cons, got {other:?}"),
            },
            other => panic!("expected send, got {other:?}"),
        }
    }

    #[test]
    fn block_parens_desugar_to_nested_let() {
        let m = parse(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid) :: number
  def f(pid) do
    x = (
      y = 1
      y + 1
    )
    x * 3
  end
end
"#,
        );
        match &m.defs[0].body {
            Term::Let { bound, .. } => assert!(matches!(bound.as_ref(), Term::Let { .. })),
            other => panic!("expected let, got {other:?}"),
        }
    }

    #[test]
    fn paren_expr_is_not_a_block() {
        let m = parse(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid, number) :: number
  def f(pid, n) do
    (n + 1) * 2
  end
end
"#,
        );
        match &m.defs[0].body {
            Term::Expr(Expr::BinOp(BinOp::Mul, ..)) => {}
            other => panic!("expected multiplication, got {other:?}"),
        }
    }

    #[test]
    fn trailing_wildcard_assignment_is_the_bare_term() {
        let m = parse(
            r#"
defmodule M do
  @session "!a()"
  @spec f(pid) :: {atom}
  def f(pid) do
    _ = send(pid, {:a})
  end
end
"#,
        );
        assert!(matches!(m.defs[0].body, Term::Send { .. }));
        // And it survives the print-parse round trip.
        let printed = crate::parser::print_module(&m);
        let reparsed = parse_module(&SourceFile::new("p", &printed)).unwrap();
        assert_eq!(reparsed, m);
    }

    #[test]
    fn parse_value_literals() {
        assert_eq!(parse_value("42").unwrap(), Value::int(42));
        assert_eq!(parse_value("-3").unwrap(), Value::int(-3));
        assert_eq!(parse_value(":ok").unwrap(), Value::atom("ok"));
        assert_eq!(
            parse_value("[1, 2]").unwrap(),
            Value::Cons(
                Box::new(Value::int(1)),
                Box::new(Value::Cons(
                    Box::new(Value::int(2)),
                    Box::new(Value::EmptyList)
                ))
            )
        );
        assert_eq!(
            parse_value("{true, 1.5}").unwrap(),
            Value::Tuple(vec![Value::Boolean(true), Value::float(1.5)])
        );
        assert!(parse_value("x").is_err());
        assert!(parse_value("1 + 2").is_err());
    }
}
