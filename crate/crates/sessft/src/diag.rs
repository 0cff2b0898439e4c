//! Diagnostics: stable error codes, source spans and rendering.
//!
//! Every user-facing failure in the toolkit is a [`Diagnostic`] carrying a
//! code from a fixed catalogue. The codes are a contract: tests and tooling
//! match on them, so they never change meaning.

use serde::Serialize;
use std::fmt;

/// Severity of a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// 1-based source position with the length of the offending lexeme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }

    /// Span for diagnostics that have no better anchor than the file start.
    pub fn start() -> Self {
        Span::new(1, 1, 0)
    }
}

/// The fixed catalogue of diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Code {
    // Surface syntax and module-shape errors.
    ParseSyntax,
    ParseDupFun,
    ParseDupParam,
    ParseDupLabel,
    ParseNoSession,
    ParseSessionOnPrivate,
    ParseNoSpec,
    ParseSpecArity,
    ParseFreeVar,
    // Session-type string errors.
    SessionSyntax,
    SessionDupLabel,
    SessionUnbound,
    SessionNonContractive,
    // Typechecker errors.
    TypeVar,
    TypeExpr,
    TypeChoice,
    TypeBranch,
    TypeAddressee,
    TypePayload,
    TypePattern,
    TypeDupVar,
    TypeShadow,
    TypeJoin,
    TypeCall,
    TypeArity,
    TypeUnknownFun,
    TypeResidual,
    TypeReturn,
    TypeRebind,
    TypeRecursion,
    // Runtime errors.
    RunArith,
    RunOverflow,
    RunList,
    RunMatch,
    RunBadPid,
    RunUnbound,
    RunUnknownFun,
    // Warnings.
    WarnNonDual,
    WarnRebind,
    // Command-line front end.
    CliIo,
    CliArgs,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::ParseSyntax => "PARSE-SYNTAX",
            Code::ParseDupFun => "PARSE-DUPFUN",
            Code::ParseDupParam => "PARSE-DUPPARAM",
            Code::ParseDupLabel => "PARSE-DUPLABEL",
            Code::ParseNoSession => "PARSE-NOSESSION",
            Code::ParseSessionOnPrivate => "PARSE-SESSION-ON-PRIVATE",
            Code::ParseNoSpec => "PARSE-NOSPEC",
            Code::ParseSpecArity => "PARSE-SPECARITY",
            Code::ParseFreeVar => "PARSE-FREEVAR",
            Code::SessionSyntax => "SESSION-SYNTAX",
            Code::SessionDupLabel => "SESSION-DUPLABEL",
            Code::SessionUnbound => "SESSION-UNBOUND",
            Code::SessionNonContractive => "SESSION-NONCONTRACTIVE",
            Code::TypeVar => "TYPE-VAR",
            Code::TypeExpr => "TYPE-EXPR",
            Code::TypeChoice => "TYPE-CHOICE",
            Code::TypeBranch => "TYPE-BRANCH",
            Code::TypeAddressee => "TYPE-ADDRESSEE",
            Code::TypePayload => "TYPE-PAYLOAD",
            Code::TypePattern => "TYPE-PATTERN",
            Code::TypeDupVar => "TYPE-DUPVAR",
            Code::TypeShadow => "TYPE-SHADOW",
            Code::TypeJoin => "TYPE-JOIN",
            Code::TypeCall => "TYPE-CALL",
            Code::TypeArity => "TYPE-ARITY",
            Code::TypeUnknownFun => "TYPE-UNKNOWN-FUN",
            Code::TypeResidual => "TYPE-RESIDUAL",
            Code::TypeReturn => "TYPE-RETURN",
            Code::TypeRebind => "TYPE-REBIND",
            Code::TypeRecursion => "TYPE-RECURSION",
            Code::RunArith => "RUN-ARITH",
            Code::RunOverflow => "RUN-OVERFLOW",
            Code::RunList => "RUN-LIST",
            Code::RunMatch => "RUN-MATCH",
            Code::RunBadPid => "RUN-BADPID",
            Code::RunUnbound => "RUN-UNBOUND",
            Code::RunUnknownFun => "RUN-UNKNOWN-FUN",
            Code::WarnNonDual => "WARN-NONDUAL",
            Code::WarnRebind => "WARN-REBIND",
            Code::CliIo => "CLI-IO",
            Code::CliArgs => "CLI-ARGS",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single reported problem, renderable as text or JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    #[serde(serialize_with = "serialize_code")]
    pub code: Code,
    pub message: String,
    /// Name of the typing rule that failed, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<&'static str>,
}

fn serialize_code<S: serde::Serializer>(code: &Code, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(code.as_str())
}

impl Diagnostic {
    pub fn error(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            code,
            message: message.into(),
            rule: None,
        }
    }

    pub fn warning(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            span,
            code,
            message: message.into(),
            rule: None,
        }
    }

    pub fn with_rule(mut self, rule: &'static str) -> Self {
        self.rule = Some(rule);
        self
    }

    /// Render as `file:line:col: severity CODE message`.
    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        format!(
            "{}:{}:{}: {} {} {}",
            file, self.span.line, self.span.col, sev, self.code, self.message
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {} {} {}",
            self.span.line, self.span.col, sev, self.code, self.message
        )
    }
}
