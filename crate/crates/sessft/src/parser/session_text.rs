//! Parser for session-type strings as they appear in `@session`
//! annotations and on the command line.
//!
//! Accepted syntax:
//!
//! ```text
//! session := UIDENT "=" sess          header form, X = S means rec X.S
//!          | sess
//! sess    := "&" "{" in ("," in)* "}"
//!          | "+" "{" out ("," out)* "}"
//!          | in | out                  singleton options drop the wrapper
//!          | "rec" UIDENT "." sess
//!          | "(" sess ")"
//!          | UIDENT                    recursion variable
//!          | "end"
//! in      := "?" label "(" types? ")" ("." sess)?
//! out     := "!" label "(" types? ")" ("." sess)?
//! type    := "boolean" | "number" | "atom" | "pid"
//!          | "[" type "]" | "{" types? "}"
//! ```
//!
//! A missing continuation stands for `.end`. The result is checked for
//! well-formedness: distinct labels, bound recursion variables and
//! contractive recursion.

use crate::ast::{ExprType, Label, RecVar, SessionOption, SessionType};
use crate::diag::{Code, Diagnostic, Span};
use crate::session::well_formed;

pub fn parse_session_type(text: &str) -> Result<SessionType, Diagnostic> {
    let mut p = SessParser::new(text);
    p.skip_ws();
    let session = if let Some(name) = p.peek_header_name() {
        p.take_ident();
        p.skip_ws();
        p.expect_char('=')?;
        let body = p.parse_sess()?;
        SessionType::Rec(RecVar::new(name), Box::new(body))
    } else {
        p.parse_sess()?
    };
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.err(format!(
            "unexpected `{}` after session type",
            p.chars[p.pos]
        )));
    }
    well_formed(&session)?;
    Ok(session)
}

struct SessParser {
    chars: Vec<char>,
    pos: usize,
}

impl SessParser {
    fn new(text: &str) -> Self {
        SessParser {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(
            Code::SessionSyntax,
            Span::new(1, self.pos as u32 + 1, 1),
            msg,
        )
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect_char(&mut self, c: char) -> Result<(), Diagnostic> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn take_ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == '_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// Looks ahead for the `X =` header without consuming anything.
    fn peek_header_name(&self) -> Option<String> {
        let mut i = self.pos;
        if !self.chars.get(i)?.is_ascii_uppercase() {
            return None;
        }
        let start = i;
        while i < self.chars.len()
            && (self.chars[i].is_ascii_alphanumeric() || self.chars[i] == '_')
        {
            i += 1;
        }
        let name: String = self.chars[start..i].iter().collect();
        while i < self.chars.len() && self.chars[i].is_whitespace() {
            i += 1;
        }
        if self.chars.get(i) == Some(&'=') {
            Some(name)
        } else {
            None
        }
    }

    fn parse_sess(&mut self) -> Result<SessionType, Diagnostic> {
        self.skip_ws();
        match self.peek() {
            Some('&') => {
                self.pos += 1;
                let opts = self.parse_option_set('?')?;
                Ok(SessionType::Branch(opts))
            }
            Some('+') => {
                self.pos += 1;
                let opts = self.parse_option_set('!')?;
                Ok(SessionType::Choice(opts))
            }
            Some('?') => Ok(SessionType::Branch(vec![self.parse_option('?')?])),
            Some('!') => Ok(SessionType::Choice(vec![self.parse_option('!')?])),
            Some('(') => {
                self.pos += 1;
                let s = self.parse_sess()?;
                self.expect_char(')')?;
                Ok(s)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let word = self.take_ident();
                match word.as_str() {
                    "end" => Ok(SessionType::End),
                    "rec" => {
                        self.skip_ws();
                        let name = self.take_ident();
                        if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_uppercase()) {
                            return Err(self.err("expected recursion variable after `rec`"));
                        }
                        self.expect_char('.')?;
                        let body = self.parse_sess()?;
                        Ok(SessionType::Rec(RecVar::new(name), Box::new(body)))
                    }
                    other => Err(self.err(format!("unexpected `{other}` in session type"))),
                }
            }
            Some(c) if c.is_ascii_uppercase() => {
                let name = self.take_ident();
                Ok(SessionType::Var(RecVar::new(name)))
            }
            Some(c) => Err(self.err(format!("unexpected `{c}` in session type"))),
            None => Err(self.err("unexpected end of session type")),
        }
    }

    fn parse_option_set(&mut self, prefix: char) -> Result<Vec<SessionOption>, Diagnostic> {
        self.expect_char('{')?;
        let mut opts = vec![self.parse_prefixed_option(prefix)?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    opts.push(self.parse_prefixed_option(prefix)?);
                }
                Some('}') => {
                    self.pos += 1;
                    return Ok(opts);
                }
                _ => return Err(self.err("expected `,` or `}` in option set")),
            }
        }
    }

    fn parse_prefixed_option(&mut self, prefix: char) -> Result<SessionOption, Diagnostic> {
        self.skip_ws();
        if self.peek() != Some(prefix) {
            return Err(self.err(format!("expected `{prefix}` option")));
        }
        self.parse_option(prefix)
    }

    /// Parses `?l(T, ..).S` / `!l(T, ..).S` with the leading prefix present.
    fn parse_option(&mut self, prefix: char) -> Result<SessionOption, Diagnostic> {
        debug_assert_eq!(self.peek(), Some(prefix));
        self.pos += 1;
        let label = self.take_ident();
        if label.is_empty() || !label.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(self.err("expected label"));
        }
        self.expect_char('(')?;
        let mut payloads = Vec::new();
        self.skip_ws();
        if self.peek() != Some(')') {
            payloads.push(self.parse_type()?);
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(',') => {
                        self.pos += 1;
                        payloads.push(self.parse_type()?);
                    }
                    Some(')') => break,
                    _ => return Err(self.err("expected `,` or `)` in payload list")),
                }
            }
        }
        self.expect_char(')')?;
        self.skip_ws();
        let cont = if self.peek() == Some('.') {
            self.pos += 1;
            self.parse_sess()?
        } else {
            SessionType::End
        };
        Ok(SessionOption {
            label: Label::new(label),
            payloads,
            cont,
        })
    }

    fn parse_type(&mut self) -> Result<ExprType, Diagnostic> {
        self.skip_ws();
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let elem = self.parse_type()?;
                self.skip_ws();
                self.expect_char(']')?;
                Ok(ExprType::List(Box::new(elem)))
            }
            Some('{') => {
                self.pos += 1;
                let mut elems = Vec::new();
                self.skip_ws();
                if self.peek() != Some('}') {
                    elems.push(self.parse_type()?);
                    loop {
                        self.skip_ws();
                        match self.peek() {
                            Some(',') => {
                                self.pos += 1;
                                elems.push(self.parse_type()?);
                            }
                            Some('}') => break,
                            _ => return Err(self.err("expected `,` or `}` in tuple type")),
                        }
                    }
                }
                self.expect_char('}')?;
                Ok(ExprType::Tuple(elems))
            }
            Some(c) if c.is_ascii_lowercase() => {
                let name = self.take_ident();
                match name.as_str() {
                    "boolean" => Ok(ExprType::Boolean),
                    "number" => Ok(ExprType::Number),
                    "atom" => Ok(ExprType::Atom),
                    "pid" => Ok(ExprType::Pid),
                    other => Err(self.err(format!("unknown payload type `{other}`"))),
                }
            }
            _ => Err(self.err("expected a payload type")),
        }
    }
}
