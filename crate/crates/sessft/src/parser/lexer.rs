//! Token stream for `.exst` source files.
//!
//! Newlines are significant (they separate statements) and are emitted as
//! tokens; runs of blank lines collapse into one. Comments run from `#` to
//! the end of the line.

use crate::diag::{Code, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Lowercase-start identifier: variables, function names, keywords.
    Ident(String),
    /// Uppercase-start identifier, possibly dotted: module names.
    UpIdent(String),
    /// `:name`
    AtomLit(String),
    Int(i64),
    Float(f64),
    /// Double-quoted string (annotation payloads).
    Str(String),
    /// `@name`
    Annotation(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Pipe,
    Arrow,
    Assign,
    ColonColon,
    EqEq,
    NotEq,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::UpIdent(s) => format!("`{s}`"),
            Tok::AtomLit(s) => format!("`:{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(x) => format!("`{x:?}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Annotation(s) => format!("`@{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Assign => "`=`".into(),
            Tok::ColonColon => "`::`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $len:expr) => {
            out.push(Token {
                tok: $tok,
                span: Span::new(line, col, $len as u32),
            })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                if !matches!(out.last().map(|t: &Token| &t.tok), Some(Tok::Newline) | None) {
                    push!(Tok::Newline, 1);
                }
                i += 1;
                line += 1;
                col = 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            ';' => {
                if !matches!(out.last().map(|t: &Token| &t.tok), Some(Tok::Newline) | None) {
                    push!(Tok::Newline, 1);
                }
                i += 1;
                col += 1;
            }
            '(' => {
                push!(Tok::LParen, 1);
                i += 1;
                col += 1;
            }
            ')' => {
                push!(Tok::RParen, 1);
                i += 1;
                col += 1;
            }
            '{' => {
                push!(Tok::LBrace, 1);
                i += 1;
                col += 1;
            }
            '}' => {
                push!(Tok::RBrace, 1);
                i += 1;
                col += 1;
            }
            '[' => {
                push!(Tok::LBracket, 1);
                i += 1;
                col += 1;
            }
            ']' => {
                push!(Tok::RBracket, 1);
                i += 1;
                col += 1;
            }
            ',' => {
                push!(Tok::Comma, 1);
                i += 1;
                col += 1;
            }
            '|' => {
                push!(Tok::Pipe, 1);
                i += 1;
                col += 1;
            }
            '+' => {
                push!(Tok::Plus, 1);
                i += 1;
                col += 1;
            }
            '*' => {
                push!(Tok::Star, 1);
                i += 1;
                col += 1;
            }
            '/' => {
                push!(Tok::Slash, 1);
                i += 1;
                col += 1;
            }
            '-' => {
                if i + 1 < chars.len() && chars[i + 1] == '>' {
                    push!(Tok::Arrow, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Minus, 1);
                    i += 1;
                    col += 1;
                }
            }
            '=' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(Tok::EqEq, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Assign, 1);
                    i += 1;
                    col += 1;
                }
            }
            '!' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(Tok::NotEq, 2);
                    i += 2;
                    col += 2;
                } else {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        Span::new(line, col, 1),
                        "unexpected `!`",
                    ));
                }
            }
            '<' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(Tok::Le, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Lt, 1);
                    i += 1;
                    col += 1;
                }
            }
            '>' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(Tok::Ge, 2);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Gt, 1);
                    i += 1;
                    col += 1;
                }
            }
            ':' => {
                if i + 1 < chars.len() && chars[i + 1] == ':' {
                    push!(Tok::ColonColon, 2);
                    i += 2;
                    col += 2;
                } else if i + 1 < chars.len() && is_ident_start(chars[i + 1]) {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    let name: String = chars[start..j].iter().collect();
                    let len = j - i;
                    push!(Tok::AtomLit(name), len);
                    col += len as u32;
                    i = j;
                } else {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        Span::new(line, col, 1),
                        "expected atom name after `:`",
                    ));
                }
            }
            '@' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                if j == start {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        Span::new(line, col, 1),
                        "expected annotation name after `@`",
                    ));
                }
                let name: String = chars[start..j].iter().collect();
                let len = j - i;
                push!(Tok::Annotation(name), len);
                col += len as u32;
                i = j;
            }
            '"' => {
                let mut j = i + 1;
                let mut s = String::new();
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    s.push(chars[j]);
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '"' {
                    return Err(Diagnostic::error(
                        Code::ParseSyntax,
                        Span::new(line, col, (j - i) as u32),
                        "unterminated string literal",
                    ));
                }
                let len = j + 1 - i;
                push!(Tok::Str(s), len);
                col += len as u32;
                i = j + 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let mut is_float = false;
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    is_float = true;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        is_float = true;
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let len = j - start;
                if is_float {
                    let x: f64 = text.parse().map_err(|_| {
                        Diagnostic::error(
                            Code::ParseSyntax,
                            Span::new(line, col, len as u32),
                            format!("invalid number literal `{text}`"),
                        )
                    })?;
                    push!(Tok::Float(x), len);
                } else {
                    let n: i64 = text.parse().map_err(|_| {
                        Diagnostic::error(
                            Code::ParseSyntax,
                            Span::new(line, col, len as u32),
                            format!("integer literal `{text}` out of range"),
                        )
                    })?;
                    push!(Tok::Int(n), len);
                }
                col += len as u32;
                i = j;
            }
            c if c.is_ascii_uppercase() => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (is_ident_char(chars[j]) || chars[j] == '.') {
                    // A dot must be followed by an uppercase segment.
                    if chars[j] == '.' {
                        if j + 1 < chars.len() && chars[j + 1].is_ascii_uppercase() {
                            j += 1;
                        } else {
                            break;
                        }
                    } else {
                        j += 1;
                    }
                }
                let name: String = chars[start..j].iter().collect();
                let len = j - start;
                push!(Tok::UpIdent(name), len);
                col += len as u32;
                i = j;
            }
            c if is_ident_start(c) => {
                let start = i;
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let name: String = chars[start..j].iter().collect();
                let len = j - start;
                push!(Tok::Ident(name), len);
                col += len as u32;
                i = j;
            }
            other => {
                return Err(Diagnostic::error(
                    Code::ParseSyntax,
                    Span::new(line, col, 1),
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col, 0),
    });
    Ok(out)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}
