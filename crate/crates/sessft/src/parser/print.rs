//! Pretty-printer. Output is canonical source text that reparses to a
//! structurally equal module.

use crate::ast::{
    BinOp, Expr, ExprType, FunDef, IdPattern, Module, Pattern, SessionAnn, SessionType, Term,
    Value, Visibility,
};

/// Renders a session type in the annotation-friendly form: a top-level
/// recursion prints as a named header `X = S`, everything else inline.
pub fn print_session(s: &SessionType) -> String {
    match s {
        SessionType::Rec(x, body) => format!("{x} = {body}"),
        other => other.to_string(),
    }
}

/// Renders a module as canonical source text.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    out.push_str(&format!("defmodule {} do\n", m.name));
    for (i, def) in m.defs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_def(&mut out, def);
    }
    out.push_str("end\n");
    out
}

fn print_def(out: &mut String, def: &FunDef) {
    match &def.session {
        Some(SessionAnn::Session(s)) => {
            out.push_str(&format!("  @session \"{}\"\n", print_session(s)));
        }
        Some(SessionAnn::Dual { name, .. }) => {
            out.push_str(&format!("  @dual \"{name}\"\n"));
        }
        None => {}
    }
    let mut spec_types = vec![ExprType::Pid];
    spec_types.extend(def.param_types.iter().cloned());
    let types = spec_types
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!(
        "  @spec {}({}) :: {}\n",
        def.id.name, types, def.return_type
    ));
    let kw = match def.visibility {
        Visibility::Public => "def",
        Visibility::Private => "defp",
    };
    let mut params = vec![def.dual_param.to_string()];
    params.extend(def.params.iter().map(|p| p.to_string()));
    out.push_str(&format!(
        "  {kw} {}({}) do\n",
        def.id.name,
        params.join(", ")
    ));
    print_body(out, &def.body, 2);
    out.push_str("  end\n");
}

/// One statement of a flattened `let` spine.
struct StmtView<'a> {
    binder: Option<&'a crate::ast::VarName>,
    term: &'a Term,
}

/// Flattens a term into the statement sequence it desugared from.
fn stmts_of(t: &Term) -> Vec<StmtView<'_>> {
    let mut out = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Let { var, bound, body } => {
                // A trailing `x = t` desugars to `let x = t in x`; print it
                // back as the single assignment.
                if !var.is_wildcard() && matches!(body.as_ref(), Term::Expr(Expr::Var(v)) if v == var)
                {
                    out.push(StmtView {
                        binder: Some(var),
                        term: bound,
                    });
                    return out;
                }
                out.push(StmtView {
                    binder: if var.is_wildcard() { None } else { Some(var) },
                    term: bound,
                });
                cur = body;
            }
            other => {
                out.push(StmtView {
                    binder: None,
                    term: other,
                });
                return out;
            }
        }
    }
}

fn print_body(out: &mut String, t: &Term, level: usize) {
    for stmt in stmts_of(t) {
        print_stmt(out, &stmt, level);
    }
}

fn print_stmt(out: &mut String, stmt: &StmtView<'_>, level: usize) {
    let pad = "  ".repeat(level);
    out.push_str(&pad);
    if let Some(x) = stmt.binder {
        out.push_str(&format!("{x} = "));
    }
    print_term(out, stmt.term, level);
    out.push('\n');
}

fn print_term(out: &mut String, t: &Term, level: usize) {
    let pad = "  ".repeat(level);
    match t {
        Term::Expr(e) => out.push_str(&print_expr(e)),
        Term::Let { .. } => {
            // A let in value position renders as a parenthesized block.
            out.push_str("(\n");
            print_body(out, t, level + 1);
            out.push_str(&pad);
            out.push(')');
        }
        Term::Send { dest, label, args } => {
            out.push_str(&format!("send({dest}, {{:{label}"));
            for a in args {
                out.push_str(&format!(", {}", print_expr(a)));
            }
            out.push_str("})");
        }
        Term::Receive { branches } => {
            out.push_str("receive do\n");
            for b in branches {
                out.push_str(&format!("{pad}  {{:{}", b.label));
                for p in &b.patterns {
                    out.push_str(&format!(", {}", print_pattern(p)));
                }
                out.push_str("} ->\n");
                print_body(out, &b.body, level + 2);
            }
            out.push_str(&pad);
            out.push_str("end");
        }
        Term::Call { fun, dest, args } => {
            out.push_str(&format!("{fun}({dest}"));
            for a in args {
                out.push_str(&format!(", {}", print_expr(a)));
            }
            out.push(')');
        }
        Term::Case {
            scrutinee,
            branches,
        } => {
            out.push_str(&format!("case {} do\n", print_expr(scrutinee)));
            for b in branches {
                out.push_str(&format!("{pad}  {} ->\n", print_pattern(&b.pattern)));
                print_body(out, &b.body, level + 2);
            }
            out.push_str(&pad);
            out.push_str("end");
        }
    }
}

fn print_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Literal(v) => v.to_string(),
        Pattern::Var(x) => x.to_string(),
        Pattern::Cons(h, t) => format!("[{} | {}]", print_id_pattern(h), print_id_pattern(t)),
        Pattern::Tuple(ws) => {
            let elems = ws.iter().map(print_id_pattern).collect::<Vec<_>>();
            format!("{{{}}}", elems.join(", "))
        }
    }
}

fn print_id_pattern(w: &IdPattern) -> String {
    match w {
        IdPattern::Literal(v) => v.to_string(),
        IdPattern::Var(x) => x.to_string(),
    }
}

pub(crate) fn print_expr(e: &Expr) -> String {
    print_expr_prec(e, 1)
}

fn print_expr_prec(e: &Expr, min_prec: u8) -> String {
    match e {
        Expr::Val(v) => v.to_string(),
        Expr::Var(x) => x.to_string(),
        Expr::Not(inner) => format!("not {}", print_expr_prec(inner, 6)),
        Expr::BinOp(op, l, r) => {
            let prec = op_prec(*op);
            let text = format!(
                "{} {} {}",
                print_expr_prec(l, prec),
                op,
                print_expr_prec(r, prec + 1)
            );
            if prec < min_prec {
                format!("({text})")
            } else {
                text
            }
        }
        Expr::Cons(..) => {
            // Collect the cons spine; a chain ending in [] prints in element
            // form, anything else keeps the final cons explicit.
            let mut elems = Vec::new();
            let mut cur = e;
            loop {
                match cur {
                    Expr::Cons(h, t) => {
                        elems.push(print_expr(h));
                        cur = t;
                    }
                    Expr::Val(Value::EmptyList) => {
                        return format!("[{}]", elems.join(", "));
                    }
                    other => {
                        return format!("[{} | {}]", elems.join(", "), print_expr(other));
                    }
                }
            }
        }
        Expr::Tuple(es) => {
            let elems = es.iter().map(print_expr).collect::<Vec<_>>();
            format!("{{{}}}", elems.join(", "))
        }
    }
}

fn op_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div => 5,
    }
}
