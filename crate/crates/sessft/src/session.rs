//! Session type algebra: duality, equi-recursive unfolding and equivalence,
//! well-formedness, and the `after` functions that advance a protocol past
//! an action.
//!
//! `after` is the runtime face of the protocol: it is defined exactly on the
//! actions a session type permits next, so an undefined result is a protocol
//! violation, reported as a value rather than an error.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::ast::{FunId, Label, ProcessId, RecVar, SessionOption, SessionType, Value};
use crate::diag::{Code, Diagnostic, Span};

/// Side-effect label of one execution step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    /// Message sent to `dest`.
    Output {
        dest: Value,
        label: Label,
        payload: Vec<Value>,
    },
    /// Message consumed from the mailbox.
    Input { label: Label, payload: Vec<Value> },
    /// Function call.
    Call(FunId),
    /// Internal reduction.
    Tau,
}

impl Action {
    pub fn output(dest: ProcessId, label: impl Into<String>, payload: Vec<Value>) -> Self {
        Action::Output {
            dest: Value::Pid(dest),
            label: Label::new(label),
            payload,
        }
    }

    pub fn input(label: impl Into<String>, payload: Vec<Value>) -> Self {
        Action::Input {
            label: Label::new(label),
            payload,
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Action::Output { .. } | Action::Input { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Output {
                dest,
                label,
                payload,
            } => {
                write!(f, "!{dest}{{{label}")?;
                for v in payload {
                    write!(f, ", {v}")?;
                }
                f.write_str("}")
            }
            Action::Input { label, payload } => {
                write!(f, "?{{{label}")?;
                for v in payload {
                    write!(f, ", {v}")?;
                }
                f.write_str("}")
            }
            Action::Call(id) => write!(f, "call {id}"),
            Action::Tau => f.write_str("tau"),
        }
    }
}

/// Session typing environment: function identifiers to session types.
pub type SessionEnv = BTreeMap<FunId, SessionType>;

// ---------------------------------------------------------------------------
// Duality
// ---------------------------------------------------------------------------

/// The dual endpoint type: branches become choices and vice versa, leaving
/// labels, payload types and recursion untouched. An involution.
pub fn dual(s: &SessionType) -> SessionType {
    match s {
        SessionType::Branch(opts) => SessionType::Choice(dual_options(opts)),
        SessionType::Choice(opts) => SessionType::Branch(dual_options(opts)),
        SessionType::Rec(x, body) => SessionType::Rec(x.clone(), Box::new(dual(body))),
        SessionType::Var(x) => SessionType::Var(x.clone()),
        SessionType::End => SessionType::End,
    }
}

fn dual_options(opts: &[SessionOption]) -> Vec<SessionOption> {
    opts.iter()
        .map(|o| SessionOption {
            label: o.label.clone(),
            payloads: o.payloads.clone(),
            cont: dual(&o.cont),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Unfolding
// ---------------------------------------------------------------------------

/// Substitutes `replacement` for free occurrences of `var`, respecting
/// shadowing by inner `rec` binders with the same name.
fn subst_rec(s: &SessionType, var: &RecVar, replacement: &SessionType) -> SessionType {
    match s {
        SessionType::Branch(opts) => SessionType::Branch(subst_options(opts, var, replacement)),
        SessionType::Choice(opts) => SessionType::Choice(subst_options(opts, var, replacement)),
        SessionType::Rec(x, _) if x == var => s.clone(),
        SessionType::Rec(x, body) => {
            SessionType::Rec(x.clone(), Box::new(subst_rec(body, var, replacement)))
        }
        SessionType::Var(x) if x == var => replacement.clone(),
        SessionType::Var(_) => s.clone(),
        SessionType::End => SessionType::End,
    }
}

fn subst_options(
    opts: &[SessionOption],
    var: &RecVar,
    replacement: &SessionType,
) -> Vec<SessionOption> {
    opts.iter()
        .map(|o| SessionOption {
            label: o.label.clone(),
            payloads: o.payloads.clone(),
            cont: subst_rec(&o.cont, var, replacement),
        })
        .collect()
}

/// Unfolds leading recursion until the head is a branch, choice or `end`.
/// Terminates because well-formed session types are contractive.
pub fn unfold(s: &SessionType) -> SessionType {
    let mut current = s.clone();
    // The spine of a contractive type holds strictly fewer nested recs each
    // round; the bound only guards against malformed input.
    let mut guard = 0usize;
    while let SessionType::Rec(x, body) = &current {
        let whole = current.clone();
        current = subst_rec(body, x, &whole);
        guard += 1;
        if guard > 1_000 {
            debug_assert!(false, "unfold guard tripped: non-contractive session type");
            break;
        }
    }
    current
}

// ---------------------------------------------------------------------------
// Well-formedness
// ---------------------------------------------------------------------------

/// Checks label distinctness, closedness of recursion variables and
/// contractivity. Returns a diagnostic naming the violated condition.
pub fn well_formed(s: &SessionType) -> Result<(), Diagnostic> {
    check_wf(s, &mut Vec::new())
}

fn check_wf(s: &SessionType, scope: &mut Vec<RecVar>) -> Result<(), Diagnostic> {
    match s {
        SessionType::Branch(opts) | SessionType::Choice(opts) => {
            let mut seen = BTreeSet::new();
            for o in opts {
                if !seen.insert(&o.label) {
                    return Err(Diagnostic::error(
                        Code::SessionDupLabel,
                        Span::start(),
                        format!("duplicate label {} in branch/choice", o.label),
                    ));
                }
            }
            for o in opts {
                check_wf(&o.cont, scope)?;
            }
            Ok(())
        }
        SessionType::Rec(x, body) => {
            // Contractivity: walking the rec/var spine from here must reach
            // a branch, choice or end without looping back into the spine.
            let mut spine = vec![x.clone()];
            let mut cur = body.as_ref();
            loop {
                match cur {
                    SessionType::Rec(y, inner) => {
                        spine.push(y.clone());
                        cur = inner;
                    }
                    SessionType::Var(y) if spine.contains(y) => {
                        return Err(Diagnostic::error(
                            Code::SessionNonContractive,
                            Span::start(),
                            format!("non-contractive recursion through {y}"),
                        ));
                    }
                    _ => break,
                }
            }
            scope.push(x.clone());
            let result = check_wf(body, scope);
            scope.pop();
            result
        }
        SessionType::Var(x) => {
            if scope.contains(x) {
                Ok(())
            } else {
                Err(Diagnostic::error(
                    Code::SessionUnbound,
                    Span::start(),
                    format!("unbound recursion variable {x}"),
                ))
            }
        }
        SessionType::End => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Equivalence
// ---------------------------------------------------------------------------

/// Equi-recursive equivalence: two session types are equal when their
/// infinite unfoldings are bisimilar. Option order inside a branch or choice
/// is irrelevant; payload types compare structurally.
///
/// Decidable because only finitely many subterms are reachable through
/// unfolding; pairs assumed equal during the walk are recorded and reused,
/// which is what makes the check coinductive.
pub fn session_equal(s1: &SessionType, s2: &SessionType) -> bool {
    let mut assumed = HashSet::new();
    bisim(s1, s2, &mut assumed)
}

fn bisim(
    s1: &SessionType,
    s2: &SessionType,
    assumed: &mut HashSet<(SessionType, SessionType)>,
) -> bool {
    use std::borrow::Cow;
    // Cycles only arise through recursion; structural descent on anything
    // else strictly shrinks, so only rec-headed pairs enter the memo.
    let recursive = matches!(s1, SessionType::Rec(..)) || matches!(s2, SessionType::Rec(..));
    if recursive && !assumed.insert((s1.clone(), s2.clone())) {
        return true;
    }
    let u1 = if matches!(s1, SessionType::Rec(..)) {
        Cow::Owned(unfold(s1))
    } else {
        Cow::Borrowed(s1)
    };
    let u2 = if matches!(s2, SessionType::Rec(..)) {
        Cow::Owned(unfold(s2))
    } else {
        Cow::Borrowed(s2)
    };
    match (u1.as_ref(), u2.as_ref()) {
        (SessionType::End, SessionType::End) => true,
        (SessionType::Branch(a), SessionType::Branch(b))
        | (SessionType::Choice(a), SessionType::Choice(b)) => {
            if a.len() != b.len() {
                return false;
            }
            a.iter().all(|oa| {
                b.iter().any(|ob| {
                    oa.label == ob.label
                        && oa.payloads == ob.payloads
                        && bisim(&oa.cont, &ob.cont, assumed)
                })
            })
        }
        // Free variables only arise when comparing open types directly;
        // they are equal to themselves alone.
        (SessionType::Var(x), SessionType::Var(y)) => x == y,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// The after function
// ---------------------------------------------------------------------------

/// Advances a session type past one action.
///
/// Internal actions (`tau`, calls) leave the type unchanged. An output
/// advances an (unfolded) choice along the matching label, an input advances
/// a branch. Every other combination is undefined — `None` — which signals a
/// protocol violation to the caller.
pub fn after_session(s: &SessionType, action: &Action) -> Option<SessionType> {
    match action {
        Action::Tau | Action::Call(_) => Some(s.clone()),
        Action::Output { label, .. } => match unfold(s) {
            SessionType::Choice(opts) => opts
                .into_iter()
                .find(|o| &o.label == label)
                .map(|o| o.cont),
            _ => None,
        },
        Action::Input { label, .. } => match unfold(s) {
            SessionType::Branch(opts) => opts
                .into_iter()
                .find(|o| &o.label == label)
                .map(|o| o.cont),
            _ => None,
        },
    }
}

/// Advances a session typing environment past one action: a call binds the
/// called function to the session type in force at the call, everything else
/// leaves the environment unchanged.
///
/// Rebinding an already-mapped function to an equivalent session is silent;
/// an inequivalent rebinding keeps the new binding and returns a warning.
pub fn after_env(
    env: &SessionEnv,
    action: &Action,
    s: &SessionType,
) -> (SessionEnv, Option<Diagnostic>) {
    match action {
        Action::Call(id) => {
            let mut out = env.clone();
            let warning = match out.get(id) {
                Some(prev) if !session_equal(prev, s) => Some(Diagnostic::warning(
                    Code::WarnRebind,
                    Span::start(),
                    format!("{id} rebound to a session not equivalent to its previous binding"),
                )),
                _ => None,
            };
            out.insert(id.clone(), s.clone());
            (out, warning)
        }
        _ => (env.clone(), None),
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

impl fmt::Display for SessionType {
    /// Inline form: `!l(T).S`, `&{..}`/`+{..}` for multiple options,
    /// `rec X.(S)` for recursion, with trailing `.end` omitted. The result
    /// reparses to a structurally equal type.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionType::End => f.write_str("end"),
            SessionType::Var(x) => write!(f, "{x}"),
            SessionType::Rec(x, body) => write!(f, "rec {x}.({body})"),
            SessionType::Branch(opts) => write_options(f, opts, '?'),
            SessionType::Choice(opts) => write_options(f, opts, '!'),
        }
    }
}

fn write_options(f: &mut fmt::Formatter<'_>, opts: &[SessionOption], prefix: char) -> fmt::Result {
    let multi = opts.len() != 1;
    if multi {
        f.write_str(if prefix == '?' { "&{" } else { "+{" })?;
    }
    for (i, o) in opts.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{prefix}{}(", o.label)?;
        for (j, t) in o.payloads.iter().enumerate() {
            if j > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")?;
        if o.cont != SessionType::End {
            write!(f, ".{}", o.cont)?;
        }
    }
    if multi {
        f.write_str("}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::ExprType;

    fn opt(label: &str, payloads: Vec<ExprType>, cont: SessionType) -> SessionOption {
        SessionOption {
            label: Label::new(label),
            payloads,
            cont,
        }
    }

    /// rec X. !ping().?pong().X
    fn pinger_session() -> SessionType {
        SessionType::Rec(
            RecVar::new("X"),
            Box::new(SessionType::Choice(vec![opt(
                "ping",
                vec![],
                SessionType::Branch(vec![opt(
                    "pong",
                    vec![],
                    SessionType::Var(RecVar::new("X")),
                )]),
            )])),
        )
    }

    #[test]
    fn dual_swaps_polarity_recursively() {
        assert_eq!(dual(&SessionType::End), SessionType::End);
        let d = dual(&pinger_session());
        // rec X. ?ping().!pong().X
        match unfold(&d) {
            SessionType::Branch(opts) => {
                assert_eq!(opts[0].label, Label::new("ping"));
                assert!(matches!(opts[0].cont, SessionType::Choice(_)));
            }
            other => panic!("expected branch head, got {other:?}"),
        }
    }

    #[test]
    fn unfold_exposes_head_and_is_identity_elsewhere() {
        assert_eq!(unfold(&SessionType::End), SessionType::End);
        let s = pinger_session();
        match unfold(&s) {
            SessionType::Choice(opts) => {
                assert_eq!(opts.len(), 1);
                // The recursion variable is replaced by the whole type.
                match &opts[0].cont {
                    SessionType::Branch(inner) => assert_eq!(inner[0].cont, s),
                    other => panic!("expected branch, got {other:?}"),
                }
            }
            other => panic!("expected choice head, got {other:?}"),
        }
        let b = SessionType::Branch(vec![opt("a", vec![], SessionType::End)]);
        assert_eq!(unfold(&b), b);
    }

    #[test]
    fn session_equal_is_equirecursive() {
        // rec X.!a().X  ==  !a().rec X.!a().X   (one unfolding)
        let s = SessionType::Rec(
            RecVar::new("X"),
            Box::new(SessionType::Choice(vec![opt(
                "a",
                vec![],
                SessionType::Var(RecVar::new("X")),
            )])),
        );
        assert!(session_equal(&s, &unfold(&s)));

        // Label mismatch.
        let a = SessionType::Choice(vec![opt("a", vec![], SessionType::End)]);
        let b = SessionType::Choice(vec![opt("b", vec![], SessionType::End)]);
        assert!(!session_equal(&a, &b));

        // rec X.!a().!a().X == rec X.!a().X: both are the infinite !a stream.
        let two_step = SessionType::Rec(
            RecVar::new("X"),
            Box::new(SessionType::Choice(vec![opt(
                "a",
                vec![],
                SessionType::Choice(vec![opt("a", vec![], SessionType::Var(RecVar::new("X")))]),
            )])),
        );
        assert!(session_equal(&two_step, &s));

        // Alpha-renamed recursion variables are equivalent.
        let renamed = SessionType::Rec(
            RecVar::new("Y"),
            Box::new(SessionType::Choice(vec![opt(
                "a",
                vec![],
                SessionType::Var(RecVar::new("Y")),
            )])),
        );
        assert!(session_equal(&s, &renamed));

        // Option order is irrelevant.
        let ab = SessionType::Branch(vec![
            opt("a", vec![], SessionType::End),
            opt("b", vec![], SessionType::End),
        ]);
        let ba = SessionType::Branch(vec![
            opt("b", vec![], SessionType::End),
            opt("a", vec![], SessionType::End),
        ]);
        assert!(session_equal(&ab, &ba));

        // Payload types matter.
        let num = SessionType::Choice(vec![opt("a", vec![ExprType::Number], SessionType::End)]);
        let boo = SessionType::Choice(vec![opt("a", vec![ExprType::Boolean], SessionType::End)]);
        assert!(!session_equal(&num, &boo));
    }

    #[test]
    fn after_follows_the_protocol() {
        let s = pinger_session();
        // after(rec X.!ping().?pong().X, !ping) = ?pong().X
        let out = Action::output(ProcessId(1), "ping", vec![]);
        let next = after_session(&s, &out).expect("ping is permitted");
        match &next {
            SessionType::Branch(opts) => assert_eq!(opts[0].label, Label::new("pong")),
            other => panic!("expected branch, got {other:?}"),
        }
        // after(S, tau) = S
        assert_eq!(after_session(&s, &Action::Tau), Some(s.clone()));
        // after matches on the label alone; payload values are not
        // inspected (re-typechecking judges them instead).
        assert!(after_session(&s, &Action::output(ProcessId(1), "ping", vec![Value::int(99)]))
            .is_some());
        // after(end, !a) is undefined.
        assert_eq!(
            after_session(&SessionType::End, &Action::output(ProcessId(1), "a", vec![])),
            None
        );
        // Input on a choice is undefined.
        assert_eq!(after_session(&s, &Action::input("ping", vec![])), None);
    }

    #[test]
    fn after_env_binds_on_calls_only() {
        let s = pinger_session();
        let empty = SessionEnv::new();
        let id = FunId::new("pinger", 1);

        let (env, warn) = after_env(&empty, &Action::Call(id.clone()), &s);
        assert_eq!(env.get(&id), Some(&s));
        assert!(warn.is_none());

        let (same, warn) = after_env(&env, &Action::Tau, &s);
        assert_eq!(same, env);
        assert!(warn.is_none());

        // Idempotent re-binding is silent.
        let (again, warn) = after_env(&env, &Action::Call(id.clone()), &s);
        assert_eq!(again, env);
        assert!(warn.is_none());

        // Inequivalent re-binding warns but keeps the new binding.
        let (rebound, warn) = after_env(&env, &Action::Call(id.clone()), &SessionType::End);
        assert_eq!(rebound.get(&id), Some(&SessionType::End));
        assert_eq!(warn.map(|w| w.code), Some(Code::WarnRebind));
    }

    #[test]
    fn well_formedness_violations() {
        // Duplicate label.
        let s = SessionType::Branch(vec![
            opt("a", vec![], SessionType::End),
            opt("a", vec![], SessionType::End),
        ]);
        assert_eq!(well_formed(&s).unwrap_err().code, Code::SessionDupLabel);

        // rec X.X is non-contractive.
        let s = SessionType::Rec(RecVar::new("X"), Box::new(SessionType::Var(RecVar::new("X"))));
        assert_eq!(
            well_formed(&s).unwrap_err().code,
            Code::SessionNonContractive
        );

        // rec X.rec Y.X loops through the spine.
        let s = SessionType::Rec(
            RecVar::new("X"),
            Box::new(SessionType::Rec(
                RecVar::new("Y"),
                Box::new(SessionType::Var(RecVar::new("X"))),
            )),
        );
        assert_eq!(
            well_formed(&s).unwrap_err().code,
            Code::SessionNonContractive
        );

        // Unbound variable.
        let s = SessionType::Var(RecVar::new("Z"));
        assert_eq!(well_formed(&s).unwrap_err().code, Code::SessionUnbound);

        assert!(well_formed(&SessionType::End).is_ok());
        assert!(well_formed(&pinger_session()).is_ok());
    }

    #[test]
    fn display_inline_form() {
        assert_eq!(SessionType::End.to_string(), "end");
        assert_eq!(
            pinger_session().to_string(),
            "rec X.(!ping().?pong().X)"
        );
        let s = SessionType::Branch(vec![
            opt("a", vec![ExprType::Number], SessionType::End),
            opt("b", vec![], SessionType::End),
        ]);
        assert_eq!(s.to_string(), "&{?a(number), ?b()}");
    }
}
