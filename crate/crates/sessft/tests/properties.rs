//! Property tests for the library invariants. Structured inputs come from
//! the seeded generators in `common`, driven through proptest via a seed
//! strategy so every failure reports a replayable seed.

mod common;

use common::*;
use proptest::prelude::*;

use sessft::ast::{CaseBranch, Expr, Pattern, SessionType, Subst, Term, Value, VarName};
use sessft::parser::{parse_module, print_module, SourceFile};
use sessft::runtime::{run_session, session_start, SchedulerPolicy};
use sessft::semantics::{
    match_pattern, step_term, StepOutcome, Stimulus,
};
use sessft::session::{after_session, dual, session_equal, unfold, Action};
use sessft::typecheck::{build_details, build_sessions, check_term, DualPid, VarEnv};
use sessft::ProcessId;

proptest! {
    /// dual is an involution.
    #[test]
    fn dual_involution(seed: u64) {
        let mut rng = rng(seed);
        let s = gen_session(&mut rng, 5);
        prop_assert_eq!(dual(&dual(&s)), s);
    }

    /// Advancing past an action commutes with duality on the mirrored
    /// action.
    #[test]
    fn dual_after_commutation(seed: u64) {
        let mut rng = rng(seed);
        let s = gen_session(&mut rng, 5);
        if let SessionType::Choice(opts) = unfold(&s) {
            for opt in &opts {
                let out = Action::output(ProcessId(0), opt.label.as_str(), vec![]);
                let inp = Action::input(opt.label.as_str(), vec![]);
                let s1 = after_session(&s, &out).expect("label offered");
                let d1 = after_session(&dual(&s), &inp).expect("dual label offered");
                prop_assert!(session_equal(&d1, &dual(&s1)));
            }
        }
    }

    /// If after is defined on s, it is defined on unfold(s) with an
    /// equivalent result.
    #[test]
    fn after_commutes_with_unfold(seed: u64) {
        let mut rng = rng(seed);
        let s = gen_session(&mut rng, 5);
        let u = unfold(&s);
        let actions = match &u {
            SessionType::Choice(opts) => opts
                .iter()
                .map(|o| Action::output(ProcessId(0), o.label.as_str(), vec![]))
                .collect::<Vec<_>>(),
            SessionType::Branch(opts) => opts
                .iter()
                .map(|o| Action::input(o.label.as_str(), vec![]))
                .collect(),
            _ => vec![Action::Tau],
        };
        for action in actions {
            match (after_session(&s, &action), after_session(&u, &action)) {
                (Some(a), Some(b)) => prop_assert!(session_equal(&a, &b)),
                (None, None) => {}
                (a, b) => prop_assert!(false, "definedness differs: {a:?} vs {b:?}"),
            }
        }
    }

    /// session_equal is reflexive and stable under unfolding and renaming.
    #[test]
    fn session_equal_laws(seed: u64) {
        let mut rng = rng(seed);
        let s = gen_session(&mut rng, 4);
        prop_assert!(session_equal(&s, &s));
        prop_assert!(session_equal(&s, &unfold(&s)));
        prop_assert!(session_equal(&s, &alpha_rename(&s)));
    }

    /// Substituting a closed value for a variable removes exactly that
    /// variable from the free set.
    #[test]
    fn substitution_removes_free_var(seed: u64) {
        let mut rng = rng(seed);
        let module = gen_module(&mut rng);
        for def in &module.defs {
            // The body's free variables are exactly (a subset of) the
            // parameters; substitute each away in turn.
            let free = def.body.free_vars();
            for x in &free {
                let subst = Subst::single(x.clone(), Value::int(9));
                let after = def.body.substitute(&subst).free_vars();
                let mut expected = free.clone();
                expected.remove(x);
                prop_assert_eq!(after, expected);
            }
            // The empty substitution is the identity.
            prop_assert_eq!(def.body.substitute(&Subst::new()), def.body.clone());
        }
    }

    /// The parser returns diagnostics instead of panicking, whatever the
    /// input: random printable garbage and mutated well-formed modules.
    #[test]
    fn parser_never_panics(seed: u64) {
        use rand::Rng;
        let mut rng = rng(seed);
        let garbage: String = (0..rng.gen_range(0..200usize))
            .map(|_| {
                let pool = b" \nabcdefgXYZ(){}[]<>=!+-*/,|.:@\"_0123456789#";
                pool[rng.gen_range(0..pool.len())] as char
            })
            .collect();
        let _ = parse_module(&SourceFile::new("fuzz", &garbage));

        // Mutate a printed module at a few random byte positions.
        let module = gen_module(&mut rng);
        let mut text = print_module(&module).into_bytes();
        for _ in 0..rng.gen_range(1..4usize) {
            if text.is_empty() {
                break;
            }
            let i = rng.gen_range(0..text.len());
            text[i] = b' ' + (rng.gen_range(0..94u8));
        }
        if let Ok(text) = String::from_utf8(text) {
            let _ = parse_module(&SourceFile::new("fuzz2", &text));
        }

        // Session strings likewise.
        let sess: String = (0..rng.gen_range(0..60usize))
            .map(|_| {
                let pool = b" ?!&+{}()[].,=recXYabend";
                pool[rng.gen_range(0..pool.len())] as char
            })
            .collect();
        let _ = sessft::parser::parse_session_type(&sess);
    }

    /// Print-parse round trip on generated modules (smaller scale than the
    /// acceptance run, but with shrinking).
    #[test]
    fn print_parse_round_trip(seed: u64) {
        let mut rng = rng(seed);
        let module = gen_module(&mut rng);
        let printed = print_module(&module);
        let reparsed = parse_module(&SourceFile::new("gen", &printed))
            .map_err(|e| TestCaseError::fail(format!("{e:?}\n{printed}")))?;
        prop_assert_eq!(reparsed, module);
    }

    /// Values are normal forms: stepping a value yields Done with itself.
    #[test]
    fn values_are_normal_forms(seed: u64) {
        let mut rng = rng(seed);
        let v = gen_value(&mut rng, 2, true);
        let sigma = sessft::typecheck::FunInfoEnv::new();
        let outcome = step_term(&sigma, &Term::Expr(Expr::Val(v.clone())), &Stimulus::Internal);
        prop_assert_eq!(outcome, StepOutcome::Done(v));
    }

    /// Stepping is deterministic for a fixed term and stimulus.
    #[test]
    fn stepping_is_a_function(seed: u64) {
        let mut rng = rng(seed);
        let module = gen_module(&mut rng);
        let sigma = build_details(&module.defs);
        for def in &module.defs {
            // Close the body over its parameters with arbitrary values.
            let mut subst = Subst::new();
            subst.bind(def.dual_param.clone(), Value::Pid(ProcessId(1)));
            for p in &def.params {
                subst.bind(p.clone(), gen_value(&mut rng, 1, true));
            }
            let t = def.body.substitute(&subst);
            let a = step_term(&sigma, &t, &Stimulus::Internal);
            let b = step_term(&sigma, &t, &Stimulus::Internal);
            prop_assert_eq!(a, b);
        }
    }

    /// Case branch selection agrees with trying every branch independently
    /// and picking the first that matches.
    #[test]
    fn case_selection_matches_first(seed: u64) {
        let mut rng = rng(seed);
        let mut counter = 0;
        let branches: Vec<CaseBranch> = (0..rng_range(&mut rng, 1, 4))
            .map(|i| CaseBranch {
                pattern: gen_pattern(&mut rng, &mut counter),
                body: Term::Expr(Expr::Val(Value::int(i as i64))),
            })
            .collect();
        let scrutinee = if rng_bool(&mut rng) {
            // Half the time take a value that matches some branch.
            let pick = rng_range(&mut rng, 0, branches.len());
            value_matching(&mut rng, &branches[pick].pattern)
        } else {
            gen_value(&mut rng, 2, true)
        };
        let term = Term::Case {
            scrutinee: Expr::Val(scrutinee.clone()),
            branches: branches.clone(),
        };
        let sigma = sessft::typecheck::FunInfoEnv::new();
        let expected = branches
            .iter()
            .find_map(|b| match_pattern(&b.pattern, &scrutinee).map(|s| b.body.substitute(&s)));
        match (step_term(&sigma, &term, &Stimulus::Internal), expected) {
            (StepOutcome::Step(step), Some(body)) => prop_assert_eq!(step.next, body),
            (StepOutcome::RuntimeError(e), None) => {
                prop_assert_eq!(e.code, sessft::diag::Code::RunMatch)
            }
            (got, want) => prop_assert!(false, "selection diverged: {got:?} vs {want:?}"),
        }
    }
}

fn rng_range(rng: &mut rand_chacha::ChaCha8Rng, lo: usize, hi: usize) -> usize {
    use rand::Rng;
    rng.gen_range(lo..hi)
}

fn rng_bool(rng: &mut rand_chacha::ChaCha8Rng) -> bool {
    use rand::Rng;
    rng.gen_bool(0.5)
}

/// Weakening: a successful term check stays successful, with the same
/// verdict, under an extended variable environment.
#[test]
fn weakening_preserves_verdicts() {
    for case in well_typed_corpus() {
        let file = case.file;
        let module = load_corpus_module("well_typed", file);
        let sigma = build_details(&module.defs);
        let delta = build_sessions(&module.defs);
        for def in &module.defs {
            let Some(ann) = &def.session else { continue };
            let mut gamma = VarEnv::new();
            gamma.insert(def.dual_param.clone(), sessft::ValueType::Pid);
            for (p, t) in def.params.iter().zip(&def.param_types) {
                gamma.insert(p.clone(), sessft::ValueType::from(t));
            }
            let who = DualPid::Var(def.dual_param.clone());
            let base = check_term(&delta, &gamma, &sigma, &who, ann.session(), &def.body)
                .expect("corpus typechecks");
            let mut wider = gamma.clone();
            wider.insert(VarName::new("zz_fresh"), sessft::ValueType::Number);
            wider.insert(
                VarName::new("zz_fresh2"),
                sessft::ValueType::List(Box::new(sessft::ValueType::Boolean)),
            );
            let widened = check_term(&delta, &wider, &sigma, &who, ann.session(), &def.body)
                .expect("weakening must not break typing");
            assert_eq!(base, widened, "{file}: verdict changed under weakening");
        }
    }
}

/// Point-to-point FIFO conservation: the inputs each process consumed are a
/// prefix of the peer's outputs, and mailbox sizes account for the rest.
#[test]
fn trace_mailbox_conservation() {
    for case in well_typed_corpus() {
        let file = case.file;
        let module = load_corpus_module("well_typed", file);
        let sigma = build_details(&module.defs);
        for seed in [0u64, 3, 9] {
            let sys = session_start(
                &sigma,
                &case.server,
                &case.server_args,
                &case.client,
                &case.client_args,
                seed,
            )
            .unwrap();
            let (end, _) = run_session(sys, SchedulerPolicy::Random, 150);
            for (me, peer) in [(&end.server, &end.client), (&end.client, &end.server)] {
                let outputs_by_peer: Vec<_> = end
                    .trace
                    .iter()
                    .filter_map(|(pid, a)| match a {
                        Action::Output { label, payload, .. } if *pid == peer.pid => {
                            Some((label.clone(), payload.clone()))
                        }
                        _ => None,
                    })
                    .collect();
                let inputs_by_me: Vec<_> = end
                    .trace
                    .iter()
                    .filter_map(|(pid, a)| match a {
                        Action::Input { label, payload } if *pid == me.pid => {
                            Some((label.clone(), payload.clone()))
                        }
                        _ => None,
                    })
                    .collect();
                // Selective receive may consume messages out of arrival
                // order, but every input corresponds to exactly one earlier
                // output: the inputs form a sub-multiset of the peer's
                // outputs, and the mailbox holds the rest.
                assert!(
                    inputs_by_me.len() <= outputs_by_peer.len(),
                    "{file} seed {seed}: more inputs than outputs"
                );
                let mut remaining = outputs_by_peer.clone();
                for msg in &inputs_by_me {
                    let i = remaining
                        .iter()
                        .position(|m| m == msg)
                        .unwrap_or_else(|| {
                            panic!("{file} seed {seed}: input {msg:?} was never output")
                        });
                    remaining.remove(i);
                }
                assert_eq!(
                    me.mailbox.len(),
                    outputs_by_peer.len() - inputs_by_me.len(),
                    "{file} seed {seed}: mailbox does not hold the difference"
                );
                for queued in &me.mailbox {
                    assert!(
                        remaining.contains(queued),
                        "{file} seed {seed}: queued message {queued:?} unaccounted for"
                    );
                }
            }
        }
    }
}

/// Parse errors point inside the input text.
#[test]
fn diagnostics_carry_in_bounds_spans() {
    let src = "defmodule M do\n  @spec f(pid) :: atom\n  def f(pid do\n    :ok\n  end\nend\n";
    let errs = parse_module(&SourceFile::new("bad.exst", src)).unwrap_err();
    let lines: Vec<&str> = src.lines().collect();
    for d in errs {
        let line = d.span.line as usize;
        assert!(line >= 1 && line <= lines.len(), "line {line} out of bounds");
        assert!(d.span.col >= 1);
        assert!((d.span.col as usize - 1) <= lines[line - 1].len() + 1);
    }
}

/// The pattern half of the matching function never binds wildcards and
/// respects left-to-right ordering of bindings.
#[test]
fn match_binding_order_is_left_to_right() {
    use sessft::ast::IdPattern;
    let p = Pattern::Tuple(vec![
        IdPattern::Var(VarName::new("a")),
        IdPattern::Var(VarName::new("_")),
        IdPattern::Var(VarName::new("b")),
    ]);
    let v = Value::Tuple(vec![Value::int(1), Value::int(2), Value::int(3)]);
    let s = match_pattern(&p, &v).unwrap();
    assert_eq!(
        s.bindings(),
        &[
            (VarName::new("a"), Value::int(1)),
            (VarName::new("b"), Value::int(3)),
        ]
    );
}
