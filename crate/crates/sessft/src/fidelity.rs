//! Executable check of session fidelity.
//!
//! A well-typed term only ever performs actions its session type permits,
//! and after each transition the continuation stays well-typed against the
//! advanced session type with the same value type and residual. The monitor
//! verifies this mechanically on every step of a simulated session:
//!
//! 1. `after(S, α)` must be defined — otherwise the action violates the
//!    protocol;
//! 2. the successor term must still be closed;
//! 3. re-typechecking the successor under the advanced session and session
//!    environment must reproduce the expected value type and `end` residual.
//!
//! A single `violated` verdict falsifies the typechecker, the semantics or
//! the `after` function, which is exactly what makes the monitor a useful
//! oracle: seeded faults in any of the three must flip some verdict.

use serde_json::json;

use crate::ast::{ExprType, FunId, Module, ProcessId, SessionType, Term, Value};
use crate::diag::{Code, Diagnostic, Span};
use crate::runtime::{
    action_to_json, session_start, SchedulerPolicy, SessionVerdict, System, SystemStepOutcome,
};
use crate::semantics::FaultInjection;
use crate::session::{after_env, after_session, dual, session_equal, Action, SessionEnv};
use crate::typecheck::{
    build_details, build_sessions, check_module, Checker, DualPid, FunInfoEnv, VarEnv,
};

/// Why a monitored step violated fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    /// `after(S, α)` is undefined: the action is not permitted here.
    AfterUndefined,
    /// The successor term no longer typechecks to the expected verdict.
    RetypeFailed,
    /// The successor term has free variables.
    ClosednessFailed,
}

impl ViolationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationReason::AfterUndefined => "after-undefined",
            ViolationReason::RetypeFailed => "retype-failed",
            ViolationReason::ClosednessFailed => "closedness-failed",
        }
    }
}

/// A recorded fidelity violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Process-local index of the offending step (1-based; 0 marks the
    /// initial instantiation check).
    pub step: u64,
    pub action: Action,
    pub reason: ViolationReason,
    pub diagnostic: Option<Diagnostic>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {}: {} on action {}",
            self.step,
            self.reason.as_str(),
            self.action
        )?;
        if let Some(d) = &self.diagnostic {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}

/// Monitor verdict for one process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
}

/// Per-process result of a monitored run.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub pid: ProcessId,
    pub fun: FunId,
    pub steps: u64,
    pub verdict: Verdict,
    pub violation: Option<Violation>,
}

impl FidelityReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = json!({
            "pid": self.pid.0,
            "fun": self.fun.to_string(),
            "steps": self.steps,
            "verdict": match self.verdict {
                Verdict::Holds => "holds",
                Verdict::Violated => "violated",
            },
        });
        if let Some(v) = &self.violation {
            obj["violation"] = json!({
                "step": v.step,
                "action": action_to_json(&v.action),
                "reason": v.reason.as_str(),
                "diagnostic": v.diagnostic.as_ref().map(|d| d.to_string()),
            });
        }
        obj
    }
}

/// The state the monitor tracks for one process, kept in lockstep with the
/// execution: the session environment, the current session type, and the
/// fixed expected value type and final residual.
#[derive(Debug, Clone)]
pub struct MonitorState {
    pub delta: SessionEnv,
    pub session: SessionType,
    pub expected_type: ExprType,
    pub final_session: SessionType,
    pub who: DualPid,
}

#[allow(clippy::result_large_err)]
/// One fidelity check against a fresh checker. The [`Monitor`] below is the
/// memoizing, stateful version used for whole runs.
pub fn monitor_step(
    state: &MonitorState,
    sigma: &FunInfoEnv,
    action: &Action,
    next: &Term,
) -> Result<MonitorState, Violation> {
    let mut checker = Checker::new(sigma);
    let (result, _warning) = observe_once(state, &mut checker, action, next, 0, false);
    result
}

fn observe_once(
    state: &MonitorState,
    checker: &mut Checker<'_>,
    action: &Action,
    next: &Term,
    step: u64,
    omit_env_extension: bool,
) -> (Result<MonitorState, Violation>, Option<Diagnostic>) {
    // 1. The action must be permitted by the current session type.
    let advanced = match after_session(&state.session, action) {
        Some(s) => s,
        None => {
            return (
                Err(Violation {
                    step,
                    action: action.clone(),
                    reason: ViolationReason::AfterUndefined,
                    diagnostic: None,
                }),
                None,
            )
        }
    };

    // 2. Closed terms stay closed.
    let free = next.free_vars();
    if !free.is_empty() {
        let names = free
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        return (
            Err(Violation {
                step,
                action: action.clone(),
                reason: ViolationReason::ClosednessFailed,
                diagnostic: Some(Diagnostic::error(
                    Code::TypeVar,
                    Span::start(),
                    format!("free variables after the step: {names}"),
                )),
            }),
            None,
        );
    }

    // 3. The successor must re-typecheck to the same verdict under the
    // advanced environments.
    let (new_delta, warning) = if omit_env_extension {
        (state.delta.clone(), None)
    } else {
        after_env(&state.delta, action, &state.session)
    };
    let verdict = checker.term(&new_delta, &VarEnv::new(), &state.who, &advanced, next);
    let violation = |diagnostic| Violation {
        step,
        action: action.clone(),
        reason: ViolationReason::RetypeFailed,
        diagnostic,
    };
    match verdict {
        Err(d) => (Err(violation(Some(d))), warning),
        Ok(v) => {
            if !v.ty.fits(&state.expected_type) {
                let d = Diagnostic::error(
                    Code::TypeReturn,
                    Span::start(),
                    format!(
                        "term re-types to {} instead of {}",
                        v.ty, state.expected_type
                    ),
                );
                (Err(violation(Some(d))), warning)
            } else if !session_equal(&v.residual, &state.final_session) {
                let d = Diagnostic::error(
                    Code::TypeResidual,
                    Span::start(),
                    format!(
                        "term re-types with residual {} instead of {}",
                        v.residual, state.final_session
                    ),
                );
                (Err(violation(Some(d))), warning)
            } else {
                (
                    Ok(MonitorState {
                        delta: new_delta,
                        session: advanced,
                        expected_type: state.expected_type.clone(),
                        final_session: state.final_session.clone(),
                        who: state.who.clone(),
                    }),
                    warning,
                )
            }
        }
    }
}

/// Stateful per-process monitor: owns a memoizing checker, counts steps and
/// records the first violation.
pub struct Monitor<'a> {
    state: MonitorState,
    checker: Checker<'a>,
    steps: u64,
    violation: Option<Violation>,
    warnings: Vec<Diagnostic>,
    omit_env_extension: bool,
}

impl<'a> Monitor<'a> {
    pub fn new(state: MonitorState, sigma: &'a FunInfoEnv) -> Self {
        Monitor {
            state,
            checker: Checker::new(sigma),
            steps: 0,
            violation: None,
            warnings: Vec::new(),
            omit_env_extension: false,
        }
    }

    /// Testing instrumentation: forget session bindings on calls, both in
    /// the environment update and inside the re-typechecker.
    pub fn with_omitted_env_extension(state: MonitorState, sigma: &'a FunInfoEnv) -> Self {
        let mut m = Monitor::new(state, sigma);
        m.checker = Checker::with_omitted_call_binding(sigma);
        m.omit_env_extension = true;
        m
    }

    pub fn state(&self) -> &MonitorState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn violation(&self) -> Option<&Violation> {
        self.violation.as_ref()
    }

    /// Checks the initial term against the monitor state, before any step.
    /// Well-typed modules pass by construction; a failure here means the
    /// instantiation itself broke typing.
    pub fn check_initial(&mut self, term: &Term) {
        if self.violation.is_some() {
            return;
        }
        let (result, warning) = observe_once(
            &self.state,
            &mut self.checker,
            &Action::Tau,
            term,
            0,
            self.omit_env_extension,
        );
        if let Some(w) = warning {
            self.warnings.push(w);
        }
        if let Err(v) = result {
            self.violation = Some(v);
        }
    }

    /// Feeds one observed step. Once a violation is recorded the monitor
    /// stops advancing.
    pub fn observe(&mut self, action: &Action, next: &Term) {
        if self.violation.is_some() {
            return;
        }
        self.steps += 1;
        let (result, warning) = observe_once(
            &self.state,
            &mut self.checker,
            action,
            next,
            self.steps,
            self.omit_env_extension,
        );
        if let Some(w) = warning {
            self.warnings.push(w);
        }
        match result {
            Ok(next_state) => self.state = next_state,
            Err(v) => self.violation = Some(v),
        }
    }

    fn into_report(self, pid: ProcessId, fun: FunId) -> (FidelityReport, Vec<Diagnostic>) {
        let verdict = if self.violation.is_none() {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        (
            FidelityReport {
                pid,
                fun,
                steps: self.steps,
                verdict,
                violation: self.violation,
            },
            self.warnings,
        )
    }
}

/// Everything a monitored run produces.
#[derive(Debug, Clone)]
pub struct FidelityOutcome {
    pub server: FidelityReport,
    pub client: FidelityReport,
    pub run_verdict: SessionVerdict,
    pub steps_taken: u64,
    pub warnings: Vec<Diagnostic>,
}

impl FidelityOutcome {
    pub fn all_hold(&self) -> bool {
        self.server.holds() && self.client.holds()
    }
}

/// Options for [`fidelity_run_with`].
#[derive(Debug, Clone, Copy)]
pub struct FidelityOptions {
    pub seed: u64,
    pub fuel: u64,
    pub policy: SchedulerPolicy,
    /// Seeded fault for the mutation suite.
    pub fault: Option<FaultInjection>,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        FidelityOptions {
            seed: 0,
            fuel: 200,
            policy: SchedulerPolicy::Random,
            fault: None,
        }
    }
}

/// Runs a session under the monitor, one monitor per process.
///
/// Refuses ill-typed modules: fidelity is a property of well-typed terms.
/// Both monitored functions must be public and annotated; a client session
/// that is not dual to the server's produces a warning, not an error.
pub fn fidelity_run(
    module: &Module,
    server_fun: &FunId,
    server_args: &[Value],
    client_fun: &FunId,
    client_args: &[Value],
    seed: u64,
    fuel: u64,
) -> Result<FidelityOutcome, Vec<Diagnostic>> {
    fidelity_run_with(
        module,
        server_fun,
        server_args,
        client_fun,
        client_args,
        FidelityOptions {
            seed,
            fuel,
            ..FidelityOptions::default()
        },
    )
}

/// [`fidelity_run`] with scheduler policy and fault injection exposed.
pub fn fidelity_run_with(
    module: &Module,
    server_fun: &FunId,
    server_args: &[Value],
    client_fun: &FunId,
    client_args: &[Value],
    options: FidelityOptions,
) -> Result<FidelityOutcome, Vec<Diagnostic>> {
    check_module(module)?;
    let sigma = build_details(&module.defs);
    let delta = build_sessions(&module.defs);

    let mut warnings = Vec::new();
    let server_session = delta.get(server_fun).cloned().ok_or_else(|| {
        vec![Diagnostic::error(
            Code::CliArgs,
            Span::start(),
            format!("{server_fun} is not a public annotated function"),
        )]
    })?;
    let client_session = delta.get(client_fun).cloned().ok_or_else(|| {
        vec![Diagnostic::error(
            Code::CliArgs,
            Span::start(),
            format!("{client_fun} is not a public annotated function"),
        )]
    })?;
    if !session_equal(&client_session, &dual(&server_session)) {
        warnings.push(Diagnostic::warning(
            Code::WarnNonDual,
            Span::start(),
            format!(
                "client session {client_session} is not dual to server session {server_session}"
            ),
        ));
    }

    let sys = session_start(
        &sigma,
        server_fun,
        server_args,
        client_fun,
        client_args,
        options.seed,
    )
    .map_err(|d| vec![d])?;
    let mut sys: System = match options.fault {
        Some(f) => sys.with_fault(f),
        None => sys,
    };

    let make_state = |session: &SessionType, fun: &FunId, peer: ProcessId| MonitorState {
        delta: delta.clone(),
        session: session.clone(),
        expected_type: sigma[fun].return_type.clone(),
        final_session: SessionType::End,
        who: DualPid::Pid(peer),
    };
    let new_monitor = |state: MonitorState| {
        if options.fault == Some(FaultInjection::OmitSessionEnvExtension) {
            Monitor::with_omitted_env_extension(state, &sigma)
        } else {
            Monitor::new(state, &sigma)
        }
    };
    let mut server_monitor = new_monitor(make_state(&server_session, server_fun, sys.client.pid));
    let mut client_monitor = new_monitor(make_state(&client_session, client_fun, sys.server.pid));
    server_monitor.check_initial(&sys.server.term);
    client_monitor.check_initial(&sys.client.term);

    let mut run_verdict = SessionVerdict::FuelExhausted;
    let mut fuel_left = options.fuel;
    while fuel_left > 0 {
        fuel_left -= 1;
        match sys.system_step(options.policy) {
            SystemStepOutcome::Stepped { pid, action } => {
                let next = sys
                    .process(pid)
                    .expect("stepped process exists")
                    .term
                    .clone();
                if pid == sys.server.pid {
                    server_monitor.observe(&action, &next);
                } else {
                    client_monitor.observe(&action, &next);
                }
            }
            SystemStepOutcome::Completed { .. } => {}
            SystemStepOutcome::Crashed { .. } => {
                run_verdict = SessionVerdict::Crashed;
                break;
            }
            SystemStepOutcome::Deadlock => {
                run_verdict = SessionVerdict::Deadlock;
                break;
            }
            SystemStepOutcome::Finished => {
                run_verdict = SessionVerdict::Finished;
                break;
            }
        }
    }

    let steps_taken = sys.steps_taken;
    let (server_report, mut server_warnings) =
        server_monitor.into_report(sys.server.pid, server_fun.clone());
    let (client_report, mut client_warnings) =
        client_monitor.into_report(sys.client.pid, client_fun.clone());
    warnings.append(&mut server_warnings);
    warnings.append(&mut client_warnings);

    Ok(FidelityOutcome {
        server: server_report,
        client: client_report,
        run_verdict,
        steps_taken,
        warnings,
    })
}
