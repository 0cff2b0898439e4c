//! Two-process session simulator.
//!
//! A [`System`] holds a server and a client process, each a pid, a term and
//! a FIFO mailbox. Outputs are delivered into the peer's mailbox in the same
//! step (synchronous delivery, asynchronous consumption); a receive-headed
//! process consumes the first mailbox message whose label and payload match
//! one of its branches, scanning front to back — selective receive.
//!
//! Scheduling is deterministic: the default policy draws from a seeded
//! splitmix64 stream, so identical inputs replay identical traces.
//! [`explore_interleavings`] enumerates every scheduler choice instead.

use std::collections::{BTreeSet, VecDeque};

use serde_json::json;

use crate::ast::{FunId, Label, Number, ProcessId, Subst, Term, Value};
use crate::diag::{Code, Diagnostic, Span};
use crate::semantics::{
    drop_one_receive_branch, match_patterns, step_term_with, wants_delivery, FaultInjection,
    RuntimeError, StepOutcome, Stimulus,
};
use crate::session::Action;
use crate::typecheck::FunInfoEnv;

/// Pid assigned to the server process of every session.
pub const SERVER_PID: ProcessId = ProcessId(2);
/// Pid assigned to the client process of every session.
pub const CLIENT_PID: ProcessId = ProcessId(3);

/// Lifecycle of one simulated process.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessStatus {
    Running,
    Blocked,
    Done(Value),
    Crashed(RuntimeError),
}

/// One endpoint of the session.
#[derive(Debug, Clone)]
pub struct ProcessState {
    pub pid: ProcessId,
    pub term: Term,
    pub mailbox: VecDeque<(Label, Vec<Value>)>,
    pub status: ProcessStatus,
}

impl ProcessState {
    fn is_done(&self) -> bool {
        matches!(self.status, ProcessStatus::Done(_))
    }

    fn is_crashed(&self) -> bool {
        matches!(self.status, ProcessStatus::Crashed(_))
    }

    /// Index of the first mailbox message consumable by the receive the
    /// process is waiting on: label matches a branch and the payload matches
    /// that branch's patterns.
    fn consumable_index(&self) -> Option<usize> {
        let branches = wants_delivery(&self.term)?;
        self.mailbox.iter().position(|(label, payload)| {
            branches
                .iter()
                .find(|b| &b.label == label)
                .is_some_and(|b| match_patterns(&b.patterns, payload).is_some())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Server,
    Client,
}

/// How the next process to step is chosen among the steppable ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchedulerPolicy {
    /// Seeded uniform choice (splitmix64).
    #[default]
    Random,
    ServerFirst,
    ClientFirst,
    RoundRobin,
}

impl std::str::FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SchedulerPolicy::Random),
            "server-first" => Ok(SchedulerPolicy::ServerFirst),
            "client-first" => Ok(SchedulerPolicy::ClientFirst),
            "round-robin" => Ok(SchedulerPolicy::RoundRobin),
            other => Err(format!(
                "unknown policy `{other}` (random, server-first, client-first, round-robin)"
            )),
        }
    }
}

/// What one scheduler step did.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemStepOutcome {
    /// A process performed an action.
    Stepped { pid: ProcessId, action: Action },
    /// A process reduced to a value.
    Completed { pid: ProcessId, value: Value },
    /// A process hit a runtime error.
    Crashed { pid: ProcessId, error: RuntimeError },
    /// No process can step and at least one is not done.
    Deadlock,
    /// Both processes are done.
    Finished,
}

/// Final verdict of a bounded session run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionVerdict {
    Finished,
    Deadlock,
    Crashed,
    FuelExhausted,
}

impl std::fmt::Display for SessionVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SessionVerdict::Finished => "finished",
            SessionVerdict::Deadlock => "deadlock",
            SessionVerdict::Crashed => "crashed",
            SessionVerdict::FuelExhausted => "fuel-exhausted",
        };
        f.write_str(s)
    }
}

/// The runtime configuration: two processes plus the trace so far.
#[derive(Debug, Clone)]
pub struct System {
    pub server: ProcessState,
    pub client: ProcessState,
    pub trace: Vec<(ProcessId, Action)>,
    pub seed: u64,
    pub steps_taken: u64,
    rng_state: u64,
    last_stepped: Option<Role>,
    sigma: FunInfoEnv,
    fault: Option<FaultInjection>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Spawns a session: instantiates both function bodies with each other's
/// pid and the given argument values. The pid handshake is collapsed into
/// direct instantiation; the two spawn calls are recorded in the trace but
/// no bootstrap message ever enters a mailbox.
pub fn session_start(
    sigma: &FunInfoEnv,
    server_fun: &FunId,
    server_args: &[Value],
    client_fun: &FunId,
    client_args: &[Value],
    seed: u64,
) -> Result<System, Diagnostic> {
    let server_term = instantiate(sigma, server_fun, server_args, CLIENT_PID)?;
    let client_term = instantiate(sigma, client_fun, client_args, SERVER_PID)?;
    let mut sys = System {
        server: ProcessState {
            pid: SERVER_PID,
            term: server_term,
            mailbox: VecDeque::new(),
            status: ProcessStatus::Running,
        },
        client: ProcessState {
            pid: CLIENT_PID,
            term: client_term,
            mailbox: VecDeque::new(),
            status: ProcessStatus::Running,
        },
        trace: vec![
            (SERVER_PID, Action::Call(server_fun.clone())),
            (CLIENT_PID, Action::Call(client_fun.clone())),
        ],
        seed,
        steps_taken: 0,
        rng_state: seed,
        last_stepped: None,
        sigma: sigma.clone(),
        fault: None,
    };
    sys.refresh_statuses();
    Ok(sys)
}

fn instantiate(
    sigma: &FunInfoEnv,
    fun: &FunId,
    args: &[Value],
    peer: ProcessId,
) -> Result<Term, Diagnostic> {
    let info = sigma.get(fun).ok_or_else(|| {
        Diagnostic::error(
            Code::RunUnknownFun,
            Span::start(),
            format!("no function {fun} in this module"),
        )
    })?;
    if args.len() != fun.arity - 1 {
        return Err(Diagnostic::error(
            Code::TypeArity,
            Span::start(),
            format!(
                "{fun} takes {} argument(s) after the pid, got {}",
                fun.arity - 1,
                args.len()
            ),
        ));
    }
    for (v, t) in args.iter().zip(&info.param_types) {
        if !v.has_type(t) {
            return Err(Diagnostic::error(
                Code::TypePayload,
                Span::start(),
                format!("argument {v} of {fun} does not have type {t}"),
            ));
        }
    }
    let mut subst = Subst::new();
    subst.bind(info.dual.clone(), Value::Pid(peer));
    for (p, v) in info.params.iter().zip(args) {
        subst.bind(p.clone(), v.clone());
    }
    Ok(info.body.substitute(&subst))
}

impl System {
    /// Installs a fault for the mutation suite. Testing instrumentation.
    pub fn with_fault(mut self, fault: FaultInjection) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn process(&self, pid: ProcessId) -> Option<&ProcessState> {
        if self.server.pid == pid {
            Some(&self.server)
        } else if self.client.pid == pid {
            Some(&self.client)
        } else {
            None
        }
    }

    fn proc(&self, role: Role) -> &ProcessState {
        match role {
            Role::Server => &self.server,
            Role::Client => &self.client,
        }
    }

    fn proc_mut(&mut self, role: Role) -> &mut ProcessState {
        match role {
            Role::Server => &mut self.server,
            Role::Client => &mut self.client,
        }
    }

    fn peer_mut(&mut self, role: Role) -> &mut ProcessState {
        match role {
            Role::Server => &mut self.client,
            Role::Client => &mut self.server,
        }
    }

    fn steppable(&self, role: Role) -> bool {
        let p = self.proc(role);
        if p.is_done() || p.is_crashed() {
            return false;
        }
        if p.term.is_value() {
            return true;
        }
        if wants_delivery(&p.term).is_some() {
            return p.consumable_index().is_some();
        }
        true
    }

    fn steppable_roles(&self) -> Vec<Role> {
        [Role::Server, Role::Client]
            .into_iter()
            .filter(|r| self.steppable(*r))
            .collect()
    }

    fn refresh_statuses(&mut self) {
        for role in [Role::Server, Role::Client] {
            let consumable = self.proc(role).consumable_index().is_some();
            let p = self.proc_mut(role);
            if p.is_done() || p.is_crashed() {
                continue;
            }
            p.status = if wants_delivery(&p.term).is_some() && !consumable {
                ProcessStatus::Blocked
            } else {
                ProcessStatus::Running
            };
        }
    }

    fn pick(&mut self, policy: SchedulerPolicy, candidates: &[Role]) -> Role {
        if candidates.len() == 1 {
            return candidates[0];
        }
        match policy {
            SchedulerPolicy::Random => {
                let i = (splitmix64(&mut self.rng_state) % candidates.len() as u64) as usize;
                candidates[i]
            }
            SchedulerPolicy::ServerFirst => Role::Server,
            SchedulerPolicy::ClientFirst => Role::Client,
            SchedulerPolicy::RoundRobin => match self.last_stepped {
                Some(Role::Server) => Role::Client,
                _ => Role::Server,
            },
        }
    }

    /// One scheduler step: picks a steppable process and advances it.
    pub fn system_step(&mut self, policy: SchedulerPolicy) -> SystemStepOutcome {
        let candidates = self.steppable_roles();
        if candidates.is_empty() {
            return if self.server.is_done() && self.client.is_done() {
                SystemStepOutcome::Finished
            } else {
                SystemStepOutcome::Deadlock
            };
        }
        let role = self.pick(policy, &candidates);
        self.step_role(role)
    }

    fn step_role(&mut self, role: Role) -> SystemStepOutcome {
        self.last_stepped = Some(role);
        self.steps_taken += 1;
        let pid = self.proc(role).pid;

        if let Some(v) = self.proc(role).term.as_value() {
            let v = v.clone();
            self.proc_mut(role).status = ProcessStatus::Done(v.clone());
            return SystemStepOutcome::Completed { pid, value: v };
        }

        // A receive-headed process extracts the first consumable message.
        let stimulus = match self.proc(role).consumable_index() {
            Some(i) => {
                let (label, payload) = self.proc_mut(role).mailbox.remove(i).expect("in range");
                Stimulus::Deliver { label, payload }
            }
            None => Stimulus::Internal,
        };

        let semantic_fault = match self.fault {
            f @ Some(FaultInjection::SwapSendLabel)
            | f @ Some(FaultInjection::SkipLetSubstitution) => f,
            _ => None,
        };
        match step_term_with(&self.sigma, &self.proc(role).term, &stimulus, semantic_fault) {
            StepOutcome::Step(step) => {
                let mut next = step.next;
                if self.fault == Some(FaultInjection::DropReceiveBranch) {
                    next = drop_one_receive_branch(&next);
                }
                if let Action::Output {
                    dest,
                    label,
                    payload,
                } = &step.action
                {
                    let peer_pid = self.peer_mut(role).pid;
                    if *dest != Value::Pid(peer_pid) {
                        let error = RuntimeError {
                            code: Code::RunBadPid,
                            message: format!("{dest} is not the session peer {peer_pid}"),
                        };
                        self.proc_mut(role).status = ProcessStatus::Crashed(error.clone());
                        return SystemStepOutcome::Crashed { pid, error };
                    }
                    let message = (label.clone(), payload.clone());
                    if self.fault == Some(FaultInjection::DeliverToSelf) {
                        self.proc_mut(role).mailbox.push_back(message);
                    } else {
                        self.peer_mut(role).mailbox.push_back(message);
                    }
                }
                self.trace.push((pid, step.action.clone()));
                self.proc_mut(role).term = next;
                self.refresh_statuses();
                SystemStepOutcome::Stepped {
                    pid,
                    action: step.action,
                }
            }
            StepOutcome::Done(v) => {
                self.proc_mut(role).status = ProcessStatus::Done(v.clone());
                SystemStepOutcome::Completed { pid, value: v }
            }
            StepOutcome::RuntimeError(error) => {
                self.proc_mut(role).status = ProcessStatus::Crashed(error.clone());
                SystemStepOutcome::Crashed { pid, error }
            }
            // Steppability was checked before stepping.
            StepOutcome::Blocked => unreachable!("scheduled a blocked process"),
        }
    }
}

/// Runs a session for at most `fuel` scheduler steps. Deterministic for a
/// fixed (module, functions, arguments, seed, fuel).
pub fn run_session(
    mut sys: System,
    policy: SchedulerPolicy,
    fuel: u64,
) -> (System, SessionVerdict) {
    for _ in 0..fuel {
        match sys.system_step(policy) {
            SystemStepOutcome::Finished => return (sys, SessionVerdict::Finished),
            SystemStepOutcome::Deadlock => return (sys, SessionVerdict::Deadlock),
            SystemStepOutcome::Crashed { .. } => return (sys, SessionVerdict::Crashed),
            SystemStepOutcome::Stepped { .. } | SystemStepOutcome::Completed { .. } => {}
        }
    }
    if sys.server.is_done() && sys.client.is_done() {
        (sys, SessionVerdict::Finished)
    } else {
        (sys, SessionVerdict::FuelExhausted)
    }
}

/// Breadth-first enumeration of every scheduler choice down to `depth`
/// steps. Returns the set of distinct traces (shorter traces appear when a
/// run finishes, deadlocks or crashes early).
///
/// `depth` is capped at 20: the state space is exponential.
pub fn explore_interleavings(
    sigma: &FunInfoEnv,
    server_fun: &FunId,
    server_args: &[Value],
    client_fun: &FunId,
    client_args: &[Value],
    depth: usize,
) -> Result<BTreeSet<Vec<(ProcessId, Action)>>, Diagnostic> {
    assert!(depth <= 20, "interleaving exploration is capped at depth 20");
    let start = session_start(sigma, server_fun, server_args, client_fun, client_args, 0)?;
    let mut traces = BTreeSet::new();
    let mut frontier = vec![(start, depth)];
    while let Some((sys, remaining)) = frontier.pop() {
        if remaining == 0 {
            traces.insert(sys.trace.clone());
            continue;
        }
        let candidates = sys.steppable_roles();
        if candidates.is_empty() {
            traces.insert(sys.trace.clone());
            continue;
        }
        for role in candidates {
            let mut next = sys.clone();
            match next.step_role(role) {
                SystemStepOutcome::Crashed { .. } => {
                    traces.insert(next.trace.clone());
                }
                _ => frontier.push((next, remaining - 1)),
            }
        }
    }
    Ok(traces)
}

// ---------------------------------------------------------------------------
// Trace rendering
// ---------------------------------------------------------------------------

/// One line per action: `#PID<2> !#PID<3>{ping}`.
pub fn render_trace_text(trace: &[(ProcessId, Action)]) -> String {
    trace
        .iter()
        .map(|(pid, action)| format!("{pid} {action}\n"))
        .collect()
}

pub fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Boolean(b) => json!(b),
        Value::Number(Number::Int(i)) => json!(i),
        Value::Number(Number::Float(x)) => json!(x),
        Value::Atom(a) => json!({ "atom": a }),
        Value::Pid(p) => json!({ "pid": p.0 }),
        Value::EmptyList => json!([]),
        Value::Cons(..) => {
            let mut items = Vec::new();
            let mut cur = v;
            loop {
                match cur {
                    Value::Cons(h, t) => {
                        items.push(value_to_json(h));
                        cur = t;
                    }
                    Value::EmptyList => break,
                    other => {
                        items.push(json!({ "improper_tail": value_to_json(other) }));
                        break;
                    }
                }
            }
            json!(items)
        }
        Value::Tuple(vs) => {
            json!({ "tuple": vs.iter().map(value_to_json).collect::<Vec<_>>() })
        }
    }
}

pub fn action_to_json(action: &Action) -> serde_json::Value {
    match action {
        Action::Output {
            dest,
            label,
            payload,
        } => {
            let dest = match dest {
                Value::Pid(p) => json!(p.0),
                other => value_to_json(other),
            };
            json!({
                "kind": "output",
                "dest": dest,
                "label": label.as_str(),
                "payload": payload.iter().map(value_to_json).collect::<Vec<_>>(),
            })
        }
        Action::Input { label, payload } => json!({
            "kind": "input",
            "label": label.as_str(),
            "payload": payload.iter().map(value_to_json).collect::<Vec<_>>(),
        }),
        Action::Call(id) => json!({
            "kind": "call",
            "fun": id.name.to_string(),
            "arity": id.arity,
        }),
        Action::Tau => json!({ "kind": "tau" }),
    }
}

/// JSON-lines rendering of a trace: one object per action.
pub fn render_trace_json(trace: &[(ProcessId, Action)]) -> String {
    trace
        .iter()
        .map(|(pid, action)| {
            let line = json!({ "pid": pid.0, "action": action_to_json(action) });
            format!("{line}\n")
        })
        .collect()
}
