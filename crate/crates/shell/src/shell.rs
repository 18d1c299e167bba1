//! One terminal's shell: session state, bindings and action capture.
//!
//! The shell owns no kernel. Each command borrows one, so the same code
//! drives the REPL, batch replay and server connections.

use std::collections::BTreeMap;

use protea_core::{
    Action, AdminCommand, CopyTarget, Credentials, Function, Handle, InquiryOutcome, ItemRef, Kernel, Payload,
    ReplySpec, Request, SessionId, SessionState, Target, Terminal, Value,
};

use crate::parse::{Command, Func, Line, Lit, MsgTarget, Ref, Subject};
use crate::render;

/// Most recent actions kept for sequence recognition.
const ACTION_BUFFER: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
enum State {
    Idle,
    User { sid: SessionId, name: String },
    Admin { sid: SessionId },
}

/// What the caller should do after a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    LoggedOut,
    /// The inquisitor closed the session.
    Terminated,
}

#[derive(Debug)]
pub struct Shell {
    terminal: Terminal,
    state: State,
    bindings: BTreeMap<String, Handle>,
    actions: Vec<Action>,
    /// Whether the current challenge has been shown.
    announced: bool,
}

impl Shell {
    pub fn new(kernel: &mut Kernel) -> Self {
        Shell {
            terminal: kernel.open_terminal(),
            state: State::Idle,
            bindings: BTreeMap::new(),
            actions: Vec::new(),
            announced: false,
        }
    }

    pub fn user(&self) -> Option<&str> {
        match &self.state {
            State::User { name, .. } => Some(name),
            State::Admin { .. } => Some("admin"),
            State::Idle => None,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.state != State::Idle
    }

    /// Questions pending for this shell's session, if any.
    pub fn pending_questions(&self, kernel: &Kernel) -> Option<Vec<String>> {
        match &self.state {
            State::User { sid, .. } => match kernel.session_state(*sid) {
                SessionState::Challenged { questions } => Some(questions),
                _ => None,
            },
            _ => None,
        }
    }

    fn record_action(&mut self, kernel: &Kernel, verb: &str) {
        if self.actions.len() == ACTION_BUFFER {
            self.actions.remove(0);
        }
        self.actions.push(Action::new(verb, kernel.now()));
    }

    /// Run one parsed line and return the transcript lines it produced.
    pub fn execute(&mut self, kernel: &mut Kernel, line: &Line) -> (Vec<String>, Flow) {
        let mut out = Vec::new();
        let flow = self.run(kernel, line, &mut out);
        if line.verb != "login" {
            self.record_action(kernel, line.verb);
        }
        self.sync_state(kernel);
        if let Some(questions) = self.pending_questions(kernel) {
            if !self.announced {
                out.extend(questions.iter().map(|q| render::question(q)));
                self.announced = true;
            }
        } else {
            self.announced = false;
        }
        (out, flow)
    }

    /// Drop a session the kernel has closed behind our back.
    fn sync_state(&mut self, kernel: &Kernel) {
        let sid = match &self.state {
            State::User { sid, .. } | State::Admin { sid } => *sid,
            State::Idle => return,
        };
        if kernel.session_state(sid) == SessionState::Closed {
            self.disconnect();
        }
    }

    fn disconnect(&mut self) {
        self.state = State::Idle;
        self.bindings.clear();
    }

    fn run(&mut self, kernel: &mut Kernel, line: &Line, out: &mut Vec<String>) -> Flow {
        match &line.command {
            Command::Login { name, secret, fields } => {
                let mut creds = Credentials::new(name, secret.as_deref().unwrap_or(""));
                for (k, v) in fields {
                    creds = creds.with_field(k, v);
                }
                for a in &self.actions {
                    creds = creds.with_action(&a.token, a.at);
                }
                self.record_action(kernel, "login");
                match kernel.login(self.terminal, &creds) {
                    Ok(sid) => {
                        self.actions.clear();
                        self.bindings.clear();
                        self.state = State::User { sid, name: name.clone() };
                        let note = match kernel.session_state(sid) {
                            SessionState::RotationRequired => " (initial secret must be changed: profile secret NEW)",
                            _ => "",
                        };
                        out.push(format!("< connected {name:?}{note}"));
                    }
                    Err(e) => out.push(render::auth_error(e)),
                }
                Flow::Continue
            }
            Command::AdminLogin { serial, secret } => {
                match kernel.admin_login(self.terminal, serial, secret.as_deref().unwrap_or("")) {
                    Ok(sid) => {
                        self.bindings.clear();
                        self.state = State::Admin { sid };
                        out.push("< connected administrator".into());
                    }
                    Err(e) => out.push(render::auth_error(e)),
                }
                Flow::Continue
            }
            Command::Logout => match &self.state {
                State::Idle => {
                    out.push(render::notice("not connected"));
                    Flow::Continue
                }
                State::User { sid, .. } | State::Admin { sid } => {
                    kernel.logout(*sid);
                    self.disconnect();
                    out.push("< disconnected".into());
                    Flow::LoggedOut
                }
            },
            Command::Answer(answers) => {
                let State::User { sid, .. } = &self.state else {
                    out.push(render::notice("no inquiry pending"));
                    return Flow::Continue;
                };
                match kernel.answer_inquiry(*sid, answers) {
                    InquiryOutcome::Continue => {
                        out.push("< ok inquiry answered".into());
                        Flow::Continue
                    }
                    InquiryOutcome::Terminated => {
                        self.disconnect();
                        out.push(render::notice("inquisitor terminated the session"));
                        Flow::Terminated
                    }
                    InquiryOutcome::NotPending => {
                        out.push(render::notice("no inquiry pending"));
                        Flow::Continue
                    }
                }
            }
            Command::AddUser { name, secret } => {
                self.admin(kernel, AdminCommand::CreateUser { name: name.clone(), initial_secret: secret.clone() }, out)
            }
            Command::Transfer { from, to } => {
                self.admin(kernel, AdminCommand::BulkTransfer { departing: from.clone(), new_owner: to.clone() }, out)
            }
            Command::Backup { path } => self.admin(kernel, AdminCommand::Backup { path: path.clone() }, out),
            Command::Restore { path } => self.admin(kernel, AdminCommand::Restore { path: path.clone() }, out),
            Command::Message { target, func } => {
                self.message(kernel, line, None, target, func, ReplySpec::default(), out);
                Flow::Continue
            }
            Command::Send { emitter, target, func, cc, expect } => {
                let mut spec = ReplySpec { expects: *expect, copy_to: Vec::new() };
                for c in cc {
                    match self.copy_target(c) {
                        Ok(t) => spec.copy_to.push(t),
                        Err(e) => {
                            out.push(render::notice(&e));
                            return Flow::Continue;
                        }
                    }
                }
                self.message(kernel, line, emitter.as_deref(), target, func, spec, out);
                Flow::Continue
            }
        }
    }

    fn admin(&mut self, kernel: &mut Kernel, command: AdminCommand, out: &mut Vec<String>) -> Flow {
        let State::Admin { sid } = &self.state else {
            out.push(render::notice("admin verbs need an administrator session"));
            return Flow::Continue;
        };
        match kernel.admin(*sid, command) {
            Ok(o) => out.push(render::admin_outcome(&o)),
            Err(e) => out.push(render::admin_error(&e)),
        }
        Flow::Continue
    }

    fn session(&self) -> Option<(SessionId, &str)> {
        match &self.state {
            State::User { sid, name } => Some((*sid, name)),
            State::Admin { sid } => Some((*sid, "")),
            State::Idle => None,
        }
    }

    fn handle(&self, r: &Ref) -> Result<Handle, String> {
        match r {
            Ref::Handle(h) => Ok(*h),
            Ref::Bound(name) => self.bindings.get(name).copied().ok_or_else(|| format!("unbound ${name}")),
        }
    }

    fn item_ref(&self, s: &Subject) -> Result<ItemRef, String> {
        Ok(match s {
            Subject::Ref(r) => ItemRef::Handle(self.handle(r)?),
            Subject::Type(name) => ItemRef::TypeName(name.clone()),
        })
    }

    fn value(&self, lit: &Lit) -> Result<Value, String> {
        Ok(match lit {
            Lit::Text(s) => Value::Text(s.clone()),
            Lit::Int(n) => Value::Integer(*n),
            Lit::Bool(b) => Value::Boolean(*b),
            Lit::Counter(n) => Value::Counter(*n),
            Lit::Ref(r) => Value::Reference(self.handle(r)?),
        })
    }

    fn function(&self, func: &Func) -> Result<Function, String> {
        let values = |ls: &[Lit]| ls.iter().map(|l| self.value(l)).collect::<Result<Vec<_>, _>>();
        Ok(match func {
            Func::Ready(f) => f.clone(),
            Func::Set { attr, values: vs } => Function::Set { attr: attr.clone(), values: values(vs)? },
            Func::Compose { part } => Function::Compose { part: self.item_ref(part)? },
            Func::Invoke { name, args } => Function::Invoke { name: name.clone(), args: values(args)? },
            Func::Instantiate { values: vs } => Function::Instantiate {
                values: vs.iter().map(|(k, l)| Ok((k.clone(), self.value(l)?))).collect::<Result<_, String>>()?,
            },
            Func::DefineType { name, parent, schemas, functions } => Function::DefineType {
                name: name.clone(),
                parent: parent.as_ref().map(|p| self.item_ref(p)).transpose()?,
                schemas: schemas.clone(),
                functions: functions.clone(),
            },
        })
    }

    fn copy_target(&self, t: &MsgTarget) -> Result<CopyTarget, String> {
        match t {
            MsgTarget::User(n) => Ok(CopyTarget::User(n.clone())),
            MsgTarget::Item(s) => Ok(CopyTarget::Item(self.item_ref(s)?)),
            MsgTarget::Me | MsgTarget::All(_) => Err("copies go to users or items".into()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn message(
        &mut self,
        kernel: &mut Kernel,
        line: &Line,
        emitter: Option<&str>,
        target: &MsgTarget,
        func: &Func,
        spec: ReplySpec,
        out: &mut Vec<String>,
    ) {
        let Some((sid, me)) = self.session() else {
            out.push(render::notice("not connected"));
            return;
        };
        let me = me.to_owned();
        if let Some(claimed) = emitter {
            if claimed != me {
                out.push(render::notice("the emitter is always the session user"));
                return;
            }
        }
        let function = match self.function(func) {
            Ok(f) => f,
            Err(e) => {
                out.push(render::notice(&e));
                return;
            }
        };
        let replies = match target {
            MsgTarget::All(ty) => {
                let replies = kernel.dispatch_generic(sid, ItemRef::TypeName(ty.clone()), function, spec);
                if replies.is_empty() {
                    out.push("< ok no instances".into());
                }
                for r in &replies {
                    out.extend(render::reply(r, true));
                }
                return;
            }
            MsgTarget::Me => vec![kernel.dispatch(sid, Request { target: Target::User(me), function, reply: spec })],
            MsgTarget::User(name) => {
                vec![kernel.dispatch(sid, Request { target: Target::User(name.clone()), function, reply: spec })]
            }
            MsgTarget::Item(s) => match self.item_ref(s) {
                Ok(r) => vec![kernel.dispatch(sid, Request { target: Target::Item(r), function, reply: spec })],
                Err(e) => {
                    out.push(render::notice(&e));
                    return;
                }
            },
        };
        for r in &replies {
            out.extend(render::reply(r, false));
        }
        if let Some(name) = &line.bind {
            match replies.first().and_then(|r| match &r.payload {
                Some(Payload::Item(h)) if r.is_ok() => Some(*h),
                _ => None,
            }) {
                Some(h) => {
                    self.bindings.insert(name.clone(), h);
                }
                None => out.push(render::notice(&format!("nothing bound to ${name}"))),
            }
        }
    }
}
