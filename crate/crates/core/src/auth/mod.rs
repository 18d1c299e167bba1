//! User objects, login recognition, session lifecycle and the inquisitor.

mod digest;
pub(crate) mod lockout;
mod recognition;
mod user;

pub use digest::{DigestParseError, SecretDigest};
pub use recognition::{Action, Credentials};
pub use user::{RecognitionChange, RecognitionProfile, UserObject, MINIMAL_FIELDS};

use crate::error::{AuthError, ErrorCode};
use crate::kernel::Kernel;
use crate::model::ObjectId;
use crate::session::{HandleMap, Principal, Session, SessionId, SessionState, Terminal};

/// Outcome of answering the inquisitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InquiryOutcome {
    Continue,
    Terminated,
    /// The session was not being questioned.
    NotPending,
}

/// Lockout key for administrator attempts; not a valid user name.
pub(crate) const ADMIN_LOCK_KEY: &str = "\0admin";

/// Question put when a user has configured none.
pub const FALLBACK_QUESTION: &str = "secret";

impl Kernel {
    /// Connect a user. Every credential failure, including lockout, yields
    /// the same `AuthFailed`.
    pub fn login(&mut self, terminal: Terminal, creds: &Credentials) -> Result<SessionId, AuthError> {
        let now = self.clock.now();
        let name = creds.name().to_owned();
        if self.lockout.is_locked(&name, now) {
            return Err(AuthError::AuthFailed);
        }
        let recognized = self
            .store
            .user_by_name(&name)
            .filter(|u| recognition::recognizes(u, creds))
            .map(|u| u.object_id);
        let Some(uid) = recognized else {
            self.lockout.record_failure(&name, now);
            return Err(AuthError::AuthFailed);
        };
        self.lockout.record_success(&name);

        let principal = Principal::User(uid);
        if self.sessions.by_principal(principal).is_some() {
            return Err(AuthError::AlreadyConnected);
        }
        if let Some(existing) = self.sessions.by_terminal(terminal) {
            let same_kind = matches!(self.sessions.get(existing).map(|s| s.principal), Some(Principal::User(_)));
            return Err(if same_kind { AuthError::AlreadyConnected } else { AuthError::DualLoginForbidden });
        }
        if self.is_operator(&name) && self.sessions.by_principal(Principal::Admin).is_some() {
            return Err(AuthError::DualLoginForbidden);
        }

        let state = self.initial_state(uid);
        let session = Session { principal, terminal, handles: HandleMap::default(), started_at: now, state };
        Ok(self.sessions.open(session, &mut self.rng))
    }

    pub(crate) fn is_operator(&self, name: &str) -> bool {
        self.config.admin.operator.as_deref() == Some(name)
    }

    fn initial_state(&self, uid: ObjectId) -> SessionState {
        let user = self.store.user(uid).expect("recognized user exists");
        if user.error_counter > self.config.inquisitor_threshold {
            SessionState::Challenged { questions: questions_of(user) }
        } else if user.must_rotate_secret {
            SessionState::RotationRequired
        } else {
            SessionState::Active
        }
    }

    /// Close a session and drop its handles. Closing twice is harmless.
    pub fn logout(&mut self, sid: SessionId) {
        self.sessions.close(sid);
    }

    pub fn session_state(&self, sid: SessionId) -> SessionState {
        self.sessions.get(sid).map_or(SessionState::Closed, |s| s.state.clone())
    }

    /// Name of the user behind a session; `None` for admin or closed sessions.
    pub fn session_user(&self, sid: SessionId) -> Option<&str> {
        match self.sessions.get(sid)?.principal {
            Principal::User(uid) => self.store.user(uid).map(|u| u.name.as_str()),
            Principal::Admin => None,
        }
    }

    /// Account an error reply to the session's user, raising the inquisitor
    /// once the counter exceeds the threshold.
    pub(crate) fn record_error(&mut self, sid: SessionId, code: ErrorCode) -> u64 {
        if !code.counts_toward_inquisitor() {
            return 0;
        }
        let Some(Principal::User(uid)) = self.sessions.get(sid).map(|s| s.principal) else {
            return 0;
        };
        let threshold = self.config.inquisitor_threshold;
        let Some(user) = self.store.users.get_mut(&uid) else {
            return 0;
        };
        user.error_counter += 1;
        let counter = user.error_counter;
        if counter > threshold {
            let questions = questions_of(user);
            if let Some(s) = self.sessions.get_mut(sid) {
                if !matches!(s.state, SessionState::Challenged { .. }) {
                    s.state = SessionState::Challenged { questions };
                }
            }
        }
        counter
    }

    /// Answer the inquisitor's questions, in order. Any wrong or missing
    /// answer ends the session.
    pub fn answer_inquiry(&mut self, sid: SessionId, answers: &[String]) -> InquiryOutcome {
        let Some(session) = self.sessions.get(sid) else {
            return InquiryOutcome::NotPending;
        };
        let (Principal::User(uid), SessionState::Challenged { .. }) = (session.principal, &session.state) else {
            return InquiryOutcome::NotPending;
        };
        let user = self.store.users.get_mut(&uid).expect("session user exists");
        let correct = if user.inquisitor_qa.is_empty() {
            answers.len() == 1 && user.secret_digest.matches(&answers[0])
        } else {
            answers.len() == user.inquisitor_qa.len()
                && user.inquisitor_qa.iter().zip(answers).all(|((_, digest), a)| digest.matches(a))
        };
        if correct {
            user.error_counter = 0;
            let next = if user.must_rotate_secret { SessionState::RotationRequired } else { SessionState::Active };
            self.sessions.get_mut(sid).expect("checked above").state = next;
            InquiryOutcome::Continue
        } else {
            let name = user.name.clone();
            self.sessions.close(sid);
            self.trace(format!("inquisitor terminated session of {name:?}"));
            InquiryOutcome::Terminated
        }
    }
}

fn questions_of(user: &UserObject) -> Vec<String> {
    if user.inquisitor_qa.is_empty() {
        vec![FALLBACK_QUESTION.to_owned()]
    } else {
        user.inquisitor_qa.iter().map(|(q, _)| q.clone()).collect()
    }
}
