//! Sessions and session-scoped handles.
//!
//! A session never sees object ids. Each item it learns about is given a
//! random 4-byte handle, and the mapping is dropped at logout, so the same
//! object answers to a different handle at every connection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::clock::Timestamp;
use crate::model::{ItemId, ObjectId};

/// Opaque, session-scoped alias of an object or type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Handle(u32);

impl fmt::Display for Handle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:08x}", self.0)
    }
}

impl FromStr for Handle {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').ok_or(())?;
        if hex.len() != 8 {
            return Err(());
        }
        u32::from_str_radix(hex, 16).map(Handle).map_err(|_| ())
    }
}

/// Opaque session token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "session-{:016x}", self.0)
    }
}

/// A physical connection point (one shell). A terminal hosts at most one
/// live session, so an administrator and a user never share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Terminal(pub(crate) u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Principal {
    User(ObjectId),
    Admin,
}

/// What a session may currently do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionState {
    Active,
    /// First login after account creation: only a secret change is accepted.
    RotationRequired,
    /// The inquisitor is waiting for answers to these questions.
    Challenged { questions: Vec<String> },
    /// Logged out, terminated, or never existed.
    Closed,
}

#[derive(Debug, Default)]
pub(crate) struct HandleMap {
    by_handle: BTreeMap<Handle, ItemId>,
    by_item: BTreeMap<ItemId, Handle>,
}

impl HandleMap {
    pub(crate) fn handle_for(&mut self, item: ItemId, rng: &mut dyn RngCore) -> Handle {
        if let Some(h) = self.by_item.get(&item) {
            return *h;
        }
        let handle = loop {
            let candidate = Handle(rng.next_u32());
            if candidate.0 != 0 && !self.by_handle.contains_key(&candidate) {
                break candidate;
            }
        };
        self.by_handle.insert(handle, item);
        self.by_item.insert(item, handle);
        handle
    }

    pub(crate) fn resolve(&self, handle: Handle) -> Option<ItemId> {
        self.by_handle.get(&handle).copied()
    }


    #[cfg(any(test, feature = "inspect"))]
    pub(crate) fn handles(&self) -> impl Iterator<Item = Handle> + '_ {
        self.by_handle.keys().copied()
    }
}

#[derive(Debug)]
pub(crate) struct Session {
    pub(crate) principal: Principal,
    pub(crate) terminal: Terminal,
    pub(crate) handles: HandleMap,
    #[allow(dead_code)]
    pub(crate) started_at: Timestamp,
    pub(crate) state: SessionState,
}

#[derive(Debug, Default)]
pub(crate) struct SessionTable {
    sessions: BTreeMap<SessionId, Session>,
}

impl SessionTable {
    pub(crate) fn open(&mut self, session: Session, rng: &mut dyn RngCore) -> SessionId {
        let id = loop {
            let candidate = SessionId(rng.next_u64());
            if !self.sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        self.sessions.insert(id, session);
        id
    }

    pub(crate) fn get(&self, id: SessionId) -> Option<&Session> {
        self.sessions.get(&id)
    }

    pub(crate) fn get_mut(&mut self, id: SessionId) -> Option<&mut Session> {
        self.sessions.get_mut(&id)
    }

    pub(crate) fn close(&mut self, id: SessionId) -> Option<Session> {
        self.sessions.remove(&id)
    }

    pub(crate) fn by_principal(&self, principal: Principal) -> Option<SessionId> {
        self.sessions.iter().find(|(_, s)| s.principal == principal).map(|(id, _)| *id)
    }

    pub(crate) fn by_terminal(&self, terminal: Terminal) -> Option<SessionId> {
        self.sessions.iter().find(|(_, s)| s.terminal == terminal).map(|(id, _)| *id)
    }

    #[cfg(any(test, feature = "inspect"))]
    pub(crate) fn len(&self) -> usize {
        self.sessions.len()
    }

    pub(crate) fn has_user_sessions(&self) -> bool {
        self.sessions.values().any(|s| matches!(s.principal, Principal::User(_)))
    }

}
