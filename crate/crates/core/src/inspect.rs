//! Read-only view of kernel internals for oracle tests.
//!
//! Compiled only with the `inspect` feature. Nothing here can mutate state,
//! and the shell binary never enables it.

use std::collections::BTreeSet;

use crate::kernel::Kernel;
use crate::model::{ItemId, Store};
use crate::protection::ProtectionBits;
use crate::session::{Handle, SessionId};
use crate::signature::Signature;

pub struct Inspector<'a> {
    kernel: &'a Kernel,
}

impl Kernel {
    pub fn inspect(&self) -> Inspector<'_> {
        Inspector { kernel: self }
    }
}

impl<'a> Inspector<'a> {
    pub fn store(&self) -> &'a Store {
        &self.kernel.store
    }

    pub fn resolve(&self, sid: SessionId, handle: Handle) -> Option<ItemId> {
        self.kernel.sessions.get(sid)?.handles.resolve(handle)
    }

    pub fn handles(&self, sid: SessionId) -> Vec<Handle> {
        self.kernel.sessions.get(sid).map(|s| s.handles.handles().collect()).unwrap_or_default()
    }

    pub fn owner_of(&self, item: ItemId) -> Option<Signature> {
        self.kernel.owner_of(item)
    }

    pub fn bits_of(&self, item: ItemId) -> Option<ProtectionBits> {
        match item {
            ItemId::Object(o) => self.kernel.store.object(o).map(|r| r.protection_bits),
            ItemId::Type(t) => self.kernel.store.type_def(t).map(|d| d.protection_bits),
        }
    }

    pub fn user_signature(&self, name: &str) -> Option<Signature> {
        self.kernel.store.user_by_name(name).map(|u| u.signature)
    }

    pub fn group_list(&self, name: &str) -> Option<BTreeSet<Signature>> {
        self.kernel.store.user_by_name(name).map(|u| u.group_list.clone())
    }

    pub fn error_counter(&self, name: &str) -> Option<u64> {
        self.kernel.store.user_by_name(name).map(|u| u.error_counter)
    }

    pub fn lockout_failures(&self, name: &str) -> u32 {
        self.kernel.lockout.failures(name)
    }

    /// Items carrying `sig` as owner.
    pub fn owned_by(&self, sig: Signature) -> Vec<ItemId> {
        let store = &self.kernel.store;
        store
            .objects()
            .filter(|o| o.owner_signature == sig)
            .map(|o| ItemId::Object(o.object_id()))
            .chain(store.types().filter(|t| t.owner_signature == sig).map(|t| ItemId::Type(t.type_id())))
            .collect()
    }

    pub fn live_sessions(&self) -> usize {
        self.kernel.sessions.len()
    }
}
