//! The administrator: recognized by the system serial number and a secret
//! held in the sealed configuration, never by a user object.
//!
//! It can create users, hand a departing user's possessions to someone else,
//! and back up or restore the store. Every access message it sends is
//! refused by the dispatcher.

use std::fs;
use std::path::PathBuf;

use crate::auth::{SecretDigest, UserObject, ADMIN_LOCK_KEY};
use crate::error::{AdminError, AuthError, SnapshotError};
use crate::kernel::Kernel;
use crate::model::{ItemId, ObjectId};
use crate::session::{HandleMap, Principal, Session, SessionId, SessionState, Terminal};
use crate::snapshot::StoreSnapshot;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdminCommand {
    CreateUser { name: String, initial_secret: String },
    BulkTransfer { departing: String, new_owner: String },
    /// Without a path, the configured snapshot path is used.
    Backup { path: Option<PathBuf> },
    Restore { path: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdminOutcome {
    UserCreated { name: String },
    Transferred { items: usize, flagged: bool },
    BackedUp { path: PathBuf, bytes: usize },
    Restored { users: usize, objects: usize },
}

impl Kernel {
    pub fn admin_login(&mut self, terminal: Terminal, serial: &str, secret: &str) -> Result<SessionId, AuthError> {
        let now = self.clock.now();
        if self.lockout.is_locked(ADMIN_LOCK_KEY, now) {
            return Err(AuthError::AuthFailed);
        }
        let admin = &self.config.admin;
        let serial_ok = !admin.serial.is_empty() && admin.serial == serial;
        let secret_ok = admin.secret_digest.as_ref().is_some_and(|d: &SecretDigest| d.matches(secret));
        if !(serial_ok & secret_ok) {
            self.lockout.record_failure(ADMIN_LOCK_KEY, now);
            return Err(AuthError::AuthFailed);
        }
        self.lockout.record_success(ADMIN_LOCK_KEY);
        if self.sessions.by_principal(Principal::Admin).is_some() {
            return Err(AuthError::AlreadyConnected);
        }
        if let Some(existing) = self.sessions.by_terminal(terminal) {
            let admin_there = matches!(self.sessions.get(existing).map(|s| s.principal), Some(Principal::Admin));
            return Err(if admin_there { AuthError::AlreadyConnected } else { AuthError::DualLoginForbidden });
        }
        let operator_live = self
            .config
            .admin
            .operator
            .as_deref()
            .and_then(|name| self.store.user_id_by_name(name))
            .is_some_and(|uid| self.sessions.by_principal(Principal::User(uid)).is_some());
        if operator_live {
            return Err(AuthError::DualLoginForbidden);
        }
        self.audit("login".into(), false);
        let session = Session {
            principal: Principal::Admin,
            terminal,
            handles: HandleMap::default(),
            started_at: now,
            state: SessionState::Active,
        };
        Ok(self.sessions.open(session, &mut self.rng))
    }

    pub fn admin(&mut self, sid: SessionId, command: AdminCommand) -> Result<AdminOutcome, AdminError> {
        if self.sessions.get(sid).map(|s| s.principal) != Some(Principal::Admin) {
            return Err(AdminError::NotAdmin);
        }
        match command {
            AdminCommand::CreateUser { name, initial_secret } => self.create_user(&name, &initial_secret),
            AdminCommand::BulkTransfer { departing, new_owner } => self.bulk_transfer(&departing, &new_owner),
            AdminCommand::Backup { path } => self.backup(self.snapshot_target(path)?),
            AdminCommand::Restore { path } => self.restore(self.snapshot_target(path)?),
        }
    }

    fn snapshot_target(&self, path: Option<PathBuf>) -> Result<PathBuf, AdminError> {
        path.or_else(|| self.config.snapshot_path.clone()).ok_or_else(|| {
            AdminError::Snapshot(SnapshotError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "no snapshot path given or configured",
            )))
        })
    }

    fn create_user(&mut self, name: &str, initial_secret: &str) -> Result<AdminOutcome, AdminError> {
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == '"') || initial_secret.is_empty() {
            return Err(AdminError::InvalidName);
        }
        if self.store.user_by_name(name).is_some() {
            return Err(AdminError::DuplicateName);
        }
        let signature = self
            .store
            .registry
            .mint(name, self.hasher.as_ref(), &mut self.rng)
            .map_err(|_| AdminError::RegistryExhausted)?;
        let object_id = ObjectId(self.store.alloc_id());
        let digest = SecretDigest::new(initial_secret, &mut self.rng);
        let user = UserObject::new(object_id, name.to_owned(), signature, digest, self.config.sequence_window_secs);
        self.store.users.insert(object_id, user);
        self.audit(format!("adduser {name:?}"), false);
        Ok(AdminOutcome::UserCreated { name: name.to_owned() })
    }

    /// Move every object and type of `departing` to `new_owner` in one step,
    /// then remove the departing user from the system.
    fn bulk_transfer(&mut self, departing: &str, new_owner: &str) -> Result<AdminOutcome, AdminError> {
        if departing == new_owner {
            return Err(AdminError::InvalidTransfer);
        }
        let (old_uid, old_sig) =
            self.store.user_by_name(departing).map(|u| (u.object_id, u.signature)).ok_or(AdminError::UnknownUser)?;
        let new_sig = self.store.user_by_name(new_owner).map(|u| u.signature).ok_or(AdminError::UnknownUser)?;

        let items: Vec<ItemId> = self
            .store
            .objects
            .values()
            .filter(|o| o.owner_signature == old_sig)
            .map(|o| ItemId::Object(o.object_id))
            .chain(
                self.store.types.values().filter(|t| t.owner_signature == old_sig).map(|t| ItemId::Type(t.type_id)),
            )
            .collect();
        for item in &items {
            self.restamp(*item, new_sig);
        }
        for user in self.store.users.values_mut() {
            user.group_list.remove(&old_sig);
        }
        self.store.users.remove(&old_uid);
        self.store.registry.retire(&old_sig);
        if let Some(sid) = self.sessions.by_principal(Principal::User(old_uid)) {
            self.sessions.close(sid);
        }
        let flagged = self.is_operator(new_owner);
        self.audit(format!("transfer {departing:?} -> {new_owner:?} items={}", items.len()), flagged);
        Ok(AdminOutcome::Transferred { items: items.len(), flagged })
    }

    fn backup(&mut self, path: PathBuf) -> Result<AdminOutcome, AdminError> {
        let text = StoreSnapshot::capture(&self.store).encode();
        fs::write(&path, &text).map_err(SnapshotError::from)?;
        self.audit(format!("backup {}", path.display()), false);
        Ok(AdminOutcome::BackedUp { path, bytes: text.len() })
    }

    fn restore(&mut self, path: PathBuf) -> Result<AdminOutcome, AdminError> {
        if self.sessions.has_user_sessions() {
            return Err(AdminError::SessionsActive);
        }
        let text = fs::read_to_string(&path).map_err(SnapshotError::from)?;
        let store = StoreSnapshot::decode(&text)?.into_store();
        store.validate(self.cipher.as_ref()).map_err(|_| SnapshotError::CorruptSnapshot)?;
        let outcome = AdminOutcome::Restored { users: store.users.len(), objects: store.objects.len() };
        self.store = store;
        self.audit(format!("restore {}", path.display()), false);
        Ok(outcome)
    }
}
