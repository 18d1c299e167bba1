//! The kernel: owner of the store, the session table and every log.
//!
//! All interaction goes through `&mut Kernel`, so messages are resolved one
//! at a time in a total order. Front ends that serve several shells wrap it
//! in a mutex.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::auth::lockout::LockoutTracker;
use crate::auth::SecretDigest;
use crate::clock::{Clock, SystemClock, Timestamp};
use crate::message::{InnerParty, InnerPayload, Party, Payload, Reply, RoutedReply};
use crate::model::value::Plain;
use crate::model::{CipherHook, ItemId, KeyedStream, Store, Value};
use crate::session::{SessionId, SessionTable, Terminal};
use crate::signature::{Sha256Hasher, SignatureHasher};

const TRACE_CAPACITY: usize = 100_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdminConfig {
    pub serial: String,
    pub secret_digest: Option<SecretDigest>,
    /// User name of the person holding the administrator credentials.
    pub operator: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(alias = "S")]
    pub inquisitor_threshold: u64,
    #[serde(alias = "F")]
    pub lockout_threshold: u32,
    #[serde(alias = "C")]
    pub lockout_cooldown_secs: u64,
    #[serde(alias = "sequence_window")]
    pub sequence_window_secs: u64,
    pub snapshot_path: Option<PathBuf>,
    pub audit_log: Option<PathBuf>,
    pub trace_log: Option<PathBuf>,
    /// Seeds handle, salt and signature generation. Random when absent.
    pub seed: Option<u64>,
    pub admin: AdminConfig,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            inquisitor_threshold: 3,
            lockout_threshold: 5,
            lockout_cooldown_secs: 60,
            sequence_window_secs: 60,
            snapshot_path: None,
            audit_log: None,
            trace_log: None,
            seed: None,
            admin: AdminConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub dispatched: u64,
    pub control_messages: u64,
    pub denials: u64,
    pub admin_refusals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub at: Timestamp,
    pub action: String,
    /// Set on transfers whose beneficiary is the administrator's own user.
    pub flagged: bool,
}

impl std::fmt::Display for AuditEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} admin {}", self.at.millis(), self.action)?;
        if self.flagged {
            f.write_str(" FLAGGED:operator-beneficiary")?;
        }
        Ok(())
    }
}

pub(crate) struct Log<T> {
    entries: VecDeque<T>,
    file: Option<File>,
}

impl<T> Default for Log<T> {
    fn default() -> Self {
        Log { entries: VecDeque::new(), file: None }
    }
}

impl<T: std::fmt::Display> Log<T> {
    pub(crate) fn push(&mut self, entry: T) {
        if let Some(f) = &mut self.file {
            // Losing a log line must not take the kernel down.
            let _ = writeln!(f, "{entry}");
        }
        if self.entries.len() == TRACE_CAPACITY {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    fn attach(&mut self, path: &PathBuf) -> io::Result<()> {
        self.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(())
    }
}

pub struct Kernel {
    pub(crate) config: KernelConfig,
    pub(crate) store: Store,
    pub(crate) sessions: SessionTable,
    pub(crate) lockout: LockoutTracker,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) hasher: Box<dyn SignatureHasher>,
    pub(crate) cipher: Box<dyn CipherHook>,
    pub(crate) audit: Log<AuditEntry>,
    pub(crate) trace: Log<String>,
    pub(crate) metrics: Metrics,
    next_terminal: u64,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel").field("metrics", &self.metrics).finish_non_exhaustive()
    }
}

impl Kernel {
    pub fn new(config: KernelConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: KernelConfig, clock: Arc<dyn Clock>) -> Self {
        let rng = match config.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::seed_from_u64(rand::thread_rng().gen()),
        };
        Kernel {
            lockout: LockoutTracker::new(config.lockout_threshold, config.lockout_cooldown_secs),
            config,
            store: Store::new(),
            sessions: SessionTable::default(),
            clock,
            rng,
            hasher: Box::new(Sha256Hasher),
            cipher: Box::new(KeyedStream),
            audit: Log::default(),
            trace: Log::default(),
            metrics: Metrics::default(),
            next_terminal: 1,
        }
    }

    pub fn with_hasher(mut self, hasher: Box<dyn SignatureHasher>) -> Self {
        self.hasher = hasher;
        self
    }

    pub fn with_cipher(mut self, cipher: Box<dyn CipherHook>) -> Self {
        self.cipher = cipher;
        self
    }

    /// Open the trace and audit files named in the configuration, if any.
    pub fn attach_logs(&mut self) -> io::Result<()> {
        if let Some(p) = self.config.trace_log.clone() {
            self.trace.attach(&p)?;
        }
        if let Some(p) = self.config.audit_log.clone() {
            self.audit.attach(&p)?;
        }
        Ok(())
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn metrics(&self) -> Metrics {
        self.metrics
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// A fresh connection point. Each shell opens one.
    pub fn open_terminal(&mut self) -> Terminal {
        let t = Terminal(self.next_terminal);
        self.next_terminal += 1;
        t
    }

    /// Kernel trace of messages, replies and status-control exchanges.
    pub fn trace_lines(&self) -> impl Iterator<Item = &str> {
        self.trace.entries.iter().map(String::as_str)
    }

    pub fn audit_entries(&self) -> impl Iterator<Item = &AuditEntry> {
        self.audit.entries.iter()
    }

    pub(crate) fn trace(&mut self, line: String) {
        self.trace.push(line);
    }

    pub(crate) fn audit(&mut self, action: String, flagged: bool) {
        let at = self.clock.now();
        self.audit.push(AuditEntry { at, action, flagged });
    }


    fn export_value(&mut self, sid: SessionId, plain: Plain) -> Value {
        match plain {
            Plain::Text(s) => Value::Text(s),
            Plain::Integer(n) => Value::Integer(n),
            Plain::Boolean(b) => Value::Boolean(b),
            Plain::Counter(n) => Value::Counter(n),
            Plain::Reference(id) => Value::Reference(self.handle_for(sid, ItemId::Object(id))),
        }
    }

    pub(crate) fn handle_for(&mut self, sid: SessionId, item: ItemId) -> crate::session::Handle {
        let session = self.sessions.get_mut(sid).expect("exporting to a live session");
        session.handles.handle_for(item, &mut self.rng)
    }

    fn export_party(&mut self, sid: SessionId, party: InnerParty) -> Party {
        match party {
            InnerParty::User(n) => Party::User(n),
            InnerParty::Item(id) => Party::Item(self.handle_for(sid, id)),
            InnerParty::Kernel => Party::Kernel,
        }
    }

    /// Convert a kernel-form reply for delivery to `sid`, issuing handles.
    pub(crate) fn export_reply(&mut self, sid: SessionId, reply: RoutedReply) -> Reply {
        let payload = reply.payload.map(|p| match p {
            InnerPayload::Values(vs) => Payload::Values(vs.into_iter().map(|v| self.export_value(sid, v)).collect()),
            InnerPayload::Item(id) => Payload::Item(self.handle_for(sid, id)),
            InnerPayload::Text(t) => Payload::Text(t),
            InnerPayload::Count(n) => Payload::Count(n),
            InnerPayload::Inbox(rs) => Payload::Inbox(rs.into_iter().map(|r| self.export_reply(sid, r)).collect()),
        });
        Reply {
            from: self.export_party(sid, reply.from),
            to: self.export_party(sid, reply.to),
            status: reply.status,
            payload,
        }
    }
}
