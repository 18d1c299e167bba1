//! Random worlds and a brute-force reference decision.
//!
//! The reference reads raw state through the inspector and recomputes every
//! verdict from scratch, without touching the kernel's own decision code.

use std::collections::HashSet;

use protea_core::inspect::Inspector;
use protea_core::{
    ErrorCode, Function, FunctionDecl, Handle, ItemId, ItemRef, KernelConfig, Mode, Request, Right,
    Scope, SessionId, Signature, Value, ValueKind, Visibility,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{schema, Fixture};

pub const MAX_USERS: usize = 10;
pub const MAX_ITEMS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Allow,
    Deny(ErrorCode),
}

/// Reference decision, written out case by case.
pub fn reference(
    requester: Signature,
    owner: Signature,
    mode: Mode,
    pattern: u8,
    owner_group: &HashSet<Signature>,
) -> Expected {
    if requester == owner {
        return Expected::Allow;
    }
    let (group_bit, all_bit) = match mode {
        Mode::Write => return Expected::Deny(ErrorCode::WriteForbidden),
        Mode::Read => (pattern & 0b0001 != 0, pattern & 0b0010 != 0),
        Mode::Use => (pattern & 0b0100 != 0, pattern & 0b1000 != 0),
    };
    if all_bit {
        Expected::Allow
    } else if group_bit {
        if owner_group.contains(&requester) {
            Expected::Allow
        } else {
            Expected::Deny(ErrorCode::DeniedGroup)
        }
    } else {
        Expected::Deny(ErrorCode::DeniedAll)
    }
}

/// Access outcome as observed in a reply.
pub fn observed(error: Option<ErrorCode>) -> Expected {
    match error {
        Some(code @ (ErrorCode::DeniedAll | ErrorCode::DeniedGroup | ErrorCode::WriteForbidden)) => {
            Expected::Deny(code)
        }
        _ => Expected::Allow,
    }
}

#[derive(Debug, Default, Clone)]
pub struct WorldStats {
    pub users: usize,
    pub items: usize,
    pub messages: usize,
    /// Messages whose access outcome was compared with the reference.
    pub decided: usize,
    pub disagreements: Vec<String>,
    pub writes_attempted: usize,
    pub writes_ok: usize,
    pub nonowner_writes_ok: usize,
    /// Read/use requests by non-owners after the matching all-bit was revoked.
    pub after_revoke: usize,
    /// Of those, successes no live grant could justify.
    pub stale_successes: usize,
}

impl WorldStats {
    pub fn absorb(&mut self, other: &WorldStats) {
        self.users += other.users;
        self.items += other.items;
        self.messages += other.messages;
        self.decided += other.decided;
        self.disagreements.extend(other.disagreements.iter().cloned());
        self.writes_attempted += other.writes_attempted;
        self.writes_ok += other.writes_ok;
        self.nonowner_writes_ok += other.nonowner_writes_ok;
        self.after_revoke += other.after_revoke;
        self.stale_successes += other.stale_successes;
    }
}

fn right_of(mode: Mode) -> Option<Right> {
    match mode {
        Mode::Read => Some(Right::Read),
        Mode::Use => Some(Right::Use),
        Mode::Write => None,
    }
}

fn random_visibility(rng: &mut ChaCha8Rng) -> Visibility {
    *[Visibility::Owner, Visibility::Group, Visibility::All].choose(rng).expect("non-empty")
}

fn random_mode(rng: &mut ChaCha8Rng) -> Mode {
    *[Mode::Read, Mode::Use, Mode::Write].choose(rng).expect("non-empty")
}

fn user_items(inspect: &Inspector<'_>) -> usize {
    let store = inspect.store();
    store.objects().count() + store.types().filter(|t| !t.is_builtin()).count()
}

/// Shadow record of revocations, kept only from acknowledged replies.
#[derive(Default)]
struct RevocationShadow {
    bits: HashSet<(ItemId, Right, Scope)>,
    members: HashSet<(String, String)>,
}

impl RevocationShadow {
    fn revoke_all(&mut self, item: ItemId) {
        for right in [Right::Read, Right::Use] {
            for scope in [Scope::Group, Scope::All] {
                self.bits.insert((item, right, scope));
            }
        }
    }

    /// Whether an all-scope revocation of `right` on `item` is still in force.
    fn all_revoked(&self, item: ItemId, right: Right) -> bool {
        self.bits.contains(&(item, right, Scope::All))
    }

    /// Whether no remaining grant can let `requester` through.
    fn no_path(&self, item: ItemId, right: Right, owner: &str, requester: &str) -> bool {
        self.all_revoked(item, right)
            && (self.bits.contains(&(item, right, Scope::Group))
                || self.members.contains(&(owner.to_owned(), requester.to_owned())))
    }
}

pub struct World {
    pub fixture: Fixture,
    pub names: Vec<String>,
    pub sessions: Vec<SessionId>,
    pub type_names: Vec<String>,
    rng: ChaCha8Rng,
    shadow: RevocationShadow,
}

impl World {
    pub fn build(seed: u64) -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = KernelConfig {
            inquisitor_threshold: u64::MAX,
            seed: Some(seed),
            ..super::config()
        };
        let mut fixture = Fixture::with_config(config);
        let n = rng.gen_range(2..=MAX_USERS);
        let names: Vec<String> = (0..n).map(|i| format!("U{i}")).collect();
        let sessions: Vec<SessionId> = names.iter().map(|name| fixture.user(name)).collect();
        let mut world =
            World { fixture, names, sessions, type_names: Vec::new(), rng, shadow: RevocationShadow::default() };
        world.define_types();
        world
    }

    fn define_types(&mut self) {
        let k = &mut self.fixture.kernel;
        for (i, name) in self.names.iter().enumerate() {
            let sid = self.sessions[i];
            let count = self.rng.gen_range(1..=3);
            let mut own: Vec<Handle> = Vec::new();
            for j in 0..count {
                let type_name = format!("T{i}x{j}");
                let parent = if !own.is_empty() && self.rng.gen_bool(0.3) {
                    Some(ItemRef::Handle(*own.choose(&mut self.rng).expect("non-empty")))
                } else {
                    None
                };
                let schemas = if parent.is_some() {
                    vec![schema(&format!("c{j}"), ValueKind::Text, random_visibility(&mut self.rng))]
                } else {
                    vec![
                        schema("a", ValueKind::Integer, random_visibility(&mut self.rng)),
                        schema("b", ValueKind::Text, random_visibility(&mut self.rng)),
                    ]
                };
                let functions = if parent.is_some() {
                    Vec::new()
                } else {
                    vec![FunctionDecl::new("f", random_mode(&mut self.rng))]
                };
                let reply = k.dispatch(
                    sid,
                    Request::to_user(name, Function::DefineType { name: type_name.clone(), parent, schemas, functions }),
                );
                let handle = reply.item().unwrap_or_else(|| panic!("define {type_name}: {reply:?}"));
                own.push(handle);
                self.type_names.push(type_name);
            }
        }
    }

    /// Every session learns a handle for every type and every instance.
    pub fn refresh_handles(&mut self) {
        let k = &mut self.fixture.kernel;
        for (i, name) in self.names.iter().enumerate() {
            let sid = self.sessions[i];
            for t in &self.type_names {
                k.dispatch(sid, Request::to_user(name, Function::Lookup { type_name: t.clone() }));
                k.dispatch_generic(sid, ItemRef::TypeName(t.clone()), Function::Describe, Default::default());
            }
        }
    }

    fn random_function(&mut self, sess: usize, item: ItemId, room: bool) -> Function {
        let rng = &mut self.rng;
        let right = *[Right::Read, Right::Use].choose(rng).expect("non-empty");
        let scope = *[Scope::Group, Scope::All].choose(rng).expect("non-empty");
        let enable = rng.gen_bool(0.5);
        let to = self.names.choose(rng).expect("non-empty").clone();
        match item {
            ItemId::Object(_) => match rng.gen_range(0..13) {
                0 | 1 => Function::Get { attr: "a".into() },
                2 => Function::Set { attr: "a".into(), values: vec![Value::Integer(rng.gen_range(0..10))] },
                3 => Function::Describe,
                4 | 5 => Function::Invoke { name: "f".into(), args: Vec::new() },
                6..=8 => Function::SetGrant { right, scope, enable },
                9 => Function::Donate { to },
                10 => Function::SetVisibility { attr: "b".into(), visibility: random_visibility(rng) },
                11 if room => Function::Duplicate { to, new_name: None },
                _ => {
                    let sid = self.sessions[sess];
                    let inspect = self.fixture.kernel.inspect();
                    let parts: Vec<Handle> = inspect
                        .handles(sid)
                        .into_iter()
                        .filter(|h| matches!(inspect.resolve(sid, *h), Some(ItemId::Object(_))))
                        .collect();
                    match parts.choose(rng) {
                        Some(p) => Function::Compose { part: ItemRef::Handle(*p) },
                        None => Function::Describe,
                    }
                }
            },
            ItemId::Type(_) => match rng.gen_range(0..6) {
                0 | 1 if room => Function::Instantiate { values: vec![("a".into(), Value::Integer(rng.gen_range(0..10)))] },
                2 | 3 => Function::SetGrant { right, scope, enable },
                4 => Function::Donate { to },
                _ => Function::Describe,
            },
        }
    }

    fn mode_of(&self, item: ItemId, function: &Function) -> Mode {
        match function {
            Function::Invoke { name, .. } => {
                let store = self.fixture.kernel.inspect().store();
                let ItemId::Object(o) = item else { unreachable!("invoke targets objects") };
                let ty = store.object(o).expect("live object").type_id();
                store.function_of(ty, name).expect("declared").mode
            }
            Function::Get { .. } | Function::Describe => Mode::Read,
            Function::Instantiate { .. } => Mode::Use,
            _ => Mode::Write,
        }
    }

    /// Send one random group-membership message to a user object.
    fn membership_message(&mut self, stats: &mut WorldStats) {
        let i = self.rng.gen_range(0..self.names.len());
        let j = self.rng.gen_range(0..self.names.len());
        let (owner, other) = (self.names[i].clone(), self.names[j].clone());
        let sid = self.sessions[i];
        if self.rng.gen_bool(0.6) {
            let r = self.fixture.kernel.dispatch(sid, Request::to_user(&other, Function::Inscription));
            if r.is_ok() {
                self.shadow.members.remove(&(owner, other));
            }
        } else {
            let r = self.fixture.kernel.dispatch(
                sid,
                Request::to_user(&owner, Function::RemoveMember { member: other.clone() }),
            );
            if r.is_ok() {
                self.shadow.members.insert((owner, other));
            }
        }
        stats.messages += 1;
    }

    /// Run `count` random messages, checking each against the reference.
    pub fn run(&mut self, count: usize) -> WorldStats {
        let mut stats = WorldStats { users: self.names.len(), ..WorldStats::default() };
        self.refresh_handles();
        for m in 0..count {
            if m % 100 == 99 {
                self.refresh_handles();
            }
            if self.rng.gen_bool(0.12) {
                self.membership_message(&mut stats);
                continue;
            }
            let sess = self.rng.gen_range(0..self.sessions.len());
            let sid = self.sessions[sess];
            let handles = self.fixture.kernel.inspect().handles(sid);
            let Some(&handle) = handles.choose(&mut self.rng) else { continue };
            let item = self.fixture.kernel.inspect().resolve(sid, handle).expect("own handle");
            let room = user_items(&self.fixture.kernel.inspect()) + 4 <= MAX_ITEMS;
            let function = self.random_function(sess, item, room);
            let mode = self.mode_of(item, &function);

            let (requester, owner, pattern, group, owner_name) = {
                let inspect = self.fixture.kernel.inspect();
                let requester = inspect.user_signature(&self.names[sess]).expect("live user");
                let owner = inspect.owner_of(item).expect("live item");
                let pattern = inspect.bits_of(item).expect("live item").pattern();
                let owner_user = inspect.store().user_by_signature(&owner).expect("owner exists");
                let group: HashSet<Signature> = owner_user.group_list().iter().copied().collect();
                (requester, owner, pattern, group, owner_user.name().to_owned())
            };
            let expected = reference(requester, owner, mode, pattern, &group);

            let reply = self.fixture.kernel.dispatch(sid, Request::to_item(handle, function.clone()));
            let got = observed(reply.error());
            stats.messages += 1;
            stats.decided += 1;
            if got != expected {
                stats.disagreements.push(format!(
                    "{} -> {item} {:?} bits={pattern:04b}: expected {expected:?}, got {:?}",
                    self.names[sess],
                    function.name(),
                    reply.status
                ));
            }
            if mode == Mode::Write {
                stats.writes_attempted += 1;
                if got == Expected::Allow {
                    stats.writes_ok += 1;
                    if requester != owner {
                        stats.nonowner_writes_ok += 1;
                    }
                }
            }
            if let Some(right) = right_of(mode) {
                if requester != owner && self.shadow.all_revoked(item, right) {
                    stats.after_revoke += 1;
                    if got == Expected::Allow && self.shadow.no_path(item, right, &owner_name, &self.names[sess]) {
                        stats.stale_successes += 1;
                    }
                }
            }
            if reply.is_ok() {
                self.absorb_effect(item, &function, &owner_name);
            }
        }
        stats.items = user_items(&self.fixture.kernel.inspect());
        stats
    }

    fn absorb_effect(&mut self, item: ItemId, function: &Function, owner: &str) {
        match function {
            Function::SetGrant { right, scope, enable: false } => {
                self.shadow.bits.insert((item, *right, *scope));
            }
            Function::SetGrant { right, scope, enable: true } => {
                self.shadow.bits.remove(&(item, *right, *scope));
            }
            Function::Donate { to } if to != owner => self.shadow.revoke_all(item),
            _ => {}
        }
    }
}

/// Build and run one world of at most `max_messages` messages.
pub fn run_world(seed: u64, max_messages: usize) -> WorldStats {
    let mut world = World::build(seed);
    let count = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        rng.gen_range(max_messages / 2..=max_messages)
    };
    world.run(count)
}
