//! The object store: every type, instance and user object in the system.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::interface::open_value;
use super::schema::{AttributeSchema, Cardinality, FunctionDecl, TypeDef, ValueKind, Visibility};
use super::value::{Plain, StoredValue};
use super::{CipherContext, CipherHook, ObjectId, ObjectRecord, TypeId};
use crate::auth::UserObject;
use crate::protection::{Mode, ProtectionBits};
use crate::signature::{Signature, SignatureRegistry};

pub const USER_TYPE: TypeId = TypeId(1);
pub const ADMIN_TYPE: TypeId = TypeId(2);
pub const USER_TYPE_NAME: &str = "USER";
pub const ADMIN_TYPE_NAME: &str = "ADMIN";

/// A broken store invariant, found by [`Store::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("store invariant violated: {0}")]
pub struct StoreViolation(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Store {
    pub(crate) types: BTreeMap<TypeId, TypeDef>,
    pub(crate) objects: BTreeMap<ObjectId, ObjectRecord>,
    pub(crate) users: BTreeMap<ObjectId, UserObject>,
    pub(crate) registry: SignatureRegistry,
    pub(crate) next_id: u64,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

fn user_type() -> TypeDef {
    let private = |name: &str, kind, card| AttributeSchema::new(name, kind, card).with_visibility(Visibility::Private);
    let many = Cardinality::new(0, u32::MAX).expect("static bounds");
    TypeDef {
        type_id: USER_TYPE,
        name: USER_TYPE_NAME.into(),
        parent: None,
        attribute_schemas: vec![
            AttributeSchema::new("name", ValueKind::Text, Cardinality::ONE).with_visibility(Visibility::All),
            private("secret_digest", ValueKind::Text, Cardinality::ONE),
            private("required_fields", ValueKind::Text, many),
            private("forbidden_fields", ValueKind::Text, many),
            private("action_sequence", ValueKind::Text, many),
            private("sequence_window", ValueKind::Counter, Cardinality::ONE),
            private("habit_attributes", ValueKind::Text, many),
            private("group_list", ValueKind::SignatureList, Cardinality::ONE),
            private("error_counter", ValueKind::Counter, Cardinality::ONE),
            private("opt_out_enroll", ValueKind::Boolean, Cardinality::ONE),
            private("inquisitor_qa", ValueKind::Text, many),
        ],
        functions: vec![
            FunctionDecl::new("inscription", Mode::Use),
            FunctionDecl::new("group-rm", Mode::Write),
            FunctionDecl::new("opt-out", Mode::Write),
            FunctionDecl::new("configure", Mode::Write),
            FunctionDecl::new("newtype", Mode::Use),
            FunctionDecl::new("lookup", Mode::Read),
            FunctionDecl::new("inbox", Mode::Read),
        ],
        owner_signature: Signature::SYSTEM,
        protection_bits: ProtectionBits { read_all: true, ..ProtectionBits::DENIED },
        builtin: true,
    }
}

fn admin_type() -> TypeDef {
    TypeDef {
        type_id: ADMIN_TYPE,
        name: ADMIN_TYPE_NAME.into(),
        parent: None,
        attribute_schemas: vec![
            AttributeSchema::new("serial_number", ValueKind::Text, Cardinality::ONE)
                .with_visibility(Visibility::Private),
            AttributeSchema::new("admin_secret_digest", ValueKind::Text, Cardinality::ONE)
                .with_visibility(Visibility::Private),
        ],
        functions: vec![
            FunctionDecl::new("adduser", Mode::Write),
            FunctionDecl::new("transfer", Mode::Write),
            FunctionDecl::new("backup", Mode::Read),
            FunctionDecl::new("restore", Mode::Write),
        ],
        owner_signature: Signature::SYSTEM,
        protection_bits: ProtectionBits { read_all: true, ..ProtectionBits::DENIED },
        builtin: true,
    }
}

impl Store {
    pub fn new() -> Self {
        let mut types = BTreeMap::new();
        types.insert(USER_TYPE, user_type());
        types.insert(ADMIN_TYPE, admin_type());
        Store {
            types,
            objects: BTreeMap::new(),
            users: BTreeMap::new(),
            registry: SignatureRegistry::new(),
            next_id: 3,
        }
    }

    pub(crate) fn alloc_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeDef> {
        self.types.values()
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.objects.values()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserObject> {
        self.users.values()
    }

    pub fn type_def(&self, id: TypeId) -> Option<&TypeDef> {
        self.types.get(&id)
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectRecord> {
        self.objects.get(&id)
    }

    pub fn user(&self, id: ObjectId) -> Option<&UserObject> {
        self.users.get(&id)
    }

    pub fn registry(&self) -> &SignatureRegistry {
        &self.registry
    }

    pub fn type_by_name(&self, name: &str) -> Option<&TypeDef> {
        self.types.values().find(|t| t.name == name)
    }

    pub fn user_by_name(&self, name: &str) -> Option<&UserObject> {
        self.users.values().find(|u| u.name == name)
    }

    pub(crate) fn user_id_by_name(&self, name: &str) -> Option<ObjectId> {
        self.user_by_name(name).map(|u| u.object_id)
    }

    pub fn user_by_signature(&self, sig: &Signature) -> Option<&UserObject> {
        self.users.values().find(|u| u.signature == *sig)
    }

    /// `id` followed by its ancestors, nearest first.
    pub fn ancestors(&self, id: TypeId) -> Vec<TypeId> {
        let mut chain = Vec::new();
        let mut cursor = Some(id);
        while let Some(t) = cursor {
            if chain.contains(&t) || chain.len() > self.types.len() {
                break;
            }
            chain.push(t);
            cursor = self.types.get(&t).and_then(|d| d.parent);
        }
        chain
    }

    pub fn is_subtype_of(&self, id: TypeId, ancestor: TypeId) -> bool {
        self.ancestors(id).contains(&ancestor)
    }

    /// Inherited schemas first, then the type's own.
    pub fn effective_schema(&self, id: TypeId) -> Vec<&AttributeSchema> {
        let mut chain = self.ancestors(id);
        chain.reverse();
        chain
            .into_iter()
            .filter_map(|t| self.types.get(&t))
            .flat_map(|t| t.attribute_schemas.iter())
            .collect()
    }

    pub fn schema_of(&self, id: TypeId, attr: &str) -> Option<&AttributeSchema> {
        self.effective_schema(id).into_iter().find(|s| s.name == attr)
    }

    /// Function declarations visible on instances of `id`, nearest type first.
    pub fn function_of(&self, id: TypeId, name: &str) -> Option<&FunctionDecl> {
        self.ancestors(id)
            .into_iter()
            .filter_map(|t| self.types.get(&t))
            .flat_map(|t| t.functions.iter())
            .find(|f| f.name == name)
    }

    /// Instances of `id` and of its subtypes, in id order.
    pub fn instances_of(&self, id: TypeId) -> Vec<ObjectId> {
        self.objects
            .values()
            .filter(|o| self.is_subtype_of(o.type_id, id))
            .map(|o| o.object_id)
            .collect()
    }

    /// Whether `to` is reachable from `from` through composition links.
    pub fn reaches(&self, from: ObjectId, to: ObjectId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if id == to {
                return true;
            }
            if !seen.insert(id) {
                continue;
            }
            if let Some(o) = self.objects.get(&id) {
                stack.extend(o.parts.iter().copied());
            }
        }
        false
    }

    /// `root` and every object reachable from it, each once.
    pub fn reachable_parts(&self, root: ObjectId) -> Vec<ObjectId> {
        let mut order = Vec::new();
        let mut stack = vec![root];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            order.push(id);
            if let Some(o) = self.objects.get(&id) {
                stack.extend(o.parts.iter().rev().copied());
            }
        }
        order
    }

    fn owner_is_valid(&self, sig: &Signature, builtin: bool) -> bool {
        if builtin {
            *sig == Signature::SYSTEM
        } else {
            self.registry.is_live(sig) && self.user_by_signature(sig).is_some()
        }
    }

    /// Full-store check of every structural invariant.
    pub fn validate(&self, cipher: &dyn CipherHook) -> Result<(), StoreViolation> {
        let fail = |msg: String| Err(StoreViolation(msg));

        let mut names = BTreeSet::new();
        for (id, t) in &self.types {
            if *id != t.type_id {
                return fail(format!("type key {id} does not match record"));
            }
            if !names.insert(t.name.as_str()) {
                return fail(format!("duplicate type name {}", t.name));
            }
            if let Some(p) = t.parent {
                if !self.types.contains_key(&p) {
                    return fail(format!("{id} has a missing parent"));
                }
            }
            let chain = self.ancestors(*id);
            let last = *chain.last().expect("chain holds id");
            if self.types.get(&last).and_then(|d| d.parent).is_some() {
                return fail(format!("{id} has a cyclic parent chain"));
            }
            if !self.owner_is_valid(&t.owner_signature, t.builtin) {
                return fail(format!("{id} carries an unknown owner"));
            }
            let mut attr_names = BTreeSet::new();
            for s in self.effective_schema(*id) {
                if !attr_names.insert(s.name.as_str()) {
                    return fail(format!("{id} declares {} twice", s.name));
                }
                if s.cardinality.min() > s.cardinality.max() {
                    return fail(format!("{id}.{} has inverted cardinality", s.name));
                }
            }
        }

        for (id, o) in &self.objects {
            if *id != o.object_id {
                return fail(format!("object key {id} does not match record"));
            }
            if self.users.contains_key(id) {
                return fail(format!("{id} is both an object and a user"));
            }
            let Some(t) = self.types.get(&o.type_id) else {
                return fail(format!("{id} has an unknown type"));
            };
            if t.builtin {
                return fail(format!("{id} instantiates a built-in type"));
            }
            if !self.owner_is_valid(&o.owner_signature, false) {
                return fail(format!("{id} carries an unknown owner"));
            }
            let schema = self.effective_schema(o.type_id);
            for name in o.attributes.keys() {
                if !schema.iter().any(|s| &s.name == name) {
                    return fail(format!("{id}.{name} is not in the schema"));
                }
            }
            for s in &schema {
                let slot = o.attributes.get(&s.name).map(Vec::as_slice).unwrap_or(&[]);
                if !s.cardinality.admits(slot.len()) {
                    return fail(format!("{id}.{} has {} values", s.name, slot.len()));
                }
                for (index, stored) in slot.iter().enumerate() {
                    let plain = match (stored, s.ciphered) {
                        (StoredValue::Plain(p), false) => p.clone(),
                        (StoredValue::Ciphered(bytes), true) => {
                            let ctx = CipherContext { object: *id, attr: &s.name, index };
                            match open_value(cipher, &o.owner_signature, &ctx, bytes) {
                                Some(p) => p,
                                None => return fail(format!("{id}.{} does not decipher", s.name)),
                            }
                        }
                        _ => return fail(format!("{id}.{} has the wrong storage form", s.name)),
                    };
                    if s.kind.conform(plain.clone()).as_ref() != Ok(&plain) {
                        return fail(format!("{id}.{} holds a value of the wrong kind", s.name));
                    }
                    if let Some(pred) = &s.integrity {
                        if !pred.holds(&plain) {
                            return fail(format!("{id}.{} violates its integrity predicate", s.name));
                        }
                    }
                    if let Plain::Reference(r) = plain {
                        if !self.objects.contains_key(&r) {
                            return fail(format!("{id}.{} references a missing object", s.name));
                        }
                    }
                }
            }
            for p in &o.parts {
                if !self.objects.contains_key(p) {
                    return fail(format!("{id} has a missing part {p}"));
                }
            }
        }
        self.check_acyclic()?;

        let mut user_names = BTreeSet::new();
        for (id, u) in &self.users {
            if *id != u.object_id {
                return fail(format!("user key {id} does not match record"));
            }
            if u.name.is_empty() || !user_names.insert(u.name.as_str()) {
                return fail(format!("user {id} has an empty or duplicate name"));
            }
            if !self.registry.is_live(&u.signature) {
                return fail(format!("user {} has a non-live signature", u.name));
            }
            if u.group_list.iter().any(|s| !self.registry.is_live(s)) {
                return fail(format!("user {} lists a dead signature", u.name));
            }
        }
        let live_users: BTreeSet<_> = self.users.values().map(|u| u.signature).collect();
        if live_users.len() != self.users.len() || live_users.len() != self.registry.live_count() {
            return fail("live signatures and user objects disagree".into());
        }
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), StoreViolation> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: HashMap<ObjectId, Mark> = HashMap::new();
        for &root in self.objects.keys() {
            if marks.contains_key(&root) {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            marks.insert(root, Mark::Active);
            while let Some(top) = stack.last_mut() {
                let (id, next) = *top;
                let parts = &self.objects[&id].parts;
                if next < parts.len() {
                    top.1 += 1;
                    let child = parts[next];
                    match marks.get(&child) {
                        Some(Mark::Active) => {
                            return Err(StoreViolation(format!("composition cycle through {child}")))
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(child, Mark::Active);
                            stack.push((child, 0));
                        }
                    }
                } else {
                    marks.insert(id, Mark::Done);
                    stack.pop();
                }
            }
        }
        Ok(())
    }
}
