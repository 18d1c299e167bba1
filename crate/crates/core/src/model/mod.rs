//! Minimal object model: types with attribute schemas, instances with
//! attributes and composition links, and the interface functions that are
//! the only path to attribute values.

pub mod cipher;
pub mod interface;
pub mod object;
pub mod schema;
pub mod store;
pub mod value;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cipher::{CipherContext, CipherHook, KeyedStream};
pub use object::ObjectRecord;
pub use schema::{
    AttributeSchema, Cardinality, FunctionDecl, IntegrityPredicate, RequesterClass, TypeDef,
    ValueKind, Visibility,
};
pub use store::{Store, StoreViolation};
pub use value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub(crate) u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeId(pub(crate) u64);

impl ObjectId {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl TypeId {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj:{}", self.0)
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "type:{}", self.0)
    }
}

/// Anything a session can hold a handle to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemId {
    Object(ObjectId),
    Type(TypeId),
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemId::Object(id) => id.fmt(f),
            ItemId::Type(id) => id.fmt(f),
        }
    }
}

/// Attribute names that can never be declared, consulted, or re-scoped.
pub const RESERVED_ATTRIBUTES: [&str; 2] = ["signature", "owner_signature"];

pub fn is_reserved_attribute(name: &str) -> bool {
    RESERVED_ATTRIBUTES.contains(&name)
}
