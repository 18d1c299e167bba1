//! Attribute values.
//!
//! [`Value`] is what sessions send and receive: references are session
//! handles. [`Plain`] is the kernel form with object ids, and
//! [`StoredValue`] is what sits in an attribute slot.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ObjectId;
use crate::session::Handle;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Text(String),
    Integer(i64),
    Boolean(bool),
    Reference(Handle),
    Counter(u64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Integer(n) => write!(f, "{n}"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Reference(h) => write!(f, "{h}"),
            Value::Counter(n) => write!(f, "{n}c"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub(crate) enum Plain {
    Text(String),
    Integer(i64),
    Boolean(bool),
    Reference(ObjectId),
    Counter(u64),
}

impl Plain {
    /// Text used by enumeration predicates.
    pub(crate) fn enum_text(&self) -> Option<String> {
        match self {
            Plain::Text(s) => Some(s.clone()),
            Plain::Integer(n) => Some(n.to_string()),
            Plain::Counter(n) => Some(n.to_string()),
            Plain::Boolean(b) => Some(b.to_string()),
            Plain::Reference(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum StoredValue {
    Plain(Plain),
    Ciphered(Vec<u8>),
}
