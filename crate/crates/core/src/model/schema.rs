//! Type definitions and attribute schemas.

use serde::{Deserialize, Serialize};

use super::value::Plain;
use super::{is_reserved_attribute, TypeId};
use crate::error::ErrorCode;
use crate::protection::{Mode, ProtectionBits, Protected};
use crate::signature::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    Text,
    Integer,
    Boolean,
    Reference,
    /// Kernel-only kind (group lists); user schemas cannot declare it.
    SignatureList,
    Counter,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Text => "text",
            ValueKind::Integer => "int",
            ValueKind::Boolean => "bool",
            ValueKind::Reference => "ref",
            ValueKind::SignatureList => "siglist",
            ValueKind::Counter => "counter",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        Some(match s {
            "text" => ValueKind::Text,
            "int" | "integer" => ValueKind::Integer,
            "bool" | "boolean" => ValueKind::Boolean,
            "ref" | "reference" => ValueKind::Reference,
            "siglist" => ValueKind::SignatureList,
            "counter" => ValueKind::Counter,
            _ => return None,
        })
    }

    /// Check `value` against this kind, widening non-negative integers to counters.
    pub(crate) fn conform(self, value: Plain) -> Result<Plain, ErrorCode> {
        match (self, value) {
            (ValueKind::Text, v @ Plain::Text(_))
            | (ValueKind::Integer, v @ Plain::Integer(_))
            | (ValueKind::Boolean, v @ Plain::Boolean(_))
            | (ValueKind::Reference, v @ Plain::Reference(_))
            | (ValueKind::Counter, v @ Plain::Counter(_)) => Ok(v),
            (ValueKind::Counter, Plain::Integer(n)) if n >= 0 => Ok(Plain::Counter(n as u64)),
            _ => Err(ErrorCode::ArgTypeMismatch),
        }
    }
}

/// Occurrence bounds of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cardinality {
    min: u32,
    max: u32,
}

impl Cardinality {
    pub const ONE: Cardinality = Cardinality { min: 1, max: 1 };
    pub const OPTIONAL: Cardinality = Cardinality { min: 0, max: 1 };

    pub fn new(min: u32, max: u32) -> Result<Self, ErrorCode> {
        if min > max || max == 0 {
            return Err(ErrorCode::ConstraintViolation);
        }
        Ok(Cardinality { min, max })
    }

    pub fn min(self) -> u32 {
        self.min
    }

    pub fn max(self) -> u32 {
        self.max
    }

    pub fn admits(self, count: usize) -> bool {
        (self.min as usize..=self.max as usize).contains(&count)
    }
}

/// Declarative integrity constraint on attribute values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegrityPredicate {
    /// Inclusive bounds on integer and counter values.
    Range { min: i64, max: i64 },
    /// Allowed textual renderings.
    Enumeration(Vec<String>),
    /// Regular expression that must match the whole text value.
    Pattern(String),
}

impl IntegrityPredicate {
    fn compatible_with(&self, kind: ValueKind) -> bool {
        match self {
            IntegrityPredicate::Range { min, max } => {
                min <= max && matches!(kind, ValueKind::Integer | ValueKind::Counter)
            }
            IntegrityPredicate::Enumeration(options) => {
                !options.is_empty()
                    && matches!(
                        kind,
                        ValueKind::Text | ValueKind::Integer | ValueKind::Counter | ValueKind::Boolean
                    )
            }
            IntegrityPredicate::Pattern(re) => {
                kind == ValueKind::Text && regex::Regex::new(&anchored(re)).is_ok()
            }
        }
    }

    pub(crate) fn holds(&self, value: &Plain) -> bool {
        match self {
            IntegrityPredicate::Range { min, max } => {
                let n = match value {
                    Plain::Integer(n) => *n as i128,
                    Plain::Counter(n) => *n as i128,
                    _ => return false,
                };
                (*min as i128..=*max as i128).contains(&n)
            }
            IntegrityPredicate::Enumeration(options) => value
                .enum_text()
                .is_some_and(|text| options.contains(&text)),
            IntegrityPredicate::Pattern(re) => match (value, regex::Regex::new(&anchored(re))) {
                (Plain::Text(s), Ok(re)) => re.is_match(s),
                _ => false,
            },
        }
    }
}

fn anchored(re: &str) -> String {
    format!("^(?:{re})$")
}

/// Who may consult an attribute. `Private` admits nobody, not even the owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Visibility {
    Private,
    Owner,
    Group,
    All,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Private => "private",
            Visibility::Owner => "owner",
            Visibility::Group => "group",
            Visibility::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Visibility> {
        Some(match s {
            "private" => Visibility::Private,
            "owner" => Visibility::Owner,
            "group" => Visibility::Group,
            "all" => Visibility::All,
            _ => return None,
        })
    }

    /// Owner reads owner/group/all attributes, a group member reads
    /// group/all, everyone else reads all.
    pub fn admits(self, class: RequesterClass) -> bool {
        match self {
            Visibility::Private => false,
            Visibility::Owner => class == RequesterClass::Owner,
            Visibility::Group => matches!(class, RequesterClass::Owner | RequesterClass::Group),
            Visibility::All => true,
        }
    }
}

/// How the dispatcher classified a requester after the access decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequesterClass {
    Owner,
    Group,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: ValueKind,
    pub cardinality: Cardinality,
    pub integrity: Option<IntegrityPredicate>,
    pub visibility: Visibility,
    pub ciphered: bool,
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, kind: ValueKind, cardinality: Cardinality) -> Self {
        AttributeSchema {
            name: name.into(),
            kind,
            cardinality,
            integrity: None,
            visibility: Visibility::Owner,
            ciphered: false,
        }
    }

    pub fn with_visibility(mut self, visibility: Visibility) -> Self {
        self.visibility = visibility;
        self
    }

    pub fn with_integrity(mut self, predicate: IntegrityPredicate) -> Self {
        self.integrity = Some(predicate);
        self
    }

    pub fn ciphered(mut self) -> Self {
        self.ciphered = true;
        self
    }

    /// Validate a schema submitted by a user.
    pub(crate) fn check_user_schema(&self) -> Result<(), ErrorCode> {
        if is_reserved_attribute(&self.name) {
            return Err(ErrorCode::KernelPrivateAttribute);
        }
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(ErrorCode::ConstraintViolation);
        }
        if self.kind == ValueKind::SignatureList {
            return Err(ErrorCode::ArgTypeMismatch);
        }
        Cardinality::new(self.cardinality.min, self.cardinality.max)?;
        if let Some(pred) = &self.integrity {
            if !pred.compatible_with(self.kind) {
                return Err(ErrorCode::ConstraintViolation);
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let max = match self.cardinality.max {
            u32::MAX => "*".to_owned(),
            n => n.to_string(),
        };
        let mut out = format!(
            "{}:{}[{}..{}]:{}",
            self.name,
            self.kind.as_str(),
            self.cardinality.min,
            max,
            self.visibility.as_str()
        );
        if self.ciphered {
            out.push_str(":cipher");
        }
        match &self.integrity {
            Some(IntegrityPredicate::Range { min, max }) => out.push_str(&format!(":range={min}..{max}")),
            Some(IntegrityPredicate::Enumeration(opts)) => out.push_str(&format!(":enum={}", opts.join("|"))),
            Some(IntegrityPredicate::Pattern(re)) => out.push_str(&format!(":pattern={re}")),
            None => {}
        }
        out
    }
}

/// A declared function and its access mode. Parameters are checked by kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub mode: Mode,
    pub params: Vec<ValueKind>,
}

impl FunctionDecl {
    pub fn new(name: impl Into<String>, mode: Mode) -> Self {
        FunctionDecl { name: name.into(), mode, params: Vec::new() }
    }

    pub fn with_params(mut self, params: Vec<ValueKind>) -> Self {
        self.params = params;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDef {
    pub(crate) type_id: TypeId,
    pub(crate) name: String,
    pub(crate) parent: Option<TypeId>,
    pub(crate) attribute_schemas: Vec<AttributeSchema>,
    pub(crate) functions: Vec<FunctionDecl>,
    pub(crate) owner_signature: Signature,
    pub(crate) protection_bits: ProtectionBits,
    pub(crate) builtin: bool,
}

impl TypeDef {
    pub fn type_id(&self) -> TypeId {
        self.type_id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parent(&self) -> Option<TypeId> {
        self.parent
    }

    /// Schemas declared on this type only; see `Store::effective_schema`.
    pub fn own_schemas(&self) -> &[AttributeSchema] {
        &self.attribute_schemas
    }

    pub fn functions(&self) -> &[FunctionDecl] {
        &self.functions
    }

    pub fn is_builtin(&self) -> bool {
        self.builtin
    }
}

impl Protected for TypeDef {
    fn owner_signature(&self) -> Signature {
        self.owner_signature
    }

    fn protection_bits(&self) -> ProtectionBits {
        self.protection_bits
    }
}
