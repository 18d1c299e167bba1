//! Protection bits and the access-decision function.
//!
//! Write is not a grantable right: there is no write bit, and a non-owner's
//! write request is always denied. Read and use can be opened to the owner's
//! group or to every user.

use serde::{Deserialize, Serialize};

use crate::error::ErrorCode;
use crate::signature::Signature;

/// Access mode of a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Read,
    Write,
    Use,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Read, Mode::Write, Mode::Use];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Read => "read",
            Mode::Write => "write",
            Mode::Use => "use",
        }
    }
}

/// A right that an owner may cede.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Right {
    Read,
    Use,
}

impl Right {
    pub fn mode(self) -> Mode {
        match self {
            Right::Read => Mode::Read,
            Right::Use => Mode::Use,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Group,
    All,
}

/// The protection zone of an object or type header.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtectionBits {
    pub read_group: bool,
    pub read_all: bool,
    pub use_group: bool,
    pub use_all: bool,
}

impl ProtectionBits {
    /// Every bit cleared: only the owner has access.
    pub const DENIED: ProtectionBits = ProtectionBits {
        read_group: false,
        read_all: false,
        use_group: false,
        use_all: false,
    };

    /// Build from a 4-bit pattern: bit0 read_group, bit1 read_all, bit2 use_group, bit3 use_all.
    pub fn from_pattern(pattern: u8) -> Self {
        ProtectionBits {
            read_group: pattern & 0b0001 != 0,
            read_all: pattern & 0b0010 != 0,
            use_group: pattern & 0b0100 != 0,
            use_all: pattern & 0b1000 != 0,
        }
    }

    pub fn pattern(self) -> u8 {
        (self.read_group as u8)
            | (self.read_all as u8) << 1
            | (self.use_group as u8) << 2
            | (self.use_all as u8) << 3
    }

    pub fn get(self, right: Right, scope: Scope) -> bool {
        match (right, scope) {
            (Right::Read, Scope::Group) => self.read_group,
            (Right::Read, Scope::All) => self.read_all,
            (Right::Use, Scope::Group) => self.use_group,
            (Right::Use, Scope::All) => self.use_all,
        }
    }

    pub fn set(&mut self, right: Right, scope: Scope, enable: bool) {
        let bit = match (right, scope) {
            (Right::Read, Scope::Group) => &mut self.read_group,
            (Right::Read, Scope::All) => &mut self.read_all,
            (Right::Use, Scope::Group) => &mut self.use_group,
            (Right::Use, Scope::All) => &mut self.use_all,
        };
        *bit = enable;
    }
}

/// Verdict classes of [`AccessDecision`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Allow,
    Deny,
    NeedsGroupCheck,
}

/// Outcome of [`decide`]. A deny always carries its error code; a pending
/// group check carries none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessDecision {
    Allow,
    Deny(ErrorCode),
    NeedsGroupCheck,
}

impl AccessDecision {
    pub fn verdict(self) -> Verdict {
        match self {
            AccessDecision::Allow => Verdict::Allow,
            AccessDecision::Deny(_) => Verdict::Deny,
            AccessDecision::NeedsGroupCheck => Verdict::NeedsGroupCheck,
        }
    }

    pub fn error_code(self) -> Option<ErrorCode> {
        match self {
            AccessDecision::Deny(code) => Some(code),
            _ => None,
        }
    }
}

/// Anything with an owner mark and a protection zone: objects and types.
pub trait Protected {
    fn owner_signature(&self) -> Signature;
    fn protection_bits(&self) -> ProtectionBits;
}

/// Decide a request from `requester` in `mode` against `target`.
///
/// Owner requests are allowed in every mode. For anyone else, write is
/// denied outright; read and use are allowed by the `*_all` bit, routed to a
/// group check by the `*_group` bit, and denied otherwise.
pub fn decide(requester: Signature, mode: Mode, target: &impl Protected) -> AccessDecision {
    if requester == target.owner_signature() {
        return AccessDecision::Allow;
    }
    let bits = target.protection_bits();
    let (all, group) = match mode {
        Mode::Write => return AccessDecision::Deny(ErrorCode::WriteForbidden),
        Mode::Read => (bits.read_all, bits.read_group),
        Mode::Use => (bits.use_all, bits.use_group),
    };
    if all {
        AccessDecision::Allow
    } else if group {
        AccessDecision::NeedsGroupCheck
    } else {
        AccessDecision::Deny(ErrorCode::DeniedAll)
    }
}
