//! Shared fixtures for integration and acceptance tests.

#![allow(dead_code)]

pub mod world;

use std::sync::Arc;

use protea_core::{
    AdminCommand, AdminConfig, AttributeSchema, Cardinality, Credentials, Function, FunctionDecl, Handle, Kernel,
    KernelConfig, ManualClock, Mode, RecognitionChange, Reply, Request, Right, Scope, SecretDigest, SessionId,
    Terminal, Timestamp, Value, ValueKind, Visibility,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SERIAL: &str = "SN-0451-PROTEA";
pub const ADMIN_SECRET: &str = "clef-de-voute";
pub const OPERATOR: &str = "OPS";

pub fn secret_of(name: &str) -> String {
    format!("{}-tournesol", name.to_lowercase())
}

/// Test configuration. The inquisitor threshold is raised so scenarios that
/// provoke many denials are not interrupted; tests of the inquisitor lower it.
pub fn config() -> KernelConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    KernelConfig {
        seed: Some(7),
        inquisitor_threshold: 1000,
        admin: AdminConfig {
            serial: SERIAL.into(),
            secret_digest: Some(SecretDigest::new(ADMIN_SECRET, &mut rng)),
            operator: Some(OPERATOR.into()),
        },
        ..KernelConfig::default()
    }
}

/// A kernel on a manual clock, with an administrator session open.
pub struct Fixture {
    pub kernel: Kernel,
    pub clock: ManualClock,
    pub admin: SessionId,
    pub admin_terminal: Terminal,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_config(config())
    }

    pub fn with_config(config: KernelConfig) -> Self {
        let clock = ManualClock::new(Timestamp::from_secs(1_000_000));
        let mut kernel = Kernel::with_clock(config, Arc::new(clock.clone()));
        let admin_terminal = kernel.open_terminal();
        let admin = kernel.admin_login(admin_terminal, SERIAL, ADMIN_SECRET).expect("admin login");
        Fixture { kernel, clock, admin, admin_terminal }
    }

    /// Create a user, log in once to rotate the initial secret, and log out.
    pub fn create_user(&mut self, name: &str) {
        self.kernel
            .admin(self.admin, AdminCommand::CreateUser { name: name.into(), initial_secret: "initial".into() })
            .expect("create user");
        let t = self.kernel.open_terminal();
        let sid = self.kernel.login(t, &Credentials::new(name, "initial")).expect("first login");
        let reply = self.kernel.dispatch(
            sid,
            Request::to_user(name, Function::Configure { change: RecognitionChange::SetSecret(secret_of(name)) }),
        );
        assert!(reply.is_ok(), "rotation failed: {reply:?}");
        self.kernel.logout(sid);
    }

    /// Create the user named as operator. Its first login cannot overlap
    /// the administrator session, so that session is reopened afterwards.
    pub fn create_operator(&mut self) {
        self.kernel
            .admin(self.admin, AdminCommand::CreateUser { name: OPERATOR.into(), initial_secret: "initial".into() })
            .expect("create operator");
        self.kernel.logout(self.admin);
        let t = self.kernel.open_terminal();
        let sid = self.kernel.login(t, &Credentials::new(OPERATOR, "initial")).expect("first login");
        let change = RecognitionChange::SetSecret(secret_of(OPERATOR));
        assert!(self.kernel.dispatch(sid, Request::to_user(OPERATOR, Function::Configure { change })).is_ok());
        self.kernel.logout(sid);
        self.admin = self.kernel.admin_login(self.admin_terminal, SERIAL, ADMIN_SECRET).expect("admin login");
    }

    pub fn login(&mut self, name: &str) -> SessionId {
        let t = self.kernel.open_terminal();
        self.kernel.login(t, &Credentials::new(name, &secret_of(name))).expect("login")
    }

    pub fn user(&mut self, name: &str) -> SessionId {
        self.create_user(name);
        self.login(name)
    }
}

pub fn schema(name: &str, kind: ValueKind, vis: Visibility) -> AttributeSchema {
    AttributeSchema::new(name, kind, Cardinality::OPTIONAL).with_visibility(vis)
}

pub fn define(k: &mut Kernel, sid: SessionId, name: &str, schemas: Vec<AttributeSchema>) -> Handle {
    let user = k.session_user(sid).expect("live session").to_owned();
    let reply = k.dispatch(
        sid,
        Request::to_user(
            &user,
            Function::DefineType {
                name: name.into(),
                parent: None,
                schemas,
                functions: vec![FunctionDecl::new("imprimer", Mode::Use), FunctionDecl::new("relire", Mode::Read)],
            },
        ),
    );
    reply.item().unwrap_or_else(|| panic!("define {name}: {reply:?}"))
}

pub fn instantiate(k: &mut Kernel, sid: SessionId, ty: Handle, values: Vec<(&str, Value)>) -> Handle {
    let reply = k.dispatch(
        sid,
        Request::to_item(
            ty,
            Function::Instantiate { values: values.into_iter().map(|(n, v)| (n.to_owned(), v)).collect() },
        ),
    );
    reply.item().unwrap_or_else(|| panic!("instantiate: {reply:?}"))
}

pub fn grant(k: &mut Kernel, sid: SessionId, item: Handle, right: Right, scope: Scope, enable: bool) -> Reply {
    k.dispatch(sid, Request::to_item(item, Function::SetGrant { right, scope, enable }))
}

pub fn get(k: &mut Kernel, sid: SessionId, item: Handle, attr: &str) -> Reply {
    k.dispatch(sid, Request::to_item(item, Function::Get { attr: attr.into() }))
}

pub fn set(k: &mut Kernel, sid: SessionId, item: Handle, attr: &str, values: Vec<Value>) -> Reply {
    k.dispatch(sid, Request::to_item(item, Function::Set { attr: attr.into(), values }))
}

pub fn enroll(k: &mut Kernel, sid: SessionId, member: &str) -> Reply {
    k.dispatch(sid, Request::to_user(member, Function::Inscription))
}

/// Handle for `item` as seen from `viewer`, learned by a broadcast over
/// `type_name` (every instance answers with its handle, allowed or not).
pub fn learn(k: &mut Kernel, viewer: SessionId, type_name: &str) -> Vec<Handle> {
    k.dispatch_generic(
        viewer,
        protea_core::ItemRef::TypeName(type_name.into()),
        Function::Describe,
        Default::default(),
    )
    .into_iter()
    .filter_map(|r| match r.from {
        protea_core::Party::Item(h) => Some(h),
        _ => None,
    })
    .collect()
}
