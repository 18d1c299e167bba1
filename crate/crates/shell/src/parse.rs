//! Command grammar shared by the REPL, batch scripts and the socket server.
//!
//! One line is one command: a verb, its arguments, and an optional `-> name`
//! suffix binding the returned handle. Batch scripts add `@+Ns` clock
//! directives and `@tty NAME` terminal switches.

use std::fmt;
use std::path::PathBuf;

use protea_core::{
    AttributeSchema, Cardinality, Function, FunctionDecl, Handle, IntegrityPredicate, Mode, Operation, PayloadKind,
    RecognitionChange, Right, Scope, ValueKind, Visibility,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

/// Every verb and the kernel operation it drives.
pub const VERBS: [(&str, Operation); 29] = [
    ("login", Operation::Login),
    ("logout", Operation::Logout),
    ("admin login", Operation::AdminLogin),
    ("newtype", Operation::DefineType),
    ("inst", Operation::Instantiate),
    ("compose", Operation::Compose),
    ("set", Operation::Set),
    ("get", Operation::Get),
    ("info", Operation::Describe),
    ("call", Operation::Invoke),
    ("addattr", Operation::AddAttribute),
    ("donate", Operation::Donate),
    ("dup", Operation::Duplicate),
    ("grant", Operation::Grant),
    ("revoke", Operation::Revoke),
    ("attr-vis", Operation::SetVisibility),
    ("group add", Operation::Enroll),
    ("group rm", Operation::RemoveMember),
    ("group opt-out", Operation::OptOut),
    ("profile", Operation::Configure),
    ("type", Operation::Lookup),
    ("inbox", Operation::Inbox),
    ("each", Operation::Broadcast),
    ("send", Operation::SendMessage),
    ("answer", Operation::AnswerInquiry),
    ("admin adduser", Operation::CreateUser),
    ("admin transfer", Operation::BulkTransfer),
    ("admin backup", Operation::Backup),
    ("admin restore", Operation::Restore),
];

/// A handle as written by the user: a binding or a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ref {
    Bound(String),
    Handle(Handle),
}

/// An object or a type: references, or a bare type name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subject {
    Ref(Ref),
    Type(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lit {
    Text(String),
    Int(i64),
    Bool(bool),
    Counter(u64),
    Ref(Ref),
}

/// A function whose arguments may still name bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Func {
    Set { attr: String, values: Vec<Lit> },
    Compose { part: Subject },
    Invoke { name: String, args: Vec<Lit> },
    Instantiate { values: Vec<(String, Lit)> },
    DefineType { name: String, parent: Option<Subject>, schemas: Vec<AttributeSchema>, functions: Vec<FunctionDecl> },
    Ready(Function),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MsgTarget {
    /// The session's own user object.
    Me,
    User(String),
    Item(Subject),
    /// Every instance of a type.
    All(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Login { name: String, secret: Option<String>, fields: Vec<(String, String)> },
    Logout,
    AdminLogin { serial: String, secret: Option<String> },
    AddUser { name: String, secret: String },
    Transfer { from: String, to: String },
    Backup { path: Option<PathBuf> },
    Restore { path: Option<PathBuf> },
    Message { target: MsgTarget, func: Func },
    Send { emitter: Option<String>, target: MsgTarget, func: Func, cc: Vec<MsgTarget>, expect: Option<PayloadKind> },
    Answer(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub verb: &'static str,
    pub command: Command,
    pub bind: Option<String>,
    /// The line as it may be echoed, secrets masked.
    pub echo: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Command(Box<Line>),
    /// Move the injected clock forward.
    Advance(u64),
    /// Switch to (or open) the named terminal.
    Tty(String),
}

/// Split on whitespace outside double quotes. Quotes are kept.
pub fn tokenize(line: &str) -> Result<Vec<String>, ParseError> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut escaped = false;
    for c in line.chars() {
        if in_quotes {
            cur.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quotes = false;
            }
        } else if c.is_whitespace() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        } else {
            if c == '"' {
                in_quotes = true;
            }
            cur.push(c);
        }
    }
    if in_quotes {
        return err("unterminated string");
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    Ok(tokens)
}

/// Remove surrounding quotes and resolve escapes. Bare words pass through.
pub fn unquote(s: &str) -> Result<String, ParseError> {
    let Some(inner) = s.strip_prefix('"') else {
        return Ok(s.to_owned());
    };
    let Some(inner) = inner.strip_suffix('"') else {
        return err(format!("malformed string {s}"));
    };
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('"') => out.push('"'),
            Some('\\') => out.push('\\'),
            Some('u') => {
                let rest: String = chars.by_ref().take_while(|c| *c != '}').collect();
                let code = rest
                    .strip_prefix('{')
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .and_then(char::from_u32);
                match code {
                    Some(ch) => out.push(ch),
                    None => return err(format!("bad unicode escape in {s}")),
                }
            }
            _ => return err(format!("bad escape in {s}")),
        }
    }
    Ok(out)
}

fn parse_ref(s: &str) -> Option<Ref> {
    if let Some(name) = s.strip_prefix('$') {
        return (!name.is_empty()).then(|| Ref::Bound(name.to_owned()));
    }
    if s.starts_with('#') {
        return s.parse().ok().map(Ref::Handle);
    }
    None
}

fn parse_subject(s: &str) -> Result<Subject, ParseError> {
    if s.starts_with('$') || s.starts_with('#') {
        return parse_ref(s).map(Subject::Ref).ok_or_else(|| ParseError(format!("bad reference {s}")));
    }
    Ok(Subject::Type(unquote(s)?))
}

pub fn parse_lit(s: &str) -> Result<Lit, ParseError> {
    if s.starts_with('"') {
        return unquote(s).map(Lit::Text);
    }
    if s.starts_with('$') || s.starts_with('#') {
        return parse_ref(s).map(Lit::Ref).ok_or_else(|| ParseError(format!("bad reference {s}")));
    }
    match s {
        "true" => return Ok(Lit::Bool(true)),
        "false" => return Ok(Lit::Bool(false)),
        _ => {}
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok(Lit::Int(n));
    }
    if let Some(n) = s.strip_suffix('c').and_then(|d| d.parse::<u64>().ok()) {
        return Ok(Lit::Counter(n));
    }
    Ok(Lit::Text(s.to_owned()))
}

fn parse_right(s: &str) -> Result<Right, ParseError> {
    match s {
        "read" => Ok(Right::Read),
        "use" => Ok(Right::Use),
        "write" => err("write cannot be granted"),
        _ => err(format!("expected read or use, got {s}")),
    }
}

fn parse_scope(s: &str) -> Result<Scope, ParseError> {
    match s {
        "group" => Ok(Scope::Group),
        "all" => Ok(Scope::All),
        _ => err(format!("expected group or all, got {s}")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, ParseError> {
    match s {
        "read" => Ok(Mode::Read),
        "write" => Ok(Mode::Write),
        "use" => Ok(Mode::Use),
        _ => err(format!("unknown mode {s}")),
    }
}

fn parse_visibility(s: &str) -> Result<Visibility, ParseError> {
    Visibility::parse(s).ok_or_else(|| ParseError(format!("unknown visibility {s}")))
}

fn parse_kind(s: &str) -> Result<ValueKind, ParseError> {
    ValueKind::parse(s).ok_or_else(|| ParseError(format!("unknown kind {s}")))
}

fn parse_on_off(s: &str) -> Result<bool, ParseError> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => err(format!("expected on or off, got {s}")),
    }
}

fn parse_range(s: &str) -> Option<(&str, &str)> {
    s.split_once("..")
}

/// `name:kind[:min..max][:visibility][:cipher][:range=a..b][:enum=x|y][:pattern=re]`
pub fn parse_attr_spec(s: &str) -> Result<AttributeSchema, ParseError> {
    let mut parts = s.splitn(3, ':');
    let name = parts.next().unwrap_or_default();
    let kind = parse_kind(parts.next().ok_or_else(|| ParseError(format!("attribute {s} needs a kind")))?)?;
    let mut schema = AttributeSchema::new(name, kind, Cardinality::OPTIONAL);
    let mut rest = parts.next().unwrap_or_default();
    while !rest.is_empty() {
        if let Some(re) = rest.strip_prefix("pattern=") {
            schema = schema.with_integrity(IntegrityPredicate::Pattern(re.to_owned()));
            break;
        }
        let (opt, tail) = rest.split_once(':').unwrap_or((rest, ""));
        rest = tail;
        if let Some(r) = opt.strip_prefix("range=") {
            let (a, b) = parse_range(r).ok_or_else(|| ParseError(format!("bad range {r}")))?;
            let (min, max) = (a.parse().map_err(|_| ParseError(format!("bad range {r}")))?, b.parse().map_err(|_| ParseError(format!("bad range {r}")))?);
            schema = schema.with_integrity(IntegrityPredicate::Range { min, max });
        } else if let Some(e) = opt.strip_prefix("enum=") {
            schema = schema.with_integrity(IntegrityPredicate::Enumeration(e.split('|').map(str::to_owned).collect()));
        } else if opt == "cipher" {
            schema = schema.ciphered();
        } else if let Some((a, b)) = parse_range(opt) {
            let min = a.parse().map_err(|_| ParseError(format!("bad cardinality {opt}")))?;
            let max = if b == "*" { u32::MAX } else { b.parse().map_err(|_| ParseError(format!("bad cardinality {opt}")))? };
            schema.cardinality = Cardinality::new(min, max).map_err(|_| ParseError(format!("bad cardinality {opt}")))?;
        } else {
            schema.visibility = parse_visibility(opt)?;
        }
    }
    Ok(schema)
}

/// `name:mode[:kind,kind...]`
fn parse_fn_spec(s: &str) -> Result<FunctionDecl, ParseError> {
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or_default();
    let mode = parse_mode(parts.next().ok_or_else(|| ParseError(format!("function {s} needs a mode")))?)?;
    let params = match parts.next() {
        Some(kinds) if !kinds.is_empty() => kinds.split(',').map(parse_kind).collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };
    Ok(FunctionDecl::new(name, mode).with_params(params))
}

fn key_value(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    (!k.is_empty() && !k.starts_with('"')).then_some((k, v))
}

fn user_name(s: &str) -> Result<String, ParseError> {
    let name = unquote(s)?;
    if name.is_empty() {
        return err("empty user name");
    }
    Ok(name)
}

struct Args<'a> {
    verb: &'a str,
    tokens: &'a [String],
    pos: usize,
}

impl<'a> Args<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ParseError> {
        let t = self.tokens.get(self.pos).ok_or_else(|| ParseError(format!("{}: missing {what}", self.verb)))?;
        self.pos += 1;
        Ok(t)
    }

    fn opt(&mut self) -> Option<&'a str> {
        let t = self.tokens.get(self.pos)?;
        self.pos += 1;
        Some(t)
    }

    fn rest(&mut self) -> &'a [String] {
        let r = &self.tokens[self.pos.min(self.tokens.len())..];
        self.pos = self.tokens.len();
        r
    }

    fn done(&self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(t) => err(format!("{}: unexpected argument {t}", self.verb)),
        }
    }
}

fn message(target: MsgTarget, func: Func) -> Command {
    Command::Message { target, func }
}

fn ready(f: Function) -> Func {
    Func::Ready(f)
}

fn profile_change(a: &mut Args<'_>, redact: &mut Vec<usize>) -> Result<RecognitionChange, ParseError> {
    let sub = a.next("profile setting")?;
    let change = match sub {
        "secret" => {
            redact.push(a.pos);
            RecognitionChange::SetSecret(unquote(a.next("new secret")?)?)
        }
        "rm-secret" => RecognitionChange::RemoveSecret,
        "require" => {
            let field = unquote(a.next("field")?)?;
            redact.push(a.pos);
            RecognitionChange::RequireField { field, value: unquote(a.next("value")?)? }
        }
        "unrequire" => RecognitionChange::DropRequiredField(unquote(a.next("field")?)?),
        "forbid" => RecognitionChange::ForbidField(unquote(a.next("field")?)?),
        "allow" => RecognitionChange::AllowField(unquote(a.next("field")?)?),
        "sequence" => {
            let tokens: Vec<String> = a.next("tokens")?.split(',').map(str::to_owned).collect();
            let window_secs = match a.opt() {
                None => None,
                Some(w) => {
                    let secs = w.strip_prefix("window=").ok_or_else(|| ParseError(format!("expected window=N, got {w}")))?;
                    Some(secs.trim_end_matches('s').parse().map_err(|_| ParseError(format!("bad window {w}")))?)
                }
            };
            RecognitionChange::SetSequence { tokens, window_secs }
        }
        "clear-sequence" => RecognitionChange::ClearSequence,
        "question" => {
            let question = unquote(a.next("question")?)?;
            redact.push(a.pos);
            RecognitionChange::AddQuestion { question, answer: unquote(a.next("answer")?)? }
        }
        "clear-questions" => RecognitionChange::ClearQuestions,
        other => return err(format!("profile: unknown setting {other}")),
    };
    a.done()?;
    Ok(change)
}

fn grant_fn(a: &mut Args<'_>, enable: bool) -> Result<Function, ParseError> {
    let right = parse_right(a.next("right")?)?;
    let scope = parse_scope(a.next("scope")?)?;
    Ok(Function::SetGrant { right, scope, enable })
}

fn newtype(a: &mut Args<'_>) -> Result<Func, ParseError> {
    let name = unquote(a.next("type name")?)?;
    let mut parent = None;
    let mut schemas = Vec::new();
    let mut functions = Vec::new();
    for t in a.rest() {
        if let Some(p) = t.strip_prefix("extends=") {
            parent = Some(parse_subject(p)?);
        } else if let Some(f) = t.strip_prefix("fn=") {
            functions.push(parse_fn_spec(f)?);
        } else {
            schemas.push(parse_attr_spec(t)?);
        }
    }
    Ok(Func::DefineType { name, parent, schemas, functions })
}

fn inst_values(tokens: &[String]) -> Result<Vec<(String, Lit)>, ParseError> {
    tokens
        .iter()
        .map(|t| {
            let (k, v) = key_value(t).ok_or_else(|| ParseError(format!("expected attr=value, got {t}")))?;
            Ok((k.to_owned(), parse_lit(v)?))
        })
        .collect()
}

fn lits(tokens: &[String]) -> Result<Vec<Lit>, ParseError> {
    tokens.iter().map(|t| parse_lit(t)).collect()
}

/// A function given by name and textual arguments, as in `send` and `each`.
pub fn parse_function(name: &str, args: &[String]) -> Result<Func, ParseError> {
    let mut a = Args { verb: name, tokens: args, pos: 0 };
    let func = match name {
        "get" => ready(Function::Get { attr: unquote(a.next("attribute")?)? }),
        "set" => {
            let attr = unquote(a.next("attribute")?)?;
            Func::Set { attr, values: lits(a.rest())? }
        }
        "describe" => ready(Function::Describe),
        "compose" => Func::Compose { part: parse_subject(a.next("part")?)? },
        "instantiate" => Func::Instantiate { values: inst_values(a.rest())? },
        "addattr" => ready(Function::AddAttribute { schema: parse_attr_spec(a.next("attribute spec")?)? }),
        "donate" => ready(Function::Donate { to: user_name(a.next("recipient")?)? }),
        "duplicate" => {
            let to = user_name(a.next("recipient")?)?;
            let new_name = a.opt().map(unquote).transpose()?;
            ready(Function::Duplicate { to, new_name })
        }
        "grant" => ready(grant_fn(&mut a, true)?),
        "revoke" => ready(grant_fn(&mut a, false)?),
        "attr-vis" => {
            let attr = unquote(a.next("attribute")?)?;
            ready(Function::SetVisibility { attr, visibility: parse_visibility(a.next("visibility")?)? })
        }
        "inscription" => ready(Function::Inscription),
        "group-rm" => ready(Function::RemoveMember { member: user_name(a.next("member")?)? }),
        "opt-out" => ready(Function::SetOptOut { opt_out: parse_on_off(a.next("on|off")?)? }),
        "lookup" => ready(Function::Lookup { type_name: unquote(a.next("type name")?)? }),
        "inbox" => ready(Function::Inbox),
        "configure" => return err("configure carries secrets; use the profile verb"),
        "newtype" => newtype(&mut a)?,
        "" => return err("missing function name"),
        other => Func::Invoke { name: other.to_owned(), args: lits(a.rest())? },
    };
    a.done()?;
    Ok(func)
}

/// Split the inside of `Mess(...)` on commas outside quotes.
fn split_fields(s: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut escaped = false;
    for c in s.chars() {
        if in_quotes {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quotes = false;
            }
            cur.push(c);
        } else if c == ',' {
            fields.push(std::mem::take(&mut cur).trim().to_owned());
        } else {
            if c == '"' {
                in_quotes = true;
            }
            cur.push(c);
        }
    }
    fields.push(cur.trim().to_owned());
    fields
}

fn parse_target(s: &str) -> Result<MsgTarget, ParseError> {
    if s.starts_with('"') {
        return Ok(MsgTarget::User(user_name(s)?));
    }
    if let Some(t) = s.strip_prefix("all:") {
        return Ok(MsgTarget::All(unquote(t)?));
    }
    if let Some(t) = s.strip_prefix("type:") {
        return Ok(MsgTarget::Item(Subject::Type(unquote(t)?)));
    }
    match parse_ref(s) {
        Some(r) => Ok(MsgTarget::Item(Subject::Ref(r))),
        None => err(format!("bad target {s}: expected \"USER\", $name, #handle, type:NAME or all:NAME")),
    }
}

/// The emitter the user wrote in a message, checked later against the session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessText {
    pub emitter: Option<String>,
    pub target: MsgTarget,
    pub func: Func,
}

/// `Mess(<emitter>,<target>,*,<function>[,args...])`
pub fn parse_mess(s: &str) -> Result<MessText, ParseError> {
    let inner = s
        .trim()
        .strip_prefix("Mess(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| ParseError(format!("expected Mess(...), got {s}")))?;
    let fields = split_fields(inner);
    if fields.len() < 4 {
        return err("Mess needs emitter, target, signature placeholder and function");
    }
    let emitter = match fields[0].as_str() {
        "*" | "_" => None,
        e => Some(user_name(e)?),
    };
    if fields[2] != "*" {
        return err("the signature field must be the placeholder *");
    }
    let target = parse_target(&fields[1])?;
    let func = parse_function(&fields[3], &fields[4..])?;
    Ok(MessText { emitter, target, func })
}

fn parse_payload_kind(s: &str) -> Result<PayloadKind, ParseError> {
    Ok(match s {
        "values" => PayloadKind::Values,
        "item" => PayloadKind::Item,
        "text" => PayloadKind::Text,
        "count" => PayloadKind::Count,
        "inbox" => PayloadKind::Inbox,
        _ => return err(format!("unknown reply kind {s}")),
    })
}

fn mask(tokens: &[String], redact: &[usize]) -> String {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| if redact.contains(&i) { "***" } else { t.as_str() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Index after the verb words, and the verb's canonical name.
fn verb_of(tokens: &[String]) -> Result<(&'static str, usize), ParseError> {
    let first = tokens[0].as_str();
    let two = tokens.get(1).map(|s| format!("{first} {s}"));
    if let Some(two) = &two {
        if let Some((v, _)) = VERBS.iter().find(|(v, _)| v == two) {
            return Ok((v, 2));
        }
    }
    if let Some((v, _)) = VERBS.iter().find(|(v, _)| *v == first) {
        return Ok((v, 1));
    }
    match first {
        "admin" | "group" => err(format!("{first}: unknown subcommand {}", tokens.get(1).map_or("", |s| s.as_str()))),
        _ => err(format!("unknown verb {first:?}")),
    }
}

/// Parse one command line. Blank lines and `#` comments yield `None`.
pub fn parse_line(text: &str) -> Result<Option<Entry>, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed.starts_with("# ") || trimmed == "#" || trimmed.starts_with("//") {
        return Ok(None);
    }
    if let Some(rest) = trimmed.strip_prefix("@+") {
        let secs = rest.trim_end_matches('s').parse().map_err(|_| ParseError(format!("bad clock directive {trimmed}")))?;
        return Ok(Some(Entry::Advance(secs)));
    }
    if let Some(name) = trimmed.strip_prefix("@tty ") {
        return Ok(Some(Entry::Tty(name.trim().to_owned())));
    }
    let mut tokens = tokenize(trimmed)?;
    let mut bind = None;
    if tokens.len() >= 3 && tokens[tokens.len() - 2] == "->" {
        let name = tokens.pop().expect("checked length");
        tokens.pop();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
            return err(format!("bad binding name {name}"));
        }
        bind = Some(name);
    }
    let (verb, start) = verb_of(&tokens)?;
    let mut redact = Vec::new();
    let mut a = Args { verb, tokens: &tokens, pos: start };
    let command = match verb {
        "login" => {
            let name = user_name(a.next("user name")?)?;
            let mut secret = None;
            let mut fields = Vec::new();
            for (i, t) in a.rest().iter().enumerate() {
                match key_value(t) {
                    Some((k, v)) => {
                        redact.push(start + 1 + i);
                        fields.push((k.to_owned(), unquote(v)?));
                    }
                    None if secret.is_none() => {
                        redact.push(start + 1 + i);
                        secret = Some(unquote(t)?);
                    }
                    None => return err(format!("login: unexpected argument {t}")),
                }
            }
            Command::Login { name, secret, fields }
        }
        "logout" => Command::Logout,
        "admin login" => {
            let serial = unquote(a.next("serial number")?)?;
            redact.push(a.pos);
            let secret = a.opt().map(unquote).transpose()?;
            Command::AdminLogin { serial, secret }
        }
        "admin adduser" => {
            let name = user_name(a.next("user name")?)?;
            redact.push(a.pos);
            Command::AddUser { name, secret: unquote(a.next("initial secret")?)? }
        }
        "admin transfer" => {
            let from = user_name(a.next("departing user")?)?;
            Command::Transfer { from, to: user_name(a.next("new owner")?)? }
        }
        "admin backup" => Command::Backup { path: a.opt().map(|p| unquote(p).map(PathBuf::from)).transpose()? },
        "admin restore" => Command::Restore { path: a.opt().map(|p| unquote(p).map(PathBuf::from)).transpose()? },
        "newtype" => message(MsgTarget::Me, newtype(&mut a)?),
        "inst" => {
            let ty = parse_subject(a.next("type")?)?;
            message(MsgTarget::Item(ty), Func::Instantiate { values: inst_values(a.rest())? })
        }
        "compose" => {
            let whole = parse_subject(a.next("whole")?)?;
            message(MsgTarget::Item(whole), Func::Compose { part: parse_subject(a.next("part")?)? })
        }
        "set" => {
            let item = parse_subject(a.next("item")?)?;
            let attr = unquote(a.next("attribute")?)?;
            message(MsgTarget::Item(item), Func::Set { attr, values: lits(a.rest())? })
        }
        "get" => {
            let item = parse_subject(a.next("item")?)?;
            message(MsgTarget::Item(item), ready(Function::Get { attr: unquote(a.next("attribute")?)? }))
        }
        "info" => message(MsgTarget::Item(parse_subject(a.next("item or type")?)?), ready(Function::Describe)),
        "call" => {
            let item = parse_subject(a.next("item")?)?;
            let name = unquote(a.next("function")?)?;
            message(MsgTarget::Item(item), Func::Invoke { name, args: lits(a.rest())? })
        }
        "addattr" => {
            let ty = parse_subject(a.next("type")?)?;
            message(MsgTarget::Item(ty), ready(Function::AddAttribute { schema: parse_attr_spec(a.next("attribute spec")?)? }))
        }
        "donate" => {
            let item = parse_subject(a.next("item")?)?;
            message(MsgTarget::Item(item), ready(Function::Donate { to: user_name(a.next("recipient")?)? }))
        }
        "dup" => {
            let item = parse_subject(a.next("item")?)?;
            let to = user_name(a.next("recipient")?)?;
            let new_name = a.opt().map(unquote).transpose()?;
            message(MsgTarget::Item(item), ready(Function::Duplicate { to, new_name }))
        }
        "grant" | "revoke" => {
            let item = parse_subject(a.next("item")?)?;
            message(MsgTarget::Item(item), ready(grant_fn(&mut a, verb == "grant")?))
        }
        "attr-vis" => {
            let item = parse_subject(a.next("item")?)?;
            let attr = unquote(a.next("attribute")?)?;
            let visibility = parse_visibility(a.next("visibility")?)?;
            message(MsgTarget::Item(item), ready(Function::SetVisibility { attr, visibility }))
        }
        "group add" => message(MsgTarget::User(user_name(a.next("member")?)?), ready(Function::Inscription)),
        "group rm" => message(MsgTarget::Me, ready(Function::RemoveMember { member: user_name(a.next("member")?)? })),
        "group opt-out" => {
            message(MsgTarget::Me, ready(Function::SetOptOut { opt_out: parse_on_off(a.next("on|off")?)? }))
        }
        "profile" => message(MsgTarget::Me, ready(Function::Configure { change: profile_change(&mut a, &mut redact)? })),
        "type" => message(MsgTarget::Me, ready(Function::Lookup { type_name: unquote(a.next("type name")?)? })),
        "inbox" => message(MsgTarget::Me, ready(Function::Inbox)),
        "each" => {
            let ty = unquote(a.next("type")?)?;
            let name = a.next("function")?;
            let func = parse_function(name, a.rest())?;
            message(MsgTarget::All(ty), func)
        }
        "send" => {
            // The message text may contain spaces inside quotes only, so it
            // is re-joined up to the token that closes it.
            let rest = a.rest();
            let close = rest.iter().position(|t| t.ends_with(')')).ok_or_else(|| ParseError("send: expected Mess(...)".into()))?;
            let mess = parse_mess(&rest[..=close].join(" "))?;
            let mut cc = Vec::new();
            let mut expect = None;
            for t in &rest[close + 1..] {
                match key_value(t) {
                    Some(("cc", v)) => cc.push(parse_target(v).or_else(|_| user_name(v).map(MsgTarget::User))?),
                    Some(("expect", v)) => expect = Some(parse_payload_kind(v)?),
                    _ => return err(format!("send: unexpected argument {t}")),
                }
            }
            if cc.iter().any(|c| matches!(c, MsgTarget::All(_) | MsgTarget::Me)) {
                return err("send: copies go to users or items");
            }
            Command::Send { emitter: mess.emitter, target: mess.target, func: mess.func, cc, expect }
        }
        "answer" => {
            let answers = a.rest().iter().map(|t| unquote(t)).collect::<Result<Vec<_>, _>>()?;
            redact.extend(start..tokens.len());
            Command::Answer(answers)
        }
        _ => unreachable!("every verb in the table is handled"),
    };
    a.done()?;
    let mut echo = mask(&tokens, &redact);
    if let Some(name) = &bind {
        echo.push_str(&format!(" -> {name}"));
    }
    Ok(Some(Entry::Command(Box::new(Line { verb, command, bind, echo }))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(s: &str) -> Line {
        match parse_line(s).unwrap() {
            Some(Entry::Command(l)) => *l,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_operation_has_exactly_one_verb() {
        for op in Operation::ALL {
            assert_eq!(VERBS.iter().filter(|(_, o)| *o == op).count(), 1, "{op:?}");
        }
        let mut names: Vec<&str> = VERBS.iter().map(|(v, _)| *v).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), VERBS.len());
    }

    #[test]
    fn tokens_respect_quotes() {
        assert_eq!(tokenize(r#"set $d titre "a b \" c""#).unwrap(), vec!["set", "$d", "titre", r#""a b \" c""#]);
        assert_eq!(unquote(r#""a b \" c""#).unwrap(), "a b \" c");
        assert!(tokenize("get \"open").is_err());
    }

    #[test]
    fn literals() {
        assert_eq!(parse_lit("42").unwrap(), Lit::Int(42));
        assert_eq!(parse_lit("-3").unwrap(), Lit::Int(-3));
        assert_eq!(parse_lit("7c").unwrap(), Lit::Counter(7));
        assert_eq!(parse_lit("true").unwrap(), Lit::Bool(true));
        assert_eq!(parse_lit("$doc").unwrap(), Lit::Ref(Ref::Bound("doc".into())));
        assert!(matches!(parse_lit("#0000002a").unwrap(), Lit::Ref(Ref::Handle(_))));
        assert_eq!(parse_lit("\"x\\u{e9}\"").unwrap(), Lit::Text("x\u{e9}".into()));
        assert_eq!(parse_lit("mot").unwrap(), Lit::Text("mot".into()));
    }

    #[test]
    fn attribute_specs() {
        let s = parse_attr_spec("titre:text:1..3:group:cipher").unwrap();
        assert_eq!((s.cardinality.min(), s.cardinality.max()), (1, 3));
        assert_eq!(s.visibility, Visibility::Group);
        assert!(s.ciphered);
        let s = parse_attr_spec("n:int:range=0..9").unwrap();
        assert_eq!(s.integrity, Some(IntegrityPredicate::Range { min: 0, max: 9 }));
        let s = parse_attr_spec("code:text:all:pattern=[A-Z]:[0-9]").unwrap();
        assert_eq!(s.integrity, Some(IntegrityPredicate::Pattern("[A-Z]:[0-9]".into())));
        assert!(parse_attr_spec("x").is_err());
        assert!(parse_attr_spec("x:float").is_err());
    }

    #[test]
    fn binding_suffix_and_verbs() {
        let l = line("inst document titre=\"rapport\" -> d1");
        assert_eq!(l.verb, "inst");
        assert_eq!(l.bind.as_deref(), Some("d1"));
        assert!(matches!(l.command, Command::Message { target: MsgTarget::Item(Subject::Type(ref t)), .. } if t == "document"));
        assert_eq!(line("group add MICHEL").verb, "group add");
        assert_eq!(line("admin transfer PAUL MICHEL").verb, "admin transfer");
        assert!(parse_line("frobnicate x").is_err());
        assert!(parse_line("group join X").is_err());
    }

    #[test]
    fn secrets_are_masked_in_echo() {
        assert_eq!(line("login PAUL s3cret site=B12").echo, "login PAUL *** ***");
        assert_eq!(line("profile secret nouveau").echo, "profile secret ***");
        assert_eq!(line("admin login SN-1 clef").echo, "admin login SN-1 ***");
        assert_eq!(line("admin adduser PAUL init").echo, "admin adduser PAUL ***");
        assert_eq!(line("answer Lyon").echo, "answer ***");
        assert_eq!(line("profile question ville Lyon").echo, "profile question ville ***");
    }

    #[test]
    fn textual_messages() {
        let m = parse_mess(r#"Mess("PAUL","MICHEL",*,inscription)"#).unwrap();
        assert_eq!(m.emitter.as_deref(), Some("PAUL"));
        assert_eq!(m.target, MsgTarget::User("MICHEL".into()));
        assert_eq!(m.func, Func::Ready(Function::Inscription));
        let m = parse_mess(r#"Mess(*,all:document,*,get,titre)"#).unwrap();
        assert_eq!(m.target, MsgTarget::All("document".into()));
        let m = parse_mess(r#"Mess("PAUL",$d,*,set,titre,"a, b")"#).unwrap();
        assert_eq!(m.func, Func::Set { attr: "titre".into(), values: vec![Lit::Text("a, b".into())] });
        assert!(parse_mess(r#"Mess("PAUL",$d,0a1b2c3d,get,titre)"#).is_err());
        let l = line(r#"send Mess("PAUL",$d,*,get,titre) cc=MICHEL expect=values"#);
        assert!(matches!(l.command, Command::Send { ref cc, expect: Some(PayloadKind::Values), .. } if cc.len() == 1));
    }

    #[test]
    fn directives_and_comments() {
        assert_eq!(parse_line("@+70s").unwrap(), Some(Entry::Advance(70)));
        assert_eq!(parse_line("@tty michel").unwrap(), Some(Entry::Tty("michel".into())));
        assert_eq!(parse_line("# a comment").unwrap(), None);
        assert_eq!(parse_line("   ").unwrap(), None);
    }
}
