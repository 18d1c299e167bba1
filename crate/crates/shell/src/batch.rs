//! Scripted sessions against a manual clock.

use std::collections::BTreeMap;

use protea_core::{Kernel, KernelConfig, ManualClock, Timestamp};
use std::sync::Arc;

use crate::parse::{parse_line, Entry};
use crate::render;
use crate::shell::{Flow, Shell};

pub const DEFAULT_TTY: &str = "tty0";

#[derive(Debug)]
pub struct Outcome {
    pub transcript: Vec<String>,
    /// True when the inquisitor closed a session.
    pub terminated: bool,
    pub kernel: Kernel,
}

/// A script line that failed to parse, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ScriptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ScriptError {}

pub fn parse_script(script: &str) -> Result<Vec<Entry>, ScriptError> {
    let mut entries = Vec::new();
    for (i, text) in script.lines().enumerate() {
        match parse_line(text) {
            Ok(Some(e)) => entries.push(e),
            Ok(None) => {}
            Err(e) => return Err(ScriptError { line: i + 1, message: e.0 }),
        }
    }
    Ok(entries)
}

/// Replay a whole script on a fresh kernel.
pub fn run(config: KernelConfig, script: &str) -> Result<Outcome, ScriptError> {
    let entries = parse_script(script)?;
    let clock = ManualClock::new(Timestamp::from_secs(1));
    let mut kernel = Kernel::with_clock(config, Arc::new(clock.clone()));
    let mut shells: BTreeMap<String, Shell> = BTreeMap::new();
    let mut current = DEFAULT_TTY.to_owned();
    shells.insert(current.clone(), Shell::new(&mut kernel));
    let mut transcript = Vec::new();
    let mut terminated = false;
    for entry in entries {
        match entry {
            Entry::Advance(secs) => clock.advance_secs(secs),
            Entry::Tty(name) => {
                if !shells.contains_key(&name) {
                    let shell = Shell::new(&mut kernel);
                    shells.insert(name.clone(), shell);
                }
                transcript.push(render::notice(&format!("on {name}")));
                current = name;
            }
            Entry::Command(line) => {
                transcript.push(render::echo(&line.echo));
                let shell = shells.get_mut(&current).expect("current terminal exists");
                let (out, flow) = shell.execute(&mut kernel, &line);
                transcript.extend(out);
                terminated |= flow == Flow::Terminated;
            }
        }
    }
    Ok(Outcome { transcript, terminated, kernel })
}
