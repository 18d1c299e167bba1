//! Interactive loop over any line source.

use std::io::{self, BufRead, Write};

use protea_core::Kernel;

use crate::parse::{parse_line, Command, Entry};
use crate::render;
use crate::shell::{Flow, Shell};

/// How an interactive session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    LoggedOut,
    EndOfInput,
    Terminated,
}

impl Exit {
    pub fn code(self) -> i32 {
        match self {
            Exit::LoggedOut | Exit::EndOfInput => 0,
            Exit::Terminated => 1,
        }
    }
}

fn prompt(shell: &Shell, out: &mut impl Write) -> io::Result<()> {
    match shell.user() {
        Some(u) => write!(out, "{u}> ")?,
        None => write!(out, "protea> ")?,
    }
    out.flush()
}

fn read(input: &mut impl BufRead) -> io::Result<Option<String>> {
    let mut buf = String::new();
    if input.read_line(&mut buf)? == 0 {
        return Ok(None);
    }
    Ok(Some(buf.trim_end_matches(['\r', '\n']).to_owned()))
}

pub fn run(kernel: &mut Kernel, input: &mut impl BufRead, out: &mut impl Write) -> io::Result<Exit> {
    let mut shell = Shell::new(kernel);
    loop {
        prompt(&shell, out)?;
        let Some(text) = read(input)? else {
            return Ok(Exit::EndOfInput);
        };
        let mut line = match parse_line(&text) {
            Ok(Some(Entry::Command(line))) => line,
            Ok(Some(_)) => {
                writeln!(out, "{}", render::notice("clock and terminal directives only work in batch scripts"))?;
                continue;
            }
            Ok(None) => continue,
            Err(e) => {
                writeln!(out, "{}", render::notice(&e.0))?;
                continue;
            }
        };
        if let Command::Login { secret: secret @ None, .. } | Command::AdminLogin { secret: secret @ None, .. } =
            &mut line.command
        {
            write!(out, "secret: ")?;
            out.flush()?;
            *secret = Some(read(input)?.unwrap_or_default());
        }
        let (lines, flow) = shell.execute(kernel, &line);
        for l in lines {
            writeln!(out, "{l}")?;
        }
        match flow {
            Flow::Continue => {}
            Flow::LoggedOut => return Ok(Exit::LoggedOut),
            Flow::Terminated => return Ok(Exit::Terminated),
        }
    }
}
