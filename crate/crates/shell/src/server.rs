//! Many terminals sharing one kernel over a unix socket.
//!
//! Each connection gets its own shell. The client sends command lines and
//! every answer is closed by a line holding a single `.`.

use std::io::{self, BufRead, BufReader, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;

use protea_core::Kernel;

use crate::parse::{parse_line, Entry};
use crate::render;
use crate::shell::{Flow, Shell};

pub const END: &str = ".";

fn serve_one(kernel: Arc<Mutex<Kernel>>, stream: UnixStream) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut shell = {
        let mut k = kernel.lock().expect("kernel lock");
        Shell::new(&mut k)
    };
    for text in reader.lines() {
        let text = text?;
        let (lines, flow) = match parse_line(&text) {
            Ok(Some(Entry::Command(line))) => {
                let mut k = kernel.lock().expect("kernel lock");
                shell.execute(&mut k, &line)
            }
            Ok(Some(_)) => (vec![render::notice("clock and terminal directives only work in batch scripts")], Flow::Continue),
            Ok(None) => (Vec::new(), Flow::Continue),
            Err(e) => (vec![render::notice(&e.0)], Flow::Continue),
        };
        for l in lines {
            writeln!(writer, "{l}")?;
        }
        writeln!(writer, "{END}")?;
        if flow == Flow::Terminated {
            break;
        }
    }
    Ok(())
}

pub fn serve(kernel: Kernel, path: &Path) -> io::Result<()> {
    let listener = UnixListener::bind(path)?;
    let kernel = Arc::new(Mutex::new(kernel));
    for stream in listener.incoming() {
        let stream = stream?;
        let kernel = Arc::clone(&kernel);
        thread::spawn(move || {
            if let Err(e) = serve_one(kernel, stream) {
                eprintln!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

/// Forward lines from `input` and print answers until the server hangs up.
pub fn connect(path: &Path, input: &mut impl BufRead, out: &mut impl Write) -> io::Result<()> {
    let stream = UnixStream::connect(path)?;
    let mut writer = stream.try_clone()?;
    let mut answers = BufReader::new(stream).lines();
    for text in input.lines() {
        writeln!(writer, "{}", text?)?;
        loop {
            match answers.next() {
                Some(l) => {
                    let l = l?;
                    if l == END {
                        break;
                    }
                    writeln!(out, "{l}")?;
                }
                None => return Ok(()),
            }
        }
        out.flush()?;
    }
    Ok(())
}
