//! Kernel configuration files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use protea_core::KernelConfig;

/// Read a TOML configuration, or the defaults when no path is given.
pub fn load(path: Option<&Path>) -> Result<KernelConfig> {
    let Some(path) = path else {
        return Ok(KernelConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse(text: &str) -> Result<KernelConfig> {
    Ok(toml::from_str(text)?)
}
