//! Flat `key=value` config files.
//!
//! Each key names a long flag without its dashes. Values from the file are
//! appended to argv only when the flag is absent, so explicit flags win.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Parsed `(key, value)` pairs in file order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

fn flag_present(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("{flag}=");
    argv.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&with_eq)
    })
}

/// Append config entries to `argv`.
///
/// `accepted` are the flags of the chosen subcommand; `known` are the flags of
/// any subcommand. Keys known elsewhere are skipped so one file can serve
/// several subcommands; keys nobody knows are an error.
pub fn merge(
    argv: &mut Vec<OsString>,
    entries: &[(String, String)],
    accepted: &BTreeSet<String>,
    known: &BTreeSet<String>,
) -> Result<(), CliError> {
    let mut seen = BTreeSet::new();
    for (k, v) in entries {
        if k == "config" {
            return Err(CliError::config("config files cannot include other config files"));
        }
        if !seen.insert(k.as_str()) {
            return Err(CliError::config(format!("duplicate key {k:?}")));
        }
        if !known.contains(k) {
            return Err(CliError::config(format!("unknown key {k:?}")));
        }
        if !accepted.contains(k) || flag_present(argv, k) {
            continue;
        }
        argv.push(format!("--{k}").into());
        argv.push(v.into());
    }
    Ok(())
}
