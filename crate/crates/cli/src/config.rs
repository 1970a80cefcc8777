//! `--config` files: `key=value` lines merged into the command line, with
//! explicit flags taking precedence.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::UsageError;

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!(UsageError(format!("config line {}: expected `key=value`", i + 1)));
        };
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            bail!(UsageError(format!("config line {}: empty key", i + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Position of the first flag, i.e. the end of the subcommand path.
fn flags_start(args: &[OsString]) -> usize {
    args.iter()
        .skip(1)
        .position(|a| a.to_string_lossy().starts_with('-'))
        .map_or(args.len(), |p| p + 1)
}

fn config_path(args: &[OsString]) -> Result<Option<String>> {
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--config" {
            return match it.next() {
                Some(p) => Ok(Some(p)),
                None => bail!(UsageError("--config needs a file".into())),
            };
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

fn given_on_command_line(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&prefix)
    })
}

/// Inserts config entries after the subcommand path, skipping keys that the
/// command line already sets. `true`/`false` values toggle switches.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let entries = parse_config(&text)?;
    let split = flags_start(&args);
    let mut out: Vec<OsString> = args[..split].to_vec();
    for (k, v) in entries {
        if k == "config" || given_on_command_line(&args, &k) {
            continue;
        }
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    out.extend_from_slice(&args[split..]);
    Ok(out)
}
