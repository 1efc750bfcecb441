//! `--config FILE` support: `key=value` lines become `--key value` flags.
//!
//! File flags are placed before the command-line ones of the same level, so
//! with last-occurrence-wins parsing the command line takes precedence.
//! Global keys (`seed`, `out`) go right after the program name, the rest right
//! after the subcommand. A `stage` key selects the subcommand when the command
//! line names none.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::{CliError, Stage};

const GLOBAL_KEYS: [&str; 2] = ["seed", "out"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub stage: Option<String>,
    pub global: Vec<OsString>,
    pub stage_args: Vec<OsString>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    let mut cfg = ConfigFile::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected key=value, got {line:?}", n + 1)));
        };
        let (key, value) = (key.trim().trim_start_matches("--"), value.trim());
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
            return Err(CliError::Config(format!("line {}: bad key {key:?}", n + 1)));
        }
        let key = key.replace('_', "-");
        if key == "config" {
            return Err(CliError::Config(format!("line {}: config files do not nest", n + 1)));
        }
        if key == "stage" {
            cfg.stage = Some(value.to_string());
            continue;
        }
        let dest = if GLOBAL_KEYS.contains(&key.as_str()) {
            &mut cfg.global
        } else {
            &mut cfg.stage_args
        };
        dest.push(format!("--{key}").into());
        if value != "true" {
            dest.push(value.into());
        }
    }
    Ok(cfg)
}

/// Removes `--config FILE` from `args` and splices the file's flags in.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path: Option<PathBuf> = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let v = it
                .next()
                .ok_or_else(|| CliError::Config("--config needs a file".into()))?;
            path = Some(v.into());
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(v.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.clone()),
        _ => CliError::Io { path: path.clone(), source: e },
    })?;
    let cfg = parse_config(&text)?;

    let mut out: Vec<OsString> = rest.drain(..1.min(rest.len())).collect();
    out.extend(cfg.global);
    let pos = rest.iter().position(|a| Stage::NAMES.contains(&a.to_string_lossy().as_ref()));
    match (pos, cfg.stage) {
        (Some(i), _) => {
            out.extend(rest.drain(..=i));
            out.extend(cfg.stage_args);
            out.extend(rest);
        }
        (None, Some(stage)) => {
            out.push(stage.into());
            out.extend(cfg.stage_args);
            out.extend(rest);
        }
        (None, None) => {
            out.extend(rest);
            out.extend(cfg.stage_args);
        }
    }
    Ok(out)
}
