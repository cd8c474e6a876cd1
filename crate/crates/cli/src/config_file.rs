//! Flat TOML configuration files. Every `key = value` pair becomes the
//! flag `--key value` placed ahead of the flags typed on the command line,
//! so the latter win when both are given.

use std::ffi::OsString;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: String, message: String },
}

/// Locates `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn scalar(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Converts the file's pairs into flag arguments, in file order.
pub fn config_args(path: &Path) -> Result<Vec<OsString>, ConfigFileError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
        path: display.clone(),
        source,
    })?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigFileError::Parse {
        path: display.clone(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (key, value) in &table {
        let rendered = match value {
            toml::Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
                parts.map(|p| p.join(","))
            }
            v => scalar(v),
        };
        let Some(rendered) = rendered else {
            return Err(ConfigFileError::Parse {
                path: display,
                message: format!("key {key:?} must be a scalar or a flat array"),
            });
        };
        out.push(format!("--{}", key.replace('_', "-")).into());
        out.push(rendered.into());
    }
    Ok(out)
}

/// Splices `extra` into `args` right after the subcommand name (the first
/// argument matching one of `subcommands`).
pub fn splice_after_subcommand(args: Vec<OsString>, extra: Vec<OsString>, subcommands: &[&str]) -> Vec<OsString> {
    let pos = args
        .iter()
        .skip(1)
        .position(|a| subcommands.iter().any(|s| a == s))
        .map(|p| p + 2);
    match pos {
        Some(p) => {
            let mut out = args[..p].to_vec();
            out.extend(extra);
            out.extend_from_slice(&args[p..]);
            out
        }
        None => args,
    }
}
