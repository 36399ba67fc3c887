//! `key=value` config files, spliced into argv ahead of the user's flags.
//!
//! Keys are long flag names (`_` and `-` are interchangeable). Because every
//! flag overrides earlier occurrences of itself, anything given on the
//! command line wins over the file. Keys the invoked subcommand does not
//! know are ignored, so one file can serve several subcommands.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Command};
use tracing::warn;

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Syntax { line: usize, text: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key=value, found `{text}`"),
        }
    }
}

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: line.to_string(),
        })?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
        if s == "--" {
            break;
        }
    }
    None
}

/// Index just past the subcommand names and the leaf command they select.
fn locate_leaf(root: &Command, argv: &[OsString]) -> (usize, Command) {
    let takes_value: Vec<String> = root
        .get_arguments()
        .filter(|a| a.get_action().takes_values())
        .filter_map(|a| a.get_long().map(|l| format!("--{l}")))
        .collect();
    let mut cmd = root.clone();
    let mut i = 1;
    let mut insert_at = argv.len().min(1);
    while i < argv.len() {
        let s = argv[i].to_string_lossy().into_owned();
        if s.starts_with('-') {
            i += if takes_value.contains(&s) { 2 } else { 1 };
            continue;
        }
        match cmd.find_subcommand(&s).cloned() {
            Some(sub) => {
                cmd = sub;
                insert_at = i + 1;
                if !cmd.has_subcommands() {
                    break;
                }
            }
            None => break,
        }
        i += 1;
    }
    (insert_at, cmd)
}

/// Returns argv with the config file's entries inserted, or argv unchanged
/// when no `--config` is given.
pub fn expand_config(root: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io(path.clone(), e))?;
    let entries = parse_config(&text)?;
    let (insert_at, leaf) = locate_leaf(root, &argv);
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let arg = leaf
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            warn!(key, "config key is not a flag of this command; ignored");
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => {
                if matches!(value.as_str(), "true" | "1" | "yes") {
                    extra.push(format!("--{key}").into());
                }
            }
            _ => {
                extra.push(format!("--{key}").into());
                if arg.get_num_args().is_some_and(|n| n.max_values() > 1) {
                    extra.extend(value.split_whitespace().map(OsString::from));
                } else {
                    extra.push(value.into());
                }
            }
        }
    }
    let mut out = argv;
    out.splice(insert_at..insert_at, extra);
    Ok(out)
}
