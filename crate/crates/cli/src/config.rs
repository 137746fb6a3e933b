//! `--config` files: one `key=value` per line, `#` comments allowed. Each
//! entry becomes `--key value` right after the subcommand. Keys that also
//! appear on the command line are dropped so explicit flags win.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::args::SUBCOMMANDS;

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Syntax { path: PathBuf, line: usize },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Syntax { path, line } => {
                write!(f, "{}:{line}: expected `key=value`", path.display())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().map(|a| a.to_string_lossy());
    while let Some(arg) = it.next() {
        if arg == "--config" {
            return it.next().map(|p| PathBuf::from(p.into_owned()));
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

pub fn parse_config(text: &str, path: &std::path::Path) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: n + 1,
        })?;
        entries.push((key.trim().trim_start_matches("--").to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError::Read(path.clone(), e))?;
    let entries = parse_config(&text, &path)?;

    let given: HashSet<String> = argv
        .iter()
        .filter_map(|a| a.to_str().and_then(flag_name).map(str::to_string))
        .collect();
    let Some(sub) = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)))
    else {
        return Ok(argv);
    };

    let mut out: Vec<OsString> = argv[..=sub].to_vec();
    for (key, value) in entries.into_iter().filter(|(k, _)| !given.contains(k)) {
        out.push(format!("--{key}").into());
        out.push(value.into());
    }
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}
