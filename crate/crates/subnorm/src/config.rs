//! `key = value` config files, turned into command-line flags.
//!
//! ```text
//! # comment
//! trials = 20
//! dims = 20,30,40
//! strict = true
//! ```
//!
//! Each key becomes `--key` with underscores read as dashes. `true` gives a
//! bare flag and `false` drops the key. The flags are placed ahead of the
//! ones typed on the command line, so the latter win.

use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Syntax { path: PathBuf, line: usize, message: String },
}

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<String>, ConfigError> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: &str| ConfigError::Syntax { path: path.to_path_buf(), line: i + 1, message: message.into() };
        let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            return Err(syntax("invalid key"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            "true" => args.push(flag),
            "false" => {}
            "" => return Err(syntax("missing value")),
            v => {
                args.push(flag);
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}

pub fn read_config(path: &Path) -> Result<Vec<String>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text, path)
}
