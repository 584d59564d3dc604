//! `key=value` run manifests merged under the command line.
//!
//! Keys are long flag names without the dashes. `command=NAME` supplies the
//! subcommand when the command line has none; `true` and `false` switch
//! boolean flags. Flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("--config needs a path")]
    MissingPath,
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

pub const SUBCOMMANDS: [&str; 4] = ["pisier", "rate", "verify", "simulate"];

pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        }
        if out.iter().any(|(key, _)| key == k) {
            return Err(ConfigError::Duplicate { line: i + 1, key: k.to_string() });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn flag_given(args: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| a.to_str().is_some_and(|s| s == long || s.starts_with(&eq)))
}

/// Strips `--config PATH` from `args` and splices the file's entries in
/// after the subcommand.
pub fn merge(mut args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_str().unwrap_or("");
        if s == "--config" {
            if i + 1 >= args.len() {
                return Err(ConfigError::MissingPath);
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|source| ConfigError::Read { path: path.to_string_lossy().into_owned(), source })?;
    let entries = parse(&text)?;

    let find_sub = |args: &[OsString]| args.iter().position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)));
    if find_sub(&args).is_none() {
        if let Some((_, cmd)) = entries.iter().find(|(k, _)| k == "command") {
            args.push(OsString::from(cmd));
        }
    }
    let Some(at) = find_sub(&args) else { return Ok(args) };
    let mut extra = Vec::new();
    for (k, v) in entries.iter().filter(|(k, _)| k != "command") {
        if flag_given(&args, k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    args.splice(at + 1..at + 1, extra);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_blanks() {
        let e = parse("# run\neps = 0.9\n\nb=1 # bound\n").unwrap();
        assert_eq!(e, vec![("eps".into(), "0.9".into()), ("b".into(), "1".into())]);
        assert!(matches!(parse("eps"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse("a=1\na=2"), Err(ConfigError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "command=rate\neps=0.5\nb=2\nhilbert-only=false\n").unwrap();
        let args = os(&["cesaro", "rate", "--config", p.to_str().unwrap(), "--eps", "0.9"]);
        assert_eq!(merge(args).unwrap(), os(&["cesaro", "rate", "--b=2", "--eps", "0.9"]));
        let bare = os(&["cesaro", "--config", p.to_str().unwrap()]);
        assert_eq!(merge(bare).unwrap(), os(&["cesaro", "rate", "--eps=0.5", "--b=2"]));
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["cesaro", "pisier", "--delta", "0.25"]);
        assert_eq!(merge(args.clone()).unwrap(), args);
        assert!(matches!(merge(os(&["cesaro", "--config"])), Err(ConfigError::MissingPath)));
    }
}
