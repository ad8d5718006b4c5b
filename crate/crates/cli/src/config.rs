//! `key=value` files that supply defaults for command flags.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, CommandFactory};

use crate::args::Cli;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", k + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", k + 1));
        }
        out.push(Entry { line: k + 1, key, value: value.trim().to_string() });
    }
    Ok(out)
}

const GLOBAL_WITH_VALUE: [&str; 5] = ["--threads", "--config", "--format", "--output", "-o"];

/// Inserts the config entries as flags right after the subcommand so that
/// flags typed later on the command line override them.
pub fn apply(argv: &[OsString], path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse(&text).map_err(|m| CliError::Usage(format!("config {}: {m}", path.display())))?;

    let root = Cli::command();
    let mut position = None;
    let mut skip = false;
    for (i, tok) in argv.iter().enumerate().skip(1) {
        let s = tok.to_string_lossy();
        if skip {
            skip = false;
            continue;
        }
        if GLOBAL_WITH_VALUE.contains(&s.as_ref()) {
            skip = true;
            continue;
        }
        if root.find_subcommand(s.as_ref()).is_some() {
            position = Some(i);
            break;
        }
    }
    let Some(at) = position else {
        return Ok(argv.to_vec());
    };
    let sub = root
        .find_subcommand(argv[at].to_string_lossy().as_ref())
        .expect("found above");

    let mut flags = Vec::new();
    for e in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()) && !a.is_global_set())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "config {} line {}: `{}` is not an option of `{}`",
                    path.display(),
                    e.line,
                    e.key,
                    sub.get_name()
                ))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match e.value.as_str() {
                "true" => flags.push(OsString::from(format!("--{}", e.key))),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config {} line {}: `{}` expects true or false, got `{other}`",
                        path.display(),
                        e.line,
                        e.key
                    )))
                }
            }
        } else {
            flags.push(OsString::from(format!("--{}={}", e.key, e.value)));
        }
    }
    let mut out = argv[..=at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let e = parse("# run\nq1 = 0.75\n\nalpha_interaction=0.1 # level\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].key, "alpha-interaction");
        assert_eq!(e[1].value, "0.1");
        assert_eq!(e[1].line, 4);
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse("q1 0.9").is_err());
    }
}
