//! Flat `key=value` configuration files.
//!
//! ```text
//! file    = { line "\n" }
//! line    = ws [ comment | entry ] ws
//! comment = "#" { any }
//! entry   = key ws "=" ws value
//! key     = lower { lower | digit | "-" | "_" }   long flag name, "_" read as "-"
//! value   = { any }                               trimmed; switches take true or false
//! ```
//!
//! Entries become flags placed before the ones typed on the command line, so
//! the typed ones win. `--dump-config` prints the effective configuration in
//! the same format, which reads back to the same run.

use std::ffi::OsString;

use clap::{ArgAction, ArgMatches, Command, CommandFactory};

use crate::output::Failure;
use crate::Cli;

/// Globals that never appear in a config file.
const GLOBALS: [&str; 3] = ["config", "out", "dump-config"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got {line:?}", i + 1))?;
        let key = k.trim().replace('_', "-");
        let valid = key.chars().next().is_some_and(|c| c.is_ascii_lowercase())
            && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-');
        if !valid {
            return Err(format!("line {}: bad key {:?}", i + 1, k.trim()));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(format!("line {}: key {key:?} already set on line {}", i + 1, prev.line));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn built() -> Command {
    let mut cmd = Cli::command();
    cmd.build();
    cmd
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Splices the entries of `--config FILE` into `argv` right after the subcommand path.
pub fn inject(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let shown = path.to_string_lossy().into_owned();
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(format!("{shown}: {e}")))?;
    let entries = parse(&text).map_err(|e| Failure::Config(format!("{shown}: {e}")))?;

    let root = built();
    let mut cur = &root;
    let mut names = Vec::new();
    let mut at = None;
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" || s == "--out" {
            i += 2;
            continue;
        }
        if s.starts_with("--config=") || s.starts_with("--out=") || s == "--dump-config" {
            i += 1;
            continue;
        }
        if s.starts_with('-') {
            break;
        }
        match cur.find_subcommand(s.as_ref()) {
            Some(sub) => {
                cur = sub;
                names.push(s.into_owned());
                at = Some(i + 1);
                i += 1;
            }
            None => break,
        }
    }
    let Some(at) = at.filter(|_| !cur.has_subcommands()) else {
        return Err(Failure::Usage("--config needs a complete subcommand before the first flag".into()));
    };

    let mut extra: Vec<OsString> = Vec::new();
    for e in entries {
        let arg = cur
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()) && !GLOBALS.contains(&e.key.as_str()))
            .ok_or_else(|| {
                Failure::Config(format!("{shown}: line {}: unknown key {:?} for `{}`", e.line, e.key, names.join(" ")))
            })?;
        if arg.get_action().takes_values() {
            extra.push(format!("--{}", e.key).into());
            extra.push(e.value.into());
        } else {
            match e.value.as_str() {
                "true" => extra.push(format!("--{}", e.key).into()),
                "false" => {}
                v => {
                    return Err(Failure::Config(format!(
                        "{shown}: line {}: switch {:?} takes true or false, got {v:?}",
                        e.line, e.key
                    )))
                }
            }
        }
    }
    let mut out = argv;
    out.splice(at..at, extra);
    Ok(out)
}

/// Subcommand path and every flag value in effect, defaults included.
pub fn effective(matches: &ArgMatches) -> (String, Vec<(String, String)>) {
    let root = built();
    let mut cur = &root;
    let mut m = matches;
    let mut path = Vec::new();
    while let Some((name, sub)) = m.subcommand() {
        cur = cur.find_subcommand(name).expect("parsed subcommand exists");
        path.push(name.to_string());
        m = sub;
    }
    let mut entries = Vec::new();
    for a in cur.get_arguments() {
        let Some(long) = a.get_long() else { continue };
        if GLOBALS.contains(&long) || matches!(a.get_action(), ArgAction::Help | ArgAction::Version) {
            continue;
        }
        let Ok(Some(raw)) = m.try_get_raw(a.get_id().as_str()) else { continue };
        let v: Vec<String> = raw.map(|x| x.to_string_lossy().into_owned()).collect();
        entries.push((long.to_string(), v.join(",")));
    }
    (path.join(" "), entries)
}

pub fn render(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let e = parse("# comment\n\n rho = 0.01 \nno_reuse=true\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].key.as_str(), e[0].value.as_str(), e[0].line), ("rho", "0.01", 3));
        assert_eq!(e[1].key, "no-reuse");
        assert!(parse("rho 0.01").unwrap_err().contains("line 1"));
        assert!(parse("Rho=1").is_err());
        assert!(parse("a=1\na=2").unwrap_err().contains("already set"));
    }
}
