//! Report sink and exit-code mapping.

use std::fmt::{Debug, Display};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use locus_core::report::SCHEMA;
use serde_json::{json, Map, Value};

/// Errors that stop a run before the report is complete. All exit with 2.
#[derive(Debug)]
pub enum Failure {
    Clap(clap::Error),
    Usage(String),
    Config(String),
    Input(String),
    Budget(String),
}

impl Failure {
    pub fn exit(self) -> ExitCode {
        let (kind, msg) = match self {
            Failure::Clap(e) => {
                let _ = e.print();
                return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
            }
            Failure::Usage(m) => ("usage error", m),
            Failure::Config(m) => ("config error", m),
            Failure::Input(m) => ("input error", m),
            Failure::Budget(m) => ("budget exceeded", m),
        };
        eprintln!("locus: {kind}: {msg}");
        ExitCode::from(2)
    }
}

/// Maps a library error. Enumeration-budget overruns get their own diagnostic;
/// the wrapping error types keep the inner variant visible in `Debug`.
pub fn lib_err<E: Debug + Display>(e: E) -> Failure {
    let dbg = format!("{e:?}");
    if dbg.contains("Budget { needed") || dbg.contains("Budget(") {
        Failure::Budget(e.to_string())
    } else {
        Failure::Input(e.to_string())
    }
}

pub struct Report {
    command: String,
    lines: Vec<Value>,
    violations: Vec<String>,
    raw: Option<String>,
    pub out: Option<PathBuf>,
}

impl Report {
    /// Starts a report whose first line records the effective configuration.
    pub fn new(command: &str, config: &[(String, String)]) -> Self {
        let cfg: Map<String, Value> = config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let mut r = Report {
            command: command.to_string(),
            lines: Vec::new(),
            violations: Vec::new(),
            raw: None,
            out: None,
        };
        r.push(json!({ "kind": "run", "config": cfg }));
        r
    }

    /// Plain text output, bypassing JSON framing.
    pub fn text(s: String) -> Self {
        Report {
            command: String::new(),
            lines: Vec::new(),
            violations: Vec::new(),
            raw: Some(s),
            out: None,
        }
    }

    pub fn push(&mut self, mut v: Value) {
        if let Value::Object(m) = &mut v {
            m.insert("schema".into(), json!(SCHEMA));
            m.insert("command".into(), json!(self.command));
        }
        self.lines.push(v);
    }

    /// Records an invariant; a false one makes the run exit with 1.
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) -> bool {
        if !ok {
            self.violations.push(what());
        }
        ok
    }

    pub fn finish(mut self) -> ExitCode {
        let body = match self.raw.take() {
            Some(s) => s,
            None => {
                let ok = self.violations.is_empty();
                let violations = std::mem::take(&mut self.violations);
                self.push(json!({ "kind": "summary", "ok": ok, "violations": violations }));
                self.violations = violations;
                let mut s = String::new();
                for l in &self.lines {
                    s.push_str(&serde_json::to_string(l).expect("json values serialize"));
                    s.push('\n');
                }
                s
            }
        };
        let written = match &self.out {
            Some(p) => std::fs::write(p, body).map_err(|e| format!("{}: {e}", p.display())),
            None => std::io::stdout().lock().write_all(body.as_bytes()).map_err(|e| e.to_string()),
        };
        if let Err(e) = written {
            return Failure::Input(format!("cannot write report: {e}")).exit();
        }
        if self.violations.is_empty() {
            return ExitCode::SUCCESS;
        }
        for v in &self.violations {
            eprintln!("locus: invariant violated: {v}");
        }
        ExitCode::from(1)
    }
}
