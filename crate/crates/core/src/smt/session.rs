//! Persistent solver subprocess speaking SMT-LIB 2 over pipes.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Duration;

use super::sexp::{self, Sexp};
use super::SmtError;

/// Which solver family the session talks to. Only affects the few
/// commands that are not portable (quantifier elimination, timeouts).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Z3,
    Cvc5,
}

impl Dialect {
    pub fn guess(path: &Path) -> Dialect {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if stem.contains("cvc") {
            Dialect::Cvc5
        } else {
            Dialect::Z3
        }
    }
}

pub struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    pub dialect: Dialect,
}

impl Session {
    pub fn spawn(
        path: &Path,
        extra_args: &[String],
        dialect: Dialect,
        timeout: Duration,
    ) -> Result<Session, SmtError> {
        let mut cmd = Command::new(path);
        match dialect {
            Dialect::Z3 => {
                cmd.arg("-in").arg("-smt2");
            }
            Dialect::Cvc5 => {
                cmd.args([
                    "--incremental",
                    "--produce-models",
                    &format!("--tlimit-per={}", timeout.as_millis()),
                ]);
            }
        }
        cmd.args(extra_args);
        cmd.stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let mut child = cmd
            .spawn()
            .map_err(|e| SmtError::SolverUnavailable(format!("{}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut session = Session {
            child,
            stdin,
            stdout,
            dialect,
        };
        session.command("(set-option :print-success false)")?;
        if dialect == Dialect::Z3 {
            session.command(&format!("(set-option :timeout {})", timeout.as_millis()))?;
            session.command("(set-option :model.completion true)")?;
            // Keep apply/get-value output free of let-aliases.
            session.command("(set-option :pp.min-alias-size 1000000)")?;
        }
        session.command("(set-logic ALL)")?;
        session.sync()?;
        Ok(session)
    }

    /// Flushes setup commands and drains any diagnostics they emitted,
    /// so later answers line up with their queries. Option errors are
    /// tolerated (cosmetic options differ between solver versions); a
    /// dead process is not.
    fn sync(&mut self) -> Result<(), SmtError> {
        self.command("(echo \"dpncheck-sync\")")?;
        self.flush()?;
        loop {
            let line = self.read_line()?;
            if line.contains("dpncheck-sync") {
                return Ok(());
            }
        }
    }

    /// Sends a command that produces no output on success. Errors are
    /// picked up at the next synchronization point.
    pub fn command(&mut self, line: &str) -> Result<(), SmtError> {
        writeln!(self.stdin, "{line}").map_err(|e| SmtError::Session(e.to_string()))?;
        Ok(())
    }

    fn flush(&mut self) -> Result<(), SmtError> {
        self.stdin
            .flush()
            .map_err(|e| SmtError::Session(e.to_string()))
    }

    /// Sends a command and reads one whitespace-delimited answer line
    /// (`sat`, `unsat`, `unknown`).
    pub fn query_word(&mut self, line: &str) -> Result<String, SmtError> {
        self.command(line)?;
        self.flush()?;
        let text = self.read_line()?;
        if text.starts_with("(error") {
            return Err(solver_error(&text));
        }
        Ok(text)
    }

    /// Sends a command and reads one complete s-expression answer.
    pub fn query_sexp(&mut self, line: &str) -> Result<Sexp, SmtError> {
        self.command(line)?;
        self.flush()?;
        let text = self.read_balanced()?;
        if text.starts_with("(error") {
            return Err(solver_error(&text));
        }
        sexp::parse(&text).map_err(SmtError::BadResponse)
    }

    fn read_line(&mut self) -> Result<String, SmtError> {
        loop {
            let mut line = String::new();
            let n = self
                .stdout
                .read_line(&mut line)
                .map_err(|e| SmtError::Session(e.to_string()))?;
            if n == 0 {
                return Err(SmtError::Session("solver closed its output".into()));
            }
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed.starts_with("(error") && !balanced(trimmed) {
                // Multi-line error; keep reading.
                let mut acc = line.clone();
                while !balanced(acc.trim()) {
                    let mut next = String::new();
                    let n = self
                        .stdout
                        .read_line(&mut next)
                        .map_err(|e| SmtError::Session(e.to_string()))?;
                    if n == 0 {
                        break;
                    }
                    acc.push_str(&next);
                }
                return Ok(acc.trim().to_string());
            }
            return Ok(trimmed.to_string());
        }
    }

    fn read_balanced(&mut self) -> Result<String, SmtError> {
        let mut acc = String::new();
        loop {
            let mut line = String::new();
            let n = self
                .stdout
                .read_line(&mut line)
                .map_err(|e| SmtError::Session(e.to_string()))?;
            if n == 0 {
                return Err(SmtError::Session("solver closed its output".into()));
            }
            if acc.is_empty() && line.trim().is_empty() {
                continue;
            }
            acc.push_str(&line);
            if balanced(acc.trim()) {
                return Ok(acc.trim().to_string());
            }
        }
    }
}

/// True when every `(` is matched, ignoring parens inside string
/// literals and quoted symbols.
fn solver_error(text: &str) -> SmtError {
    SmtError::SolverReported(text.trim().to_string())
}

fn balanced(text: &str) -> bool {
    let mut depth: i64 = 0;
    let mut in_string = false;
    let mut in_quote = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_string {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                } else {
                    in_string = false;
                }
            }
            continue;
        }
        if in_quote {
            if c == '|' {
                in_quote = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '|' => in_quote = true,
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
    }
    depth == 0 && !text.is_empty() && !in_string && !in_quote
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.command("(exit)");
        let _ = self.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Locates a solver executable: explicit path, `DPNCHECK_SOLVER`, then
/// `z3`/`cvc5` on `PATH`.
pub fn default_solver() -> Option<PathBuf> {
    if let Ok(path) = std::env::var("DPNCHECK_SOLVER") {
        if !path.is_empty() {
            return Some(PathBuf::from(path));
        }
    }
    for name in ["z3", "cvc5"] {
        if let Some(found) = find_on_path(name) {
            return Some(found);
        }
    }
    None
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}
