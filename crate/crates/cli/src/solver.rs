use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::record::SolverVerdict;

/// Default per-call budget: five minutes.
pub const DEFAULT_TIMEOUT_MS: u64 = 300_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub timeout_ms: u64,
    /// Passed before the CNF path.
    pub extra_args: Vec<String>,
}

impl SolverConfig {
    pub fn new(executable: impl Into<PathBuf>) -> Self {
        SolverConfig {
            executable: executable.into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            extra_args: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverRun {
    pub verdict: SolverVerdict,
    pub wall_ms: f64,
    /// Captured stderr, or the reason for an ERROR verdict.
    pub stderr: String,
}

/// Milliseconds, rounded to microseconds.
fn elapsed_ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

/// Verdict from the `s ...` status line, falling back to exit codes 10/20.
fn parse_verdict(stdout: &str, code: Option<i32>) -> Option<SolverVerdict> {
    for line in stdout.lines() {
        match line.trim() {
            "s SATISFIABLE" => return Some(SolverVerdict::Sat),
            "s UNSATISFIABLE" => return Some(SolverVerdict::Unsat),
            _ => {}
        }
    }
    match code {
        Some(10) => Some(SolverVerdict::Sat),
        Some(20) => Some(SolverVerdict::Unsat),
        _ => None,
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs the solver on `cnf` and kills it once the budget is spent.
pub fn run_external_solver(cnf: &Path, config: &SolverConfig) -> SolverRun {
    let start = Instant::now();
    let error = |msg: String| SolverRun {
        verdict: SolverVerdict::Error,
        wall_ms: elapsed_ms(start),
        stderr: msg,
    };
    let mut child = match Command::new(&config.executable)
        .args(&config.extra_args)
        .arg(cnf)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return error(format!("cannot run {}: {e}", config.executable.display())),
    };
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let budget = Duration::from_millis(config.timeout_ms);
    let mut pause = Duration::from_micros(200);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= budget => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => {
                thread::sleep(pause.min(budget.saturating_sub(start.elapsed())));
                pause = (pause * 2).min(Duration::from_millis(20));
            }
            Err(e) => {
                let _ = child.kill();
                return error(format!("waiting for solver: {e}"));
            }
        }
    };
    let wall_ms = elapsed_ms(start);
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let Some(status) = status else {
        return SolverRun {
            verdict: SolverVerdict::Timeout,
            wall_ms,
            stderr,
        };
    };
    match parse_verdict(&stdout, status.code()) {
        Some(verdict) => SolverRun {
            verdict,
            wall_ms,
            stderr,
        },
        None => SolverRun {
            verdict: SolverVerdict::Error,
            wall_ms,
            stderr: format!("no verdict ({status}); stderr: {stderr}"),
        },
    }
}
