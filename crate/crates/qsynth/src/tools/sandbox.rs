//! Subprocess python sandbox (live mode).
//!
//! Executes code with `python3 -I` (isolated mode: no user site-packages, no
//! environment injection), stdin closed, and a wall-time cap. Network
//! isolation must come from the deployment environment; this layer only
//! bounds time and captures output.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{PythonOutcome, ToolError};

/// Default wall-time cap for one execution.
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone)]
pub struct PythonSandbox {
    pub interpreter: String,
    pub timeout_ms: u64,
}

impl Default for PythonSandbox {
    fn default() -> Self {
        PythonSandbox {
            interpreter: "python3".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

impl PythonSandbox {
    pub fn run(&self, code: &str) -> Result<PythonOutcome, ToolError> {
        if code.trim().is_empty() {
            return Err(ToolError::EmptyInput("python"));
        }
        let mut child = Command::new(&self.interpreter)
            .arg("-I")
            .arg("-c")
            .arg(code)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ToolError::SandboxViolation(format!("spawn failed: {e}")))?;

        let mut stdout_pipe = child.stdout.take().expect("stdout piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout_pipe.read_to_string(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr_pipe.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_millis(self.timeout_ms);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(ToolError::Timeout(self.timeout_ms));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => {
                    return Err(ToolError::SandboxViolation(format!("wait failed: {e}")));
                }
            }
        };

        Ok(PythonOutcome {
            stdout: out_reader.join().unwrap_or_default(),
            stderr: err_reader.join().unwrap_or_default(),
            status: status.code().unwrap_or(-1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn python_available() -> bool {
        Command::new("python3").arg("--version").output().is_ok()
    }

    #[test]
    fn runs_simple_code() {
        if !python_available() {
            return;
        }
        let sandbox = PythonSandbox::default();
        let out = sandbox.run("print(2+3)").unwrap();
        assert_eq!(out.stdout.trim(), "5");
        assert_eq!(out.status, 0);
    }

    #[test]
    fn infinite_loop_times_out() {
        if !python_available() {
            return;
        }
        let sandbox = PythonSandbox {
            timeout_ms: 300,
            ..PythonSandbox::default()
        };
        match sandbox.run("while True: pass") {
            Err(ToolError::Timeout(ms)) => assert_eq!(ms, 300),
            other => panic!("expected timeout, got {other:?}"),
        }
    }
}
