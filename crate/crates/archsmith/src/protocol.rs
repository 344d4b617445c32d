//! Line-delimited JSON wire protocols for external proposers and
//! evaluators. One request, one response, newline-terminated, UTF-8,
//! over a spawned subprocess's stdin/stdout (or any byte stream).

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{format_architecture, Architecture};
use crate::proxy::{FitnessRecord, FitnessSource};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("peer closed the stream")]
    Closed,
    #[error("timed out waiting for response")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("evaluator reported failure: {0}")]
    EvaluatorReportedFailure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposeOp {
    Draft,
    Improve,
    Debug,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParentSummary {
    pub arch: String,
    pub val: Option<f64>,
    pub rationale: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub arch: String,
    pub val: Option<f64>,
}

/// Request sent to a proposer for one search step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposeRequest {
    pub op: ProposeOp,
    pub pool: Vec<String>,
    pub length: usize,
    pub parent: Option<ParentSummary>,
    /// Most recent scored candidates, capped at 20 entries.
    pub history_summary: Vec<HistoryEntry>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposeResponse {
    pub arch: String,
    pub rationale: String,
}

/// Request sent to an external evaluator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRequest {
    pub arch: String,
    pub task_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
struct EvalResponseRaw {
    val: Option<f64>,
    test: Option<f64>,
    error: Option<String>,
}

/// Writes one request line and reads one response line.
pub fn roundtrip_line<W: Write, R: BufRead>(
    writer: &mut W,
    reader: &mut R,
    request_json: &str,
) -> Result<String, WireError> {
    writer.write_all(request_json.as_bytes())?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(WireError::Closed);
    }
    Ok(line.trim_end().to_string())
}

fn parse_eval_response(line: &str, arch: &Architecture, seed: u64) -> Result<FitnessRecord, WireError> {
    let raw: EvalResponseRaw = serde_json::from_str(line)
        .map_err(|e| WireError::MalformedResponse(format!("{e}: {line:?}")))?;
    if let Some(reason) = raw.error {
        return Err(WireError::EvaluatorReportedFailure(reason));
    }
    match (raw.val, raw.test) {
        (Some(val), Some(test)) => Ok(FitnessRecord {
            architecture: arch.clone(),
            val_fitness: val,
            test_fitness: test,
            source: FitnessSource::External,
            seed,
        }),
        _ => Err(WireError::MalformedResponse(format!("missing val/test in {line:?}"))),
    }
}

/// Sends an architecture to an evaluator over an in-hand stream pair
/// and parses the response.
pub fn evaluate_over_stream<W: Write, R: BufRead>(
    writer: &mut W,
    reader: &mut R,
    arch: &Architecture,
    task_id: &str,
    seed: u64,
) -> Result<FitnessRecord, WireError> {
    let req = EvalRequest { arch: format_architecture(arch), task_id: task_id.to_string(), seed };
    let line = roundtrip_line(writer, reader, &serde_json::to_string(&req).unwrap())?;
    parse_eval_response(&line, arch, seed)
}

/// A subprocess speaking the line protocol on stdin/stdout. A reader
/// thread feeds responses through a channel so requests can time out.
pub struct LineProcess {
    child: Child,
    stdin: std::process::ChildStdin,
    responses: mpsc::Receiver<std::io::Result<String>>,
    pub timeout: Duration,
}

impl LineProcess {
    /// Spawns `program args...` with piped stdio.
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<LineProcess, WireError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line.trim_end().to_string())).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(LineProcess { child, stdin, responses: rx, timeout })
    }

    /// One request line out, one response line in.
    pub fn roundtrip(&mut self, request_json: &str) -> Result<String, WireError> {
        self.stdin.write_all(request_json.as_bytes())?;
        self.stdin.write_all(b"\n")?;
        self.stdin.flush()?;
        match self.responses.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(WireError::Io(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(WireError::Timeout),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(WireError::Closed),
        }
    }

    pub fn propose(&mut self, req: &ProposeRequest) -> Result<ProposeResponse, WireError> {
        let line = self.roundtrip(&serde_json::to_string(req).unwrap())?;
        serde_json::from_str(&line)
            .map_err(|e| WireError::MalformedResponse(format!("{e}: {line:?}")))
    }

    pub fn evaluate(
        &mut self,
        arch: &Architecture,
        task_id: &str,
        seed: u64,
    ) -> Result<FitnessRecord, WireError> {
        let req =
            EvalRequest { arch: format_architecture(arch), task_id: task_id.to_string(), seed };
        let line = self.roundtrip(&serde_json::to_string(&req).unwrap())?;
        parse_eval_response(&line, arch, seed)
    }
}

impl Drop for LineProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
