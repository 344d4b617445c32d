//! Task-directory handling: the `task.json` manifest, submission files,
//! pool JSONL files, and run-log JSONL persistence.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::PoolRecord;
use crate::arch::{format_architecture, parse_architecture, ArchError, Architecture, Primitive, PrimitivePool};
use crate::proxy::FitnessDirection;
use crate::search::{Limits, RunLog, SearchNode};

pub const MANIFEST_NAME: &str = "task.json";
pub const DEFAULT_DRAFT_COUNT: usize = 5;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.7;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("no {MANIFEST_NAME} found in {0}")]
    MissingManifest(PathBuf),
    #[error("invalid manifest field {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("submission does not parse: {0}")]
    BadSubmission(#[from] ArchError),
    #[error("malformed log or pool file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> WorkspaceError {
    WorkspaceError::InvalidField { field: field.to_string(), reason: reason.into() }
}

/// How candidates get scored for this task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "UPPERCASE")]
pub enum EvaluatorSpec {
    Synthetic { seed: u64 },
    External { address: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    task_id: Option<String>,
    pool: Option<Vec<String>>,
    length: Option<usize>,
    direction: Option<FitnessDirection>,
    evaluator: Option<EvaluatorSpec>,
    limits: Option<Limits>,
    draft_count: Option<usize>,
    split_ratio: Option<f64>,
}

/// Validated `task.json` contents with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskManifest {
    pub task_id: String,
    pub pool: PrimitivePool,
    pub length: usize,
    pub direction: FitnessDirection,
    pub evaluator: EvaluatorSpec,
    pub limits: Limits,
    pub draft_count: usize,
    pub split_ratio: f64,
}

impl TaskManifest {
    pub fn from_json(text: &str) -> Result<TaskManifest, WorkspaceError> {
        let raw: RawManifest = serde_json::from_str(text)
            .map_err(|e| invalid(MANIFEST_NAME, e.to_string()))?;
        let task_id = raw.task_id.ok_or_else(|| invalid("task_id", "missing"))?;
        let pool_tokens = raw.pool.ok_or_else(|| invalid("pool", "missing"))?;
        let mut members = Vec::new();
        for tok in &pool_tokens {
            let p = Primitive::from_token(tok)
                .ok_or_else(|| invalid("pool", format!("unknown primitive {tok:?}")))?;
            if members.contains(&p) {
                return Err(invalid("pool", format!("duplicate primitive {tok:?}")));
            }
            members.push(p);
        }
        let pool = PrimitivePool::new(&members)
            .map_err(|e| invalid("pool", e.to_string()))?;
        let length = raw.length.ok_or_else(|| invalid("length", "missing"))?;
        if length == 0 {
            return Err(invalid("length", "must be positive"));
        }
        let direction = raw.direction.ok_or_else(|| invalid("direction", "missing"))?;
        let evaluator = raw.evaluator.unwrap_or(EvaluatorSpec::Synthetic { seed: 0 });
        let limits = raw.limits.unwrap_or_default();
        if limits.max_steps == 0 || limits.wall_clock_secs == 0 {
            return Err(invalid("limits", "max_steps and wall_clock must be positive"));
        }
        let draft_count = raw.draft_count.unwrap_or(DEFAULT_DRAFT_COUNT);
        if draft_count == 0 {
            return Err(invalid("draft_count", "must be positive"));
        }
        let split_ratio = raw.split_ratio.unwrap_or(DEFAULT_SPLIT_RATIO);
        if !(split_ratio > 0.0 && split_ratio < 1.0) {
            return Err(invalid("split_ratio", "must be in (0, 1)"));
        }
        Ok(TaskManifest {
            task_id,
            pool,
            length,
            direction,
            evaluator,
            limits,
            draft_count,
            split_ratio,
        })
    }
}

/// Reads and validates `dir/task.json`.
pub fn load_task(dir: &Path) -> Result<TaskManifest, WorkspaceError> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(WorkspaceError::MissingManifest(dir.to_path_buf()));
    }
    TaskManifest::from_json(&fs::read_to_string(path)?)
}

/// A task directory with its standard sub-directories.
#[derive(Debug)]
pub struct Workspace {
    pub root: PathBuf,
    pub manifest: TaskManifest,
}

impl Workspace {
    /// Loads the manifest and creates pools/, logs/, patterns/.
    pub fn open(root: &Path) -> Result<Workspace, WorkspaceError> {
        let manifest = load_task(root)?;
        for sub in ["pools", "logs", "patterns"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Workspace { root: root.to_path_buf(), manifest })
    }

    pub fn pools_dir(&self) -> PathBuf {
        self.root.join("pools")
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn patterns_dir(&self) -> PathBuf {
        self.root.join("patterns")
    }
}

/// Writes the submission file: one line of space-separated tokens.
pub fn write_submission(arch: &Architecture, path: &Path) -> Result<(), WorkspaceError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{}", format_architecture(arch))?;
    Ok(())
}

/// Reads a submission and validates it against the manifest's pool and
/// length. Commas and CRLF line endings are accepted as separators.
pub fn read_submission(path: &Path, manifest: &TaskManifest) -> Result<Architecture, WorkspaceError> {
    let text = fs::read_to_string(path)?;
    let normalized = text.replace([',', '\r'], " ");
    Ok(parse_architecture(&normalized, &manifest.pool, manifest.length)?)
}

/// Serializes a run log as JSONL: one header line, one line per node,
/// and a final summary line.
pub fn write_run_log<W: Write>(writer: &mut W, log: &RunLog) -> Result<(), WorkspaceError> {
    #[derive(Serialize)]
    struct Header<'a> {
        record: &'static str,
        seed: u64,
        task_id: &'a str,
        direction: FitnessDirection,
        limits: Limits,
    }
    #[derive(Serialize)]
    struct NodeLine<'a> {
        record: &'static str,
        #[serde(flatten)]
        node: &'a SearchNode,
    }
    #[derive(Serialize)]
    struct Summary {
        record: &'static str,
        nodes: usize,
        valid_nodes: usize,
        best_val_node: Option<u64>,
        best_test_node: Option<u64>,
    }
    let header = Header {
        record: "header",
        seed: log.seed,
        task_id: &log.task_id,
        direction: log.direction,
        limits: log.limits,
    };
    writeln!(writer, "{}", serde_json::to_string(&header).unwrap())?;
    for node in &log.nodes {
        writeln!(writer, "{}", serde_json::to_string(&NodeLine { record: "node", node }).unwrap())?;
    }
    let summary = Summary {
        record: "summary",
        nodes: log.nodes.len(),
        valid_nodes: log.nodes.iter().filter(|n| n.valid).count(),
        best_val_node: log.best_val_node,
        best_test_node: log.best_test_node,
    };
    writeln!(writer, "{}", serde_json::to_string(&summary).unwrap())?;
    Ok(())
}

/// Parses a JSONL run log written by [`write_run_log`].
pub fn read_run_log<R: BufRead>(reader: R) -> Result<RunLog, WorkspaceError> {
    #[derive(Deserialize)]
    struct Header {
        seed: u64,
        task_id: String,
        direction: FitnessDirection,
        limits: Limits,
    }
    #[derive(Deserialize)]
    struct Summary {
        nodes: usize,
        best_val_node: Option<u64>,
        best_test_node: Option<u64>,
    }
    let mut header: Option<Header> = None;
    let mut nodes: Vec<SearchNode> = Vec::new();
    let mut summary: Option<Summary> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| WorkspaceError::Malformed(format!("{e}: {line:?}")))?;
        let record = value.get("record").and_then(|r| r.as_str()).unwrap_or("");
        match record {
            "header" => {
                header = Some(
                    serde_json::from_value(value)
                        .map_err(|e| WorkspaceError::Malformed(e.to_string()))?,
                )
            }
            "node" => nodes.push(
                serde_json::from_value(value)
                    .map_err(|e| WorkspaceError::Malformed(e.to_string()))?,
            ),
            "summary" => {
                summary = Some(
                    serde_json::from_value(value)
                        .map_err(|e| WorkspaceError::Malformed(e.to_string()))?,
                )
            }
            other => return Err(WorkspaceError::Malformed(format!("unknown record {other:?}"))),
        }
    }
    let header = header.ok_or_else(|| WorkspaceError::Malformed("missing header line".into()))?;
    let summary = summary.ok_or_else(|| WorkspaceError::Malformed("missing summary line".into()))?;
    if summary.nodes != nodes.len() {
        return Err(WorkspaceError::Malformed(format!(
            "summary counts {} nodes, log has {}",
            summary.nodes,
            nodes.len()
        )));
    }
    Ok(RunLog {
        seed: header.seed,
        task_id: header.task_id,
        direction: header.direction,
        limits: header.limits,
        nodes,
        best_val_node: summary.best_val_node,
        best_test_node: summary.best_test_node,
    })
}

pub fn write_run_log_file(path: &Path, log: &RunLog) -> Result<(), WorkspaceError> {
    let mut file = fs::File::create(path)?;
    write_run_log(&mut file, log)
}

pub fn read_run_log_file(path: &Path) -> Result<RunLog, WorkspaceError> {
    read_run_log(BufReader::new(fs::File::open(path)?))
}

/// Writes pool records as JSONL, one record per line.
pub fn write_pool<W: Write>(writer: &mut W, records: &[PoolRecord]) -> Result<(), WorkspaceError> {
    for rec in records {
        writeln!(writer, "{}", serde_json::to_string(rec).unwrap())?;
    }
    Ok(())
}

/// Reads a JSONL pool file.
pub fn read_pool<R: BufRead>(reader: R) -> Result<Vec<PoolRecord>, WorkspaceError> {
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| WorkspaceError::Malformed(format!("{e}: {line:?}")))?,
        );
    }
    Ok(records)
}

pub fn read_pool_file(path: &Path) -> Result<Vec<PoolRecord>, WorkspaceError> {
    read_pool(BufReader::new(fs::File::open(path)?))
}
