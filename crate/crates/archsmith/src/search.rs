//! Greedy tree-search engine over candidate architectures.
//!
//! A run drafts a fixed number of root candidates, then repeatedly
//! improves the best-validation node. Candidates that fail validation
//! are sent through at most two debug attempts before the branch is
//! abandoned.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{
    format_architecture, mutate, parse_architecture, ArchError, Architecture, PrimitivePool,
};
use crate::protocol::{HistoryEntry, ParentSummary, ProposeOp, ProposeRequest, ProposeResponse};
use crate::proxy::{synthetic_fitness, FitnessDirection};

pub const DEFAULT_DRAFT_COUNT: usize = 5;
const DEBUG_ATTEMPTS: usize = 2;
const HISTORY_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Operator {
    Draft,
    Improve,
    Debug,
}

/// One candidate in the search tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub operator: Operator,
    /// Raw submission text as proposed; parses iff `valid`.
    pub arch: String,
    pub rationale: String,
    pub val_fitness: Option<f64>,
    pub test_fitness: Option<f64>,
    pub valid: bool,
    /// Machine-readable rejection reason when invalid.
    pub diagnosis: Option<String>,
    pub step_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_steps: u64,
    pub wall_clock_secs: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 500, wall_clock_secs: 24 * 3600 }
    }
}

/// Step-indexed record of one greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub task_id: String,
    pub direction: FitnessDirection,
    pub limits: Limits,
    pub nodes: Vec<SearchNode>,
    pub best_val_node: Option<u64>,
    pub best_test_node: Option<u64>,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no valid node exists")]
    NoValidNode,
    #[error("evaluator failed: {reason}")]
    EvaluatorFailure { reason: String, partial: Box<RunLog> },
}

/// Validation verdict for a raw submission.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnosis {
    Ok(Architecture),
    Buggy(ArchError),
}

/// Checks that raw text parses to a valid architecture for the task.
pub fn analyze(text: &str, pool: &PrimitivePool, length: usize) -> Diagnosis {
    match parse_architecture(text, pool, length) {
        Ok(arch) => Diagnosis::Ok(arch),
        Err(e) => Diagnosis::Buggy(e),
    }
}

fn diagnosis_tag(err: &ArchError) -> String {
    match err {
        ArchError::UnknownToken(t) => format!("UnknownToken:{t}"),
        ArchError::WrongLength { expected, found } => {
            format!("WrongLength:expected={expected},found={found}")
        }
        ArchError::OutOfPool(t) => format!("OutOfPool:{t}"),
        other => format!("{other}"),
    }
}

/// Proposes candidate architectures for draft/improve/debug requests.
pub trait Proposer {
    fn propose(&mut self, req: &ProposeRequest) -> Result<ProposeResponse, String>;
}

/// Scores a valid architecture, returning (validation, test) fitness.
pub trait Evaluator {
    fn evaluate(&mut self, arch: &Architecture, step: u64) -> Result<(f64, f64), String>;
}

/// The built-in proposer: random drafts, single-edit mutations of the
/// parent on improve, fresh resamples on debug.
pub struct MutatingProposer {
    pool: PrimitivePool,
    length: usize,
    rng: ChaCha8Rng,
}

impl MutatingProposer {
    pub fn new(pool: PrimitivePool, length: usize, seed: u64) -> MutatingProposer {
        MutatingProposer { pool, length, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn random_arch(&mut self) -> Architecture {
        let members = self.pool.members().to_vec();
        Architecture::new(
            (0..self.length).map(|_| members[self.rng.gen_range(0..members.len())]).collect(),
        )
    }
}

impl Proposer for MutatingProposer {
    fn propose(&mut self, req: &ProposeRequest) -> Result<ProposeResponse, String> {
        let arch = match req.op {
            ProposeOp::Draft | ProposeOp::Debug => self.random_arch(),
            ProposeOp::Improve => {
                let parent = req
                    .parent
                    .as_ref()
                    .and_then(|p| parse_architecture(&p.arch, &self.pool, req.length).ok());
                match parent {
                    Some(p) => {
                        let edits = self.rng.gen_range(1..=2);
                        mutate(&p, &self.pool, edits, &mut self.rng)
                    }
                    None => self.random_arch(),
                }
            }
        };
        Ok(ProposeResponse {
            arch: format_architecture(&arch),
            rationale: format!("builtin:{:?}", req.op).to_lowercase(),
        })
    }
}

/// Synthetic-oracle evaluator over the shared task seed.
pub struct SyntheticEvaluator {
    pub seed: u64,
    pub direction: FitnessDirection,
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&mut self, arch: &Architecture, _step: u64) -> Result<(f64, f64), String> {
        let rec = synthetic_fitness(arch, self.seed, self.direction);
        Ok((rec.val_fitness, rec.test_fitness))
    }
}

/// Valid node with the best validation fitness; ties break to the
/// lowest step index.
pub fn select_parent(nodes: &[SearchNode], direction: FitnessDirection) -> Result<u64, SearchError> {
    let mut best: Option<&SearchNode> = None;
    for node in nodes.iter().filter(|n| n.valid) {
        let val = node.val_fitness.expect("valid node has val fitness");
        match best {
            None => best = Some(node),
            Some(b) => {
                if direction.better(val, b.val_fitness.unwrap()) {
                    best = Some(node);
                }
            }
        }
    }
    best.map(|n| n.id).ok_or(SearchError::NoValidNode)
}

/// Task parameters needed by the engine.
#[derive(Debug, Clone)]
pub struct SearchTask {
    pub task_id: String,
    pub pool: PrimitivePool,
    pub length: usize,
    pub direction: FitnessDirection,
    pub draft_count: usize,
}

struct Engine<'a> {
    task: &'a SearchTask,
    proposer: &'a mut dyn Proposer,
    evaluator: &'a mut dyn Evaluator,
    limits: Limits,
    seed: u64,
    started: Instant,
    nodes: Vec<SearchNode>,
    next_id: u64,
}

impl<'a> Engine<'a> {
    fn budget_left(&self) -> bool {
        (self.nodes.len() as u64) < self.limits.max_steps
            && self.started.elapsed() < Duration::from_secs(self.limits.wall_clock_secs)
    }

    fn history(&self) -> Vec<HistoryEntry> {
        let scored: Vec<HistoryEntry> = self
            .nodes
            .iter()
            .filter(|n| n.valid)
            .map(|n| HistoryEntry { arch: n.arch.clone(), val: n.val_fitness })
            .collect();
        let skip = scored.len().saturating_sub(HISTORY_CAP);
        scored.into_iter().skip(skip).collect()
    }

    fn parent_summary(&self, id: u64) -> Option<ParentSummary> {
        self.nodes.iter().find(|n| n.id == id).map(|n| ParentSummary {
            arch: n.arch.clone(),
            val: n.val_fitness,
            rationale: n.rationale.clone(),
        })
    }

    /// Proposes, analyzes, evaluates, and records one node.
    fn step(&mut self, op: ProposeOp, parent_id: Option<u64>) -> Result<u64, SearchError> {
        let step_index = self.nodes.len() as u64;
        let req = ProposeRequest {
            op,
            pool: self.task.pool.members().iter().map(|p| p.token().to_string()).collect(),
            length: self.task.length,
            parent: parent_id.and_then(|id| self.parent_summary(id)),
            history_summary: self.history(),
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(step_index),
        };
        let operator = match op {
            ProposeOp::Draft => Operator::Draft,
            ProposeOp::Improve => Operator::Improve,
            ProposeOp::Debug => Operator::Debug,
        };
        let id = self.next_id;
        self.next_id += 1;

        let (arch_text, rationale, diagnosis) = match self.proposer.propose(&req) {
            Ok(resp) => {
                let diag = analyze(&resp.arch, &self.task.pool, self.task.length);
                (resp.arch, resp.rationale, diag)
            }
            Err(reason) => {
                (String::new(), String::new(), Diagnosis::Buggy(ArchError::UnknownToken(reason)))
            }
        };

        let mut node = SearchNode {
            id,
            parent_id,
            operator,
            arch: arch_text,
            rationale,
            val_fitness: None,
            test_fitness: None,
            valid: false,
            diagnosis: None,
            step_index,
        };
        match diagnosis {
            Diagnosis::Ok(arch) => match self.evaluator.evaluate(&arch, step_index) {
                Ok((val, test)) => {
                    node.valid = true;
                    node.val_fitness = Some(val);
                    node.test_fitness = Some(test);
                    self.nodes.push(node);
                }
                Err(reason) => {
                    self.nodes.push(node);
                    return Err(SearchError::EvaluatorFailure {
                        reason,
                        partial: Box::new(self.finish()),
                    });
                }
            },
            Diagnosis::Buggy(err) => {
                node.diagnosis = Some(diagnosis_tag(&err));
                self.nodes.push(node);
            }
        }
        Ok(id)
    }

    /// Up to two debug attempts on a buggy node; stops on the first
    /// valid child, otherwise abandons the branch.
    fn debug_chain(&mut self, buggy_id: u64) -> Result<(), SearchError> {
        for _ in 0..DEBUG_ATTEMPTS {
            if !self.budget_left() {
                return Ok(());
            }
            let child = self.step(ProposeOp::Debug, Some(buggy_id))?;
            if self.nodes.iter().any(|n| n.id == child && n.valid) {
                return Ok(());
            }
        }
        Ok(())
    }

    fn finish(&self) -> RunLog {
        let best_val = select_parent(&self.nodes, self.task.direction).ok();
        let best_test = self
            .nodes
            .iter()
            .filter(|n| n.valid)
            .max_by(|a, b| {
                let (x, y) = (a.test_fitness.unwrap(), b.test_fitness.unwrap());
                match self.task.direction {
                    FitnessDirection::Maximize => x.total_cmp(&y),
                    FitnessDirection::Minimize => y.total_cmp(&x),
                }
                // prefer the earlier node on exact ties
                .then(b.step_index.cmp(&a.step_index))
            })
            .map(|n| n.id);
        RunLog {
            seed: self.seed,
            task_id: self.task.task_id.clone(),
            direction: self.task.direction,
            limits: self.limits,
            nodes: self.nodes.clone(),
            best_val_node: best_val,
            best_test_node: best_test,
        }
    }
}

/// Runs one greedy search to completion and returns its log.
pub fn run_greedy(
    task: &SearchTask,
    proposer: &mut dyn Proposer,
    evaluator: &mut dyn Evaluator,
    limits: Limits,
    seed: u64,
) -> Result<RunLog, SearchError> {
    let mut engine = Engine {
        task,
        proposer,
        evaluator,
        limits,
        seed,
        started: Instant::now(),
        nodes: Vec::new(),
        next_id: 0,
    };

    // all drafts first, then debug passes over the buggy ones
    let mut draft_ids = Vec::new();
    for _ in 0..task.draft_count {
        if !engine.budget_left() {
            break;
        }
        draft_ids.push(engine.step(ProposeOp::Draft, None)?);
    }
    for id in draft_ids {
        if !engine.nodes.iter().any(|n| n.id == id && n.valid) {
            engine.debug_chain(id)?;
        }
    }

    while engine.budget_left() {
        let parent = match select_parent(&engine.nodes, task.direction) {
            Ok(id) => id,
            Err(_) => break, // nothing improvable; terminate early
        };
        let child = engine.step(ProposeOp::Improve, Some(parent))?;
        if !engine.nodes.iter().any(|n| n.id == child && n.valid) {
            engine.debug_chain(child)?;
        }
    }

    Ok(engine.finish())
}

/// Replay checks over a finished log: tree shape, step ordering, and
/// the greedy-frontier rule for improve parents.
pub fn verify_log(log: &RunLog) -> Result<(), String> {
    let mut seen: Vec<u64> = Vec::new();
    for (i, node) in log.nodes.iter().enumerate() {
        if node.step_index != i as u64 {
            return Err(format!("node {} has step_index {}, expected {i}", node.id, node.step_index));
        }
        match node.operator {
            Operator::Draft => {
                if node.parent_id.is_some() {
                    return Err(format!("draft node {} has a parent", node.id));
                }
            }
            Operator::Improve | Operator::Debug => {
                let pid = node
                    .parent_id
                    .ok_or_else(|| format!("{:?} node {} lacks a parent", node.operator, node.id))?;
                if !seen.contains(&pid) {
                    return Err(format!("node {} parent {pid} does not precede it", node.id));
                }
            }
        }
        if !node.valid && node.val_fitness.is_some() {
            return Err(format!("invalid node {} carries a val fitness", node.id));
        }
        if node.operator == Operator::Improve {
            let prior = &log.nodes[..i];
            let expected = select_parent(prior, log.direction)
                .map_err(|_| format!("improve node {} with no valid predecessor", node.id))?;
            if node.parent_id != Some(expected) {
                return Err(format!(
                    "improve node {} has parent {:?}, greedy frontier expects {expected}",
                    node.id, node.parent_id
                ));
            }
        }
        seen.push(node.id);
    }
    // recompute best pointers
    let best_val = select_parent(&log.nodes, log.direction).ok();
    if best_val != log.best_val_node {
        return Err(format!("best_val_node {:?} != recomputed {best_val:?}", log.best_val_node));
    }
    Ok(())
}
