//! Model tracing: matching student actions against every decomposition of
//! the problem's root task that is still consistent with what the student
//! has done so far.
//!
//! The trace keeps a frontier of agendas. Each agenda is one partial
//! decomposition with its own working memory. A compound task is decomposed
//! when the student starts working on it, so its method preconditions see
//! the state at that moment. An agenda stays on the frontier only while it
//! can still be completed.

mod agenda;
mod plans;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Serialize, Serializer};

pub use agenda::{Agenda, Node, NodeId, NodeKind};
pub use plans::{enumerate_plans, PlanSet};

use crate::domain::{Domain, GroundError, GroundTask, PreconditionStats, Step};
use crate::facts::{Fact, FactError, WorkingMemory};
use crate::value::{Sym, Value};
use agenda::{complete, viable, Ctx, Move};

/// Deepest decomposition nesting allowed before the domain is considered
/// runaway.
pub const MAX_DEPTH: usize = 64;
/// Largest frontier allowed.
pub const MAX_FRONTIER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("root task {0} has no decomposition under the problem facts")]
    NoDecomposition(GroundTask),
    #[error("the problem is already complete")]
    AlreadyComplete,
    #[error("decomposition deeper than {MAX_DEPTH}: {}", chain_text(.chain))]
    DepthExceeded { chain: Vec<GroundTask> },
    #[error("frontier grew to {size} agendas (limit {MAX_FRONTIER})")]
    FrontierExceeded { size: usize },
    #[error("root {root} does not match the domain's root schema {schema}")]
    RootMismatch { root: GroundTask, schema: String },
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Facts(#[from] FactError),
}

fn chain_text(chain: &[GroundTask]) -> String {
    chain.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" > ")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
pub struct ExpectedAction {
    pub field: Sym,
    pub value: Value,
    pub skill: Option<Sym>,
}

impl ExpectedAction {
    pub fn from_step(step: &Step) -> ExpectedAction {
        ExpectedAction {
            field: step.field.clone(),
            value: step.value.clone(),
            skill: step.skill.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct StudentAction {
    pub field: Sym,
    pub value: Value,
    /// Position in the sequence of accepted actions.
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub action: StudentAction,
    pub skills: Vec<Sym>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    InProgress,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TraceResult {
    Correct {
        skills: Vec<Sym>,
        strategy: Vec<Sym>,
        /// Surviving decompositions disagree on the strategy.
        ambiguous: bool,
    },
    Incorrect {
        expected: Vec<ExpectedAction>,
    },
    Complete {
        skills: Vec<Sym>,
        strategy: Vec<Sym>,
        ambiguous: bool,
    },
}

impl TraceResult {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, TraceResult::Incorrect { .. })
    }

    pub fn skills(&self) -> &[Sym] {
        match self {
            TraceResult::Correct { skills, .. } | TraceResult::Complete { skills, .. } => skills,
            TraceResult::Incorrect { .. } => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hint {
    pub field: Sym,
    pub value: Value,
    pub skill: Option<Sym>,
    /// Methods from the root down to the hinted step.
    pub strategy: Vec<Sym>,
}

/// The tracer's view of one problem attempt.
#[derive(Clone, Debug, Serialize)]
pub struct TraceState {
    #[serde(serialize_with = "domain_name")]
    domain: Arc<Domain>,
    root: GroundTask,
    initial_facts: Vec<Fact>,
    collapsed: BTreeSet<GroundTask>,
    expanded: Vec<Expansion>,
    frontier: Vec<Agenda>,
    history: Vec<HistoryEntry>,
    status: TraceStatus,
    #[serde(skip)]
    stats: PreconditionStats,
}

fn domain_name<S: Serializer>(d: &Arc<Domain>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(d.name.as_str())
}

impl PartialEq for TraceState {
    /// Compares everything except instrumentation counters.
    fn eq(&self, other: &Self) -> bool {
        self.domain.name == other.domain.name
            && self.root == other.root
            && self.initial_facts == other.initial_facts
            && self.collapsed == other.collapsed
            && self.expanded == other.expanded
            && self.frontier == other.frontier
            && self.history == other.history
            && self.status == other.status
    }
}

/// A collapsed task the student opened, and the field it was shown as.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Expansion {
    pub task: GroundTask,
    pub field: Sym,
}

/// Facts asserted when a collapsed task is expanded by hand.
pub const EXPANDED_PREDICATE: &str = "scaffoldExpanded";

/// Starts tracing `root` from `initial_facts`.
pub fn init_trace(
    domain: Arc<Domain>,
    root: GroundTask,
    initial_facts: Vec<Fact>,
) -> Result<TraceState, TraceError> {
    init_trace_collapsed(domain, root, initial_facts, BTreeSet::new())
}

/// As [`init_trace`], with some compound tasks collapsed into single
/// actions from the start.
pub fn init_trace_collapsed(
    domain: Arc<Domain>,
    root: GroundTask,
    initial_facts: Vec<Fact>,
    collapsed: BTreeSet<GroundTask>,
) -> Result<TraceState, TraceError> {
    if domain.root.name != root.name
        || domain
            .root
            .as_pattern()
            .unify(&root.args, &Default::default())
            .is_none()
    {
        return Err(TraceError::RootMismatch {
            root,
            schema: domain.root.to_string(),
        });
    }
    for f in &initial_facts {
        if !f.to_pattern().is_ground() {
            return Err(FactError::NonGround(f.to_pattern()).into());
        }
    }
    let mut memory = WorkingMemory::new();
    for f in &initial_facts {
        memory.assert_fact(f.clone());
    }
    memory.saturate(&domain.axioms)?;
    let mut state = TraceState {
        root: root.clone(),
        initial_facts,
        collapsed,
        expanded: Vec::new(),
        frontier: vec![Agenda::new(memory, root.clone())],
        history: Vec::new(),
        status: TraceStatus::InProgress,
        stats: PreconditionStats::default(),
        domain,
    };
    let viable_root = {
        let (mut ctx, frontier) = state.ctx();
        viable(&frontier[0], &mut ctx)?
    };
    if !viable_root {
        return Err(TraceError::NoDecomposition(root));
    }
    Ok(state)
}

impl TraceState {
    fn ctx(&mut self) -> (Ctx<'_>, &[Agenda]) {
        (
            Ctx {
                domain: &self.domain,
                collapsed: &self.collapsed,
                stats: &mut self.stats,
            },
            &self.frontier,
        )
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn root(&self) -> &GroundTask {
        &self.root
    }

    pub fn initial_facts(&self) -> &[Fact] {
        &self.initial_facts
    }

    pub fn status(&self) -> TraceStatus {
        self.status
    }

    pub fn is_complete(&self) -> bool {
        self.status == TraceStatus::Complete
    }

    pub fn frontier(&self) -> &[Agenda] {
        &self.frontier
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn collapsed(&self) -> &BTreeSet<GroundTask> {
        &self.collapsed
    }

    /// Manual expansions, in order.
    pub fn expanded(&self) -> &[Expansion] {
        &self.expanded
    }

    pub fn stats(&self) -> &PreconditionStats {
        &self.stats
    }

    /// Working memory of the deterministic-first agenda.
    pub fn memory(&self) -> &WorkingMemory {
        &self.frontier[0].memory
    }

    /// Viable moves from every agenda, in frontier then move order.
    fn viable_moves(&mut self) -> Result<Vec<Move>, TraceError> {
        if self.is_complete() {
            return Err(TraceError::AlreadyComplete);
        }
        let (mut ctx, frontier) = self.ctx();
        let mut out = Vec::new();
        for agenda in frontier {
            for mv in agenda.moves(&mut ctx)? {
                if viable(&mv.next, &mut ctx)? {
                    out.push(mv);
                }
            }
        }
        Ok(out)
    }

    /// Every action that would be accepted next, deduplicated, in
    /// deterministic order.
    pub fn expected_actions(&mut self) -> Result<Vec<ExpectedAction>, TraceError> {
        let mut seen = HashSet::new();
        Ok(self
            .viable_moves()?
            .into_iter()
            .map(|m| m.observed)
            .filter(|a| seen.insert((a.field.clone(), a.value.clone())))
            .collect())
    }

    /// Matches an action against the frontier. An incorrect action leaves
    /// the state untouched.
    pub fn apply_action(&mut self, field: &Sym, value: &Value) -> Result<TraceResult, TraceError> {
        let moves = self.viable_moves()?;
        let mut expected = Vec::new();
        let mut survivors = Vec::new();
        for mv in moves {
            if &mv.observed.field == field && mv.observed.value.accepts(value) {
                survivors.push(mv);
            } else if !expected
                .iter()
                .any(|e: &ExpectedAction| e.field == mv.observed.field && e.value == mv.observed.value)
            {
                expected.push(mv.observed);
            }
        }
        if survivors.is_empty() {
            return Ok(TraceResult::Incorrect { expected });
        }
        let strategies: Vec<Vec<Sym>> = survivors.iter().map(|m| m.next.strategy(m.leaf)).collect();
        let ambiguous = strategies.iter().any(|s| *s != strategies[0]);
        let mut skills = Vec::new();
        for s in &survivors[0].credited {
            if !skills.contains(s) {
                skills.push(s.clone());
            }
        }
        let strategy = strategies[0].clone();

        let mut seen = HashSet::new();
        let frontier: Vec<Agenda> = survivors
            .into_iter()
            .map(|m| m.next)
            .filter(|a| seen.insert(a.clone()))
            .collect();
        if frontier.len() > MAX_FRONTIER {
            return Err(TraceError::FrontierExceeded {
                size: frontier.len(),
            });
        }
        let complete = frontier.iter().any(Agenda::is_complete);
        self.frontier = frontier;
        self.history.push(HistoryEntry {
            action: StudentAction {
                field: field.clone(),
                value: value.clone(),
                seq: self.history.len() as u64,
            },
            skills: skills.clone(),
        });
        if complete {
            self.status = TraceStatus::Complete;
            // Only fully matched decompositions remain meaningful.
            self.frontier.retain(Agenda::is_complete);
            Ok(TraceResult::Complete {
                skills,
                strategy,
                ambiguous,
            })
        } else {
            Ok(TraceResult::Correct {
                skills,
                strategy,
                ambiguous,
            })
        }
    }

    /// The first expected action with the methods that lead to it.
    pub fn next_hint(&mut self) -> Result<Hint, TraceError> {
        let mv = self
            .viable_moves()?
            .into_iter()
            .next()
            .ok_or(TraceError::AlreadyComplete)?;
        let mut strategy = mv.next.strategy(mv.leaf);
        if let NodeKind::Macro { methods, .. } = &mv.next.nodes[mv.leaf].kind {
            strategy.truncate(strategy.len() - methods.len());
        }
        Ok(Hint {
            field: mv.observed.field,
            value: mv.observed.value,
            skill: mv.observed.skill,
            strategy,
        })
    }

    /// The deterministic-first completion of the first agenda. Node ids
    /// below `matched_nodes` existed before the simulation.
    pub fn plan_tree(&mut self) -> Result<PlanTree, TraceError> {
        let existing = self.frontier[0].nodes.len();
        let agenda = if self.frontier[0].is_complete() {
            self.frontier[0].clone()
        } else {
            let (mut ctx, frontier) = self.ctx();
            complete(frontier[0].clone(), &mut ctx, 1)?
                .pop()
                .map(|c| c.agenda)
                .ok_or_else(|| TraceError::NoDecomposition(self.root.clone()))?
        };
        Ok(PlanTree {
            agenda,
            existing_nodes: existing,
        })
    }

    /// Replaces the set of collapsed tasks. Only tasks not yet started are
    /// affected.
    pub fn set_collapsed(&mut self, collapsed: BTreeSet<GroundTask>) {
        self.collapsed = collapsed;
    }

    /// Uncollapses `task` one level: its compound subtasks become collapsed
    /// in its place. Records the expansion as a working-memory fact.
    pub fn expand_task(
        &mut self,
        task: &GroundTask,
        subtasks: &[GroundTask],
        field: &Sym,
    ) -> Result<(), TraceError> {
        let mut next = self.clone();
        next.collapsed.remove(task);
        next.collapsed.extend(subtasks.iter().cloned());
        let fact = Fact::new(EXPANDED_PREDICATE, vec![Value::Symbol(task.name.clone())]);
        let domain = next.domain.clone();
        for agenda in &mut next.frontier {
            agenda::assert_into(agenda, fact.clone(), &domain)?;
        }
        let frontier = std::mem::take(&mut next.frontier);
        let mut kept = Vec::new();
        {
            let (mut ctx, _) = next.ctx();
            for a in frontier {
                if viable(&a, &mut ctx)? {
                    kept.push(a);
                }
            }
        }
        if kept.is_empty() {
            return Err(TraceError::NoDecomposition(task.clone()));
        }
        next.frontier = kept;
        next.expanded.push(Expansion {
            task: task.clone(),
            field: field.clone(),
        });
        *self = next;
        Ok(())
    }
}

/// A complete decomposition tree, used for layouts.
#[derive(Clone, Debug)]
pub struct PlanTree {
    pub agenda: Agenda,
    pub existing_nodes: usize,
}

impl PlanTree {
    pub fn root(&self) -> Option<NodeId> {
        (!self.agenda.nodes.is_empty()).then_some(0)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.agenda.nodes[id]
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.agenda.children(id)
    }

    /// True if the student has already matched this leaf.
    pub fn matched(&self, id: NodeId) -> bool {
        id < self.existing_nodes && self.agenda.nodes[id].is_leaf()
    }

    /// Leaves in subtask order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.root().into_iter().collect();
        while let Some(id) = stack.pop() {
            if self.node(id).is_leaf() {
                out.push(id);
            } else {
                let mut kids = self.children(id);
                kids.reverse();
                stack.extend(kids);
            }
        }
        out
    }
}
