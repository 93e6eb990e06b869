//! One viable partial decomposition and the moves that extend it.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{ExpectedAction, TraceError, MAX_DEPTH};
use crate::domain::{Achiever, Domain, GroundTask, PreconditionStats, Step, SubtaskOrder};
use crate::facts::{Fact, WorkingMemory};
use crate::value::Sym;

pub type NodeId = usize;

/// Alternative inner plans considered for one collapsed task.
const MACRO_PLAN_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Method {
        method: Sym,
        skill: Option<Sym>,
        order: SubtaskOrder,
    },
    Operator {
        step: Step,
    },
    /// A collapsed compound task, matched as a single action.
    Macro {
        /// Observable actions of the simulated inner plan, in order. Only
        /// the last is entered by the student.
        steps: Vec<ExpectedAction>,
        /// Method names used by the inner plan, in decomposition order.
        methods: Vec<Sym>,
        /// Compound subtasks of the inner plan's top method.
        subtasks: Vec<GroundTask>,
        /// Skill the collapsed field is tagged with.
        governing_skill: Option<Sym>,
        /// Every skill credited by the inner plan.
        skills: Vec<Sym>,
    },
}

/// A decomposition tree node. Method nodes exist from the moment their task
/// is decomposed; leaf nodes from the moment they are matched.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Node {
    pub task: GroundTask,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    /// Position among the parent method's subtasks.
    pub slot: usize,
    /// 0 for the root task.
    pub depth: usize,
    pub done: bool,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        !matches!(self.kind, NodeKind::Method { .. })
    }

    /// The action this leaf stands for.
    pub fn action(&self) -> Option<ExpectedAction> {
        match &self.kind {
            NodeKind::Method { .. } => None,
            NodeKind::Operator { step } => Some(ExpectedAction::from_step(step)),
            NodeKind::Macro {
                steps,
                governing_skill,
                ..
            } => steps.last().map(|a| ExpectedAction {
                skill: governing_skill.clone(),
                ..a.clone()
            }),
        }
    }
}

/// Work still to be done.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Work {
    Task {
        task: GroundTask,
        parent: Option<NodeId>,
        slot: usize,
        depth: usize,
    },
    /// Only the first element is active.
    Seq(Vec<Work>),
    /// Every element is active.
    Par(Vec<Work>),
    Method {
        node: NodeId,
        body: Box<Work>,
    },
    Done,
}

impl Work {
    /// Paths to every task that may be worked on next.
    fn firsts(&self, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match self {
            Work::Task { .. } => out.push(prefix.clone()),
            Work::Seq(items) => {
                if let Some(first) = items.first() {
                    prefix.push(0);
                    first.firsts(prefix, out);
                    prefix.pop();
                }
            }
            Work::Par(items) => {
                for (i, item) in items.iter().enumerate() {
                    prefix.push(i);
                    item.firsts(prefix, out);
                    prefix.pop();
                }
            }
            Work::Method { body, .. } => {
                prefix.push(0);
                body.firsts(prefix, out);
                prefix.pop();
            }
            Work::Done => {}
        }
    }

    fn at(&self, path: &[usize]) -> &Work {
        let Some((&i, rest)) = path.split_first() else {
            return self;
        };
        match self {
            Work::Seq(items) | Work::Par(items) => items[i].at(rest),
            Work::Method { body, .. } => body.at(rest),
            Work::Task { .. } | Work::Done => unreachable!("path runs past a leaf"),
        }
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut Work {
        let Some((&i, rest)) = path.split_first() else {
            return self;
        };
        match self {
            Work::Seq(items) | Work::Par(items) => items[i].at_mut(rest),
            Work::Method { body, .. } => body.at_mut(rest),
            Work::Task { .. } | Work::Done => unreachable!("path runs past a leaf"),
        }
    }

    /// Removes finished work, marking completed method nodes done and
    /// collecting their skills bottom-up.
    fn normalize(&mut self, nodes: &mut [Node], credited: &mut Vec<Sym>) {
        match self {
            Work::Seq(items) => {
                if let Some(first) = items.first_mut() {
                    first.normalize(nodes, credited);
                    if *first == Work::Done {
                        items.remove(0);
                    }
                }
                if items.is_empty() {
                    *self = Work::Done;
                }
            }
            Work::Par(items) => {
                for item in items.iter_mut() {
                    item.normalize(nodes, credited);
                }
                items.retain(|w| *w != Work::Done);
                if items.is_empty() {
                    *self = Work::Done;
                }
            }
            Work::Method { node, body } => {
                body.normalize(nodes, credited);
                if **body == Work::Done {
                    let n = &mut nodes[*node];
                    n.done = true;
                    if let NodeKind::Method { skill: Some(s), .. } = &n.kind {
                        credited.push(s.clone());
                    }
                    *self = Work::Done;
                }
            }
            Work::Task { .. } | Work::Done => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Agenda {
    pub(crate) memory: WorkingMemory,
    pub(crate) nodes: Vec<Node>,
    pub(crate) work: Option<Work>,
}

/// One way to extend an agenda by a single student action.
#[derive(Clone, Debug)]
pub(crate) struct Move {
    pub observed: ExpectedAction,
    pub next: Agenda,
    pub leaf: NodeId,
    pub credited: Vec<Sym>,
}

pub(crate) struct Ctx<'a> {
    pub domain: &'a Domain,
    pub collapsed: &'a BTreeSet<GroundTask>,
    pub stats: &'a mut PreconditionStats,
}

/// A completed agenda plus the moves that reached it.
pub(crate) struct Completion {
    pub agenda: Agenda,
    pub trail: Vec<(ExpectedAction, Vec<Sym>)>,
}

impl Agenda {
    pub(crate) fn new(memory: WorkingMemory, root: GroundTask) -> Agenda {
        Agenda {
            memory,
            nodes: Vec::new(),
            work: Some(Work::Task {
                task: root,
                parent: None,
                slot: 0,
                depth: 0,
            }),
        }
    }

    pub fn memory(&self) -> &WorkingMemory {
        &self.memory
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_complete(&self) -> bool {
        self.work.is_none()
    }

    /// Matched leaf actions in the order they were matched.
    pub fn matched_actions(&self) -> Vec<ExpectedAction> {
        self.nodes.iter().filter_map(Node::action).collect()
    }

    /// Method names from the root down to `node`, then any methods used
    /// inside it if it is a collapsed task.
    pub fn strategy(&self, node: NodeId) -> Vec<Sym> {
        let mut chain = Vec::new();
        let mut cur = self.nodes[node].parent;
        while let Some(id) = cur {
            if let NodeKind::Method { method, .. } = &self.nodes[id].kind {
                chain.push(method.clone());
            }
            cur = self.nodes[id].parent;
        }
        chain.reverse();
        match &self.nodes[node].kind {
            NodeKind::Method { method, .. } => chain.push(method.clone()),
            NodeKind::Macro { methods, .. } => chain.extend(methods.iter().cloned()),
            NodeKind::Operator { .. } => {}
        }
        chain
    }

    /// Children of a node, in subtask order.
    pub fn children(&self, node: NodeId) -> Vec<NodeId> {
        let mut kids: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent == Some(node))
            .collect();
        kids.sort_by_key(|&i| self.nodes[i].slot);
        kids
    }

    /// The skill a compound node is judged by: its method's skill, or else
    /// the skill of the deepest operator beneath it (first in subtask order
    /// on ties).
    pub fn governing_skill(&self, node: NodeId) -> Option<Sym> {
        if let NodeKind::Method { skill: Some(s), .. } = &self.nodes[node].kind {
            return Some(s.clone());
        }
        let mut best: Option<(usize, Sym)> = None;
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            let skill = match &n.kind {
                NodeKind::Operator { step } => step.skill.as_ref(),
                NodeKind::Macro { governing_skill, .. } => governing_skill.as_ref(),
                NodeKind::Method { .. } => None,
            };
            if let Some(s) = skill {
                if best.as_ref().is_none_or(|(d, _)| n.depth > *d) {
                    best = Some((n.depth, s.clone()));
                }
            }
            let mut kids = self.children(id);
            kids.reverse();
            stack.extend(kids);
        }
        best.map(|(_, s)| s)
    }

    fn push_node(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn task_chain(&self, parent: Option<NodeId>, task: &GroundTask) -> Vec<GroundTask> {
        let mut chain = vec![task.clone()];
        let mut cur = parent;
        while let Some(id) = cur {
            chain.push(self.nodes[id].task.clone());
            cur = self.nodes[id].parent;
        }
        chain.reverse();
        chain
    }

    /// Marks a leaf done at `path` and tidies completed work.
    fn finish(&mut self, path: &[usize], credited: &mut Vec<Sym>) {
        let Some(work) = self.work.as_mut() else {
            return;
        };
        *work.at_mut(path) = Work::Done;
        work.normalize(&mut self.nodes, credited);
        if *work == Work::Done {
            self.work = None;
        }
    }

    /// Every single-action extension, viable or not, in deterministic order.
    pub(crate) fn moves(&self, ctx: &mut Ctx<'_>) -> Result<Vec<Move>, TraceError> {
        let Some(work) = &self.work else {
            return Ok(Vec::new());
        };
        let mut paths = Vec::new();
        work.firsts(&mut Vec::new(), &mut paths);
        let mut out = Vec::new();
        for path in paths {
            self.expand_at(&path, ctx, &mut out)?;
        }
        Ok(out)
    }

    fn expand_at(&self, path: &[usize], ctx: &mut Ctx<'_>, out: &mut Vec<Move>) -> Result<(), TraceError> {
        let Some(Work::Task {
            task,
            parent,
            slot,
            depth,
        }) = self.work.as_ref().map(|w| w.at(path).clone())
        else {
            unreachable!("first-position path does not name a task");
        };
        if depth > MAX_DEPTH {
            return Err(TraceError::DepthExceeded {
                chain: self.task_chain(parent, &task),
            });
        }
        let domain = ctx.domain;

        if domain.is_compound(&task.name) && ctx.collapsed.contains(&task) {
            return self.expand_macro(path, task, parent, slot, depth, ctx, out);
        }

        for achiever in domain.achievers(&task, &self.memory, ctx.stats)? {
            match achiever {
                Achiever::Method {
                    method, subtasks, ..
                } => {
                    let mut next = self.clone();
                    let id = next.push_node(Node {
                        task: task.clone(),
                        kind: NodeKind::Method {
                            method: method.name.clone(),
                            skill: method.skill.clone(),
                            order: method.order,
                        },
                        parent,
                        slot,
                        depth,
                        done: false,
                    });
                    let items: Vec<Work> = subtasks
                        .into_iter()
                        .enumerate()
                        .map(|(i, t)| Work::Task {
                            task: t,
                            parent: Some(id),
                            slot: i,
                            depth: depth + 1,
                        })
                        .collect();
                    let body = match method.order {
                        SubtaskOrder::Sequential => Work::Seq(items),
                        SubtaskOrder::Unordered => Work::Par(items),
                    };
                    let mut inner = Vec::new();
                    let mut prefix = path.to_vec();
                    prefix.push(0);
                    body.firsts(&mut prefix, &mut inner);
                    if let Some(w) = next.work.as_mut() {
                        *w.at_mut(path) = Work::Method {
                            node: id,
                            body: Box::new(body),
                        };
                    }
                    for p in inner {
                        next.expand_at(&p, ctx, out)?;
                    }
                }
                Achiever::Operator { step, .. } => {
                    let mut next = self.clone();
                    step.apply(&mut next.memory, &domain.axioms)?;
                    let observed = ExpectedAction::from_step(&step);
                    let mut credited: Vec<Sym> = step.skill.iter().cloned().collect();
                    let leaf = next.push_node(Node {
                        task: task.clone(),
                        kind: NodeKind::Operator { step },
                        parent,
                        slot,
                        depth,
                        done: true,
                    });
                    next.finish(path, &mut credited);
                    out.push(Move {
                        observed,
                        next,
                        leaf,
                        credited,
                    });
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_macro(
        &self,
        path: &[usize],
        task: GroundTask,
        parent: Option<NodeId>,
        slot: usize,
        depth: usize,
        ctx: &mut Ctx<'_>,
        out: &mut Vec<Move>,
    ) -> Result<(), TraceError> {
        let sub = Agenda {
            memory: self.memory.clone(),
            nodes: Vec::new(),
            work: Some(Work::Task {
                task: task.clone(),
                parent: None,
                slot: 0,
                depth,
            }),
        };
        let none = BTreeSet::new();
        let mut inner_ctx = Ctx {
            domain: ctx.domain,
            collapsed: &none,
            stats: ctx.stats,
        };
        let completions = complete(sub, &mut inner_ctx, MACRO_PLAN_LIMIT)?;
        let mut seen: Vec<(ExpectedAction, WorkingMemory, Vec<Sym>)> = Vec::new();
        for c in completions {
            let steps: Vec<ExpectedAction> = c.trail.iter().map(|(a, _)| a.clone()).collect();
            let Some(last) = steps.last().cloned() else {
                continue;
            };
            let methods: Vec<Sym> = c
                .agenda
                .nodes
                .iter()
                .filter_map(|n| match &n.kind {
                    NodeKind::Method { method, .. } => Some(method.clone()),
                    _ => None,
                })
                .collect();
            let key = (last.clone(), c.agenda.memory.clone(), methods.clone());
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let mut skills: Vec<Sym> = Vec::new();
            for s in c.trail.iter().flat_map(|(_, s)| s) {
                if !skills.contains(s) {
                    skills.push(s.clone());
                }
            }
            let governing_skill = c.agenda.governing_skill(0);
            let subtasks = c
                .agenda
                .children(0)
                .into_iter()
                .map(|i| &c.agenda.nodes[i])
                .filter(|n| matches!(n.kind, NodeKind::Method { .. }))
                .map(|n| n.task.clone())
                .collect();
            let mut next = self.clone();
            next.memory = c.agenda.memory;
            let mut credited = skills.clone();
            let leaf = next.push_node(Node {
                task: task.clone(),
                kind: NodeKind::Macro {
                    steps,
                    methods,
                    subtasks,
                    governing_skill: governing_skill.clone(),
                    skills,
                },
                parent,
                slot,
                depth,
                done: true,
            });
            next.finish(path, &mut credited);
            out.push(Move {
                observed: ExpectedAction {
                    skill: governing_skill,
                    ..last
                },
                next,
                leaf,
                credited,
            });
        }
        Ok(())
    }
}

/// Depth-first search for up to `limit` completions.
pub(crate) fn complete(agenda: Agenda, ctx: &mut Ctx<'_>, limit: usize) -> Result<Vec<Completion>, TraceError> {
    fn go(
        agenda: Agenda,
        ctx: &mut Ctx<'_>,
        limit: usize,
        trail: &mut Vec<(ExpectedAction, Vec<Sym>)>,
        out: &mut Vec<Completion>,
    ) -> Result<(), TraceError> {
        if agenda.is_complete() {
            out.push(Completion {
                agenda,
                trail: trail.clone(),
            });
            return Ok(());
        }
        for mv in agenda.moves(ctx)? {
            trail.push((mv.observed, mv.credited));
            go(mv.next, ctx, limit, trail, out)?;
            trail.pop();
            if out.len() >= limit {
                break;
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    go(agenda, ctx, limit, &mut Vec::new(), &mut out)?;
    Ok(out)
}

pub(crate) fn viable(agenda: &Agenda, ctx: &mut Ctx<'_>) -> Result<bool, TraceError> {
    Ok(agenda.is_complete() || !complete(agenda.clone(), ctx, 1)?.is_empty())
}

/// Asserts a fact into the agenda's memory and re-derives.
pub(crate) fn assert_into(agenda: &mut Agenda, fact: Fact, domain: &Domain) -> Result<(), TraceError> {
    agenda.memory.assert_fact(fact);
    agenda.memory.saturate(&domain.axioms)?;
    Ok(())
}
