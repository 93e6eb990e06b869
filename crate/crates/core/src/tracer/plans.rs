//! Exhaustive plan enumeration.
//!
//! Deliberately shares nothing with the agenda machinery beyond grounding:
//! pending tasks live in a flat table with explicit precedence edges, the
//! way partial-order HTN planners usually represent a task network. Used as
//! the reference the tracer is tested against.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{TraceError, MAX_DEPTH};
use crate::domain::{Achiever, Domain, GroundTask, PreconditionStats, SubtaskOrder};
use crate::facts::{Fact, WorkingMemory};
use crate::value::{Sym, Value};

pub type PlanAction = (Sym, Value);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlanSet {
    /// Distinct complete action sequences in discovery order.
    pub plans: Vec<Vec<PlanAction>>,
    /// More plans exist beyond `limit`.
    pub truncated: bool,
}

#[derive(Clone)]
struct Network {
    memory: WorkingMemory,
    /// id -> (task, nesting depth)
    tasks: BTreeMap<u32, (GroundTask, usize)>,
    /// (before, after)
    edges: BTreeSet<(u32, u32)>,
    next_id: u32,
}

impl Network {
    fn unconstrained(&self, among: Option<&[u32]>) -> Vec<u32> {
        self.tasks
            .keys()
            .copied()
            .filter(|id| among.is_none_or(|ids| ids.contains(id)))
            .filter(|id| !self.edges.iter().any(|&(a, b)| b == *id && self.tasks.contains_key(&a)))
            .collect()
    }

    fn remove(&mut self, id: u32) {
        self.tasks.remove(&id);
        self.edges.retain(|&(a, b)| a != id && b != id);
    }
}

struct Search<'a> {
    domain: &'a Domain,
    limit: usize,
    stats: PreconditionStats,
    seen: BTreeSet<Vec<PlanAction>>,
    plans: Vec<Vec<PlanAction>>,
    truncated: bool,
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.truncated
    }

    /// Every (action, successor) reachable by executing one primitive task,
    /// decomposing compound tasks on the way down.
    fn steps(
        &mut self,
        net: &Network,
        among: Option<&[u32]>,
        out: &mut Vec<(PlanAction, Network)>,
    ) -> Result<(), TraceError> {
        for id in net.unconstrained(among) {
            let (task, depth) = net.tasks[&id].clone();
            if depth > MAX_DEPTH {
                continue;
            }
            for achiever in self.domain.achievers(&task, &net.memory, &mut self.stats)? {
                match achiever {
                    Achiever::Operator { step, .. } => {
                        let mut next = net.clone();
                        next.remove(id);
                        step.apply(&mut next.memory, &self.domain.axioms)?;
                        out.push(((step.field, step.value), next));
                    }
                    Achiever::Method {
                        method, subtasks, ..
                    } => {
                        let mut next = net.clone();
                        let new_ids: Vec<u32> = (0..subtasks.len() as u32)
                            .map(|i| next.next_id + i)
                            .collect();
                        next.next_id += subtasks.len() as u32;
                        for (nid, t) in new_ids.iter().zip(subtasks) {
                            next.tasks.insert(*nid, (t, depth + 1));
                        }
                        let inherited: Vec<(u32, u32)> = next
                            .edges
                            .iter()
                            .filter(|&&(a, b)| a == id || b == id)
                            .copied()
                            .collect();
                        for (a, b) in inherited {
                            for &nid in &new_ids {
                                if a == id {
                                    next.edges.insert((nid, b));
                                } else {
                                    next.edges.insert((a, nid));
                                }
                            }
                        }
                        if method.order == SubtaskOrder::Sequential {
                            for w in new_ids.windows(2) {
                                next.edges.insert((w[0], w[1]));
                            }
                        }
                        next.remove(id);
                        self.steps(&next, Some(&new_ids), out)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn search(&mut self, net: Network, prefix: &mut Vec<PlanAction>) -> Result<(), TraceError> {
        if self.done() {
            return Ok(());
        }
        if net.tasks.is_empty() {
            if self.seen.insert(prefix.clone()) {
                if self.plans.len() == self.limit {
                    self.truncated = true;
                } else {
                    self.plans.push(prefix.clone());
                }
            }
            return Ok(());
        }
        let mut successors = Vec::new();
        self.steps(&net, None, &mut successors)?;
        for (action, next) in successors {
            prefix.push(action);
            self.search(next, prefix)?;
            prefix.pop();
            if self.done() {
                break;
            }
        }
        Ok(())
    }
}

/// Enumerates complete action sequences for `root`, up to `limit` distinct
/// ones.
pub fn enumerate_plans(
    domain: &Domain,
    root: &GroundTask,
    facts: &[Fact],
    limit: usize,
) -> Result<PlanSet, TraceError> {
    let mut memory = WorkingMemory::new();
    for f in facts {
        memory.assert_fact(f.clone());
    }
    memory.saturate(&domain.axioms)?;
    let net = Network {
        memory,
        tasks: BTreeMap::from([(0, (root.clone(), 0))]),
        edges: BTreeSet::new(),
        next_id: 1,
    };
    let mut search = Search {
        domain,
        limit: limit.max(1),
        stats: PreconditionStats::default(),
        seen: BTreeSet::new(),
        plans: Vec::new(),
        truncated: false,
    };
    search.search(net, &mut Vec::new())?;
    Ok(PlanSet {
        plans: search.plans,
        truncated: search.truncated,
    })
}
