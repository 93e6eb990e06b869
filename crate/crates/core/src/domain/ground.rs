//! Grounding: which methods and operators achieve a ground task in a given
//! working memory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Domain, Method, Operator, TaskHead};
use crate::expr::EvalError;
use crate::facts::{Axiom, Binding, Fact, FactError, Pattern, Term, WorkingMemory};
use crate::value::{Sym, Value};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundTask {
    pub name: Sym,
    pub args: Vec<Value>,
}

impl GroundTask {
    pub fn new(name: &str, args: Vec<Value>) -> GroundTask {
        GroundTask {
            name: Sym::new(name),
            args,
        }
    }

    /// Grounds a task head under a binding.
    pub fn from_head(head: &TaskHead, binding: &Binding) -> Option<GroundTask> {
        let args = head
            .args
            .iter()
            .map(|t| t.resolve(binding))
            .collect::<Option<Vec<_>>>()?;
        Some(GroundTask {
            name: head.name.clone(),
            args,
        })
    }

    pub fn to_head(&self) -> TaskHead {
        TaskHead {
            name: self.name.clone(),
            args: self.args.iter().cloned().map(Term::Value).collect(),
        }
    }
}

impl fmt::Display for GroundTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", super::LiteralDisplay(a))?;
        }
        f.write_str(")")
    }
}

/// A fully grounded operator instance: the action the student is expected
/// to take and the state effects applied once they take it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub operator: Sym,
    pub task: GroundTask,
    pub field: Sym,
    pub value: Value,
    pub skill: Option<Sym>,
    pub add: Vec<Fact>,
    pub delete: Vec<Fact>,
}

impl Step {
    /// Applies delete then add effects and re-derives inferred facts.
    pub fn apply(&self, wm: &mut WorkingMemory, axioms: &[Axiom]) -> Result<(), FactError> {
        for f in &self.delete {
            wm.retract_fact(f);
        }
        for f in &self.add {
            wm.assert_fact(f.clone());
        }
        if self.delete.is_empty() {
            wm.saturate(axioms)?;
        } else {
            wm.refresh(axioms)?;
        }
        Ok(())
    }
}

/// One applicable way of achieving a task.
#[derive(Clone, Debug)]
pub enum Achiever<'d> {
    Method {
        method: &'d Method,
        binding: Binding,
        subtasks: Vec<GroundTask>,
    },
    Operator {
        operator: &'d Operator,
        binding: Binding,
        step: Step,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("{record}: variable ?{var} is unbound after preconditions")]
    Unbound { record: Sym, var: Sym },
    #[error("operator {operator}: action field {value} is not a symbol")]
    FieldNotSymbol { operator: Sym, value: Value },
    #[error("operator {operator} on {task}: {source}")]
    Eval {
        operator: Sym,
        task: GroundTask,
        source: EvalError,
    },
}

/// Counts precondition evaluations per record.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionStats {
    counts: BTreeMap<String, u64>,
}

impl PreconditionStats {
    pub fn record(&mut self, domain: &Sym, kind: &str, name: &Sym) {
        *self
            .counts
            .entry(format!("{domain}/{kind}/{name}"))
            .or_default() += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Domains whose records were evaluated at least once.
    pub fn domains(&self) -> BTreeSet<&str> {
        self.counts
            .keys()
            .filter_map(|k| k.split('/').next())
            .collect()
    }

    /// Record names (`kind/name`) evaluated for the given domain.
    pub fn records_of(&self, domain: &str) -> BTreeSet<String> {
        self.counts
            .keys()
            .filter_map(|k| k.strip_prefix(domain)?.strip_prefix('/').map(str::to_owned))
            .collect()
    }

    pub fn merge(&mut self, other: &PreconditionStats) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += v;
        }
    }
}

fn ground_patterns(
    record: &Sym,
    patterns: &[Pattern],
    binding: &Binding,
) -> Result<Vec<Fact>, GroundError> {
    patterns
        .iter()
        .map(|p| {
            let args = p.args.iter().map(|t| {
                t.resolve(binding).ok_or_else(|| GroundError::Unbound {
                    record: record.clone(),
                    var: t.as_var().cloned().unwrap_or_else(|| Sym::new("?")),
                })
            });
            Ok(Fact {
                predicate: p.predicate.clone(),
                args: args.collect::<Result<_, _>>()?,
                provenance: crate::facts::Provenance::Asserted,
            })
        })
        .collect()
}

impl Domain {
    /// Every applicable method or operator instance for `task`, in
    /// canonical record order, then binding order.
    pub fn achievers<'d>(
        &'d self,
        task: &GroundTask,
        wm: &WorkingMemory,
        stats: &mut PreconditionStats,
    ) -> Result<Vec<Achiever<'d>>, GroundError> {
        let mut out = Vec::new();
        for method in self.methods_for(&task.name) {
            let Some(seed) = method.head.as_pattern().unify(&task.args, &Binding::new()) else {
                continue;
            };
            stats.record(&self.name, "method", &method.name);
            for binding in wm.matches(&method.preconditions, &seed) {
                let subtasks = method
                    .subtasks
                    .iter()
                    .map(|h| {
                        GroundTask::from_head(h, &binding).ok_or_else(|| GroundError::Unbound {
                            record: method.name.clone(),
                            var: h
                                .variables()
                                .into_iter()
                                .find(|v| binding.get(v).is_none())
                                .unwrap_or_else(|| Sym::new("?")),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(Achiever::Method {
                    method,
                    binding,
                    subtasks,
                });
            }
        }
        for operator in self.operators_for(&task.name) {
            let Some(seed) = operator.head.as_pattern().unify(&task.args, &Binding::new()) else {
                continue;
            };
            stats.record(&self.name, "operator", &operator.name);
            for binding in wm.matches(&operator.preconditions, &seed) {
                let step = self.ground_step(operator, task, &binding)?;
                out.push(Achiever::Operator {
                    operator,
                    binding,
                    step,
                });
            }
        }
        Ok(out)
    }

    fn ground_step(
        &self,
        operator: &Operator,
        task: &GroundTask,
        binding: &Binding,
    ) -> Result<Step, GroundError> {
        let field = match operator.action.field.resolve(binding) {
            Some(Value::Symbol(s)) => s,
            Some(other) => {
                return Err(GroundError::FieldNotSymbol {
                    operator: operator.name.clone(),
                    value: other,
                })
            }
            None => {
                return Err(GroundError::Unbound {
                    record: operator.name.clone(),
                    var: operator.action.field.as_var().cloned().unwrap_or_else(|| Sym::new("?")),
                })
            }
        };
        let value = operator
            .action
            .value
            .eval(binding)
            .map_err(|source| GroundError::Eval {
                operator: operator.name.clone(),
                task: task.clone(),
                source,
            })?;
        Ok(Step {
            operator: operator.name.clone(),
            task: task.clone(),
            field,
            value,
            skill: operator.skill.clone(),
            add: ground_patterns(&operator.name, &operator.add, binding)?,
            delete: ground_patterns(&operator.name, &operator.delete, binding)?,
        })
    }
}
