//! Expert-model representation: tasks, operators, methods, axioms and
//! skills, plus the domain-file format.
//!
//! A task has no record of its own. It exists as a name used by the root
//! schema, by method subtasks, and by method/operator heads. A head name is
//! either compound (achieved by methods) or primitive (achieved by
//! operators), never both.

mod ground;
mod syntax;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ground::{Achiever, GroundError, GroundTask, PreconditionStats, Step};
pub use syntax::{parse_domain, serialize_domain, LiteralDisplay};
pub use validate::{validate_domain, Diagnostic, DiagnosticKind, RecordRef, Severity};

use crate::expr::Expr;
use crate::facts::{Axiom, Condition, Pattern, Term};
use crate::value::Sym;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskHead {
    pub name: Sym,
    pub args: Vec<Term>,
}

impl TaskHead {
    pub fn new(name: &str, args: Vec<Term>) -> TaskHead {
        TaskHead {
            name: Sym::new(name),
            args,
        }
    }

    pub fn variables(&self) -> BTreeSet<Sym> {
        self.args.iter().filter_map(Term::as_var).cloned().collect()
    }

    pub(crate) fn as_pattern(&self) -> Pattern {
        Pattern {
            predicate: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for TaskHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", syntax::HeadDisplay(&self.name, &self.args))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubtaskOrder {
    #[default]
    Sequential,
    /// Sibling subtrees may be interleaved in any order.
    Unordered,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub name: Sym,
    pub head: TaskHead,
    pub preconditions: Vec<Condition>,
    pub subtasks: Vec<TaskHead>,
    pub order: SubtaskOrder,
    /// Strategy-level skill credited when the method's subtree completes.
    pub skill: Option<Sym>,
}

/// The student action an operator stands for: write `value` into `field`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub field: Term,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operator {
    pub name: Sym,
    pub head: TaskHead,
    pub preconditions: Vec<Condition>,
    pub action: ActionTemplate,
    pub add: Vec<Pattern>,
    pub delete: Vec<Pattern>,
    /// Knowledge component credited on each matching action.
    pub skill: Option<Sym>,
}

/// A loaded expert model. Records are kept in canonical order (methods and
/// operators by name, axioms by their printed form), which is also the
/// order alternatives are tried in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: Sym,
    pub skills: BTreeMap<Sym, String>,
    pub root: TaskHead,
    pub methods: Vec<Method>,
    pub operators: Vec<Operator>,
    pub axioms: Vec<Axiom>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainErrorKind {
    Syntax,
    MissingDomainName,
    MissingRoot,
    DuplicateHead,
    DuplicateName,
    UnknownSkill,
    UnsafeCondition,
    UnboundVariable,
    UnstratifiedNegation,
    EmptyMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct DomainError {
    pub kind: DomainErrorKind,
    pub position: Option<Position>,
    pub message: String,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{}:{}: {:?}: {}", p.line, p.column, self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

impl Domain {
    /// Builds a domain from its records, enforcing the load-time invariants
    /// and putting records into canonical order.
    pub fn new(
        name: Sym,
        skills: BTreeMap<Sym, String>,
        root: TaskHead,
        methods: Vec<Method>,
        operators: Vec<Operator>,
        axioms: Vec<Axiom>,
    ) -> Result<Domain, DomainError> {
        let mut domain = Domain {
            name,
            skills,
            root,
            methods,
            operators,
            axioms,
        };
        if let Some((kind, record, message)) = validate::first_load_error(&domain) {
            return Err(DomainError {
                kind,
                position: None,
                message: format!("{record}: {message}"),
            });
        }
        domain.canonicalize();
        Ok(domain)
    }

    fn canonicalize(&mut self) {
        self.methods.sort_by(|a, b| a.name.cmp(&b.name));
        self.operators.sort_by(|a, b| a.name.cmp(&b.name));
        self.axioms
            .sort_by_cached_key(syntax::axiom_to_string);
        self.axioms.dedup();
    }

    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name.as_str() == name)
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name.as_str() == name)
    }

    pub fn methods_for<'a>(&'a self, task: &Sym) -> impl Iterator<Item = &'a Method> + 'a {
        let task = task.clone();
        self.methods.iter().filter(move |m| m.head.name == task)
    }

    pub fn operators_for<'a>(&'a self, task: &Sym) -> impl Iterator<Item = &'a Operator> + 'a {
        let task = task.clone();
        self.operators.iter().filter(move |o| o.head.name == task)
    }

    /// True if the task name is achieved by methods.
    pub fn is_compound(&self, task: &Sym) -> bool {
        self.methods.iter().any(|m| m.head.name == *task)
    }

    pub fn skill_name<'a>(&'a self, skill: &'a Sym) -> &'a str {
        self.skills.get(skill).map(String::as_str).unwrap_or(skill.as_str())
    }

    /// Predicates that appear in some axiom head.
    pub fn derived_predicates(&self) -> BTreeSet<Sym> {
        self.axioms.iter().map(|a| a.head.predicate.clone()).collect()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_domain(self))
    }
}
