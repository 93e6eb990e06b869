//! Static checks over a domain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Domain, DomainErrorKind, TaskHead};
use crate::facts::{check_safety, Condition};
use crate::value::Sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    DuplicateHead,
    DuplicateName,
    UnknownSkill,
    UnsafeCondition,
    UnboundVariable,
    UnstratifiedNegation,
    EmptyMethod,
    /// A task used as root or subtask that no record can achieve.
    UnachievableTask,
    /// A method or operator whose head is never reached from the root.
    UnreachableRecord,
    UnusedSkill,
}

impl DiagnosticKind {
    fn load_error(self) -> Option<DomainErrorKind> {
        Some(match self {
            DiagnosticKind::DuplicateHead => DomainErrorKind::DuplicateHead,
            DiagnosticKind::DuplicateName => DomainErrorKind::DuplicateName,
            DiagnosticKind::UnknownSkill => DomainErrorKind::UnknownSkill,
            DiagnosticKind::UnsafeCondition => DomainErrorKind::UnsafeCondition,
            DiagnosticKind::UnboundVariable => DomainErrorKind::UnboundVariable,
            DiagnosticKind::UnstratifiedNegation => DomainErrorKind::UnstratifiedNegation,
            DiagnosticKind::EmptyMethod => DomainErrorKind::EmptyMethod,
            _ => return None,
        })
    }
}

/// Identifies a record. Indices are positions in the domain's record lists.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordRef {
    Root,
    Skill(Sym),
    Method(usize, Sym),
    Operator(usize, Sym),
    Axiom(usize),
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordRef::Root => f.write_str("root"),
            RecordRef::Skill(s) => write!(f, "skill {s}"),
            RecordRef::Method(_, n) => write!(f, "method {n}"),
            RecordRef::Operator(_, n) => write!(f, "operator {n}"),
            RecordRef::Axiom(i) => write!(f, "axiom #{}", i + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub record: RecordRef,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.record, self.message)
    }
}

struct Checker<'d> {
    domain: &'d Domain,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, severity: Severity, kind: DiagnosticKind, record: RecordRef, message: String) {
        self.out.push(Diagnostic {
            severity,
            kind,
            record,
            message,
        });
    }

    fn error(&mut self, kind: DiagnosticKind, record: RecordRef, message: String) {
        self.push(Severity::Error, kind, record, message);
    }

    fn names(&mut self) {
        let d = self.domain;
        let compound: BTreeSet<&Sym> = d.methods.iter().map(|m| &m.head.name).collect();
        for (i, o) in d.operators.iter().enumerate() {
            if compound.contains(&o.head.name) {
                self.error(
                    DiagnosticKind::DuplicateHead,
                    RecordRef::Operator(i, o.name.clone()),
                    format!("task {} is achieved by both methods and operators", o.head.name),
                );
            }
        }
        let mut seen = BTreeSet::new();
        for (i, m) in d.methods.iter().enumerate() {
            if !seen.insert(&m.name) {
                self.error(
                    DiagnosticKind::DuplicateName,
                    RecordRef::Method(i, m.name.clone()),
                    "another method has the same name".into(),
                );
            }
        }
        let mut seen = BTreeSet::new();
        for (i, o) in d.operators.iter().enumerate() {
            if !seen.insert(&o.name) {
                self.error(
                    DiagnosticKind::DuplicateName,
                    RecordRef::Operator(i, o.name.clone()),
                    "another operator has the same name".into(),
                );
            }
        }
    }

    fn skill(&mut self, record: RecordRef, skill: &Option<Sym>) {
        if let Some(s) = skill {
            if !self.domain.skills.contains_key(s) {
                self.error(DiagnosticKind::UnknownSkill, record, format!("skill {s} is not declared"));
            }
        }
    }

    /// Safety of the precondition list followed by a check that `used`
    /// variables are bound by the head or the preconditions.
    fn bindings(
        &mut self,
        record: RecordRef,
        head_vars: BTreeSet<Sym>,
        pre: &[Condition],
        used: BTreeSet<Sym>,
        used_in: &str,
    ) {
        match check_safety(pre, &head_vars) {
            Err(e) => self.error(DiagnosticKind::UnsafeCondition, record, e.to_string()),
            Ok(bound) => {
                if let Some(v) = used.iter().find(|v| !bound.contains(*v)) {
                    self.error(
                        DiagnosticKind::UnboundVariable,
                        record,
                        format!("?{v} in {used_in} is not bound by the head or preconditions"),
                    );
                }
            }
        }
    }

    fn records(&mut self) {
        let d = self.domain;
        for (i, m) in d.methods.iter().enumerate() {
            let r = RecordRef::Method(i, m.name.clone());
            self.skill(r.clone(), &m.skill);
            if m.subtasks.is_empty() {
                self.error(DiagnosticKind::EmptyMethod, r.clone(), "method has no subtasks".into());
            }
            let used = m.subtasks.iter().flat_map(TaskHead::variables).collect();
            self.bindings(r, m.head.variables(), &m.preconditions, used, "subtasks");
        }
        for (i, o) in d.operators.iter().enumerate() {
            let r = RecordRef::Operator(i, o.name.clone());
            self.skill(r.clone(), &o.skill);
            let mut used: BTreeSet<Sym> = o.action.field.as_var().into_iter().cloned().collect();
            used.extend(o.action.value.variables());
            for p in o.add.iter().chain(&o.delete) {
                used.extend(p.variables());
            }
            self.bindings(r, o.head.variables(), &o.preconditions, used, "action or effects");
        }
        let derived = d.derived_predicates();
        for (i, a) in d.axioms.iter().enumerate() {
            let r = RecordRef::Axiom(i);
            self.bindings(r.clone(), BTreeSet::new(), &a.preconditions, a.head.variables(), "head");
            for c in &a.preconditions {
                if let Condition::Negated(p) = c {
                    if derived.contains(&p.predicate) {
                        self.error(
                            DiagnosticKind::UnstratifiedNegation,
                            r.clone(),
                            format!("negates derived predicate {}", p.predicate),
                        );
                    }
                }
            }
        }
    }

    fn tasks(&mut self) {
        let d = self.domain;
        // task name -> arities it can be achieved at
        let mut achievable: BTreeMap<&Sym, BTreeSet<usize>> = BTreeMap::new();
        for h in d.methods.iter().map(|m| &m.head).chain(d.operators.iter().map(|o| &o.head)) {
            achievable.entry(&h.name).or_default().insert(h.args.len());
        }
        let mut uses: Vec<(RecordRef, &TaskHead)> = vec![(RecordRef::Root, &d.root)];
        for (i, m) in d.methods.iter().enumerate() {
            for s in &m.subtasks {
                uses.push((RecordRef::Method(i, m.name.clone()), s));
            }
        }
        for (r, h) in uses {
            match achievable.get(&h.name) {
                None => self.error(
                    DiagnosticKind::UnachievableTask,
                    r,
                    format!("no method or operator achieves task {}", h.name),
                ),
                Some(arities) if !arities.contains(&h.args.len()) => self.error(
                    DiagnosticKind::UnachievableTask,
                    r,
                    format!(
                        "task {} is used with {} argument(s) but no record has that arity",
                        h.name,
                        h.args.len()
                    ),
                ),
                Some(_) => {}
            }
        }

        let mut reachable: BTreeSet<&Sym> = BTreeSet::new();
        let mut queue = vec![&d.root.name];
        while let Some(t) = queue.pop() {
            if !reachable.insert(t) {
                continue;
            }
            for m in d.methods_for(t) {
                queue.extend(m.subtasks.iter().map(|s| &s.name));
            }
        }
        for (i, m) in d.methods.iter().enumerate() {
            if !reachable.contains(&m.head.name) {
                self.push(
                    Severity::Warning,
                    DiagnosticKind::UnreachableRecord,
                    RecordRef::Method(i, m.name.clone()),
                    format!("task {} is never reached from the root", m.head.name),
                );
            }
        }
        for (i, o) in d.operators.iter().enumerate() {
            if !reachable.contains(&o.head.name) {
                self.push(
                    Severity::Warning,
                    DiagnosticKind::UnreachableRecord,
                    RecordRef::Operator(i, o.name.clone()),
                    format!("task {} is never reached from the root", o.head.name),
                );
            }
        }

        let used: BTreeSet<&Sym> = d
            .methods
            .iter()
            .filter_map(|m| m.skill.as_ref())
            .chain(d.operators.iter().filter_map(|o| o.skill.as_ref()))
            .collect();
        for s in d.skills.keys() {
            if !used.contains(s) {
                self.push(
                    Severity::Warning,
                    DiagnosticKind::UnusedSkill,
                    RecordRef::Skill(s.clone()),
                    "no method or operator credits this skill".into(),
                );
            }
        }
    }
}

/// Every problem found in `domain`, errors first.
pub fn validate_domain(domain: &Domain) -> Vec<Diagnostic> {
    let mut c = Checker {
        domain,
        out: Vec::new(),
    };
    c.names();
    c.records();
    c.tasks();
    c.out.sort_by_key(|d| d.severity);
    c.out
}

/// The first problem that makes a domain unloadable.
pub(crate) fn first_load_error(domain: &Domain) -> Option<(DomainErrorKind, RecordRef, String)> {
    let mut c = Checker {
        domain,
        out: Vec::new(),
    };
    c.names();
    c.records();
    c.out
        .into_iter()
        .find_map(|d| Some((d.kind.load_error()?, d.record, d.message)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::parse_domain;

    fn kinds(src: &str) -> Vec<DiagnosticKind> {
        validate_domain(&parse_domain(src).unwrap())
            .into_iter()
            .map(|d| d.kind)
            .collect()
    }

    #[test]
    fn flags_unachievable_and_unreachable() {
        let src = "domain d\nskill s\nroot go\n\
            method go { subtasks { missing; step(1, 2) } }\n\
            operator step(?a) { action f = ?a }\n\
            operator orphan { action g = 1 }";
        let k = kinds(src);
        assert_eq!(
            k,
            vec![
                DiagnosticKind::UnachievableTask,
                DiagnosticKind::UnachievableTask,
                DiagnosticKind::UnreachableRecord,
                DiagnosticKind::UnusedSkill,
            ]
        );
    }

    #[test]
    fn clean_domain_has_no_diagnostics() {
        let src = "domain d\nskill s\nroot go\n\
            method go { subtasks { step(1) } skill s }\n\
            operator step(?a) { action f = ?a }";
        assert!(kinds(src).is_empty());
    }
}
