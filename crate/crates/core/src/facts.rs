//! Working memory: ground facts, pattern matching over condition lists, and
//! axiom saturation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::value::{Sym, Value};

/// Default ceiling on the number of facts saturation may produce.
pub const DEFAULT_FACT_CEILING: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Value(Value),
    Var(Sym),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Sym::new(name))
    }

    pub fn sym(name: &str) -> Term {
        Term::Value(Value::sym(name))
    }

    pub fn as_var(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            Term::Value(_) => None,
        }
    }

    /// Resolves the term under a binding; `None` if it is an unbound variable.
    pub fn resolve(&self, binding: &Binding) -> Option<Value> {
        match self {
            Term::Value(v) => Some(v.clone()),
            Term::Var(name) => binding.get(name).cloned(),
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        Term::Value(v)
    }
}

impl From<i64> for Term {
    fn from(n: i64) -> Self {
        Term::Value(Value::Int(n))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub predicate: Sym,
    pub args: Vec<Term>,
}

impl Pattern {
    pub fn new(predicate: &str, args: Vec<Term>) -> Pattern {
        Pattern {
            predicate: Sym::new(predicate),
            args,
        }
    }

    pub fn variables(&self) -> BTreeSet<Sym> {
        self.args.iter().filter_map(Term::as_var).cloned().collect()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| t.as_var().is_none())
    }

    /// Grounds the pattern under `binding`.
    pub fn ground(&self, binding: &Binding) -> Result<Vec<Value>, FactError> {
        self.args
            .iter()
            .map(|t| {
                t.resolve(binding)
                    .ok_or_else(|| FactError::NonGround(self.clone()))
            })
            .collect()
    }

    /// Extends `binding` so that the pattern matches `args`, if possible.
    pub fn unify(&self, args: &[Value], binding: &Binding) -> Option<Binding> {
        if args.len() != self.args.len() {
            return None;
        }
        let mut out = binding.clone();
        for (term, value) in self.args.iter().zip(args) {
            match term {
                Term::Value(v) => {
                    if v != value {
                        return None;
                    }
                }
                Term::Var(name) => match out.get(name) {
                    Some(bound) if bound != value => return None,
                    Some(_) => {}
                    None => {
                        out.insert(name.clone(), value.clone());
                    }
                },
            }
        }
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Asserted,
    Inferred,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub predicate: Sym,
    pub args: Vec<Value>,
    pub provenance: Provenance,
}

impl Fact {
    pub fn new(predicate: &str, args: Vec<Value>) -> Fact {
        Fact {
            predicate: Sym::new(predicate),
            args,
            provenance: Provenance::Asserted,
        }
    }

    /// Builds a fact from a pattern, which must not contain variables.
    pub fn from_pattern(p: &Pattern) -> Result<Fact, FactError> {
        Ok(Fact {
            predicate: p.predicate.clone(),
            args: p.ground(&Binding::new())?,
            provenance: Provenance::Asserted,
        })
    }

    pub fn to_pattern(&self) -> Pattern {
        Pattern {
            predicate: self.predicate.clone(),
            args: self.args.iter().cloned().map(Term::Value).collect(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", crate::domain::LiteralDisplay(a))?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    /// `=`/`!=` are structural; orderings need comparable operands.
    pub fn holds(self, a: &Value, b: &Value) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CompareOp::Eq => a == b,
            CompareOp::Ne => a != b,
            _ => matches!(
                (a.compare(b), self),
                (Some(Less), CompareOp::Lt | CompareOp::Le)
                    | (Some(Equal), CompareOp::Le | CompareOp::Ge)
                    | (Some(Greater), CompareOp::Gt | CompareOp::Ge)
            ),
        }
    }
}

/// One precondition literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Positive(Pattern),
    /// Negation as failure: holds when no fact matches.
    Negated(Pattern),
    Test {
        op: CompareOp,
        lhs: Expr,
        rhs: Expr,
    },
    /// Binds a fresh variable to the value of an expression.
    Assign { var: Sym, expr: Expr },
}

/// Checks that a condition list is safe to evaluate left to right given the
/// variables bound beforehand. Returns the variables bound afterwards.
pub fn check_safety(
    conditions: &[Condition],
    bound: &BTreeSet<Sym>,
) -> Result<BTreeSet<Sym>, SafetyError> {
    let mut bound = bound.clone();
    for (index, cond) in conditions.iter().enumerate() {
        let unbound = |vars: BTreeSet<Sym>, bound: &BTreeSet<Sym>| {
            vars.into_iter().find(|v| !bound.contains(v))
        };
        match cond {
            Condition::Positive(p) => bound.extend(p.variables()),
            Condition::Negated(p) => {
                if let Some(var) = unbound(p.variables(), &bound) {
                    return Err(SafetyError { index, var });
                }
            }
            Condition::Test { lhs, rhs, .. } => {
                let mut vars = lhs.variables();
                vars.extend(rhs.variables());
                if let Some(var) = unbound(vars, &bound) {
                    return Err(SafetyError { index, var });
                }
            }
            Condition::Assign { var, expr } => {
                if let Some(v) = unbound(expr.variables(), &bound) {
                    return Err(SafetyError { index, var: v });
                }
                bound.insert(var.clone());
            }
        }
    }
    Ok(bound)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("condition {index} uses ?{var} before any positive condition binds it")]
pub struct SafetyError {
    pub index: usize,
    pub var: Sym,
}

/// Variable bindings produced by matching.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Binding(BTreeMap<Sym, Value>);

impl Binding {
    pub fn new() -> Binding {
        Binding::default()
    }

    pub fn get(&self, var: &Sym) -> Option<&Value> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: Sym, value: Value) -> Option<Value> {
        self.0.insert(var, value)
    }

    pub fn with(mut self, var: &str, value: Value) -> Binding {
        self.insert(Sym::new(var), value);
        self
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &Value)> {
        self.0.iter()
    }
}

/// An inference rule: `head` holds whenever `preconditions` match.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Axiom {
    pub head: Pattern,
    pub preconditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactError {
    #[error("malformed fact: {0:?} is not ground")]
    NonGround(Pattern),
    #[error("saturation would exceed the ceiling of {ceiling} facts")]
    SaturationOverflow { ceiling: usize },
}

/// The set of ground facts, indexed by predicate.
///
/// The per-predicate map is the only storage, so the index cannot drift
/// from the fact set. Iteration is ordered by predicate, then arguments.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Fact>", from = "Vec<Fact>")]
pub struct WorkingMemory {
    by_predicate: BTreeMap<Sym, BTreeMap<Vec<Value>, Provenance>>,
    len: usize,
}

impl From<WorkingMemory> for Vec<Fact> {
    fn from(wm: WorkingMemory) -> Self {
        wm.facts().collect()
    }
}

impl From<Vec<Fact>> for WorkingMemory {
    fn from(facts: Vec<Fact>) -> Self {
        let mut wm = WorkingMemory::new();
        for f in facts {
            wm.assert_fact(f);
        }
        wm
    }
}

impl WorkingMemory {
    pub fn new() -> WorkingMemory {
        WorkingMemory::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts a fact. Returns true if it was not present before. An asserted
    /// fact upgrades an inferred copy; the reverse never downgrades.
    pub fn assert_fact(&mut self, fact: Fact) -> bool {
        let slot = self.by_predicate.entry(fact.predicate).or_default();
        match slot.get_mut(&fact.args) {
            Some(existing) => {
                if fact.provenance == Provenance::Asserted {
                    *existing = Provenance::Asserted;
                }
                false
            }
            None => {
                slot.insert(fact.args, fact.provenance);
                self.len += 1;
                true
            }
        }
    }

    /// Asserts a pattern, rejecting it if it contains variables.
    pub fn assert_pattern(&mut self, p: &Pattern) -> Result<bool, FactError> {
        Ok(self.assert_fact(Fact::from_pattern(p)?))
    }

    /// Removes a fact. Absent facts are a no-op; returns whether it was present.
    pub fn retract(&mut self, predicate: &Sym, args: &[Value]) -> bool {
        let Some(slot) = self.by_predicate.get_mut(predicate) else {
            return false;
        };
        let removed = slot.remove(args).is_some();
        if removed {
            self.len -= 1;
            if slot.is_empty() {
                self.by_predicate.remove(predicate);
            }
        }
        removed
    }

    pub fn retract_fact(&mut self, fact: &Fact) -> bool {
        self.retract(&fact.predicate, &fact.args)
    }

    pub fn contains(&self, predicate: &Sym, args: &[Value]) -> bool {
        self.by_predicate
            .get(predicate)
            .is_some_and(|slot| slot.contains_key(args))
    }

    pub fn provenance(&self, predicate: &Sym, args: &[Value]) -> Option<Provenance> {
        self.by_predicate.get(predicate)?.get(args).copied()
    }

    /// Facts in deterministic order.
    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.by_predicate.iter().flat_map(|(p, slot)| {
            slot.iter().map(move |(args, prov)| Fact {
                predicate: p.clone(),
                args: args.clone(),
                provenance: *prov,
            })
        })
    }

    pub fn facts_of<'a>(&'a self, predicate: &Sym) -> impl Iterator<Item = &'a Vec<Value>> + 'a {
        self.by_predicate
            .get(predicate)
            .into_iter()
            .flat_map(|slot| slot.keys())
    }

    /// All bindings extending `seed` that satisfy every condition, in
    /// deterministic order.
    ///
    /// Conditions are evaluated left to right. A test or assignment whose
    /// expression fails to evaluate does not hold.
    pub fn matches(&self, conditions: &[Condition], seed: &Binding) -> Vec<Binding> {
        let mut out = Vec::new();
        self.match_from(conditions, seed.clone(), &mut out);
        out
    }

    /// Whether at least one binding satisfies the conditions.
    pub fn satisfiable(&self, conditions: &[Condition], seed: &Binding) -> bool {
        !self.matches(conditions, seed).is_empty()
    }

    fn match_from(&self, conditions: &[Condition], binding: Binding, out: &mut Vec<Binding>) {
        let Some((first, rest)) = conditions.split_first() else {
            out.push(binding);
            return;
        };
        match first {
            Condition::Positive(p) => {
                for args in self.facts_of(&p.predicate) {
                    if let Some(b) = p.unify(args, &binding) {
                        self.match_from(rest, b, out);
                    }
                }
            }
            Condition::Negated(p) => {
                let any = self
                    .facts_of(&p.predicate)
                    .any(|args| p.unify(args, &binding).is_some());
                if !any {
                    self.match_from(rest, binding, out);
                }
            }
            Condition::Test { op, lhs, rhs } => {
                if let (Ok(a), Ok(b)) = (lhs.eval(&binding), rhs.eval(&binding)) {
                    if op.holds(&a, &b) {
                        self.match_from(rest, binding, out);
                    }
                }
            }
            Condition::Assign { var, expr } => {
                if let Ok(v) = expr.eval(&binding) {
                    match binding.get(var) {
                        Some(existing) if *existing != v => {}
                        Some(_) => self.match_from(rest, binding, out),
                        None => {
                            let mut b = binding;
                            b.insert(var.clone(), v);
                            self.match_from(rest, b, out);
                        }
                    }
                }
            }
        }
    }

    /// Fires axioms to a least fixpoint, asserting heads as inferred facts.
    /// Returns the number of facts added.
    pub fn saturate(&mut self, axioms: &[Axiom]) -> Result<usize, FactError> {
        self.saturate_with_ceiling(axioms, DEFAULT_FACT_CEILING)
    }

    pub fn saturate_with_ceiling(
        &mut self,
        axioms: &[Axiom],
        ceiling: usize,
    ) -> Result<usize, FactError> {
        let mut added = 0;
        loop {
            let mut fresh: BTreeSet<(Sym, Vec<Value>)> = BTreeSet::new();
            for axiom in axioms {
                for b in self.matches(&axiom.preconditions, &Binding::new()) {
                    let args = axiom.head.ground(&b)?;
                    if !self.contains(&axiom.head.predicate, &args) {
                        fresh.insert((axiom.head.predicate.clone(), args));
                    }
                }
            }
            if fresh.is_empty() {
                return Ok(added);
            }
            if self.len + fresh.len() > ceiling {
                return Err(FactError::SaturationOverflow { ceiling });
            }
            for (predicate, args) in fresh {
                self.assert_fact(Fact {
                    predicate,
                    args,
                    provenance: Provenance::Inferred,
                });
                added += 1;
            }
        }
    }

    /// Drops every inferred fact and saturates again. Used after delete
    /// effects, since inferred facts are not truth-maintained.
    pub fn refresh(&mut self, axioms: &[Axiom]) -> Result<usize, FactError> {
        let mut len = 0;
        for slot in self.by_predicate.values_mut() {
            slot.retain(|_, prov| *prov == Provenance::Asserted);
            len += slot.len();
        }
        self.by_predicate.retain(|_, slot| !slot.is_empty());
        self.len = len;
        self.saturate(axioms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn fact(p: &str, args: Vec<Value>) -> Fact {
        Fact::new(p, args)
    }

    fn pos(p: &str, args: Vec<Term>) -> Condition {
        Condition::Positive(Pattern::new(p, args))
    }

    fn den_memory() -> WorkingMemory {
        let mut wm = WorkingMemory::new();
        wm.assert_fact(fact("den", vec![Value::sym("f1"), Value::Int(2)]));
        wm.assert_fact(fact("den", vec![Value::sym("f2"), Value::Int(4)]));
        wm
    }

    #[test]
    fn assert_is_idempotent() {
        let mut wm = WorkingMemory::new();
        let f = fact("field", vec![Value::sym("addFraction"), Value::text("1/2+1/4")]);
        assert!(wm.assert_fact(f.clone()));
        assert_eq!(wm.len(), 1);
        assert!(!wm.assert_fact(f));
        assert_eq!(wm.len(), 1);
    }

    #[test]
    fn non_ground_assert_is_malformed() {
        let mut wm = WorkingMemory::new();
        let p = Pattern::new("p", vec![Term::var("x")]);
        assert!(matches!(wm.assert_pattern(&p), Err(FactError::NonGround(_))));
        assert!(wm.is_empty());
    }

    #[test]
    fn retract_cases() {
        let f = fact("p", vec![Value::Int(1)]);
        let g = fact("q", vec![Value::Int(2)]);
        let mut wm = WorkingMemory::new();
        wm.assert_fact(f.clone());
        assert!(wm.retract_fact(&f));
        assert!(wm.is_empty());
        assert!(!wm.retract_fact(&f));
        assert!(wm.is_empty());

        wm.assert_fact(f.clone());
        wm.assert_fact(g.clone());
        wm.retract_fact(&f);
        assert_eq!(wm.facts().collect::<Vec<_>>(), vec![g]);
    }

    #[test]
    fn asserted_provenance_wins() {
        let mut wm = WorkingMemory::new();
        let mut inferred = fact("p", vec![]);
        inferred.provenance = Provenance::Inferred;
        wm.assert_fact(inferred.clone());
        wm.assert_fact(fact("p", vec![]));
        assert_eq!(wm.provenance(&Sym::new("p"), &[]), Some(Provenance::Asserted));
        wm.assert_fact(inferred);
        assert_eq!(wm.provenance(&Sym::new("p"), &[]), Some(Provenance::Asserted));
        assert_eq!(wm.len(), 1);
    }

    #[test]
    fn match_enumerates_in_order() {
        let wm = den_memory();
        let got = wm.matches(&[pos("den", vec![Term::var("f"), Term::var("d")])], &Binding::new());
        assert_eq!(
            got,
            vec![
                Binding::new().with("f", Value::sym("f1")).with("d", Value::Int(2)),
                Binding::new().with("f", Value::sym("f2")).with("d", Value::Int(4)),
            ]
        );
    }

    #[test]
    fn match_with_test() {
        let wm = den_memory();
        let conds = [
            pos("den", vec![Term::var("f"), Term::var("d")]),
            Condition::Test {
                op: CompareOp::Gt,
                lhs: Expr::var("d"),
                rhs: Expr::lit(2),
            },
        ];
        assert_eq!(
            wm.matches(&conds, &Binding::new()),
            vec![Binding::new().with("f", Value::sym("f2")).with("d", Value::Int(4))]
        );
    }

    #[test]
    fn unsafe_negation_is_rejected() {
        let conds = [Condition::Negated(Pattern::new(
            "den",
            vec![Term::sym("f3"), Term::var("d")],
        ))];
        let err = check_safety(&conds, &BTreeSet::new()).unwrap_err();
        assert_eq!(err.var, Sym::new("d"));
    }

    #[test]
    fn negation_and_assignment() {
        let wm = den_memory();
        let conds = [
            pos("den", vec![Term::var("f"), Term::var("d")]),
            Condition::Negated(Pattern::new("den", vec![Term::sym("f3"), Term::var("d")])),
            Condition::Assign {
                var: Sym::new("twice"),
                expr: Expr::bin(crate::expr::BinOp::Mul, Expr::var("d"), Expr::lit(2)),
            },
        ];
        let got = wm.matches(&conds, &Binding::new());
        assert_eq!(got.len(), 2);
        assert_eq!(got[1].get(&Sym::new("twice")), Some(&Value::Int(8)));
    }

    #[test]
    fn empty_conditions_yield_seed() {
        let wm = den_memory();
        let seed = Binding::new().with("x", Value::Int(1));
        assert_eq!(wm.matches(&[], &seed), vec![seed]);
    }

    #[test]
    fn mastery_axiom_fires() {
        // hand evaluation: 9/10 >= 8/10 holds
        let mut wm = WorkingMemory::new();
        wm.assert_fact(fact(
            "pMastery",
            vec![Value::sym("logProduct"), Value::rational(9, 10).unwrap()],
        ));
        let axiom = Axiom {
            head: Pattern::new("mastery", vec![Term::var("s"), Term::sym("high")]),
            preconditions: vec![
                pos("pMastery", vec![Term::var("s"), Term::var("p")]),
                Condition::Test {
                    op: CompareOp::Ge,
                    lhs: Expr::var("p"),
                    rhs: Expr::lit(Value::rational(4, 5).unwrap()),
                },
            ],
        };
        assert_eq!(wm.saturate(&[axiom]).unwrap(), 1);
        let m = Sym::new("mastery");
        let args = [Value::sym("logProduct"), Value::sym("high")];
        assert!(wm.contains(&m, &args));
        assert_eq!(wm.provenance(&m, &args), Some(Provenance::Inferred));
    }

    #[test]
    fn no_axioms_leaves_memory_unchanged() {
        let mut wm = den_memory();
        let before = wm.clone();
        assert_eq!(wm.saturate(&[]).unwrap(), 0);
        assert_eq!(wm, before);
    }

    fn chain_axioms() -> Vec<Axiom> {
        vec![
            Axiom {
                head: Pattern::new("a", vec![]),
                preconditions: vec![pos("b", vec![])],
            },
            Axiom {
                head: Pattern::new("b", vec![]),
                preconditions: vec![pos("c", vec![])],
            },
        ]
    }

    #[test]
    fn chained_axioms_reach_fixpoint() {
        let mut wm = WorkingMemory::new();
        wm.assert_fact(fact("c", vec![]));
        assert_eq!(wm.saturate(&chain_axioms()).unwrap(), 2);
        assert!(wm.contains(&Sym::new("a"), &[]));
        assert!(wm.contains(&Sym::new("b"), &[]));
    }

    #[test]
    fn saturation_ceiling() {
        let mut wm = WorkingMemory::new();
        wm.assert_fact(fact("c", vec![]));
        assert_eq!(
            wm.saturate_with_ceiling(&chain_axioms(), 2),
            Err(FactError::SaturationOverflow { ceiling: 2 })
        );
    }

    #[test]
    fn refresh_drops_stale_inferences() {
        let mut wm = WorkingMemory::new();
        wm.assert_fact(fact("c", vec![]));
        wm.saturate(&chain_axioms()).unwrap();
        wm.retract(&Sym::new("c"), &[]);
        wm.refresh(&chain_axioms()).unwrap();
        assert!(wm.is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_fact() -> impl Strategy<Value = Fact> {
            (0..3usize, proptest::collection::vec(0i64..4, 0..3)).prop_map(|(p, args)| {
                Fact::new(["p", "q", "r"][p], args.into_iter().map(Value::Int).collect())
            })
        }

        fn axiom_set() -> Vec<Axiom> {
            // r(x) <- p(x); q(x, y) <- r(x), p(y), x < y; s() <- q(x, y), not t(x)
            let v = Term::var;
            vec![
                Axiom {
                    head: Pattern::new("r", vec![v("x")]),
                    preconditions: vec![pos("p", vec![v("x")])],
                },
                Axiom {
                    head: Pattern::new("q", vec![v("x"), v("y")]),
                    preconditions: vec![
                        pos("r", vec![v("x")]),
                        pos("p", vec![v("y")]),
                        Condition::Test {
                            op: CompareOp::Lt,
                            lhs: Expr::var("x"),
                            rhs: Expr::var("y"),
                        },
                    ],
                },
                Axiom {
                    head: Pattern::new("s", vec![]),
                    preconditions: vec![
                        pos("q", vec![v("x"), v("y")]),
                        Condition::Negated(Pattern::new("t", vec![v("x")])),
                    ],
                },
            ]
        }

        proptest! {
            #[test]
            fn assert_and_retract_idempotent(facts in proptest::collection::vec(small_fact(), 0..12)) {
                let mut once = WorkingMemory::new();
                let mut twice = WorkingMemory::new();
                for f in &facts {
                    once.assert_fact(f.clone());
                    twice.assert_fact(f.clone());
                    twice.assert_fact(f.clone());
                }
                prop_assert_eq!(&once, &twice);
                prop_assert_eq!(once.len(), once.facts().count());
                if let Some(f) = facts.first() {
                    once.retract_fact(f);
                    twice.retract_fact(f);
                    twice.retract_fact(f);
                    prop_assert_eq!(&once, &twice);
                }
            }

            #[test]
            fn exact_pattern_matches_iff_present(facts in proptest::collection::vec(small_fact(), 0..10), probe in small_fact()) {
                let mut wm = WorkingMemory::new();
                for f in facts {
                    wm.assert_fact(f);
                }
                let found = wm.satisfiable(&[Condition::Positive(probe.to_pattern())], &Binding::new());
                prop_assert_eq!(found, wm.contains(&probe.predicate, &probe.args));
            }

            #[test]
            fn saturation_is_monotone_idempotent_and_order_free(
                facts in proptest::collection::vec(small_fact(), 0..10),
                rotate in 0usize..3,
            ) {
                let mut wm = WorkingMemory::new();
                for f in facts {
                    wm.assert_fact(f);
                }
                let before: Vec<Fact> = wm.facts().collect();
                let axioms = axiom_set();
                let mut a = wm.clone();
                a.saturate(&axioms).unwrap();
                for f in &before {
                    prop_assert!(a.contains(&f.predicate, &f.args));
                }
                let mut again = a.clone();
                prop_assert_eq!(again.saturate(&axioms).unwrap(), 0);
                prop_assert_eq!(&again, &a);

                let mut permuted = axioms.clone();
                permuted.rotate_left(rotate);
                permuted.reverse();
                let mut b = wm.clone();
                b.saturate(&permuted).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
