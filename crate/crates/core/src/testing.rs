//! Random well-formed domains for property tests and fuzzing.
//!
//! Every generated domain passes the load-time checks, so it can be built
//! with [`Domain::new`] and fed to the parser and serializer. Domains are
//! syntactically varied (quoted symbols, escapes, rationals, negative
//! literals, nested expressions) but are not meant to be solvable.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{ActionTemplate, Domain, Method, Operator, SubtaskOrder, TaskHead};
use crate::expr::{BinOp, Expr, Func};
use crate::facts::{Axiom, CompareOp, Condition, Pattern, Term};
use crate::value::{Sym, Value};

const BASE_PREDICATES: [&str; 4] = ["field", "given", "hasPart", "done_x"];
const DERIVED_PREDICATES: [&str; 2] = ["derivedA", "derived-b"];
const ODD_SYMBOLS: [&str; 8] = ["left", "true", "a b", "x-", "π", "back`tick", "", "9lives"];
const TEXT_CHARS: [char; 10] = ['a', 'Z', ' ', '"', '\\', '\n', '\t', '`', 'é', '₂'];

struct Gen {
    rng: ChaCha8Rng,
    next_var: usize,
}

impl Gen {
    fn fresh_var(&mut self) -> Sym {
        self.next_var += 1;
        Sym::new(&format!("v{}", self.next_var))
    }

    fn value(&mut self) -> Value {
        match self.rng.gen_range(0..6) {
            0 => Value::sym(&format!("s{}", self.rng.gen_range(0..5))),
            1 => Value::sym(ODD_SYMBOLS.choose(&mut self.rng).copied().unwrap_or("s")),
            2 => {
                let len = self.rng.gen_range(0..6);
                Value::Text(
                    (0..len)
                        .map(|_| *TEXT_CHARS.choose(&mut self.rng).unwrap_or(&'a'))
                        .collect(),
                )
            }
            3 => Value::Int(self.rng.gen_range(-1_000_000..1_000_000)),
            4 => {
                let d = self.rng.gen_range(1..50);
                Value::rational(self.rng.gen_range(-100..100), d).unwrap_or(Value::Int(0))
            }
            _ => Value::Bool(self.rng.gen()),
        }
    }

    fn term(&mut self, bound: &[Sym]) -> Term {
        if !bound.is_empty() && self.rng.gen_bool(0.5) {
            Term::Var(bound.choose(&mut self.rng).cloned().unwrap_or_else(|| Sym::new("v0")))
        } else {
            Term::Value(self.value())
        }
    }

    fn expr(&mut self, bound: &[Sym], depth: usize) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.4);
        if leaf {
            return match bound.choose(&mut self.rng) {
                Some(v) if self.rng.gen_bool(0.5) => Expr::Var(v.clone()),
                _ => Expr::Lit(self.value()),
            };
        }
        match self.rng.gen_range(0..3) {
            0 => Expr::Neg(Box::new(self.expr(bound, depth - 1))),
            1 => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]
                    .choose(&mut self.rng)
                    .unwrap_or(&BinOp::Add);
                Expr::bin(op, self.expr(bound, depth - 1), self.expr(bound, depth - 1))
            }
            _ => {
                let f = *Func::ALL.choose(&mut self.rng).unwrap_or(&Func::Gcd);
                let arity = f.arity().unwrap_or_else(|| self.rng.gen_range(1..4));
                let args = (0..arity).map(|_| self.expr(bound, depth - 1)).collect();
                Expr::call(f, args)
            }
        }
    }

    fn pattern(&mut self, predicate: &str, bound: &[Sym], fresh: bool) -> (Pattern, Vec<Sym>) {
        let arity = self.rng.gen_range(0..4);
        let mut new = Vec::new();
        let args = (0..arity)
            .map(|_| {
                if fresh && self.rng.gen_bool(0.4) {
                    let v = self.fresh_var();
                    new.push(v.clone());
                    Term::Var(v)
                } else {
                    self.term(bound)
                }
            })
            .collect();
        (Pattern::new(predicate, args), new)
    }

    /// Conditions evaluable left to right; extends `bound` as it goes.
    fn conditions(&mut self, bound: &mut Vec<Sym>, predicates: &[&str]) -> Vec<Condition> {
        let n = self.rng.gen_range(0..5);
        let mut out = Vec::new();
        for _ in 0..n {
            let pred = predicates.choose(&mut self.rng).copied().unwrap_or("given");
            match self.rng.gen_range(0..4) {
                0 => {
                    let (p, new) = self.pattern(pred, bound, true);
                    bound.extend(new);
                    out.push(Condition::Positive(p));
                }
                1 => {
                    let base = BASE_PREDICATES.choose(&mut self.rng).copied().unwrap_or("given");
                    let (p, _) = self.pattern(base, bound, false);
                    out.push(Condition::Negated(p));
                }
                2 => {
                    let op = *[
                        CompareOp::Eq,
                        CompareOp::Ne,
                        CompareOp::Lt,
                        CompareOp::Le,
                        CompareOp::Gt,
                        CompareOp::Ge,
                    ]
                    .choose(&mut self.rng)
                    .unwrap_or(&CompareOp::Eq);
                    out.push(Condition::Test {
                        op,
                        lhs: self.expr(bound, 2),
                        rhs: self.expr(bound, 2),
                    });
                }
                _ => {
                    let expr = self.expr(bound, 3);
                    let var = self.fresh_var();
                    bound.push(var.clone());
                    out.push(Condition::Assign { var, expr });
                }
            }
        }
        out
    }

    fn head(&mut self, name: &str, arity: usize) -> (TaskHead, Vec<Sym>) {
        let mut vars = Vec::new();
        let args = (0..arity)
            .map(|_| {
                if self.rng.gen_bool(0.8) {
                    let v = self.fresh_var();
                    vars.push(v.clone());
                    Term::Var(v)
                } else {
                    Term::Value(self.value())
                }
            })
            .collect();
        (TaskHead::new(name, args), vars)
    }

    fn skill(&mut self, skills: &[Sym]) -> Option<Sym> {
        if self.rng.gen_bool(0.3) {
            None
        } else {
            skills.choose(&mut self.rng).cloned()
        }
    }
}

/// A random domain that satisfies every load-time check. Deterministic in
/// `seed`.
pub fn random_domain(seed: u64) -> Domain {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_var: 0,
    };
    let all_predicates: Vec<&str> = BASE_PREDICATES.iter().chain(&DERIVED_PREDICATES).copied().collect();

    let skill_ids: Vec<Sym> = (0..g.rng.gen_range(0..4))
        .map(|i| Sym::new(&format!("skill{i}")))
        .collect();
    let skills: BTreeMap<Sym, String> = skill_ids
        .iter()
        .map(|s| {
            let len = g.rng.gen_range(0..8);
            let display: String = (0..len)
                .map(|_| *TEXT_CHARS.choose(&mut g.rng).unwrap_or(&'a'))
                .collect();
            (s.clone(), display)
        })
        .collect();

    let compound: Vec<(String, usize)> = (0..g.rng.gen_range(1..4))
        .map(|i| (format!("task{i}"), g.rng.gen_range(0..3)))
        .collect();
    let primitive: Vec<(String, usize)> = (0..g.rng.gen_range(1..4))
        .map(|i| (format!("step-{i}"), g.rng.gen_range(0..3)))
        .collect();
    let tasks: Vec<(String, usize)> = compound.iter().chain(&primitive).cloned().collect();

    let (root_name, root_arity) = compound[0].clone();
    let (root, _) = g.head(&root_name, root_arity);

    let mut methods = Vec::new();
    for (name, arity) in &compound {
        for k in 0..g.rng.gen_range(1..3) {
            let (head, mut bound) = g.head(name, *arity);
            let preconditions = g.conditions(&mut bound, &all_predicates);
            let subtasks = (0..g.rng.gen_range(1..4))
                .map(|_| {
                    let (sub, sub_arity) = tasks.choose(&mut g.rng).cloned().unwrap_or((name.clone(), *arity));
                    TaskHead::new(&sub, (0..sub_arity).map(|_| g.term(&bound)).collect())
                })
                .collect();
            let order = if g.rng.gen_bool(0.3) {
                SubtaskOrder::Unordered
            } else {
                SubtaskOrder::Sequential
            };
            methods.push(Method {
                name: Sym::new(&format!("{name}-m{k}")),
                head,
                preconditions,
                subtasks,
                order,
                skill: g.skill(&skill_ids),
            });
        }
    }

    let mut operators = Vec::new();
    for (name, arity) in &primitive {
        let (head, mut bound) = g.head(name, *arity);
        let preconditions = g.conditions(&mut bound, &all_predicates);
        let field = if !bound.is_empty() && g.rng.gen_bool(0.3) {
            Term::Var(bound.choose(&mut g.rng).cloned().unwrap_or_else(|| Sym::new("v0")))
        } else {
            Term::Value(Value::sym(&format!("{name}Field")))
        };
        let value = g.expr(&bound, 3);
        let effects = |g: &mut Gen| {
            (0..g.rng.gen_range(0..3))
                .map(|_| {
                    let pred = BASE_PREDICATES.choose(&mut g.rng).copied().unwrap_or("given");
                    g.pattern(pred, &bound, false).0
                })
                .collect::<Vec<_>>()
        };
        let add = effects(&mut g);
        let delete = effects(&mut g);
        operators.push(Operator {
            name: Sym::new(&format!("op-{name}")),
            head,
            preconditions,
            action: ActionTemplate { field, value },
            add,
            delete,
            skill: g.skill(&skill_ids),
        });
    }

    let mut axioms = Vec::new();
    for _ in 0..g.rng.gen_range(0..3) {
        let mut bound = Vec::new();
        let base: Vec<&str> = BASE_PREDICATES.to_vec();
        let preconditions = g.conditions(&mut bound, &base);
        let pred = DERIVED_PREDICATES.choose(&mut g.rng).copied().unwrap_or("derivedA");
        let (head, _) = g.pattern(pred, &bound, false);
        axioms.push(Axiom { head, preconditions });
    }

    let name = Sym::new(&format!("gen-{}", seed % 1000));
    Domain::new(name, skills, root, methods, operators, axioms)
        .unwrap_or_else(|e| panic!("generated domain {seed} failed to load: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(random_domain(7), random_domain(7));
    }
}
