//! Exact-arithmetic expressions used by operator actions, tests and
//! assignments.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Zero};
use serde::{Deserialize, Serialize};

use crate::facts::Binding;
use crate::value::{Rational, Sym, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Lit(Value),
    Var(Sym),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Built-in functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Gcd,
    Lcm,
    /// `intLog(base, n)`: the integer k with base^k = n.
    IntLog,
    /// Numerator of a number (integers are their own numerator).
    Num,
    /// Denominator of a number (1 for integers).
    Den,
    /// `frac(a, b)`: the fraction a/b of two integers.
    Frac,
    /// Formats a number as `a/b` (or `n`) text.
    Fmt,
    /// Joins the display forms of its arguments into text.
    Concat,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Gcd,
        Func::Lcm,
        Func::IntLog,
        Func::Num,
        Func::Den,
        Func::Frac,
        Func::Fmt,
        Func::Concat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Gcd => "gcd",
            Func::Lcm => "lcm",
            Func::IntLog => "intLog",
            Func::Num => "num",
            Func::Den => "den",
            Func::Frac => "frac",
            Func::Fmt => "fmt",
            Func::Concat => "concat",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// `None` means variadic (at least one argument).
    pub fn arity(self) -> Option<usize> {
        match self {
            Func::Gcd | Func::Lcm | Func::IntLog | Func::Frac => Some(2),
            Func::Num | Func::Den | Func::Fmt => Some(1),
            Func::Concat => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable ?{0}")]
    Unbound(Sym),
    #[error("division by zero")]
    DivisionByZero,
    #[error("intLog({base}, {n}) is undefined: {n} is not an integer power of {base}")]
    IntLogDomain { base: Value, n: Value },
    #[error("{op} expects {expected}, got {found}")]
    Type {
        op: &'static str,
        expected: &'static str,
        found: Value,
    },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("{func} expects {expected} argument(s), got {found}")]
    Arity {
        func: &'static str,
        expected: usize,
        found: usize,
    },
}

impl Expr {
    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Lit(v.into())
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(Sym::new(name))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn variables(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn eval(&self, binding: &Binding) -> Result<Value, EvalError> {
        match self {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(name) => binding
                .get(name)
                .cloned()
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(e) => {
                let v = number("-", e.eval(binding)?)?;
                let zero = Rational::zero();
                zero.checked_sub(&v)
                    .map(Value::from_ratio)
                    .ok_or(EvalError::Overflow("-"))
            }
            Expr::Bin(op, a, b) => {
                let x = number(op.symbol(), a.eval(binding)?)?;
                let y = number(op.symbol(), b.eval(binding)?)?;
                arith(*op, x, y)
            }
            Expr::Call(f, args) => {
                if let Some(n) = f.arity() {
                    if args.len() != n {
                        return Err(EvalError::Arity {
                            func: f.name(),
                            expected: n,
                            found: args.len(),
                        });
                    }
                } else if args.is_empty() {
                    return Err(EvalError::Arity {
                        func: f.name(),
                        expected: 1,
                        found: 0,
                    });
                }
                let vals = args
                    .iter()
                    .map(|a| a.eval(binding))
                    .collect::<Result<Vec<_>, _>>()?;
                call(*f, vals)
            }
        }
    }
}

fn number(op: &'static str, v: Value) -> Result<Rational, EvalError> {
    v.as_ratio().ok_or(EvalError::Type {
        op,
        expected: "a number",
        found: v,
    })
}

fn integer(op: &'static str, v: Value) -> Result<i64, EvalError> {
    v.as_int().ok_or(EvalError::Type {
        op,
        expected: "an integer",
        found: v,
    })
}

fn arith(op: BinOp, x: Rational, y: Rational) -> Result<Value, EvalError> {
    let r = match op {
        BinOp::Add => x.checked_add(&y),
        BinOp::Sub => x.checked_sub(&y),
        BinOp::Mul => x.checked_mul(&y),
        BinOp::Div => {
            if y.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            x.checked_div(&y)
        }
    };
    r.map(Value::from_ratio)
        .ok_or(EvalError::Overflow(op.symbol()))
}

fn call(f: Func, mut args: Vec<Value>) -> Result<Value, EvalError> {
    let name = f.name();
    match f {
        Func::Gcd | Func::Lcm => {
            let b = integer(name, args.pop().unwrap_or(Value::Int(0)))?;
            let a = integer(name, args.pop().unwrap_or(Value::Int(0)))?;
            let (a, b) = (
                a.checked_abs().ok_or(EvalError::Overflow(name))?,
                b.checked_abs().ok_or(EvalError::Overflow(name))?,
            );
            if f == Func::Gcd {
                Ok(Value::Int(a.gcd(&b)))
            } else if a == 0 || b == 0 {
                Ok(Value::Int(0))
            } else {
                (a / a.gcd(&b))
                    .checked_mul(b)
                    .map(Value::Int)
                    .ok_or(EvalError::Overflow(name))
            }
        }
        Func::IntLog => {
            let n_val = args.pop().unwrap_or(Value::Int(0));
            let b_val = args.pop().unwrap_or(Value::Int(0));
            let domain_err = || EvalError::IntLogDomain {
                base: b_val.clone(),
                n: n_val.clone(),
            };
            let (Some(base), Some(n)) = (b_val.as_int(), n_val.as_int()) else {
                return Err(domain_err());
            };
            if base < 2 || n < 1 {
                return Err(domain_err());
            }
            let mut k = 0i64;
            let mut acc = 1i64;
            while acc < n {
                acc = match acc.checked_mul(base) {
                    Some(a) => a,
                    None => return Err(domain_err()),
                };
                k += 1;
            }
            if acc == n {
                Ok(Value::Int(k))
            } else {
                Err(domain_err())
            }
        }
        Func::Num => {
            let r = number(name, args.remove(0))?;
            Ok(Value::Int(*r.numer()))
        }
        Func::Den => {
            let r = number(name, args.remove(0))?;
            Ok(Value::Int(*r.denom()))
        }
        Func::Frac => {
            let d = integer(name, args.pop().unwrap_or(Value::Int(0)))?;
            let n = integer(name, args.pop().unwrap_or(Value::Int(0)))?;
            Value::rational(n, d).map_err(|_| EvalError::DivisionByZero)
        }
        Func::Fmt => {
            let v = args.remove(0);
            number(name, v.clone())?;
            Ok(Value::Text(v.to_string()))
        }
        Func::Concat => Ok(Value::Text(args.iter().map(|v| v.to_string()).collect())),
    }
}

impl fmt::Display for Expr {
    /// Canonical form: binary operations fully parenthesized, negation as
    /// `-(e)`. Parsing this form yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{}", crate::domain::LiteralDisplay(v)),
            Expr::Var(v) => write!(f, "?{v}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(e: Expr) -> Result<Value, EvalError> {
        e.eval(&Binding::new())
    }

    fn frac(n: i64, d: i64) -> Expr {
        Expr::call(Func::Frac, vec![Expr::lit(n), Expr::lit(d)])
    }

    #[test]
    fn lcm_of_two_and_four() {
        // oracle: smallest positive multiple of 2 that 4 divides
        let oracle = (1..).map(|k| 2 * k).find(|m| m % 4 == 0).unwrap();
        assert_eq!(oracle, 4);
        let e = Expr::call(Func::Lcm, vec![Expr::lit(2), Expr::lit(4)]);
        assert_eq!(ev(e), Ok(Value::Int(oracle)));
    }

    #[test]
    fn half_plus_quarter_is_three_quarters() {
        // oracle: cross-multiplication, reduced by gcd
        let ((a, b), (c, d)) = ((1i64, 2i64), (1i64, 4i64));
        let (n, d) = (a * d + c * b, b * d);
        let g = num_integer::gcd(n, d);
        assert_eq!((n / g, d / g), (3, 4));
        let e = Expr::bin(BinOp::Add, frac(1, 2), frac(1, 4));
        assert_eq!(ev(e), Ok(Value::rational(3, 4).unwrap()));
    }

    #[test]
    fn int_log_of_thirty_two() {
        // oracle: exponentiation
        assert_eq!(2i64.pow(5), 32);
        let e = Expr::call(Func::IntLog, vec![Expr::lit(2), Expr::lit(32)]);
        assert_eq!(ev(e), Ok(Value::Int(5)));
        let e = Expr::call(Func::IntLog, vec![Expr::lit(10), Expr::lit(1)]);
        assert_eq!(ev(e), Ok(Value::Int(0)));
    }

    #[test]
    fn int_log_out_of_domain_is_an_error() {
        let e = Expr::call(Func::IntLog, vec![Expr::lit(2), Expr::lit(6)]);
        assert!(matches!(ev(e), Err(EvalError::IntLogDomain { .. })));
        let e = Expr::call(Func::IntLog, vec![Expr::lit(1), Expr::lit(1)]);
        assert!(matches!(ev(e), Err(EvalError::IntLogDomain { .. })));
        let e = Expr::call(Func::IntLog, vec![Expr::lit(2), Expr::lit(i64::MAX)]);
        assert!(matches!(ev(e), Err(EvalError::IntLogDomain { .. })));
    }

    #[test]
    fn errors_are_distinguished() {
        assert_eq!(ev(Expr::var("x")), Err(EvalError::Unbound(Sym::new("x"))));
        assert_eq!(
            ev(Expr::bin(BinOp::Div, Expr::lit(1), Expr::lit(0))),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(ev(frac(1, 0)), Err(EvalError::DivisionByZero));
        assert!(matches!(
            ev(Expr::bin(BinOp::Mul, Expr::lit(i64::MAX), Expr::lit(2))),
            Err(EvalError::Overflow(_))
        ));
        assert!(matches!(
            ev(Expr::bin(BinOp::Add, Expr::lit(Value::text("a")), Expr::lit(1))),
            Err(EvalError::Type { .. })
        ));
    }

    #[test]
    fn fraction_parts_and_formatting() {
        let three_quarters = Expr::lit(Value::rational(3, 4).unwrap());
        assert_eq!(ev(Expr::call(Func::Num, vec![three_quarters.clone()])), Ok(Value::Int(3)));
        assert_eq!(ev(Expr::call(Func::Den, vec![three_quarters.clone()])), Ok(Value::Int(4)));
        assert_eq!(ev(Expr::call(Func::Den, vec![Expr::lit(7)])), Ok(Value::Int(1)));
        assert_eq!(ev(Expr::call(Func::Fmt, vec![three_quarters])), Ok(Value::text("3/4")));
        let e = Expr::call(
            Func::Concat,
            vec![Expr::lit(Value::text("log")), Expr::lit(2), Expr::lit(Value::text("(32)"))],
        );
        assert_eq!(ev(e), Ok(Value::text("log2(32)")));
    }

    #[test]
    fn division_of_integers_is_exact() {
        let e = Expr::bin(BinOp::Div, Expr::lit(4), Expr::lit(2));
        assert_eq!(ev(e), Ok(Value::Int(2)));
        let e = Expr::bin(BinOp::Div, Expr::lit(2), Expr::lit(4));
        assert_eq!(ev(e), Ok(Value::rational(1, 2).unwrap()));
    }

    proptest::proptest! {
        #[test]
        fn sum_times_denominators_is_integral(a in -50i64..50, b in 1i64..50, c in -50i64..50, d in 1i64..50) {
            let sum = Expr::bin(BinOp::Add, frac(a, b), frac(c, d));
            let scaled = Expr::bin(BinOp::Mul, sum, Expr::lit(b * d));
            let v = ev(scaled).unwrap();
            proptest::prop_assert!(matches!(v, Value::Int(_)), "{v:?}");
            proptest::prop_assert_eq!(v, Value::Int(a * d + c * b));
        }
    }
}
