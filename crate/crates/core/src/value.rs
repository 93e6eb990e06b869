//! Ground values carried by facts, task arguments and student actions.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational scalar used for all tutor arithmetic.
pub type Rational = Ratio<i64>;

/// An interned-by-reference symbol. Cloning is a pointer copy.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(name: &str) -> Self {
        Sym(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}

impl From<String> for Sym {
    fn from(s: String) -> Self {
        Sym(Arc::from(s))
    }
}

impl AsRef<str> for Sym {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Sym {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Sym {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Sym::from)
    }
}

/// A ground value.
///
/// Rationals are kept in lowest terms with a positive denominator, and a
/// rational whose denominator is 1 is always represented as [`Value::Int`].
/// Equality is structural: values of different kinds never compare equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "ValueRepr", into = "ValueRepr")]
pub enum Value {
    Symbol(Sym),
    Text(String),
    Int(i64),
    Rational(Rational),
    Bool(bool),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ValueError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("malformed rational literal {0:?}")]
    MalformedRational(String),
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Symbol(Sym::new(name))
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn int(n: i64) -> Value {
        Value::Int(n)
    }

    /// Builds `numer/denom` in canonical form.
    pub fn rational(numer: i64, denom: i64) -> Result<Value, ValueError> {
        if denom == 0 {
            return Err(ValueError::ZeroDenominator);
        }
        Ok(Value::from_ratio(Rational::new(numer, denom)))
    }

    /// Canonicalizes a ratio: integral ratios become `Int`.
    pub fn from_ratio(r: Rational) -> Value {
        if r.is_integer() {
            Value::Int(r.to_integer())
        } else {
            Value::Rational(r)
        }
    }

    /// Numeric view of the value, if it is a number.
    pub fn as_ratio(&self) -> Option<Rational> {
        match self {
            Value::Int(n) => Some(Rational::from_integer(*n)),
            Value::Rational(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Sym> {
        match self {
            Value::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Symbol(_) => "symbol",
            Value::Text(_) => "text",
            Value::Int(_) => "integer",
            Value::Rational(_) => "rational",
            Value::Bool(_) => "boolean",
        }
    }

    /// Ordering used by comparison tests. Numbers compare numerically across
    /// integer/rational; texts and symbols lexicographically within their
    /// kind. Anything else is incomparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self.as_ratio(), other.as_ratio()) {
            (Some(a), Some(b)) => Some(a.cmp(&b)),
            _ => match (self, other) {
                (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
                (Value::Symbol(a), Value::Symbol(b)) => Some(a.cmp(b)),
                (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
                _ => None,
            },
        }
    }

    /// Interprets text typed into a tutor field.
    ///
    /// Integers and `a/b` fractions become numbers (so `2/4` equals `1/2`);
    /// anything else becomes normalized text: whitespace removed, lowercase,
    /// `×`/`·` read as `*`, subscript digits read as digits.
    pub fn parse_input(input: &str) -> Value {
        let normalized = normalize_text(input);
        if let Some(v) = parse_number(&normalized) {
            return v;
        }
        Value::Text(normalized)
    }

    /// True if a student's `input` counts as this expected value. Numbers
    /// and symbols must be equal; text is compared in normalized form.
    pub fn accepts(&self, input: &Value) -> bool {
        match (self, input) {
            (Value::Text(a), Value::Text(b)) => normalize_text(a) == normalize_text(b),
            (Value::Symbol(a), Value::Text(b)) => normalize_text(a.as_str()) == normalize_text(b),
            _ => self == input,
        }
    }

    /// Converts a float probability into an exact rational at the given
    /// granularity (e.g. 10_000 for four decimal places).
    pub fn from_probability(p: f64, granularity: i64) -> Value {
        let scaled = (p * granularity as f64).round();
        let numer = scaled.to_i64().unwrap_or(0).clamp(0, granularity);
        Value::from_ratio(Rational::new(numer, granularity))
    }
}

fn normalize_text(input: &str) -> String {
    input
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '×' | '·' | '⋅' => '*',
            '₀'..='₉' => char::from_digit(c as u32 - '₀' as u32, 10).unwrap_or(c),
            _ => c,
        })
        .flat_map(char::to_lowercase)
        .collect()
}

fn parse_number(s: &str) -> Option<Value> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.parse().ok()?;
        let d: i64 = d.parse().ok()?;
        return Value::rational(n, d).ok();
    }
    s.parse::<i64>().ok().map(Value::Int)
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Sym> for Value {
    fn from(s: Sym) -> Self {
        Value::Symbol(s)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Symbol(s) => write!(f, "{s}"),
            Value::Text(t) => f.write_str(t),
            Value::Int(n) => write!(f, "{n}"),
            Value::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Wire form: `{"int": 4}`, `{"rat": "3/4"}`, `{"sym": "left"}` ...
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ValueRepr {
    Sym(String),
    Text(String),
    Int(i64),
    Rat(String),
    Bool(bool),
}

impl From<Value> for ValueRepr {
    fn from(v: Value) -> Self {
        match v {
            Value::Symbol(s) => ValueRepr::Sym(s.as_str().to_owned()),
            Value::Text(t) => ValueRepr::Text(t),
            Value::Int(n) => ValueRepr::Int(n),
            Value::Rational(r) => ValueRepr::Rat(format!("{}/{}", r.numer(), r.denom())),
            Value::Bool(b) => ValueRepr::Bool(b),
        }
    }
}

impl TryFrom<ValueRepr> for Value {
    type Error = ValueError;

    fn try_from(repr: ValueRepr) -> Result<Self, Self::Error> {
        Ok(match repr {
            ValueRepr::Sym(s) => Value::Symbol(Sym::from(s)),
            ValueRepr::Text(t) => Value::Text(t),
            ValueRepr::Int(n) => Value::Int(n),
            ValueRepr::Rat(s) => {
                let (n, d) = s
                    .split_once('/')
                    .ok_or_else(|| ValueError::MalformedRational(s.clone()))?;
                let n = n.parse().map_err(|_| ValueError::MalformedRational(s.clone()))?;
                let d = d.parse().map_err(|_| ValueError::MalformedRational(s.clone()))?;
                Value::rational(n, d)?
            }
            ValueRepr::Bool(b) => Value::Bool(b),
        })
    }
}
