//! Built-in domains and a seeded problem generator for them.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{parse_domain, Domain, GroundTask};
use crate::facts::Fact;
use crate::tracer::init_trace;
use crate::value::Value;

pub const FRACTIONS_SOURCE: &str = include_str!("../content/fractions.htn");
pub const LOGARITHMS_SOURCE: &str = include_str!("../content/logarithms.htn");

pub const FRACTIONS: &str = "fractions";
pub const LOGARITHMS: &str = "logarithms";

/// Allowed denominators for generated fraction problems.
pub const DENOMINATORS: std::ops::RangeInclusive<i64> = 2..=12;
/// Allowed numerators for fraction problems.
pub const NUMERATORS: std::ops::RangeInclusive<i64> = 0..=100;
pub const LOG_BASES: [i64; 4] = [2, 3, 5, 10];
/// Largest exponent a logarithm argument may have.
pub const MAX_LOG_EXPONENT: u32 = 6;

/// The shipped fraction and logarithm domains.
pub fn builtin_domains() -> Vec<Domain> {
    [FRACTIONS_SOURCE, LOGARITHMS_SOURCE]
        .into_iter()
        .map(|src| parse_domain(src).expect("built-in domain parses"))
        .collect()
}

pub fn builtin_domain(name: &str) -> Option<Domain> {
    builtin_domains().into_iter().find(|d| d.name.as_str() == name)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemParams {
    /// `left.0/left.1 + right.0/right.1`
    Fraction { left: (i64, i64), right: (i64, i64) },
    /// `log_base(left) + log_base(right)`
    Logarithm { base: i64, left: i64, right: i64 },
}

impl fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemParams::Fraction { left, right } => {
                write!(f, "{}/{}+{}/{}", left.0, left.1, right.0, right.1)
            }
            ProblemParams::Logarithm { base, left, right } => {
                write!(f, "log{base}({left})+log{base}({right})")
            }
        }
    }
}

/// What to generate. Without explicit parameters, the seed picks them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: String,
    #[serde(default)]
    pub params: Option<ProblemParams>,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn random(domain: &str, seed: u64) -> ProblemSpec {
        ProblemSpec {
            domain: domain.to_owned(),
            params: None,
            seed,
        }
    }

    /// Reads `1/2+1/4`, `log2(4)+log2(8)` or `seed=N`.
    pub fn parse(domain: &str, text: &str) -> Result<ProblemSpec, ProblemError> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(seed) = compact.strip_prefix("seed=") {
            let seed = seed
                .parse()
                .map_err(|_| ProblemError::Malformed(text.to_owned()))?;
            return Ok(ProblemSpec::random(domain, seed));
        }
        let params = match domain {
            FRACTIONS => parse_fraction_sum(&compact),
            LOGARITHMS => parse_log_sum(&compact),
            other => return Err(ProblemError::UnknownDomain(other.to_owned())),
        }
        .ok_or_else(|| ProblemError::Malformed(text.to_owned()))?;
        Ok(ProblemSpec {
            domain: domain.to_owned(),
            params: Some(params),
            seed: 0,
        })
    }
}

fn parse_fraction_sum(s: &str) -> Option<ProblemParams> {
    let (a, b) = s.split_once('+')?;
    let frac = |t: &str| -> Option<(i64, i64)> {
        let (n, d) = t.split_once('/')?;
        Some((n.parse().ok()?, d.parse().ok()?))
    };
    Some(ProblemParams::Fraction {
        left: frac(a)?,
        right: frac(b)?,
    })
}

fn parse_log_sum(s: &str) -> Option<ProblemParams> {
    let (a, b) = s.split_once('+')?;
    let term = |t: &str| -> Option<(i64, i64)> {
        let rest = t.strip_prefix("log")?;
        let (base, arg) = rest.split_once('(')?;
        let arg = arg.strip_suffix(')')?;
        Some((base.parse().ok()?, arg.parse().ok()?))
    };
    let (b1, x) = term(a)?;
    let (b2, y) = term(b)?;
    if b1 != b2 {
        return None;
    }
    Some(ProblemParams::Logarithm {
        base: b1,
        left: x,
        right: y,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProblemError {
    #[error("unknown domain {0}")]
    UnknownDomain(String),
    #[error("malformed problem {0:?}")]
    Malformed(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("parameters do not fit domain {0}")]
    WrongDomain(String),
}

/// A concrete problem: root task, facts, and statement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Problem {
    pub domain: String,
    pub params: ProblemParams,
    pub root: GroundTask,
    pub facts: Vec<Fact>,
    pub statement: String,
}

fn subscript(n: i64) -> String {
    n.to_string()
        .chars()
        .map(|c| match c.to_digit(10) {
            Some(d) => char::from_u32('₀' as u32 + d).unwrap_or(c),
            None => c,
        })
        .collect()
}

/// The k with base^k = n, if any.
fn exact_log(base: i64, n: i64) -> Option<u32> {
    let mut acc = 1i64;
    for k in 0..=MAX_LOG_EXPONENT {
        if acc == n {
            return Some(k);
        }
        acc = acc.checked_mul(base)?;
    }
    None
}

fn random_params(domain: &str, seed: u64) -> Result<ProblemParams, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match domain {
        FRACTIONS => {
            let d1 = rng.gen_range(DENOMINATORS);
            let d2 = rng.gen_range(DENOMINATORS);
            Ok(ProblemParams::Fraction {
                left: (rng.gen_range(1..d1), d1),
                right: (rng.gen_range(1..d2), d2),
            })
        }
        LOGARITHMS => {
            let base = *LOG_BASES.choose(&mut rng).unwrap_or(&2);
            let k1 = rng.gen_range(1..=3u32);
            let k2 = rng.gen_range(1..=MAX_LOG_EXPONENT - k1);
            Ok(ProblemParams::Logarithm {
                base,
                left: base.pow(k1),
                right: base.pow(k2),
            })
        }
        other => Err(ProblemError::UnknownDomain(other.to_owned())),
    }
}

fn check_fraction(n: i64, d: i64) -> Result<(), ProblemError> {
    if !DENOMINATORS.contains(&d) {
        return Err(ProblemError::OutOfRange(format!(
            "denominator {d} outside {}..={}",
            DENOMINATORS.start(),
            DENOMINATORS.end()
        )));
    }
    if !NUMERATORS.contains(&n) {
        return Err(ProblemError::OutOfRange(format!(
            "numerator {n} outside {}..={}",
            NUMERATORS.start(),
            NUMERATORS.end()
        )));
    }
    Ok(())
}

/// Builds a problem. Deterministic for a given spec; the result is checked
/// to be solvable in the named built-in domain.
pub fn generate_problem(spec: &ProblemSpec) -> Result<Problem, ProblemError> {
    let params = match &spec.params {
        Some(p) => p.clone(),
        None => random_params(&spec.domain, spec.seed)?,
    };
    let problem = match (spec.domain.as_str(), &params) {
        (FRACTIONS, ProblemParams::Fraction { left, right }) => {
            check_fraction(left.0, left.1)?;
            check_fraction(right.0, right.1)?;
            let p = Value::sym("addFraction");
            let text = format!("{}/{}+{}/{}", left.0, left.1, right.0, right.1);
            let statement = format!("Add: {}/{} + {}/{}", left.0, left.1, right.0, right.1);
            let mut facts = vec![Fact::new("field", vec![p.clone(), Value::text(text)])];
            for (side, (n, d)) in [("left", left), ("right", right)] {
                facts.push(Fact::new(
                    "fraction",
                    vec![p.clone(), Value::sym(side), Value::Int(*n), Value::Int(*d)],
                ));
            }
            facts.push(Fact::new("statement", vec![Value::text(statement.clone())]));
            Problem {
                domain: FRACTIONS.into(),
                params: params.clone(),
                root: GroundTask::new("solve", vec![p]),
                facts,
                statement,
            }
        }
        (LOGARITHMS, ProblemParams::Logarithm { base, left, right }) => {
            if !LOG_BASES.contains(base) {
                return Err(ProblemError::OutOfRange(format!(
                    "base {base} is not one of {LOG_BASES:?}"
                )));
            }
            for arg in [left, right] {
                if *arg < 1 {
                    return Err(ProblemError::OutOfRange(format!("argument {arg} must be positive")));
                }
                if exact_log(*base, *arg).is_none() {
                    return Err(ProblemError::Unsatisfiable(format!(
                        "log{base}({arg}) is not an integer power of {base} up to {base}^{MAX_LOG_EXPONENT}"
                    )));
                }
            }
            let e = Value::sym("expression");
            let text = format!("log{base}({left})+log{base}({right})");
            let sub = subscript(*base);
            let statement = format!("Reduce: log{sub}{left} + log{sub}{right}");
            let mut facts = vec![Fact::new("field", vec![e.clone(), Value::text(text)])];
            for (side, arg) in [("left", left), ("right", right)] {
                facts.push(Fact::new(
                    "logTerm",
                    vec![e.clone(), Value::sym(side), Value::Int(*base), Value::Int(*arg)],
                ));
            }
            facts.push(Fact::new("statement", vec![Value::text(statement.clone())]));
            Problem {
                domain: LOGARITHMS.into(),
                params: params.clone(),
                root: GroundTask::new("reduce", vec![e]),
                facts,
                statement,
            }
        }
        (FRACTIONS | LOGARITHMS, _) => return Err(ProblemError::WrongDomain(spec.domain.clone())),
        (other, _) => return Err(ProblemError::UnknownDomain(other.to_owned())),
    };
    let domain = builtin_domain(&problem.domain)
        .ok_or_else(|| ProblemError::UnknownDomain(problem.domain.clone()))?;
    init_trace(Arc::new(domain), problem.root.clone(), problem.facts.clone())
        .map_err(|e| ProblemError::Unsatisfiable(e.to_string()))?;
    Ok(problem)
}
