//! Bayesian knowledge tracing over the skills credited by the tracer.
//!
//! Generic over the float type; `f64` is the default everywhere.

use std::collections::BTreeMap;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::facts::Fact;
use crate::value::{Sym, Value};

/// Granularity of mastery probabilities exported as facts.
pub const EXPORT_GRANULARITY: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("guess {guess} must be below 1 - slip ({slip})")]
    Unidentifiable { guess: f64, slip: f64 },
    #[error("band thresholds must satisfy 0 < low ({low}) < high ({high}) < 1")]
    Thresholds { low: f64, high: f64 },
}

fn lit<T: Float>(x: f64) -> T {
    T::from(x).unwrap_or_else(T::nan)
}

fn as_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound(deserialize = "T: Float + Deserialize<'de>"))]
pub struct SkillParams<T = f64> {
    pub p_init: T,
    pub p_transit: T,
    pub p_guess: T,
    pub p_slip: T,
}

#[derive(Deserialize)]
struct RawParams<T> {
    p_init: T,
    p_transit: T,
    p_guess: T,
    p_slip: T,
}

impl<T: Float> TryFrom<RawParams<T>> for SkillParams<T> {
    type Error = ParamError;

    fn try_from(r: RawParams<T>) -> Result<Self, ParamError> {
        SkillParams::new(r.p_init, r.p_transit, r.p_guess, r.p_slip)
    }
}

impl<T: Float> SkillParams<T> {
    pub fn new(p_init: T, p_transit: T, p_guess: T, p_slip: T) -> Result<Self, ParamError> {
        for (name, v) in [
            ("p_init", p_init),
            ("p_transit", p_transit),
            ("p_guess", p_guess),
            ("p_slip", p_slip),
        ] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(ParamError::OutOfRange {
                    name,
                    value: as_f64(v),
                });
            }
        }
        if p_guess >= T::one() - p_slip {
            return Err(ParamError::Unidentifiable {
                guess: as_f64(p_guess),
                slip: as_f64(p_slip),
            });
        }
        Ok(SkillParams {
            p_init,
            p_transit,
            p_guess,
            p_slip,
        })
    }
}

impl<T: Float> Default for SkillParams<T> {
    /// p_init 0.3, p_transit 0.2, p_guess 0.2, p_slip 0.1.
    fn default() -> Self {
        SkillParams {
            p_init: lit(0.3),
            p_transit: lit(0.2),
            p_guess: lit(0.2),
            p_slip: lit(0.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillState<T = f64> {
    pub p_mastery: T,
    pub opportunities: u64,
}

impl<T: Float> SkillState<T> {
    pub fn initial(params: &SkillParams<T>) -> Self {
        SkillState {
            p_mastery: params.p_init,
            opportunities: 0,
        }
    }
}

/// One BKT step: condition on the observation, then apply the learning
/// transition.
pub fn bkt_update<T: Float>(s: &SkillState<T>, p: &SkillParams<T>, correct: bool) -> SkillState<T> {
    let l = s.p_mastery;
    let one = T::one();
    let posterior = if correct {
        let known = l * (one - p.p_slip);
        let denom = known + (one - l) * p.p_guess;
        if denom > T::zero() {
            known / denom
        } else {
            l
        }
    } else {
        let known = l * p.p_slip;
        let denom = known + (one - l) * (one - p.p_guess);
        if denom > T::zero() {
            known / denom
        } else {
            l
        }
    };
    let next = posterior + (one - posterior) * p.p_transit;
    SkillState {
        p_mastery: next.max(T::zero()).min(one),
        opportunities: s.opportunities + 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Medium,
    High,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds<T>", bound(deserialize = "T: Float + Deserialize<'de>"))]
pub struct BandThresholds<T = f64> {
    /// Below this is low.
    pub low_hi: T,
    /// At or above this is high.
    pub high_lo: T,
}

#[derive(Deserialize)]
struct RawThresholds<T> {
    low_hi: T,
    high_lo: T,
}

impl<T: Float> TryFrom<RawThresholds<T>> for BandThresholds<T> {
    type Error = ParamError;

    fn try_from(r: RawThresholds<T>) -> Result<Self, ParamError> {
        BandThresholds::new(r.low_hi, r.high_lo)
    }
}

impl<T: Float> BandThresholds<T> {
    pub fn new(low_hi: T, high_lo: T) -> Result<Self, ParamError> {
        if !(T::zero() < low_hi && low_hi < high_lo && high_lo < T::one()) {
            return Err(ParamError::Thresholds {
                low: as_f64(low_hi),
                high: as_f64(high_lo),
            });
        }
        Ok(BandThresholds { low_hi, high_lo })
    }

    pub fn band(&self, p_mastery: T) -> Band {
        if p_mastery < self.low_hi {
            Band::Low
        } else if p_mastery >= self.high_lo {
            Band::High
        } else {
            Band::Medium
        }
    }
}

impl<T: Float> Default for BandThresholds<T> {
    fn default() -> Self {
        BandThresholds {
            low_hi: lit(0.4),
            high_lo: lit(0.8),
        }
    }
}

pub fn mastery_band<T: Float>(s: &SkillState<T>, thresholds: &BandThresholds<T>) -> Band {
    thresholds.band(s.p_mastery)
}

/// Before and after one observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillUpdate<T = f64> {
    pub skill: Sym,
    pub correct: bool,
    pub before: SkillState<T>,
    pub after: SkillState<T>,
}

/// Per-student mastery estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Float + Deserialize<'de>"
))]
pub struct StudentModel<T = f64> {
    pub student: String,
    pub states: BTreeMap<Sym, SkillState<T>>,
    #[serde(default)]
    pub params: BTreeMap<Sym, SkillParams<T>>,
    pub default_params: SkillParams<T>,
    /// Incremented on every observation.
    #[serde(default)]
    pub version: u64,
}

impl<T: Float> StudentModel<T> {
    pub fn new(student: &str) -> Self {
        Self::with_params(student, SkillParams::default(), BTreeMap::new())
    }

    pub fn with_params(
        student: &str,
        default_params: SkillParams<T>,
        params: BTreeMap<Sym, SkillParams<T>>,
    ) -> Self {
        StudentModel {
            student: student.to_owned(),
            states: BTreeMap::new(),
            params,
            default_params,
            version: 0,
        }
    }

    pub fn params(&self, skill: &Sym) -> &SkillParams<T> {
        self.params.get(skill).unwrap_or(&self.default_params)
    }

    /// Current state, or the prior if the skill was never observed.
    pub fn state(&self, skill: &Sym) -> SkillState<T> {
        self.states
            .get(skill)
            .copied()
            .unwrap_or_else(|| SkillState::initial(self.params(skill)))
    }

    pub fn p_mastery(&self, skill: &Sym) -> T {
        self.state(skill).p_mastery
    }

    /// Registers a skill at its prior without observing it.
    pub fn touch(&mut self, skill: &Sym) {
        if !self.states.contains_key(skill) {
            let s = SkillState::initial(self.params(skill));
            self.states.insert(skill.clone(), s);
        }
    }

    pub fn observe(&mut self, skill: &Sym, correct: bool) -> SkillUpdate<T> {
        let before = self.state(skill);
        let after = bkt_update(&before, self.params(skill), correct);
        self.states.insert(skill.clone(), after);
        self.version += 1;
        SkillUpdate {
            skill: skill.clone(),
            correct,
            before,
            after,
        }
    }

    /// Re-applies a recorded update's outcome.
    pub fn restore(&mut self, update: &SkillUpdate<T>) {
        self.states.insert(update.skill.clone(), update.after);
    }

    pub fn band(&self, skill: &Sym, thresholds: &BandThresholds<T>) -> Band {
        thresholds.band(self.p_mastery(skill))
    }

    /// `pMastery(skill, p)` facts with p rounded to 1/10000.
    pub fn mastery_facts(&self) -> Vec<Fact> {
        self.states
            .iter()
            .map(|(skill, s)| {
                Fact::new(
                    "pMastery",
                    vec![
                        Value::Symbol(skill.clone()),
                        Value::from_probability(as_f64(s.p_mastery), EXPORT_GRANULARITY),
                    ],
                )
            })
            .collect()
    }
}
