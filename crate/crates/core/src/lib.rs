//! HTN-based model tracing and adaptive scaffolding for step-based tutors.
//!
//! Exact quantities (problem values, expressions) use [`Rational`]. The
//! student model and fading schedules are generic over a float type and
//! default to [`Scalar`].

pub mod content;
pub mod domain;
pub mod expr;
pub mod facts;
pub mod knowledge;
pub mod scaffold;
pub mod testing;
pub mod tracer;
pub mod value;

pub use domain::{parse_domain, serialize_domain, validate_domain, Domain, DomainError, GroundTask};
pub use facts::{Fact, WorkingMemory};
pub use knowledge::{Band, BandThresholds, SkillParams, SkillState, StudentModel};
pub use scaffold::{compute_layout, expand_field, ProblemLayout, ScaffoldPolicy};
pub use tracer::{enumerate_plans, init_trace, TraceResult, TraceState};
pub use value::{Rational, Sym, Value};

/// Float type used for mastery probabilities unless a caller picks another.
pub type Scalar = f64;

pub type Model = StudentModel<Scalar>;
pub type Policy = ScaffoldPolicy<Scalar>;
pub type Thresholds = BandThresholds<Scalar>;
