//! Session log records.

use chrono::{DateTime, Utc};
use htn_tutor::content::ProblemSpec;
use htn_tutor::knowledge::SkillUpdate;
use htn_tutor::tracer::TraceResult;
use htn_tutor::{BandThresholds, ScaffoldPolicy, StudentModel, Sym};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub turn: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum EventBody {
    /// Everything needed to rebuild the session without outside state.
    Created {
        session: String,
        student: String,
        spec: ProblemSpec,
        policy_name: String,
        policy: ScaffoldPolicy,
        thresholds: BandThresholds,
        /// The student's model when the session started.
        mastery: StudentModel,
    },
    ActionSubmitted {
        field: Sym,
        value: String,
    },
    Result {
        result: TraceResult,
        updates: Vec<SkillUpdate>,
    },
    HintServed {
        field: Sym,
    },
    ScaffoldExpanded {
        field: Sym,
    },
    Completed,
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Created { .. } => "created",
            EventBody::ActionSubmitted { .. } => "action_submitted",
            EventBody::Result { .. } => "result",
            EventBody::HintServed { .. } => "hint_served",
            EventBody::ScaffoldExpanded { .. } => "scaffold_expanded",
            EventBody::Completed => "completed",
        }
    }
}

impl SessionEvent {
    pub fn now(turn: u64, body: EventBody) -> SessionEvent {
        SessionEvent {
            turn,
            at: Utc::now(),
            body,
        }
    }
}

/// One mastery change in a student's log. `(session, turn)` identifies the
/// session result it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub session: String,
    pub turn: u64,
    pub update: SkillUpdate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentSnapshot {
    pub model: StudentModel,
    /// Number of log records folded into `model`.
    pub applied: u64,
}
