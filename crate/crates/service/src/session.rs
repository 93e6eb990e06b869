//! One tutoring session as a pure state machine over its event log.
//!
//! The live service and replay share these transitions; the only input
//! that is not derived from the log itself is the domain.

use std::collections::BTreeSet;
use std::sync::Arc;

use htn_tutor::content::{generate_problem, ProblemSpec};
use htn_tutor::knowledge::SkillUpdate;
use htn_tutor::scaffold::{compute_layout, expand_field, render_layout, FieldState, ScaffoldError};
use htn_tutor::tracer::{init_trace, Hint, TraceError, TraceResult};
use htn_tutor::{BandThresholds, Domain, ProblemLayout, ScaffoldPolicy, StudentModel, Sym, TraceState, Value};
use serde::Serialize;

use crate::events::{EventBody, SessionEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session is complete")]
    Complete,
    #[error("unknown field {0}")]
    UnknownField(Sym),
    #[error("field {0} cannot be expanded")]
    NotExpandable(Sym),
    #[error("problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("scaffolding: {0}")]
    Scaffold(ScaffoldError),
    #[error("log does not replay: {0}")]
    Replay(String),
}

impl From<ScaffoldError> for SessionError {
    fn from(e: ScaffoldError) -> Self {
        match e {
            ScaffoldError::UnknownField(f) => SessionError::UnknownField(f),
            ScaffoldError::NotExpandable(f) | ScaffoldError::AlreadyExpanded(f) => SessionError::NotExpandable(f),
            ScaffoldError::Trace(t) => SessionError::Trace(t),
            other => SessionError::Scaffold(other),
        }
    }
}

/// Skill observations implied by a traced entry: every credited skill on
/// success; on failure, the skill of the expected action for the same
/// field, or else of the first expected action.
pub fn observations(field: &Sym, result: &TraceResult) -> Vec<(Sym, bool)> {
    match result {
        TraceResult::Incorrect { expected } => expected
            .iter()
            .find(|a| &a.field == field)
            .or_else(|| expected.first())
            .and_then(|a| a.skill.clone())
            .map(|s| vec![(s, false)])
            .unwrap_or_default(),
        ok => ok.skills().iter().map(|s| (s.clone(), true)).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Complete,
}

#[derive(Clone, Debug, Serialize)]
pub struct Session {
    pub id: String,
    pub student: String,
    pub domain: String,
    pub spec: ProblemSpec,
    pub policy_name: String,
    pub policy: ScaffoldPolicy,
    pub thresholds: BandThresholds,
    /// Optimistic-concurrency token; bumped by every action and expansion.
    pub turn: u64,
    pub status: SessionStatus,
    pub trace: TraceState,
    /// The student's mastery as seen by this session: the model at creation
    /// plus this session's own updates.
    pub mastery: StudentModel,
    pub layout: ProblemLayout,
    /// Fields whose latest entry was wrong.
    pub incorrect: BTreeSet<Sym>,
}

impl Session {
    /// Builds the session a `Created` event describes.
    pub fn start(event: &SessionEvent, domain: Arc<Domain>) -> Result<Session, SessionError> {
        let EventBody::Created {
            session,
            student,
            spec,
            policy_name,
            policy,
            thresholds,
            mastery,
        } = &event.body
        else {
            return Err(SessionError::Replay(format!("log starts with {}", event.body.kind())));
        };
        let problem = generate_problem(spec).map_err(|e| SessionError::Problem(e.to_string()))?;
        let mut trace = init_trace(domain.clone(), problem.root, problem.facts)?;
        let layout = compute_layout(&mut trace, mastery, policy, thresholds)?;
        Ok(Session {
            id: session.clone(),
            student: student.clone(),
            domain: domain.name.to_string(),
            spec: spec.clone(),
            policy_name: policy_name.clone(),
            policy: policy.clone(),
            thresholds: *thresholds,
            turn: event.turn,
            status: SessionStatus::InProgress,
            trace,
            mastery: mastery.clone(),
            layout,
            incorrect: BTreeSet::new(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.status == SessionStatus::Complete
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.is_complete() {
            return Err(SessionError::Complete);
        }
        Ok(())
    }

    /// Traces one entry. The trace is left unchanged on Incorrect.
    pub fn trace_action(&mut self, field: &Sym, raw: &str) -> Result<TraceResult, SessionError> {
        self.ensure_open()?;
        if self.layout.field(field).is_none() {
            return Err(SessionError::UnknownField(field.clone()));
        }
        Ok(self.trace.apply_action(field, &Value::parse_input(raw))?)
    }

    /// Folds a traced result and its recorded mastery updates into the
    /// session and advances the turn.
    pub fn record_result(
        &mut self,
        field: &Sym,
        result: &TraceResult,
        updates: &[SkillUpdate],
    ) -> Result<(), SessionError> {
        for u in updates {
            self.mastery.restore(u);
        }
        if result.is_accepted() {
            self.incorrect.remove(field);
        } else {
            self.incorrect.insert(field.clone());
        }
        if matches!(result, TraceResult::Complete { .. }) {
            self.status = SessionStatus::Complete;
        }
        self.turn += 1;
        self.refresh_layout()
    }

    fn refresh_layout(&mut self) -> Result<(), SessionError> {
        let mut layout = render_layout(&mut self.trace, &self.mastery, &self.thresholds)?;
        for f in &mut layout.fields {
            if f.state == FieldState::Empty && self.incorrect.contains(&f.id) {
                f.state = FieldState::Incorrect;
            }
        }
        self.layout = layout;
        Ok(())
    }

    pub fn hint(&mut self) -> Result<Hint, SessionError> {
        self.ensure_open()?;
        Ok(self.trace.next_hint()?)
    }

    pub fn expand(&mut self, field: &Sym) -> Result<(), SessionError> {
        self.ensure_open()?;
        self.layout = expand_field(&self.layout, field, &mut self.trace, &self.mastery, &self.thresholds)?;
        self.turn += 1;
        self.refresh_layout()
    }

    /// Applies one logged event during replay.
    pub fn replay_event(&mut self, event: &SessionEvent, pending: &mut Option<(Sym, String)>) -> Result<(), SessionError> {
        let mismatch = |what: String| SessionError::Replay(what);
        if event.turn != self.turn {
            return Err(mismatch(format!(
                "{} event at turn {} while the session is at turn {}",
                event.body.kind(),
                event.turn,
                self.turn
            )));
        }
        match &event.body {
            EventBody::Created { .. } => return Err(mismatch("second created event".into())),
            EventBody::ActionSubmitted { field, value } => {
                *pending = Some((field.clone(), value.clone()));
            }
            EventBody::Result { result, updates } => {
                let (field, value) = pending
                    .take()
                    .ok_or_else(|| mismatch("result without a submitted action".into()))?;
                let traced = self.trace_action(&field, &value)?;
                if &traced != result {
                    return Err(mismatch(format!("turn {}: traced {traced:?}, logged {result:?}", event.turn)));
                }
                self.record_result(&field, result, updates)?;
            }
            EventBody::HintServed { .. } => {}
            EventBody::ScaffoldExpanded { field } => self.expand(field)?,
            EventBody::Completed => {
                if !self.is_complete() {
                    return Err(mismatch("completed event before the trace completed".into()));
                }
            }
        }
        Ok(())
    }

    /// Rebuilds a session from its full log. A trailing action without a
    /// result is treated as never submitted.
    pub fn replay(events: &[SessionEvent], domain: Arc<Domain>) -> Result<Session, SessionError> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| SessionError::Replay("empty log".into()))?;
        let mut session = Session::start(first, domain)?;
        let mut pending = None;
        for e in rest {
            session.replay_event(e, &mut pending)?;
        }
        Ok(session)
    }
}
