//! Replaying recorded entries against the tracer.
//!
//! Two transcript formats are read:
//!
//! * text, one `field = value` per line, optionally followed by
//!   `=> correct|incorrect|complete` to state the outcome that should be
//!   seen; `#` starts a comment.
//! * a session event log written by the service (`.ndjson`); the logged
//!   results become the stated outcomes.

use std::fmt;
use std::sync::Arc;

use htn_tutor::content::{generate_problem, Problem};
use htn_tutor::tracer::{init_trace, TraceResult, TraceState};
use htn_tutor::{Domain, Sym, Value};
use htn_tutor_service::events::{EventBody, SessionEvent};
use htn_tutor_service::session::Session;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Correct,
    Incorrect,
    Complete,
}

impl Outcome {
    pub fn of(r: &TraceResult) -> Outcome {
        match r {
            TraceResult::Correct { .. } => Outcome::Correct,
            TraceResult::Incorrect { .. } => Outcome::Incorrect,
            TraceResult::Complete { .. } => Outcome::Complete,
        }
    }

    fn parse(s: &str) -> Option<Outcome> {
        match s {
            "correct" => Some(Outcome::Correct),
            "incorrect" => Some(Outcome::Incorrect),
            "complete" => Some(Outcome::Complete),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Correct => "correct",
            Outcome::Incorrect => "incorrect",
            Outcome::Complete => "complete",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub field: Sym,
    pub value: String,
    pub stated: Option<Outcome>,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("event log: {0}")]
    Log(String),
    #[error("entry {index} ({field}): traced {traced}, transcript says {stated}")]
    Mismatch {
        index: usize,
        field: Sym,
        traced: Outcome,
        stated: Outcome,
    },
    #[error("trace: {0}")]
    Trace(String),
}

pub fn parse_text(src: &str) -> Result<Vec<Entry>, TranscriptError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: &str| TranscriptError::Syntax {
            line: i + 1,
            message: message.to_owned(),
        };
        let (entry, stated) = match line.split_once("=>") {
            Some((e, o)) => {
                let o = o.trim();
                (e, Some(Outcome::parse(o).ok_or_else(|| syntax("outcome must be correct, incorrect or complete"))?))
            }
            None => (line, None),
        };
        let (field, value) = entry.split_once('=').ok_or_else(|| syntax("expected `field = value`"))?;
        let field = field.trim();
        if field.is_empty() {
            return Err(syntax("missing field name"));
        }
        out.push(Entry {
            field: Sym::new(field),
            value: value.trim().to_owned(),
            stated,
        });
    }
    Ok(out)
}

pub fn parse_log(src: &str) -> Result<Vec<SessionEvent>, TranscriptError> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TranscriptError::Syntax {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One traced entry.
#[derive(Clone, Debug)]
pub struct Step {
    pub field: Sym,
    pub value: String,
    pub result: TraceResult,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.field, self.value, Outcome::of(&self.result))?;
        match &self.result {
            TraceResult::Incorrect { expected } => {
                let mut fields: Vec<&str> = expected.iter().map(|a| a.field.as_str()).collect();
                fields.dedup();
                write!(f, " (expected {})", fields.join(" or "))
            }
            ok if !ok.skills().is_empty() => {
                let skills: Vec<&str> = ok.skills().iter().map(Sym::as_str).collect();
                write!(f, " [{}]", skills.join(", "))
            }
            _ => Ok(()),
        }
    }
}

/// Traces text-transcript entries on the fully scaffolded problem,
/// checking any stated outcomes.
pub fn replay_text(domain: Arc<Domain>, problem: &Problem, entries: &[Entry]) -> Result<Vec<Step>, TranscriptError> {
    let mut t = init_trace(domain, problem.root.clone(), problem.facts.clone())
        .map_err(|e| TranscriptError::Trace(e.to_string()))?;
    let mut steps = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let result = t
            .apply_action(&e.field, &Value::parse_input(&e.value))
            .map_err(|err| TranscriptError::Trace(format!("entry {}: {err}", i + 1)))?;
        check(i + 1, &e.field, &result, e.stated)?;
        steps.push(Step {
            field: e.field.clone(),
            value: e.value.clone(),
            result,
        });
    }
    Ok(steps)
}

fn check(index: usize, field: &Sym, result: &TraceResult, stated: Option<Outcome>) -> Result<(), TranscriptError> {
    match stated {
        Some(stated) if stated != Outcome::of(result) => Err(TranscriptError::Mismatch {
            index,
            field: field.clone(),
            traced: Outcome::of(result),
            stated,
        }),
        _ => Ok(()),
    }
}

/// Re-traces a service event log with the session's own scaffolding,
/// checking each result against the logged one. Returns the problem the
/// log is for and the traced entries.
pub fn replay_log(domain: Arc<Domain>, events: &[SessionEvent]) -> Result<(Problem, Vec<Step>), TranscriptError> {
    let log = |m: String| TranscriptError::Log(m);
    let (first, rest) = events.split_first().ok_or_else(|| log("empty".into()))?;
    let EventBody::Created { spec, .. } = &first.body else {
        return Err(log(format!("starts with {}", first.body.kind())));
    };
    let problem = generate_problem(spec).map_err(|e| log(e.to_string()))?;
    let mut session = Session::start(first, domain).map_err(|e| log(e.to_string()))?;
    let mut pending: Option<(Sym, String)> = None;
    let mut steps = Vec::new();
    for e in rest {
        match &e.body {
            EventBody::ActionSubmitted { field, value } => pending = Some((field.clone(), value.clone())),
            EventBody::Result { result: logged, updates } => {
                let (field, value) = pending.take().ok_or_else(|| log("result without an action".into()))?;
                let result = session
                    .trace_action(&field, &value)
                    .map_err(|err| TranscriptError::Trace(err.to_string()))?;
                check(steps.len() + 1, &field, &result, Some(Outcome::of(logged)))?;
                if &result != logged {
                    return Err(log(format!("turn {}: traced {result:?}, logged {logged:?}", e.turn)));
                }
                session
                    .record_result(&field, &result, updates)
                    .map_err(|err| TranscriptError::Trace(err.to_string()))?;
                steps.push(Step { field, value, result });
            }
            EventBody::ScaffoldExpanded { field } => {
                session.expand(field).map_err(|err| TranscriptError::Trace(err.to_string()))?;
            }
            EventBody::Created { .. } => return Err(log("second created event".into())),
            EventBody::HintServed { .. } | EventBody::Completed => {}
        }
    }
    Ok((problem, steps))
}

/// The deterministic-first solution of a problem, one entry per step.
pub fn worked_solution(domain: Arc<Domain>, problem: &Problem) -> Result<Vec<Step>, TranscriptError> {
    let mut t: TraceState = init_trace(domain, problem.root.clone(), problem.facts.clone())
        .map_err(|e| TranscriptError::Trace(e.to_string()))?;
    let mut steps = Vec::new();
    while !t.is_complete() {
        let next = t
            .expected_actions()
            .map_err(|e| TranscriptError::Trace(e.to_string()))?
            .into_iter()
            .next()
            .ok_or_else(|| TranscriptError::Trace("no expected action before completion".into()))?;
        let result = t
            .apply_action(&next.field, &next.value)
            .map_err(|e| TranscriptError::Trace(e.to_string()))?;
        steps.push(Step {
            field: next.field,
            value: next.value.to_string(),
            result,
        });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_lines() {
        let src = "# header\nlcdField = 4 => correct\n\nanswerField=3/4   # done\n";
        let entries = parse_text(src).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].stated, Some(Outcome::Correct));
        assert_eq!(entries[1].value, "3/4");
        assert_eq!(entries[1].stated, None);
        assert!(matches!(parse_text("nope"), Err(TranscriptError::Syntax { line: 1, .. })));
        assert!(matches!(parse_text("a = 1 => maybe"), Err(TranscriptError::Syntax { .. })));
    }
}
