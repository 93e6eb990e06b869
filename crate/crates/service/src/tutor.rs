//! The tutoring loop behind the HTTP API: sessions, student models and
//! their logs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use htn_tutor::content::{builtin_domains, generate_problem, ProblemSpec};
use htn_tutor::knowledge::{Band, SkillUpdate};
use htn_tutor::tracer::TraceResult;
use htn_tutor::{Domain, ProblemLayout, StudentModel, Sym};
use parking_lot::{Mutex, RwLock};
use serde::Serialize;

use crate::config::ServiceConfig;
use crate::events::{EventBody, SessionEvent, StudentRecord, StudentSnapshot};
use crate::session::{Session, SessionError, SessionStatus};
use crate::store::{valid_id, EventStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum TutorError {
    #[error("no session {0}")]
    SessionNotFound(String),
    #[error("unknown domain {0}")]
    UnknownDomain(String),
    #[error("unknown policy {0}")]
    UnknownPolicy(String),
    #[error("invalid id {0:?}")]
    InvalidId(String),
    #[error("stale turn {given}; the session is at turn {current}")]
    StaleTurn { given: u64, current: u64 },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkillChange {
    pub skill: Sym,
    pub name: String,
    pub before: f64,
    pub after: f64,
}

/// What a client learns about one submitted entry. Never includes
/// expected values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Feedback {
    pub outcome: Outcome,
    pub field: Sym,
    pub message: String,
    pub skills: Vec<SkillChange>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HintView {
    pub field: Sym,
    pub label: String,
    pub message: String,
    pub skill: Option<Sym>,
    pub skill_name: Option<String>,
    pub strategy: Vec<Sym>,
}

/// Client view of a session.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub student: String,
    pub domain: String,
    pub policy: String,
    pub turn: u64,
    pub status: SessionStatus,
    pub layout: ProblemLayout,
}

impl SessionView {
    fn of(s: &Session) -> SessionView {
        SessionView {
            id: s.id.clone(),
            student: s.student.clone(),
            domain: s.domain.clone(),
            policy: s.policy_name.clone(),
            turn: s.turn,
            status: s.status,
            layout: s.layout.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkillSummary {
    pub skill: Sym,
    pub name: String,
    pub domain: String,
    pub p_mastery: f64,
    pub band: Band,
    pub opportunities: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainInfo {
    pub name: String,
    pub root: String,
    pub skills: BTreeMap<Sym, String>,
}

pub struct CreateRequest {
    pub student: String,
    pub domain: String,
    pub spec: Option<ProblemSpec>,
    pub policy: Option<String>,
}

struct StudentEntry {
    model: StudentModel,
    /// Records in the student's log.
    records: u64,
    /// Records not yet folded into a snapshot.
    since_snapshot: u64,
}

pub struct Tutor {
    config: ServiceConfig,
    domains: BTreeMap<String, Arc<Domain>>,
    store: Arc<dyn EventStore>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    students: Mutex<HashMap<String, Arc<Mutex<StudentEntry>>>>,
}

const INCORRECT_MESSAGE: &str = "That is not what was expected here. Ask for a hint if you are stuck.";

impl Tutor {
    /// Opens the tutor over `store` with the shipped domains, resuming every
    /// logged session and repairing student logs that missed an update.
    pub fn open(config: ServiceConfig, store: Arc<dyn EventStore>) -> Result<Tutor, TutorError> {
        let domains = builtin_domains()
            .into_iter()
            .map(|d| (d.name.to_string(), Arc::new(d)))
            .collect();
        Tutor::with_domains(config, store, domains)
    }

    pub fn with_domains(
        config: ServiceConfig,
        store: Arc<dyn EventStore>,
        domains: BTreeMap<String, Arc<Domain>>,
    ) -> Result<Tutor, TutorError> {
        let tutor = Tutor {
            config,
            domains,
            store,
            sessions: RwLock::new(HashMap::new()),
            students: Mutex::new(HashMap::new()),
        };
        tutor.recover()?;
        Ok(tutor)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &Arc<dyn EventStore> {
        &self.store
    }

    fn recover(&self) -> Result<(), TutorError> {
        let mut results: BTreeMap<String, Vec<StudentRecord>> = BTreeMap::new();
        for id in self.store.sessions()? {
            let events = self.store.load_session(&id)?;
            let Some(EventBody::Created { spec, .. }) = events.first().map(|e| &e.body) else {
                continue;
            };
            let domain = self.domain(&spec.domain)?;
            let session = Session::replay(&events, domain)?;
            for e in &events {
                if let EventBody::Result { updates, .. } = &e.body {
                    results.entry(session.student.clone()).or_default().extend(updates.iter().map(|u| {
                        StudentRecord {
                            session: id.clone(),
                            turn: e.turn,
                            update: u.clone(),
                        }
                    }));
                }
            }
            self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        }
        for (student, logged) in results {
            let entry = self.student(&student)?;
            let mut entry = entry.lock();
            let (_, records) = self.store.load_student(&student)?;
            let mut seen: BTreeMap<(String, u64), usize> = BTreeMap::new();
            for r in &records {
                *seen.entry((r.session.clone(), r.turn)).or_default() += 1;
            }
            let missing: Vec<StudentRecord> = logged
                .into_iter()
                .filter(|r| {
                    let key = (r.session.clone(), r.turn);
                    match seen.get_mut(&key) {
                        Some(n) if *n > 0 => {
                            *n -= 1;
                            false
                        }
                        _ => true,
                    }
                })
                .collect();
            if !missing.is_empty() {
                tracing::warn!(student, count = missing.len(), "restoring mastery updates missing from student log");
                self.store.append_student(&student, &missing)?;
                for r in &missing {
                    entry.model.restore(&r.update);
                }
                entry.records += missing.len() as u64;
                entry.since_snapshot += missing.len() as u64;
            }
        }
        Ok(())
    }

    fn domain(&self, name: &str) -> Result<Arc<Domain>, TutorError> {
        self.domains
            .get(name)
            .cloned()
            .ok_or_else(|| TutorError::UnknownDomain(name.to_owned()))
    }

    fn student(&self, id: &str) -> Result<Arc<Mutex<StudentEntry>>, TutorError> {
        if let Some(e) = self.students.lock().get(id) {
            return Ok(e.clone());
        }
        let (snapshot, records) = self.store.load_student(id)?;
        let (mut model, applied) = match snapshot {
            Some(s) => (s.model, s.applied),
            None => (
                StudentModel::with_params(id, self.config.bkt.default, self.config.bkt.skills.clone()),
                0,
            ),
        };
        for r in records.iter().skip(applied as usize) {
            model.restore(&r.update);
        }
        let entry = StudentEntry {
            model,
            records: records.len() as u64,
            since_snapshot: records.len() as u64 - applied.min(records.len() as u64),
        };
        let mut map = self.students.lock();
        Ok(map
            .entry(id.to_owned())
            .or_insert_with(|| Arc::new(Mutex::new(entry)))
            .clone())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, TutorError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| TutorError::SessionNotFound(id.to_owned()))
    }

    pub fn domains(&self) -> Vec<DomainInfo> {
        self.domains
            .values()
            .map(|d| DomainInfo {
                name: d.name.to_string(),
                root: d.root.to_string(),
                skills: d.skills.clone(),
            })
            .collect()
    }

    pub fn policies(&self) -> Vec<String> {
        self.config.policies.keys().cloned().collect()
    }

    pub fn create_session(&self, req: CreateRequest) -> Result<SessionView, TutorError> {
        self.create_session_with_id(uuid::Uuid::new_v4().simple().to_string(), req)
    }

    pub fn create_session_with_id(&self, id: String, req: CreateRequest) -> Result<SessionView, TutorError> {
        for i in [&id, &req.student] {
            if !valid_id(i) {
                return Err(TutorError::InvalidId(i.clone()));
            }
        }
        let domain = self.domain(&req.domain)?;
        let policy_name = req.policy.unwrap_or_else(|| self.config.default_policy.clone());
        let policy = self
            .config
            .policies
            .get(&policy_name)
            .cloned()
            .ok_or_else(|| TutorError::UnknownPolicy(policy_name.clone()))?;
        let spec = req
            .spec
            .unwrap_or_else(|| ProblemSpec::random(&req.domain, rand_seed(&id)));
        if spec.domain != req.domain {
            return Err(SessionError::Problem(format!(
                "problem is for {} but the session is for {}",
                spec.domain, req.domain
            ))
            .into());
        }
        generate_problem(&spec).map_err(|e| SessionError::Problem(e.to_string()))?;
        if self.sessions.read().contains_key(&id) {
            return Err(TutorError::InvalidId(id));
        }

        let student = self.student(&req.student)?;
        let mastery = {
            let mut entry = student.lock();
            for s in domain.skills.keys() {
                entry.model.touch(s);
            }
            entry.model.clone()
        };
        let created = SessionEvent::now(
            0,
            EventBody::Created {
                session: id.clone(),
                student: req.student.clone(),
                spec,
                policy_name,
                policy,
                thresholds: self.config.bands,
                mastery,
            },
        );
        let session = Session::start(&created, domain)?;
        self.store.append_session(&id, &[created])?;
        let view = SessionView::of(&session);
        self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, TutorError> {
        Ok(SessionView::of(&self.session(id)?.lock()))
    }

    /// The current layout including expected values. Server-side only.
    pub fn layout(&self, id: &str) -> Result<ProblemLayout, TutorError> {
        Ok(self.session(id)?.lock().layout.clone())
    }

    /// Full internal state, for replay checks and debugging.
    pub fn session_state(&self, id: &str) -> Result<serde_json::Value, TutorError> {
        let s = self.session(id)?;
        let s = s.lock();
        serde_json::to_value(&*s).map_err(|e| TutorError::Store(e.into()))
    }

    fn check_turn(session: &Session, turn: u64) -> Result<(), TutorError> {
        if session.turn != turn {
            return Err(TutorError::StaleTurn {
                given: turn,
                current: session.turn,
            });
        }
        Ok(())
    }

    pub fn submit_action(
        &self,
        id: &str,
        field: &Sym,
        value: &str,
        turn: u64,
    ) -> Result<(Feedback, SessionView), TutorError> {
        let session = self.session(id)?;
        let mut s = session.lock();
        Self::check_turn(&s, turn)?;
        let mut next = s.clone();
        let result = next.trace_action(field, value)?;
        let observations = crate::session::observations(field, &result);

        let student = self.student(&next.student)?;
        let mut entry = student.lock();
        let mut model = entry.model.clone();
        let updates: Vec<SkillUpdate> = observations
            .iter()
            .map(|(skill, correct)| model.observe(skill, *correct))
            .collect();
        next.record_result(field, &result, &updates)?;

        let mut events = vec![
            SessionEvent::now(
                turn,
                EventBody::ActionSubmitted {
                    field: field.clone(),
                    value: value.to_owned(),
                },
            ),
            SessionEvent::now(
                turn,
                EventBody::Result {
                    result: result.clone(),
                    updates: updates.clone(),
                },
            ),
        ];
        if next.is_complete() {
            events.push(SessionEvent::now(next.turn, EventBody::Completed));
        }
        self.store.append_session(id, &events)?;
        *s = next;

        let records: Vec<StudentRecord> = updates
            .iter()
            .map(|u| StudentRecord {
                session: id.to_owned(),
                turn,
                update: u.clone(),
            })
            .collect();
        if !records.is_empty() {
            self.store.append_student(&s.student, &records)?;
            entry.model = model;
            entry.records += records.len() as u64;
            entry.since_snapshot += records.len() as u64;
            if entry.since_snapshot >= self.config.snapshot_every {
                let snapshot = StudentSnapshot {
                    model: entry.model.clone(),
                    applied: entry.records,
                };
                self.store.save_snapshot(&s.student, &snapshot)?;
                entry.since_snapshot = 0;
            }
        }
        drop(entry);

        let domain = s.trace.domain().clone();
        let outcome = match result {
            TraceResult::Correct { .. } => Outcome::Correct,
            TraceResult::Incorrect { .. } => Outcome::Incorrect,
            TraceResult::Complete { .. } => Outcome::Complete,
        };
        let message = match outcome {
            Outcome::Correct => "Correct.".to_owned(),
            Outcome::Incorrect => INCORRECT_MESSAGE.to_owned(),
            Outcome::Complete => "Correct. Problem solved!".to_owned(),
        };
        let feedback = Feedback {
            outcome,
            field: field.clone(),
            message,
            skills: updates
                .iter()
                .map(|u| SkillChange {
                    name: domain.skill_name(&u.skill).to_owned(),
                    skill: u.skill.clone(),
                    before: u.before.p_mastery,
                    after: u.after.p_mastery,
                })
                .collect(),
        };
        Ok((feedback, SessionView::of(&s)))
    }

    /// Points at the next step without revealing its value. Does not
    /// change the turn, the trace or mastery.
    pub fn request_hint(&self, id: &str) -> Result<HintView, TutorError> {
        let session = self.session(id)?;
        let mut s = session.lock();
        let hint = s.hint()?;
        self.store.append_session(
            id,
            &[SessionEvent::now(
                s.turn,
                EventBody::HintServed {
                    field: hint.field.clone(),
                },
            )],
        )?;
        let domain = s.trace.domain().clone();
        let label = s
            .layout
            .field(&hint.field)
            .map(|f| f.label.clone())
            .unwrap_or_else(|| hint.field.to_string());
        let skill_name = hint.skill.as_ref().map(|k| domain.skill_name(k).to_owned());
        let message = match &skill_name {
            Some(n) => format!("Work on the {label} field next. It practises: {n}."),
            None => format!("Work on the {label} field next."),
        };
        Ok(HintView {
            field: hint.field,
            label,
            message,
            skill: hint.skill,
            skill_name,
            strategy: hint.strategy,
        })
    }

    pub fn expand_scaffold(&self, id: &str, field: &Sym, turn: u64) -> Result<SessionView, TutorError> {
        let session = self.session(id)?;
        let mut s = session.lock();
        Self::check_turn(&s, turn)?;
        let mut next = s.clone();
        next.expand(field)?;
        self.store.append_session(
            id,
            &[SessionEvent::now(
                turn,
                EventBody::ScaffoldExpanded {
                    field: field.clone(),
                },
            )],
        )?;
        *s = next;
        Ok(SessionView::of(&s))
    }

    pub fn student_skills(&self, student: &str) -> Result<Vec<SkillSummary>, TutorError> {
        if !valid_id(student) {
            return Err(TutorError::InvalidId(student.to_owned()));
        }
        let entry = self.student(student)?;
        let entry = entry.lock();
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for d in self.domains.values() {
            for (skill, name) in &d.skills {
                if !seen.insert(skill.clone()) {
                    continue;
                }
                let state = entry.model.state(skill);
                out.push(SkillSummary {
                    skill: skill.clone(),
                    name: name.clone(),
                    domain: d.name.to_string(),
                    p_mastery: state.p_mastery,
                    band: self.config.bands.band(state.p_mastery),
                    opportunities: state.opportunities,
                });
            }
        }
        Ok(out)
    }

    /// The student's current model.
    pub fn student_model(&self, student: &str) -> Result<StudentModel, TutorError> {
        Ok(self.student(student)?.lock().model.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// FNV-1a of the session id.
fn rand_seed(id: &str) -> u64 {
    id.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
