//! Append-only persistence for session and student logs.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::events::{SessionEvent, StudentRecord, StudentSnapshot};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("encoding record: {0}")]
    Encode(#[from] serde_json::Error),
}

/// True for ids usable as file names: 1 to 64 ASCII letters, digits, `-`
/// or `_`.
pub fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub trait EventStore: Send + Sync {
    fn append_session(&self, session: &str, events: &[SessionEvent]) -> Result<(), StoreError>;
    fn load_session(&self, session: &str) -> Result<Vec<SessionEvent>, StoreError>;
    fn sessions(&self) -> Result<Vec<String>, StoreError>;

    fn append_student(&self, student: &str, records: &[StudentRecord]) -> Result<(), StoreError>;
    fn load_student(&self, student: &str) -> Result<(Option<StudentSnapshot>, Vec<StudentRecord>), StoreError>;
    fn save_snapshot(&self, student: &str, snapshot: &StudentSnapshot) -> Result<(), StoreError>;
    fn students(&self) -> Result<Vec<String>, StoreError>;
}

type StudentLog = (Option<StudentSnapshot>, Vec<StudentRecord>);

/// Keeps everything in memory. For tests and throwaway servers.
#[derive(Default)]
pub struct MemoryStore {
    sessions: Mutex<BTreeMap<String, Vec<SessionEvent>>>,
    students: Mutex<BTreeMap<String, StudentLog>>,
}

impl MemoryStore {
    pub fn new() -> MemoryStore {
        MemoryStore::default()
    }
}

impl EventStore for MemoryStore {
    fn append_session(&self, session: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        self.sessions
            .lock()
            .entry(session.to_owned())
            .or_default()
            .extend_from_slice(events);
        Ok(())
    }

    fn load_session(&self, session: &str) -> Result<Vec<SessionEvent>, StoreError> {
        Ok(self.sessions.lock().get(session).cloned().unwrap_or_default())
    }

    fn sessions(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.sessions.lock().keys().cloned().collect())
    }

    fn append_student(&self, student: &str, records: &[StudentRecord]) -> Result<(), StoreError> {
        self.students
            .lock()
            .entry(student.to_owned())
            .or_default()
            .1
            .extend_from_slice(records);
        Ok(())
    }

    fn load_student(&self, student: &str) -> Result<(Option<StudentSnapshot>, Vec<StudentRecord>), StoreError> {
        Ok(self.students.lock().get(student).cloned().unwrap_or_default())
    }

    fn save_snapshot(&self, student: &str, snapshot: &StudentSnapshot) -> Result<(), StoreError> {
        self.students.lock().entry(student.to_owned()).or_default().0 = Some(snapshot.clone());
        Ok(())
    }

    fn students(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.students.lock().keys().cloned().collect())
    }
}

/// Newline-delimited JSON files under one directory:
///
/// ```text
/// sessions/<id>.ndjson
/// students/<id>.ndjson
/// students/<id>.snapshot.json
/// ```
///
/// Appends are flushed with `fsync` before returning. A torn final line
/// (from a crash mid-write) is ignored on load and cut off by the next
/// append.
pub struct FileStore {
    root: PathBuf,
}

const SESSIONS: &str = "sessions";
const STUDENTS: &str = "students";
const LOG_EXT: &str = "ndjson";
const SNAPSHOT_SUFFIX: &str = ".snapshot.json";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<FileStore, StoreError> {
        let root = root.into();
        for sub in [SESSIONS, STUDENTS] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_path(&self, session: &str) -> PathBuf {
        self.root.join(SESSIONS).join(format!("{session}.{LOG_EXT}"))
    }

    fn student_path(&self, student: &str) -> PathBuf {
        self.root.join(STUDENTS).join(format!("{student}.{LOG_EXT}"))
    }

    fn snapshot_path(&self, student: &str) -> PathBuf {
        self.root.join(STUDENTS).join(format!("{student}{SNAPSHOT_SUFFIX}"))
    }

    fn ids(&self, sub: &str) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(sub);
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == LOG_EXT) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push(stem.to_owned());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Length of `bytes` without an unterminated final line.
fn terminated_len(bytes: &[u8]) -> usize {
    bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1)
}

fn append_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut file = OpenOptions::new()
        .create(true)
        .read(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let len = file.metadata().map_err(io_err(path))?.len();
    if len > 0 {
        let mut last = [0u8];
        file.seek(SeekFrom::End(-1)).map_err(io_err(path))?;
        file.read_exact(&mut last).map_err(io_err(path))?;
        if last[0] != b'\n' {
            // drop a torn tail before writing after it
            let keep = terminated_len(&fs::read(path).map_err(io_err(path))?);
            tracing::warn!(path = %path.display(), dropped = len - keep as u64, "truncating torn log tail");
            file.set_len(keep as u64).map_err(io_err(path))?;
        }
    }
    file.write_all(&buf).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    // an unterminated final line is a write cut short by a crash
    let text = std::str::from_utf8(&bytes[..terminated_len(&bytes)]).map_err(|e| StoreError::Corrupt {
        path: path.to_owned(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

impl EventStore for FileStore {
    fn append_session(&self, session: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        append_lines(&self.session_path(session), events)
    }

    fn load_session(&self, session: &str) -> Result<Vec<SessionEvent>, StoreError> {
        read_lines(&self.session_path(session))
    }

    fn sessions(&self) -> Result<Vec<String>, StoreError> {
        self.ids(SESSIONS)
    }

    fn append_student(&self, student: &str, records: &[StudentRecord]) -> Result<(), StoreError> {
        append_lines(&self.student_path(student), records)
    }

    fn load_student(&self, student: &str) -> Result<(Option<StudentSnapshot>, Vec<StudentRecord>), StoreError> {
        let path = self.snapshot_path(student);
        let snapshot = match fs::read(&path) {
            Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: 1,
                message: e.to_string(),
            })?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&path)(e)),
        };
        Ok((snapshot, read_lines(&self.student_path(student))?))
    }

    fn save_snapshot(&self, student: &str, snapshot: &StudentSnapshot) -> Result<(), StoreError> {
        let path = self.snapshot_path(student);
        let tmp = path.with_extension("tmp");
        let bytes = serde_json::to_vec(snapshot)?;
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&bytes).map_err(io_err(&tmp))?;
        f.sync_data().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    fn students(&self) -> Result<Vec<String>, StoreError> {
        self.ids(STUDENTS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventBody;

    fn hint(turn: u64) -> SessionEvent {
        SessionEvent::now(
            turn,
            EventBody::HintServed {
                field: htn_tutor::Sym::new("f"),
            },
        )
    }

    #[test]
    fn ids() {
        assert!(valid_id("ada-1_x"));
        assert!(!valid_id(""));
        assert!(!valid_id("../etc"));
        assert!(!valid_id(&"a".repeat(65)));
    }

    #[test]
    fn file_store_appends_and_skips_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        store.append_session("s1", &[hint(0), hint(1)]).unwrap();
        store.append_session("s1", &[hint(2)]).unwrap();
        let mut f = OpenOptions::new().append(true).open(store.session_path("s1")).unwrap();
        f.write_all(b"{\"turn\":3,\"at\":").unwrap();
        let events = store.load_session("s1").unwrap();
        assert_eq!(events.iter().map(|e| e.turn).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(store.sessions().unwrap(), ["s1"]);
        assert!(store.load_session("nope").unwrap().is_empty());
        store.append_session("s1", &[hint(3)]).unwrap();
        let events = store.load_session("s1").unwrap();
        assert_eq!(events.iter().map(|e| e.turn).collect::<Vec<_>>(), [0, 1, 2, 3]);
    }

    #[test]
    fn terminated_bad_line_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        store.append_session("s1", &[hint(0)]).unwrap();
        let mut f = OpenOptions::new().append(true).open(store.session_path("s1")).unwrap();
        f.write_all(b"{\"turn\":1}\n").unwrap();
        assert!(matches!(store.load_session("s1"), Err(StoreError::Corrupt { line: 2, .. })));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        store.append_session("s", &[hint(0)]).unwrap();
        let mut f = OpenOptions::new().append(true).open(store.session_path("s")).unwrap();
        f.write_all(b"garbage\n").unwrap();
        store.append_session("s", &[hint(1)]).unwrap();
        assert!(matches!(store.load_session("s"), Err(StoreError::Corrupt { line: 2, .. })));
    }
}
