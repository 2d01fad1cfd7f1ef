use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::ApiError;
use crate::journal::Journal;
use crate::session::{valid_session_id, Event, SessionState};

struct Loaded {
    state: SessionState,
    journal: Journal,
}

/// Sessions backed by journals in one directory. Each session has its own
/// lock, so writes to a session are serialized while sessions proceed
/// independently.
pub struct Store {
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<Loaded>>>>,
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Store> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Store { dir, sessions: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn journal_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    /// Validates and persists a `Created` event.
    pub fn create(&self, event: Event) -> Result<SessionState, ApiError> {
        let (state, event) = SessionState::create(event)?;
        if self.get(&state.session_id).is_ok() {
            return Err(ApiError::conflict(format!("session {:?} already exists", state.session_id)));
        }
        let mut sessions = self.sessions.lock().unwrap();
        if sessions.contains_key(&state.session_id) {
            return Err(ApiError::conflict(format!("session {:?} already exists", state.session_id)));
        }
        let journal = Journal::create(&self.journal_path(&state.session_id), &event)?;
        sessions.insert(state.session_id.clone(), Arc::new(Mutex::new(Loaded { state: state.clone(), journal })));
        Ok(state)
    }

    fn get(&self, session_id: &str) -> Result<Arc<Mutex<Loaded>>, ApiError> {
        if !valid_session_id(session_id) {
            return Err(ApiError::not_found(format!("unknown session {session_id:?}")));
        }
        let mut sessions = self.sessions.lock().unwrap();
        if let Some(s) = sessions.get(session_id) {
            return Ok(s.clone());
        }
        let path = self.journal_path(session_id);
        if !path.exists() {
            return Err(ApiError::not_found(format!("unknown session {session_id:?}")));
        }
        let (journal, events) = Journal::open(&path)?;
        if events.is_empty() {
            // the creating write never completed
            drop(journal);
            std::fs::remove_file(&path).map_err(ApiError::io)?;
            return Err(ApiError::not_found(format!("unknown session {session_id:?}")));
        }
        let state = SessionState::replay(&events)?;
        let loaded = Arc::new(Mutex::new(Loaded { state, journal }));
        sessions.insert(session_id.to_string(), loaded.clone());
        Ok(loaded)
    }

    pub fn read<R>(
        &self,
        session_id: &str,
        f: impl FnOnce(&SessionState) -> Result<R, ApiError>,
    ) -> Result<R, ApiError> {
        let s = self.get(session_id)?;
        let guard = s.lock().unwrap();
        f(&guard.state)
    }

    /// Builds an event from the current state, checks it and appends it.
    /// Returns false when the event was a repeat and nothing was written.
    pub fn write(
        &self,
        session_id: &str,
        make: impl FnOnce(&SessionState) -> Result<Event, ApiError>,
    ) -> Result<(bool, SessionState), ApiError> {
        let s = self.get(session_id)?;
        let mut guard = s.lock().unwrap();
        let event = make(&guard.state)?;
        if guard.state.check(&event)?.is_none() {
            return Ok((false, guard.state.clone()));
        }
        guard.journal.append(&event)?;
        guard.state.apply(&event)?;
        Ok((true, guard.state.clone()))
    }
}
