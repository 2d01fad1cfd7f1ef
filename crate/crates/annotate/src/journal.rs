//! Append-only JSON-lines journal, one file per session.

use std::fs::{File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use crate::error::ApiError;
use crate::session::Event;

/// Parses journal bytes. A final line without a newline is a torn write
/// and is ignored; the returned length covers only complete lines.
pub fn parse_journal(bytes: &[u8]) -> Result<(Vec<Event>, usize), ApiError> {
    let mut events = Vec::new();
    let mut start = 0;
    let mut line_no = 0;
    while let Some(off) = bytes[start..].iter().position(|&b| b == b'\n') {
        line_no += 1;
        let line = &bytes[start..start + off];
        if !line.iter().all(u8::is_ascii_whitespace) {
            let event =
                serde_json::from_slice(line).map_err(|e| ApiError::corrupt(format!("journal line {line_no}: {e}")))?;
            events.push(event);
        }
        start += off + 1;
    }
    Ok((events, start))
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Creates a new journal holding `first`; fails if the file exists.
    pub fn create(path: &Path, first: &Event) -> Result<Journal, ApiError> {
        let file = OpenOptions::new().append(true).create_new(true).open(path).map_err(|e| {
            if e.kind() == ErrorKind::AlreadyExists {
                ApiError::conflict(format!("session journal {} already exists", path.display()))
            } else {
                ApiError::io(e)
            }
        })?;
        let mut j = Journal { path: path.to_path_buf(), file };
        j.append(first)?;
        Ok(j)
    }

    /// Opens an existing journal, dropping a torn final line.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Event>), ApiError> {
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == ErrorKind::NotFound {
                ApiError::not_found(format!("no session journal at {}", path.display()))
            } else {
                ApiError::io(e)
            }
        })?;
        let (events, valid) = parse_journal(&bytes)?;
        let file = OpenOptions::new().append(true).open(path).map_err(ApiError::io)?;
        if valid < bytes.len() {
            file.set_len(valid as u64).map_err(ApiError::io)?;
        }
        Ok((Journal { path: path.to_path_buf(), file }, events))
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ApiError> {
        let mut line = serde_json::to_vec(event).map_err(|e| ApiError::corrupt(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(ApiError::io)?;
        self.file.sync_data().map_err(ApiError::io)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
