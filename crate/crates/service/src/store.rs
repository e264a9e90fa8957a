//! One JSON document per session in a data directory.
//!
//! Writes go to a temporary file in the same directory, are flushed to
//! disk and then renamed over the session file, so a reader (or a restart
//! after a crash) sees either the old or the new document, never a mix.
//! Mutations of one session are serialized by a per-session async lock.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use glr_adapt_core::schema;

use crate::session::TrialSession;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no trial with id {0:?}")]
    NotFound(String),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("stored session {id:?} is unreadable: {message}")]
    Corrupt { id: String, message: String },
}

/// Where to simulate a crash inside [`Store::save`]; for tests of
/// atomicity.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailPoint {
    /// The new document is fully written to a temporary file, but the
    /// process dies before the rename.
    BeforeRename,
    /// The rename happened, but the process dies before responding.
    AfterRename,
}

pub struct Store {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<AsyncMutex<()>>>>,
    fail: Mutex<Option<FailPoint>>,
}

const TMP_PREFIX: &str = ".tmp-";

/// Session ids are generated by the service; anything else is rejected
/// before it can reach the file system.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Store {
            dir,
            locks: Mutex::new(HashMap::new()),
            fail: Mutex::new(None),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Arms a one-shot simulated crash for the next save.
    #[doc(hidden)]
    pub fn inject_failure(&self, point: FailPoint) {
        *self.fail.lock().unwrap() = Some(point);
    }

    /// Exclusive access to one session for a read-modify-write cycle.
    pub async fn lock(&self, id: &str) -> OwnedMutexGuard<()> {
        let m = self
            .locks
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(AsyncMutex::new(())))
            .clone();
        m.lock_owned().await
    }

    fn check_dir(&self) -> Result<(), StoreError> {
        if self.dir.is_dir() {
            Ok(())
        } else {
            Err(StoreError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("data directory {} is missing", self.dir.display()),
            )))
        }
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.path(id).is_file()
    }

    pub fn load(&self, id: &str) -> Result<TrialSession, StoreError> {
        self.check_dir()?;
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let text = match std::fs::read_to_string(self.path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        schema::from_str(&text).map_err(|e| StoreError::Corrupt {
            id: id.to_string(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, session: &TrialSession) -> Result<(), StoreError> {
        self.check_dir()?;
        let fail = self.fail.lock().unwrap().take();
        let mut tmp = tempfile::Builder::new().prefix(TMP_PREFIX).suffix(".json").tempfile_in(&self.dir)?;
        tmp.write_all(schema::to_string_pretty(session).as_bytes())?;
        tmp.as_file().sync_all()?;
        if fail == Some(FailPoint::BeforeRename) {
            // Leave the temporary file behind, as a dead process would.
            let _ = tmp.keep();
            return Err(simulated());
        }
        tmp.persist(self.path(&session.id)).map_err(|e| e.error)?;
        // Make the rename durable; not all platforms support syncing a
        // directory handle.
        if let Ok(d) = std::fs::File::open(&self.dir) {
            let _ = d.sync_all();
        }
        if fail == Some(FailPoint::AfterRename) {
            return Err(simulated());
        }
        Ok(())
    }

    /// All readable sessions, oldest first. Leftover temporary files are
    /// ignored.
    pub fn list(&self) -> Result<Vec<TrialSession>, StoreError> {
        self.check_dir()?;
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(id) = name.strip_suffix(".json") else {
                continue;
            };
            if name.starts_with('.') || !valid_id(id) {
                continue;
            }
            out.push(self.load(id)?);
        }
        out.sort_by(|a, b| (a.created_at_ms, &a.id).cmp(&(b.created_at_ms, &b.id)));
        Ok(out)
    }
}

/// Replaces `path` with `contents` via a synced temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new().prefix(TMP_PREFIX).tempfile_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn simulated() -> StoreError {
    StoreError::Io(std::io::Error::other("simulated crash"))
}
