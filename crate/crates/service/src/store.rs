use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::ApiError;
use crate::workspace::{FormatError, Workspace};

const FILE_PREFIX: &str = "ws-";
const FILE_SUFFIX: &str = ".json";

/// One JSON file per workspace in a directory. Writes go through a temporary
/// file and a rename; mutations of one workspace are serialized by a lock.
#[derive(Debug)]
pub struct WorkspaceStore {
    dir: PathBuf,
    next_id: AtomicU64,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn io_error(e: io::Error) -> ApiError {
    ApiError::internal(format!("workspace storage: {e}"))
}

fn format_error(e: FormatError) -> ApiError {
    ApiError::internal(format!("workspace file: {e}"))
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl WorkspaceStore {
    /// Opens (creating if needed) `dir`; new ids continue after the highest existing one.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<WorkspaceStore> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut highest = 0;
        for entry in fs::read_dir(&dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(n) = name
                .strip_prefix(FILE_PREFIX)
                .and_then(|s| s.strip_suffix(FILE_SUFFIX))
                .and_then(|s| s.parse::<u64>().ok())
            {
                highest = highest.max(n);
            }
        }
        Ok(WorkspaceStore {
            dir,
            next_id: AtomicU64::new(highest + 1),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn allocate_id(&self) -> String {
        format!("{FILE_PREFIX}{:06}", self.next_id.fetch_add(1, Ordering::SeqCst))
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{FILE_SUFFIX}"))
    }

    fn valid_id(id: &str) -> bool {
        id.strip_prefix(FILE_PREFIX)
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        Arc::clone(self.locks.lock().entry(id.to_string()).or_default())
    }

    pub fn insert(&self, ws: &Workspace) -> Result<(), ApiError> {
        let lock = self.lock_for(&ws.id);
        let _guard = lock.lock();
        write_atomic(&self.path(&ws.id), ws.to_json().as_bytes()).map_err(io_error)
    }

    pub fn load(&self, id: &str) -> Result<Workspace, ApiError> {
        if !Self::valid_id(id) {
            return Err(ApiError::not_found("WorkspaceNotFound", format!("workspace {id}")));
        }
        let text = match fs::read_to_string(self.path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ApiError::not_found("WorkspaceNotFound", format!("workspace {id}")))
            }
            Err(e) => return Err(io_error(e)),
        };
        Workspace::from_json(&text).map_err(format_error)
    }

    /// Applies `f` to a copy of the workspace and persists the copy only when
    /// `f` succeeds, so a failed mutation leaves the file untouched.
    pub fn mutate<T>(&self, id: &str, f: impl FnOnce(&mut Workspace) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock();
        let mut ws = self.load(id)?;
        let out = f(&mut ws)?;
        write_atomic(&self.path(id), ws.to_json().as_bytes()).map_err(io_error)?;
        Ok(out)
    }
}
