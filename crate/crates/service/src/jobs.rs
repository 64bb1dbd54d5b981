use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::watch;

use crate::error::{ApiError, ErrorBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Search,
    Projection,
    Extraction,
    Fulltext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Canceled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("job cannot move from {from:?} to {to:?}")]
pub struct InvalidTransition {
    pub from: JobState,
    pub to: JobState,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Canceled)
    }

    /// The next state, if the move is forward: queued → running → terminal,
    /// or queued straight to canceled.
    pub fn advance(self, to: JobState) -> Result<JobState, InvalidTransition> {
        let ok = match (self, to) {
            (JobState::Queued, JobState::Running | JobState::Canceled | JobState::Failed) => true,
            (JobState::Running, t) => t.is_terminal(),
            _ => false,
        };
        if ok {
            Ok(to)
        } else {
            Err(InvalidTransition { from: self, to })
        }
    }
}

/// What a client sees when polling a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSnapshot {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub workspace: Option<String>,
    pub result: Option<Value>,
    pub error: Option<ErrorBody>,
}

/// Cooperative cancelation flag checked by running jobs.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_canceled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

struct JobEntry {
    state: watch::Sender<JobSnapshot>,
    cancel: CancelToken,
}

impl JobEntry {
    /// Applies a forward transition; ignored once the job is terminal.
    fn update(&self, to: JobState, result: Option<Value>, error: Option<ErrorBody>) -> bool {
        self.state.send_if_modified(|snap| match snap.state.advance(to) {
            Ok(next) => {
                snap.state = next;
                snap.result = result;
                snap.error = error;
                true
            }
            Err(_) => false,
        })
    }
}

/// Registry of background jobs. Work runs on the blocking thread pool.
#[derive(Default)]
pub struct JobManager {
    next_id: AtomicU64,
    jobs: RwLock<HashMap<String, Arc<JobEntry>>>,
}

impl JobManager {
    pub fn new() -> JobManager {
        JobManager::default()
    }

    fn register(&self, kind: JobKind, workspace: Option<String>) -> (String, Arc<JobEntry>) {
        let id = format!("job-{:06}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1);
        let (tx, _) = watch::channel(JobSnapshot {
            id: id.clone(),
            kind,
            state: JobState::Queued,
            workspace,
            result: None,
            error: None,
        });
        let entry = Arc::new(JobEntry {
            state: tx,
            cancel: CancelToken::default(),
        });
        self.jobs.write().insert(id.clone(), Arc::clone(&entry));
        (id, entry)
    }

    /// Queues `work` and returns the queued snapshot. `work` receives the job
    /// id and should return an error with code `Canceled` when it stops
    /// because of the token. Must be called from within a tokio runtime.
    pub fn spawn<F>(&self, kind: JobKind, workspace: Option<String>, work: F) -> JobSnapshot
    where
        F: FnOnce(&str, &CancelToken) -> Result<Value, ApiError> + Send + 'static,
    {
        let (id, entry) = self.register(kind, workspace);
        let snapshot = entry.state.borrow().clone();
        tokio::task::spawn_blocking(move || run(&id, &entry, work));
        snapshot
    }

    pub fn get(&self, id: &str) -> Option<JobSnapshot> {
        self.jobs.read().get(id).map(|e| e.state.borrow().clone())
    }

    /// Requests cancelation. Queued jobs cancel at once; running jobs stop at
    /// their next checkpoint. Terminal jobs are returned unchanged.
    pub fn cancel(&self, id: &str) -> Option<JobSnapshot> {
        let entry = self.jobs.read().get(id).cloned()?;
        entry.cancel.cancel();
        entry.update(JobState::Canceled, None, None);
        let snap = entry.state.borrow().clone();
        Some(snap)
    }

    /// Waits until the job reaches a terminal state.
    pub async fn wait(&self, id: &str) -> Option<JobSnapshot> {
        let mut rx = self.jobs.read().get(id)?.state.subscribe();
        let snap = rx.wait_for(|s| s.state.is_terminal()).await.ok()?.clone();
        Some(snap)
    }
}

fn run<F>(id: &str, entry: &JobEntry, work: F)
where
    F: FnOnce(&str, &CancelToken) -> Result<Value, ApiError>,
{
    if !entry.update(JobState::Running, None, None) {
        return;
    }
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| work(id, &entry.cancel)));
    match outcome {
        Ok(Ok(value)) => entry.update(JobState::Done, Some(value), None),
        Ok(Err(e)) if entry.cancel.is_canceled() && e.code() == "Canceled" => {
            entry.update(JobState::Canceled, None, Some(e.body))
        }
        Ok(Err(e)) => entry.update(JobState::Failed, None, Some(e.body)),
        Err(_) => entry.update(JobState::Failed, None, Some(ApiError::internal("job panicked").body)),
    };
}
