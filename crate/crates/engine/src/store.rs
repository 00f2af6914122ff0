use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;

use crate::session::Session;
use crate::EngineError;

pub type SessionHandle = Arc<tokio::sync::Mutex<Session>>;

struct Inner {
    live: LruCache<String, SessionHandle>,
    /// Ids pushed out of `live`, remembered so lookups can report eviction.
    evicted: LruCache<String, ()>,
}

/// In-memory session table with least-recently-used eviction.
pub struct SessionStore {
    inner: Mutex<Inner>,
}

impl SessionStore {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        let evicted_cap = NonZeroUsize::new(capacity.max(1).saturating_mul(8)).expect("nonzero");
        SessionStore { inner: Mutex::new(Inner { live: LruCache::new(cap), evicted: LruCache::new(evicted_cap) }) }
    }

    pub fn insert(&self, session: Session) -> SessionHandle {
        let id = session.id().to_owned();
        let handle = Arc::new(tokio::sync::Mutex::new(session));
        let mut inner = self.inner.lock().expect("session store lock");
        inner.evicted.pop(&id);
        if let Some((old_id, _)) = inner.live.push(id.clone(), handle.clone()) {
            if old_id != id {
                inner.evicted.put(old_id, ());
            }
        }
        handle
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, EngineError> {
        let mut inner = self.inner.lock().expect("session store lock");
        if let Some(h) = inner.live.get(id) {
            return Ok(h.clone());
        }
        if inner.evicted.contains(id) {
            Err(EngineError::Evicted(id.to_owned()))
        } else {
            Err(EngineError::NotFound(id.to_owned()))
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session store lock").live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
