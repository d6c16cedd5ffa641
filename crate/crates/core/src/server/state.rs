use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::layout::ProcessGrid;
use crate::protocol::MatrixInfo;
use crate::testlib::SimState;

#[derive(Debug, Clone)]
pub struct Session {
    pub id: u64,
    pub buffer_bytes: usize,
    /// Allocated worker ranks; position in this list is the session rank.
    pub ranks: Vec<usize>,
    pub grid: Option<ProcessGrid>,
    pub libs: BTreeSet<u32>,
    pub handles: BTreeMap<u64, MatrixInfo>,
    pub sim: SimState,
}

impl Session {
    fn new(id: u64, buffer_bytes: usize) -> Self {
        Self {
            id,
            buffer_bytes,
            ranks: Vec::new(),
            grid: None,
            libs: BTreeSet::new(),
            handles: BTreeMap::new(),
            sim: SimState::default(),
        }
    }

    pub fn grid(&self) -> Result<ProcessGrid> {
        self.grid.ok_or_else(|| Error::InvalidArgument(format!("session {} has no workers", self.id)))
    }

    pub fn handle(&self, id: u64) -> Result<MatrixInfo> {
        self.handles.get(&id).copied().ok_or(Error::StaleHandle(id))
    }

    /// Session rank of worker `rank`, if allocated here.
    pub fn session_rank(&self, rank: usize) -> Option<usize> {
        self.ranks.iter().position(|&r| r == rank)
    }
}

/// Sessions and the free worker pool.
#[derive(Debug)]
pub struct DriverState {
    num_workers: usize,
    sessions: HashMap<u64, Session>,
    free: BTreeSet<usize>,
    next_session: u64,
}

impl DriverState {
    pub fn new(num_workers: usize) -> Self {
        Self { num_workers, sessions: HashMap::new(), free: (0..num_workers).collect(), next_session: 1 }
    }

    pub fn open_session(&mut self, buffer_bytes: usize) -> u64 {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(id, Session::new(id, buffer_bytes));
        id
    }

    pub fn session(&self, id: u64) -> Result<&Session> {
        self.sessions.get(&id).ok_or(Error::StaleSession(id))
    }

    pub fn session_mut(&mut self, id: u64) -> Result<&mut Session> {
        self.sessions.get_mut(&id).ok_or(Error::StaleSession(id))
    }

    /// Allocates `n` free workers, lowest ranks first. On failure the
    /// session is left unchanged.
    pub fn request_workers(&mut self, id: u64, n: usize) -> Result<(Vec<usize>, ProcessGrid)> {
        if n == 0 {
            return Err(Error::InvalidArgument("must request at least one worker".into()));
        }
        let free = self.free.len();
        let session = self.sessions.get_mut(&id).ok_or(Error::StaleSession(id))?;
        if !session.ranks.is_empty() {
            return Err(Error::InvalidArgument(format!("session {id} already holds {} workers", session.ranks.len())));
        }
        if free < n {
            return Err(Error::OutOfWorkers { requested: n, free });
        }
        let grid = ProcessGrid::make(n, None)?;
        let ranks: Vec<usize> = self.free.iter().take(n).copied().collect();
        for r in &ranks {
            self.free.remove(r);
        }
        session.ranks = ranks.clone();
        session.grid = Some(grid);
        Ok((ranks, grid))
    }

    /// Removes the session and returns its workers to the pool.
    pub fn close_session(&mut self, id: u64) -> Result<Session> {
        let session = self.sessions.remove(&id).ok_or(Error::StaleSession(id))?;
        self.free.extend(session.ranks.iter().copied());
        Ok(session)
    }

    pub fn free_workers(&self) -> usize {
        self.free.len()
    }

    /// Session holding worker `rank`, if any.
    pub fn holder_of(&self, rank: usize) -> Option<u64> {
        self.sessions.values().find(|s| s.ranks.contains(&rank)).map(|s| s.id)
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.len()
    }

    /// Free plus allocated equals the pool size and no rank is shared.
    pub fn pool_is_consistent(&self) -> bool {
        let mut seen: BTreeSet<usize> = self.free.clone();
        let mut total = self.free.len();
        for s in self.sessions.values() {
            total += s.ranks.len();
            for r in &s.ranks {
                if !seen.insert(*r) {
                    return false;
                }
            }
        }
        total == self.num_workers && seen.len() == self.num_workers
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_cluster_scenario() {
        let mut st = DriverState::new(9);
        let a = st.open_session(1 << 20);
        let b = st.open_session(1 << 20);
        let c = st.open_session(1 << 20);
        let (ra, ga) = st.request_workers(a, 4).unwrap();
        let (rb, _) = st.request_workers(b, 3).unwrap();
        assert_eq!(ra, vec![0, 1, 2, 3]);
        assert_eq!(rb, vec![4, 5, 6]);
        assert_eq!((ga.rows(), ga.cols()), (2, 2));
        assert!(matches!(st.request_workers(c, 4), Err(Error::OutOfWorkers { requested: 4, free: 2 })));
        assert!(st.session(c).unwrap().ranks.is_empty());
        assert!(st.pool_is_consistent());
        st.close_session(a).unwrap();
        let (rc, _) = st.request_workers(c, 4).unwrap();
        assert_eq!(rc, vec![0, 1, 2, 3]);
        assert!(st.pool_is_consistent());
        assert!(matches!(st.close_session(a), Err(Error::StaleSession(_))));
    }

    #[test]
    fn zero_request_rejected() {
        let mut st = DriverState::new(2);
        let a = st.open_session(1 << 20);
        assert!(matches!(st.request_workers(a, 0), Err(Error::InvalidArgument(_))));
        assert_eq!(st.free_workers(), 2);
    }

    #[test]
    fn session_ids_distinct() {
        let mut st = DriverState::new(1);
        assert_ne!(st.open_session(4096), st.open_session(4096));
    }
}
