//! Live trial sessions backed by append-only JSON-lines event logs.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use combodose::trial::CohortRecord;
use combodose::{Combo, DesignConfig, DesignDecision, DoseGrid, PosteriorSummary, RngStream, TrialConfig, TrialState};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

// Stream tags under a session seed.
pub const DECIDE: u64 = 1;
pub const SUMMARY: u64 = 2;
pub const FINALIZE: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown trial '{0}'")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl From<combodose::Error> for SessionError {
    fn from(e: combodose::Error) -> Self {
        match e {
            combodose::Error::TrialStopped => Self::Conflict(e.to_string()),
            combodose::Error::Io(_) => Self::Storage(e.to_string()),
            _ => Self::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        Self::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for SessionError {
    fn from(e: serde_json::Error) -> Self {
        Self::Storage(e.to_string())
    }
}

pub type SessionResult<T> = Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Terminated,
    Finalized,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        design: DesignConfig,
        cfg: TrialConfig,
        grid: DoseGrid,
        at: u64,
    },
    Cohort {
        record: CohortRecord,
        at: u64,
    },
    Finalized {
        at: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub design: DesignConfig,
    pub cfg: TrialConfig,
    pub status: Status,
    pub created: u64,
    pub updated: u64,
    pub state: TrialState,
    /// Next combination to treat; `None` once the trial has stopped or is full.
    pub recommendation: Option<Combo>,
    pub posterior: Option<PosteriorSummary>,
    pub mtc: Option<Combo>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Seed for a session's random choices after `cohorts` cohorts.
pub fn session_seed(id: &str, cohorts: usize) -> RngStream {
    let base = match Uuid::parse_str(id) {
        Ok(u) => {
            let v = u.as_u128();
            (v >> 64) as u64 ^ v as u64
        }
        Err(_) => id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
        }),
    };
    RngStream::new(base, cohorts as u64)
}

impl Session {
    fn new(id: String, design: DesignConfig, cfg: TrialConfig, grid: DoseGrid, at: u64) -> SessionResult<Self> {
        design.build(&grid, &cfg)?;
        let state = TrialState::new(grid, cfg.start)?;
        Ok(Self {
            id,
            design,
            recommendation: Some(cfg.start),
            cfg,
            status: Status::Active,
            created: at,
            updated: at,
            state,
            posterior: None,
            mtc: None,
        })
    }

    /// Rebuild a session from its log.
    pub fn replay(events: &[Event]) -> SessionResult<Self> {
        let mut it = events.iter();
        let mut session = match it.next() {
            Some(Event::Created { id, design, cfg, grid, at }) => {
                Self::new(id.clone(), design.clone(), cfg.clone(), grid.clone(), *at)?
            }
            _ => return Err(SessionError::Storage("log does not start with a creation event".into())),
        };
        for e in it {
            session.apply(e)?;
        }
        Ok(session)
    }

    fn apply(&mut self, event: &Event) -> SessionResult<()> {
        match event {
            Event::Created { .. } => Err(SessionError::Storage("duplicate creation event".into())),
            Event::Cohort { record, at } => self.cohort(record.clone(), *at),
            Event::Finalized { at } => self.finalize(*at),
        }
    }

    /// Checks a submission against the current state without applying it.
    pub fn check(&self, record: &CohortRecord) -> SessionResult<()> {
        if self.status != Status::Active {
            return Err(SessionError::Conflict(format!("trial is {:?}", self.status).to_lowercase()));
        }
        self.state.grid.check(record.combo)?;
        if record.size == 0 || record.dlts > record.size {
            return Err(SessionError::Invalid(format!(
                "cohort reports {} DLTs out of {} patients",
                record.dlts, record.size
            )));
        }
        if self.state.total_n() + record.size > self.cfg.max_n {
            return Err(SessionError::Invalid(format!(
                "cohort would exceed the {} patient maximum",
                self.cfg.max_n
            )));
        }
        if self.state.eliminated[record.combo] {
            return Err(SessionError::Invalid(format!("combination {} has been eliminated", record.combo)));
        }
        if !record.overridden && self.recommendation != Some(record.combo) {
            return Err(SessionError::Invalid(format!(
                "combination {} is not the recommendation; set override to dose it anyway",
                record.combo
            )));
        }
        Ok(())
    }

    fn cohort(&mut self, record: CohortRecord, at: u64) -> SessionResult<()> {
        self.check(&record)?;
        let design = self.design.build(&self.state.grid, &self.cfg)?;
        self.state.record(record)?;
        let k = self.state.cohort_log.len();
        let seed = session_seed(&self.id, k);
        if self.state.total_n() + self.cfg.cohort_size > self.cfg.max_n {
            self.recommendation = None;
        } else {
            match design.decide(&mut self.state, &self.cfg, &mut seed.derive(DECIDE))? {
                DesignDecision::Continue(c) => self.recommendation = Some(c),
                DesignDecision::TerminateForSafety => {
                    self.recommendation = None;
                    self.status = Status::Terminated;
                }
            }
        }
        self.posterior = Some(design.summary(&self.state, &self.cfg, &mut seed.derive(SUMMARY))?);
        self.updated = at;
        Ok(())
    }

    fn finalize(&mut self, at: u64) -> SessionResult<()> {
        if self.status == Status::Finalized {
            return Err(SessionError::Conflict("trial is already finalized".into()));
        }
        self.mtc = if self.status == Status::Terminated {
            None
        } else {
            let design = self.design.build(&self.state.grid, &self.cfg)?;
            let seed = session_seed(&self.id, self.state.cohort_log.len());
            design.select_mtc(&self.state, &self.cfg, &mut seed.derive(FINALIZE))?
        };
        self.recommendation = None;
        self.status = Status::Finalized;
        self.updated = at;
        Ok(())
    }
}

/// Sessions in memory, each mirrored by `<id>.jsonl` under the data directory.
pub struct Store {
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> SessionResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn append(&self, id: &str, event: &Event) -> SessionResult<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.log_path(id))?;
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    pub fn read_log(&self, id: &str) -> SessionResult<Vec<Event>> {
        let f = File::open(self.log_path(id))?;
        BufReader::new(f)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect()
    }

    pub fn create(&self, design: DesignConfig, cfg: TrialConfig, grid: DoseGrid) -> SessionResult<Session> {
        let id = Uuid::new_v4().to_string();
        let at = now();
        let session = Session::new(id.clone(), design.clone(), cfg.clone(), grid.clone(), at)?;
        self.append(&id, &Event::Created { id: id.clone(), design, cfg, grid, at })?;
        self.sessions
            .lock()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    /// Exclusive handle on a session, loading it from disk if needed.
    fn handle(&self, id: &str) -> SessionResult<Arc<Mutex<Session>>> {
        let mut map = self.sessions.lock().unwrap();
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        if Uuid::parse_str(id).is_err() || !self.log_path(id).exists() {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let session = Session::replay(&self.read_log(id)?)?;
        let h = Arc::new(Mutex::new(session));
        map.insert(id.to_string(), h.clone());
        Ok(h)
    }

    pub fn get(&self, id: &str) -> SessionResult<Session> {
        Ok(self.handle(id)?.lock().unwrap().clone())
    }

    /// Applies an event and logs it; the in-memory session is untouched on failure.
    fn commit(&self, id: &str, event: Event) -> SessionResult<Session> {
        let h = self.handle(id)?;
        let mut guard = h.lock().unwrap();
        let mut next = guard.clone();
        next.apply(&event)?;
        self.append(id, &event)?;
        *guard = next;
        Ok(guard.clone())
    }

    pub fn submit(&self, id: &str, record: CohortRecord) -> SessionResult<Session> {
        self.commit(id, Event::Cohort { record, at: now() })
    }

    pub fn finalize(&self, id: &str) -> SessionResult<Session> {
        self.commit(id, Event::Finalized { at: now() })
    }
}
