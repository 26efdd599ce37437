use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime};

use hgml_core::api::PairInfo;
use hgml_core::pairing::{correlation_table, select_pairs, DimensionPair, SelectMode};
use hgml_core::polygon::Gate;
use hgml_core::rng::derive_seed;
use hgml_core::split::{normalize_pair, project, LabeledPoint, NormStats, SplitSet};
use hgml_core::store::ModelStore;
use hgml_core::Dataset;
use rand::RngCore;
use subtle::ConstantTimeEq;

use crate::error::ApiError;

/// Random 128-bit token, hex encoded.
pub fn token() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub gate: Gate,
    pub pair_pool_size: usize,
    pub tasks_per_pair: usize,
    pub idle_timeout: Duration,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            gate: Gate::default(),
            pair_pool_size: 10,
            tasks_per_pair: 3,
            idle_timeout: Duration::from_secs(30 * 60),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Open,
    Submitting,
    Consumed,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub worker_id: String,
    pub pair: DimensionPair,
    pub stats: NormStats,
    pub phase: Phase,
    pub last_seen: Instant,
}

#[derive(Debug, Clone)]
pub struct IssuedCode {
    pub code: String,
    pub session_id: String,
    pub model_id: String,
    pub issued_at: SystemTime,
    pub used: bool,
}

pub struct AppState {
    pub dataset: Dataset,
    pub dataset_hash: String,
    pub split: SplitSet,
    pub settings: Settings,
    pub store: Arc<ModelStore>,
    pool: Mutex<VecDeque<DimensionPair>>,
    sessions: Mutex<HashMap<String, Session>>,
    codes: Mutex<Vec<IssuedCode>>,
}

impl AppState {
    /// Builds the pair pool by sampling low-correlation pairs, each offered
    /// `tasks_per_pair` times.
    pub fn new(
        dataset: Dataset,
        split: SplitSet,
        store: ModelStore,
        settings: Settings,
    ) -> hgml_core::Result<Self> {
        split.validate(dataset.len())?;
        let table = correlation_table(&dataset, &split)?;
        let pairs = select_pairs(
            &table,
            settings.pair_pool_size.max(1),
            SelectMode::Sample,
            derive_seed(settings.seed, "pairs"),
        )?;
        let mut pool = VecDeque::new();
        for _ in 0..settings.tasks_per_pair {
            pool.extend(pairs.iter().copied());
        }
        Ok(Self::with_pool(dataset, split, store, settings, pool))
    }

    pub fn with_pool(
        dataset: Dataset,
        split: SplitSet,
        store: ModelStore,
        settings: Settings,
        pool: VecDeque<DimensionPair>,
    ) -> Self {
        Self {
            dataset_hash: dataset.content_hash(),
            dataset,
            split,
            settings,
            store: Arc::new(store),
            pool: Mutex::new(pool),
            sessions: Mutex::new(HashMap::new()),
            codes: Mutex::new(Vec::new()),
        }
    }

    pub fn pool_remaining(&self) -> usize {
        lock(&self.pool).len()
    }

    pub fn pair_info(&self, pair: DimensionPair) -> PairInfo {
        let cols = self.dataset.columns();
        PairInfo {
            dim_a: pair.dim_a(),
            dim_b: pair.dim_b(),
            name_a: cols[pair.dim_a()].name.clone(),
            name_b: cols[pair.dim_b()].name.clone(),
        }
    }

    /// Opens a session on the next usable pair. Pairs that cannot be
    /// normalized are skipped.
    pub fn open_session(
        &self,
        worker_id: String,
    ) -> Result<(String, DimensionPair, Vec<LabeledPoint>), ApiError> {
        loop {
            let pair = lock(&self.pool).pop_front().ok_or(ApiError::PoolExhausted)?;
            let Ok((points, stats)) = normalize_pair(&self.dataset, &self.split, pair) else {
                tracing::warn!(%pair, "skipping pair without variance");
                continue;
            };
            let id = token();
            lock(&self.sessions).insert(
                id.clone(),
                Session {
                    worker_id,
                    pair,
                    stats,
                    phase: Phase::Open,
                    last_seen: Instant::now(),
                },
            );
            return Ok((id, pair, points));
        }
    }

    /// Returns a live session, refreshing its idle clock.
    pub fn touch(&self, id: &str) -> Result<Session, ApiError> {
        let mut sessions = lock(&self.sessions);
        let now = Instant::now();
        let expired = match sessions.get(id) {
            None => return Err(ApiError::UnknownSession),
            Some(s) => s.phase != Phase::Consumed && now - s.last_seen > self.settings.idle_timeout,
        };
        if expired {
            sessions.remove(id);
            return Err(ApiError::UnknownSession);
        }
        let s = sessions.get_mut(id).ok_or(ApiError::UnknownSession)?;
        s.last_seen = now;
        Ok(s.clone())
    }

    /// Moves an open session to `Submitting`, so only one submit runs at a time.
    pub fn begin_submit(&self, id: &str) -> Result<Session, ApiError> {
        let session = self.touch(id)?;
        let mut sessions = lock(&self.sessions);
        let s = sessions.get_mut(id).ok_or(ApiError::UnknownSession)?;
        match s.phase {
            Phase::Open => {
                s.phase = Phase::Submitting;
                Ok(session)
            }
            Phase::Submitting | Phase::Consumed => Err(ApiError::AlreadySubmitted),
        }
    }

    pub fn finish_submit(&self, id: &str, consumed: bool) {
        if let Some(s) = lock(&self.sessions).get_mut(id) {
            s.phase = if consumed { Phase::Consumed } else { Phase::Open };
        }
    }

    /// Drops open sessions idle for longer than the timeout.
    pub fn prune_idle(&self) -> usize {
        let now = Instant::now();
        let timeout = self.settings.idle_timeout;
        let mut sessions = lock(&self.sessions);
        let before = sessions.len();
        sessions.retain(|_, s| s.phase != Phase::Open || now - s.last_seen <= timeout);
        before - sessions.len()
    }

    pub fn validation_points(&self, session: &Session) -> Vec<LabeledPoint> {
        project(&self.dataset, session.pair, &session.stats, &self.split.annotation_valid)
    }

    pub fn issue_code(&self, session_id: &str, model_id: &str) -> String {
        let code = token();
        lock(&self.codes).push(IssuedCode {
            code: code.clone(),
            session_id: session_id.to_owned(),
            model_id: model_id.to_owned(),
            issued_at: SystemTime::now(),
            used: false,
        });
        code
    }

    /// Checks `candidate` against every issued code without stopping at the
    /// first match. Returns the model id and whether the code was already used.
    pub fn redeem(&self, candidate: &str) -> Option<(String, bool)> {
        let mut codes = lock(&self.codes);
        let mut hit = None;
        for (i, issued) in codes.iter().enumerate() {
            if bool::from(issued.code.as_bytes().ct_eq(candidate.as_bytes())) {
                hit = Some(i);
            }
        }
        let issued = &mut codes[hit?];
        let was_used = issued.used;
        issued.used = true;
        Some((issued.model_id.clone(), was_used))
    }
}
