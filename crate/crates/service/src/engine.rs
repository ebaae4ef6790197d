//! Session engine: the domain operations behind the HTTP routes.
//!
//! Mutations on one session are serialized by a FIFO async mutex. Each one
//! clones the last snapshot, applies the change, commits it to the store
//! together with its events and then publishes the new snapshot. Reads use
//! the published snapshot without taking the lock. Generations run outside
//! the lock and are applied only if the session version has not moved.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::{watch, Semaphore};
use tokio_util::sync::CancellationToken;

use threadwise_core::llm::gateway::Gateway;
use threadwise_core::metrics::{usage_row, UsageRow};
use threadwise_core::model::{
    AnswerDraft, Comment, EventKind, EventRecord, KeywordBatch, ModelError, Page, PathwaysResponse, Question,
    QuestionCandidate, QuestionId, Session, SessionId, SummarySnapshot, SurveyPhase, Theme, ThemeId,
    ThemeSuggestion, Timestamp, Trigger,
};
use threadwise_core::pipelines::{
    PipelineError, Pipelines, DEFAULT_QUESTION_COUNT, DEFAULT_THEME_COUNT, INITIAL_KEYWORD_COUNT,
    MORE_KEYWORD_COUNT,
};

use crate::clock::{Clock, IdGen, SystemClock};
use crate::store::{Store, StoreError, StoreRecord};

/// Concurrent provider calls across all sessions.
pub const DEFAULT_PROVIDER_SLOTS: usize = 4;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session moved from version {started} to {current} during generation; result discarded")]
    StaleVersion { started: u64, current: u64 },
    #[error("unknown event kind {0:?}")]
    UnknownEventKind(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no summary has been generated yet")]
    NoSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordMode {
    Initial,
    More,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThemeSuggestions {
    pub state_version: u64,
    pub suggestions: Vec<ThemeSuggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionSuggestions {
    pub state_version: u64,
    pub candidates: Vec<QuestionCandidate>,
}

pub struct EngineOptions {
    pub clock: Arc<dyn Clock>,
    pub ids: IdGen,
    pub default_locale: String,
    pub provider_slots: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            clock: Arc::new(SystemClock),
            ids: IdGen::Uuid,
            default_locale: "en".into(),
            provider_slots: DEFAULT_PROVIDER_SLOTS,
        }
    }
}

struct SlotState {
    last_event: Timestamp,
}

struct Slot {
    lock: tokio::sync::Mutex<SlotState>,
    snapshot: RwLock<Arc<Session>>,
    // auto comments still being generated, per question
    pending: Mutex<HashMap<QuestionId, watch::Receiver<bool>>>,
}

struct Inner {
    store: Arc<dyn Store>,
    pipelines: Pipelines,
    clock: Arc<dyn Clock>,
    ids: IdGen,
    default_locale: String,
    slots: Mutex<HashMap<SessionId, Arc<Slot>>>,
    workers: Semaphore,
    cancel: CancellationToken,
}

#[derive(Clone)]
pub struct Engine {
    inner: Arc<Inner>,
}

fn page_event(ts: Timestamp, kind: EventKind, page: Page) -> EventRecord {
    EventRecord::page(ts, kind, page)
}

impl Engine {
    pub fn new(store: Arc<dyn Store>, gateway: Gateway, options: EngineOptions) -> Self {
        let cancel = CancellationToken::new();
        Self {
            inner: Arc::new(Inner {
                store,
                pipelines: Pipelines::new(gateway).with_cancel(cancel.clone()),
                clock: options.clock,
                ids: options.ids,
                default_locale: options.default_locale,
                slots: Mutex::new(HashMap::new()),
                workers: Semaphore::new(options.provider_slots.max(1)),
                cancel,
            }),
        }
    }

    pub fn store(&self) -> &Arc<dyn Store> {
        &self.inner.store
    }

    /// Aborts in-flight generations; they fail with `Cancelled`.
    pub fn shutdown(&self) {
        self.inner.cancel.cancel();
    }

    fn slot(&self, id: &SessionId) -> Result<Arc<Slot>, EngineError> {
        if let Some(slot) = self.inner.slots.lock().get(id) {
            return Ok(slot.clone());
        }
        let record = self.inner.store.load(id)?;
        let last_event = record.events.last().map(|e| e.timestamp).unwrap_or_default();
        let slot = Arc::new(Slot {
            lock: tokio::sync::Mutex::new(SlotState { last_event }),
            snapshot: RwLock::new(Arc::new(record.session)),
            pending: Mutex::new(HashMap::new()),
        });
        Ok(self.inner.slots.lock().entry(id.clone()).or_insert(slot).clone())
    }

    /// Latest committed state of a session.
    pub fn session(&self, id: &SessionId) -> Result<Arc<Session>, EngineError> {
        Ok(self.slot(id)?.snapshot.read().clone())
    }

    pub fn export(&self, id: &SessionId) -> Result<StoreRecord, EngineError> {
        self.slot(id)?;
        Ok(self.inner.store.load(id)?)
    }

    pub fn metrics(&self, id: &SessionId) -> Result<UsageRow, EngineError> {
        Ok(usage_row(&*self.session(id)?))
    }

    pub fn question(&self, id: &SessionId, qid: &QuestionId) -> Result<Question, EngineError> {
        let s = self.session(id)?;
        let (_, q) = s
            .find_question(qid)
            .ok_or_else(|| ModelError::UnknownQuestion(qid.to_string()))?;
        Ok(q.clone())
    }

    pub fn latest_summary(&self, id: &SessionId) -> Result<SummarySnapshot, EngineError> {
        self.session(id)?.summaries.last().cloned().ok_or(EngineError::NoSummary)
    }

    /// Runs `apply` against a copy of the session under the session lock.
    /// `expect_version` turns the call into a staleness-checked one. Every
    /// returned event gets the commit timestamp; mutation events also get
    /// the resulting `version`.
    async fn mutate<T>(
        &self,
        id: &SessionId,
        expect_version: Option<u64>,
        apply: impl FnOnce(&mut Session, Timestamp) -> Result<(T, Vec<EventRecord>), EngineError>,
    ) -> Result<T, EngineError> {
        let slot = self.slot(id)?;
        let mut state = slot.lock.lock().await;
        // no await below this point: a dropped request cannot leave a half-applied change
        let current = slot.snapshot.read().clone();
        if let Some(started) = expect_version {
            if current.state_version != started {
                return Err(EngineError::StaleVersion {
                    started,
                    current: current.state_version,
                });
            }
        }
        let ts = self
            .inner
            .clock
            .now()
            .max(state.last_event)
            .max(current.latest_timestamp());
        let mut next = (*current).clone();
        let (out, mut events) = apply(&mut next, ts)?;
        let mutated = next.state_version != current.state_version;
        for e in &mut events {
            e.timestamp = ts;
            if mutated && !e.kind.is_page() && !matches!(e.kind, EventKind::ThemeSuggested | EventKind::QuestionSuggested) {
                e.payload.insert("version".into(), next.state_version.to_string());
            }
        }
        if !mutated && events.is_empty() {
            return Ok(out);
        }
        self.inner.store.commit(&next, &events)?;
        if let Some(last) = events.last() {
            state.last_event = last.timestamp;
        }
        *slot.snapshot.write() = Arc::new(next);
        Ok(out)
    }

    async fn generate<T>(
        &self,
        fut: impl std::future::Future<Output = Result<T, PipelineError>>,
    ) -> Result<T, EngineError> {
        let _permit = self
            .inner
            .workers
            .acquire()
            .await
            .map_err(|_| PipelineError::Gateway(threadwise_core::llm::GatewayError::Cancelled))?;
        Ok(fut.await?)
    }

    /// Creates a session. `started_at` marks when the user began writing the
    /// narrative; it opens the narrative page segment.
    pub fn create_session(
        &self,
        narrative: &str,
        locale: Option<&str>,
        started_at: Option<Timestamp>,
    ) -> Result<Session, EngineError> {
        let now = self.inner.clock.now();
        let locale = locale.filter(|l| !l.trim().is_empty()).unwrap_or(&self.inner.default_locale);
        let id = self.inner.ids.next();
        let session = Session::create(id.clone(), narrative, locale, now)?;
        let enter_at = started_at.map_or(now, |t| t.min(now));
        let events = [page_event(enter_at, EventKind::PageEnter, Page::Narrative)];
        self.inner.store.commit(&session, &events)?;
        let slot = Arc::new(Slot {
            lock: tokio::sync::Mutex::new(SlotState { last_event: enter_at }),
            snapshot: RwLock::new(Arc::new(session.clone())),
            pending: Mutex::new(HashMap::new()),
        });
        self.inner.slots.lock().insert(id, slot);
        Ok(session)
    }

    pub async fn suggest_themes(&self, id: &SessionId, n: Option<u32>) -> Result<ThemeSuggestions, EngineError> {
        let snap = self.session(id)?;
        let n = n.unwrap_or(DEFAULT_THEME_COUNT);
        let suggestions = self.generate(self.inner.pipelines.generate_themes(&snap, n)).await?;
        let version = snap.state_version;
        let events = suggestions
            .iter()
            .map(|s| EventRecord::new(Timestamp(0), EventKind::ThemeSuggested).with("name", s.main_theme.clone()))
            .collect();
        self.mutate(id, Some(version), |_, _| Ok(((), events))).await?;
        Ok(ThemeSuggestions {
            state_version: version,
            suggestions,
        })
    }

    pub async fn activate_theme(&self, id: &SessionId, suggestion: ThemeSuggestion) -> Result<Theme, EngineError> {
        self.mutate(id, None, |s, ts| {
            let origin = match suggestion.origin {
                threadwise_core::model::Origin::Ai => "ai",
                threadwise_core::model::Origin::User => "user",
            };
            let theme = s.activate_theme(suggestion, ts)?.clone();
            let event = EventRecord::new(ts, EventKind::ThemeActivated)
                .with("theme", theme.id.as_str())
                .with("name", theme.name())
                .with("origin", origin);
            Ok((theme, vec![event]))
        })
        .await
    }

    pub async fn pin_theme(&self, id: &SessionId, suggestion: ThemeSuggestion) -> Result<(), EngineError> {
        self.mutate(id, None, |s, ts| {
            let event = EventRecord::new(ts, EventKind::ThemePinned).with("name", suggestion.main_theme.clone());
            s.pin_theme(suggestion)?;
            Ok(((), vec![event]))
        })
        .await
    }

    pub async fn suggest_questions(
        &self,
        id: &SessionId,
        theme: &ThemeId,
        n: Option<u32>,
        after_question: Option<&QuestionId>,
    ) -> Result<QuestionSuggestions, EngineError> {
        let snap = self.session(id)?;
        let n = n.unwrap_or(DEFAULT_QUESTION_COUNT);
        let candidates = self
            .generate(self.inner.pipelines.generate_questions(&snap, theme, n, after_question))
            .await?;
        let version = snap.state_version;
        let events = candidates
            .iter()
            .map(|c| {
                EventRecord::new(Timestamp(0), EventKind::QuestionSuggested)
                    .with("theme", theme.as_str())
                    .with("text", c.text.clone())
            })
            .collect();
        self.mutate(id, Some(version), |_, _| Ok(((), events))).await?;
        Ok(QuestionSuggestions {
            state_version: version,
            candidates,
        })
    }

    /// Appends a question to a theme and starts generating its auto comment
    /// in the background. Poll [`Engine::question`] to see it arrive.
    pub async fn select_question(
        &self,
        id: &SessionId,
        theme: &ThemeId,
        candidate: QuestionCandidate,
    ) -> Result<Question, EngineError> {
        let slot = self.slot(id)?;
        let (tx, rx) = watch::channel(false);
        let question = self
            .mutate(id, None, |s, ts| {
                let q = s.select_question(theme, candidate, ts)?.clone();
                // registered before the lock is released so a racing user
                // comment waits for this one
                slot.pending.lock().insert(q.id.clone(), rx);
                let event = EventRecord::new(ts, EventKind::QuestionSelected)
                    .with("theme", theme.as_str())
                    .with("question", q.id.as_str());
                Ok((q, vec![event]))
            })
            .await?;
        self.spawn_auto_comment(slot, id, &question.id, tx);
        Ok(question)
    }

    fn spawn_auto_comment(&self, slot: Arc<Slot>, id: &SessionId, qid: &QuestionId, tx: watch::Sender<bool>) {
        let engine = self.clone();
        let (id, qid) = (id.clone(), qid.clone());
        tokio::spawn(async move {
            if let Err(e) = engine.apply_auto_comment(&id, &qid).await {
                tracing::warn!(session = %id, question = %qid, error = %e, "auto comment dropped");
            }
            slot.pending.lock().remove(&qid);
            let _ = tx.send(true);
        });
    }

    async fn apply_auto_comment(&self, id: &SessionId, qid: &QuestionId) -> Result<(), EngineError> {
        let snap = self.session(id)?;
        let draft = self.generate(self.inner.pipelines.generate_comment(&snap, qid)).await?;
        // applied even if the session moved on: the comment belongs to the
        // question's opening state and must stay the first comment
        self.mutate(id, None, |s, ts| {
            s.add_comment(qid, draft, Trigger::Auto, ts)?;
            let event = EventRecord::new(ts, EventKind::CommentRequested)
                .with("question", qid.as_str())
                .with("trigger", Trigger::Auto.as_str());
            Ok(((), vec![event]))
        })
        .await
    }

    async fn wait_auto(&self, id: &SessionId, qid: &QuestionId) -> Result<(), EngineError> {
        let rx = self.slot(id)?.pending.lock().get(qid).cloned();
        if let Some(mut rx) = rx {
            let _ = rx.wait_for(|done| *done).await;
        }
        Ok(())
    }

    /// Waits until no auto comment of the session is still pending.
    pub async fn settle(&self, id: &SessionId) -> Result<(), EngineError> {
        loop {
            let slot = self.slot(id)?;
            let next = slot.pending.lock().iter().next().map(|(q, rx)| (q.clone(), rx.clone()));
            match next {
                Some((qid, mut rx)) => {
                    if rx.wait_for(|done| *done).await.is_err() {
                        // the selection never committed
                        slot.pending.lock().remove(&qid);
                    }
                }
                None => return Ok(()),
            }
        }
    }

    /// [`Engine::settle`] for every loaded session, bounded by `limit`.
    pub async fn settle_all(&self, limit: Duration) -> bool {
        let ids: Vec<SessionId> = self.inner.slots.lock().keys().cloned().collect();
        let all = async {
            for id in ids {
                let _ = self.settle(&id).await;
            }
        };
        tokio::time::timeout(limit, all).await.is_ok()
    }

    pub async fn update_answer(&self, id: &SessionId, qid: &QuestionId, text: &str) -> Result<AnswerDraft, EngineError> {
        self.mutate(id, None, |s, ts| {
            let answer = s.update_answer(qid, text, ts)?.clone();
            let event = EventRecord::new(ts, EventKind::AnswerUpdated)
                .with("question", qid.as_str())
                .with("text", text)
                .with("revision", answer.revision.to_string());
            Ok((answer, vec![event]))
        })
        .await
    }

    /// `initial` reveals the first batch, generating it once; `more` always
    /// generates a fresh batch disjoint from the earlier ones.
    pub async fn keywords(&self, id: &SessionId, qid: &QuestionId, mode: KeywordMode) -> Result<KeywordBatch, EngineError> {
        let snap = self.session(id)?;
        let (_, q) = snap
            .find_question(qid)
            .ok_or_else(|| ModelError::UnknownQuestion(qid.to_string()))?;
        if mode == KeywordMode::Initial {
            if let Some(first) = q.keyword_batches.first().cloned() {
                return self
                    .mutate(id, None, |s, _| {
                        s.set_keywords_visible(qid, true)?;
                        Ok((first, Vec::new()))
                    })
                    .await;
            }
        }
        let count = match mode {
            KeywordMode::Initial => INITIAL_KEYWORD_COUNT,
            KeywordMode::More => MORE_KEYWORD_COUNT,
        };
        let keywords = self
            .generate(self.inner.pipelines.generate_keywords(&snap, qid, count))
            .await?;
        let batch_index = q.keyword_batches.len() as u32;
        let kind = match mode {
            KeywordMode::Initial => EventKind::KeywordsRevealed,
            KeywordMode::More => EventKind::KeywordsMore,
        };
        self.mutate(id, Some(snap.state_version), |s, ts| {
            let batch = s
                .add_keyword_batch(qid, KeywordBatch { batch_index, keywords })?
                .clone();
            s.set_keywords_visible(qid, true)?;
            let event = EventRecord::new(ts, kind)
                .with("question", qid.as_str())
                .with("batch", batch_index.to_string())
                .with("count", batch.keywords.len().to_string());
            Ok((batch, vec![event]))
        })
        .await
    }

    /// A user-requested comment. Waits for the question's auto comment so
    /// that one stays first.
    pub async fn request_comment(&self, id: &SessionId, qid: &QuestionId) -> Result<Comment, EngineError> {
        self.wait_auto(id, qid).await?;
        let snap = self.session(id)?;
        let draft = self.generate(self.inner.pipelines.generate_comment(&snap, qid)).await?;
        self.mutate(id, Some(snap.state_version), |s, ts| {
            let comment = s.add_comment(qid, draft, Trigger::User, ts)?.clone();
            let event = EventRecord::new(ts, EventKind::CommentRequested)
                .with("question", qid.as_str())
                .with("trigger", Trigger::User.as_str());
            Ok((comment, vec![event]))
        })
        .await
    }

    pub async fn summarize(&self, id: &SessionId) -> Result<SummarySnapshot, EngineError> {
        let snap = self.session(id)?;
        let draft = self.generate(self.inner.pipelines.generate_summary(&snap)).await?;
        self.mutate(id, Some(snap.state_version), |s, ts| {
            let snapshot = s.add_summary(draft.text, draft.state_version, ts).clone();
            let event = EventRecord::new(ts, EventKind::SummaryRequested)
                .with("summarized_version", snapshot.state_version.to_string());
            Ok((snapshot, vec![event]))
        })
        .await
    }

    pub async fn submit_survey(&self, id: &SessionId, phase: SurveyPhase, items: &[i64]) -> Result<u32, EngineError> {
        let response = PathwaysResponse::new(items)?;
        self.mutate(id, None, |s, ts| {
            let score = s.submit_survey(phase, response)?;
            let phase = match phase {
                SurveyPhase::Pre => "pre",
                SurveyPhase::Post => "post",
            };
            let event = EventRecord::new(ts, EventKind::SurveySubmitted)
                .with("phase", phase)
                .with("score", score.to_string());
            Ok((score, vec![event]))
        })
        .await
    }

    /// Records a UI page event. Other kinds are logged by the operations
    /// themselves and are refused here.
    pub async fn record_event(&self, id: &SessionId, kind: &str, page: Option<&str>) -> Result<EventRecord, EngineError> {
        let kind = EventKind::parse(kind).ok_or_else(|| EngineError::UnknownEventKind(kind.to_owned()))?;
        if !kind.is_page() {
            return Err(EngineError::InvalidRequest(format!(
                "{} events are recorded by the service itself",
                kind.as_str()
            )));
        }
        let page = page
            .and_then(Page::parse)
            .ok_or_else(|| EngineError::InvalidRequest("payload.page must be narrative, exploration or summary".into()))?;
        self.mutate(id, None, |_, ts| {
            let event = page_event(ts, kind, page);
            Ok((event.clone(), vec![event]))
        })
        .await
    }
}
