//! Scripted traces replayed against an embedded engine with the mock
//! provider. The same script and seed always produce byte-identical
//! outputs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use threadwise_core::canonical::to_canonical_string;
use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::metrics::{phase_timeline, usage_row, PhaseTimeline, UsageRow};
use threadwise_core::model::{
    QuestionCandidate, QuestionId, SessionId, SurveyPhase, ThemeId, ThemeSuggestion, Timestamp,
};

use crate::clock::{IdGen, ManualClock};
use crate::engine::{Engine, EngineError, EngineOptions, KeywordMode};
use crate::store::{InMemoryStore, StoreRecord};

/// Clock advance for steps without an explicit `at`.
pub const DEFAULT_STEP_MS: i64 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceScript {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub steps: Vec<Step>,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Clock value in milliseconds when the step runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<i64>,
    #[serde(flatten)]
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Create {
        narrative: String,
        #[serde(default)]
        locale: Option<String>,
        #[serde(default)]
        started_at: Option<i64>,
    },
    Page {
        kind: String,
        page: String,
    },
    SuggestThemes {
        #[serde(default)]
        n: Option<u32>,
    },
    /// Activates the `index`th suggestion of the latest theme batch.
    Activate {
        index: usize,
    },
    ActivateCustom {
        name: String,
    },
    Pin {
        index: usize,
    },
    SuggestQuestions {
        theme: String,
        #[serde(default)]
        n: Option<u32>,
        #[serde(default)]
        after: Option<String>,
    },
    /// Selects the `index`th candidate of the theme's latest batch.
    Select {
        theme: String,
        index: usize,
    },
    Answer {
        question: String,
        text: String,
    },
    Keywords {
        question: String,
        mode: KeywordMode,
    },
    Comment {
        question: String,
    },
    Summary,
    Survey {
        phase: SurveyPhase,
        items: Vec<i64>,
    },
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot read script: {0}")]
    Read(#[from] std::io::Error),
    #[error("script does not parse: {0}")]
    Parse(String),
    #[error("step {step}: {message}")]
    Script { step: usize, message: String },
    #[error("step {step}: {source}")]
    Domain {
        step: usize,
        #[source]
        source: EngineError,
    },
}

impl TraceScript {
    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        serde_json::from_str(text).map_err(|e| ReplayError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub record: StoreRecord,
    pub row: UsageRow,
    pub timeline: PhaseTimeline,
}

impl ReplayOutcome {
    pub fn export_json(&self) -> String {
        self.record.to_canonical()
    }

    pub fn metrics_json(&self) -> String {
        to_canonical_string(&self.row).expect("rows serialize")
    }

    pub fn timeline_json(&self) -> String {
        to_canonical_string(&self.timeline).expect("timelines serialize")
    }

    /// Writes `export.json`, `metrics.json` and `timeline.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("export.json"), self.export_json())?;
        std::fs::write(dir.join("metrics.json"), self.metrics_json())?;
        std::fs::write(dir.join("timeline.json"), self.timeline_json())?;
        Ok(())
    }
}

struct Cursor {
    session: Option<SessionId>,
    themes: Vec<ThemeSuggestion>,
    candidates: HashMap<String, Vec<QuestionCandidate>>,
    theme_ids: Vec<String>,
    question_ids: Vec<String>,
}

impl Cursor {
    fn session(&self, step: usize) -> Result<&SessionId, ReplayError> {
        self.session.as_ref().ok_or_else(|| ReplayError::Script {
            step,
            message: "no session yet; the script must start with create".into(),
        })
    }

    fn theme(&self, step: usize, id: &str) -> Result<ThemeId, ReplayError> {
        if self.theme_ids.iter().any(|t| t == id) {
            Ok(ThemeId::from(id))
        } else {
            Err(ReplayError::Script {
                step,
                message: format!("theme {id} is referenced before it was created"),
            })
        }
    }

    fn question(&self, step: usize, id: &str) -> Result<QuestionId, ReplayError> {
        if self.question_ids.iter().any(|q| q == id) {
            Ok(QuestionId::from(id))
        } else {
            Err(ReplayError::Script {
                step,
                message: format!("question {id} is referenced before it was created"),
            })
        }
    }

    fn suggestion(&self, step: usize, index: usize) -> Result<ThemeSuggestion, ReplayError> {
        self.themes.get(index).cloned().ok_or_else(|| ReplayError::Script {
            step,
            message: format!("no theme suggestion #{index} in the latest batch of {}", self.themes.len()),
        })
    }
}

/// Runs `script` and returns the exported record, metrics row and timeline.
/// `seed` overrides the script's seed.
pub async fn replay(script: &TraceScript, seed: Option<u64>) -> Result<ReplayOutcome, ReplayError> {
    let seed = seed.unwrap_or(script.seed);
    let clock = Arc::new(ManualClock::new(0));
    let engine = Engine::new(
        Arc::new(InMemoryStore::new()),
        Gateway::from_config(ProviderConfig::mock(seed)).expect("mock config is valid"),
        EngineOptions {
            clock: clock.clone(),
            ids: IdGen::sequential(),
            ..EngineOptions::default()
        },
    );
    let mut cur = Cursor {
        session: None,
        themes: Vec::new(),
        candidates: HashMap::new(),
        theme_ids: Vec::new(),
        question_ids: Vec::new(),
    };
    for (step, s) in script.steps.iter().enumerate() {
        match s.at {
            Some(at) => clock.set(at),
            None if step > 0 => clock.advance(DEFAULT_STEP_MS),
            None => {}
        }
        run_step(&engine, &mut cur, step, &s.op).await?;
    }
    let id = cur.session(script.steps.len())?.clone();
    engine.settle(&id).await.map_err(|source| ReplayError::Domain {
        step: script.steps.len(),
        source,
    })?;
    let record = engine.export(&id).map_err(|source| ReplayError::Domain {
        step: script.steps.len(),
        source,
    })?;
    Ok(ReplayOutcome {
        row: usage_row(&record.session),
        timeline: phase_timeline(&record.events),
        record,
    })
}

async fn run_step(engine: &Engine, cur: &mut Cursor, step: usize, op: &Op) -> Result<(), ReplayError> {
    let domain = |source| ReplayError::Domain { step, source };
    if let Op::Create {
        narrative,
        locale,
        started_at,
    } = op
    {
        if cur.session.is_some() {
            return Err(ReplayError::Script {
                step,
                message: "a script holds exactly one create step".into(),
            });
        }
        let s = engine
            .create_session(narrative, locale.as_deref(), started_at.map(Timestamp))
            .map_err(domain)?;
        cur.session = Some(s.id);
        return Ok(());
    }
    let id = cur.session(step)?.clone();
    match op {
        Op::Create { .. } => unreachable!("handled above"),
        Op::Page { kind, page } => {
            engine.record_event(&id, kind, Some(page)).await.map_err(domain)?;
        }
        Op::SuggestThemes { n } => {
            cur.themes = engine.suggest_themes(&id, *n).await.map_err(domain)?.suggestions;
        }
        Op::Activate { index } => {
            let suggestion = cur.suggestion(step, *index)?;
            let theme = engine.activate_theme(&id, suggestion).await.map_err(domain)?;
            cur.theme_ids.push(theme.id.0);
        }
        Op::ActivateCustom { name } => {
            let theme = engine
                .activate_theme(&id, ThemeSuggestion::custom(name.clone()))
                .await
                .map_err(domain)?;
            cur.theme_ids.push(theme.id.0);
        }
        Op::Pin { index } => {
            let suggestion = cur.suggestion(step, *index)?;
            engine.pin_theme(&id, suggestion).await.map_err(domain)?;
        }
        Op::SuggestQuestions { theme, n, after } => {
            let tid = cur.theme(step, theme)?;
            let after = after.as_deref().map(|q| cur.question(step, q)).transpose()?;
            let out = engine
                .suggest_questions(&id, &tid, *n, after.as_ref())
                .await
                .map_err(domain)?;
            cur.candidates.insert(theme.clone(), out.candidates);
        }
        Op::Select { theme, index } => {
            let tid = cur.theme(step, theme)?;
            let candidate = cur
                .candidates
                .get(theme)
                .and_then(|c| c.get(*index))
                .cloned()
                .ok_or_else(|| ReplayError::Script {
                    step,
                    message: format!("no question candidate #{index} for theme {theme}"),
                })?;
            let q = engine.select_question(&id, &tid, candidate).await.map_err(domain)?;
            cur.question_ids.push(q.id.0);
            // the auto comment lands before the next step so replays stay deterministic
            engine.settle(&id).await.map_err(domain)?;
        }
        Op::Answer { question, text } => {
            let qid = cur.question(step, question)?;
            engine.update_answer(&id, &qid, text).await.map_err(domain)?;
        }
        Op::Keywords { question, mode } => {
            let qid = cur.question(step, question)?;
            engine.keywords(&id, &qid, *mode).await.map_err(domain)?;
        }
        Op::Comment { question } => {
            let qid = cur.question(step, question)?;
            engine.request_comment(&id, &qid).await.map_err(domain)?;
        }
        Op::Summary => {
            engine.summarize(&id).await.map_err(domain)?;
        }
        Op::Survey { phase, items } => {
            engine.submit_survey(&id, *phase, items).await.map_err(domain)?;
        }
    }
    Ok(())
}
