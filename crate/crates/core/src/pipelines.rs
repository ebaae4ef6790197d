//! The five generation pipelines: themes, questions, keywords, comment and
//! summary.
//!
//! Each pipeline renders the scoped state as XML, asks the gateway for a
//! schema-checked payload and then enforces the content rules the schema
//! cannot express (grounding, dedup, question marks, length). Pipelines
//! read a session snapshot and never mutate it; applying results is the
//! caller's job.

use thiserror::Error;
use tokio_util::sync::CancellationToken;

use crate::llm::gateway::{CompletionRequest, Correction, Gateway, GatewayError, StructuredOutput};
use crate::llm::schema::{Payload, SchemaId};
use crate::model::{
    CommentDraft, Origin, QuestionCandidate, QuestionId, Session, ThemeId, ThemeStatus, ThemeSuggestion,
};
use crate::prompts::PromptPack;
use crate::state_xml::{serialize_state_xml, StateScope, StateXmlError};
use crate::text::{is_grounded, normalize_question_mark, normalize_ws, normalized_corpus, substring_edit_distance};

pub const DEFAULT_THEME_COUNT: u32 = 3;
pub const DEFAULT_QUESTION_COUNT: u32 = 3;
pub const INITIAL_KEYWORD_COUNT: u32 = 2;
pub const MORE_KEYWORD_COUNT: u32 = 3;
/// Characters a summary may exceed the user's own writing by.
pub const SUMMARY_ALLOWANCE: usize = 600;
/// Largest edit distance at which a quote earns a corrective retry.
pub const NEAR_MISS_DISTANCE: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("unknown theme {0}")]
    UnknownTheme(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no suggestion survived grounding and dedup checks")]
    NoValidSuggestions,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<StateXmlError> for PipelineError {
    fn from(e: StateXmlError) -> Self {
        match e {
            StateXmlError::UnknownTheme(id) => PipelineError::UnknownTheme(id),
            StateXmlError::UnknownQuestion(id) => PipelineError::UnknownQuestion(id),
            other => PipelineError::InvalidRequest(other.to_string()),
        }
    }
}

fn violation(message: String, raw: &str, attempts: u32) -> PipelineError {
    PipelineError::Gateway(GatewayError::SchemaViolation {
        message,
        raw: raw.to_owned(),
        attempts,
    })
}

/// Summary text together with the version it describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryDraft {
    pub text: String,
    pub state_version: u64,
    pub rationale: String,
}

/// Upper bound on summary length for `session`.
pub fn summary_budget(session: &Session) -> usize {
    session.user_char_count() + SUMMARY_ALLOWANCE
}

#[derive(Clone)]
pub struct Pipelines {
    gateway: Gateway,
    cancel: CancellationToken,
}

impl Pipelines {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            cancel: CancellationToken::new(),
        }
    }

    /// A copy whose provider calls abort when `token` fires.
    pub fn with_cancel(&self, token: CancellationToken) -> Self {
        Self {
            gateway: self.gateway.clone(),
            cancel: token,
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn request(
        &self,
        session: &Session,
        schema: SchemaId,
        scope: &StateScope,
        count: Option<u32>,
    ) -> Result<CompletionRequest, PipelineError> {
        let pack = PromptPack::builtin(&session.locale);
        let cfg = self.gateway.config();
        Ok(CompletionRequest {
            persona_preamble: pack.persona_preamble.clone(),
            instruction: pack.instruction(schema, count),
            state_xml: serialize_state_xml(session, scope)?,
            output_schema: schema,
            locale: session.locale.clone(),
            max_output_tokens: cfg.max_output_tokens,
            temperature: cfg.temperature,
            item_count: count,
        })
    }

    async fn call(
        &self,
        req: &CompletionRequest,
        corrections: Vec<Correction>,
    ) -> Result<StructuredOutput, PipelineError> {
        tokio::select! {
            biased;
            _ = self.cancel.cancelled() => Err(GatewayError::Cancelled.into()),
            out = self.gateway.complete_with_notes(req, corrections) => Ok(out?),
        }
    }

    /// Up to `n` grounded, non-duplicate theme suggestions.
    pub async fn generate_themes(&self, session: &Session, n: u32) -> Result<Vec<ThemeSuggestion>, PipelineError> {
        if n == 0 {
            return Err(PipelineError::InvalidRequest("n must be at least 1".into()));
        }
        let req = self.request(session, SchemaId::Themes, &StateScope::history(), Some(n))?;
        let corpus = normalized_corpus(session.grounding_corpus());
        let mut taken: Vec<String> = session
            .themes
            .iter()
            .map(|t| normalize_ws(t.name()))
            .chain(session.pinned.iter().map(|p| normalize_ws(&p.main_theme)))
            .collect();
        let mut accepted = Vec::new();

        let out = self.call(&req, Vec::new()).await?;
        let mut near_misses = Vec::new();
        for item in themes_of(out.payload) {
            match screen_theme(item, &corpus, &taken) {
                Screen::Keep(s) => {
                    taken.push(normalize_ws(&s.main_theme));
                    accepted.push(s);
                }
                Screen::NearMiss(quote) => near_misses.push(quote),
                Screen::Drop(reason) => tracing::debug!(%reason, "theme suggestion dropped"),
            }
        }

        if !near_misses.is_empty() && accepted.len() < n as usize {
            let note = format!(
                "These quotes do not appear verbatim in the user's writing: {}. Copy every quote character for character from the user's text. Reply with {}.",
                near_misses.iter().map(|q| format!("{q:?}")).collect::<Vec<_>>().join(", "),
                SchemaId::Themes.describe()
            );
            let retry = self.call(&req, vec![Correction { raw: out.raw, note }]).await?;
            for item in themes_of(retry.payload) {
                if let Screen::Keep(s) = screen_theme(item, &corpus, &taken) {
                    taken.push(normalize_ws(&s.main_theme));
                    accepted.push(s);
                }
            }
        }

        accepted.truncate(n as usize);
        if accepted.is_empty() {
            return Err(PipelineError::NoValidSuggestions);
        }
        Ok(accepted)
    }

    /// Exactly `n` question candidates for an active theme.
    pub async fn generate_questions(
        &self,
        session: &Session,
        theme_id: &ThemeId,
        n: u32,
        after_question: Option<&QuestionId>,
    ) -> Result<Vec<QuestionCandidate>, PipelineError> {
        if n == 0 {
            return Err(PipelineError::InvalidRequest("n must be at least 1".into()));
        }
        let theme = session
            .theme(theme_id)
            .filter(|t| t.status == ThemeStatus::Active)
            .ok_or_else(|| PipelineError::UnknownTheme(theme_id.to_string()))?;
        let scope = match after_question {
            Some(qid) => {
                if !theme.questions.iter().any(|q| &q.id == qid) {
                    return Err(PipelineError::UnknownQuestion(qid.to_string()));
                }
                StateScope::question(theme_id.clone(), qid.clone())
            }
            None => StateScope::theme(theme_id.clone()),
        };
        let req = self.request(session, SchemaId::Questions, &scope, Some(n))?;
        let mut taken: Vec<String> = theme.questions.iter().map(|q| normalize_ws(&q.text)).collect();
        let mut accepted = Vec::new();
        let mut corrections = Vec::new();
        let mut attempts = 0;
        loop {
            let out = self.call(&req, corrections.clone()).await?;
            attempts += out.attempts;
            let Payload::Questions(items) = out.payload else {
                unreachable!("gateway validated the questions schema")
            };
            let mut rejected = Vec::new();
            for candidate in items {
                let Some(text) = normalize_question_mark(&candidate.text) else {
                    rejected.push(format!("{:?} does not end with a question mark", candidate.text));
                    continue;
                };
                let key = normalize_ws(&text);
                if taken.contains(&key) {
                    rejected.push(format!("{text:?} was already asked"));
                    continue;
                }
                taken.push(key);
                accepted.push(QuestionCandidate {
                    text,
                    intention: candidate.intention.trim().to_owned(),
                });
            }
            if accepted.len() >= n as usize {
                accepted.truncate(n as usize);
                return Ok(accepted);
            }
            if !corrections.is_empty() {
                return Err(violation(
                    format!("expected {n} usable questions, got {}", accepted.len()),
                    &out.raw,
                    attempts,
                ));
            }
            corrections.push(Correction {
                note: format!(
                    "Return exactly {n} new questions, each ending with a question mark. Problems: {}. Reply with {}.",
                    if rejected.is_empty() { "too few questions".to_owned() } else { rejected.join("; ") },
                    SchemaId::Questions.describe()
                ),
                raw: out.raw,
            });
        }
    }

    /// Up to `count` new keywords for a question.
    pub async fn generate_keywords(
        &self,
        session: &Session,
        question_id: &QuestionId,
        count: u32,
    ) -> Result<Vec<String>, PipelineError> {
        if count == 0 {
            return Err(PipelineError::InvalidRequest("count must be at least 1".into()));
        }
        let (theme, question) = session
            .find_question(question_id)
            .ok_or_else(|| PipelineError::UnknownQuestion(question_id.to_string()))?;
        let scope = StateScope::question(theme.id.clone(), question_id.clone());
        let req = self.request(session, SchemaId::Keywords, &scope, Some(count))?;
        let question_key = normalize_ws(&question.text);
        let mut taken: Vec<String> = question
            .keyword_batches
            .iter()
            .flat_map(|b| b.keywords.iter().map(|k| normalize_ws(k)))
            .collect();
        let mut corrections = Vec::new();
        loop {
            let out = self.call(&req, corrections.clone()).await?;
            let Payload::Keywords(items) = out.payload else {
                unreachable!("gateway validated the keywords schema")
            };
            let mut batch = Vec::new();
            for keyword in items {
                let key = normalize_ws(&keyword);
                if key == question_key || taken.contains(&key) {
                    continue;
                }
                taken.push(key);
                batch.push(keyword);
            }
            batch.truncate(count as usize);
            if !batch.is_empty() {
                return Ok(batch);
            }
            if !corrections.is_empty() {
                return Err(PipelineError::NoValidSuggestions);
            }
            corrections.push(Correction {
                note: format!(
                    "Every keyword repeated one already shown or the question itself. Offer different keywords. Reply with {}.",
                    SchemaId::Keywords.describe()
                ),
                raw: out.raw,
            });
        }
    }

    pub async fn generate_comment(
        &self,
        session: &Session,
        question_id: &QuestionId,
    ) -> Result<CommentDraft, PipelineError> {
        let (theme, _) = session
            .find_question(question_id)
            .ok_or_else(|| PipelineError::UnknownQuestion(question_id.to_string()))?;
        let scope = StateScope::question(theme.id.clone(), question_id.clone());
        let req = self.request(session, SchemaId::Comment, &scope, None)?;
        let out = self.call(&req, Vec::new()).await?;
        let Payload::Comment { category, text } = out.payload else {
            unreachable!("gateway validated the comment schema")
        };
        Ok(CommentDraft {
            text,
            category,
            rationale: out.meta.rationale,
        })
    }

    /// A summary no longer than [`summary_budget`]; one shorter retry.
    pub async fn generate_summary(&self, session: &Session) -> Result<SummaryDraft, PipelineError> {
        let req = self.request(session, SchemaId::Summary, &StateScope::history(), None)?;
        let budget = summary_budget(session);
        let mut corrections = Vec::new();
        let mut attempts = 0;
        loop {
            let out = self.call(&req, corrections.clone()).await?;
            attempts += out.attempts;
            let Payload::Summary(text) = out.payload else {
                unreachable!("gateway validated the summary schema")
            };
            let len = text.chars().count();
            if len <= budget {
                return Ok(SummaryDraft {
                    text,
                    state_version: session.state_version,
                    rationale: out.meta.rationale,
                });
            }
            if !corrections.is_empty() {
                return Err(violation(
                    format!("summary has {len} characters, limit is {budget}"),
                    &out.raw,
                    attempts,
                ));
            }
            corrections.push(Correction {
                note: format!(
                    "The summary is too long ({len} characters). Write a shorter summary of at most {budget} characters, proportional to what the user wrote. Reply with {}.",
                    SchemaId::Summary.describe()
                ),
                raw: out.raw,
            });
        }
    }
}

fn themes_of(payload: Payload) -> Vec<crate::llm::schema::ThemeItem> {
    match payload {
        Payload::Themes(items) => items,
        _ => unreachable!("gateway validated the themes schema"),
    }
}

enum Screen {
    Keep(ThemeSuggestion),
    NearMiss(String),
    Drop(String),
}

fn screen_theme(item: crate::llm::schema::ThemeItem, corpus: &str, taken: &[String]) -> Screen {
    let suggestion = ThemeSuggestion {
        main_theme: item.main_theme.trim().to_owned(),
        expressions: item.expressions.iter().map(|e| e.trim().to_owned()).collect(),
        quote: item.quote,
        origin: Origin::Ai,
    };
    if let Err(e) = suggestion.check_shape() {
        return Screen::Drop(e.to_string());
    }
    if taken.contains(&normalize_ws(&suggestion.main_theme)) {
        return Screen::Drop(format!("duplicate theme {:?}", suggestion.main_theme));
    }
    if is_grounded(&suggestion.quote, [corpus]) {
        return Screen::Keep(suggestion);
    }
    if substring_edit_distance(&normalize_ws(&suggestion.quote), corpus) <= NEAR_MISS_DISTANCE {
        Screen::NearMiss(suggestion.quote)
    } else {
        Screen::Drop(format!("ungrounded quote {:?}", suggestion.quote))
    }
}
