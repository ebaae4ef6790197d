//! The exploration tree: a narrative expanded breadth-wise into themes and
//! depth-wise into question threads, plus summaries and survey responses.
//!
//! Every mutating method bumps [`Session::state_version`] and stamps
//! timestamps that never run backwards within a session.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{is_grounded, normalize_ws, same_name};

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn millis(self) -> i64 {
        self.0
    }
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(SessionId);
string_id!(ThemeId);
string_id!(QuestionId);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("narrative must contain at least one non-whitespace character")]
    EmptyNarrative,
    #[error("theme {0:?} duplicates an existing theme")]
    DuplicateTheme(String),
    #[error("unknown theme {0}")]
    UnknownTheme(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("pathways item {index} has value {value}; expected 4 items in 1..=8")]
    OutOfRangeItem { index: usize, value: i64 },
    #[error("theme suggestion quote is not grounded in the user's text: {0:?}")]
    UngroundedSuggestion(String),
    #[error("invalid theme suggestion: {0}")]
    InvalidSuggestion(String),
    #[error("invalid keyword batch: {0}")]
    InvalidKeywordBatch(String),
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
    #[error("post survey submitted before pre survey")]
    SurveyOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Ai,
    User,
}

/// One theme proposal. User-origin suggestions carry an empty quote and no
/// expressions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeSuggestion {
    pub main_theme: String,
    #[serde(default)]
    pub expressions: Vec<String>,
    #[serde(default)]
    pub quote: String,
    pub origin: Origin,
}

impl ThemeSuggestion {
    pub fn custom(name: impl Into<String>) -> Self {
        Self {
            main_theme: name.into(),
            expressions: Vec::new(),
            quote: String::new(),
            origin: Origin::User,
        }
    }

    /// Structural checks that do not need the session text.
    pub fn check_shape(&self) -> Result<(), ModelError> {
        if normalize_ws(&self.main_theme).is_empty() {
            return Err(ModelError::InvalidSuggestion("main_theme is empty".into()));
        }
        if self.origin == Origin::Ai {
            if self.expressions.is_empty() {
                return Err(ModelError::InvalidSuggestion(
                    "AI suggestion needs at least one alternative expression".into(),
                ));
            }
            if let Some(e) = self
                .expressions
                .iter()
                .find(|e| normalize_ws(e).is_empty() || same_name(e, &self.main_theme))
            {
                return Err(ModelError::InvalidSuggestion(format!(
                    "expression {e:?} is empty or repeats the main theme"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThemeStatus {
    Active,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub id: ThemeId,
    pub suggestion: ThemeSuggestion,
    pub status: ThemeStatus,
    pub questions: Vec<Question>,
    pub activated_at: Timestamp,
}

impl Theme {
    pub fn name(&self) -> &str {
        &self.suggestion.main_theme
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerDraft {
    pub text: String,
    pub revision: u64,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordBatch {
    pub batch_index: u32,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentCategory {
    Tip,
    Encouragement,
    Subquestion,
    Insight,
    Other,
}

impl CommentCategory {
    pub const ALL: [CommentCategory; 5] = [
        CommentCategory::Tip,
        CommentCategory::Encouragement,
        CommentCategory::Subquestion,
        CommentCategory::Insight,
        CommentCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommentCategory::Tip => "tip",
            CommentCategory::Encouragement => "encouragement",
            CommentCategory::Subquestion => "subquestion",
            CommentCategory::Insight => "insight",
            CommentCategory::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Auto,
    User,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Auto => "auto",
            Trigger::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    pub category: CommentCategory,
    pub rationale: String,
    pub trigger: Trigger,
    pub created_at: Timestamp,
}

/// A generated comment before it is attached to a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentDraft {
    pub text: String,
    pub category: CommentCategory,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    pub intention: String,
    pub selected_at: Timestamp,
    pub answer: AnswerDraft,
    pub keyword_batches: Vec<KeywordBatch>,
    pub comments: Vec<Comment>,
    pub keywords_visible: bool,
}

impl Question {
    pub fn has_auto_comment(&self) -> bool {
        self.comments.iter().any(|c| c.trigger == Trigger::Auto)
    }
}

/// A question proposed by the question pipeline, not yet selected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionCandidate {
    pub text: String,
    pub intention: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySnapshot {
    pub text: String,
    pub state_version: u64,
    pub created_at: Timestamp,
}

/// Four answers on the 1..=8 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwaysResponse {
    pub items: [u8; 4],
}

impl PathwaysResponse {
    pub fn new(items: &[i64]) -> Result<Self, ModelError> {
        if items.len() != 4 {
            return Err(ModelError::OutOfRangeItem {
                index: items.len().min(4),
                value: items.len() as i64,
            });
        }
        let mut out = [0u8; 4];
        for (index, (&value, slot)) in items.iter().zip(out.iter_mut()).enumerate() {
            if !(1..=8).contains(&value) {
                return Err(ModelError::OutOfRangeItem { index, value });
            }
            *slot = value as u8;
        }
        Ok(Self { items: out })
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let raw: Vec<i64> = self.items.iter().map(|&v| i64::from(v)).collect();
        Self::new(&raw).map(|_| ())
    }
}

/// Sum of the four pathways items; always within 4..=32 for valid input.
pub fn score_pathways(resp: &PathwaysResponse) -> Result<u32, ModelError> {
    resp.check()?;
    Ok(resp.items.iter().map(|&v| u32::from(v)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwaysPair {
    pub pre: PathwaysResponse,
    pub post: Option<PathwaysResponse>,
}

impl PathwaysPair {
    /// Post score minus pre score, once both are present.
    pub fn delta(&self) -> Option<i64> {
        let pre = score_pathways(&self.pre).ok()?;
        let post = score_pathways(self.post.as_ref()?).ok()?;
        Some(i64::from(post) - i64::from(pre))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurveyPhase {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Page {
    Narrative,
    Exploration,
    Summary,
}

impl Page {
    pub fn as_str(self) -> &'static str {
        match self {
            Page::Narrative => "narrative",
            Page::Exploration => "exploration",
            Page::Summary => "summary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "narrative" => Some(Page::Narrative),
            "exploration" => Some(Page::Exploration),
            "summary" => Some(Page::Summary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PageEnter,
    PageLeave,
    ThemeSuggested,
    ThemeActivated,
    ThemePinned,
    QuestionSuggested,
    QuestionSelected,
    AnswerUpdated,
    KeywordsRevealed,
    KeywordsMore,
    CommentRequested,
    SummaryRequested,
    SurveySubmitted,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::PageEnter,
        EventKind::PageLeave,
        EventKind::ThemeSuggested,
        EventKind::ThemeActivated,
        EventKind::ThemePinned,
        EventKind::QuestionSuggested,
        EventKind::QuestionSelected,
        EventKind::AnswerUpdated,
        EventKind::KeywordsRevealed,
        EventKind::KeywordsMore,
        EventKind::CommentRequested,
        EventKind::SummaryRequested,
        EventKind::SurveySubmitted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PageEnter => "page_enter",
            EventKind::PageLeave => "page_leave",
            EventKind::ThemeSuggested => "theme_suggested",
            EventKind::ThemeActivated => "theme_activated",
            EventKind::ThemePinned => "theme_pinned",
            EventKind::QuestionSuggested => "question_suggested",
            EventKind::QuestionSelected => "question_selected",
            EventKind::AnswerUpdated => "answer_updated",
            EventKind::KeywordsRevealed => "keywords_revealed",
            EventKind::KeywordsMore => "keywords_more",
            EventKind::CommentRequested => "comment_requested",
            EventKind::SummaryRequested => "summary_requested",
            EventKind::SurveySubmitted => "survey_submitted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_page(self) -> bool {
        matches!(self, EventKind::PageEnter | EventKind::PageLeave)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub timestamp: Timestamp,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: BTreeMap<String, String>,
}

impl EventRecord {
    pub fn new(timestamp: Timestamp, kind: EventKind) -> Self {
        Self {
            timestamp,
            kind,
            payload: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.payload.insert(key.to_owned(), value.into());
        self
    }

    pub fn page(timestamp: Timestamp, kind: EventKind, page: Page) -> Self {
        Self::new(timestamp, kind).with("page", page.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.payload.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub locale: String,
    pub narrative: String,
    pub themes: Vec<Theme>,
    pub pinned: Vec<ThemeSuggestion>,
    pub summaries: Vec<SummarySnapshot>,
    pub survey: Option<PathwaysPair>,
    pub state_version: u64,
    pub created_at: Timestamp,
}

impl Session {
    pub fn create(
        id: SessionId,
        narrative: &str,
        locale: &str,
        now: Timestamp,
    ) -> Result<Self, ModelError> {
        if narrative.trim().is_empty() {
            return Err(ModelError::EmptyNarrative);
        }
        Ok(Self {
            id,
            locale: locale.to_owned(),
            narrative: narrative.to_owned(),
            themes: Vec::new(),
            pinned: Vec::new(),
            summaries: Vec::new(),
            survey: None,
            state_version: 1,
            created_at: now,
        })
    }

    /// Latest timestamp recorded anywhere in the tree.
    pub fn latest_timestamp(&self) -> Timestamp {
        let mut latest = self.created_at;
        for theme in &self.themes {
            latest = latest.max(theme.activated_at);
            for q in &theme.questions {
                latest = latest.max(q.selected_at).max(q.answer.updated_at);
                if let Some(c) = q.comments.last() {
                    latest = latest.max(c.created_at);
                }
            }
        }
        if let Some(s) = self.summaries.last() {
            latest = latest.max(s.created_at);
        }
        latest
    }

    fn stamp(&self, now: Timestamp) -> Timestamp {
        now.max(self.latest_timestamp())
    }

    fn bump(&mut self) {
        self.state_version += 1;
    }

    pub fn theme(&self, id: &ThemeId) -> Option<&Theme> {
        self.themes.iter().find(|t| &t.id == id)
    }

    fn theme_mut(&mut self, id: &ThemeId) -> Result<&mut Theme, ModelError> {
        self.themes
            .iter_mut()
            .find(|t| &t.id == id)
            .ok_or_else(|| ModelError::UnknownTheme(id.to_string()))
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.themes.iter().flat_map(|t| t.questions.iter())
    }

    pub fn question_count(&self) -> usize {
        self.themes.iter().map(|t| t.questions.len()).sum()
    }

    /// The question and the theme that owns it.
    pub fn find_question(&self, id: &QuestionId) -> Option<(&Theme, &Question)> {
        self.themes
            .iter()
            .find_map(|t| t.questions.iter().find(|q| &q.id == id).map(|q| (t, q)))
    }

    fn question_mut(&mut self, id: &QuestionId) -> Result<&mut Question, ModelError> {
        self.themes
            .iter_mut()
            .flat_map(|t| t.questions.iter_mut())
            .find(|q| &q.id == id)
            .ok_or_else(|| ModelError::UnknownQuestion(id.to_string()))
    }

    /// Narrative followed by every current answer, in tree order.
    pub fn grounding_corpus(&self) -> Vec<&str> {
        std::iter::once(self.narrative.as_str())
            .chain(self.questions().map(|q| q.answer.text.as_str()))
            .collect()
    }

    /// Characters the user has written: narrative plus answers.
    pub fn user_char_count(&self) -> usize {
        self.grounding_corpus()
            .iter()
            .map(|s| s.chars().count())
            .sum()
    }

    fn name_taken(&self, name: &str) -> bool {
        self.themes.iter().any(|t| same_name(t.name(), name))
    }

    fn pinned_index(&self, name: &str) -> Option<usize> {
        self.pinned.iter().position(|p| same_name(&p.main_theme, name))
    }

    /// Appends a new active theme. A pinned suggestion with the same name is
    /// unpinned. AI suggestions must be grounded in the session text unless
    /// they are exactly a previously pinned suggestion.
    pub fn activate_theme(
        &mut self,
        suggestion: ThemeSuggestion,
        now: Timestamp,
    ) -> Result<&Theme, ModelError> {
        suggestion.check_shape()?;
        if self.name_taken(&suggestion.main_theme) {
            return Err(ModelError::DuplicateTheme(suggestion.main_theme));
        }
        let pinned_at = self.pinned_index(&suggestion.main_theme);
        let previously_pinned = pinned_at.is_some_and(|i| self.pinned[i] == suggestion);
        if suggestion.origin == Origin::Ai
            && !previously_pinned
            && !is_grounded(&suggestion.quote, self.grounding_corpus())
        {
            return Err(ModelError::UngroundedSuggestion(suggestion.quote));
        }
        if let Some(i) = pinned_at {
            self.pinned.remove(i);
        }
        let activated_at = self.stamp(now);
        let id = ThemeId(format!("t{}", self.themes.len() + 1));
        self.themes.push(Theme {
            id,
            suggestion,
            status: ThemeStatus::Active,
            questions: Vec::new(),
            activated_at,
        });
        self.bump();
        Ok(self.themes.last().expect("just pushed"))
    }

    pub fn pin_theme(&mut self, suggestion: ThemeSuggestion) -> Result<(), ModelError> {
        suggestion.check_shape()?;
        if self.name_taken(&suggestion.main_theme)
            || self.pinned_index(&suggestion.main_theme).is_some()
        {
            return Err(ModelError::DuplicateTheme(suggestion.main_theme));
        }
        if suggestion.origin == Origin::Ai
            && !is_grounded(&suggestion.quote, self.grounding_corpus())
        {
            return Err(ModelError::UngroundedSuggestion(suggestion.quote));
        }
        self.pinned.push(suggestion);
        self.bump();
        Ok(())
    }

    /// Marks a theme inactive (or active again). Themes are never removed.
    pub fn set_theme_status(&mut self, id: &ThemeId, status: ThemeStatus) -> Result<(), ModelError> {
        self.theme_mut(id)?.status = status;
        self.bump();
        Ok(())
    }

    pub fn select_question(
        &mut self,
        theme_id: &ThemeId,
        candidate: QuestionCandidate,
        now: Timestamp,
    ) -> Result<&Question, ModelError> {
        if candidate.text.trim().is_empty() {
            return Err(ModelError::InvalidQuestion("question text is empty".into()));
        }
        let selected_at = self.stamp(now);
        let id = QuestionId(format!("q{}", self.question_count() + 1));
        let theme = self.theme_mut(theme_id)?;
        if theme.status != ThemeStatus::Active {
            return Err(ModelError::UnknownTheme(theme_id.to_string()));
        }
        if theme.questions.iter().any(|q| same_name(&q.text, &candidate.text)) {
            return Err(ModelError::InvalidQuestion(format!(
                "{:?} was already selected in this theme",
                candidate.text
            )));
        }
        theme.questions.push(Question {
            id,
            text: candidate.text,
            intention: candidate.intention,
            selected_at,
            answer: AnswerDraft {
                text: String::new(),
                revision: 0,
                updated_at: selected_at,
            },
            keyword_batches: Vec::new(),
            comments: Vec::new(),
            keywords_visible: false,
        });
        self.bump();
        let theme = self.theme(theme_id).expect("theme exists");
        Ok(theme.questions.last().expect("just pushed"))
    }

    /// Full-text replacement of the answer draft.
    pub fn update_answer(
        &mut self,
        question_id: &QuestionId,
        text: &str,
        now: Timestamp,
    ) -> Result<&AnswerDraft, ModelError> {
        let updated_at = self.stamp(now);
        let q = self.question_mut(question_id)?;
        q.answer.text = text.to_owned();
        q.answer.revision += 1;
        q.answer.updated_at = updated_at;
        self.bump();
        Ok(&self.find_question(question_id).expect("exists").1.answer)
    }

    pub fn add_keyword_batch(
        &mut self,
        question_id: &QuestionId,
        batch: KeywordBatch,
    ) -> Result<&KeywordBatch, ModelError> {
        let q = self.question_mut(question_id)?;
        if batch.batch_index as usize != q.keyword_batches.len() {
            return Err(ModelError::InvalidKeywordBatch(format!(
                "batch index {} but {} batches exist",
                batch.batch_index,
                q.keyword_batches.len()
            )));
        }
        if batch.keywords.is_empty() {
            return Err(ModelError::InvalidKeywordBatch("empty batch".into()));
        }
        let mut seen: Vec<String> = q
            .keyword_batches
            .iter()
            .flat_map(|b| b.keywords.iter().map(|k| normalize_ws(k)))
            .collect();
        for k in &batch.keywords {
            let norm = normalize_ws(k);
            if norm.is_empty() || seen.contains(&norm) {
                return Err(ModelError::InvalidKeywordBatch(format!("duplicate keyword {k:?}")));
            }
            seen.push(norm);
        }
        q.keyword_batches.push(batch);
        self.bump();
        let q = self.find_question(question_id).expect("exists").1;
        Ok(q.keyword_batches.last().expect("just pushed"))
    }

    pub fn set_keywords_visible(
        &mut self,
        question_id: &QuestionId,
        visible: bool,
    ) -> Result<(), ModelError> {
        let q = self.question_mut(question_id)?;
        if q.keywords_visible != visible {
            q.keywords_visible = visible;
            self.bump();
        }
        Ok(())
    }

    /// Appends a comment. At most one auto comment exists per question and,
    /// when present, it comes first.
    pub fn add_comment(
        &mut self,
        question_id: &QuestionId,
        draft: CommentDraft,
        trigger: Trigger,
        now: Timestamp,
    ) -> Result<&Comment, ModelError> {
        let created_at = self.stamp(now);
        let q = self.question_mut(question_id)?;
        if trigger == Trigger::Auto && !q.comments.is_empty() {
            return Err(ModelError::InvalidQuestion(
                "auto comment must be the first comment of a question".into(),
            ));
        }
        q.comments.push(Comment {
            text: draft.text,
            category: draft.category,
            rationale: draft.rationale,
            trigger,
            created_at,
        });
        self.bump();
        let q = self.find_question(question_id).expect("exists").1;
        Ok(q.comments.last().expect("just pushed"))
    }

    /// Records a summary of the state at `summarized_version`.
    pub fn add_summary(
        &mut self,
        text: String,
        summarized_version: u64,
        now: Timestamp,
    ) -> &SummarySnapshot {
        let created_at = self.stamp(now);
        self.summaries.push(SummarySnapshot {
            text,
            state_version: summarized_version,
            created_at,
        });
        self.bump();
        self.summaries.last().expect("just pushed")
    }

    pub fn submit_survey(
        &mut self,
        phase: SurveyPhase,
        response: PathwaysResponse,
    ) -> Result<u32, ModelError> {
        let score = score_pathways(&response)?;
        match (phase, self.survey.as_mut()) {
            (SurveyPhase::Pre, Some(pair)) => pair.pre = response,
            (SurveyPhase::Pre, None) => {
                self.survey = Some(PathwaysPair {
                    pre: response,
                    post: None,
                })
            }
            (SurveyPhase::Post, Some(pair)) => pair.post = Some(response),
            (SurveyPhase::Post, None) => return Err(ModelError::SurveyOrder),
        }
        self.bump();
        Ok(score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JANE: &str = "I retired and looked forward to my freedom. My daughter asked me to care for her newborn during the day. I love my grandson, but my own life feels overshadowed by new responsibilities.";

    fn session() -> Session {
        Session::create(SessionId::from("s1"), JANE, "ko", Timestamp(1_000)).unwrap()
    }

    fn ai(name: &str, quote: &str) -> ThemeSuggestion {
        ThemeSuggestion {
            main_theme: name.into(),
            expressions: vec![format!("Feelings about {name}")],
            quote: quote.into(),
            origin: Origin::Ai,
        }
    }

    fn candidate(text: &str) -> QuestionCandidate {
        QuestionCandidate {
            text: text.into(),
            intention: "explore".into(),
        }
    }

    #[test]
    fn create_session_examples() {
        let s = session();
        assert!(s.themes.is_empty() && s.pinned.is_empty() && s.summaries.is_empty());
        assert_eq!(s.state_version, 1);
        assert_eq!(
            Session::create("s".into(), "   ", "ko", Timestamp(0)).unwrap_err(),
            ModelError::EmptyNarrative
        );
        let minimal = Session::create("s".into(), "x", "en", Timestamp(0)).unwrap();
        assert_eq!(minimal.narrative, "x");
    }

    #[test]
    fn activate_ai_and_custom_themes() {
        let mut s = session();
        let t = s
            .activate_theme(
                ai("Overwhelmed by new responsibilities", "overshadowed by new responsibilities"),
                Timestamp(2_000),
            )
            .unwrap();
        assert_eq!(t.status, ThemeStatus::Active);
        assert!(t.questions.is_empty());
        s.activate_theme(ThemeSuggestion::custom("About grandson"), Timestamp(3_000))
            .unwrap();
        assert_eq!(s.themes.len(), 2);
        assert_eq!(s.state_version, 3);
        let err = s
            .activate_theme(ThemeSuggestion::custom("  about   GRANDSON "), Timestamp(4_000))
            .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateTheme(_)));
    }

    #[test]
    fn ungrounded_ai_theme_is_rejected() {
        let mut s = session();
        let err = s
            .activate_theme(ai("Money", "I lost my job last year"), Timestamp(2_000))
            .unwrap_err();
        assert!(matches!(err, ModelError::UngroundedSuggestion(_)));
        assert_eq!(s.state_version, 1);
    }

    #[test]
    fn pin_then_activate_moves_suggestion() {
        let mut s = session();
        let purposeless = ai("Struggle with purposelessness", "my own life feels overshadowed");
        s.pin_theme(purposeless.clone()).unwrap();
        assert_eq!(s.pinned, vec![purposeless.clone()]);
        assert!(matches!(
            s.pin_theme(purposeless.clone()),
            Err(ModelError::DuplicateTheme(_))
        ));
        s.activate_theme(purposeless, Timestamp(5_000)).unwrap();
        assert!(s.pinned.is_empty());
        assert_eq!(s.themes.len(), 1);
    }

    #[test]
    fn question_thread_grows_in_order() {
        let mut s = session();
        let tid = s
            .activate_theme(ThemeSuggestion::custom("Hobbies"), Timestamp(2_000))
            .unwrap()
            .id
            .clone();
        for (i, text) in ["A?", "B?", "C?"].iter().enumerate() {
            s.select_question(&tid, candidate(text), Timestamp(3_000 + i as i64))
                .unwrap();
        }
        let theme = s.theme(&tid).unwrap();
        assert_eq!(theme.questions.len(), 3);
        assert!(theme
            .questions
            .windows(2)
            .all(|w| w[0].selected_at <= w[1].selected_at));
        assert!(theme.questions.iter().all(|q| !q.keywords_visible));
        let err = s
            .select_question(&ThemeId::from("t9"), candidate("X?"), Timestamp(4_000))
            .unwrap_err();
        assert_eq!(err, ModelError::UnknownTheme("t9".into()));
    }

    #[test]
    fn timestamps_never_run_backwards() {
        let mut s = session();
        let tid = s
            .activate_theme(ThemeSuggestion::custom("Hobbies"), Timestamp(5_000))
            .unwrap()
            .id
            .clone();
        let q = s
            .select_question(&tid, candidate("Why?"), Timestamp(10))
            .unwrap();
        assert_eq!(q.selected_at, Timestamp(5_000));
    }

    #[test]
    fn answer_revisions_count_updates() {
        let mut s = session();
        let tid = s
            .activate_theme(ThemeSuggestion::custom("Hobbies"), Timestamp(2_000))
            .unwrap()
            .id
            .clone();
        let qid = s
            .select_question(&tid, candidate("In what ways could you incorporate your hobbies?"), Timestamp(3_000))
            .unwrap()
            .id
            .clone();
        assert_eq!(
            s.update_answer(&qid, "finding peer older adults", Timestamp(4_000))
                .unwrap()
                .revision,
            1
        );
        assert_eq!(s.update_answer(&qid, "", Timestamp(4_001)).unwrap().revision, 2);
        for i in 0..100 {
            s.update_answer(&qid, &format!("draft {i}"), Timestamp(5_000 + i))
                .unwrap();
        }
        assert_eq!(s.find_question(&qid).unwrap().1.answer.revision, 102);
        assert!(matches!(
            s.update_answer(&QuestionId::from("nope"), "x", Timestamp(0)),
            Err(ModelError::UnknownQuestion(_))
        ));
    }

    #[test]
    fn keyword_batches_reject_duplicates() {
        let mut s = session();
        let tid = s
            .activate_theme(ThemeSuggestion::custom("Hobbies"), Timestamp(2_000))
            .unwrap()
            .id
            .clone();
        let qid = s
            .select_question(&tid, candidate("Why?"), Timestamp(3_000))
            .unwrap()
            .id
            .clone();
        let batch = |i, k: &[&str]| KeywordBatch {
            batch_index: i,
            keywords: k.iter().map(|s| s.to_string()).collect(),
        };
        s.add_keyword_batch(&qid, batch(0, &["flexibility", "support network"]))
            .unwrap();
        assert!(s.add_keyword_batch(&qid, batch(1, &["Flexibility"])).is_err());
        assert!(s.add_keyword_batch(&qid, batch(2, &["rest"])).is_err());
        assert!(s.add_keyword_batch(&qid, batch(1, &[])).is_err());
        s.add_keyword_batch(&qid, batch(1, &["rest"])).unwrap();
    }

    #[test]
    fn auto_comment_must_come_first() {
        let mut s = session();
        let tid = s
            .activate_theme(ThemeSuggestion::custom("Hobbies"), Timestamp(2_000))
            .unwrap()
            .id
            .clone();
        let qid = s
            .select_question(&tid, candidate("Why?"), Timestamp(3_000))
            .unwrap()
            .id
            .clone();
        let draft = CommentDraft {
            text: "Start small.".into(),
            category: CommentCategory::Tip,
            rationale: "empty answer".into(),
        };
        s.add_comment(&qid, draft.clone(), Trigger::Auto, Timestamp(3_001))
            .unwrap();
        assert!(s
            .add_comment(&qid, draft.clone(), Trigger::Auto, Timestamp(3_002))
            .is_err());
        s.add_comment(&qid, draft, Trigger::User, Timestamp(3_003))
            .unwrap();
        assert_eq!(s.find_question(&qid).unwrap().1.comments.len(), 2);
    }

    #[test]
    fn pathways_scoring_examples() {
        let score = |v: &[i64]| score_pathways(&PathwaysResponse::new(v).unwrap()).unwrap();
        assert_eq!(score(&[1, 1, 1, 1]), 4);
        assert_eq!(score(&[8, 8, 8, 8]), 32);
        assert_eq!(score(&[2, 3, 4, 5]), 14);
        assert!(matches!(
            PathwaysResponse::new(&[0, 1, 1, 1]),
            Err(ModelError::OutOfRangeItem { index: 0, value: 0 })
        ));
        assert!(PathwaysResponse::new(&[1, 2, 3]).is_err());
        assert!(PathwaysResponse::new(&[1, 2, 3, 9]).is_err());
    }

    #[test]
    fn survey_pair_delta() {
        let mut s = session();
        assert_eq!(
            s.submit_survey(SurveyPhase::Post, PathwaysResponse::new(&[1, 1, 1, 1]).unwrap()),
            Err(ModelError::SurveyOrder)
        );
        s.submit_survey(SurveyPhase::Pre, PathwaysResponse::new(&[5, 5, 6, 6]).unwrap())
            .unwrap();
        s.submit_survey(SurveyPhase::Post, PathwaysResponse::new(&[7, 6, 6, 7]).unwrap())
            .unwrap();
        assert_eq!(s.survey.unwrap().delta(), Some(4));
    }
}
