//! Whole-document invariant scan over a session and its event log.
//!
//! Event payload keys read here: `version` on mutation events, `question`
//! and `text` on `answer_updated`, `trigger` on `comment_requested`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::canonical::canonicalize;
use crate::llm::schema::{validate_payload, Payload, ThemeItem, MAX_KEYWORD_WORDS};
use crate::model::{
    CommentDraft, EventKind, EventRecord, Origin, QuestionCandidate, Session, ThemeSuggestion, Trigger,
};
use crate::pipelines::SUMMARY_ALLOWANCE;
use crate::text::{is_grounded, normalize_ws, word_count};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub invariant: &'static str,
    pub locator: String,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.invariant, self.locator, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub failures: Vec<Failure>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, invariant: &'static str, locator: impl Into<String>, message: impl Into<String>) {
        self.failures.push(Failure {
            invariant,
            locator: locator.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.failures.is_empty() {
            return writeln!(f, "all invariants hold");
        }
        for failure in &self.failures {
            writeln!(f, "{failure}")?;
        }
        Ok(())
    }
}

pub const INVARIANTS: [&str; 12] = [
    "narrative",
    "version",
    "dedup",
    "grounding",
    "theme_shape",
    "question",
    "keywords",
    "comments",
    "summary",
    "pathways",
    "events",
    "schema_closure",
];

fn version_of(e: &EventRecord) -> Option<u64> {
    e.get("version").and_then(|v| v.parse().ok())
}

/// Every answer text the session ever held: current drafts plus the
/// texts recorded by `answer_updated` events.
fn answer_history<'a>(session: &'a Session, events: &'a [EventRecord]) -> Vec<&'a str> {
    session
        .questions()
        .map(|q| q.answer.text.as_str())
        .chain(
            events
                .iter()
                .filter(|e| e.kind == EventKind::AnswerUpdated)
                .filter_map(|e| e.get("text")),
        )
        .collect()
}

/// User-written characters as of `version`, reconstructed from events.
/// Without answer events the current drafts are used.
fn user_chars_at(session: &Session, events: &[EventRecord], version: u64) -> usize {
    let answer_events: Vec<&EventRecord> = events.iter().filter(|e| e.kind == EventKind::AnswerUpdated).collect();
    if answer_events.is_empty() {
        return session.user_char_count();
    }
    let mut latest: BTreeMap<&str, &str> = BTreeMap::new();
    for e in answer_events {
        if version_of(e).is_some_and(|v| v <= version) {
            if let (Some(q), Some(t)) = (e.get("question"), e.get("text")) {
                latest.insert(q, t);
            }
        }
    }
    session.narrative.chars().count() + latest.values().map(|t| t.chars().count()).sum::<usize>()
}

fn round_trips(payload: &Payload, rationale: &str) -> Result<(), String> {
    let wire = canonicalize(&payload.to_value(rationale));
    let parsed: serde_json::Value = serde_json::from_str(&wire).map_err(|e| e.to_string())?;
    let (back, _) = validate_payload(payload.schema(), &parsed).map_err(|e| e.0)?;
    if &back != payload {
        return Err("payload changed across a serialization round trip".into());
    }
    Ok(())
}

fn theme_payload(s: &ThemeSuggestion) -> Payload {
    Payload::Themes(vec![ThemeItem {
        main_theme: s.main_theme.clone(),
        expressions: s.expressions.clone(),
        quote: s.quote.clone(),
    }])
}

pub fn validate_session(session: &Session, events: &[EventRecord]) -> Report {
    let mut r = Report::default();

    if session.narrative.trim().is_empty() {
        r.fail("narrative", "narrative", "narrative is empty");
    }

    // version lower bound: every recorded mutation bumped the counter once
    let mut mutations = 1 + session.themes.len() as u64 + session.pinned.len() as u64 + session.summaries.len() as u64;
    for q in session.questions() {
        mutations += 1 + q.answer.revision + q.keyword_batches.len() as u64 + q.comments.len() as u64;
        mutations += u64::from(q.keywords_visible);
    }
    if let Some(pair) = &session.survey {
        mutations += 1 + u64::from(pair.post.is_some());
    }
    if session.state_version < mutations {
        r.fail(
            "version",
            "state_version",
            format!("{} is below the {mutations} mutations recorded in the tree", session.state_version),
        );
    }
    let mut last_version = 0;
    for (i, e) in events.iter().enumerate() {
        if let Some(v) = version_of(e) {
            if v <= last_version {
                r.fail("version", format!("events[{i}]"), format!("version {v} does not exceed {last_version}"));
            }
            if v > session.state_version {
                r.fail(
                    "version",
                    format!("events[{i}]"),
                    format!("version {v} exceeds session version {}", session.state_version),
                );
            }
            last_version = v;
        }
    }

    let corpus_owned = answer_history(session, events);
    let corpus: Vec<&str> = std::iter::once(session.narrative.as_str()).chain(corpus_owned).collect();

    let mut names = BTreeSet::new();
    let mut theme_ids = BTreeSet::new();
    for (ti, theme) in session.themes.iter().enumerate() {
        let at = format!("themes[{ti}]");
        if !theme_ids.insert(theme.id.as_str()) {
            r.fail("dedup", &at, format!("theme id {} repeats", theme.id));
        }
        if !names.insert(normalize_ws(theme.name())) {
            r.fail("dedup", &at, format!("theme name {:?} repeats", theme.name()));
        }
    }
    for (pi, p) in session.pinned.iter().enumerate() {
        if names.contains(&normalize_ws(&p.main_theme)) {
            r.fail("dedup", format!("pinned[{pi}]"), format!("{:?} is both pinned and activated", p.main_theme));
        }
    }

    let suggestions = session
        .themes
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("themes[{i}].suggestion"), &t.suggestion))
        .chain(session.pinned.iter().enumerate().map(|(i, p)| (format!("pinned[{i}]"), p)));
    for (at, s) in suggestions {
        if let Err(e) = s.check_shape() {
            r.fail("theme_shape", &at, e.to_string());
        }
        if s.origin == Origin::Ai {
            if !is_grounded(&s.quote, corpus.iter().copied()) {
                r.fail("grounding", format!("{at}.quote"), format!("{:?} is not in the user's writing", s.quote));
            }
            if let Err(e) = round_trips(&theme_payload(s), "scan") {
                r.fail("schema_closure", &at, e);
            }
        }
    }

    let mut question_ids = BTreeSet::new();
    let mut user_comments = 0usize;
    for (ti, theme) in session.themes.iter().enumerate() {
        let mut texts = BTreeSet::new();
        for (qi, q) in theme.questions.iter().enumerate() {
            let at = format!("themes[{ti}].questions[{qi}]");
            if !question_ids.insert(q.id.as_str()) {
                r.fail("dedup", &at, format!("question id {} repeats", q.id));
            }
            if !texts.insert(normalize_ws(&q.text)) {
                r.fail("dedup", &at, format!("question {:?} repeats within the theme", q.text));
            }
            if q.selected_at < theme.activated_at {
                r.fail("question", &at, "selected before its theme was activated");
            }
            let candidate = QuestionCandidate {
                text: q.text.clone(),
                intention: q.intention.clone(),
            };
            if let Err(e) = round_trips(&Payload::Questions(vec![candidate]), "scan") {
                r.fail("schema_closure", &at, e);
            }

            let question_key = normalize_ws(&q.text);
            let mut seen = BTreeSet::new();
            for (bi, batch) in q.keyword_batches.iter().enumerate() {
                let bat = format!("{at}.keyword_batches[{bi}]");
                if batch.batch_index as usize != bi {
                    r.fail("keywords", &bat, format!("batch_index {} at position {bi}", batch.batch_index));
                }
                if batch.keywords.is_empty() {
                    r.fail("keywords", &bat, "empty batch");
                }
                for k in &batch.keywords {
                    let key = normalize_ws(k);
                    if !seen.insert(key.clone()) {
                        r.fail("keywords", &bat, format!("{k:?} repeats an earlier keyword"));
                    }
                    if key == question_key {
                        r.fail("keywords", &bat, "keyword copies the question");
                    }
                    if word_count(k) > MAX_KEYWORD_WORDS {
                        r.fail("keywords", &bat, format!("{k:?} is longer than {MAX_KEYWORD_WORDS} words"));
                    }
                }
                if !batch.keywords.is_empty() {
                    if let Err(e) = round_trips(&Payload::Keywords(batch.keywords.clone()), "scan") {
                        r.fail("schema_closure", &bat, e);
                    }
                }
            }

            for (ci, c) in q.comments.iter().enumerate() {
                let cat = format!("{at}.comments[{ci}]");
                if c.trigger == Trigger::Auto && ci != 0 {
                    r.fail("comments", &cat, "auto comment is not the first comment");
                }
                if c.trigger == Trigger::User {
                    user_comments += 1;
                }
                if ci > 0 && c.created_at < q.comments[ci - 1].created_at {
                    r.fail("comments", &cat, "comments out of created_at order");
                }
                let draft = CommentDraft {
                    text: c.text.clone(),
                    category: c.category,
                    rationale: c.rationale.clone(),
                };
                let payload = Payload::Comment {
                    category: draft.category,
                    text: draft.text,
                };
                if let Err(e) = round_trips(&payload, &draft.rationale) {
                    r.fail("schema_closure", &cat, e);
                }
            }
        }
    }

    for (si, s) in session.summaries.iter().enumerate() {
        let at = format!("summaries[{si}]");
        if si > 0 {
            let prev = &session.summaries[si - 1];
            if s.created_at < prev.created_at {
                r.fail("summary", &at, "snapshots out of created_at order");
            }
            if s.state_version < prev.state_version {
                r.fail("summary", &at, "state_version decreased");
            }
        }
        if s.state_version > session.state_version {
            r.fail("summary", &at, "summarizes a version the session never reached");
        }
        let budget = user_chars_at(session, events, s.state_version) + SUMMARY_ALLOWANCE;
        let len = s.text.chars().count();
        if len > budget {
            r.fail("summary", &at, format!("{len} characters exceeds the limit of {budget}"));
        }
        if let Err(e) = round_trips(&Payload::Summary(s.text.clone()), "scan") {
            r.fail("schema_closure", &at, e);
        }
    }

    if let Some(pair) = &session.survey {
        if let Err(e) = pair.pre.check() {
            r.fail("pathways", "survey.pre", e.to_string());
        }
        if let Some(Err(e)) = pair.post.as_ref().map(|p| p.check()) {
            r.fail("pathways", "survey.post", e.to_string());
        }
    }

    for (i, w) in events.windows(2).enumerate() {
        if w[1].timestamp < w[0].timestamp {
            r.fail("events", format!("events[{}]", i + 1), "timestamp goes backwards");
        }
    }
    if !events.is_empty() {
        let count = |kind: EventKind| events.iter().filter(|e| e.kind == kind).count();
        let requested = events
            .iter()
            .filter(|e| e.kind == EventKind::CommentRequested && e.get("trigger") == Some(Trigger::User.as_str()))
            .count();
        if requested != user_comments {
            r.fail(
                "events",
                "events",
                format!("{requested} user comment requests logged but {user_comments} user comments stored"),
            );
        }
        if count(EventKind::ThemeActivated) != session.themes.len() {
            r.fail("events", "events", "theme_activated events do not match the themes");
        }
        if count(EventKind::QuestionSelected) != session.question_count() {
            r.fail("events", "events", "question_selected events do not match the questions");
        }
        for q in session.questions() {
            let updates = events
                .iter()
                .filter(|e| e.kind == EventKind::AnswerUpdated && e.get("question") == Some(q.id.as_str()))
                .count() as u64;
            if updates != q.answer.revision {
                r.fail(
                    "events",
                    format!("question {}", q.id),
                    format!("revision {} but {updates} answer_updated events", q.answer.revision),
                );
            }
        }
    }

    r
}
