//! XML rendering of the exploration state handed to every pipeline.
//!
//! The document is canonical: fixed tag order, one top-level child per
//! line, no timestamps. The same session and scope always yield the same
//! bytes.

use thiserror::Error;

use crate::model::{QuestionId, Session, ThemeId};

pub const ROOT_TAG: &str = "session_state";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateXmlError {
    #[error("unknown theme {0}")]
    UnknownTheme(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("invalid scope: {0}")]
    InvalidScope(&'static str),
    #[error("malformed state xml: {0}")]
    Malformed(String),
}

/// Which parts of the session a pipeline sees.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateScope {
    pub include_previous_log: bool,
    pub theme_of_session: Option<ThemeId>,
    pub question: Option<QuestionId>,
    pub include_current_response: bool,
}

impl StateScope {
    /// Narrative plus full history; used by theme and summary generation.
    pub fn history() -> Self {
        Self {
            include_previous_log: true,
            ..Self::default()
        }
    }

    pub fn theme(theme: ThemeId) -> Self {
        Self {
            include_previous_log: true,
            theme_of_session: Some(theme),
            ..Self::default()
        }
    }

    pub fn question(theme: ThemeId, question: QuestionId) -> Self {
        Self {
            include_previous_log: true,
            theme_of_session: Some(theme),
            question: Some(question),
            include_current_response: true,
        }
    }

    pub fn check(&self) -> Result<(), StateXmlError> {
        if self.question.is_some() && self.theme_of_session.is_none() {
            return Err(StateXmlError::InvalidScope("question requires theme_of_session"));
        }
        if self.include_current_response && self.question.is_none() {
            return Err(StateXmlError::InvalidScope("current response requires question"));
        }
        Ok(())
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\t' | '\n' | '\r' => out.push(ch),
            c if (c as u32) < 0x20 || c == '\u{FFFE}' || c == '\u{FFFF}' => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out
}

fn element(tag: &str, body: &str) -> String {
    format!("<{tag}>{}</{tag}>", escape(body))
}

pub fn serialize_state_xml(session: &Session, scope: &StateScope) -> Result<String, StateXmlError> {
    scope.check()?;
    let theme = match &scope.theme_of_session {
        Some(id) => Some(
            session
                .theme(id)
                .ok_or_else(|| StateXmlError::UnknownTheme(id.to_string()))?,
        ),
        None => None,
    };
    let question = match (&scope.question, theme) {
        (Some(qid), Some(theme)) => Some(
            theme
                .questions
                .iter()
                .find(|q| &q.id == qid)
                .ok_or_else(|| StateXmlError::UnknownQuestion(qid.to_string()))?,
        ),
        _ => None,
    };

    let mut lines = vec![format!(r#"<{ROOT_TAG} locale="{}">"#, escape(&session.locale))];
    lines.push(format!(
        "<initial_information>{}<background></background></initial_information>",
        element("narrative", &session.narrative)
    ));
    if scope.include_previous_log {
        let mut log = String::from("<previous_session_log>");
        for t in &session.themes {
            log.push_str(&format!(
                r#"<theme name="{}" status="{}">"#,
                escape(t.name()),
                match t.status {
                    crate::model::ThemeStatus::Active => "active",
                    crate::model::ThemeStatus::Inactive => "inactive",
                }
            ));
            for q in t.questions.iter().filter(|q| Some(&q.id) != scope.question.as_ref()) {
                log.push_str("<entry>");
                log.push_str(&element("prompt", &q.text));
                log.push_str(&element("response", &q.answer.text));
                log.push_str("</entry>");
            }
            log.push_str("</theme>");
        }
        log.push_str("</previous_session_log>");
        lines.push(log);
    }
    if let Some(theme) = theme {
        lines.push(element("theme_of_session", theme.name()));
    }
    if let Some(q) = question {
        lines.push(element("question", &q.text));
        let shown: String = q
            .keyword_batches
            .iter()
            .flat_map(|b| b.keywords.iter())
            .map(|k| element("keyword", k))
            .collect();
        lines.push(format!("<shown_keywords>{shown}</shown_keywords>"));
        if scope.include_current_response {
            lines.push(format!(
                r#"<current_response revision="{}">{}</current_response>"#,
                q.answer.revision,
                escape(&q.answer.text)
            ));
        }
    }
    lines.push(format!("</{ROOT_TAG}>"));
    Ok(lines.join("\n"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogTheme {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

/// Read-side view of a state document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedState {
    pub locale: String,
    pub narrative: String,
    pub background: String,
    pub previous_log: Option<Vec<LogTheme>>,
    pub theme_of_session: Option<String>,
    pub question: Option<String>,
    pub shown_keywords: Vec<String>,
    pub current_response: Option<(String, u64)>,
}

impl ParsedState {
    pub fn log(&self) -> &[LogTheme] {
        self.previous_log.as_deref().unwrap_or(&[])
    }

    /// Every answer in the log plus the current response.
    pub fn answers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .log()
            .iter()
            .flat_map(|t| t.entries.iter().map(|(_, a)| a.as_str()))
            .collect();
        if let Some((text, _)) = &self.current_response {
            out.push(text);
        }
        out
    }
}

fn text_of(node: roxmltree::Node<'_, '_>) -> String {
    node.descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect()
}

pub fn parse_state_xml(xml: &str) -> Result<ParsedState, StateXmlError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| StateXmlError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != ROOT_TAG {
        return Err(StateXmlError::Malformed(format!(
            "root element is <{}>",
            root.tag_name().name()
        )));
    }
    let mut state = ParsedState {
        locale: root.attribute("locale").unwrap_or("en").to_owned(),
        ..ParsedState::default()
    };
    let mut saw_initial = false;
    for child in root.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "initial_information" => {
                saw_initial = true;
                for part in child.children().filter(|n| n.is_element()) {
                    match part.tag_name().name() {
                        "narrative" => state.narrative = text_of(part),
                        "background" => state.background = text_of(part),
                        _ => {}
                    }
                }
            }
            "previous_session_log" => {
                let themes = child
                    .children()
                    .filter(|n| n.has_tag_name("theme"))
                    .map(|t| LogTheme {
                        name: t.attribute("name").unwrap_or_default().to_owned(),
                        entries: t
                            .children()
                            .filter(|n| n.has_tag_name("entry"))
                            .map(|e| {
                                let pick = |tag: &str| {
                                    e.children()
                                        .find(|n| n.has_tag_name(tag))
                                        .map(text_of)
                                        .unwrap_or_default()
                                };
                                (pick("prompt"), pick("response"))
                            })
                            .collect(),
                    })
                    .collect();
                state.previous_log = Some(themes);
            }
            "theme_of_session" => state.theme_of_session = Some(text_of(child)),
            "question" => state.question = Some(text_of(child)),
            "shown_keywords" => {
                state.shown_keywords = child
                    .children()
                    .filter(|n| n.has_tag_name("keyword"))
                    .map(text_of)
                    .collect()
            }
            "current_response" => {
                let revision = child
                    .attribute("revision")
                    .and_then(|r| r.parse().ok())
                    .unwrap_or(0);
                state.current_response = Some((text_of(child), revision));
            }
            other => {
                return Err(StateXmlError::Malformed(format!("unexpected element <{other}>")));
            }
        }
    }
    if !saw_initial {
        return Err(StateXmlError::Malformed("missing <initial_information>".into()));
    }
    Ok(state)
}
