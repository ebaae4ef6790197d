//! Output schemas for the five pipelines and the validator behind the
//! repair loop.
//!
//! A model answers with one fenced JSON object. Each object carries a
//! `rationale` (the meta-output) next to the schema fields; unknown keys are
//! kept in [`Meta::extra`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::model::{CommentCategory, QuestionCandidate};

pub const MAX_KEYWORD_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemaId {
    Themes,
    Questions,
    Keywords,
    Comment,
    Summary,
}

impl SchemaId {
    pub const ALL: [SchemaId; 5] = [
        SchemaId::Themes,
        SchemaId::Questions,
        SchemaId::Keywords,
        SchemaId::Comment,
        SchemaId::Summary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::Themes => "themes",
            SchemaId::Questions => "questions",
            SchemaId::Keywords => "keywords",
            SchemaId::Comment => "comment",
            SchemaId::Summary => "summary",
        }
    }

    fn fields(self) -> &'static [&'static str] {
        match self {
            SchemaId::Themes => &["themes"],
            SchemaId::Questions => &["questions"],
            SchemaId::Keywords => &["keywords"],
            SchemaId::Comment => &["category", "comment"],
            SchemaId::Summary => &["summary"],
        }
    }

    /// Shape description restated in prompts and corrective notes.
    pub fn describe(self) -> &'static str {
        match self {
            SchemaId::Themes => r#"{"rationale": string, "themes": [{"main_theme": string, "expressions": [string, ...], "quote": string}, ...]}"#,
            SchemaId::Questions => r#"{"rationale": string, "questions": [{"question": string, "intention": string}, ...]}"#,
            SchemaId::Keywords => r#"{"rationale": string, "keywords": [string, ...]}"#,
            SchemaId::Comment => r#"{"rationale": string, "category": "tip" | "encouragement" | "subquestion" | "insight" | "other", "comment": string}"#,
            SchemaId::Summary => r#"{"rationale": string, "summary": string}"#,
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeItem {
    pub main_theme: String,
    pub expressions: Vec<String>,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Themes(Vec<ThemeItem>),
    Questions(Vec<QuestionCandidate>),
    Keywords(Vec<String>),
    Comment {
        category: CommentCategory,
        text: String,
    },
    Summary(String),
}

impl Payload {
    pub fn schema(&self) -> SchemaId {
        match self {
            Payload::Themes(_) => SchemaId::Themes,
            Payload::Questions(_) => SchemaId::Questions,
            Payload::Keywords(_) => SchemaId::Keywords,
            Payload::Comment { .. } => SchemaId::Comment,
            Payload::Summary(_) => SchemaId::Summary,
        }
    }

    /// Wire form of the payload, with the given rationale.
    pub fn to_value(&self, rationale: &str) -> Value {
        let mut v = match self {
            Payload::Themes(items) => json!({ "themes": items }),
            Payload::Questions(items) => json!({
                "questions": items
                    .iter()
                    .map(|q| json!({"question": q.text, "intention": q.intention}))
                    .collect::<Vec<_>>()
            }),
            Payload::Keywords(k) => json!({ "keywords": k }),
            Payload::Comment { category, text } => {
                json!({"category": category.as_str(), "comment": text})
            }
            Payload::Summary(text) => json!({ "summary": text }),
        };
        v["rationale"] = Value::String(rationale.to_owned());
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub rationale: String,
    pub extra: BTreeMap<String, Value>,
}

/// First problem found in a model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError(msg.into()))
}

/// Pulls the JSON object out of a response: the first fenced block if there
/// is one, else the outermost braces.
pub fn extract_json(raw: &str) -> Result<Value, SchemaError> {
    let body = if let Some(start) = raw.find("```") {
        let after = &raw[start + 3..];
        let after = after.strip_prefix("json").unwrap_or(after);
        match after.find("```") {
            Some(end) => &after[..end],
            None => return err("unterminated code fence"),
        }
    } else {
        match (raw.find('{'), raw.rfind('}')) {
            (Some(a), Some(b)) if a < b => &raw[a..=b],
            _ => return err("no JSON object found in response"),
        }
    };
    serde_json::from_str(body.trim()).map_err(|e| SchemaError(format!("invalid JSON: {e}")))
}

fn non_empty_str<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a str, SchemaError> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) => err(format!("{at}.{key} must not be empty")),
        Some(_) => err(format!("{at}.{key} must be a string")),
        None => err(format!("{at}.{key} is missing")),
    }
}

fn array<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Vec<Value>, SchemaError> {
    match obj.get(key) {
        Some(Value::Array(items)) if !items.is_empty() => Ok(items),
        Some(Value::Array(_)) => err(format!("{at}.{key} must not be empty")),
        Some(_) => err(format!("{at}.{key} must be an array")),
        None => err(format!("{at}.{key} is missing")),
    }
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    v.as_object().ok_or_else(|| SchemaError(format!("{at} must be an object")))
}

/// Validates a parsed response against `schema`.
pub fn validate_payload(schema: SchemaId, value: &Value) -> Result<(Payload, Meta), SchemaError> {
    let obj = object(value, "response")?;
    let rationale = non_empty_str(obj, "rationale", "response")?.to_owned();
    let payload = match schema {
        SchemaId::Themes => {
            let mut items = Vec::new();
            for (i, item) in array(obj, "themes", "response")?.iter().enumerate() {
                let at = format!("themes[{i}]");
                let o = object(item, &at)?;
                let expressions = array(o, "expressions", &at)?
                    .iter()
                    .enumerate()
                    .map(|(j, e)| match e.as_str() {
                        Some(s) if !s.trim().is_empty() => Ok(s.to_owned()),
                        _ => err(format!("{at}.expressions[{j}] must be a non-empty string")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                items.push(ThemeItem {
                    main_theme: non_empty_str(o, "main_theme", &at)?.to_owned(),
                    expressions,
                    quote: non_empty_str(o, "quote", &at)?.to_owned(),
                });
            }
            Payload::Themes(items)
        }
        SchemaId::Questions => {
            let mut items = Vec::new();
            for (i, item) in array(obj, "questions", "response")?.iter().enumerate() {
                let at = format!("questions[{i}]");
                let o = object(item, &at)?;
                items.push(QuestionCandidate {
                    text: non_empty_str(o, "question", &at)?.to_owned(),
                    intention: non_empty_str(o, "intention", &at)?.to_owned(),
                });
            }
            Payload::Questions(items)
        }
        SchemaId::Keywords => {
            let mut items = Vec::new();
            for (i, item) in array(obj, "keywords", "response")?.iter().enumerate() {
                match item.as_str() {
                    Some(s) if s.trim().is_empty() => return err(format!("keywords[{i}] is empty")),
                    Some(s) if crate::text::word_count(s) > MAX_KEYWORD_WORDS => {
                        return err(format!(
                            "keywords[{i}] has more than {MAX_KEYWORD_WORDS} words"
                        ))
                    }
                    Some(s) => items.push(s.trim().to_owned()),
                    None => return err(format!("keywords[{i}] must be a string")),
                }
            }
            Payload::Keywords(items)
        }
        SchemaId::Comment => {
            let raw = non_empty_str(obj, "category", "response")?;
            let category = CommentCategory::parse(raw.trim()).ok_or_else(|| {
                SchemaError(format!(
                    "response.category {raw:?} is not one of tip, encouragement, subquestion, insight, other"
                ))
            })?;
            Payload::Comment {
                category,
                text: non_empty_str(obj, "comment", "response")?.to_owned(),
            }
        }
        SchemaId::Summary => Payload::Summary(non_empty_str(obj, "summary", "response")?.to_owned()),
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| k.as_str() != "rationale" && !schema.fields().contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok((payload, Meta { rationale, extra }))
}
