//! Versioned instruction templates and persona text, one file per
//! pipeline and locale under `prompts/`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::llm::gateway::PERSONA_MARKER;
use crate::llm::schema::SchemaId;

pub const SUMMARY_GUIDELINES: [&str; 2] = ["own language and expressions", "proportional to the content"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("persona for {locale} lacks {PERSONA_MARKER:?}")]
    Persona { locale: String },
    #[error("{schema} template for {locale} does not mention {tag}")]
    MissingTag {
        schema: SchemaId,
        locale: String,
        tag: &'static str,
    },
    #[error("summary template for {locale} lacks {phrase:?}")]
    MissingGuideline { locale: String, phrase: &'static str },
    #[error("{schema} template for {locale} lacks the {{schema}} placeholder")]
    MissingPlaceholder { schema: SchemaId, locale: String },
}

/// Input tags each instruction has to describe.
pub fn mandatory_tags(schema: SchemaId) -> &'static [&'static str] {
    match schema {
        SchemaId::Themes | SchemaId::Summary => &["<initial_information/>", "<previous_session_log>"],
        SchemaId::Questions => &[
            "<initial_information/>",
            "<previous_session_log>",
            "<theme_of_session/>",
        ],
        SchemaId::Keywords => &["<initial_information/>", "<previous_session_log>", "<question/>"],
        SchemaId::Comment => &[
            "<initial_information/>",
            "<previous_session_log>",
            "<question/>",
            "<current_response>",
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPack {
    pub locale: String,
    pub version: String,
    pub persona_preamble: String,
    pub templates: BTreeMap<SchemaId, String>,
}

macro_rules! pack_files {
    ($loc:literal) => {
        (
            include_str!(concat!("../prompts/persona.", $loc, ".txt")),
            [
                (SchemaId::Themes, include_str!(concat!("../prompts/themes.", $loc, ".txt"))),
                (SchemaId::Questions, include_str!(concat!("../prompts/questions.", $loc, ".txt"))),
                (SchemaId::Keywords, include_str!(concat!("../prompts/keywords.", $loc, ".txt"))),
                (SchemaId::Comment, include_str!(concat!("../prompts/comment.", $loc, ".txt"))),
                (SchemaId::Summary, include_str!(concat!("../prompts/summary.", $loc, ".txt"))),
            ],
        )
    };
}

pub const SUPPORTED_LOCALES: [&str; 2] = ["en", "ko"];

impl PromptPack {
    /// The bundled pack for `locale`; unknown locales fall back to English.
    pub fn builtin(locale: &str) -> Self {
        let (code, (persona, templates)) = if locale.to_ascii_lowercase().starts_with("ko") {
            ("ko", pack_files!("ko"))
        } else {
            ("en", pack_files!("en"))
        };
        Self {
            locale: code.to_owned(),
            version: include_str!("../prompts/VERSION").trim().to_owned(),
            persona_preamble: persona.trim().to_owned(),
            templates: templates
                .into_iter()
                .map(|(s, t)| (s, t.trim().to_owned()))
                .collect(),
        }
    }

    pub fn check(&self) -> Result<(), PromptError> {
        if !self.persona_preamble.contains(PERSONA_MARKER) {
            return Err(PromptError::Persona {
                locale: self.locale.clone(),
            });
        }
        for schema in SchemaId::ALL {
            let template = self.templates.get(&schema).map(String::as_str).unwrap_or("");
            for tag in mandatory_tags(schema) {
                if !template.contains(tag) {
                    return Err(PromptError::MissingTag {
                        schema,
                        locale: self.locale.clone(),
                        tag,
                    });
                }
            }
            if !template.contains("{schema}") {
                return Err(PromptError::MissingPlaceholder {
                    schema,
                    locale: self.locale.clone(),
                });
            }
        }
        let summary = &self.templates[&SchemaId::Summary];
        for phrase in SUMMARY_GUIDELINES {
            if !summary.contains(phrase) {
                return Err(PromptError::MissingGuideline {
                    locale: self.locale.clone(),
                    phrase,
                });
            }
        }
        Ok(())
    }

    /// Fills the template placeholders.
    pub fn instruction(&self, schema: SchemaId, count: Option<u32>) -> String {
        self.templates[&schema]
            .replace("{schema}", schema.describe())
            .replace("{count}", &count.unwrap_or(1).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_packs_are_complete() {
        for locale in SUPPORTED_LOCALES {
            PromptPack::builtin(locale).check().unwrap();
        }
    }

    #[test]
    fn unknown_locale_falls_back_to_english() {
        assert_eq!(PromptPack::builtin("fr-CA").locale, "en");
        assert_eq!(PromptPack::builtin("ko-KR").locale, "ko");
    }

    #[test]
    fn instruction_fills_placeholders() {
        let text = PromptPack::builtin("en").instruction(SchemaId::Questions, Some(3));
        assert!(text.contains("write 3 open"));
        assert!(text.contains(r#""intention": string"#));
        assert!(!text.contains("{count}"));
    }

    #[test]
    fn check_catches_missing_guideline() {
        let mut pack = PromptPack::builtin("en");
        pack.templates
            .insert(SchemaId::Summary, "<initial_information/> <previous_session_log> {schema}".into());
        assert!(matches!(pack.check(), Err(PromptError::MissingGuideline { .. })));
    }
}
