//! The engine embedded in a program, no HTTP: one short session from
//! narrative to summary, then its usage row and a validation pass.

use std::sync::Arc;

use threadwise::engine::{Engine, EngineOptions, KeywordMode};
use threadwise::store::InMemoryStore;
use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::model::SurveyPhase;
use threadwise_core::validate::validate_session;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::new(
        Arc::new(InMemoryStore::new()),
        Gateway::from_config(ProviderConfig::mock(7))?,
        EngineOptions::default(),
    );
    let s = engine.create_session(
        "I retired after decades of work and planned to paint. My daughter asked me to mind her newborn. \
         I love my grandson, but my own days have disappeared.",
        Some("en"),
        None,
    )?;
    engine.submit_survey(&s.id, SurveyPhase::Pre, &[5, 6, 5, 6]).await?;

    let themes = engine.suggest_themes(&s.id, Some(3)).await?;
    let theme = engine.activate_theme(&s.id, themes.suggestions[0].clone()).await?;
    println!("theme: {}", theme.name());

    let cands = engine.suggest_questions(&s.id, &theme.id, None, None).await?;
    let q = engine.select_question(&s.id, &theme.id, cands.candidates[0].clone()).await?;
    println!("question: {}", q.text);
    engine.settle(&s.id).await?;

    engine.update_answer(&s.id, &q.id, "Mornings used to be for painting.").await?;
    let kw = engine.keywords(&s.id, &q.id, KeywordMode::Initial).await?;
    println!("keywords: {}", kw.keywords.join(", "));
    let c = engine.request_comment(&s.id, &q.id).await?;
    println!("comment ({:?}): {}", c.category, c.text);

    let summary = engine.summarize(&s.id).await?;
    println!("summary of v{}: {}", summary.state_version, summary.text);
    engine.submit_survey(&s.id, SurveyPhase::Post, &[6, 6, 7, 6]).await?;

    println!("{:?}", engine.metrics(&s.id)?);
    let record = engine.export(&s.id)?;
    let report = validate_session(&record.session, &record.events);
    println!("{} events, invariants ok: {}", record.events.len(), report.is_ok());
    Ok(())
}
