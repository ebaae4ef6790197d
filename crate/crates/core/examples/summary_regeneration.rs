//! Summaries are snapshots tied to the state version they describe. Editing
//! an answer moves the version on, so the old summary is visibly out of
//! date and can be regenerated.

use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::model::{Session, SessionId, ThemeSuggestion, Timestamp};
use threadwise_core::pipelines::{summary_budget, Pipelines};

#[tokio::main]
async fn main() {
    let pipelines = Pipelines::new(Gateway::from_config(ProviderConfig::mock(2)).unwrap());
    let mut s = Session::create(
        SessionId::new("summary"),
        "I keep saying yes to extra work. I am tired and my partner notices.",
        "en",
        Timestamp(0),
    )
    .unwrap();
    let tid = s.activate_theme(ThemeSuggestion::custom("Saying no"), Timestamp(1)).unwrap().id.clone();
    let cand = pipelines.generate_questions(&s, &tid, 1, None).await.unwrap().remove(0);
    let qid = s.select_question(&tid, cand, Timestamp(2)).unwrap().id.clone();
    s.update_answer(&qid, "I worry people will think I am lazy.", Timestamp(3)).unwrap();

    let first = pipelines.generate_summary(&s).await.unwrap();
    s.add_summary(first.text.clone(), first.state_version, Timestamp(4));
    println!("summary of v{} (budget {} chars):\n{}\n", first.state_version, summary_budget(&s), first.text);

    s.update_answer(&qid, "I worry people will think I am lazy. My manager never said so.", Timestamp(5))
        .unwrap();
    let latest = s.summaries.last().unwrap();
    println!("session is at v{}, latest summary covers v{}", s.state_version, latest.state_version);

    let second = pipelines.generate_summary(&s).await.unwrap();
    s.add_summary(second.text.clone(), second.state_version, Timestamp(6));
    println!("regenerated for v{}:\n{}", second.state_version, second.text);
    println!("{} summaries kept", s.summaries.len());
}
