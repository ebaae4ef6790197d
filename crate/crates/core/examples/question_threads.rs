//! Breadth and depth: themes branch from the narrative, and each theme grows
//! a thread of Socratic questions. Follow-up questions can be anchored to an
//! earlier one in the same thread.

use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::model::{Session, SessionId, ThemeSuggestion, Timestamp};
use threadwise_core::pipelines::Pipelines;

#[tokio::main]
async fn main() {
    let pipelines = Pipelines::new(Gateway::from_config(ProviderConfig::mock(11)).unwrap());
    let mut s = Session::create(
        SessionId::new("threads"),
        "회사를 그만두고 싶지만 용기가 나지 않는다. 부모님은 안정적인 직장을 원하신다. 나는 글을 쓰는 일을 하고 싶다.",
        "ko",
        Timestamp(0),
    )
    .unwrap();

    let suggestion = pipelines.generate_themes(&s, 1).await.unwrap().remove(0);
    let ai = s.activate_theme(suggestion, Timestamp(1_000)).unwrap().id.clone();
    let own = s
        .activate_theme(ThemeSuggestion::custom("부모님의 기대"), Timestamp(2_000))
        .unwrap()
        .id
        .clone();

    let mut clock = 3_000;
    for theme in [&ai, &own] {
        let first = pipelines.generate_questions(&s, theme, 3, None).await.unwrap();
        let q1 = s.select_question(theme, first[0].clone(), Timestamp(clock)).unwrap().id.clone();
        s.update_answer(&q1, "아직 잘 모르겠다. 그래도 한번 생각해 보고 싶다.", Timestamp(clock + 500))
            .unwrap();
        let follow = pipelines.generate_questions(&s, theme, 2, Some(&q1)).await.unwrap();
        s.select_question(theme, follow[0].clone(), Timestamp(clock + 1_000)).unwrap();
        clock += 2_000;
    }

    for t in &s.themes {
        println!("{} ({:?})", t.name(), t.suggestion.origin);
        for q in &t.questions {
            println!("  {} {}", q.id, q.text);
            println!("     intention: {}", q.intention);
        }
    }
    println!("state version {}", s.state_version);
}
