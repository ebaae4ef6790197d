//! Keywords and comments help a writer who is stuck on a question. The
//! first keyword batch stays hidden until asked for; later batches avoid
//! repeating earlier keywords. Comments carry a category.

use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::model::{KeywordBatch, Session, SessionId, ThemeSuggestion, Timestamp, Trigger};
use threadwise_core::pipelines::Pipelines;

#[tokio::main]
async fn main() {
    let pipelines = Pipelines::new(Gateway::from_config(ProviderConfig::mock(5)).unwrap());
    let mut s = Session::create(
        SessionId::new("guidance"),
        "I moved cities for work and weekends feel empty. I miss my old friends.",
        "en",
        Timestamp(0),
    )
    .unwrap();
    let tid = s
        .activate_theme(ThemeSuggestion::custom("Loneliness after the move"), Timestamp(1))
        .unwrap()
        .id
        .clone();
    let cand = pipelines.generate_questions(&s, &tid, 1, None).await.unwrap().remove(0);
    let qid = s.select_question(&tid, cand, Timestamp(2)).unwrap().id.clone();
    println!("question: {}", s.find_question(&qid).unwrap().1.text);

    let auto = pipelines.generate_comment(&s, &qid).await.unwrap();
    s.add_comment(&qid, auto, Trigger::Auto, Timestamp(3)).unwrap();

    for (index, count) in [(0, 2), (1, 3)] {
        let keywords = pipelines.generate_keywords(&s, &qid, count).await.unwrap();
        s.add_keyword_batch(&qid, KeywordBatch { batch_index: index, keywords }).unwrap();
    }
    s.set_keywords_visible(&qid, true).unwrap();

    s.update_answer(&qid, "Saturdays are the worst. I end up scrolling all day.", Timestamp(4))
        .unwrap();
    let asked = pipelines.generate_comment(&s, &qid).await.unwrap();
    s.add_comment(&qid, asked, Trigger::User, Timestamp(5)).unwrap();

    let q = s.find_question(&qid).unwrap().1;
    for b in &q.keyword_batches {
        println!("keywords #{}: {}", b.batch_index, b.keywords.join(", "));
    }
    for c in &q.comments {
        println!("{:?}/{:?}: {}", c.trigger, c.category, c.text);
    }
}
