use std::sync::Arc;

use threadwise_core::llm::gateway::{Gateway, GatewayError, ProviderConfig};
use threadwise_core::llm::mock::{Fault, MockProvider};
use threadwise_core::llm::schema::SchemaId;
use threadwise_core::model::{
    CommentCategory, KeywordBatch, QuestionCandidate, QuestionId, Session, SessionId, ThemeId, ThemeSuggestion,
    Timestamp, Trigger,
};
use threadwise_core::pipelines::{summary_budget, PipelineError, Pipelines};
use threadwise_core::text::{is_grounded, normalize_ws, sentences};

const JANE: &str = "I retired after decades of work and planned to take up painting and travel. \
My daughter asked me to look after her newborn during the day. I love my grandson. \
Still, my own life feels overshadowed by these new responsibilities and I struggle with purposelessness.";

const JANE_KO: &str = "은퇴 후에 그림을 배우고 여행을 다니려고 했습니다. 딸이 낮 동안 갓 태어난 아기를 돌봐 달라고 부탁했어요. 손자를 사랑합니다. 그래도 새로운 책임 때문에 내 삶이 가려지는 것 같고 목적을 잃은 느낌이에요.";

fn setup(narrative: &str, locale: &str) -> (Pipelines, Arc<MockProvider>, Session) {
    let mock = Arc::new(MockProvider::new(7));
    let gw = Gateway::with_provider(mock.clone(), ProviderConfig::mock(7));
    let s = Session::create(SessionId::from("p"), narrative, locale, Timestamp(0)).unwrap();
    (Pipelines::new(gw), mock, s)
}

fn with_question(s: &mut Session) -> (ThemeId, QuestionId) {
    let tid = s
        .activate_theme(ThemeSuggestion::custom("Overwhelmed by new responsibilities"), Timestamp(1))
        .unwrap()
        .id
        .clone();
    let qid = s
        .select_question(
            &tid,
            QuestionCandidate {
                text: "In what ways could you bring your hobbies into your current routine?".into(),
                intention: "Reconnect with personal interests.".into(),
            },
            Timestamp(2),
        )
        .unwrap()
        .id
        .clone();
    (tid, qid)
}

#[tokio::test]
async fn themes_are_grounded_sentences_in_both_locales() {
    for (narrative, locale) in [(JANE, "en"), (JANE_KO, "ko")] {
        let (p, _, s) = setup(narrative, locale);
        let themes = p.generate_themes(&s, 3).await.unwrap();
        assert_eq!(themes.len(), 3);
        let sents = sentences(narrative);
        for t in &themes {
            assert!(sents.contains(&t.quote.as_str()));
            assert!(is_grounded(&t.quote, [narrative]));
            assert!(!t.expressions.is_empty());
        }
    }
}

#[tokio::test]
async fn second_batch_never_repeats_activated_names() {
    let (p, _, mut s) = setup(JANE, "en");
    let first = p.generate_themes(&s, 3).await.unwrap();
    for (i, t) in first.iter().enumerate() {
        s.activate_theme(t.clone(), Timestamp(i as i64 + 1)).unwrap();
    }
    let second = p.generate_themes(&s, 3).await;
    let activated: Vec<String> = s.themes.iter().map(|t| normalize_ws(t.name())).collect();
    match second {
        Ok(items) => assert!(items.iter().all(|t| !activated.contains(&normalize_ws(&t.main_theme)))),
        Err(e) => assert_eq!(e, PipelineError::NoValidSuggestions),
    }
}

#[tokio::test]
async fn paraphrased_quote_gets_one_corrective_retry() {
    let (p, mock, s) = setup(JANE, "en");
    mock.inject(Some(SchemaId::Themes), Fault::ParaphraseQuote);
    let themes = p.generate_themes(&s, 3).await.unwrap();
    assert_eq!(mock.calls(), 2);
    assert!(themes.iter().all(|t| is_grounded(&t.quote, [JANE])));
    assert_eq!(themes.len(), 3);
}

#[tokio::test]
async fn invented_quotes_are_dropped() {
    let (p, mock, s) = setup(JANE, "en");
    mock.inject(Some(SchemaId::Themes), Fault::InventQuote);
    assert_eq!(p.generate_themes(&s, 3).await, Err(PipelineError::NoValidSuggestions));
    assert_eq!(mock.calls(), 1);
}

#[tokio::test]
async fn questions_exact_count_distinct_and_follow_up() {
    let (p, _, mut s) = setup(JANE, "en");
    let (tid, qid) = with_question(&mut s);
    for n in [1, 3, 5] {
        let qs = p.generate_questions(&s, &tid, n, None).await.unwrap();
        assert_eq!(qs.len(), n as usize);
        let mut keys: Vec<String> = qs.iter().map(|q| normalize_ws(&q.text)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), n as usize);
        assert!(qs.iter().all(|q| q.text.ends_with('?') && !q.intention.is_empty()));
        assert!(!keys.contains(&normalize_ws(&s.themes[0].questions[0].text)));
    }
    // follow-up on an empty answer still yields n
    let qs = p.generate_questions(&s, &tid, 3, Some(&qid)).await.unwrap();
    assert_eq!(qs.len(), 3);
    s.update_answer(&qid, "Maybe painting classes on weekends with other retirees.", Timestamp(3))
        .unwrap();
    let follow = p.generate_questions(&s, &tid, 3, Some(&qid)).await.unwrap();
    assert_ne!(follow, qs);
}

#[tokio::test]
async fn questions_reject_unknown_or_foreign_ids() {
    let (p, _, mut s) = setup(JANE, "en");
    let (tid, _) = with_question(&mut s);
    assert_eq!(
        p.generate_questions(&s, &ThemeId::from("t9"), 3, None).await,
        Err(PipelineError::UnknownTheme("t9".into()))
    );
    assert_eq!(
        p.generate_questions(&s, &tid, 3, Some(&QuestionId::from("q9"))).await,
        Err(PipelineError::UnknownQuestion("q9".into()))
    );
}

#[tokio::test]
async fn keyword_batches_are_disjoint() {
    let (p, _, mut s) = setup(JANE, "en");
    let (_, qid) = with_question(&mut s);
    let first = p.generate_keywords(&s, &qid, 2).await.unwrap();
    assert_eq!(first.len(), 2);
    s.add_keyword_batch(&qid, KeywordBatch { batch_index: 0, keywords: first.clone() })
        .unwrap();
    let more = p.generate_keywords(&s, &qid, 3).await.unwrap();
    assert!(!more.is_empty() && more.len() <= 3);
    for k in &more {
        assert!(!first.iter().any(|f| normalize_ws(f) == normalize_ws(k)));
    }
}

#[tokio::test]
async fn comment_categories_follow_the_answer() {
    let (p, _, mut s) = setup(JANE, "en");
    let (_, qid) = with_question(&mut s);
    let c = p.generate_comment(&s, &qid).await.unwrap();
    assert_eq!(c.category, CommentCategory::Tip);
    assert!(!c.rationale.is_empty());
    s.add_comment(&qid, c, Trigger::Auto, Timestamp(3)).unwrap();
    s.update_answer(&qid, "I could join a painting group.", Timestamp(4)).unwrap();
    let c = p.generate_comment(&s, &qid).await.unwrap();
    assert_eq!(c.category, CommentCategory::Encouragement);
    s.add_comment(&qid, c, Trigger::User, Timestamp(5)).unwrap();
    let c = p.generate_comment(&s, &qid).await.unwrap();
    s.add_comment(&qid, c, Trigger::User, Timestamp(6)).unwrap();
    let comments = &s.find_question(&qid).unwrap().1.comments;
    assert_eq!(comments.len(), 3);
    assert!(comments.windows(2).all(|w| w[0].created_at <= w[1].created_at));
}

async fn two_theme_session(p: &Pipelines) -> Session {
    let mut s = Session::create(SessionId::from("p"), JANE, "en", Timestamp(0)).unwrap();
    let themes = p.generate_themes(&s, 2).await.unwrap();
    let answers = [
        "Painting used to calm me. I miss having time for it.",
        "I feel guilty wanting time for myself.",
        "Maybe a class two mornings a week would help.",
    ];
    let mut a = 0;
    for (i, t) in themes.into_iter().enumerate() {
        let tid = s.activate_theme(t, Timestamp(10 + i as i64)).unwrap().id.clone();
        let count = if i == 0 { 2 } else { 1 };
        let cands = p.generate_questions(&s, &tid, 3, None).await.unwrap();
        for c in cands.into_iter().take(count) {
            let qid = s.select_question(&tid, c, Timestamp(20)).unwrap().id.clone();
            s.update_answer(&qid, answers[a], Timestamp(30)).unwrap();
            a += 1;
        }
    }
    s
}

#[tokio::test]
async fn summary_quotes_answers_per_theme() {
    let (p, _, _) = setup(JANE, "en");
    let mut s = two_theme_session(&p).await;
    let draft = p.generate_summary(&s).await.unwrap();
    assert_eq!(draft.state_version, s.state_version);
    let paragraphs: Vec<&str> = draft.text.split("\n\n").collect();
    assert_eq!(paragraphs.len(), 2);
    let answers: Vec<String> = s.questions().map(|q| q.answer.text.clone()).collect();
    for para in paragraphs {
        let fragment = para.split('"').nth(3).expect("quoted fragment");
        assert!(answers.iter().any(|a| a.contains(fragment)), "{fragment}");
    }
    assert!(draft.text.chars().count() <= summary_budget(&s));

    // regenerate after one more answer
    let v1 = draft.state_version;
    s.add_summary(draft.text, v1, Timestamp(40));
    let qid = s.themes[1].questions[0].id.clone();
    s.update_answer(&qid, "I will ask my daughter about Tuesdays.", Timestamp(50)).unwrap();
    assert!(p.generate_summary(&s).await.unwrap().state_version > v1);
}

#[tokio::test]
async fn empty_session_summary_is_a_recap() {
    let (p, _, s) = setup(JANE, "en");
    let draft = p.generate_summary(&s).await.unwrap();
    assert!(!draft.text.contains("\n\n"));
    assert!(draft.text.contains(sentences(JANE)[0]));
}

#[tokio::test]
async fn oversize_summary_retries_then_fails() {
    let (p, mock, s) = setup(JANE, "en");
    mock.inject(Some(SchemaId::Summary), Fault::Oversize);
    assert!(p.generate_summary(&s).await.is_ok());
    assert_eq!(mock.calls(), 2);

    mock.inject(Some(SchemaId::Summary), Fault::Oversize);
    mock.inject(Some(SchemaId::Summary), Fault::Oversize);
    match p.generate_summary(&s).await {
        Err(PipelineError::Gateway(GatewayError::SchemaViolation { message, .. })) => {
            assert!(message.contains("limit"))
        }
        other => panic!("unexpected {other:?}"),
    }
}
