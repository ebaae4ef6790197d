use proptest::prelude::*;

use threadwise_core::canonical::{canonicalize, to_canonical_string};
use threadwise_core::llm::mock::mock_generate;
use threadwise_core::llm::schema::SchemaId;
use threadwise_core::metrics::{count_syllables, phase_timeline, ColumnStats};
use threadwise_core::model::{
    score_pathways, CommentCategory, CommentDraft, EventKind, EventRecord, KeywordBatch, Origin, Page,
    PathwaysResponse, QuestionCandidate, QuestionId, Session, SessionId, ThemeId, ThemeSuggestion, Timestamp,
    Trigger,
};
use threadwise_core::state_xml::{parse_state_xml, serialize_state_xml, StateScope};
use threadwise_core::text::{is_grounded, normalize_ws, sentences};
use threadwise_core::validate::validate_session;

fn mixed_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z0-9 .,!?]{0,6}",
            "[가-힣 ]{0,6}",
            "[ㄱ-ㅎㅏ-ㅣ]{0,3}",
            Just("\u{1100}\u{1161}".to_owned()),
            Just("\n\t<&>\"'".to_owned()),
        ],
        0..8,
    )
    .prop_map(|parts| parts.concat())
}

fn narrative() -> impl Strategy<Value = String> {
    prop::collection::vec("[A-Z][a-z]{2,8}( [a-z]{2,9}){2,9}[.!?]", 1..6).prop_map(|s| s.join(" "))
}

proptest! {
    #[test]
    fn syllables_are_additive(a in mixed_text(), b in mixed_text()) {
        prop_assert_eq!(count_syllables(&(a.clone() + &b)), count_syllables(&a) + count_syllables(&b));
    }

    #[test]
    fn normalize_is_idempotent(t in mixed_text()) {
        let once = normalize_ws(&t);
        prop_assert_eq!(normalize_ws(&once), once.clone());
        prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
    }

    #[test]
    fn reformatted_substrings_stay_grounded(text in narrative(), start in 0usize..40, len in 1usize..40) {
        let chars: Vec<char> = text.chars().collect();
        let start = start.min(chars.len() - 1);
        let end = (start + len).min(chars.len());
        let piece: String = chars[start..end].iter().collect();
        prop_assume!(!piece.trim().is_empty());
        let reformatted = piece.replace(' ', " \n ").to_uppercase();
        prop_assert!(is_grounded(&reformatted, [text.as_str()]));
    }

    #[test]
    fn pathways_score_is_the_sum(items in prop::array::uniform4(1i64..=8)) {
        let score = score_pathways(&PathwaysResponse::new(&items).unwrap()).unwrap();
        prop_assert_eq!(score as i64, items.iter().sum::<i64>());
        prop_assert!((4..=32).contains(&score));
    }

    #[test]
    fn pathways_reject_out_of_range(items in prop::array::uniform4(-3i64..12)) {
        let valid = items.iter().all(|v| (1..=8).contains(v));
        prop_assert_eq!(PathwaysResponse::new(&items).is_ok(), valid);
    }

    #[test]
    fn mean_within_bounds_and_sd_nonnegative(values in prop::collection::vec(0u32..2000, 2..40)) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let s = ColumnStats::of(&v).unwrap();
        prop_assert!(s.min <= s.mean + 1e-9 && s.mean <= s.max + 1e-9);
        prop_assert!(s.sample_sd >= 0.0);
    }

    #[test]
    fn state_xml_is_idempotent_and_round_trips(n in mixed_text(), answer in mixed_text()) {
        let narrative = format!("x{n}");
        let mut s = Session::create(SessionId::from("s"), &narrative, "ko", Timestamp(0)).unwrap();
        let tid = s.activate_theme(ThemeSuggestion::custom("Theme <1>"), Timestamp(1)).unwrap().id.clone();
        let qid = s.select_question(&tid, QuestionCandidate { text: "Why & how?".into(), intention: "i".into() }, Timestamp(2)).unwrap().id.clone();
        s.update_answer(&qid, &answer, Timestamp(3)).unwrap();
        let scope = StateScope::question(tid, qid);
        let a = serialize_state_xml(&s, &scope).unwrap();
        prop_assert_eq!(&a, &serialize_state_xml(&s, &scope).unwrap());
        let parsed = parse_state_xml(&a).unwrap();
        // XML normalizes bare carriage returns
        prop_assert_eq!(parsed.narrative, narrative.replace("\r\n", "\n").replace('\r', "\n"));
        prop_assert_eq!(parsed.current_response.unwrap().0, answer.replace("\r\n", "\n").replace('\r', "\n"));
    }

    #[test]
    fn mock_is_deterministic_and_grounded(text in narrative(), seed in any::<u64>()) {
        let s = Session::create(SessionId::from("s"), &text, "en", Timestamp(0)).unwrap();
        let xml = serialize_state_xml(&s, &StateScope::history()).unwrap();
        for schema in [SchemaId::Themes, SchemaId::Summary] {
            prop_assert_eq!(mock_generate(schema, &xml, seed).unwrap(), mock_generate(schema, &xml, seed).unwrap());
        }
        let raw = mock_generate(SchemaId::Themes, &xml, seed).unwrap();
        let v = threadwise_core::llm::schema::extract_json(&raw).unwrap();
        let sents = sentences(&text);
        for t in v["themes"].as_array().unwrap() {
            prop_assert!(sents.contains(&t["quote"].as_str().unwrap()));
        }
    }

    #[test]
    fn canonical_form_is_a_fixed_point(n in narrative(), answer in mixed_text()) {
        let mut s = Session::create(SessionId::from("s"), &n, "en", Timestamp(0)).unwrap();
        let tid = s.activate_theme(ThemeSuggestion::custom("A"), Timestamp(1)).unwrap().id.clone();
        let qid = s.select_question(&tid, QuestionCandidate { text: "Q?".into(), intention: "i".into() }, Timestamp(2)).unwrap().id.clone();
        s.update_answer(&qid, &answer, Timestamp(3)).unwrap();
        let doc = to_canonical_string(&s).unwrap();
        let back: Session = serde_json::from_str(&doc).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(to_canonical_string(&back).unwrap(), doc.clone());
        prop_assert_eq!(canonicalize(&serde_json::from_str(&doc).unwrap()), doc);
    }
}

#[derive(Debug, Clone)]
enum Op {
    Activate(usize),
    Custom(u8),
    Pin(usize),
    Select(usize, u8),
    Answer(usize, String),
    Keywords(usize, Vec<u8>),
    Visible(usize),
    Comment(usize, bool),
    Summary,
    Survey(bool, [i64; 4]),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..6).prop_map(Op::Activate),
        (0u8..6).prop_map(Op::Custom),
        (0usize..6).prop_map(Op::Pin),
        (0usize..6, 0u8..4).prop_map(|(t, q)| Op::Select(t, q)),
        (0usize..12, "[a-z ]{0,30}").prop_map(|(q, a)| Op::Answer(q, a)),
        (0usize..12, prop::collection::vec(0u8..8, 0..4)).prop_map(|(q, k)| Op::Keywords(q, k)),
        (0usize..12).prop_map(Op::Visible),
        (0usize..12, any::<bool>()).prop_map(|(q, a)| Op::Comment(q, a)),
        Just(Op::Summary),
        (any::<bool>(), prop::array::uniform4(0i64..10)).prop_map(|(p, i)| Op::Survey(p, i)),
    ]
}

const STORY: &str = "I changed jobs this spring. My new manager expects long hours. I barely see my partner. I used to run every morning. Now I feel tired all the time.";

fn ai_suggestion(i: usize) -> ThemeSuggestion {
    let quote = sentences(STORY)[i % 5].to_owned();
    ThemeSuggestion {
        main_theme: format!("Theme {}", i % 5),
        expressions: vec![format!("Another view of {}", i % 5)],
        quote,
        origin: Origin::Ai,
    }
}

fn qid(s: &Session, i: usize) -> QuestionId {
    let n = s.question_count().max(1);
    QuestionId(format!("q{}", i % n + 1))
}

fn apply(s: &mut Session, op: &Op, t: i64) -> bool {
    let now = Timestamp(t);
    match op {
        Op::Activate(i) => s.activate_theme(ai_suggestion(*i), now).is_ok(),
        Op::Custom(i) => s.activate_theme(ThemeSuggestion::custom(format!("custom {i}")), now).is_ok(),
        Op::Pin(i) => s.pin_theme(ai_suggestion(*i)).is_ok(),
        Op::Select(ti, q) => {
            let tid = ThemeId(format!("t{}", ti + 1));
            let c = QuestionCandidate {
                text: format!("Question {q}?"),
                intention: "i".into(),
            };
            s.select_question(&tid, c, now).is_ok()
        }
        Op::Answer(q, a) => s.update_answer(&qid(s, *q), a, now).is_ok(),
        Op::Keywords(q, ks) => {
            let id = qid(s, *q);
            let index = s.find_question(&id).map_or(0, |(_, q)| q.keyword_batches.len() as u32);
            let batch = KeywordBatch {
                batch_index: index,
                keywords: ks.iter().map(|k| format!("kw{k}")).collect(),
            };
            s.add_keyword_batch(&id, batch).is_ok()
        }
        Op::Visible(q) => {
            let id = qid(s, *q);
            let before = s.state_version;
            s.set_keywords_visible(&id, true).is_ok() && s.state_version != before
        }
        Op::Comment(q, auto) => {
            let draft = CommentDraft {
                text: "c".into(),
                category: CommentCategory::Insight,
                rationale: "r".into(),
            };
            let trigger = if *auto { Trigger::Auto } else { Trigger::User };
            s.add_comment(&qid(s, *q), draft, trigger, now).is_ok()
        }
        Op::Summary => {
            let v = s.state_version;
            s.add_summary("Short.".into(), v, now);
            true
        }
        Op::Survey(post, items) => match PathwaysResponse::new(items) {
            Ok(r) => {
                let phase = if *post {
                    threadwise_core::model::SurveyPhase::Post
                } else {
                    threadwise_core::model::SurveyPhase::Pre
                };
                s.submit_survey(phase, r).is_ok()
            }
            Err(_) => false,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_operation_sequences_keep_invariants(ops in prop::collection::vec(op(), 0..60)) {
        let mut s = Session::create(SessionId::from("s"), STORY, "en", Timestamp(0)).unwrap();
        for (i, op) in ops.iter().enumerate() {
            let before = s.clone();
            let before_doc = to_canonical_string(&before).unwrap();
            let applied = apply(&mut s, op, i as i64);
            if applied {
                prop_assert!(s.state_version > before.state_version);
            } else {
                prop_assert_eq!(s.state_version, before.state_version);
                prop_assert_eq!(to_canonical_string(&s).unwrap(), before_doc);
            }
            // append-only growth with stable ids
            prop_assert!(s.themes.len() >= before.themes.len());
            for (a, b) in before.themes.iter().zip(&s.themes) {
                prop_assert_eq!(&a.id, &b.id);
                prop_assert!(b.questions.len() >= a.questions.len());
                for (qa, qb) in a.questions.iter().zip(&b.questions) {
                    prop_assert_eq!(&qa.id, &qb.id);
                    prop_assert!(qb.comments.len() >= qa.comments.len());
                }
            }
            prop_assert!(s.summaries.len() >= before.summaries.len());
        }
        let report = validate_session(&s, &[]);
        prop_assert!(report.is_ok(), "{}", report);
    }

    #[test]
    fn timeline_covers_the_span_without_overlap(
        steps in prop::collection::vec((0i64..500, 0u8..6), 1..40),
    ) {
        let mut t = 0;
        let events: Vec<EventRecord> = steps
            .iter()
            .map(|(dt, k)| {
                t += dt;
                let ts = Timestamp(t);
                match k {
                    0 => EventRecord::page(ts, EventKind::PageEnter, Page::Narrative),
                    1 => EventRecord::page(ts, EventKind::PageEnter, Page::Exploration),
                    2 => EventRecord::page(ts, EventKind::PageEnter, Page::Summary),
                    3 => EventRecord::page(ts, EventKind::PageLeave, Page::Exploration),
                    _ => EventRecord::new(ts, EventKind::AnswerUpdated),
                }
            })
            .collect();
        let tl = phase_timeline(&events);
        let first = events[0].timestamp;
        let last = events.last().unwrap().timestamp;
        prop_assert!(!tl.segments.is_empty());
        prop_assert_eq!(tl.segments[0].start, first);
        prop_assert_eq!(tl.segments.last().unwrap().end, last);
        for w in tl.segments.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(w[0].phase != w[1].phase);
        }
        for seg in &tl.segments {
            prop_assert!(seg.end >= seg.start);
        }
    }
}
