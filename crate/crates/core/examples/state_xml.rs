//! The model sees the session as an XML document. Scopes decide how much:
//! the whole history, one theme, or one question inside a theme.

use threadwise_core::model::{QuestionCandidate, Session, SessionId, ThemeSuggestion, Timestamp};
use threadwise_core::state_xml::{parse_state_xml, serialize_state_xml, StateScope};

fn main() {
    let mut s = Session::create(
        SessionId::new("xml"),
        "My brother & I stopped talking <after> the funeral.",
        "en",
        Timestamp(0),
    )
    .unwrap();
    let tid = s.activate_theme(ThemeSuggestion::custom("Grief and silence"), Timestamp(1)).unwrap().id.clone();
    let qid = s
        .select_question(
            &tid,
            QuestionCandidate {
                text: "What would you say to him first?".into(),
                intention: "Surface the unsaid".into(),
            },
            Timestamp(2),
        )
        .unwrap()
        .id
        .clone();
    s.update_answer(&qid, "That I miss him.", Timestamp(3)).unwrap();

    for scope in [StateScope::history(), StateScope::theme(tid.clone()), StateScope::question(tid, qid)] {
        let xml = serialize_state_xml(&s, &scope).unwrap();
        println!("{xml}\n");
        let parsed = parse_state_xml(&xml).unwrap();
        println!("answers seen by the model: {:?}\n", parsed.answers());
    }
}
