//! The agency pathways subscale: four items on a 1..8 scale, given before
//! and after a session. Scores are plain sums.

use threadwise_core::model::{PathwaysResponse, Session, SessionId, SurveyPhase, Timestamp};

fn main() {
    let mut s = Session::create(SessionId::new("survey"), "요즘 길을 잃은 것 같다.", "ko", Timestamp(0)).unwrap();

    let pre = s.submit_survey(SurveyPhase::Pre, PathwaysResponse::new(&[5, 6, 5, 6]).unwrap()).unwrap();
    let post = s.submit_survey(SurveyPhase::Post, PathwaysResponse::new(&[6, 6, 7, 6]).unwrap()).unwrap();
    println!("pre {pre}, post {post}");
    println!("delta {:?}", s.survey.as_ref().and_then(|p| p.delta()));

    match PathwaysResponse::new(&[5, 9, 5, 5]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}
