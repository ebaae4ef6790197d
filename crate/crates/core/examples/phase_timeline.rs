//! Splits an event log into narrative, exploration and summary periods.
//! Writers often bounce between exploring and reading the summary, so
//! phases may recur.

use threadwise_core::metrics::phase_timeline;
use threadwise_core::model::{EventKind, EventRecord, Page, Timestamp};

fn enter(ms: i64, page: Page) -> EventRecord {
    EventRecord::page(Timestamp(ms), EventKind::PageEnter, page)
}

fn main() {
    let min = 60_000;
    let events = vec![
        enter(0, Page::Narrative),
        enter(5 * min, Page::Exploration),
        EventRecord::new(Timestamp(9 * min), EventKind::ThemeActivated).with("theme", "t1"),
        enter(30 * min, Page::Summary),
        enter(33 * min, Page::Exploration),
        EventRecord::new(Timestamp(40 * min), EventKind::AnswerUpdated).with("question", "q4"),
        enter(44 * min, Page::Summary),
        EventRecord::new(Timestamp(47 * min), EventKind::SummaryRequested),
    ];
    let timeline = phase_timeline(&events);
    for seg in &timeline.segments {
        let bar = "#".repeat((seg.duration_ms() / min) as usize);
        println!("{:>12} {:>3} min {bar}", seg.phase.as_str(), seg.duration_ms() / min);
    }
    if !timeline.flags.is_empty() {
        println!("flags: {:?}", timeline.flags);
    }
}
