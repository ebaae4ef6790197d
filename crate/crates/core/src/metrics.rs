//! Usage metrics, aggregate statistics and phase timelines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EventKind, EventRecord, Page, Session, Timestamp, Trigger};

/// Hangul syllable code points (U+AC00..=U+D7A3); everything else counts 0.
pub fn count_syllables(text: &str) -> u64 {
    text.chars().filter(|c| ('\u{AC00}'..='\u{D7A3}').contains(c)).count() as u64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRow {
    pub narrative_syllables: u64,
    pub total_response_syllables: u64,
    pub theme_count: u64,
    pub question_count: u64,
    pub revealed_keyword_count: u64,
    pub user_comment_request_count: u64,
}

impl UsageRow {
    pub const COLUMNS: [&'static str; 6] = [
        "narrative_syllables",
        "total_response_syllables",
        "theme_count",
        "question_count",
        "revealed_keyword_count",
        "user_comment_request_count",
    ];

    pub fn values(&self) -> [u64; 6] {
        [
            self.narrative_syllables,
            self.total_response_syllables,
            self.theme_count,
            self.question_count,
            self.revealed_keyword_count,
            self.user_comment_request_count,
        ]
    }
}

pub fn usage_row(session: &Session) -> UsageRow {
    let questions = || session.questions();
    UsageRow {
        narrative_syllables: count_syllables(&session.narrative),
        total_response_syllables: questions().map(|q| count_syllables(&q.answer.text)).sum(),
        theme_count: session.themes.len() as u64,
        question_count: session.question_count() as u64,
        // batch 0 only counts once toggled visible; "more" batches always do
        revealed_keyword_count: questions()
            .flat_map(|q| {
                q.keyword_batches
                    .iter()
                    .filter(move |b| q.keywords_visible || b.batch_index > 0)
            })
            .map(|b| b.keywords.len() as u64)
            .sum(),
        user_comment_request_count: questions()
            .flat_map(|q| q.comments.iter())
            .filter(|c| c.trigger == Trigger::User)
            .count() as u64,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("standard deviation needs at least 2 rows, got {0}")]
    InsufficientRows(usize),
}

/// Full-precision column statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub n: usize,
    pub mean: f64,
    pub sample_sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Rounds half-up to two decimals. The small epsilon keeps values such as
/// 4.885, stored as 4.88499999..., rounding up as they print.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let eps = 1e-9 * scaled.abs().max(1.0);
    (scaled + 0.5 + eps).floor() / 100.0
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Result<Self, MetricsError> {
        let n = values.len();
        if n < 2 {
            return Err(MetricsError::InsufficientRows(n));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            n,
            mean,
            sample_sd: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// `(mean, sd)` as reported.
    pub fn reported(&self) -> (f64, f64) {
        (round2(self.mean), round2(self.sample_sd))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub columns: Vec<(String, ColumnStats)>,
}

impl Aggregate {
    pub fn column(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|(c, _)| c == name).map(|(_, s)| s)
    }
}

pub fn aggregate(rows: &[UsageRow]) -> Result<Aggregate, MetricsError> {
    let columns = UsageRow::COLUMNS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: Vec<f64> = rows.iter().map(|r| r.values()[i] as f64).collect();
            Ok(((*name).to_owned(), ColumnStats::of(&values)?))
        })
        .collect::<Result<_, MetricsError>>()?;
    Ok(Aggregate { columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Table,
}

/// One row per session plus Mean and SD footers. With fewer than two rows
/// the footers are omitted.
pub fn render_rows(rows: &[(String, UsageRow)], format: TableFormat) -> String {
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("session".to_owned())
        .chain(UsageRow::COLUMNS.iter().map(|c| (*c).to_owned()))
        .collect()];
    for (id, row) in rows {
        grid.push(
            std::iter::once(id.clone())
                .chain(row.values().iter().map(u64::to_string))
                .collect(),
        );
    }
    let only: Vec<UsageRow> = rows.iter().map(|(_, r)| *r).collect();
    if let Ok(agg) = aggregate(&only) {
        for (label, pick) in [("Mean", 0usize), ("SD", 1)] {
            grid.push(
                std::iter::once(label.to_owned())
                    .chain(agg.columns.iter().map(|(_, s)| {
                        let (m, sd) = s.reported();
                        format!("{:.2}", if pick == 0 { m } else { sd })
                    }))
                    .collect(),
            );
        }
    }
    match format {
        TableFormat::Csv => grid.iter().map(|r| r.join(",") + "\n").collect(),
        TableFormat::Table => {
            let widths: Vec<usize> = (0..grid[0].len())
                .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
                .collect();
            grid.iter()
                .map(|r| {
                    let cells: Vec<String> = r
                        .iter()
                        .enumerate()
                        .map(|(c, v)| {
                            if c == 0 {
                                format!("{v:<w$}", w = widths[c])
                            } else {
                                format!("{v:>w$}", w = widths[c])
                            }
                        })
                        .collect();
                    cells.join("  ").trim_end().to_owned() + "\n"
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub phase: Page,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Segment {
    pub fn duration_ms(&self) -> i64 {
        self.end.0 - self.start.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimeline {
    pub segments: Vec<Segment>,
    /// Irregularities in the input that were smoothed over.
    pub flags: Vec<String>,
}

impl PhaseTimeline {
    pub fn phases(&self) -> Vec<Page> {
        self.segments.iter().map(|s| s.phase).collect()
    }
}

/// Segments from `page_enter` events. Each enter runs until the next enter
/// and the final one until the last event; events before the first enter
/// are folded into the first segment. `page_leave` only feeds the flags.
pub fn phase_timeline(events: &[EventRecord]) -> PhaseTimeline {
    let mut out = PhaseTimeline::default();
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return out;
    };
    if events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        out.flags.push("events are not ordered by timestamp".into());
    }
    let (first, last) = (first.timestamp, last.timestamp);

    let mut enters: Vec<(Timestamp, Page)> = Vec::new();
    let mut current: Option<Page> = None;
    for (i, e) in events.iter().enumerate() {
        let page = e.get("page").and_then(Page::parse);
        match (e.kind, page) {
            (EventKind::PageEnter, Some(p)) => {
                enters.push((e.timestamp, p));
                current = Some(p);
            }
            (EventKind::PageLeave, Some(p)) if current != Some(p) => {
                out.flags.push(format!("event {i}: page_leave({}) while on another page", p.as_str()));
            }
            (EventKind::PageEnter | EventKind::PageLeave, None) => {
                out.flags.push(format!("event {i}: page event without a known page"));
            }
            _ => {}
        }
    }
    if enters.is_empty() {
        out.flags.push("no page_enter events; span attributed to narrative".into());
        enters.push((first, Page::Narrative));
    } else if enters[0].0 > first {
        out.flags.push("events precede the first page_enter".into());
    }
    enters[0].0 = first;

    let mut raw: Vec<Segment> = Vec::new();
    for (i, &(start, phase)) in enters.iter().enumerate() {
        let end = enters.get(i + 1).map_or(last, |n| n.0).max(start);
        raw.push(Segment { phase, start, end });
    }
    for seg in raw.iter().filter(|s| s.end > s.start) {
        match out.segments.last_mut() {
            Some(prev) if prev.phase == seg.phase && prev.end == seg.start => prev.end = seg.end,
            _ => out.segments.push(*seg),
        }
    }
    if out.segments.is_empty() {
        // all events share one timestamp
        let phase = enters.last().map_or(Page::Narrative, |e| e.1);
        out.segments.push(Segment {
            phase,
            start: first,
            end: last,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventKind, SessionId};

    #[test]
    fn syllable_examples() {
        assert_eq!(count_syllables("안녕하세요"), 5);
        assert_eq!(count_syllables(""), 0);
        assert_eq!(count_syllables("Hello 세계!"), 2);
        // jamo and compatibility jamo are outside the block
        assert_eq!(count_syllables("ㄱㅏ\u{1100}"), 0);
    }

    #[test]
    fn fresh_session_row() {
        let s = Session::create(SessionId::from("s"), "나는 은퇴했다", "ko", Timestamp(0)).unwrap();
        assert_eq!(
            usage_row(&s),
            UsageRow {
                narrative_syllables: 6,
                ..UsageRow::default()
            }
        );
    }

    #[test]
    fn aggregate_examples() {
        let themes = [7., 3., 2., 2., 9., 5., 5., 5., 6., 4., 3., 4., 5., 6., 4., 11., 3., 4., 5.];
        assert_eq!(ColumnStats::of(&themes).unwrap().reported(), (4.89, 2.26));
        assert_eq!(ColumnStats::of(&[5., 5.]).unwrap().reported(), (5.0, 0.0));
        assert_eq!(ColumnStats::of(&[1.]), Err(MetricsError::InsufficientRows(1)));
    }

    #[test]
    fn round_half_up() {
        assert_eq!(round2(4.885), 4.89);
        assert_eq!(round2(0.125), 0.13);
        assert_eq!(round2(2.2649), 2.26);
    }

    fn enter(t: i64, p: Page) -> EventRecord {
        EventRecord::page(Timestamp(t), EventKind::PageEnter, p)
    }

    #[test]
    fn three_phase_timeline() {
        let events = vec![
            enter(0, Page::Narrative),
            enter(300, Page::Exploration),
            enter(1800, Page::Summary),
            EventRecord::new(Timestamp(2100), EventKind::SummaryRequested),
        ];
        let t = phase_timeline(&events);
        let spans: Vec<(i64, i64)> = t.segments.iter().map(|s| (s.start.0, s.end.0)).collect();
        assert_eq!(spans, vec![(0, 300), (300, 1800), (1800, 2100)]);
        assert!(t.flags.is_empty());
    }

    #[test]
    fn single_enter_spans_to_last_event() {
        let events = vec![
            enter(0, Page::Narrative),
            EventRecord::page(Timestamp(60_000), EventKind::PageLeave, Page::Narrative),
        ];
        let t = phase_timeline(&events);
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.segments[0].duration_ms(), 60_000);
    }

    #[test]
    fn round_trips_recur() {
        let events = vec![
            enter(0, Page::Exploration),
            enter(10, Page::Summary),
            enter(20, Page::Exploration),
            EventRecord::new(Timestamp(30), EventKind::AnswerUpdated),
        ];
        assert_eq!(
            phase_timeline(&events).phases(),
            vec![Page::Exploration, Page::Summary, Page::Exploration]
        );
    }

    #[test]
    fn csv_has_footer() {
        let rows = vec![
            ("a".to_owned(), UsageRow { theme_count: 5, ..UsageRow::default() }),
            ("b".to_owned(), UsageRow { theme_count: 5, ..UsageRow::default() }),
        ];
        let csv = render_rows(&rows, TableFormat::Csv);
        assert!(csv.lines().nth(3).unwrap().starts_with("Mean,0.00,0.00,5.00"));
        assert_eq!(csv.lines().count(), 5);
    }
}
