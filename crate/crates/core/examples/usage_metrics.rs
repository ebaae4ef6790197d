//! Per-session usage rows and their aggregate, using the theme and question
//! counts of the 19 study participants as input.

use threadwise_core::metrics::{aggregate, render_rows, usage_row, TableFormat, UsageRow};
use threadwise_core::model::{Session, SessionId, Timestamp};

const THEMES: [u64; 19] = [7, 3, 2, 2, 9, 5, 5, 5, 6, 4, 3, 4, 5, 6, 4, 11, 3, 4, 5];
const QUESTIONS: [u64; 19] = [17, 7, 18, 3, 11, 4, 15, 6, 5, 4, 8, 28, 12, 9, 10, 12, 22, 4, 23];

fn main() {
    let fresh = Session::create(SessionId::new("s"), "안녕하세요, 저는 요즘 지쳤어요.", "ko", Timestamp(0)).unwrap();
    println!("fresh session row: {:?}\n", usage_row(&fresh));

    let rows: Vec<(String, UsageRow)> = (0..19)
        .map(|p| {
            (
                format!("P{}", p + 1),
                UsageRow {
                    theme_count: THEMES[p],
                    question_count: QUESTIONS[p],
                    ..UsageRow::default()
                },
            )
        })
        .collect();
    print!("{}", render_rows(&rows[..5], TableFormat::Table));
    println!("...");

    let only: Vec<UsageRow> = rows.iter().map(|(_, r)| *r).collect();
    let agg = aggregate(&only).unwrap();
    for column in ["theme_count", "question_count"] {
        let stats = agg.column(column).unwrap();
        let (mean, sd) = stats.reported();
        println!("{column}: mean {mean:.2}, sd {sd:.2}, range {}..{}", stats.min, stats.max);
    }
}
