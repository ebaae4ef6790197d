//! Theme suggestions must quote the user's own words. This runs the theme
//! pipeline against the mock provider three times: clean, with a quote
//! paraphrased by the "model" (repaired on a correction round), and with
//! every quote invented (rejected outright, nothing close enough to repair).

use std::sync::Arc;

use threadwise_core::llm::gateway::{Gateway, ProviderConfig};
use threadwise_core::llm::mock::{Fault, MockProvider};
use threadwise_core::llm::schema::SchemaId;
use threadwise_core::model::{Session, SessionId, Timestamp};
use threadwise_core::pipelines::Pipelines;

const NARRATIVE: &str = "I retired last year and planned to paint every morning. \
My daughter asked me to look after her baby. I love my grandson. \
Still, some days I feel my own life has gone quiet.";

#[tokio::main]
async fn main() {
    let session = Session::create(SessionId::new("demo"), NARRATIVE, "en", Timestamp(0)).unwrap();
    for (label, faults) in [
        ("clean", vec![]),
        ("paraphrased quote", vec![Fault::ParaphraseQuote]),
        ("invented quotes", vec![Fault::InventQuote]),
    ] {
        let mock = Arc::new(MockProvider::new(7));
        for f in faults {
            mock.inject(Some(SchemaId::Themes), f);
        }
        let pipelines = Pipelines::new(Gateway::with_provider(mock.clone(), ProviderConfig::mock(7)));
        println!("== {label}");
        match pipelines.generate_themes(&session, 3).await {
            Ok(themes) => {
                for t in themes {
                    println!("  {} <- {:?}", t.main_theme, t.quote);
                    println!("     also: {}", t.expressions.join(" / "));
                    assert!(NARRATIVE.contains(&t.quote));
                }
            }
            Err(e) => println!("  rejected: {e}"),
        }
        println!("  provider calls: {}", mock.calls());
    }
}
