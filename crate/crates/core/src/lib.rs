//! Exploration-tree session model, LLM pipelines and usage metrics for
//! guided reflective writing.

pub mod canonical;
pub mod llm;
pub mod model;
pub mod state_xml;
pub mod text;
pub mod metrics;
pub mod pipelines;
pub mod prompts;
pub mod validate;
