//! Structured-output gateway and its providers.

pub mod gateway;
pub mod mock;
pub mod remote;
pub mod schema;

pub use gateway::{
    complete_structured, CompletionRequest, Correction, Gateway, GatewayError, Provider,
    ProviderCall, ProviderConfig, ProviderKind, StructuredOutput, PERSONA_MARKER,
};
pub use mock::{mock_generate, mock_generate_n, Fault, MockProvider};
pub use schema::{Meta, Payload, SchemaId, ThemeItem};
