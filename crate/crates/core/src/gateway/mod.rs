//! Prompt rendering, chat backends and structured-answer extraction.

mod backend;
mod extract;
mod prompt;

pub use backend::{
    BackendError, ChatBackend, ChatRequest, DecodeParams, HttpChatBackend, Script, ScriptReply, ScriptRule, ScriptSet,
    ScriptedBackend,
};
pub use extract::{
    canonical_answer, classify_answer, extract_first_json, first_object_span, AnswerClass, AnswerDomain, ExtractError,
    StructuredAnswer,
};
pub use prompt::{render_rag_prompt, RAG_PROMPT_TEMPLATE};

use serde::Serialize;

/// A prompt, what the model said, and what could be read out of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelExchange {
    pub prompt: String,
    pub raw_output: String,
    parsed: Option<StructuredAnswer>,
    parse_error: Option<ExtractError>,
}

impl ModelExchange {
    /// Record an exchange, running extraction on the raw output.
    pub fn new(prompt: impl Into<String>, raw_output: impl Into<String>) -> Self {
        let raw_output = raw_output.into();
        let (parsed, parse_error) = match extract_first_json(&raw_output) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e)),
        };
        Self {
            prompt: prompt.into(),
            raw_output,
            parsed,
            parse_error,
        }
    }

    pub fn parsed(&self) -> Option<&StructuredAnswer> {
        self.parsed.as_ref()
    }

    pub fn parse_error(&self) -> Option<&ExtractError> {
        self.parse_error.as_ref()
    }
}

/// Send `request` and record the exchange under `prompt`.
pub fn exchange(backend: &dyn ChatBackend, request: &ChatRequest) -> Result<ModelExchange, BackendError> {
    let raw = backend.complete(request)?;
    Ok(ModelExchange::new(request.user.clone(), raw))
}

/// Ask the RAG model with the rendered prompt.
pub fn ask_rag(
    backend: &dyn ChatBackend,
    query: &str,
    references: &str,
    params: &DecodeParams,
) -> Result<ModelExchange, BackendError> {
    let request = ChatRequest {
        system: String::new(),
        user: render_rag_prompt(query, references),
        query: query.to_string(),
        params: params.clone(),
    };
    exchange(backend, &request)
}

/// Ask the fine-tuned model. It receives the bare question.
pub fn ask_finetuned(
    backend: &dyn ChatBackend,
    query: &str,
    params: &DecodeParams,
) -> Result<ModelExchange, BackendError> {
    let request = ChatRequest {
        system: String::new(),
        user: query.to_string(),
        query: query.to_string(),
        params: params.clone(),
    };
    exchange(backend, &request)
}
