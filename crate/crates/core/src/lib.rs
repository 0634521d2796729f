//! Hybrid question answering over a knowledge base, Wikipedia text, tables
//! and infoboxes, with verified LLM claims fused into one answer.

pub mod config;
pub mod entity;
pub mod eval;
pub mod fixture_server;
pub mod fusion;
pub mod grounding;
pub mod http;
pub mod index;
pub mod kb;
pub mod llm;
pub mod pipeline;
pub mod service;
pub mod wikitext;
