//! Hybrid retrieval-augmented question answering.
//!
//! Web pages become text chunks and Markdown tables, questions are routed by
//! predicted attributes, references from retrieval, a knowledge graph, a
//! sandboxed calculator and the generator's own knowledge are fed to a
//! reasoning prompt, and the verdict is normalized so that uncertain answers
//! become abstentions. [`evalkit`] scores verdicts with the +1/0/-1 protocol.

pub mod attributes;
pub mod calculator;
pub mod evalkit;
pub mod ingest;
pub mod kg;
pub mod knowledge;
pub mod orchestrator;
pub mod provider;
pub mod retrieval;
