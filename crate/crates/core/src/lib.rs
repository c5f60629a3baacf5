//! Question generation from a knowledge base of triples.
//!
//! The crate is organised as a chain of stages:
//!
//! * [`kb`] loads `<subject, predicate, object>` triples.
//! * [`template`] instantiates predicate-keyed question templates into seed questions.
//! * [`expand`] grows the seed set by querying a [`expand::SuggestionProvider`] for
//!   related questions until the queue drains or the iteration budget runs out.
//! * [`lm`] trains or imports an interpolated Kneser-Ney n-gram model and computes the
//!   length-normalised fluency score of a question.
//! * [`embed`] averages word vectors into document embeddings, scores domain relevance
//!   by cosine similarity and classifies short texts by their nearest domain document.
//! * [`pipeline`] wires everything together and persists each stage to a run directory.
//!
//! Batch work (seed instantiation, candidate scoring, corpus similarity search and
//! batch classification) runs on rayon when the `parallel` feature is enabled, which it
//! is by default. See [`Exec`].

pub mod embed;
pub mod error;
mod exec;
pub mod expand;
pub mod kb;
pub mod lm;
pub mod pipeline;
pub mod template;
pub mod text;

pub use error::{Error, Result};
pub use exec::Exec;
