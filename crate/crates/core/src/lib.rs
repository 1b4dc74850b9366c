//! Extract-method suggestion engine for Java.
//!
//! The pipeline samples candidate fragments from a language model, snaps them
//! onto statement boundaries, rejects the ones that cannot be extracted
//! safely, ranks the survivors by how often they were proposed and finally
//! performs the chosen extraction as a text edit.

pub mod source;
pub mod dataflow;
pub mod candidates;
pub mod ranking;
pub mod provider;
pub mod extractor;
pub mod eval;
pub mod pipeline;
