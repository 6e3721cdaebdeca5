//! Evaluation metrics for the two task families: passage retrieval with
//! no-answer semantics ([`retrieval`]) and ranked partial-match reading
//! comprehension ([`mrc`]).

pub mod mrc;
pub mod retrieval;
