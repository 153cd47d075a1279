//! Storybook question-answer generation: answer extraction over a linguistic
//! annotation, answer-conditioned question generation, learned ranking, and
//! the Rouge-L / MAP@N evaluation used to compare systems.

pub mod answer_extract;
pub mod corpus;
pub mod eval;
pub mod lingann;
pub mod pipeline;
pub mod qgen;
pub mod ranker;
