//! Synthetic question–answer generation pipeline.
//!
//! The pipeline turns a corpus of seed questions into hard multi-hop QA pairs
//! by progressively escalating difficulty until a baseline web agent fails,
//! then filters, distills and analyzes the result. Two synthesis prongs feed
//! the filter:
//!
//! * **top-down**: build a tree of relational facts from a seed entity and
//!   escalate question difficulty branch by branch ([`tree`], [`topdown`]);
//! * **bottom-up**: anchor a rare entity as the ground truth and harden the
//!   question until the solver loses it ([`bottomup`]).
//!
//! Every stage runs against either live LLM/tool endpoints (feature `live`)
//! or a fully deterministic offline mock world ([`tools::mock`],
//! [`agent::mock`]), which is what the test suite and the browser demo use.

pub mod agent;
pub mod analytics;
pub mod bottomup;
pub mod clock;
pub mod distill;
pub mod equivalence;
pub mod filter;
pub mod model;
pub mod pipeline;
pub mod records;
pub mod seeding;
pub mod seeds;
pub mod tools;
pub mod topdown;
pub mod tree;
