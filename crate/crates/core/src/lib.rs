//! Hybrid conversational agent: a pipeline agent (NLU, dialog manager,
//! NLG) with LLM boosters at runtime and LLM-assisted authoring at design
//! time.

pub mod accelerator;
pub mod boosters;
pub mod dialog;
pub mod engine;
pub mod llm;
pub mod nlg;
pub mod nlu;
pub mod project;
pub mod sample;
pub mod template;
pub mod text;
