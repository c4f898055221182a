//! Medical consultation orchestration engine.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`consult`] drives the multi-round symptom inquiry as a state machine.
//! * [`knowledge`] embeds and stores medical knowledge fragments and answers
//!   exact top-k cosine queries.
//! * [`rag`] turns dialogue state into a retrieval query, assembles context and
//!   talks to a pluggable generation backend.
//! * [`safety`] screens input, detects emergencies, rewrites absolute wording and
//!   appends disclaimers.
//! * [`format`] segments model output into sections, tags highlight keywords and
//!   renders JSON, HTML or ANSI.
//! * [`engine`] ties the stages together per turn, with session persistence.

pub mod consult;
pub mod engine;
pub mod format;
pub mod knowledge;
pub mod lexmatch;
pub mod locale;
pub mod rag;
pub mod safety;

pub use locale::Locale;

/// Shipped sample fixtures, embedded so the engine runs without any files on disk.
pub mod fixtures {
    pub const SLOT_LEXICON: &str = include_str!("../data/slot_lexicon.json");
    pub const QUESTION_TEMPLATES: &str = include_str!("../data/question_templates.json");
    pub const SAFETY_LEXICON: &str = include_str!("../data/safety_lexicon.json");
    pub const HIGHLIGHT_LEXICON: &str = include_str!("../data/highlight_lexicon.json");
    pub const EMERGENCY_DIRECTORY: &str = include_str!("../data/emergency_directory.csv");
    pub const KNOWLEDGE_BASE: &str = include_str!("../data/knowledge_base.jsonl");
}
