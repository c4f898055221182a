//! Medical knowledge store: chunk ingestion, reference embedding and exact
//! top-k cosine retrieval.

mod embed;
mod kb;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use embed::{
    cosine, dot, embed_reference, fnv1a64, tokenize, EmbedError, EmbeddingVector,
    DEFAULT_DIMENSION, MIN_DIMENSION,
};
pub use kb::{load_kb, load_kb_str, KbError, KbStats};
pub use store::{Exec, KnowledgeStore, SearchFilter, SearchHit, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkKind {
    DiseaseDescription,
    MedicationGuideline,
    ExaminationRecommendation,
    GraphTriple,
}

impl fmt::Display for ChunkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChunkKind::DiseaseDescription => "disease_description",
            ChunkKind::MedicationGuideline => "medication_guideline",
            ChunkKind::ExaminationRecommendation => "examination_recommendation",
            ChunkKind::GraphTriple => "graph_triple",
        })
    }
}

/// One retrievable knowledge fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub chunk_id: String,
    pub disease: String,
    pub kind: ChunkKind,
    pub text: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
}

impl KnowledgeChunk {
    pub fn new(
        chunk_id: impl Into<String>,
        disease: impl Into<String>,
        kind: ChunkKind,
        text: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        Self {
            chunk_id: chunk_id.into(),
            disease: disease.into(),
            kind,
            text: text.into(),
            source: source.into(),
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: EmbeddingVector) -> Self {
        self.embedding = Some(embedding);
        self
    }

    /// Checks the text-level invariants (ids and text non-empty, triples well formed).
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.chunk_id.trim().is_empty() {
            return Err(StoreError::InvalidChunk("empty chunk_id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(StoreError::InvalidChunk(format!(
                "chunk {} has empty text",
                self.chunk_id
            )));
        }
        if self.kind == ChunkKind::GraphTriple {
            let parts: Vec<&str> = self.text.split('|').map(str::trim).collect();
            if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
                return Err(StoreError::InvalidChunk(format!(
                    "graph triple {} must read `subject | relation | object`",
                    self.chunk_id
                )));
            }
        }
        Ok(())
    }
}
