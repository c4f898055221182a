use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    embed_reference, ChunkKind, EmbedError, EmbeddingVector, KnowledgeChunk, MIN_DIMENSION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("dimension mismatch: store is {expected}, vector is {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid chunk: {0}")]
    InvalidChunk(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Optional restriction on search candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchFilter {
    pub kind: Option<ChunkKind>,
    pub disease: Option<String>,
}

impl SearchFilter {
    fn accepts(&self, chunk: &KnowledgeChunk) -> bool {
        self.kind.is_none_or(|k| k == chunk.kind)
            && self.disease.as_deref().is_none_or(|d| d == chunk.disease)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk: KnowledgeChunk,
    /// Cosine similarity in [-1, 1].
    pub score: f64,
}

/// Execution strategy for a scan. `Parallel` falls back to sequential when the
/// crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Exact linear-scan vector store. Every stored embedding is unit length and of
/// the store's dimension. Reads take `&self`, writes `&mut self`; wrap in a
/// lock for shared use.
#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    dimension: usize,
    chunks: Vec<KnowledgeChunk>,
    by_id: HashMap<String, usize>,
}

impl Default for KnowledgeStore {
    fn default() -> Self {
        Self::new(super::DEFAULT_DIMENSION).expect("default dimension is valid")
    }
}

impl KnowledgeStore {
    pub fn new(dimension: usize) -> Result<Self, StoreError> {
        if dimension < MIN_DIMENSION {
            return Err(EmbedError::DimensionTooSmall(dimension).into());
        }
        Ok(Self {
            dimension,
            chunks: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&KnowledgeChunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    /// Embeds the chunk when it carries no vector, then inserts it or replaces
    /// the chunk with the same id.
    pub fn upsert(&mut self, mut chunk: KnowledgeChunk) -> Result<(), StoreError> {
        chunk.validate()?;
        match &chunk.embedding {
            Some(e) if e.dimension() != self.dimension => {
                return Err(StoreError::Dimension {
                    expected: self.dimension,
                    actual: e.dimension(),
                });
            }
            Some(_) => {}
            None => chunk.embedding = Some(embed_reference(&chunk.text, self.dimension)?),
        }
        match self.by_id.get(&chunk.chunk_id) {
            Some(&i) => self.chunks[i] = chunk,
            None => {
                self.by_id.insert(chunk.chunk_id.clone(), self.chunks.len());
                self.chunks.push(chunk);
            }
        }
        Ok(())
    }

    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<&SearchFilter>,
    ) -> Result<Vec<SearchHit>, StoreError> {
        self.search_with(query, k, filter, Exec::default())
    }

    /// The `k` highest-cosine chunks, best first; ties go to the smaller chunk id.
    pub fn search_with(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<&SearchFilter>,
        exec: Exec,
    ) -> Result<Vec<SearchHit>, StoreError> {
        if k == 0 {
            return Err(StoreError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(StoreError::Dimension {
                expected: self.dimension,
                actual: query.dimension(),
            });
        }
        let score = |(i, chunk): (usize, &KnowledgeChunk)| -> Option<(f64, usize)> {
            if !filter.is_none_or(|f| f.accepts(chunk)) {
                return None;
            }
            let emb = chunk
                .embedding
                .as_ref()
                .expect("stored chunks are embedded");
            Some((emb.dot(query).clamp(-1.0, 1.0), i))
        };
        let mut scored: Vec<(f64, usize)> = match exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                self.chunks
                    .par_iter()
                    .enumerate()
                    .filter_map(score)
                    .collect()
            }
            _ => self.chunks.iter().enumerate().filter_map(score).collect(),
        };

        let rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            b.0.total_cmp(&a.0)
                .then_with(|| self.chunks[a.1].chunk_id.cmp(&self.chunks[b.1].chunk_id))
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank);
        Ok(scored
            .into_iter()
            .map(|(score, i)| SearchHit {
                chunk: self.chunks[i].clone(),
                score,
            })
            .collect())
    }
}
