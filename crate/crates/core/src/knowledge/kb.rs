use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{embed_reference, KnowledgeChunk, KnowledgeStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read knowledge base {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KbStats {
    pub chunks_loaded: usize,
    pub diseases: usize,
    pub rejected_lines: usize,
}

pub fn load_kb(store: &mut KnowledgeStore, path: &Path) -> Result<KbStats, KbError> {
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_kb_str(store, &text)
}

/// Parses JSONL chunks and upserts them. Malformed or invalid lines are
/// counted and skipped; blank lines are ignored.
pub fn load_kb_str(store: &mut KnowledgeStore, text: &str) -> Result<KbStats, KbError> {
    let dimension = store.dimension();
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();

    let parse = |&(lineno, line): &(usize, &str)| -> Option<KnowledgeChunk> {
        let mut chunk: KnowledgeChunk = match serde_json::from_str(line) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("knowledge base line {lineno}: {e}");
                return None;
            }
        };
        if let Err(e) = chunk.validate() {
            log::warn!("knowledge base line {lineno}: {e}");
            return None;
        }
        if chunk.embedding.is_none() {
            match embed_reference(&chunk.text, dimension) {
                Ok(v) => chunk.embedding = Some(v),
                Err(e) => {
                    log::warn!("knowledge base line {lineno}: {e}");
                    return None;
                }
            }
        }
        Some(chunk)
    };

    #[cfg(feature = "parallel")]
    let parsed: Vec<Option<KnowledgeChunk>> = {
        use rayon::prelude::*;
        lines.par_iter().map(parse).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parsed: Vec<Option<KnowledgeChunk>> = lines.iter().map(parse).collect();

    let mut stats = KbStats::default();
    let mut diseases = BTreeSet::new();
    for chunk in parsed {
        let Some(chunk) = chunk else {
            stats.rejected_lines += 1;
            continue;
        };
        let disease = chunk.disease.clone();
        match store.upsert(chunk) {
            Ok(()) => {
                stats.chunks_loaded += 1;
                diseases.insert(disease);
            }
            Err(StoreError::Dimension { .. }) | Err(StoreError::InvalidChunk(_)) => {
                stats.rejected_lines += 1
            }
            Err(e) => return Err(e.into()),
        }
    }
    stats.diseases = diseases.len();
    Ok(stats)
}
