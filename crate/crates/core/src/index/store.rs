//! On-disk index layout: `meta.json` holds the header, titles and passage
//! records; `vectors.f32` holds the embeddings as little-endian f32, one row
//! per passage in record order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedding, Index, IndexEntry, IndexError};
use crate::corpus::Passage;

pub const META_FILE: &str = "meta.json";
pub const VECTORS_FILE: &str = "vectors.f32";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    provider: String,
    dim: usize,
    count: usize,
    titles: BTreeMap<String, String>,
    passages: Vec<Passage>,
}

impl Index {
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir)?;
        let meta = Meta {
            format_version: FORMAT_VERSION,
            provider: self.provider.clone(),
            dim: self.dim,
            count: self.entries.len(),
            titles: self.titles.clone(),
            passages: self.passages.clone(),
        };
        let json = serde_json::to_vec_pretty(&meta).map_err(std::io::Error::from)?;
        fs::write(dir.join(META_FILE), json)?;

        let mut out = BufWriter::new(fs::File::create(dir.join(VECTORS_FILE))?);
        for entry in &self.entries {
            for v in entry.embedding.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Index, IndexError> {
        let meta: Meta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)
            .map_err(|e| IndexError::Corrupt(format!("{META_FILE}: {e}")))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(IndexError::Corrupt(format!(
                "unsupported format version {}",
                meta.format_version
            )));
        }
        if meta.count != meta.passages.len() {
            return Err(IndexError::Corrupt(format!(
                "header count {} but {} passage records",
                meta.count,
                meta.passages.len()
            )));
        }
        let bytes = fs::read(dir.join(VECTORS_FILE))?;
        let expected = meta.count * meta.dim * 4;
        if bytes.len() != expected {
            return Err(IndexError::Corrupt(format!(
                "{VECTORS_FILE} has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        if meta.count == 0 {
            return Err(IndexError::EmptyIndex);
        }
        let entries = meta
            .passages
            .iter()
            .zip(bytes.chunks_exact(meta.dim * 4))
            .map(|(p, row)| IndexEntry {
                passage_id: p.passage_id.clone(),
                language: p.language,
                tags: p.tags.clone(),
                embedding: Embedding::from_unit_values(
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                        .collect(),
                ),
            })
            .collect();
        Index::from_parts(meta.provider, meta.dim, entries, meta.passages, meta.titles)
    }
}
