//! On-disk layout of a [`VectorIndex`] directory:
//!
//! * `manifest.json`: [`IndexManifest`], including the CRC32 of `entries.jsonl`
//! * `vectors.f32le`: `count × dim` little-endian `f32`, row-major, followed
//!   by a 4-byte little-endian CRC32 of everything before it
//! * `entries.jsonl`: one `{chunk_id, metadata}` object per row, in row order

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{EntryRecord, IndexManifest, StoreError, VectorIndex};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VECTORS_FILE: &str = "vectors.f32le";
pub const ENTRIES_FILE: &str = "entries.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl VectorIndex {
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let mut vec_bytes = Vec::with_capacity(self.vectors.len() * 4 + 4);
        for v in &self.vectors {
            vec_bytes.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&vec_bytes);
        vec_bytes.extend_from_slice(&crc.to_le_bytes());

        let mut entry_bytes = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut entry_bytes, r).map_err(|e| StoreError::Corrupt(e.to_string()))?;
            entry_bytes.push(b'\n');
        }

        let mut manifest = self.manifest();
        manifest.entries_crc32 = crc32fast::hash(&entry_bytes);
        let manifest_json =
            serde_json::to_vec_pretty(&manifest).map_err(|e| StoreError::Corrupt(e.to_string()))?;

        let vectors_path = dir.join(VECTORS_FILE);
        let entries_path = dir.join(ENTRIES_FILE);
        let manifest_path = dir.join(MANIFEST_FILE);
        fs::write(&vectors_path, vec_bytes).map_err(io_err(&vectors_path))?;
        fs::write(&entries_path, entry_bytes).map_err(io_err(&entries_path))?;
        fs::write(&manifest_path, manifest_json).map_err(io_err(&manifest_path))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_bytes = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: IndexManifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| StoreError::Corrupt(format!("{MANIFEST_FILE}: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(StoreError::Version {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vectors_path).map_err(io_err(&vectors_path))?;
        let expected_len = manifest
            .count
            .checked_mul(manifest.dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(4))
            .ok_or_else(|| StoreError::Corrupt("manifest size overflows".into()))?;
        if bytes.len() != expected_len {
            return Err(StoreError::Checksum {
                file: VECTORS_FILE.into(),
            });
        }
        let (body, footer) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(footer.try_into().expect("4-byte footer"));
        if crc32fast::hash(body) != stored_crc {
            return Err(StoreError::Checksum {
                file: VECTORS_FILE.into(),
            });
        }
        let vectors: Vec<f32> = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
            .collect();
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::Corrupt("non-finite vector component".into()));
        }

        let entries_path = dir.join(ENTRIES_FILE);
        let entry_bytes = fs::read(&entries_path).map_err(io_err(&entries_path))?;
        if crc32fast::hash(&entry_bytes) != manifest.entries_crc32 {
            return Err(StoreError::Checksum {
                file: ENTRIES_FILE.into(),
            });
        }
        let text = std::str::from_utf8(&entry_bytes)
            .map_err(|e| StoreError::Corrupt(format!("{ENTRIES_FILE}: {e}")))?;
        let records: Vec<EntryRecord> = text
            .lines()
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| StoreError::Corrupt(format!("{ENTRIES_FILE}:{}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        if records.len() != manifest.count {
            return Err(StoreError::Corrupt(format!(
                "manifest count {} but {} entries",
                manifest.count,
                records.len()
            )));
        }
        let ids: HashSet<String> = records.iter().map(|r| r.chunk_id.clone()).collect();
        if ids.len() != records.len() {
            return Err(StoreError::Corrupt("duplicate chunk ids".into()));
        }

        Ok(Self {
            dim: manifest.dim,
            metric: manifest.metric,
            embedder: manifest.embedder,
            corpus_dir: manifest.corpus_dir,
            records,
            vectors,
            ids,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector_store::Metric;

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let idx = VectorIndex::new(4, Metric::SquaredL2);
        idx.persist(dir.path()).unwrap();
        let back = VectorIndex::load(dir.path()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 4);
        assert_eq!(back.metric(), Metric::SquaredL2);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        VectorIndex::new(4, Metric::Cosine).persist(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("\"format_version\": 1", "\"format_version\": 9")).unwrap();
        assert!(matches!(
            VectorIndex::load(dir.path()),
            Err(StoreError::Version { found: 9, expected: 1 })
        ));
    }
}
