//! Versioned, checksummed line-delimited store file.
//!
//! Line 1 is a header record; every following line is one example. The
//! header checksum is SHA-256 over the exact bytes after the header line.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReferenceExample, ReferenceStore, StoreProvenance, PARAPHRASE_COUNT};
use crate::corpus::EmotionLabel;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::hashing::digest;
use crate::scalar::Scalar;

pub const STORE_FORMAT: &str = "aerkit-reference-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    embedder: String,
    llm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    dimension: usize,
    count: usize,
    checksum: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    id: String,
    source: String,
    text: String,
    label: EmotionLabel,
    paraphrases: [String; PARAPHRASE_COUNT],
    embedding: Vec<f64>,
}

pub fn save_store<T: Scalar>(store: &ReferenceStore<T>, path: &Path) -> Result<()> {
    let mut body = Vec::new();
    for ex in store.examples() {
        let line = Line {
            id: ex.id.clone(),
            source: ex.source.clone(),
            text: ex.text.clone(),
            label: ex.label,
            paraphrases: ex.paraphrases.clone(),
            embedding: ex.embedding.as_slice().iter().map(|x| x.widen()).collect(),
        };
        serde_json::to_writer(&mut body, &line)?;
        body.push(b'\n');
    }
    let prov = store.provenance();
    let header = Header {
        format: STORE_FORMAT.to_string(),
        version: STORE_VERSION,
        embedder: prov.embedder.clone(),
        llm: prov.llm.clone(),
        config_hash: prov.config_hash.clone(),
        dimension: store.dimension(),
        count: store.len(),
        checksum: digest(&body),
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    serde_json::to_writer(&mut tmp, &header)?;
    tmp.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    tmp.write_all(&body).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_store<T: Scalar>(path: &Path) -> Result<ReferenceStore<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::StoreCorrupt("missing header line".into()))?;
    let (head, body) = (&bytes[..split], &bytes[split + 1..]);

    #[derive(Deserialize)]
    struct Version {
        format: String,
        version: u32,
    }
    let v: Version = serde_json::from_slice(head).map_err(|e| Error::StoreCorrupt(format!("header: {e}")))?;
    if v.format != STORE_FORMAT {
        return Err(Error::StoreCorrupt(format!("not a store file (format {:?})", v.format)));
    }
    if v.version != STORE_VERSION {
        return Err(Error::StoreVersion {
            found: v.version,
            expected: STORE_VERSION,
        });
    }
    let header: Header = serde_json::from_slice(head).map_err(|e| Error::StoreCorrupt(format!("header: {e}")))?;
    let actual = digest(body);
    if actual != header.checksum {
        return Err(Error::StoreChecksum(format!(
            "{}: header says {}, body hashes to {actual}",
            path.display(),
            header.checksum
        )));
    }

    let text = std::str::from_utf8(body).map_err(|e| Error::StoreCorrupt(e.to_string()))?;
    let mut examples = Vec::with_capacity(header.count);
    for (i, raw) in text.lines().enumerate() {
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::StoreCorrupt(format!("record {}: {e}", i + 1)))?;
        if line.embedding.len() != header.dimension {
            return Err(Error::DimensionMismatch {
                expected: header.dimension,
                got: line.embedding.len(),
            });
        }
        let embedding = Embedding::from_unit(line.embedding.iter().map(|&x| T::narrow(x)).collect())
            .map_err(|_| Error::StoreCorrupt(format!("record {}: embedding is not unit norm", i + 1)))?;
        examples.push(ReferenceExample {
            id: line.id,
            source: line.source,
            text: line.text,
            label: line.label,
            paraphrases: line.paraphrases,
            embedding,
        });
    }
    if examples.len() != header.count {
        return Err(Error::StoreCorrupt(format!(
            "header count {} but {} records",
            header.count,
            examples.len()
        )));
    }
    ReferenceStore::from_examples(
        examples,
        header.dimension,
        StoreProvenance {
            embedder: header.embedder,
            llm: header.llm,
            config_hash: header.config_hash,
        },
    )
}
