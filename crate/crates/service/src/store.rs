//! Content-addressed document store with a per-(document, min_tokens) heat
//! map cache.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use dupviper::clonemap::{build_heatmap, HeatmapJson};
use dupviper::corpus::{load_document, Document};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentInfo {
    pub doc_id: String,
    pub length: usize,
    pub token_count: usize,
}

pub fn content_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(16)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct DocumentStore {
    dir: PathBuf,
    docs: RwLock<HashMap<String, Arc<Document>>>,
    heat: Mutex<HashMap<(String, usize), Arc<HeatmapJson>>>,
}

impl DocumentStore {
    /// Opens the store in `dir`, loading every document saved there.
    pub fn open(dir: &Path) -> Result<Self, ApiError> {
        fs::create_dir_all(dir)?;
        let mut docs = HashMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if path.extension().and_then(|s| s.to_str()) != Some("txt") {
                continue;
            }
            let bytes = fs::read(&path)?;
            let doc = load_document(&bytes, id).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
            docs.insert(id.to_string(), Arc::new(doc));
        }
        Ok(DocumentStore {
            dir: dir.to_path_buf(),
            docs: RwLock::new(docs),
            heat: Mutex::new(HashMap::new()),
        })
    }

    /// Stores UTF-8 `bytes`; uploading the same content twice yields the
    /// same id.
    pub fn insert(&self, bytes: &[u8]) -> Result<DocumentInfo, ApiError> {
        let id = content_id(bytes);
        if let Some(doc) = self.get(&id) {
            return Ok(info(&doc));
        }
        let doc = load_document(bytes, id.as_str()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let path = self.dir.join(format!("{id}.txt"));
        fs::write(&path, bytes)?;
        let doc = Arc::new(doc);
        let out = info(&doc);
        self.docs.write().unwrap().insert(id, doc);
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Document>> {
        self.docs.read().unwrap().get(id).cloned()
    }

    pub fn require(&self, id: &str) -> Result<Arc<Document>, ApiError> {
        self.get(id).ok_or_else(|| ApiError::NotFound(format!("document {id}")))
    }

    pub fn heatmap(&self, id: &str, min_tokens: usize) -> Result<Arc<HeatmapJson>, ApiError> {
        let key = (id.to_string(), min_tokens);
        if let Some(h) = self.heat.lock().unwrap().get(&key) {
            return Ok(h.clone());
        }
        let doc = self.require(id)?;
        let json = Arc::new(build_heatmap(&doc, min_tokens).to_json(&doc, min_tokens));
        self.heat.lock().unwrap().insert(key, json.clone());
        Ok(json)
    }
}

pub fn info(doc: &Document) -> DocumentInfo {
    DocumentInfo {
        doc_id: doc.id().to_string(),
        length: doc.len(),
        token_count: doc.tokens().len(),
    }
}
