//! Synthetic documents with planted near-duplicate groups and their ground
//! truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{Document, FragmentJson};
use crate::groups::{plant_group, Filler, PlantConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Length of each generated document, in symbols.
    pub doc_sizes: Vec<usize>,
    /// Planted groups per 100,000 symbols.
    pub groups_per_100k: f64,
    pub group_size: (usize, usize),
    pub pattern_len: (usize, usize),
    pub k: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            doc_sizes: vec![100_000],
            groups_per_100k: 2.0,
            group_size: (2, 6),
            pattern_len: (100, 500),
            k: 0.8,
            seed: 0,
        }
    }
}

/// One planted group as recorded in the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedGroup {
    pub doc: String,
    pub label: String,
    pub k: f64,
    pub pattern: String,
    pub members: Vec<FragmentJson>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub truth: Vec<PlantedGroup>,
}

/// Generates the documents of `spec`. Density 0 gives plain filler.
pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::new();
    let mut truth = Vec::new();
    for (di, &size) in spec.doc_sizes.iter().enumerate() {
        let id = format!("synth-{:03}.txt", di);
        let groups = ((size as f64 / 100_000.0) * spec.groups_per_100k).round() as usize;
        let filler = Filler::new(rng.gen());
        let mut text = String::with_capacity(size + 1024);
        let mut len = 0usize;
        let mut planted: Vec<(usize, PlantedGroup)> = Vec::new();
        let block = size.checked_div(groups).unwrap_or(size);
        for _ in 0..groups {
            let p_len = rng.gen_range(spec.pattern_len.0..=spec.pattern_len.1);
            let m = rng.gen_range(spec.group_size.0..=spec.group_size.1).max(1);
            let pattern = filler.text(&mut rng, p_len);
            let cfg = PlantConfig {
                doc_id: id.clone(),
                doc_len: block,
                edits: None,
            };
            let (part, group) = plant_group(&cfg, &pattern, spec.k, m, rng.gen())?;
            let members = group.members.iter().map(|f| part.fragment_json(f)).collect();
            planted.push((
                len,
                PlantedGroup {
                    doc: id.clone(),
                    label: format!("{id}#{}", planted.len()),
                    k: spec.k,
                    pattern,
                    members,
                },
            ));
            text.push_str(&part.text());
            len += part.len();
        }
        if len < size {
            text.push_str(&filler.gap(&mut rng, size - len));
        }
        let doc = Document::from_text(id.as_str(), &text);
        for (offset, mut g) in planted {
            for m in &mut g.members {
                m.b += offset;
                m.e += offset;
            }
            truth.push(g);
        }
        documents.push(doc);
    }
    Ok(SynthCorpus { documents, truth })
}

impl SynthCorpus {
    /// Writes each document as a text file plus `ground_truth.json`;
    /// returns the document paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut paths = Vec::new();
        for doc in &self.documents {
            let path = dir.join(doc.id().as_str());
            fs::write(&path, doc.text()).map_err(|e| HarnessError::io(&path, e))?;
            paths.push(path);
        }
        let truth_path = dir.join("ground_truth.json");
        let json = serde_json::to_string_pretty(&self.truth)?;
        fs::write(&truth_path, json).map_err(|e| HarnessError::io(&truth_path, e))?;
        Ok(paths)
    }
}
