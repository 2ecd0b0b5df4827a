//! Synthetic documents with known near-duplicate groups.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GroupError, NearDuplicateGroup};
use crate::corpus::{Document, TextFragment};
use crate::distance::lcs_length;
use crate::search::{validate_k, window_len};

const EPS: f64 = 1e-9;
const VOCABULARY_SIZE: usize = 3000;
const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

/// Random pseudo-words separated by spaces and occasional punctuation.
///
/// Unrelated stretches of this text share roughly a third of their symbols
/// as a common subsequence, far from any similarity above 0.6.
#[derive(Debug, Clone)]
pub struct Filler {
    words: Vec<String>,
}

impl Filler {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f111);
        let words = (0..VOCABULARY_SIZE)
            .map(|_| {
                let len = rng.gen_range(2..=9);
                (0..len)
                    .map(|_| LETTERS[rng.gen_range(0..LETTERS.len())] as char)
                    .collect()
            })
            .collect();
        Filler { words }
    }

    /// Exactly `len` symbols of filler text.
    pub fn text<R: Rng>(&self, rng: &mut R, len: usize) -> String {
        let mut out = String::with_capacity(len + 16);
        let mut count = 0;
        while count < len {
            let w = self.words.choose(rng).unwrap();
            out.push_str(w);
            count += w.len();
            let sep = match rng.gen_range(0..20) {
                0 => ", ",
                1 => ". ",
                _ => " ",
            };
            out.push_str(sep);
            count += sep.len();
        }
        out.truncate(len);
        out
    }

    /// `len` symbols that start and end with a space, so neighbouring text
    /// never fuses with it into one token.
    pub fn gap<R: Rng>(&self, rng: &mut R, len: usize) -> String {
        if len < 2 {
            return " ".repeat(len);
        }
        format!(" {} ", self.text(rng, len - 2))
    }

    pub fn random_letter<R: Rng>(rng: &mut R) -> char {
        LETTERS[rng.gen_range(0..LETTERS.len())] as char
    }
}

/// How variants of the pattern are planted.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub doc_id: String,
    /// Minimum total document length in symbols; filler is added to reach it.
    pub doc_len: usize,
    /// Insertions plus deletions per variant. `None` draws a random count up
    /// to the largest one the similarity allows.
    pub edits: Option<usize>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            doc_id: "planted".into(),
            doc_len: 0,
            edits: None,
        }
    }
}

/// Largest number of deletions `x` plus insertions `y` for which deleting
/// `x` and inserting `y` symbols keeps a pattern of `p_len` symbols within
/// similarity `k`: the surviving `p_len - x` symbols must cover `k` times
/// both the pattern and the variant.
pub fn max_insertions(p_len: usize, k: f64, deletions: usize) -> Option<usize> {
    let kept = p_len.checked_sub(deletions)? as f64;
    if kept + EPS < k * p_len as f64 {
        return None;
    }
    Some((kept * (1.0 - k) / k + EPS).floor() as usize)
}

pub fn max_edits(p_len: usize, k: f64) -> usize {
    (0..=p_len)
        .filter_map(|x| max_insertions(p_len, k, x).map(|y| x + y))
        .max()
        .unwrap_or(0)
}

fn feasible_splits(p_len: usize, k: f64, edits: usize) -> Vec<(usize, usize)> {
    (0..=edits.min(p_len))
        .filter(|&x| max_insertions(p_len, k, x).is_some_and(|y| edits - x <= y))
        .map(|x| (x, edits - x))
        .collect()
}

/// Deletes `x` random symbols, then inserts `y` random letters.
fn make_variant<R: Rng>(rng: &mut R, pattern: &[char], x: usize, y: usize) -> Vec<char> {
    let mut v = pattern.to_vec();
    for _ in 0..x {
        let i = rng.gen_range(0..v.len());
        v.remove(i);
    }
    for _ in 0..y {
        let i = rng.gen_range(0..=v.len());
        v.insert(i, Filler::random_letter(rng));
    }
    v
}

/// A variant of the pattern with exactly `edits` insertions plus deletions
/// that is verified to stay within similarity `k`.
pub fn make_near_duplicate<R: Rng>(
    rng: &mut R,
    pattern: &[char],
    k: f64,
    edits: usize,
) -> Result<Vec<char>, GroupError> {
    let splits = feasible_splits(pattern.len(), k, edits);
    let &(x, y) = splits.choose(rng).ok_or(GroupError::Infeasible {
        edits,
        pattern_len: pattern.len(),
        k,
    })?;
    let v = make_variant(rng, pattern, x, y);
    let need = k * pattern.len().max(v.len()) as f64;
    let lcs = lcs_length(&v, pattern);
    assert!(lcs as f64 + EPS >= need, "variant lost similarity: lcs {lcs} < {need}");
    Ok(v)
}

/// Builds a document of filler text holding `m` near duplicates of
/// `pattern` at similarity `k`, each separated from the next by at least
/// `ceil(|p| / k)` symbols, and returns it with the ground-truth group.
pub fn plant_group(
    config: &PlantConfig,
    pattern: &str,
    k: f64,
    m: usize,
    seed: u64,
) -> Result<(Document, NearDuplicateGroup), GroupError> {
    validate_k(k).map_err(|_| GroupError::InvalidK(k))?;
    let p: Vec<char> = pattern.chars().collect();
    if m == 0 || p.is_empty() {
        return Err(GroupError::TooFewMembers(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = Filler::new(seed);
    let mut variants = Vec::with_capacity(m);
    for _ in 0..m {
        let edits = match config.edits {
            Some(n) => n,
            None => rng.gen_range(0..=max_edits(p.len(), k)),
        };
        variants.push(make_near_duplicate(&mut rng, &p, k, edits)?);
    }

    let min_gap = window_len(p.len(), k).max(2);
    let planted: usize = variants.iter().map(Vec::len).sum();
    let mut gaps = vec![min_gap; m + 1];
    let base = planted + min_gap * (m + 1);
    if config.doc_len > base {
        let extra = config.doc_len - base;
        // spread the remainder randomly over the gaps
        let mut cuts: Vec<usize> = (0..m).map(|_| rng.gen_range(0..=extra)).collect();
        cuts.push(extra);
        cuts.sort_unstable();
        let mut last = 0;
        for (g, c) in gaps.iter_mut().zip(cuts) {
            *g += c - last;
            last = c;
        }
    }

    let mut text = String::new();
    let mut spans = Vec::with_capacity(m);
    let mut pos = 0;
    for (i, gap) in gaps.iter().enumerate() {
        text.push_str(&filler.gap(&mut rng, *gap));
        pos += gap;
        if let Some(v) = variants.get(i) {
            text.extend(v.iter());
            spans.push((pos, pos + v.len() - 1));
            pos += v.len();
        }
    }
    let doc = Document::from_text(config.doc_id.as_str(), &text);
    let members = spans
        .into_iter()
        .map(|(b, e)| TextFragment {
            doc: doc.id().clone(),
            b,
            e,
        })
        .collect();
    let group = NearDuplicateGroup {
        label: format!("planted-{seed}"),
        k,
        members,
        archetype: None,
    };
    Ok((doc, group))
}
