//! Near-duplicate groups, their verification and the completeness check
//! used to judge search results.
//!
//! Two strings are near duplicates at similarity `k` when ordered common
//! substrings (the archetype) cover at least `k` of each. Any common
//! subsequence splits into single-symbol substrings, and any archetype
//! concatenates into a common subsequence, so the best achievable coverage
//! of a pair is exactly their LCS length.

mod multi_lcs;
mod plant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Document, FragmentJson, TextFragment};
use crate::distance::{d, lcs_length};
use crate::search::validate_k;

pub use multi_lcs::multi_lcs_length;
pub use plant::{make_near_duplicate, max_edits, max_insertions, plant_group, Filler, PlantConfig};

const EPS: f64 = 1e-9;

/// Multi-way LCS tables larger than this fall back to pairwise checks.
pub const MULTI_LCS_CELL_BUDGET: u128 = 200_000_000;

/// Groups with more members are only checked pairwise.
pub const MULTI_LCS_MAX_MEMBERS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("similarity k = {0} is outside (1/sqrt(3), 1]")]
    InvalidK(f64),
    #[error("a group needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error("{edits} edits cannot keep a {pattern_len}-symbol pattern at similarity {k}")]
    Infeasible { edits: usize, pattern_len: usize, k: f64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearDuplicateGroup {
    pub label: String,
    pub k: f64,
    /// Members in document order.
    pub members: Vec<TextFragment>,
    /// Ordered common substrings, when known.
    pub archetype: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verification {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "pairwise-verified")]
    PairwiseVerified,
}

/// The first condition a group fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Member `index` does not strictly follow member `index - 1`.
    Order { index: usize },
    /// The lengths of two members differ by more than a factor `1/k`.
    LengthRatio { first: usize, second: usize },
    /// Archetype block `block` is not found, in order, in member `member`.
    MissingBlock { member: usize, block: usize },
    /// Common material covers less than `k` of member `member`.
    Coverage {
        member: usize,
        coverage: usize,
        required: f64,
    },
    /// Members `first` and `second` are not near duplicates of each other.
    Pair { first: usize, second: usize },
}

impl Violation {
    pub fn member(&self) -> usize {
        match *self {
            Violation::Order { index } => index,
            Violation::LengthRatio { second, .. } | Violation::Pair { second, .. } => second,
            Violation::MissingBlock { member, .. } | Violation::Coverage { member, .. } => member,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub verification: Verification,
    /// Length of the common material used, when it was computed.
    pub coverage: Option<usize>,
    pub violation: Option<Violation>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// True iff `p` and `g` form a near-duplicate group at similarity `k`.
pub fn is_near_duplicate(p: &[char], g: &[char], k: f64) -> Result<bool, GroupError> {
    validate_k(k).map_err(|_| GroupError::InvalidK(k))?;
    Ok(covers(lcs_length(p, g), g.len().max(p.len()), k))
}

fn covers(common: usize, len: usize, k: f64) -> bool {
    common as f64 + EPS >= k * len as f64
}

/// Whether `d(g, p) <= (1 - k^2) |p|`. Not implied by the group definition
/// for every `k`; used to probe that bound.
pub fn within_distance_bound(p: &[char], g: &[char], k: f64) -> bool {
    d(p, g) as f64 <= (1.0 - k * k) * p.len() as f64 + EPS
}

/// Greedy in-order placement of archetype blocks; `Err(block)` names the
/// first block that does not fit.
fn place_blocks(member: &[char], blocks: &[Vec<char>]) -> Result<(), usize> {
    let mut from = 0;
    for (i, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            continue;
        }
        let found = member
            .get(from..)
            .and_then(|rest| rest.windows(block.len()).position(|w| w == block.as_slice()));
        match found {
            Some(at) => from += at + block.len(),
            None => return Err(i),
        }
    }
    Ok(())
}

/// Checks ordering, the pairwise length ratio, and coverage, in that order.
pub fn validate_group(doc: &Document, group: &NearDuplicateGroup) -> Result<Validation, GroupError> {
    let k = group.k;
    validate_k(k).map_err(|_| GroupError::InvalidK(k))?;
    let n = group.members.len();
    if n < 2 {
        return Err(GroupError::TooFewMembers(n));
    }
    let texts: Vec<&[char]> = group
        .members
        .iter()
        .map(|m| doc.fragment(m.b, m.e).map(|f| doc.slice(&f)))
        .collect::<Result<_, _>>()?;
    let fail = |verification, violation| Validation {
        verification,
        coverage: None,
        violation: Some(violation),
    };

    for i in 1..n {
        if !group.members[i - 1].before(&group.members[i])? {
            return Ok(fail(Verification::Full, Violation::Order { index: i }));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (texts[i].len() as f64, texts[j].len() as f64);
            if a + EPS < k * b || b + EPS < k * a {
                return Ok(fail(Verification::Full, Violation::LengthRatio { first: i, second: j }));
            }
        }
    }

    if let Some(archetype) = &group.archetype {
        let blocks: Vec<Vec<char>> = archetype.iter().map(|s| s.chars().collect()).collect();
        let coverage: usize = blocks.iter().map(Vec::len).sum();
        for (j, t) in texts.iter().enumerate() {
            if let Err(block) = place_blocks(t, &blocks) {
                return Ok(fail(Verification::Full, Violation::MissingBlock { member: j, block }));
            }
        }
        return Ok(coverage_verdict(&texts, coverage, k, Verification::Full));
    }

    if n <= MULTI_LCS_MAX_MEMBERS {
        if let Some(coverage) = multi_lcs_length(&texts, MULTI_LCS_CELL_BUDGET) {
            return Ok(coverage_verdict(&texts, coverage, k, Verification::Full));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if !covers(lcs_length(texts[i], texts[j]), texts[i].len().max(texts[j].len()), k) {
                return Ok(fail(
                    Verification::PairwiseVerified,
                    Violation::Pair { first: i, second: j },
                ));
            }
        }
    }
    Ok(Validation {
        verification: Verification::PairwiseVerified,
        coverage: None,
        violation: None,
    })
}

fn coverage_verdict(texts: &[&[char]], coverage: usize, k: f64, verification: Verification) -> Validation {
    let violation = texts
        .iter()
        .position(|t| !covers(coverage, t.len(), k))
        .map(|member| Violation::Coverage {
            member,
            coverage,
            required: k * texts[member].len() as f64,
        });
    Validation {
        verification,
        coverage: Some(coverage),
        violation,
    }
}

/// Minimal overlap a result must have with every near duplicate:
/// `(|p| / 2) (3k - 1/k)`.
pub fn o_min(p_len: usize, k: f64) -> f64 {
    p_len as f64 / 2.0 * (3.0 * k - 1.0 / k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberVerdict {
    pub member: TextFragment,
    /// Largest overlap with any result, in symbols.
    pub best: usize,
    pub best_match: Option<TextFragment>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub o_min: f64,
    pub members: Vec<MemberVerdict>,
}

impl CompletenessReport {
    pub fn satisfied(&self) -> bool {
        self.members.iter().all(|m| m.satisfied)
    }

    pub fn violations(&self) -> usize {
        self.members.iter().filter(|m| !m.satisfied).count()
    }
}

/// Does every member overlap some result by at least [`o_min`] symbols?
/// Vacuous when `o_min <= 0`.
pub fn check_completeness(
    members: &[TextFragment],
    results: &[TextFragment],
    p_len: usize,
    k: f64,
) -> CompletenessReport {
    let need = o_min(p_len, k);
    let members = members
        .iter()
        .map(|g| {
            let best = results
                .iter()
                .map(|w| (g.intersection_length(w), w))
                .max_by_key(|&(n, w)| (n, std::cmp::Reverse(w.b)));
            let (best, best_match) = match best {
                Some((n, w)) if n > 0 => (n, Some(w.clone())),
                _ => (0, None),
            };
            MemberVerdict {
                member: g.clone(),
                best,
                best_match,
                satisfied: need <= EPS || best as f64 + EPS >= need,
            }
        })
        .collect();
    CompletenessReport { o_min: need, members }
}

/// Wire form of a saved group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupJson {
    pub label: String,
    pub k: f64,
    pub members: Vec<FragmentJson>,
    pub archetype: Option<Vec<String>>,
    pub verification: Verification,
}

impl NearDuplicateGroup {
    pub fn to_json(&self, doc: &Document, verification: Verification) -> GroupJson {
        GroupJson {
            label: self.label.clone(),
            k: self.k,
            members: self.members.iter().map(|m| doc.fragment_json(m)).collect(),
            archetype: self.archetype.clone(),
            verification,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::K_MIN;

    fn v(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn group(doc: &Document, spans: &[(usize, usize)], k: f64, archetype: Option<&[&str]>) -> NearDuplicateGroup {
        NearDuplicateGroup {
            label: "g".into(),
            k,
            members: spans.iter().map(|&(b, e)| doc.fragment(b, e).unwrap()).collect(),
            archetype: archetype.map(|a| a.iter().map(|s| s.to_string()).collect()),
        }
    }

    #[test]
    fn near_duplicate_examples() {
        let p = v("abcdefghij");
        assert!(is_near_duplicate(&p, &p, 1.0).unwrap());
        assert!(is_near_duplicate(&p, &v("abcdeXghij"), 0.9).unwrap());
        assert!(!is_near_duplicate(&p, &v("abcdeXghij"), 0.91).unwrap());
        assert!(!is_near_duplicate(&p, &v("zzzzzzzzzz"), 0.8).unwrap());
        assert_eq!(is_near_duplicate(&p, &p, 0.3), Err(GroupError::InvalidK(0.3)));
    }

    #[test]
    fn o_min_values() {
        assert!(o_min(100, K_MIN).abs() < 1e-9);
        assert!((o_min(100, 1.0) - 100.0).abs() < 1e-12);
        assert!((o_min(100, 0.8) - 57.5).abs() < 1e-9);
        for k in [0.77, 0.8, 0.9, 1.0] {
            assert!(o_min(100, k) > 50.0);
        }
    }

    #[test]
    fn identical_members_in_order() {
        let doc = Document::from_text("d", "same text | same text");
        let g = group(&doc, &[(0, 8), (12, 20)], 1.0, None);
        let r = validate_group(&doc, &g).unwrap();
        assert!(r.is_valid());
        assert_eq!((r.verification, r.coverage), (Verification::Full, Some(9)));
    }

    #[test]
    fn out_of_order_members() {
        let doc = Document::from_text("d", "same text | same text");
        let g = group(&doc, &[(12, 20), (0, 8)], 1.0, None);
        let r = validate_group(&doc, &g).unwrap();
        assert_eq!(r.violation, Some(Violation::Order { index: 1 }));
        let overlapping = group(&doc, &[(0, 8), (5, 13)], 0.6, None);
        assert_eq!(
            validate_group(&doc, &overlapping).unwrap().violation,
            Some(Violation::Order { index: 1 })
        );
    }

    #[test]
    fn three_way_coverage_at_threshold() {
        // common "abcd"-core: multi-LCS of the three is 8 out of 10 symbols
        let doc = Document::from_text("d", "ababXcdcdY ababYcdcdZ ababZcdcdX");
        let spans = [(0, 9), (11, 20), (22, 31)];
        let texts: Vec<Vec<char>> = spans.iter().map(|&(b, e)| doc.symbols()[b..=e].to_vec()).collect();
        let refs: Vec<&[char]> = texts.iter().map(|t| t.as_slice()).collect();
        assert_eq!(multi_lcs_length(&refs, u128::MAX), Some(8));
        assert!(validate_group(&doc, &group(&doc, &spans, 0.8, None))
            .unwrap()
            .is_valid());
        let r = validate_group(&doc, &group(&doc, &spans, 0.81, None)).unwrap();
        assert!(matches!(r.violation, Some(Violation::Coverage { coverage: 8, .. })));
    }

    #[test]
    fn archetype_blocks() {
        let doc = Document::from_text("d", "ababXcdcdY ababYcdcdZ");
        let spans = [(0, 9), (11, 20)];
        let ok = group(&doc, &spans, 0.8, Some(&["abab", "cdcd"]));
        assert!(validate_group(&doc, &ok).unwrap().is_valid());
        let short = group(&doc, &spans, 0.9, Some(&["abab", "cdcd"]));
        assert!(matches!(
            validate_group(&doc, &short).unwrap().violation,
            Some(Violation::Coverage { .. })
        ));
        let swapped = group(&doc, &spans, 0.8, Some(&["cdcd", "abab"]));
        assert_eq!(
            validate_group(&doc, &swapped).unwrap().violation,
            Some(Violation::MissingBlock { member: 0, block: 1 })
        );
    }

    #[test]
    fn length_ratio_is_checked_first() {
        let doc = Document::from_text("d", "abcdefghij abcde");
        let g = group(&doc, &[(0, 9), (11, 15)], 0.6, None);
        assert_eq!(
            validate_group(&doc, &g).unwrap().violation,
            Some(Violation::LengthRatio { first: 0, second: 1 })
        );
    }

    #[test]
    fn large_groups_are_pairwise_verified() {
        let text = (0..6)
            .map(|i| format!("shared words {i}"))
            .collect::<Vec<_>>()
            .join(" / ");
        let doc = Document::from_text("d", &text);
        let spans: Vec<(usize, usize)> = (0..6).map(|i| (i * 17, i * 17 + 13)).collect();
        let r = validate_group(&doc, &group(&doc, &spans, 0.9, None)).unwrap();
        assert!(r.is_valid());
        assert_eq!(r.verification, Verification::PairwiseVerified);
        let r = validate_group(&doc, &group(&doc, &spans, 0.95, None)).unwrap();
        assert_eq!(r.violation, Some(Violation::Pair { first: 0, second: 1 }));
        assert_eq!(r.violation.unwrap().member(), 1);
    }

    #[test]
    fn too_few_members() {
        let doc = Document::from_text("d", "abc");
        assert_eq!(
            validate_group(&doc, &group(&doc, &[(0, 2)], 0.8, None)),
            Err(GroupError::TooFewMembers(1))
        );
    }

    #[test]
    fn completeness_examples() {
        let doc = Document::from_text("d", &"x".repeat(400));
        let f = |b, e| doc.fragment(b, e).unwrap();
        let members = [f(100, 199)];
        let r = check_completeness(&members, &[f(150, 249)], 100, 0.8);
        assert_eq!(r.members[0].best, 50);
        assert!(!r.satisfied());
        assert!(check_completeness(&members, &[f(100, 199)], 100, 0.8).satisfied());
        assert!(!check_completeness(&members, &[], 100, 0.8).satisfied());
        assert!(check_completeness(&members, &[], 100, K_MIN).satisfied());
        let r = check_completeness(&members, &[f(0, 120), f(140, 300)], 100, 0.8);
        assert_eq!(r.members[0].best, 60);
        assert_eq!(r.members[0].best_match, Some(f(140, 300)));
        assert_eq!(r.violations(), 0);
    }

    #[test]
    fn group_json_shape() {
        let doc = Document::from_text("d", "same text | same text");
        let g = group(&doc, &[(0, 8), (12, 20)], 1.0, None);
        let v = serde_json::to_value(g.to_json(&doc, Verification::PairwiseVerified)).unwrap();
        assert_eq!(v["verification"], "pairwise-verified");
        assert!(v["archetype"].is_null());
        assert_eq!(v["members"][1]["text"], "same text");
        assert_eq!(v["members"][1]["b"], 12);
    }
}
