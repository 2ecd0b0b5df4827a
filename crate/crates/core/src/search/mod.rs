//! Pattern-based near-duplicate search.
//!
//! A search runs in three phases: a sliding-window scan keeps every window
//! within the distance threshold of the pattern, each survivor is shrunk to
//! its best sub-fragment, and the shrunk fragments are filtered into a set
//! where no element repeats or contains another.

mod filter;
mod params;
mod scan;
mod shrink;

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Document, TextFragment};
use crate::distance::DistanceCache;

pub use filter::{assert_antichain, cluster_representatives, phase3_filter, unique_maximal};
pub use params::{k_di, k_di_strict, shrink_lengths, validate_k, window_len, Optimizations, SearchParams, K_MIN};
pub use scan::{phase1_scan, phase1_skip};
pub use shrink::{compare, phase2_shrink};

/// Warning attached to the empty result of a pattern longer than the document.
pub const OVERSIZED_PATTERN_WARNING: &str = "pattern is longer than the document";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Scan,
    Shrink,
    Filter,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Scan => "scan",
            Phase::Shrink => "shrink",
            Phase::Filter => "filter",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("similarity k = {0} is outside (1/sqrt(3), 1]")]
    InvalidK(f64),
    #[error("pattern is empty")]
    EmptyPattern,
    #[error("parameters were built for a pattern of {expected} symbols, got {actual}")]
    PatternLengthMismatch { expected: usize, actual: usize },
    #[error("pattern bounds: {0}")]
    PatternOutOfBounds(#[from] CorpusError),
    #[error("search cancelled during {phase} with {partial} partial results")]
    Cancelled { phase: Phase, partial: usize },
    #[error("search timed out during {phase} with {partial} partial results")]
    TimedOut { phase: Phase, partial: usize },
}

impl SearchError {
    /// Records how many results the interrupted phase had produced.
    pub fn with_partial(self, count: usize) -> Self {
        match self {
            SearchError::Cancelled { phase, .. } => SearchError::Cancelled { phase, partial: count },
            SearchError::TimedOut { phase, .. } => SearchError::TimedOut { phase, partial: count },
            other => other,
        }
    }

    pub fn is_interrupt(&self) -> bool {
        matches!(self, SearchError::Cancelled { .. } | SearchError::TimedOut { .. })
    }
}

/// Cancellation flag and optional deadline, shared by clones.
#[derive(Debug, Clone, Default)]
pub struct Control {
    cancelled: Arc<AtomicBool>,
    deadline: Option<Instant>,
}

impl Control {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_timeout(mut self, budget: Duration) -> Self {
        self.deadline = Some(Instant::now() + budget);
        self
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }

    pub fn check(&self, phase: Phase) -> Result<(), SearchError> {
        if self.is_cancelled() {
            return Err(SearchError::Cancelled { phase, partial: 0 });
        }
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(SearchError::TimedOut { phase, partial: 0 }),
            _ => Ok(()),
        }
    }
}

/// Work counters of one search.
#[derive(Debug, Default)]
pub struct SearchStats {
    /// Scan windows whose distance was evaluated.
    pub windows: AtomicU64,
    /// Prefix-LCS rows computed while shrinking.
    pub rows: AtomicU64,
    /// Shrink candidates examined.
    pub candidates: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub windows: u64,
    pub rows: u64,
    pub candidates: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

/// Everything a search shares with its caller: the distance cache (may be
/// reused across searches), the cancellation control and work counters.
#[derive(Debug)]
pub struct SearchContext {
    pub cache: Arc<DistanceCache>,
    pub control: Control,
    pub stats: SearchStats,
}

impl Default for SearchContext {
    fn default() -> Self {
        SearchContext::new(Arc::new(DistanceCache::default()), Control::default())
    }
}

impl SearchContext {
    pub fn new(cache: Arc<DistanceCache>, control: Control) -> Self {
        SearchContext {
            cache,
            control,
            stats: SearchStats::default(),
        }
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            windows: self.stats.windows.load(Ordering::Relaxed),
            rows: self.stats.rows.load(Ordering::Relaxed),
            candidates: self.stats.candidates.load(Ordering::Relaxed),
            cache_hits: self.cache.hits(),
            cache_misses: self.cache.misses(),
        }
    }
}

/// A fragment together with its distance to the pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scored {
    pub fragment: TextFragment,
    pub distance: usize,
}

impl Scored {
    pub fn new(doc: &Document, b: usize, e: usize, distance: usize) -> Self {
        Scored {
            fragment: TextFragment {
                doc: doc.id().clone(),
                b,
                e,
            },
            distance,
        }
    }
}

/// The searched pattern: its symbols and, when taken from the document,
/// where it lives.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    symbols: Vec<char>,
    fragment: Option<TextFragment>,
}

impl Pattern {
    pub fn from_text(text: &str) -> Self {
        Pattern {
            symbols: text.chars().collect(),
            fragment: None,
        }
    }

    /// The pattern `[b, e]` of `doc` (inclusive bounds).
    pub fn from_interval(doc: &Document, b: usize, e: usize) -> Result<Self, SearchError> {
        let fragment = doc.fragment(b, e)?;
        Ok(Pattern {
            symbols: doc.slice(&fragment).to_vec(),
            fragment: Some(fragment),
        })
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn text(&self) -> String {
        self.symbols.iter().collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn fragment(&self) -> Option<&TextFragment> {
        self.fragment.as_ref()
    }
}

/// Wall-clock time of each phase in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub phase1: f64,
    pub phase2: f64,
    pub phase3: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.phase1 + self.phase2 + self.phase3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub pattern: Pattern,
    pub params: SearchParams,
    pub w1: Vec<Scored>,
    pub w2: Vec<Scored>,
    /// The final result.
    pub w3: Vec<Scored>,
    pub timings: Timings,
    pub stats: StatsSnapshot,
    pub warning: Option<String>,
}

/// One element of the JSON export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementJson {
    pub b: usize,
    pub e: usize,
    pub text: String,
    pub distance: usize,
}

/// JSON export of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub pattern: String,
    pub k: f64,
    pub k_di: f64,
    pub elements: Vec<ElementJson>,
    pub timings_ms: Timings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl ResultJson {
    /// Same export with zeroed timings, for comparing runs.
    pub fn without_timings(mut self) -> Self {
        self.timings_ms = Timings::default();
        self
    }

    /// Pretty-printed form with a trailing newline, as written by every
    /// front end.
    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result JSON is always serializable");
        s.push('\n');
        s
    }
}

impl ResultSet {
    pub fn elements(&self) -> &[Scored] {
        &self.w3
    }

    pub fn k_di(&self) -> f64 {
        self.params.k_di()
    }

    pub fn fragments(&self) -> Vec<TextFragment> {
        self.w3.iter().map(|s| s.fragment.clone()).collect()
    }

    pub fn to_json(&self, doc: &Document) -> ResultJson {
        ResultJson {
            pattern: self.pattern.text(),
            k: self.params.k,
            k_di: self.k_di(),
            elements: self
                .w3
                .iter()
                .map(|s| ElementJson {
                    b: s.fragment.b,
                    e: s.fragment.e,
                    text: doc.str_of(&s.fragment),
                    distance: s.distance,
                })
                .collect(),
            timings_ms: self.timings,
            warning: self.warning.clone(),
        }
    }
}

/// Runs all three phases with a fresh context.
pub fn search(doc: &Document, pattern: &Pattern, params: &SearchParams) -> Result<ResultSet, SearchError> {
    search_with(doc, pattern, params, &SearchContext::default())
}

pub fn search_with(
    doc: &Document,
    pattern: &Pattern,
    params: &SearchParams,
    ctx: &SearchContext,
) -> Result<ResultSet, SearchError> {
    params.validate()?;
    if pattern.is_empty() {
        return Err(SearchError::EmptyPattern);
    }
    if params.pattern_len != pattern.len() {
        return Err(SearchError::PatternLengthMismatch {
            expected: params.pattern_len,
            actual: pattern.len(),
        });
    }
    let mut result = ResultSet {
        pattern: pattern.clone(),
        params: *params,
        w1: Vec::new(),
        w2: Vec::new(),
        w3: Vec::new(),
        timings: Timings::default(),
        stats: StatsSnapshot::default(),
        warning: None,
    };
    if pattern.len() > doc.len() {
        result.warning = Some(OVERSIZED_PATTERN_WARNING.to_string());
        return Ok(result);
    }
    let p = pattern.symbols();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1000.0;

    let t = Instant::now();
    result.w1 = phase1_scan(doc, p, params, ctx)?;
    result.timings.phase1 = ms(t);

    let t = Instant::now();
    result.w2 = phase2_shrink(doc, p, &result.w1, params, ctx)?;
    result.timings.phase2 = ms(t);

    let t = Instant::now();
    let own = pattern.fragment().map(|f| (f.b, f.e));
    result.w3 = phase3_filter(doc, p, &result.w2, params, own, ctx)?;
    result.timings.phase3 = ms(t);

    result.stats = ctx.snapshot();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance;

    #[test]
    fn three_planted_copies() {
        let p = "the service account needs write access to the bucket";
        let gap = " 0 1 2 3 4 5 6 7 8 9 ".repeat(4);
        let text = format!("{p}{gap}{p}{gap}{p}");
        let doc = Document::from_text("d", &text);
        let pat = Pattern::from_text(p);
        let params = SearchParams::new(0.9, pat.len()).unwrap();
        let r = search(&doc, &pat, &params).unwrap();
        assert_eq!(r.w3.len(), 3);
        for (i, s) in r.w3.iter().enumerate() {
            let start = i * (p.len() + gap.len());
            assert_eq!(
                (s.fragment.b, s.fragment.e, s.distance),
                (start, start + p.len() - 1, 0)
            );
        }
    }

    #[test]
    fn absent_pattern_gives_nothing() {
        let doc = Document::from_text("d", &"abcdefghij".repeat(20));
        let pat = Pattern::from_text("zyxwvutsrq");
        let r = search(&doc, &pat, &SearchParams::new(0.8, 10).unwrap()).unwrap();
        assert!(r.w1.is_empty() && r.w3.is_empty());
    }

    #[test]
    fn exact_only_at_k_one() {
        let doc = Document::from_text("d", "alpha beta gamma, alpha beta gamma; alpha bета gamma");
        let pat = Pattern::from_interval(&doc, 0, 15).unwrap();
        let params = SearchParams::new(1.0, pat.len())
            .unwrap()
            .with_optimizations(Optimizations {
                extend_to_words: false,
                ..Optimizations::all()
            });
        let r = search(&doc, &pat, &params).unwrap();
        assert_eq!(r.w3.len(), 2);
        assert!(r.w3.iter().all(|s| s.distance == 0));
        assert!(r
            .w3
            .iter()
            .all(|s| distance::d(doc.slice(&s.fragment), pat.symbols()) == 0));
    }

    #[test]
    fn exclude_self() {
        let doc = Document::from_text("d", "one two three four / one two three four");
        let pat = Pattern::from_interval(&doc, 0, 17).unwrap();
        let base = SearchParams::new(0.9, pat.len()).unwrap();
        assert_eq!(search(&doc, &pat, &base).unwrap().w3.len(), 2);
        let r = search(&doc, &pat, &base.with_exclude_self(true)).unwrap();
        assert_eq!(r.w3.len(), 1);
        assert_eq!(r.w3[0].fragment.b, 21);
    }

    #[test]
    fn oversized_and_bad_inputs() {
        let doc = Document::from_text("d", "tiny");
        let pat = Pattern::from_text("longer than tiny");
        let r = search(&doc, &pat, &SearchParams::new(0.8, pat.len()).unwrap()).unwrap();
        assert!(r.w3.is_empty());
        assert_eq!(r.warning.as_deref(), Some(OVERSIZED_PATTERN_WARNING));
        let json = serde_json::to_value(r.to_json(&doc)).unwrap();
        assert_eq!(json["warning"], OVERSIZED_PATTERN_WARNING);

        let empty = Pattern::from_text("");
        let p0 = SearchParams {
            pattern_len: 0,
            ..SearchParams::new(0.8, 1).unwrap()
        };
        assert_eq!(search(&doc, &empty, &p0), Err(SearchError::EmptyPattern));
        assert!(matches!(
            search(&doc, &Pattern::from_text("ti"), &SearchParams::new(0.8, 3).unwrap()),
            Err(SearchError::PatternLengthMismatch { .. })
        ));
        assert!(matches!(
            Pattern::from_interval(&doc, 2, 9),
            Err(SearchError::PatternOutOfBounds(_))
        ));
    }

    #[test]
    fn cancellation_and_timeout() {
        let doc = Document::from_text("d", &"some words repeat here ".repeat(50));
        let pat = Pattern::from_interval(&doc, 0, 40).unwrap();
        let params = SearchParams::new(0.8, pat.len()).unwrap();
        let control = Control::new();
        control.clone().cancel();
        let ctx = SearchContext::new(Arc::new(DistanceCache::new(16)), control);
        assert!(matches!(
            search_with(&doc, &pat, &params, &ctx),
            Err(SearchError::Cancelled {
                phase: Phase::Scan,
                partial: 0
            })
        ));
        let ctx = SearchContext::new(
            Arc::new(DistanceCache::new(16)),
            Control::new().with_deadline(Instant::now()),
        );
        assert!(matches!(
            search_with(&doc, &pat, &params, &ctx),
            Err(SearchError::TimedOut { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let doc = Document::from_text("d", "ab \"x\" ab \"x\"");
        let pat = Pattern::from_interval(&doc, 0, 5).unwrap();
        let r = search(&doc, &pat, &SearchParams::new(1.0, pat.len()).unwrap()).unwrap();
        let v = serde_json::to_value(r.to_json(&doc)).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["elements", "k", "k_di", "pattern", "timings_ms"]);
        assert_eq!(v["elements"][0]["text"], "ab \"x\"");
        assert_eq!(v["elements"].as_array().unwrap().len(), 2);
        for key in ["phase1", "phase2", "phase3"] {
            assert!(v["timings_ms"][key].is_number());
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let doc = Document::from_text("d", &"configure owner; configure owners; config owner. ".repeat(6));
        let pat = Pattern::from_interval(&doc, 0, 15).unwrap();
        let params = SearchParams::new(0.7, pat.len()).unwrap();
        let a = search(&doc, &pat, &params).unwrap().to_json(&doc).without_timings();
        for _ in 0..3 {
            assert_eq!(search(&doc, &pat, &params).unwrap().to_json(&doc).without_timings(), a);
        }
    }
}
