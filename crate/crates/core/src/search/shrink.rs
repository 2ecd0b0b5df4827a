//! Phase 2: inside each scan survivor, find the sub-fragment closest to the
//! pattern, preferring longer fragments on ties.
//!
//! For a fixed start `a`, one DP sweep yields `lcs(p, text[a..a + l])` for
//! every length `l` at once; those rows are the unit of work and of reuse.

use std::sync::atomic::Ordering;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::{Phase, Scored, SearchContext, SearchError, SearchParams};
use crate::corpus::Document;
use crate::distance::{self, prefix_lcs_row};

/// Survivors whose starts lie further apart than this many window lengths
/// do not share a row store.
const BATCH_SPAN_WINDOWS: usize = 4;

/// Lazily computed prefix-LCS rows for starts in `base..end`.
struct RowStore<'a> {
    text: &'a [char],
    pattern: &'a [char],
    base: usize,
    end: usize,
    max_len: usize,
    rows: Vec<OnceLock<Box<[u32]>>>,
}

impl<'a> RowStore<'a> {
    fn new(text: &'a [char], pattern: &'a [char], base: usize, end: usize, max_len: usize) -> Self {
        RowStore {
            text,
            pattern,
            base,
            end,
            max_len,
            rows: (base..end).map(|_| OnceLock::new()).collect(),
        }
    }

    fn row(&self, a: usize, ctx: &SearchContext) -> &[u32] {
        self.rows[a - self.base].get_or_init(|| {
            ctx.stats.rows.fetch_add(1, Ordering::Relaxed);
            let len = self.max_len.min(self.end - a);
            prefix_lcs_row(self.pattern, &self.text[a..a + len]).into_boxed_slice()
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Candidate {
    distance: usize,
    len: usize,
    b: usize,
}

impl Candidate {
    /// Smaller distance wins, then the longer fragment, then the leftmost.
    fn beats(&self, other: &Candidate) -> bool {
        (self.distance, std::cmp::Reverse(self.len), self.b) < (other.distance, std::cmp::Reverse(other.len), other.b)
    }
}

/// `Compare` on fragments of one document: true iff `w1` is strictly closer
/// to the pattern, or equally close and strictly longer.
pub fn compare(doc: &Document, w1: &Scored, w2: &Scored, pattern: &[char]) -> bool {
    let d1 = distance::d(doc.slice(&w1.fragment), pattern);
    let d2 = distance::d(doc.slice(&w2.fragment), pattern);
    d1 < d2 || (d1 == d2 && w1.fragment.len() > w2.fragment.len())
}

fn shrink_one(
    w: &Scored,
    store: &RowStore<'_>,
    params: &SearchParams,
    ctx: &SearchContext,
) -> Result<Candidate, SearchError> {
    ctx.control.check(Phase::Shrink)?;
    let m = params.pattern_len;
    let (s, e) = (w.fragment.b, w.fragment.e);
    let (lo, hi) = params.shrink_lengths();
    let top = hi.min(e - s + 1);
    let mut best = Candidate {
        distance: w.distance,
        len: e - s + 1,
        b: s,
    };
    let mut examined = 0u64;
    let mut consider = |cand: Candidate, best: &mut Candidate| {
        examined += 1;
        if cand.beats(best) {
            *best = cand;
        }
    };
    if lo > top {
        return Ok(best);
    }
    if params.optimizations.shrink_skip {
        for l in lo..=top {
            let mut d_min = usize::MAX;
            let mut a = s;
            while a + l - 1 <= e {
                let dist = m + l - 2 * store.row(a, ctx)[l - 1] as usize;
                consider(
                    Candidate {
                        distance: dist,
                        len: l,
                        b: a,
                    },
                    &mut best,
                );
                d_min = d_min.min(dist);
                a += if dist > d_min + 1 { (dist - d_min) / 2 } else { 1 };
            }
        }
    } else {
        for a in s..=e + 1 - lo {
            let row = store.row(a, ctx);
            for l in lo..=top.min(e + 1 - a) {
                let dist = m + l - 2 * row[l - 1] as usize;
                consider(
                    Candidate {
                        distance: dist,
                        len: l,
                        b: a,
                    },
                    &mut best,
                );
            }
        }
    }
    ctx.stats.candidates.fetch_add(examined, Ordering::Relaxed);
    Ok(best)
}

/// Splits survivors (sorted by start) into runs of overlapping windows.
fn batches(w1: &[Scored], span: usize) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut max_e = 0;
    for (i, w) in w1.iter().enumerate() {
        if i > start && (w.fragment.b > max_e || w.fragment.b > w1[start].fragment.b + span) {
            out.push(start..i);
            start = i;
        }
        max_e = if i == start {
            w.fragment.e
        } else {
            max_e.max(w.fragment.e)
        };
    }
    if start < w1.len() {
        out.push(start..w1.len());
    }
    out
}

/// One output per survivor, in the order of `w1`.
pub fn phase2_shrink(
    doc: &Document,
    pattern: &[char],
    w1: &[Scored],
    params: &SearchParams,
    ctx: &SearchContext,
) -> Result<Vec<Scored>, SearchError> {
    params.validate()?;
    let text = doc.symbols();
    let (_, hi) = params.shrink_lengths();
    let to_scored = |c: Candidate| Scored::new(doc, c.b, c.b + c.len - 1, c.distance);

    if !params.optimizations.reuse_and_parallelize {
        let mut out = Vec::with_capacity(w1.len());
        for w in w1 {
            let store = RowStore::new(text, pattern, w.fragment.b, w.fragment.e + 1, hi);
            match shrink_one(w, &store, params, ctx) {
                Ok(c) => out.push(to_scored(c)),
                Err(e) => return Err(e.with_partial(out.len())),
            }
        }
        return Ok(out);
    }

    let mut order: Vec<usize> = (0..w1.len()).collect();
    order.sort_by_key(|&i| (w1[i].fragment.b, w1[i].fragment.e));
    let sorted: Vec<Scored> = order.iter().map(|&i| w1[i].clone()).collect();
    let span = BATCH_SPAN_WINDOWS * params.window_len().max(1);
    let results: Vec<Result<Vec<Candidate>, SearchError>> = batches(&sorted, span)
        .into_par_iter()
        .map(|range| {
            let batch = &sorted[range];
            let base = batch[0].fragment.b;
            let end = batch.iter().map(|w| w.fragment.e + 1).max().unwrap();
            let store = RowStore::new(text, pattern, base, end, hi);
            batch.par_iter().map(|w| shrink_one(w, &store, params, ctx)).collect()
        })
        .collect();
    let mut shrunk = vec![None; w1.len()];
    let mut done = 0;
    let mut flat = order.iter();
    for batch in results {
        match batch {
            Ok(cands) => {
                for c in cands {
                    shrunk[*flat.next().unwrap()] = Some(to_scored(c));
                    done += 1;
                }
            }
            Err(e) => return Err(e.with_partial(done)),
        }
    }
    Ok(shrunk.into_iter().map(Option::unwrap).collect())
}
